#pragma once
// Mapping torus of a hyperbolic toral automorphism under a roof.
#include <Eigen/Dense>
#include <random>
#include <string>

#include "hypcode/fixed.hpp"

namespace hyp {

enum class RoofKind { Const, Cos, Stretch };

RoofKind parse_roof_kind(const std::string& s);
std::string roof_kind_name(RoofKind k);

struct ModelConfig {
    Mat2i A{2, 1, 1, 1};
    RoofKind roof = RoofKind::Const;
    double delta = 0.1;
    double chi = 0.5, beta = 1.0, rho = 0.2, eps = 0.02;
    // stretch model only: centre and width of the slowdown bump
    double stretch_u1 = 0.3, stretch_u2 = 0.6, stretch_width = 0.1;
};

struct PointM {
    Torus2 u;
    double h = 0.0;
};

class ModelFlow {
public:
    explicit ModelFlow(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const Mat2i& A() const { return A_; }
    const Mat2i& Ainv() const { return Ainv_; }
    const Eigen::Matrix2d& Ad() const { return Ad_; }
    double lambda() const { return lambda_; }
    double log_lambda() const { return std::log(lambda_); }
    double roof_min() const { return rmin_; }
    double roof_max() const { return rmax_; }
    bool constant_roof() const { return cfg_.roof == RoofKind::Const; }

    double roof(const Torus2& u) const { return roof_at(u.a.unit(), u.b.unit()); }
    // roof in quad precision, for time differences between nearby points
    f128 roof_q(const Torus2& u) const;
    double roof_at(double u1, double u2) const;
    Eigen::Vector2d roof_grad(const Torus2& u) const;

    // exact eigen-directions of A, unit length, first components positive
    const Eigen::Vector2d& ns() const { return ns_; }
    const Eigen::Vector2d& nu() const { return nu_; }

    PointM normalize(PointM x) const;
    PointM random_point(std::mt19937_64& rng) const;

private:
    ModelConfig cfg_;
    Mat2i A_, Ainv_;
    Eigen::Matrix2d Ad_;
    double lambda_ = 1.0, rmin_ = 1.0, rmax_ = 1.0;
    Eigen::Vector2d ns_, nu_;
};

Torus2 random_torus(std::mt19937_64& rng);

// number of roof crossings of the orbit segment [0,t] (negative for t<0)
long crossings(const ModelFlow& m, const PointM& x, double t);
PointM flow(const ModelFlow& m, const PointM& x, double t);
// frame (e1, e2, X); e1, e2 span the fibre, X = d/dh
Eigen::Matrix3d dflow(const ModelFlow& m, const PointM& x, double t);
Eigen::Vector3d one_form_project(const ModelFlow& m, const PointM& x, const Eigen::Vector3d& v);
Eigen::Matrix2d induced_phi(const ModelFlow& m, const PointM& x, double t);
Eigen::Matrix2d matrix_power(const ModelFlow& m, long k);

struct Splitting {
    Eigen::Vector2d ns, nu;
    int iterations = 0;
    bool converged = false;
};
Splitting splitting_directions(const ModelFlow& m, const PointM& x);

std::string format_point(const PointM& x);
double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

} // namespace hyp
