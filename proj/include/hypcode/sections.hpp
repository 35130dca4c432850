#pragma once
// Proper sections made of flat fibre squares at fixed heights.
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/model.hpp"

namespace hyp {

struct SectionConfig {
    int n1 = 6, n2 = 6;        // fibre tiling
    double offset = 0.05;      // tile grid origin, keeps dyadic points off tile edges
    double hat_scale = 1.5;    // security section discs are scaled squares
    double base = 1.0 / 12.0;  // lowest level above the roof crossing
    double margin = 1.0 / 12.0; // top level sits this far below the roof minimum
    double color_step = 0.0072; // height shift per tile colour
    double gap = 1.0 / 6.0;    // target spacing between levels
    int drop_level = -1;       // testing hook: remove one level from every tile
    double min_separation = 1e-3; // overlapping security discs keep at least this height gap
};

SectionConfig default_sections(RoofKind k);

struct Disc {
    int id = 0;
    int tile = 0, level = 0;
    double c1 = 0, c2 = 0;   // fibre centre
    double a1 = 0, a2 = 0;   // half widths
    double height = 0;
    double radius() const;
};

// a point of the section: exact fibre point plus (tile, level)
struct Hit {
    Torus2 u;
    int tile = 0, level = 0;
};

class CoverageFailure : public std::runtime_error {
public:
    CoverageFailure(const std::string& what, PointM w, double t)
        : std::runtime_error(what), witness(w), time(t) {}
    PointM witness;
    double time;
};

class OutOfBox : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CoverReport {
    size_t samples = 0;
    double max_time = 0;
};

struct OrderReport {
    size_t pairs = 0, overlapping = 0;
    double min_separation = 1e9; // smallest height gap between overlapping security discs
    bool ok = false;
};

class Sections {
public:
    Sections(const ModelFlow& m, const SectionConfig& cfg, double rho);

    const ModelFlow& model() const { return *m_; }
    const SectionConfig& config() const { return cfg_; }
    double rho() const { return rho_; }
    int tiles() const { return cfg_.n1 * cfg_.n2; }
    int color(int tile) const;
    const std::vector<double>& levels(int tile) const { return levels_[tile]; }
    const std::vector<Disc>& discs() const { return discs_; }   // Lambda
    const std::vector<Disc>& hat_discs() const { return hat_; } // Lambda hat, same ids
    int disc_id(int tile, int level) const { return first_[tile] + level; }
    const Disc& disc_of(const Hit& h) const { return discs_[disc_id(h.tile, h.level)]; }

    int tile_of(const Torus2& u) const;
    // fibre offset of u from the tile centre, in (-1/2,1/2)
    void tile_coords(int tile, const Torus2& u, double& d1, double& d2) const;
    bool in_box(const Disc& d, const Torus2& u, double slack = 0.0) const;

    double height(const Hit& h) const { return levels_[h.tile][h.level]; }
    PointM point(const Hit& h) const { return {h.u, height(h)}; }
    Hit hit_of(const Torus2& u, int level) const;

    // Poincare return: next hit of Lambda and the elapsed time
    Hit next(const Hit& h, double* t = nullptr, int* crossings = nullptr) const;
    Hit prev(const Hit& h, double* t = nullptr, int* crossings = nullptr) const;
    // first hit at time in [0, inf) from an arbitrary point
    Hit first_hit(const PointM& x, double* t = nullptr) const;

    double min_return_bound() const { return rmin_; }
    double max_return_bound() const { return rmax_; }

    CoverReport check_cover(int grid_fibre, int grid_height) const; // throws CoverageFailure
    OrderReport check_partial_order() const;

    // flow box projection to a disc
    double project_t(const Disc& d, const PointM& x, double window) const; // throws OutOfBox
    PointM project_q(const Disc& d, const PointM& x, double window) const;

    std::string csv() const;

private:
    const ModelFlow* m_;
    SectionConfig cfg_;
    double rho_;
    std::vector<std::vector<double>> levels_;
    std::vector<int> first_;
    std::vector<Disc> discs_, hat_;
    double rmin_ = 0, rmax_ = 0;
    // bounds of the roof over a fibre rectangle
    std::pair<double, double> roof_range(double lo1, double hi1, double lo2, double hi2) const;
    void separate_levels();
};

// holonomy g_x^+ (dir = +1) or g_x^- (dir = -1) restricted to the disc of x
struct Holonomy {
    Hit source, target;
    int crossings = 0;
    double time = 0; // transition time at the source point
};
Holonomy holonomy(const Sections& S, const Hit& x, int dir);
// image of a fibre point y near x under the holonomy, and its transition time
Torus2 holonomy_apply(const Sections& S, const Holonomy& g, const Torus2& y, double* t = nullptr);

} // namespace hyp
