#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "foliate/geometry.hpp"
#include "foliate/paths.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

// Where the levels go. ReducedShell keeps every ball inside R0 with
// R0 < min(R, sqrt(r^2 + eta^2/4)), which bounds diameters by geometry alone.
// FullShell spreads levels over all of (r, R) and bounds 2a < eta directly.
enum class Placement { ReducedShell, FullShell };

struct BuildConfig {
    Placement placement = Placement::ReducedShell;
    double reduced_fraction = 0.98;  // R0 = r + fraction * (bound - r)
    double c_gap = 0.9;              // a = c_gap * sqrt((1 - offset) * spacing in rho^2)
    double level_offset = 0.5;       // rho_i^2 = lo^2 + (i + offset) * spacing
    int initial_levels = 1;
    int max_levels = 1 << 12;
    std::size_t max_components = 60000;
    std::size_t max_per_level = 0;  // 0 packs every level full; otherwise a sparse labyrinth
    // With a divisor passed to build: skip balls with 1e-7 <= min|h| < v_clearance,
    // i.e. balls that pass close to V without meeting it. 0 disables.
    double v_clearance = 0.0;
    int max_rounds = 12;
    double candidates_per_disc = 12.0;
    double clearance = 1e-4;
    std::uint64_t seed = 1;
    PathSearchConfig search{};
};

struct BuildRound {
    int levels = 0;
    std::size_t components = 0;
    double radius = 0.0;
    double best_length = std::numeric_limits<double>::infinity();
};

class BuildBudgetExceeded : public Error {
public:
    BuildBudgetExceeded(const std::string& what, std::vector<BuildRound> rounds)
        : Error(what), rounds_(std::move(rounds)) {}
    const std::vector<BuildRound>& rounds() const { return rounds_; }

private:
    std::vector<BuildRound> rounds_;
};

struct TangentLabyrinth {
    Shell shell{1.0, 2.0};
    double r0 = 0.0;  // outer radius of the placement region
    std::vector<TangentBall> components;
    std::vector<int> level;  // radial level index per component
    TidyCertificate tidy;
    double delta_target = 0.0;
    double eta_target = 0.0;
    bool certified = false;
    double best_crossing = std::numeric_limits<double>::infinity();  // shortest avoiding path found
    std::vector<BuildRound> history;

    bool empty() const { return components.empty(); }
};

// sqrt(r^2 + eta^2/4) capped by R, pulled toward r by `fraction`.
double reduced_outer_radius(const Shell& shell, double eta, double fraction);

// Certified-feedback construction: place m nested levels, check crossing
// cost with the path searcher, double m until no path of length <= delta is
// found. Throws BuildBudgetExceeded at the caps.
TangentLabyrinth build(const Shell& shell, double delta, double eta, int n, const BuildConfig& cfg,
                       const Divisor* v = nullptr);

// Levels at rho_1 < ... < rho_m with equal radius a, deterministic in seed.
// Exposed for tests and for callers that certify on their own.
TangentLabyrinth place_levels(const Shell& shell, double lo, double hi, int levels, double eta,
                              int n, const BuildConfig& cfg, std::uint64_t seed, const Divisor* v = nullptr);

// ---------------------------------------------------------------- split

struct SplitConfig {
    double tol = 1e-9;
    double guard = 100.0;
    std::size_t samples = 256;
    int refine_iters = 60;
};

struct LabyrinthSplit {
    std::vector<std::size_t> lambda_V;
    std::vector<std::size_t> lambda_0;
    std::vector<double> min_abs_h;  // per component; +inf when V is empty
    double tol = 0.0;
    double guard = 0.0;
    std::size_t samples = 0;
};

class AmbiguousClassification : public Error {
public:
    AmbiguousClassification(std::size_t index, double value)
        : Error("component " + std::to_string(index) + " has min|h| = " + std::to_string(value) +
                " inside the guard band"),
          index_(index), value_(value) {}
    std::size_t index() const { return index_; }
    double value() const { return value_; }

private:
    std::size_t index_;
    double value_;
};

// min |h| over the disc: best of the ring samples, then Gauss-Newton steps
// whose linear subproblem is solved exactly on the disc, with backtracking.
double min_abs_on_disc(const Divisor& v, const TangentBall& t, std::size_t samples, int refine_iters);

// v == nullptr means V is empty.
LabyrinthSplit split(const TangentLabyrinth& lab, const Divisor* v, const SplitConfig& cfg);

// ---------------------------------------------------------------- inflate

struct InflateConfig {
    double fraction = 0.25;
    double floor = 1e-9;
    std::size_t v_samples = 4096;
    std::uint64_t seed = 7;
};

// T_{a,sigma} = {z : dist(z, T_a) <= sigma * mu} for sigma in {1, 2}.
struct InflatedPair {
    double mu = 0.0;
    std::vector<std::size_t> members;  // indices into the labyrinth (the Lambda_0 components)
    std::string limiting_term;

    bool empty() const { return members.empty(); }
    // True if z lies in the sigma-inflation of some member.
    bool contains(const TangentLabyrinth& lab, double sigma, const Vec& z) const;
};

// dist(T, V) estimated from sampled points of V refined by alternating
// projections. The value is attained by a pair of points, so it can only
// overestimate the true distance by the refinement error.
double distance_to_divisor(const TangentBall& t, const Divisor& v, std::span<const Vec> v_samples);

InflatedPair inflate(const LabyrinthSplit& sp, const TangentLabyrinth& lab, const Divisor* v, double r_ball,
                     const InflateConfig& cfg);

// ---------------------------------------------------------------- nesting

struct NestingCertificate {
    double r_ball = 0.0;
    std::vector<double> radii;  // s_0 < s_1 < ... < s_k
};

class NoSeparation : public Error {
public:
    using Error::Error;
};

// Radii s_0 < ... < s_k with r_ball < s_0 such that level i lies inside
// s_i B and outside the closed s_{i-1} B.
NestingCertificate nesting_order(const TangentLabyrinth& lab, double r_ball);

// ---------------------------------------------------------------- avoidance

struct AvoidanceNeighborhood {
    std::vector<TangentBall> base;
    double nu = 0.0;

    bool contains(const Vec& z) const;
};

// nu = mu/2 when mu > 0; otherwise `fraction` of the smallest gap among the
// components and to the shell spheres. Shrunk if needed so the inflation
// stays inside the open shell.
AvoidanceNeighborhood avoidance_neighborhood(const TangentLabyrinth& lab, double mu, double fraction = 0.25);

// ---------------------------------------------------------------- json

void to_json(json& j, const BuildRound& r);
void to_json(json& j, const TangentLabyrinth& lab);
TangentLabyrinth labyrinth_from_json(const json& j);
void to_json(json& j, const LabyrinthSplit& s);
LabyrinthSplit split_from_json(const json& j);
void to_json(json& j, const InflatedPair& p);
InflatedPair inflated_from_json(const json& j);
void to_json(json& j, const AvoidanceNeighborhood& o);
AvoidanceNeighborhood avoidance_from_json(const json& j);

}  // namespace foliate
