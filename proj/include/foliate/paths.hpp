#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "foliate/geometry.hpp"
#include "foliate/polynomial.hpp"
#include "foliate/sampling.hpp"

namespace foliate {

class PointGrid;

struct Polyline {
    std::vector<Vec> points;

    double length() const;
    std::vector<double> segment_lengths() const;
    // |first| <= r and |last| >= R (with tolerance).
    bool crosses(const Shell& shell, double tol = 1e-9) const;
};

// Feasibility predicate for crossing paths. Implementations must be safe to
// call concurrently.
class PathConstraint {
public:
    virtual ~PathConstraint() = default;
    virtual bool point_ok(const Vec& p) const = 0;
    virtual bool segment_ok(const Vec& a, const Vec& b) const = 0;
    virtual Eigen::Index ambient_dim() const = 0;
    // Extra roadmap nodes concentrated where paths squeeze past obstacles.
    // Default: bridge sampling toward the boundary of the feasible set.
    virtual std::vector<Vec> hint_nodes(Rng& rng, const Shell& shell, std::size_t count) const;
};

// Stay at distance > clearance from every tangent ball.
class ObstacleConstraint : public PathConstraint {
public:
    ObstacleConstraint(std::vector<TangentBall> balls, double clearance, Eigen::Index ambient_dim);

    bool point_ok(const Vec& p) const override;
    bool segment_ok(const Vec& a, const Vec& b) const override;
    Eigen::Index ambient_dim() const override { return dim_; }
    std::vector<Vec> hint_nodes(Rng& rng, const Shell& shell, std::size_t count) const override;

    const std::vector<TangentBall>& balls() const { return balls_; }

private:
    // Indices of balls that may come within clearance of the segment [a, b].
    std::vector<std::uint32_t> near_segment(const Vec& a, const Vec& b) const;

    std::vector<TangentBall> balls_;
    double clearance_;
    Eigen::Index dim_;
    double reach_ = 0.0;  // max radius + clearance
    std::shared_ptr<const PointGrid> grid_;
};

// lambda <= |F| <= 1/lambda, checked at points spaced at most `resolution`.
class BandConstraint : public PathConstraint {
public:
    BandConstraint(const CandidateMap& f, double lambda, double resolution);

    bool point_ok(const Vec& p) const override;
    bool segment_ok(const Vec& a, const Vec& b) const override;
    Eigen::Index ambient_dim() const override { return 2 * f_.n(); }

private:
    const CandidateMap& f_;
    double lambda_;
    double resolution_;
};

struct PathSearchConfig {
    int restarts = 100;
    int roadmap_nodes = 2500;
    int neighbors = 14;
    int shortening_sweeps = 200;
    double hint_fraction = 0.5;
    std::uint64_t seed = 1;
    // Stop as soon as a restart finds a crossing of length <= this value.
    double early_exit_length = -std::numeric_limits<double>::infinity();
    unsigned threads = 0;  // 0: FOLIATE_THREADS or hardware concurrency
};

struct PathSearchResult {
    bool feasible = false;  // false: no restart connected the two spheres
    double length = std::numeric_limits<double>::infinity();
    Polyline path;
    std::vector<double> restart_lengths;  // +inf where a restart failed
};

// Shortest crossing of the shell found by multi-restart lazy roadmap search
// followed by stochastic shortening. Every returned path is feasible, so the
// length is an upper bound on the true minimum.
PathSearchResult search_crossing(const Shell& shell, const PathConstraint& constraint,
                                 const PathSearchConfig& cfg);

// Re-checks every point and segment of a path against the constraint.
bool replay_feasible(const Polyline& path, const PathConstraint& constraint);

unsigned worker_threads(unsigned requested);

}  // namespace foliate
