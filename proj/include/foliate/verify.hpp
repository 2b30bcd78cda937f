#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foliate/labyrinth.hpp"
#include "foliate/paths.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

// Shortest found crossing of the shell that keeps clearance from every ball
// of the labyrinth. An empty labyrinth gives the radial segment.
PathSearchResult min_avoiding_path(const Shell& shell, const TangentLabyrinth& lab, const PathSearchConfig& cfg,
                                   double clearance = 1e-4);

// Shortest found crossing inside the band lambda <= |F| <= 1/lambda, checked
// at points at most `resolution` apart.
PathSearchResult min_band_path(const Shell& shell, const CandidateMap& f, double lambda, const PathSearchConfig& cfg,
                               double resolution);

// ---------------------------------------------------------------- fiber trace

struct TraceConfig {
    double step = 1e-3;
    double stop_radius = 0.999;
    int max_steps = 200000;
    double tol = 1e-9;       // Newton projection target for |F - c|
    int newton_iters = 20;
    double rank_floor = 1e-10;
    std::vector<Shell> shells;  // arclength is tallied per shell
};

struct TraceRow {
    int step;
    double radius;
    int shell;  // -1 outside every shell
    double cumulative;
    double residual;
};

struct TraceLedger {
    CVec c;
    Polyline path;
    std::vector<double> shell_length;  // per entry of TraceConfig::shells
    std::vector<TraceRow> rows;
    double max_residual = 0.0;
    double total_length = 0.0;
    std::string stop_reason;
};

class RankLoss : public Error {
public:
    using Error::Error;
};

class ProjectionDiverged : public Error {
public:
    using Error::Error;
};

// Follows the fiber F = c from z0, always moving along the kernel direction
// of largest radial growth, and projects back with Newton steps.
TraceLedger trace_fiber(const CandidateMap& f, const CVec& c, const Vec& z0, const TraceConfig& cfg);

// Newton projection of x onto F = c (minimum-norm steps). Returns false if
// the residual does not reach tol.
bool project_to_fiber(const CandidateMap& f, const CVec& c, Vec& x, double tol, int max_iter);

// ---------------------------------------------------------------- zero scan

struct ZeroScanConfig {
    std::size_t starts = 1000;
    double radius = 1.0;
    double floor = 1e-6;
    int iters = 80;
    std::uint64_t seed = 11;
};

struct ZeroHit {
    Vec z;
    double value;   // |1 + h^{s-1} W| at the local minimizer
    int component;  // which coordinate of F
    int neighborhood = -1;  // index of the avoidance neighborhood containing z, -1 if none
};

struct ZeroScanReport {
    double min_value = std::numeric_limits<double>::infinity();
    std::vector<ZeroHit> below_floor;  // every minimizer under the floor
    std::vector<ZeroHit> violations;   // those inside some recorded neighborhood
    std::size_t starts = 0;

    bool none_below_floor() const { return below_floor.empty(); }
    bool pass() const { return violations.empty(); }
};

// Multi-start local minimization of the extra-zero factor inside the ball.
ZeroScanReport zero_avoidance(const CandidateMap& f, std::span<const AvoidanceNeighborhood> neighborhoods,
                              const ZeroScanConfig& cfg);

// ---------------------------------------------------------------- completeness

struct BandSummary {
    double lambda = 0.0;
    std::optional<int> j_lambda;
    std::vector<int> steps;       // j_lambda .. J
    std::vector<double> deltas;   // certified per-shell costs
    double partial_sum = 0.0;
    std::string argument;
};

// `deltas` holds delta_1..delta_J and `certified` says which shells carry a
// certified labyrinth.
BandSummary completeness_summary(double lambda, std::optional<int> j_lambda, std::span<const double> deltas,
                                 std::span<const bool> certified);

void to_json(json& j, const TraceLedger& t);
void to_json(json& j, const ZeroScanReport& z);
void to_json(json& j, const BandSummary& b);
void to_json(json& j, const PathSearchResult& r);

}  // namespace foliate
