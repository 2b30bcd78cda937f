#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "foliate/labyrinth.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

enum class Region { Ball, LambdaV, Delta1 };

// Fit and validation points on K = r B u L plus the inflated Lambda_0 sets.
struct SampleSet {
    std::vector<Vec> points;
    std::vector<Region> region;
    std::vector<double> weight;
    std::vector<char> validation;    // held out from fitting
    std::vector<char> on_labyrinth;  // lies on a component of L itself

    std::size_t size() const { return points.size(); }
    void add(Vec p, Region r, double w, bool held_out, bool on_lab);
};

struct SamplingConfig {
    std::size_t ball = 4096;
    std::size_t per_component = 256;
    std::size_t max_labyrinth = 40000;  // total over all components, per draw
    double boundary_fraction = 0.5;
    double weight_ball = 1.0;
    double weight_lambda_v = 4.0;
    double weight_delta1 = 4.0;
    std::uint64_t seed = 3;
};

// Points within `margin` of the disc t: an in-plane rim extension plus
// normal offsets.
std::vector<Vec> inflation_samples(const TangentBall& t, double margin, std::size_t count, double phase);

// Training and validation draws (independent low-discrepancy offsets) of the
// ball of radius r_ball, the Lambda_V components and the mu-inflated
// Lambda_0 components.
SampleSet make_samples(double r_ball, const TangentLabyrinth& lab, const LabyrinthSplit& sp, const InflatedPair& inf,
                       int n, const SamplingConfig& cfg);

enum class PhiCase { Identity, Shift, Scale };

struct PhiSpec {
    PhiCase kind = PhiCase::Identity;
    CVec w0;               // Shift
    double C = 1.0;        // Scale
    double max_abs = 0.0;  // max |F_prev| over Delta1 samples
    double min_abs = 0.0;  // min |F_prev| over Delta1 samples
    double lambda = 0.0;
};

struct PhiConfig {
    double margin = 1.0;
    double headroom = 1.1;
    double floor = 1e-12;
};

class ZeroOnLambda0 : public Error {
public:
    using Error::Error;
};

class DivisionFloor : public Error {
public:
    using Error::Error;
};

// Shift: w0 = (M + 1/lambda + margin) e_1. Scale: C = headroom (1/lambda) / min|F_prev|.
// Identity when there are no Delta1 samples.
PhiSpec choose_phi(const CandidateMap& f_prev, const SampleSet& samples, double lambda, PhiCase kind,
                   const PhiConfig& cfg = {});

// phi at a sample: F_prev on the ball and Lambda_V, the shifted or scaled
// map on Delta1.
CVec phi_value(const PhiSpec& phi, const CandidateMap& f_prev, const Vec& x, Region r);

// Per-sample target for W (rows = samples, cols = q), i.e. (phi - h) / h^s,
// with W_prev used directly where phi = F_prev.
CMat build_targets(const PhiSpec& phi, const SampleSet& samples, const CandidateMap& f_prev, double floor = 1e-300);

struct FitConfig {
    std::vector<int> degrees{2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
    double ridge = 0.0;
    double scale = 1.0;       // monomials in z / scale
    double eps_prime = 1e-3;  // residual target on ball and Lambda_V is eps_prime / 2
};

// Conditions checked on validation samples for every trial degree.
struct FitChecks {
    double eps_j = 1.0;
    double lambda_j = 0.5;
    double c1_slack = 2.0;  // (1_j) requires max |F_new - F_prev| < eps_j / c1_slack
    bool all_complete = false;
    std::vector<Vec> neighborhood_samples;  // points of O_1..O_j for (8_j)
    double off_v_tol = 1e-9;   // |h| above this counts as off V
    double zero_floor = 1e-8;  // |1 + h^{s-1} W| must stay above this there
};

struct DegreeTrial {
    int degree = 0;
    double residual_ball = 0.0;      // max |F_new - phi| on ball validation samples
    double residual_lambda_v = 0.0;  // same on Lambda_V
    double residual_delta1 = 0.0;    // same on Delta1
    double min_abs_delta1 = 0.0;     // min |F_new| on Delta1 validation samples
    double train_rms = 0.0;          // weighted training residual
    double c1_value = 0.0;           // max |F_new - F_prev| on ball validation
    std::size_t c7_violations = 0;
    double c8_min = 0.0;
    bool residual_ok = false;
    bool c1 = false, c7 = false, c8 = false;
    bool accepted() const { return residual_ok && c1 && c7 && c8; }
};

struct LabyrinthHistogram {
    double lambda = 0.0;
    std::size_t below = 0, inside = 0, above = 0;  // |F| < lambda, in [lambda, 1/lambda], > 1/lambda
    double min_abs = 0.0, max_abs = 0.0;
    std::vector<double> edges;  // log10 bin edges
    std::vector<std::size_t> counts;
};

struct FitReport {
    int degree = 0;
    double eps_prime = 0.0;
    DegreeTrial best;
    std::vector<DegreeTrial> trials;
    LabyrinthHistogram histogram;
    bool accepted = false;
};

class DegreeCapExceeded : public Error {
public:
    DegreeCapExceeded(const std::string& what, FitReport report) : Error(what), report_(std::move(report)) {}
    const FitReport& report() const { return report_; }

private:
    FitReport report_;
};

// Weighted least squares for W on the training samples, rows weighted in the
// f residual: sqrt(w) h^s m_alpha(z) against sqrt(w) (phi - h). Returns the
// first degree of the schedule whose validation checks all pass.
std::pair<std::vector<MultiPoly>, FitReport> fit(const SampleSet& samples, const PhiSpec& phi,
                                                  const CandidateMap& f_prev, const FitConfig& cfg,
                                                  const FitChecks& checks);

// Solve only: coefficients of W at one degree (used by fit and tests).
std::vector<MultiPoly> solve_correction(const SampleSet& samples, const CMat& rhs_f, const Divisor& h, int s,
                                        int degree, double scale, double ridge, double* train_rms = nullptr);

LabyrinthHistogram labyrinth_histogram(const CandidateMap& f, const SampleSet& samples, double lambda, int bins = 40);

void to_json(json& j, const PhiSpec& p);
PhiSpec phi_from_json(const json& j);
void to_json(json& j, const DegreeTrial& t);
void to_json(json& j, const LabyrinthHistogram& h);
void to_json(json& j, const FitReport& r);
FitReport fit_report_from_json(const json& j);

}  // namespace foliate
