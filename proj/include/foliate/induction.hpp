#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "foliate/labyrinth.hpp"
#include "foliate/okaweil.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

enum class Variant { Interpolate, ExactZero, AllComplete };
enum class Ambient { Ball, FullSpace };

struct Mode {
    Variant variant = Variant::ExactZero;
    Ambient ambient = Ambient::Ball;
};

std::string to_string(Variant v);
std::string to_string(Ambient a);
Variant variant_from_string(const std::string& s);
Ambient ambient_from_string(const std::string& s);

class ScheduleError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Entry k describes step j = k + 1.
struct Schedule {
    std::vector<double> r, R, delta, lambda;
    double eps0 = 0.1;

    int steps() const { return static_cast<int>(r.size()); }
    // Radius of the ball the step-1 margin is measured on.
    double r_before_first() const { return r.empty() ? 0.0 : 0.5 * r.front(); }
    double outer_before(int j) const { return j <= 1 ? r_before_first() : R[static_cast<std::size_t>(j - 2)]; }
    // Largest radius the construction ever touches.
    double reach() const { return R.empty() ? 0.0 : R.back(); }
};

// r_j = 1 - 2^{-j-1} (Ball) or 2^j (FullSpace), R_j the midpoint to r_{j+1},
// delta_j = j, lambda_j = 4^{-j}.
Schedule default_schedule(int steps, Ambient ambient, double eps0 = 0.1);

// Throws ScheduleError naming the first broken condition.
void validate(const Schedule& s, Ambient ambient);

class NotSubmersive : public Error {
public:
    using Error::Error;
};
class EtaFloor : public Error {
public:
    using Error::Error;
};
class NotReached : public Error {
public:
    using Error::Error;
};
class StepFailed : public Error {
public:
    StepFailed(const std::string& what, int step, std::string stage) : Error(what), step_(step), stage_(std::move(stage)) {}
    int step() const { return step_; }
    const std::string& stage() const { return stage_; }

private:
    int step_;
    std::string stage_;
};

struct EtaConfig {
    double start_factor = 0.9;  // eta_0 = start_factor * lambda / max |dF| on V
    double shrink = 0.9;
    double floor = 1e-9;
    std::size_t v_samples = 512;
    std::size_t offsets = 4;    // tube points per V sample
    double off_v_tol = 1e-12;   // |h| below this counts as on V
    double zero_floor = 1e-12;  // the extra factor must stay above this off V
    std::uint64_t seed = 5;
};

struct InductionConfig {
    int s = 2;
    double cauchy_safety = 4.0;
    std::size_t margin_samples = 4096;
    double rank_floor = 1e-8;
    EtaConfig eta;
    BuildConfig build;
    SplitConfig split;
    InflateConfig inflate;
    SamplingConfig sampling;
    PhiConfig phi;
    FitConfig fit;  // eps_prime and scale are set per step
    double c1_slack = 2.0;
    std::size_t neighborhood_samples_per_component = 16;
    std::size_t max_neighborhood_samples = 20000;
    int split_retries = 3;
    std::uint64_t seed = 1;
};

struct StepRecord {
    int j = 0;
    double eps = 0.0;
    double eta = 0.0;
    double eps_prime = 0.0;
    double h_floor = 0.0;  // min |h|^s on Delta1 samples
    TangentLabyrinth labyrinth;
    LabyrinthSplit split;
    InflatedPair inflated;
    AvoidanceNeighborhood avoidance;
    PhiSpec phi;
    FitReport fit;
    double rank_margin = 0.0;  // min over R_{j-1} ball samples of the new map
    std::vector<MultiPoly> w;  // correction after this step
    bool accepted = false;
    std::string failure;
};

struct InductionState {
    Mode mode;
    Schedule schedule;
    CandidateMap f;
    int j = 0;
    double initial_margin = 0.0;
    std::vector<StepRecord> records;

    InductionState(Mode m, Schedule s, CandidateMap f0) : mode(m), schedule(std::move(s)), f(std::move(f0)) {}

    bool has_divisor() const { return mode.variant != Variant::AllComplete; }
    // F_k for 0 <= k <= j.
    CandidateMap map_at(int k) const;
    EpsilonBudget budget() const;
};

// F_0 = h (W_0 = 0). Rank margin checked on ball samples, the origin and
// points of V. AllComplete uses s = 0 since V is empty.
InductionState init(const Divisor& h, Mode mode, Schedule schedule, const InductionConfig& cfg);

// Largest eta on the shrinking schedule with |F| < lambda and F != 0 off V on
// tube samples of radius eta around V inside R B. +inf when V is empty.
double compute_eta(const CandidateMap& f, double lambda, double radius, const EtaConfig& cfg);

// Runs step state.j + 1 and appends its record. On failure the record is
// appended with accepted = false and StepFailed is thrown.
void step(InductionState& state, const InductionConfig& cfg);

// eps holds eps_1..eps_J.
int j_lambda(const Schedule& s, std::span<const double> eps, double lambda);

struct TruncationRow {
    int j = 0;
    double eps = 0.0;
    double tail_sum = 0.0;   // sum_{i=j}^J eps_i
    double bound = 0.0;      // 2 eps_j
    bool arithmetic_ok = false;
    double sampled = 0.0;    // max |F_J - F_{j-1}| on r_j B validation samples
    bool sampled_ok = false;
};

struct FinalArtifact {
    CandidateMap f;
    std::vector<TruncationRow> ledger;
    double continuation_budget = 0.0;  // 2 eps_{J+1} < eps_J
    std::string note;
};

FinalArtifact finalize(const InductionState& state, std::size_t samples = 4096, std::uint64_t seed = 9);

void to_json(json& j, const Schedule& s);
Schedule schedule_from_json(const json& j);
void to_json(json& j, const StepRecord& r);
StepRecord step_record_from_json(const json& j, int n);
void to_json(json& j, const TruncationRow& r);
void to_json(json& j, const FinalArtifact& a);

}  // namespace foliate
