#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foliate/induction.hpp"
#include "foliate/verify.hpp"

namespace foliate {

inline constexpr const char* kToolVersion = "0.4.0";

struct VerifyOptions {
    double band_lambda = 0.2;
    int restarts = 100;
    int roadmap_nodes = 2500;
    int shortening_sweeps = 200;
    double band_resolution = 2e-3;
    std::size_t interpolation_points = 1000;
    std::size_t zero_starts = 1000;
    double zero_floor = 1e-6;
    std::vector<cplx> trace_offsets{cplx(0.0), cplx(0.1, 0.0), cplx(0.0, 0.1)};  // second coordinate of start guesses
    double trace_abs_c = 0.3;
    double trace_step = 1e-3;
    double trace_slack = 0.05;  // shell arclength must exceed delta_j (1 - slack)
    std::size_t rays = 16;
    std::size_t ray_samples = 64;
    std::uint64_t seed = 21;
};

struct RunConfig {
    int n = 2;
    int s = 2;
    Mode mode;
    Divisor divisor;
    std::string divisor_text;  // as written in the config
    Schedule schedule;
    InductionConfig induction;
    VerifyOptions verify;
    std::uint64_t seed = 1;

    int q() const { return divisor.q(); }
};

// Parses "z1", "z1 + 2", "0.5*z1^2*z2 - (0,1)*z2" in n variables.
MultiPoly parse_polynomial(const std::string& text, int n);

// Defaults: h = z1, EXACT_ZERO, BALL, default schedule with 2 steps.
RunConfig default_config();
// Flat key = value file with [section] tables, or JSON (by extension or a
// leading '{'). Validates before returning; throws ConfigError.
RunConfig load_config(const std::filesystem::path& file);
RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);
// Fans the master seed out to every stochastic stage.
void apply_seed(RunConfig& c);
std::string config_hash(const RunConfig& c);

// ---------------------------------------------------------------- run directory

class RunDirError : public Error {
public:
    using Error::Error;
};

// Exclusive ownership of a run directory via an O_EXCL lock file.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path file_;
};

void write_json_atomic(const std::filesystem::path& file, const json& j);
json read_json(const std::filesystem::path& file);

struct ConstructResult {
    int exit_code = 0;
    int accepted_steps = 0;
    std::string message;
};

// Runs init, the steps and finalize, checkpointing every step. With resume,
// accepted steps already on disk are loaded and never rewritten.
ConstructResult construct(const RunConfig& cfg, const std::filesystem::path& dir, bool resume);

// Rebuilds the state from a run directory (accepted steps only).
struct LoadedRun {
    RunConfig config;
    std::optional<InductionState> state;
    bool finalized = false;
};
LoadedRun load_run(const std::filesystem::path& dir);

// ---------------------------------------------------------------- verification

struct InterpolationCheck {
    std::size_t points = 0;
    double max_value = 0.0;      // max |F| on V samples
    double max_jac_diff = 0.0;   // max ||dF - dh||
    bool pass = false;
};

struct BandCheck {
    double lambda = 0.0;
    std::optional<int> j_lambda;
    std::vector<int> shells;               // j_lambda .. J
    std::vector<PathSearchResult> final_paths;  // per shell, final map
    std::optional<PathSearchResult> baseline;   // shell j_lambda, F_0
    bool final_pass = false;     // no band path <= delta_j in any listed shell
    bool baseline_short = false; // baseline found a crossing <= 1.5 thickness
    bool pass = false;
};

struct TraceCheck {
    cplx c;
    std::vector<TraceLedger> final_traces;
    std::vector<TraceLedger> baseline_traces;
    std::vector<std::string> errors;
    bool final_pass = false;
    bool baseline_short = false;
    bool residual_ok = false;
    bool pass = false;
};

struct VerificationReport {
    std::vector<bool> c1, c5, c7;  // per step
    std::vector<std::size_t> histogram_inside;
    std::vector<double> rank_margins;
    InterpolationCheck interpolation;
    ZeroScanReport zeros;
    bool zeros_pass = false;
    BandCheck band;
    TraceCheck trace;
    BandSummary completeness;
    std::vector<TruncationRow> truncation;
    bool halving_ok = false;
    bool counterexample = false;  // a short band path or a forbidden zero
};

InterpolationCheck check_interpolation(const CandidateMap& f, double radius, std::size_t points, std::uint64_t seed);
BandCheck check_band(const InductionState& st, const VerifyOptions& opt);
TraceCheck check_trace(const InductionState& st, const VerifyOptions& opt);
VerificationReport verify_state(const InductionState& st, const VerifyOptions& opt);

void to_json(json& j, const InterpolationCheck& c);
void to_json(json& j, const BandCheck& c);
void to_json(json& j, const TraceCheck& c);
void to_json(json& j, const VerificationReport& r);

// verify.json and paths.csv in the run directory. Exit code 0, or 4 on a
// counterexample.
int verify_run(const std::filesystem::path& dir, const VerifyOptions& opt);
// trace.csv for one fiber.
int trace_run(const std::filesystem::path& dir, cplx c, const Vec& start, double step);
// report.json, ray.csv, histogram.csv.
int report_run(const std::filesystem::path& dir);

}  // namespace foliate
