#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "foliate/run.hpp"
#include "foliate/sampling.hpp"

namespace foliate {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

fs::path step_file(const fs::path& dir, int j) {
    std::ostringstream os;
    os << "step_" << std::setw(3) << std::setfill('0') << j << ".json";
    return dir / os.str();
}

// Full round-trip precision for CSV output.
std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<double> accepted_eps(const InductionState& st) {
    std::vector<double> e;
    for (const auto& r : st.records)
        if (r.accepted) e.push_back(r.eps);
    return e;
}

double stop_radius(const InductionState& st) {
    return st.mode.ambient == Ambient::Ball ? 0.999 : st.schedule.reach() * 1.001;
}

std::vector<Shell> shells_of(const Schedule& s) {
    std::vector<Shell> out;
    for (std::size_t k = 0; k < s.r.size(); ++k) out.emplace_back(s.r[k], s.R[k]);
    return out;
}

}  // namespace

RunLock::RunLock(const fs::path& dir) : file_(dir / "run.lock") {
    const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw RunDirError("run directory " + dir.string() + " is locked by another process (" +
                                  file_.string() + " exists)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto w = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(file_, ec);
}

void write_json_atomic(const fs::path& file, const json& j) {
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw RunDirError("cannot write " + tmp.string());
        out << j.dump(1) << '\n';
        if (!out) throw RunDirError("write failed for " + tmp.string());
    }
    fs::rename(tmp, file);
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw RunDirError("cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw RunDirError("malformed JSON in " + file.string() + ": " + e.what());
    }
}

namespace {

// Accepted step records on disk, in order, stopping at the first gap or
// failed step.
void load_steps(const fs::path& dir, InductionState& st) {
    for (int j = 1; j <= st.schedule.steps(); ++j) {
        const fs::path f = step_file(dir, j);
        if (!fs::exists(f)) break;
        StepRecord r;
        try {
            r = step_record_from_json(read_json(f), st.f.n());
        } catch (const json::exception& e) {
            throw RunDirError("malformed step record " + f.string() + ": " + e.what());
        }
        if (!r.accepted) break;
        st.records.push_back(r);
        st.f = CandidateMap(st.f.divisor(), st.f.order(), r.w);
        st.j = j;
    }
}

json seed_fanout(const RunConfig& c) {
    return json{{"master", c.seed},
                {"induction", c.induction.seed},
                {"eta", c.induction.eta.seed},
                {"inflate", c.induction.inflate.seed},
                {"search", c.induction.build.search.seed},
                {"sampling", c.induction.sampling.seed},
                {"verify", c.verify.seed}};
}

}  // namespace

ConstructResult construct(const RunConfig& cfg, const fs::path& dir, bool resume) {
    ConstructResult res;
    try {
        fs::create_directories(dir);
        RunLock lock(dir);
        const fs::path manifest_file = dir / "manifest.json";
        const std::string hash = config_hash(cfg);
        json manifest;
        if (fs::exists(manifest_file)) {
            if (!resume) throw RunDirError("run directory already holds a run; pass --resume to continue it");
            manifest = read_json(manifest_file);
            if (manifest.value("config_hash", "") != hash)
                throw RunDirError("config does not match the run directory (hash " + hash + " vs " +
                                  manifest.value("config_hash", "") + ")");
        } else {
            manifest = json{{"config_hash", hash},
                            {"tool_version", kToolVersion},
                            {"created", timestamp()},
                            {"seeds", seed_fanout(cfg)},
                            {"steps", json::array()}};
            write_json_atomic(dir / "config.json", config_to_json(cfg));
        }

        InductionState st = init(cfg.divisor, cfg.mode, cfg.schedule, cfg.induction);
        if (resume) load_steps(dir, st);
        const int total = st.schedule.steps();
        if (resume && st.j == total && fs::exists(dir / "final.json")) {
            res.accepted_steps = st.j;
            res.message = "run already complete";
            return res;
        }

        for (int j = st.j + 1; j <= total; ++j) {
            json entry{{"j", j}, {"started", timestamp()}};
            std::cerr << "step " << j << "/" << total << " ..." << std::endl;
            try {
                step(st, cfg.induction);
            } catch (const StepFailed& e) {
                write_json_atomic(step_file(dir, j), st.records.back());
                entry["status"] = "failed";
                entry["stage"] = e.stage();
                entry["message"] = e.what();
                entry["finished"] = timestamp();
                manifest["steps"].push_back(entry);
                manifest["acceptance"] = {{"all_steps_accepted", false}, {"accepted_steps", st.j}};
                write_json_atomic(manifest_file, manifest);
                res.exit_code = 3;
                res.accepted_steps = st.j;
                res.message = e.what();
                return res;
            }
            write_json_atomic(step_file(dir, j), st.records.back());
            entry["status"] = "accepted";
            entry["degree"] = st.records.back().fit.degree;
            entry["finished"] = timestamp();
            manifest["steps"].push_back(entry);
            write_json_atomic(manifest_file, manifest);
        }

        const FinalArtifact fin = finalize(st);
        json fj = fin;
        fj["initial_margin"] = st.initial_margin;
        fj["halving_ok"] = st.budget().halving_ok();
        write_json_atomic(dir / "final.json", fj);
        bool ledger_ok = true;
        for (const auto& r : fin.ledger) ledger_ok = ledger_ok && r.arithmetic_ok && r.sampled_ok;
        manifest["acceptance"] = {{"all_steps_accepted", true},
                                  {"accepted_steps", st.j},
                                  {"halving_ok", st.budget().halving_ok()},
                                  {"truncation_ledger_ok", ledger_ok}};
        write_json_atomic(manifest_file, manifest);
        res.accepted_steps = st.j;
        res.message = "all steps accepted";
        return res;
    } catch (const ConfigError& e) {
        res.exit_code = 2;
        res.message = e.what();
    } catch (const RunDirError& e) {
        res.exit_code = 2;
        res.message = e.what();
    } catch (const NotSubmersive& e) {
        res.exit_code = 2;
        res.message = e.what();
    } catch (const fs::filesystem_error& e) {
        res.exit_code = 2;
        res.message = e.what();
    }
    return res;
}

LoadedRun load_run(const fs::path& dir) {
    if (!fs::exists(dir / "config.json")) throw RunDirError(dir.string() + " is not a run directory (no config.json)");
    LoadedRun out;
    try {
        out.config = config_from_json(read_json(dir / "config.json"));
    } catch (const json::exception& e) {
        throw RunDirError(std::string("malformed config.json: ") + e.what());
    }
    out.state.emplace(init(out.config.divisor, out.config.mode, out.config.schedule, out.config.induction));
    load_steps(dir, *out.state);
    out.finalized = fs::exists(dir / "final.json");
    return out;
}

// ---------------------------------------------------------------- verification

InterpolationCheck check_interpolation(const CandidateMap& f, double radius, std::size_t points, std::uint64_t seed) {
    InterpolationCheck c;
    const auto vs = divisor_samples(f.divisor(), points, radius, seed % 100003);
    c.points = vs.size();
    for (const auto& x : vs) {
        const CVec z = to_complex(x);
        CMat jac;
        const CVec v = f.eval_jacobian(z, jac);
        c.max_value = std::max(c.max_value, v.norm());
        c.max_jac_diff = std::max(c.max_jac_diff, (jac - f.divisor().jacobian(z)).norm());
    }
    c.pass = c.points > 0 && c.max_value < 1e-10 && c.max_jac_diff < 1e-8;
    return c;
}

BandCheck check_band(const InductionState& st, const VerifyOptions& opt) {
    BandCheck b;
    b.lambda = opt.band_lambda;
    const auto eps = accepted_eps(st);
    try {
        b.j_lambda = j_lambda(st.schedule, eps, opt.band_lambda);
    } catch (const NotReached&) {
        return b;
    }
    PathSearchConfig pc;
    pc.restarts = opt.restarts;
    pc.roadmap_nodes = opt.roadmap_nodes;
    pc.shortening_sweeps = opt.shortening_sweeps;
    b.final_pass = true;
    for (int j = *b.j_lambda; j <= st.j; ++j) {
        const auto k = static_cast<std::size_t>(j - 1);
        const Shell shell(st.schedule.r[k], st.schedule.R[k]);
        pc.seed = derive_seed(opt.seed, "band", static_cast<std::uint64_t>(j));
        pc.early_exit_length = st.schedule.delta[k];
        b.shells.push_back(j);
        b.final_paths.push_back(min_band_path(shell, st.f, opt.band_lambda, pc, opt.band_resolution));
        const auto& r = b.final_paths.back();
        if (r.feasible && r.length <= st.schedule.delta[k]) b.final_pass = false;
    }
    const auto k0 = static_cast<std::size_t>(*b.j_lambda - 1);
    const Shell shell0(st.schedule.r[k0], st.schedule.R[k0]);
    pc.seed = derive_seed(opt.seed, "band-baseline", k0);
    pc.early_exit_length = 1.5 * shell0.thickness();
    b.baseline = min_band_path(shell0, st.map_at(0), opt.band_lambda, pc, opt.band_resolution);
    b.baseline_short = b.baseline->feasible && b.baseline->length <= 1.5 * shell0.thickness();
    b.pass = b.final_pass && b.baseline_short;
    return b;
}

TraceCheck check_trace(const InductionState& st, const VerifyOptions& opt) {
    TraceCheck t;
    t.c = cplx(opt.trace_abs_c, 0.0);
    std::optional<int> jl;
    try {
        jl = j_lambda(st.schedule, accepted_eps(st), opt.band_lambda);
    } catch (const NotReached& e) {
        t.errors.push_back(e.what());
        return t;
    }
    if (!(opt.trace_abs_c >= opt.band_lambda && opt.trace_abs_c <= 1.0 / opt.band_lambda)) {
        t.errors.push_back("|c| is outside the band");
        return t;
    }
    TraceConfig tc;
    tc.step = opt.trace_step;
    tc.stop_radius = stop_radius(st);
    tc.shells = shells_of(st.schedule);
    const int n = st.f.n();
    const CVec c = CVec::Constant(st.f.q(), t.c);
    const CandidateMap base = st.map_at(0);
    const double r_start = st.schedule.r[static_cast<std::size_t>(*jl - 1)];
    auto run = [&](const CandidateMap& f, cplx offset, std::vector<TraceLedger>& out) {
        CVec guess = CVec::Zero(n);
        guess[0] = t.c;
        if (n > 1) guess[1] = offset;
        Vec x = to_real(guess);
        try {
            if (!project_to_fiber(f, c, x, 1e-12, 50)) throw ProjectionDiverged("start guess does not project");
            if (x.norm() >= r_start) throw ProjectionDiverged("start lies outside r_{j_lambda} B");
            out.push_back(trace_fiber(f, c, x, tc));
        } catch (const Error& e) {
            t.errors.push_back(e.what());
        }
    };
    for (const auto& off : opt.trace_offsets) {
        run(st.f, off, t.final_traces);
        run(base, off, t.baseline_traces);
    }
    const std::size_t want = opt.trace_offsets.size();
    t.residual_ok = true;
    t.final_pass = t.final_traces.size() == want;
    for (const auto& l : t.final_traces) {
        t.residual_ok = t.residual_ok && l.max_residual < 1e-8;
        for (int j = *jl; j <= st.j; ++j) {
            const auto k = static_cast<std::size_t>(j - 1);
            if (!(l.shell_length[k] > st.schedule.delta[k] * (1.0 - opt.trace_slack))) t.final_pass = false;
        }
    }
    t.baseline_short = t.baseline_traces.size() == want;
    for (const auto& l : t.baseline_traces) {
        t.residual_ok = t.residual_ok && l.max_residual < 1e-8;
        const auto k = static_cast<std::size_t>(*jl - 1);
        if (!(l.shell_length[k] <= 1.5 * (st.schedule.R[k] - st.schedule.r[k]))) t.baseline_short = false;
    }
    t.pass = t.final_pass && t.baseline_short && t.residual_ok;
    return t;
}

VerificationReport verify_state(const InductionState& st, const VerifyOptions& opt) {
    VerificationReport rep;
    std::vector<double> deltas;
    std::vector<bool> certified;
    for (const auto& r : st.records) {
        if (!r.accepted) continue;
        rep.c1.push_back(r.fit.best.c1);
        rep.c7.push_back(r.fit.best.c7 && r.fit.histogram.inside == 0);
        rep.c5.push_back(r.rank_margin > 0.0);
        rep.histogram_inside.push_back(r.fit.histogram.inside);
        rep.rank_margins.push_back(r.rank_margin);
        deltas.push_back(st.schedule.delta[static_cast<std::size_t>(r.j - 1)]);
        certified.push_back(r.labyrinth.certified);
    }
    const double r_last = st.j > 0 ? st.schedule.r[static_cast<std::size_t>(st.j - 1)] : st.schedule.r.front();
    if (st.has_divisor()) {
        rep.interpolation =
            check_interpolation(st.f, r_last, opt.interpolation_points, derive_seed(opt.seed, "interp"));
        std::vector<AvoidanceNeighborhood> hoods;
        for (const auto& r : st.records) hoods.push_back(r.avoidance);
        ZeroScanConfig zc;
        zc.starts = opt.zero_starts;
        zc.radius = r_last;
        zc.floor = opt.zero_floor;
        zc.seed = derive_seed(opt.seed, "zeros") % 100003;
        rep.zeros = zero_avoidance(st.f, hoods, zc);
        rep.zeros_pass = st.mode.variant == Variant::ExactZero ? rep.zeros.none_below_floor() : rep.zeros.pass();
    } else {
        rep.interpolation.pass = true;  // V is empty
        rep.zeros_pass = true;
    }
    rep.band = check_band(st, opt);
    rep.trace = check_trace(st, opt);
    // std::vector<bool> has no contiguous storage for a span.
    const std::unique_ptr<bool[]> cert(new bool[certified.size() + 1]);
    for (std::size_t i = 0; i < certified.size(); ++i) cert[i] = certified[i];
    rep.completeness = completeness_summary(opt.band_lambda, rep.band.j_lambda, deltas,
                                            std::span<const bool>(cert.get(), certified.size()));
    if (st.j > 0) rep.truncation = finalize(st).ledger;
    rep.halving_ok = st.budget().halving_ok();
    for (std::size_t i = 0; i < rep.band.final_paths.size(); ++i) {
        const auto& r = rep.band.final_paths[i];
        if (r.feasible && r.length <= st.schedule.delta[static_cast<std::size_t>(rep.band.shells[i] - 1)])
            rep.counterexample = true;
    }
    if (!rep.zeros.violations.empty()) rep.counterexample = true;
    return rep;
}

void to_json(json& j, const InterpolationCheck& c) {
    j = json{{"points", c.points}, {"max_value", c.max_value}, {"max_jac_diff", c.max_jac_diff}, {"pass", c.pass}};
}

void to_json(json& j, const BandCheck& c) {
    json finals = json::array();
    for (std::size_t i = 0; i < c.final_paths.size(); ++i)
        finals.push_back({{"shell", c.shells[i]},
                          {"feasible", c.final_paths[i].feasible},
                          {"length", c.final_paths[i].length},
                          {"restarts_run", c.final_paths[i].restart_lengths.size()}});
    j = json{{"lambda", c.lambda},
             {"j_lambda", c.j_lambda ? json(*c.j_lambda) : json(nullptr)},
             {"final", finals},
             {"baseline", c.baseline ? json{{"feasible", c.baseline->feasible}, {"length", c.baseline->length}}
                                     : json(nullptr)},
             {"final_pass", c.final_pass},
             {"baseline_short", c.baseline_short},
             {"pass", c.pass}};
}

void to_json(json& j, const TraceCheck& c) {
    j = json{{"c", {c.c.real(), c.c.imag()}},
             {"final", c.final_traces},
             {"baseline", c.baseline_traces},
             {"errors", c.errors},
             {"final_pass", c.final_pass},
             {"baseline_short", c.baseline_short},
             {"residual_ok", c.residual_ok},
             {"pass", c.pass}};
}

void to_json(json& j, const VerificationReport& r) {
    j = json{{"c1", r.c1},
             {"c5", r.c5},
             {"c7", r.c7},
             {"histogram_inside", r.histogram_inside},
             {"rank_margins", r.rank_margins},
             {"interpolation", r.interpolation},
             {"zeros", r.zeros},
             {"zeros_pass", r.zeros_pass},
             {"band", r.band},
             {"trace", r.trace},
             {"completeness", r.completeness},
             {"truncation", r.truncation},
             {"halving_ok", r.halving_ok},
             {"counterexample", r.counterexample}};
}

int verify_run(const fs::path& dir, const VerifyOptions& opt) {
    const LoadedRun run = load_run(dir);
    if (!run.state || run.state->j == 0) throw RunDirError("run has no accepted step to verify");
    const VerificationReport rep = verify_state(*run.state, opt);
    write_json_atomic(dir / "verify.json", rep);
    std::ofstream csv(dir / "paths.csv");
    csv << "search,shell,restart,length,feasible\n";
    auto dump = [&](const std::string& name, int shell, const PathSearchResult& r) {
        for (std::size_t i = 0; i < r.restart_lengths.size(); ++i)
            csv << name << ',' << shell << ',' << i << ',' << fmt(r.restart_lengths[i]) << ','
                << (std::isfinite(r.restart_lengths[i]) ? 1 : 0) << '\n';
    };
    for (std::size_t i = 0; i < rep.band.final_paths.size(); ++i) dump("final", rep.band.shells[i], rep.band.final_paths[i]);
    if (rep.band.baseline) dump("baseline", *rep.band.j_lambda, *rep.band.baseline);
    return rep.counterexample ? 4 : 0;
}

int trace_run(const fs::path& dir, cplx c, const Vec& start, double step) {
    const LoadedRun run = load_run(dir);
    const InductionState& st = *run.state;
    if (start.size() != 2 * st.f.n()) throw ConfigError("start point needs " + std::to_string(2 * st.f.n()) + " real coordinates");
    TraceConfig tc;
    tc.step = step;
    tc.stop_radius = stop_radius(st);
    tc.shells = shells_of(st.schedule);
    const TraceLedger led = trace_fiber(st.f, CVec::Constant(st.f.q(), c), start, tc);
    std::ofstream csv(dir / "trace.csv");
    csv << "step,radius,shell,cumlength,residual\n";
    for (const auto& r : led.rows)
        csv << r.step << ',' << fmt(r.radius) << ',' << r.shell + 1 << ',' << fmt(r.cumulative) << ','
            << fmt(r.residual) << '\n';
    write_json_atomic(dir / "trace.json", led);
    return 0;
}

int report_run(const fs::path& dir) {
    const LoadedRun run = load_run(dir);
    const InductionState& st = *run.state;
    if (st.j == 0) throw RunDirError("run has no accepted step to report");
    const VerifyOptions& opt = run.config.verify;

    json steps = json::array();
    std::ofstream hist(dir / "histogram.csv");
    hist << "step,lambda,bin_lo_log10,bin_hi_log10,count\n";
    for (const auto& r : st.records) {
        steps.push_back({{"j", r.j},
                         {"eps", r.eps},
                         {"eta", r.eta},
                         {"eps_prime", r.eps_prime},
                         {"components", r.labyrinth.components.size()},
                         {"best_crossing", r.labyrinth.best_crossing},
                         {"fit", r.fit},
                         {"rank_margin", r.rank_margin}});
        const auto& h = r.fit.histogram;
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            hist << r.j << ',' << fmt(h.lambda) << ',' << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1]) << ','
                 << h.counts[b] << '\n';
    }

    std::ofstream ray(dir / "ray.csv");
    ray << "ray,index,radius,abs_F\n";
    Rng rng(derive_seed(opt.seed, "rays"));
    const double reach = stop_radius(st);
    for (std::size_t i = 0; i < opt.rays; ++i) {
        const Vec d = random_direction(rng, 2 * st.f.n());
        for (std::size_t k = 0; k < opt.ray_samples; ++k) {
            const double t = opt.ray_samples > 1 ? reach * static_cast<double>(k) / static_cast<double>(opt.ray_samples - 1) : 0.0;
            ray << i << ',' << k << ',' << fmt(t) << ',' << fmt(st.f.eval(Vec(t * d)).norm()) << '\n';
        }
    }

    std::vector<double> deltas;
    const std::unique_ptr<bool[]> cert(new bool[st.records.size() + 1]);
    std::size_t m = 0;
    for (const auto& r : st.records) {
        deltas.push_back(st.schedule.delta[static_cast<std::size_t>(r.j - 1)]);
        cert[m++] = r.labyrinth.certified;
    }
    std::optional<int> jl;
    try {
        jl = j_lambda(st.schedule, accepted_eps(st), opt.band_lambda);
    } catch (const NotReached&) {
    }
    json rep{{"config_hash", config_hash(run.config)},
             {"steps", steps},
             {"completeness", completeness_summary(opt.band_lambda, jl, deltas, std::span<const bool>(cert.get(), m))},
             {"ray_rows", opt.rays * opt.ray_samples}};
    if (run.finalized) {
        const json fin = read_json(dir / "final.json");
        rep["truncation"] = fin.at("ledger");
        rep["continuation_budget"] = fin.at("continuation_budget");
        rep["note"] = fin.at("note");
    }
    if (fs::exists(dir / "verify.json")) {
        const json v = read_json(dir / "verify.json");
        rep["band"] = v.at("band");
        rep["trace"] = {{"pass", v.at("trace").at("pass")}, {"errors", v.at("trace").at("errors")}};
    }
    write_json_atomic(dir / "report.json", rep);
    return 0;
}

}  // namespace foliate
