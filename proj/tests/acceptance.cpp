// Acceptance run at desk scale. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Lines tagged "demo" come from the
// small-scale config and are informational only.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "foliate/labyrinth.hpp"
#include "foliate/run.hpp"

using namespace foliate;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

int failures = 0;
std::map<int, std::string> summary;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << detail;
    summary[id] = line.str();
    std::cout << line.str() << std::endl;
}

void demo_line(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "ok  " : "bad ") << "  demo, not a criterion (" << name << "): " << detail << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json without_timestamps(json m) {
    m.erase("created");
    for (auto& s : m["steps"]) {
        s.erase("started");
        s.erase("finished");
    }
    return m;
}

// Why a run stopped, from its manifest.
std::string stop_reason(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) return "no manifest";
    const json m = read_json(dir / "manifest.json");
    for (const auto& s : m["steps"])
        if (s.value("status", "") == "failed")
            return s.value("message", "step " + std::to_string(s.value("j", 0)) + " failed");
    return "all steps accepted";
}

struct Run {
    fs::path dir;
    ConstructResult result;
    double seconds = 0.0;
    LoadedRun loaded;
    bool complete() const { return result.exit_code == 0 && loaded.state && loaded.state->j == loaded.state->schedule.steps(); }
};

Run construct_fresh(const RunConfig& cfg, const fs::path& dir) {
    Run r;
    r.dir = dir;
    fs::remove_all(dir);
    const auto t0 = Clock::now();
    r.result = construct(cfg, dir, false);
    r.seconds = seconds_since(t0);
    r.loaded = load_run(dir);
    return r;
}

void criterion_labyrinth() {
    const Shell shell(0.75, 0.78125);
    const double delta = 1.0, eta = 0.05625;
    const RunConfig cfg = default_config();
    BuildConfig bc = cfg.induction.build;
    const auto t0 = Clock::now();
    TangentLabyrinth lab;
    try {
        lab = build(shell, delta, eta, 2, bc);
    } catch (const BuildBudgetExceeded& e) {
        std::string hist;
        for (const auto& r : e.rounds())
            hist += " [" + std::to_string(r.components) + " comps, best " + fmt(r.best_length) + "]";
        report(1, "labyrinth certification", false,
               std::string(e.what()) + "; rounds:" + hist + "; " + fmt(seconds_since(t0)) + " s");
        return;
    }
    bool tidy = true;
    std::string tidy_msg;
    try {
        validate_tidy(lab.components, shell);
    } catch (const TidyViolation& e) {
        tidy = false;
        tidy_msg = e.what();
    }
    double max_diam = 0.0;
    for (const auto& b : lab.components) max_diam = std::max(max_diam, b.diameter());
    PathSearchConfig pc = bc.search;
    pc.restarts = 100;
    pc.early_exit_length = delta;
    const auto res = min_avoiding_path(shell, lab, pc);
    const double secs = seconds_since(t0);
    const bool blocked = !(res.feasible && res.length <= delta);
    const bool pass = tidy && max_diam < eta && blocked && secs <= 300.0;
    report(1, "labyrinth certification", pass,
           std::to_string(lab.components.size()) + " components, tidy " + (tidy ? "yes" : "no: " + tidy_msg) +
               ", max diameter " + fmt(max_diam) + " (< " + fmt(eta) + "), best crossing " + fmt(res.length) +
               " (must exceed " + fmt(delta) + "), " + fmt(secs) + " s (limit 300)");
}

void criterion_steps(const Run& run) {
    const auto& st = run.loaded.state;
    const int total = run.loaded.config.schedule.steps();
    std::string detail;
    bool pass = st && st->j == total && run.seconds <= 900.0;
    if (st) {
        for (const auto& rec : st->records) {
            const bool ok = rec.fit.best.c1 && rec.fit.best.c7 && rec.fit.histogram.inside == 0 && rec.rank_margin > 0.0;
            pass = pass && ok;
            detail += "step " + std::to_string(rec.j) + ": max|F_j-F_j-1| " + fmt(rec.fit.best.c1_value) + " vs eps/2 " +
                      fmt(rec.eps / 2.0) + ", histogram inside " + std::to_string(rec.fit.histogram.inside) +
                      ", rank margin " + fmt(rec.rank_margin) + "; ";
        }
    }
    detail += std::to_string(st ? st->j : 0) + "/" + std::to_string(total) + " steps accepted (" + stop_reason(run.dir) +
              "), " + fmt(run.seconds) + " s (limit 900)";
    report(2, "step acceptance ledger", pass, detail);
}

void criteria_on_final_map(const Run& run) {
    if (!run.complete()) {
        const std::string why = "needs F_J of a completed run; " + stop_reason(run.dir);
        report(3, "divisor interpolation", false, why);
        report(4, "exact zero set", false, why);
        report(5, "band path blow-up", false, why);
        report(6, "fiber trace growth", false, why);
        report(8, "truncation ledger", false, why);
        return;
    }
    const InductionState& st = *run.loaded.state;
    const VerifyOptions& opt = run.loaded.config.verify;
    const double r_j = st.schedule.r.back();

    const auto interp = check_interpolation(st.f, r_j, 1000, opt.seed);
    report(3, "divisor interpolation", interp.pass,
           std::to_string(interp.points) + " points, max|F| " + fmt(interp.max_value) + " (< 1e-10), max|dF-dh| " +
               fmt(interp.max_jac_diff) + " (< 1e-8)");

    ZeroScanConfig zc;
    zc.starts = 1000;
    zc.radius = r_j;
    zc.floor = 1e-6;
    zc.seed = derive_seed(opt.seed, "zeros");
    std::vector<AvoidanceNeighborhood> nb;
    for (const auto& rec : st.records) nb.push_back(rec.avoidance);
    const auto zeros = zero_avoidance(st.f, nb, zc);
    report(4, "exact zero set", zeros.none_below_floor(),
           "min |1 + h W| over 1000 starts " + fmt(zeros.min_value) + " (floor 1e-6), " +
               std::to_string(zeros.below_floor.size()) + " below floor");

    VerifyOptions band_opt = opt;
    band_opt.band_lambda = 0.2;
    band_opt.restarts = 100;
    const auto t0 = Clock::now();
    const auto band = check_band(st, band_opt);
    const double band_secs = seconds_since(t0);
    std::string bd = "j_lambda " + (band.j_lambda ? std::to_string(*band.j_lambda) : std::string("not reached"));
    for (std::size_t k = 0; k < band.shells.size(); ++k)
        bd += ", shell " + std::to_string(band.shells[k]) + " best " + fmt(band.final_paths[k].length);
    if (band.baseline) bd += ", baseline " + fmt(band.baseline->length);
    bd += ", " + fmt(band_secs) + " s (limit 600)";
    report(5, "band path blow-up", band.pass && band_secs <= 600.0, bd);

    const auto tr = check_trace(st, opt);
    std::string td = "|c| " + fmt(std::abs(tr.c)) + ", " + std::to_string(tr.final_traces.size()) + " traces";
    for (const auto& e : tr.errors) td += "; " + e;
    td += std::string(", final long ") + (tr.final_pass ? "yes" : "no") + ", baseline short " +
          (tr.baseline_short ? "yes" : "no") + ", residual ok " + (tr.residual_ok ? "yes" : "no");
    report(6, "fiber trace growth", tr.pass, td);

    const auto fin = finalize(st);
    bool ledger_ok = !fin.ledger.empty();
    std::string ld;
    for (const auto& row : fin.ledger) {
        ledger_ok = ledger_ok && row.arithmetic_ok && row.sampled_ok;
        ld += "j=" + std::to_string(row.j) + " tail " + fmt(row.tail_sum) + " < " + fmt(row.bound) + ", sampled " +
              fmt(row.sampled) + "; ";
    }
    report(8, "truncation ledger", ledger_ok, ld);
}

void criterion_all_complete(const fs::path& root) {
    RunConfig cfg = config_from_json(json{{"run", {{"mode", "ALL_COMPLETE"}, {"seed", 1}}}});
    const Run run = construct_fresh(cfg, root / "all_complete");
    std::string detail = std::to_string(run.result.accepted_steps) + "/" + std::to_string(cfg.schedule.steps()) +
                         " steps accepted (" + stop_reason(run.dir) + ")";
    bool pass = run.complete();
    if (run.loaded.state) {
        for (const auto& rec : run.loaded.state->records) {
            const auto& h = rec.fit.histogram;
            const bool above = h.below == 0 && h.inside == 0;
            pass = pass && above && rec.fit.best.c1 && rec.rank_margin > 0.0 && rec.labyrinth.certified;
            detail += "; step " + std::to_string(rec.j) + ": " + std::to_string(h.above) + " samples above 1/lambda, " +
                      std::to_string(h.below + h.inside) + " not";
        }
    }
    if (pass) {
        VerifyOptions opt = cfg.verify;
        opt.band_lambda = 0.2;
        opt.restarts = 100;
        const auto band = check_band(*run.loaded.state, opt);
        pass = band.pass;
        detail += std::string(", band contrast ") + (band.pass ? "holds" : "fails");
    }
    detail += ", " + fmt(run.seconds) + " s";
    report(7, "all-complete mode", pass, detail);
}

void criterion_determinism(const Run& a, const Run& b) {
    std::vector<std::string> differing;
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a.dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json" || name == ".lock") continue;
        ++compared;
        if (!fs::exists(b.dir / name) || slurp(entry.path()) != slurp(b.dir / name)) differing.push_back(name);
    }
    for (const auto& entry : fs::directory_iterator(b.dir))
        if (!fs::exists(a.dir / entry.path().filename())) differing.push_back(entry.path().filename().string());
    const bool manifest_same = without_timestamps(read_json(a.dir / "manifest.json")) ==
                               without_timestamps(read_json(b.dir / "manifest.json"));
    if (!manifest_same) differing.push_back("manifest.json");
    std::string detail = std::to_string(compared + 1) + " artifacts compared (manifest without timestamps)";
    for (const auto& d : differing) detail += ", differs: " + d;
    report(9, "determinism", differing.empty() && compared > 0, detail);
}

void demo(const fs::path& root) {
    const RunConfig cfg = load_config(fs::path(FOLIATE_CONFIG_DIR) / "demo.ini");
    const Run run = construct_fresh(cfg, root / "demo");
    demo_line("construct", run.complete(),
              std::to_string(run.result.accepted_steps) + "/" + std::to_string(cfg.schedule.steps()) +
                  " steps accepted (" + stop_reason(run.dir) + "), " + fmt(run.seconds) + " s");
    if (!run.loaded.state || run.loaded.state->j == 0) return;
    const InductionState& st = *run.loaded.state;
    for (const auto& rec : st.records) {
        const auto& b = rec.fit.best;
        demo_line("step " + std::to_string(rec.j) + " checks", b.c1 && b.c7 && b.c8 && rec.rank_margin > 0.0,
                  "degree " + std::to_string(rec.fit.degree) + ", max|F_j-F_j-1| " + fmt(b.c1_value) + " vs eps/2 " +
                      fmt(rec.eps / 2.0) + ", histogram below/inside/above " + std::to_string(rec.fit.histogram.below) +
                      "/" + std::to_string(rec.fit.histogram.inside) + "/" + std::to_string(rec.fit.histogram.above) +
                      ", rank margin " + fmt(rec.rank_margin) + ", labyrinth " +
                      std::to_string(rec.labyrinth.components.size()) + " components");
    }
    const double r_j = st.schedule.r[static_cast<std::size_t>(st.j - 1)];
    const auto interp = check_interpolation(st.f, r_j, 1000, cfg.verify.seed);
    demo_line("interpolation on F_" + std::to_string(st.j), interp.pass,
              "max|F| " + fmt(interp.max_value) + ", max|dF-dh| " + fmt(interp.max_jac_diff));
    ZeroScanConfig zc;
    zc.radius = r_j;
    zc.seed = derive_seed(cfg.verify.seed, "zeros");
    const auto zeros = zero_avoidance(st.f, {}, zc);
    demo_line("zero scan on F_" + std::to_string(st.j), zeros.none_below_floor(),
              "min |1 + h W| " + fmt(zeros.min_value) + " inside radius " + fmt(r_j));
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "foliate_acceptance";
    fs::create_directories(root);
    std::cout << "desk scale: n=2, q=1, s=2, h=z1, J=2, default schedules" << std::endl;

    try {
        criterion_labyrinth();

        const RunConfig desk = load_config(fs::path(FOLIATE_CONFIG_DIR) / "desk.ini");
        const Run first = construct_fresh(desk, root / "desk_a");
        criterion_steps(first);
        criteria_on_final_map(first);
        criterion_all_complete(root);
        const Run second = construct_fresh(desk, root / "desk_b");
        criterion_determinism(first, second);

        demo(root);
    } catch (const std::exception& e) {
        std::cout << "FAIL  aborted: " << e.what() << std::endl;
        ++failures;
    }

    std::cout << "\nsummary" << std::endl;
    for (const auto& [id, line] : summary) std::cout << line << std::endl;
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
    return failures == 0 ? 0 : 1;
}
