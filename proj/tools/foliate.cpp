#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "foliate/run.hpp"

namespace {

using namespace foliate;

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        try {
            out.push_back(std::stod(piece));
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + piece + "'");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foliate: polynomial maps with long level-set crossings on the unit ball"};
    app.require_subcommand(1);

    std::string config_file, out_dir, run_dir, c_text, start_text, lab_out = "labyrinth.json", placement = "reduced";
    bool resume = false;
    double band = -1.0, trace_step = 1e-3, r = 0.75, big_r = 0.78125, delta = 1.0, eta = 0.05625;
    int paths = -1, n = 2, restarts = 100;
    std::uint64_t seed = 1;

    auto* construct_cmd = app.add_subcommand("construct", "run the inductive construction");
    construct_cmd->add_option("--config", config_file, "config file (key = value with [sections], or JSON)")->required();
    construct_cmd->add_option("--out", out_dir, "run directory")->required();
    construct_cmd->add_flag("--resume", resume, "continue from the last accepted step");

    auto* verify_cmd = app.add_subcommand("verify", "certify a run: band paths, traces, zeros, ledgers");
    verify_cmd->add_option("--run", run_dir, "run directory")->required();
    verify_cmd->add_option("--band", band, "band parameter lambda in (0,1)");
    verify_cmd->add_option("--paths", paths, "path-search restarts");

    auto* trace_cmd = app.add_subcommand("trace", "trace one fiber F = c from a start point");
    trace_cmd->add_option("--run", run_dir, "run directory")->required();
    trace_cmd->add_option("--c", c_text, "fiber value re,im")->required();
    trace_cmd->add_option("--start", start_text, "start point, 2n real coordinates")->required();
    trace_cmd->add_option("--step", trace_step, "continuation step");

    auto* lab_cmd = app.add_subcommand("labyrinth", "build and certify one labyrinth");
    lab_cmd->add_option("--r", r, "inner shell radius");
    lab_cmd->add_option("--R", big_r, "outer shell radius");
    lab_cmd->add_option("--delta", delta, "crossing length to certify");
    lab_cmd->add_option("--eta", eta, "component diameter bound");
    lab_cmd->add_option("--n", n, "complex dimension");
    lab_cmd->add_option("--placement", placement, "reduced or full")->check(CLI::IsMember({"reduced", "full"}));
    lab_cmd->add_option("--restarts", restarts, "certification restarts");
    lab_cmd->add_option("--seed", seed, "seed");
    lab_cmd->add_option("--out", lab_out, "output JSON file");

    auto* report_cmd = app.add_subcommand("report", "consolidated report and CSV plot data");
    report_cmd->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*construct_cmd) {
            const RunConfig cfg = load_config(config_file);
            const ConstructResult res = construct(cfg, out_dir, resume);
            std::cout << res.message << " (" << res.accepted_steps << " accepted steps)\n";
            return res.exit_code;
        }
        if (*verify_cmd) {
            LoadedRun run = load_run(run_dir);
            VerifyOptions opt = run.config.verify;
            if (band > 0.0) opt.band_lambda = band;
            if (paths > 0) opt.restarts = paths;
            if (!(opt.band_lambda > 0.0 && opt.band_lambda < 1.0)) throw ConfigError("--band must lie in (0,1)");
            const int code = verify_run(run_dir, opt);
            std::cout << (code == 0 ? "no counterexample found" : "counterexample found") << '\n';
            return code;
        }
        if (*trace_cmd) {
            const auto c = parse_list(c_text);
            if (c.size() != 2) throw ConfigError("--c needs re,im");
            const auto s = parse_list(start_text);
            return trace_run(run_dir, cplx(c[0], c[1]), Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())),
                             trace_step);
        }
        if (*lab_cmd) {
            BuildConfig bc;
            bc.placement = placement == "full" ? Placement::FullShell : Placement::ReducedShell;
            bc.search.restarts = restarts;
            bc.seed = seed;
            const TangentLabyrinth lab = build(Shell(r, big_r), delta, eta, n, bc);
            write_json_atomic(lab_out, lab);
            std::cout << lab.components.size() << " components, best crossing found " << lab.best_crossing << '\n';
            return 0;
        }
        if (*report_cmd) return report_run(run_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const RunDirError& e) {
        std::cerr << "run directory error: " << e.what() << '\n';
        return 2;
    } catch (const RankLoss& e) {
        std::cerr << "counterexample: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "failed: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
