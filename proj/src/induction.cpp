#include "foliate/induction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "foliate/sampling.hpp"

namespace foliate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double num(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

// Largest singular value of the holomorphic Jacobian.
double jacobian_norm(const CMat& jac) {
    Eigen::JacobiSVD<CMat> svd(jac);
    return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

std::vector<Vec> neighborhood_samples(const std::vector<StepRecord>& records, const AvoidanceNeighborhood& current,
                                      std::size_t per, std::size_t cap) {
    std::vector<const AvoidanceNeighborhood*> all;
    std::size_t balls = current.base.size();
    for (const auto& r : records) {
        all.push_back(&r.avoidance);
        balls += r.avoidance.base.size();
    }
    all.push_back(&current);
    if (balls == 0) return {};
    per = std::max<std::size_t>(1, std::min(per, cap / balls));
    std::vector<Vec> out;
    for (const auto* o : all)
        for (const auto& t : o->base)
            for (auto& p : inflation_samples(t, o->nu, per, 0.17)) out.push_back(std::move(p));
    return out;
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Interpolate: return "INTERPOLATE";
        case Variant::ExactZero: return "EXACT_ZERO";
        case Variant::AllComplete: return "ALL_COMPLETE";
    }
    return "?";
}

std::string to_string(Ambient a) { return a == Ambient::Ball ? "BALL" : "FULL_SPACE"; }

Variant variant_from_string(const std::string& s) {
    if (s == "INTERPOLATE") return Variant::Interpolate;
    if (s == "EXACT_ZERO") return Variant::ExactZero;
    if (s == "ALL_COMPLETE") return Variant::AllComplete;
    throw ConfigError("unknown mode variant '" + s + "'");
}

Ambient ambient_from_string(const std::string& s) {
    if (s == "BALL") return Ambient::Ball;
    if (s == "FULL_SPACE") return Ambient::FullSpace;
    throw ConfigError("unknown ambient '" + s + "'");
}

Schedule default_schedule(int steps, Ambient ambient, double eps0) {
    Schedule s;
    s.eps0 = eps0;
    auto radius = [&](int j) { return ambient == Ambient::Ball ? 1.0 - std::ldexp(1.0, -j - 1) : std::ldexp(1.0, j); };
    for (int j = 1; j <= steps; ++j) {
        s.r.push_back(radius(j));
        s.R.push_back(0.5 * (radius(j) + radius(j + 1)));
        s.delta.push_back(static_cast<double>(j));
        s.lambda.push_back(std::ldexp(1.0, -2 * j));
    }
    return s;
}

void validate(const Schedule& s, Ambient ambient) {
    const std::size_t m = s.r.size();
    std::ostringstream os;
    if (m == 0) throw ScheduleError("schedule has no steps");
    if (s.R.size() != m || s.delta.size() != m || s.lambda.size() != m)
        throw ScheduleError("schedule lists r, R, delta, lambda must have equal length");
    if (!(s.eps0 > 0.0)) throw ScheduleError("eps0 must be positive");
    if (!(s.r[0] > 0.0)) throw ScheduleError("schedule interlacing violated: r_1 must be positive");
    for (std::size_t k = 0; k < m; ++k) {
        const auto j = k + 1;
        if (!(s.r[k] < s.R[k])) {
            os << "schedule interlacing violated: r_" << j << " = " << s.r[k] << " >= R_" << j << " = " << s.R[k];
            throw ScheduleError(os.str());
        }
        if (k + 1 < m && !(s.R[k] < s.r[k + 1])) {
            os << "schedule interlacing violated: R_" << j << " = " << s.R[k] << " >= r_" << j + 1 << " = "
               << s.r[k + 1];
            throw ScheduleError(os.str());
        }
        if (!(s.lambda[k] > 0.0 && s.lambda[k] < 1.0)) {
            os << "lambda_" << j << " = " << s.lambda[k] << " is not in (0,1)";
            throw ScheduleError(os.str());
        }
        if (k > 0 && !(s.lambda[k] < s.lambda[k - 1])) {
            os << "lambda must decrease strictly: lambda_" << j << " = " << s.lambda[k];
            throw ScheduleError(os.str());
        }
        if (!(s.delta[k] > 0.0) || (k > 0 && !(s.delta[k] > s.delta[k - 1]))) {
            os << "delta must be positive and strictly increasing: delta_" << j << " = " << s.delta[k];
            throw ScheduleError(os.str());
        }
    }
    if (ambient == Ambient::Ball && !(s.R.back() < 1.0)) {
        os << "R_" << m << " = " << s.R.back() << " must stay inside the unit ball";
        throw ScheduleError(os.str());
    }
}

CandidateMap InductionState::map_at(int k) const {
    if (k <= 0) return CandidateMap(f.divisor(), f.order());
    return CandidateMap(f.divisor(), f.order(), records[static_cast<std::size_t>(k - 1)].w);
}

EpsilonBudget InductionState::budget() const {
    EpsilonBudget b;
    b.values.push_back(schedule.eps0);
    for (const auto& r : records)
        if (r.accepted) b.values.push_back(r.eps);
    return b;
}

InductionState init(const Divisor& h, Mode mode, Schedule schedule, const InductionConfig& cfg) {
    validate(schedule, mode.ambient);
    if (h.q() == 0) throw ConfigError("divisor has no components");
    const double radius = mode.ambient == Ambient::Ball ? 1.0 : schedule.reach();
    const Eigen::Index dim = 2 * h.n();
    const auto on_v = divisor_samples(h, 512, radius, derive_seed(cfg.seed, "init-v") % 100003);
    if (mode.variant == Variant::AllComplete && !on_v.empty())
        throw ConfigError("ALL_COMPLETE needs V empty, but h has zeros inside the ball");
    const int s = mode.variant == Variant::AllComplete ? 0 : cfg.s;
    if (s != 0 && s < 2) throw ConfigError("interpolation order s must be >= 2");
    InductionState st(mode, std::move(schedule), CandidateMap(h, s));
    auto pts = ball_samples(cfg.margin_samples, dim, radius, 0.5, derive_seed(cfg.seed, "init-ball") % 100003);
    pts.push_back(Vec::Zero(dim));
    pts.insert(pts.end(), on_v.begin(), on_v.end());
    st.initial_margin = min_rank_margin(st.f, pts);
    if (!(st.initial_margin > cfg.rank_floor)) {
        std::ostringstream os;
        os << "h is not a submersion on the ball: min rank margin " << st.initial_margin << " <= "
           << cfg.rank_floor;
        throw NotSubmersive(os.str());
    }
    return st;
}

double compute_eta(const CandidateMap& f, double lambda, double radius, const EtaConfig& cfg) {
    const Divisor& h = f.divisor();
    const auto vs = divisor_samples(h, cfg.v_samples, radius, derive_seed(cfg.seed, "eta-v") % 100003);
    if (vs.empty()) return kInf;
    double grad = 0.0;
    for (const auto& v : vs) grad = std::max(grad, jacobian_norm(f.jacobian(v)));
    if (!(grad > 0.0)) throw EtaFloor("F has vanishing derivative on V");

    // Unit normal directions to V at each sample; tube points are v + t eta u.
    Rng rng(derive_seed(cfg.seed, "eta-dirs"));
    std::normal_distribution<double> gauss;
    std::vector<std::pair<Vec, Vec>> base;  // (v, u)
    for (const auto& v : vs) {
        const Eigen::MatrixXd jr = real_jacobian(h.jacobian(to_complex(v)));
        for (std::size_t k = 0; k < cfg.offsets; ++k) {
            Vec c(jr.rows());
            for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng);
            Vec u = jr.transpose() * c;
            if (u.norm() == 0.0) continue;
            base.emplace_back(v, u.normalized());
        }
    }
    static constexpr double kFrac[] = {0.999, 0.75, 0.5, 0.25, 0.05};

    for (double eta = cfg.start_factor * lambda / grad; eta >= cfg.floor; eta *= cfg.shrink) {
        bool ok = true;
        for (const auto& [v, u] : base) {
            for (double t : kFrac) {
                const Vec z = v + (t * eta) * u;
                if (z.norm() > radius) continue;
                const CVec zc = to_complex(z);
                if (!(f.eval(zc).norm() < lambda)) {
                    ok = false;
                    break;
                }
                if (h.eval(zc).norm() > cfg.off_v_tol && f.order() >= 1 &&
                    !(f.extra_factor(zc).cwiseAbs().minCoeff() > cfg.zero_floor)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (ok) return eta;
    }
    std::ostringstream os;
    os << "no eta above " << cfg.floor << " keeps |F| < " << lambda << " on the tube around V";
    throw EtaFloor(os.str());
}

void step(InductionState& state, const InductionConfig& cfg) {
    const int j = state.j + 1;
    if (j > state.schedule.steps()) throw ConfigError("schedule has no step " + std::to_string(j));
    if (!state.records.empty() && !state.records.back().accepted)
        throw ConfigError("previous step was not accepted");
    const auto k = static_cast<std::size_t>(j - 1);
    const Schedule& sch = state.schedule;
    const double lam = sch.lambda[k];
    const Shell shell(sch.r[k], sch.R[k]);
    const int n = state.f.n();
    const Divisor* v = state.has_divisor() ? &state.f.divisor() : nullptr;

    StepRecord rec;
    rec.j = j;
    std::string stage;
    try {
        stage = "epsilon";
        const double eps_prev = state.records.empty() ? sch.eps0 : state.records.back().eps;
        rec.eps = cauchy_epsilon(state.f, sch.outer_before(j), sch.r[k], eps_prev, cfg.cauchy_safety,
                                 cfg.margin_samples);

        stage = "eta";
        rec.eta = v ? compute_eta(state.f, lam, sch.R[k], cfg.eta) : kInf;

        for (int attempt = 0;; ++attempt) {
            stage = "labyrinth";
            BuildConfig b = cfg.build;
            b.seed = derive_seed(cfg.seed, "build", static_cast<std::uint64_t>(j * 64 + attempt));
            try {
                rec.labyrinth = build(shell, sch.delta[k], rec.eta, n, b, v);
            } catch (const BuildBudgetExceeded& e) {
                rec.labyrinth.shell = shell;
                rec.labyrinth.delta_target = sch.delta[k];
                rec.labyrinth.eta_target = rec.eta;
                rec.labyrinth.history = e.rounds();
                throw;
            }
            stage = "split";
            try {
                rec.split = split(rec.labyrinth, v, cfg.split);
                break;
            } catch (const AmbiguousClassification&) {
                if (attempt + 1 >= cfg.split_retries) throw;
            }
        }

        stage = "inflate";
        rec.inflated = inflate(rec.split, rec.labyrinth, v, sch.r[k], cfg.inflate);
        rec.avoidance = avoidance_neighborhood(rec.labyrinth, rec.inflated.mu);

        stage = "sampling";
        SamplingConfig sc = cfg.sampling;
        sc.seed = derive_seed(cfg.seed, "samples", static_cast<std::uint64_t>(j));
        const SampleSet samples = make_samples(sch.r[k], rec.labyrinth, rec.split, rec.inflated, n, sc);

        stage = "phi";
        const PhiCase kind = state.mode.variant == Variant::ExactZero ? PhiCase::Scale : PhiCase::Shift;
        rec.phi = choose_phi(state.f, samples, lam, kind, cfg.phi);

        rec.h_floor = 1.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples.region[i] != Region::Delta1) continue;
            const CVec hz = state.f.divisor().eval(to_complex(samples.points[i]));
            rec.h_floor = std::min(rec.h_floor, std::pow(hz.cwiseAbs().minCoeff(), state.f.order()));
        }
        rec.eps_prime = std::min(rec.eps, lam * rec.h_floor) / 4.0;

        stage = "fit";
        FitConfig fc = cfg.fit;
        fc.eps_prime = rec.eps_prime;
        fc.scale = k + 1 < sch.r.size() ? sch.r[k + 1] : sch.R[k];
        FitChecks checks;
        checks.eps_j = rec.eps;
        checks.lambda_j = lam;
        checks.c1_slack = cfg.c1_slack;
        checks.all_complete = state.mode.variant == Variant::AllComplete;
        if (state.f.order() >= 1)
            checks.neighborhood_samples = neighborhood_samples(state.records, rec.avoidance,
                                                               cfg.neighborhood_samples_per_component,
                                                               cfg.max_neighborhood_samples);
        try {
            auto [w, report] = fit(samples, rec.phi, state.f, fc, checks);
            rec.w = std::move(w);
            rec.fit = std::move(report);
        } catch (const DegreeCapExceeded& e) {
            rec.fit = e.report();
            throw;
        }

        stage = "rank";
        const CandidateMap next(state.f.divisor(), state.f.order(), rec.w);
        const auto pts = ball_samples(cfg.margin_samples, 2 * n, sch.outer_before(j), 0.5,
                                      derive_seed(cfg.seed, "rank", static_cast<std::uint64_t>(j)) % 100003);
        rec.rank_margin = min_rank_margin(next, pts);
        if (!(rec.rank_margin > cfg.rank_floor)) {
            std::ostringstream os;
            os << "new map loses rank on R_" << j - 1 << " ball: margin " << rec.rank_margin;
            throw DegenerateMargin(os.str());
        }
        rec.accepted = true;
        state.records.push_back(std::move(rec));
        state.f = next;
        state.j = j;
    } catch (const Error& e) {
        rec.accepted = false;
        rec.failure = stage + ": " + e.what();
        const std::string msg = "step " + std::to_string(j) + " failed at " + rec.failure;
        state.records.push_back(std::move(rec));
        throw StepFailed(msg, j, stage);
    }
}

int j_lambda(const Schedule& s, std::span<const double> eps, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0,1)");
    const std::size_t m = std::min(eps.size(), s.lambda.size());
    for (std::size_t k = 0; k < m; ++k) {
        const double lj = s.lambda[k];
        if (lj + eps[k] < lambda && 1.0 / lambda < 1.0 / lj - eps[k]) return static_cast<int>(k + 1);
    }
    std::ostringstream os;
    os << "no step j <= " << m << " puts lambda = " << lambda << " inside the band";
    throw NotReached(os.str());
}

FinalArtifact finalize(const InductionState& state, std::size_t samples, std::uint64_t seed) {
    FinalArtifact out{state.f, {}, 0.0, {}};
    const int big_j = state.j;
    const Eigen::Index dim = 2 * state.f.n();
    for (int j = 1; j <= big_j; ++j) {
        const auto k = static_cast<std::size_t>(j - 1);
        TruncationRow row;
        row.j = j;
        row.eps = state.records[k].eps;
        for (int i = j; i <= big_j; ++i) row.tail_sum += state.records[static_cast<std::size_t>(i - 1)].eps;
        row.bound = 2.0 * row.eps;
        row.arithmetic_ok = row.tail_sum < row.bound;
        const CandidateMap prev = state.map_at(j - 1);
        for (const auto& x : ball_samples(samples, dim, state.schedule.r[k], 0.5,
                                          derive_seed(seed, "final", static_cast<std::uint64_t>(j)) % 100003))
            row.sampled = std::max(row.sampled, (state.f.eval(x) - prev.eval(x)).norm());
        row.sampled_ok = row.sampled < row.bound;
        out.ledger.push_back(row);
    }
    out.continuation_budget = big_j > 0 ? state.records[static_cast<std::size_t>(big_j - 1)].eps : state.schedule.eps0;
    out.note =
        "F_J is the deliverable; the limit of the sequence F_j is not computed. A continuation past step J would "
        "move F by less than 2 eps_{J+1} < eps_J (continuation_budget) on r_{J+1} B.";
    return out;
}

void to_json(json& j, const Schedule& s) {
    j = json{{"r", s.r}, {"R", s.R}, {"delta", s.delta}, {"lambda", s.lambda}, {"eps0", s.eps0}};
}

Schedule schedule_from_json(const json& j) {
    Schedule s;
    s.r = j.at("r").get<std::vector<double>>();
    s.R = j.at("R").get<std::vector<double>>();
    s.delta = j.at("delta").get<std::vector<double>>();
    s.lambda = j.at("lambda").get<std::vector<double>>();
    s.eps0 = j.at("eps0").get<double>();
    return s;
}

void to_json(json& j, const StepRecord& r) {
    json w = json::array();
    for (const auto& p : r.w) w.push_back(p);
    j = json{{"j", r.j},
             {"eps", r.eps},
             {"eta", r.eta},
             {"eps_prime", r.eps_prime},
             {"h_floor", r.h_floor},
             {"labyrinth", r.labyrinth},
             {"split", r.split},
             {"inflated", r.inflated},
             {"avoidance", r.avoidance},
             {"phi", r.phi},
             {"fit", r.fit},
             {"rank_margin", r.rank_margin},
             {"w", w},
             {"accepted", r.accepted},
             {"failure", r.failure}};
}

StepRecord step_record_from_json(const json& j, int n) {
    StepRecord r;
    r.j = j.at("j").get<int>();
    r.eps = num(j.at("eps"));
    r.eta = num(j.at("eta"));
    r.eps_prime = num(j.at("eps_prime"));
    r.h_floor = num(j.at("h_floor"));
    r.labyrinth = labyrinth_from_json(j.at("labyrinth"));
    r.split = split_from_json(j.at("split"));
    r.inflated = inflated_from_json(j.at("inflated"));
    r.avoidance = avoidance_from_json(j.at("avoidance"));
    r.phi = phi_from_json(j.at("phi"));
    r.fit = fit_report_from_json(j.at("fit"));
    r.rank_margin = num(j.at("rank_margin"));
    for (const auto& p : j.at("w")) r.w.push_back(MultiPoly::from_json(p, n));
    r.accepted = j.at("accepted").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    return r;
}

void to_json(json& j, const TruncationRow& r) {
    j = json{{"j", r.j},           {"eps", r.eps},         {"tail_sum", r.tail_sum},
             {"bound", r.bound},   {"arithmetic_ok", r.arithmetic_ok},
             {"sampled", r.sampled}, {"sampled_ok", r.sampled_ok}};
}

void to_json(json& j, const FinalArtifact& a) {
    j = json{{"map", a.f}, {"ledger", a.ledger}, {"continuation_budget", a.continuation_budget}, {"note", a.note}};
}

}  // namespace foliate
