#include "foliate/okaweil.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "foliate/sampling.hpp"

namespace foliate {

void SampleSet::add(Vec p, Region r, double w, bool held_out, bool on_lab) {
    points.push_back(std::move(p));
    region.push_back(r);
    weight.push_back(w);
    validation.push_back(held_out ? 1 : 0);
    on_labyrinth.push_back(on_lab ? 1 : 0);
}

std::vector<Vec> inflation_samples(const TangentBall& t, double mu, std::size_t count, double phase) {
    std::vector<Vec> out;
    if (count == 0 || mu <= 0.0) return out;
    const TangentBall wide(t.center(), t.radius() + 0.999 * mu);
    const Vec nrm = t.normal();
    const auto base = disc_samples(wide, count, phase);
    std::size_t k = 0;
    for (const auto& p : base) {
        const double in_plane = (p - t.center()).norm();
        const double over = std::max(0.0, in_plane - t.radius());
        const double room = std::sqrt(std::max(0.0, mu * mu - over * over));
        // Cycle through offsets in (-room, room), never the full room.
        static constexpr double kFrac[] = {0.9, -0.9, 0.5, -0.5, 0.0, 0.25, -0.25};
        out.push_back(p + kFrac[k++ % 7] * room * nrm);
    }
    return out;
}

namespace {

std::uint64_t halton_skip(std::uint64_t seed, const char* purpose, std::uint64_t index) {
    return derive_seed(seed, purpose, index) % 1000003ULL;
}

}  // namespace

SampleSet make_samples(double r_ball, const TangentLabyrinth& lab, const LabyrinthSplit& sp, const InflatedPair& inf,
                       int n, const SamplingConfig& cfg) {
    SampleSet s;
    const Eigen::Index dim = 2 * n;
    for (int held = 0; held < 2; ++held) {
        const auto skip = halton_skip(cfg.seed, "ball", static_cast<std::uint64_t>(held));
        for (auto& p : ball_samples(cfg.ball, dim, r_ball, cfg.boundary_fraction, skip))
            s.add(std::move(p), Region::Ball, cfg.weight_ball, held == 1, false);
    }
    const std::size_t ncomp = sp.lambda_V.size() + sp.lambda_0.size();
    if (ncomp == 0) return s;
    const std::size_t per =
        std::max<std::size_t>(8, std::min(cfg.per_component, cfg.max_labyrinth / ncomp));
    for (int held = 0; held < 2; ++held) {
        const double phase = held == 0 ? 0.0 : 0.61803398875;
        for (auto i : sp.lambda_V)
            for (auto& p : disc_samples(lab.components[i], per, phase))
                s.add(std::move(p), Region::LambdaV, cfg.weight_lambda_v, held == 1, true);
        const std::size_t on_disc = std::max<std::size_t>(4, per * 3 / 5);
        const std::size_t off_disc = per > on_disc ? per - on_disc : 0;
        for (auto i : sp.lambda_0) {
            for (auto& p : disc_samples(lab.components[i], on_disc, phase))
                s.add(std::move(p), Region::Delta1, cfg.weight_delta1, held == 1, true);
            for (auto& p : inflation_samples(lab.components[i], inf.mu, off_disc, phase + 0.3))
                s.add(std::move(p), Region::Delta1, cfg.weight_delta1, held == 1, false);
        }
    }
    return s;
}

PhiSpec choose_phi(const CandidateMap& f_prev, const SampleSet& samples, double lambda, PhiCase kind,
                   const PhiConfig& cfg) {
    PhiSpec phi;
    phi.lambda = lambda;
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples.region[k] != Region::Delta1) continue;
        const double v = f_prev.eval(samples.points[k]).norm();
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        any = true;
    }
    if (!any || kind == PhiCase::Identity) return phi;
    phi.max_abs = mx;
    phi.min_abs = mn;
    phi.kind = kind;
    if (kind == PhiCase::Shift) {
        phi.w0 = CVec::Zero(f_prev.q());
        phi.w0[0] = mx + 1.0 / lambda + cfg.margin;
    } else {
        if (!(mn > cfg.floor)) {
            std::ostringstream os;
            os << "min |F| on Lambda_0 samples is " << mn << ", below floor " << cfg.floor;
            throw ZeroOnLambda0(os.str());
        }
        phi.C = std::max(1.0, cfg.headroom * (1.0 / lambda) / mn);
    }
    return phi;
}

CVec phi_value(const PhiSpec& phi, const CandidateMap& f_prev, const Vec& x, Region r) {
    CVec v = f_prev.eval(x);
    if (r != Region::Delta1) return v;
    switch (phi.kind) {
        case PhiCase::Shift: return v + phi.w0;
        case PhiCase::Scale: return phi.C * v;
        case PhiCase::Identity: break;
    }
    return v;
}

CMat build_targets(const PhiSpec& phi, const SampleSet& samples, const CandidateMap& f_prev, double floor) {
    const int q = f_prev.q();
    const int s = f_prev.order();
    CMat out(static_cast<Eigen::Index>(samples.size()), q);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const CVec z = to_complex(samples.points[k]);
        const auto row = static_cast<Eigen::Index>(k);
        for (int i = 0; i < q; ++i) {
            const auto u = static_cast<std::size_t>(i);
            const cplx w_prev = f_prev.correction()[u].eval(z);
            if (samples.region[k] != Region::Delta1 || phi.kind == PhiCase::Identity) {
                out(row, i) = w_prev;
                continue;
            }
            const cplx h = f_prev.divisor().h[u].eval(z);
            const cplx hs = std::pow(h, s);
            if (!(std::abs(hs) > floor)) {
                std::ostringstream os;
                os << "|h|^s = " << std::abs(hs) << " on a Delta1 sample";
                throw DivisionFloor(os.str());
            }
            if (phi.kind == PhiCase::Shift) {
                out(row, i) = w_prev + phi.w0[i] / hs;
            } else {
                const cplx f = h + hs * w_prev;
                out(row, i) = (phi.C * f - h) / hs;
            }
        }
    }
    return out;
}

std::vector<MultiPoly> solve_correction(const SampleSet& samples, const CMat& rhs_f, const Divisor& h, int s,
                                        int degree, double scale, double ridge, double* train_rms) {
    const int n = h.n();
    const auto exps = MultiPoly::graded_exponents(n, degree);
    const auto m = static_cast<Eigen::Index>(exps.size());
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < samples.size(); ++k)
        if (!samples.validation[k]) rows.push_back(k);
    const auto nr = static_cast<Eigen::Index>(rows.size());

    // Monomials (z/scale)^alpha for every training point.
    CMat mono(nr, m);
    std::vector<cplx> pw(static_cast<std::size_t>(n * (degree + 1)));
    for (Eigen::Index r = 0; r < nr; ++r) {
        const CVec z = to_complex(samples.points[rows[static_cast<std::size_t>(r)]]) / scale;
        for (int k = 0; k < n; ++k) {
            cplx acc = 1.0;
            for (int e = 0; e <= degree; ++e) {
                pw[static_cast<std::size_t>(k * (degree + 1) + e)] = acc;
                acc *= z[k];
            }
        }
        for (Eigen::Index c = 0; c < m; ++c) {
            cplx v = 1.0;
            for (int k = 0; k < n; ++k) v *= pw[static_cast<std::size_t>(k * (degree + 1) + exps[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)])];
            mono(r, c) = v;
        }
    }

    std::vector<MultiPoly> out;
    double sq = 0.0;
    for (int i = 0; i < h.q(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        const Eigen::Index extra = ridge > 0.0 ? m : 0;
        CMat a(nr + extra, m);
        CVec b(nr + extra);
        for (Eigen::Index r = 0; r < nr; ++r) {
            const std::size_t k = rows[static_cast<std::size_t>(r)];
            const CVec z = to_complex(samples.points[k]);
            const double sw = std::sqrt(samples.weight[k]);
            const cplx hs = std::pow(h.h[u].eval(z), s);
            a.row(r) = (sw * hs) * mono.row(r);
            b[r] = sw * rhs_f(static_cast<Eigen::Index>(k), i);
        }
        Vec col_scale(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double nrm = a.col(c).head(nr).norm();
            col_scale[c] = nrm > 0.0 ? 1.0 / nrm : 1.0;
            a.col(c) *= col_scale[c];
        }
        if (extra > 0) {
            // penalty on the true coefficients, not the column-normalised ones
            a.bottomRows(extra).setZero();
            for (Eigen::Index c = 0; c < m; ++c) a(nr + c, c) = std::sqrt(ridge) * col_scale[c];
            b.tail(extra).setZero();
        }
        Eigen::ColPivHouseholderQR<CMat> qr(a);
        const CVec coef = qr.solve(b);
        sq += (a.topRows(nr) * coef - b.head(nr)).squaredNorm();
        MultiPoly w(n, scale);
        for (Eigen::Index c = 0; c < m; ++c) {
            const cplx v = coef[c] * col_scale[c];
            if (v != cplx(0.0)) w.add_term(exps[static_cast<std::size_t>(c)], v);
        }
        out.push_back(std::move(w));
    }
    if (train_rms) *train_rms = nr > 0 ? std::sqrt(sq / static_cast<double>(nr)) : 0.0;
    return out;
}

LabyrinthHistogram labyrinth_histogram(const CandidateMap& f, const SampleSet& samples, double lambda, int bins) {
    LabyrinthHistogram hist;
    hist.lambda = lambda;
    std::vector<double> vals;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!samples.validation[k] || !samples.on_labyrinth[k]) continue;
        const double v = f.eval(samples.points[k]).norm();
        vals.push_back(v);
        if (v < lambda) ++hist.below;
        else if (v > 1.0 / lambda) ++hist.above;
        else ++hist.inside;
    }
    if (vals.empty()) return hist;
    hist.min_abs = *std::min_element(vals.begin(), vals.end());
    hist.max_abs = *std::max_element(vals.begin(), vals.end());
    const double lo = std::log10(std::max(hist.min_abs, 1e-300));
    const double hi = std::log10(std::max(hist.max_abs, 1e-300)) + 1e-12;
    hist.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) hist.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
    hist.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : vals) {
        const double t = hi > lo ? (std::log10(std::max(v, 1e-300)) - lo) / (hi - lo) : 0.0;
        const int b = std::clamp(static_cast<int>(t * bins), 0, bins - 1);
        ++hist.counts[static_cast<std::size_t>(b)];
    }
    return hist;
}

std::pair<std::vector<MultiPoly>, FitReport> fit(const SampleSet& samples, const PhiSpec& phi,
                                                  const CandidateMap& f_prev, const FitConfig& cfg,
                                                  const FitChecks& checks) {
    if (cfg.degrees.empty()) throw ConfigError("empty degree schedule");
    const int q = f_prev.q();
    const auto ns = static_cast<Eigen::Index>(samples.size());
    CMat phi_vals(ns, q), prev_vals(ns, q), rhs(ns, q);
    for (Eigen::Index k = 0; k < ns; ++k) {
        const auto u = static_cast<std::size_t>(k);
        const Vec& x = samples.points[u];
        prev_vals.row(k) = f_prev.eval(x).transpose();
        phi_vals.row(k) = phi_value(phi, f_prev, x, samples.region[u]).transpose();
        rhs.row(k) = phi_vals.row(k) - f_prev.divisor().eval(to_complex(x)).transpose();
    }

    FitReport report;
    report.eps_prime = cfg.eps_prime;
    const double inv_lambda = 1.0 / checks.lambda_j;
    double best_badness = std::numeric_limits<double>::infinity();
    std::vector<MultiPoly> best_w;
    for (int degree : cfg.degrees) {
        DegreeTrial t;
        t.degree = degree;
        auto w = solve_correction(samples, rhs, f_prev.divisor(), f_prev.order(), degree, cfg.scale, cfg.ridge,
                                  &t.train_rms);
        const CandidateMap f_new(f_prev.divisor(), f_prev.order(), w);
        t.min_abs_delta1 = std::numeric_limits<double>::infinity();
        bool any_delta1 = false;
        for (Eigen::Index k = 0; k < ns; ++k) {
            const auto u = static_cast<std::size_t>(k);
            if (!samples.validation[u]) continue;
            const CVec v = f_new.eval(samples.points[u]);
            const double res = (v - phi_vals.row(k).transpose()).norm();
            const double mod = v.norm();
            switch (samples.region[u]) {
                case Region::Ball:
                    t.residual_ball = std::max(t.residual_ball, res);
                    t.c1_value = std::max(t.c1_value, (v - prev_vals.row(k).transpose()).norm());
                    break;
                case Region::LambdaV: t.residual_lambda_v = std::max(t.residual_lambda_v, res); break;
                case Region::Delta1:
                    t.residual_delta1 = std::max(t.residual_delta1, res);
                    t.min_abs_delta1 = std::min(t.min_abs_delta1, mod);
                    any_delta1 = true;
                    break;
            }
            if (samples.on_labyrinth[u]) {
                const bool ok = checks.all_complete ? mod > inv_lambda
                                                    : (mod < checks.lambda_j || mod > inv_lambda);
                if (!ok) ++t.c7_violations;
            }
        }
        if (!any_delta1) t.min_abs_delta1 = std::numeric_limits<double>::infinity();
        t.c8_min = std::numeric_limits<double>::infinity();
        for (const auto& p : checks.neighborhood_samples) {
            const CVec z = to_complex(p);
            if (f_new.divisor().eval(z).norm() <= checks.off_v_tol) continue;
            t.c8_min = std::min(t.c8_min, f_new.extra_factor(z).cwiseAbs().minCoeff());
        }
        t.residual_ok = t.residual_ball < 0.5 * cfg.eps_prime && t.residual_lambda_v < 0.5 * cfg.eps_prime &&
                        t.min_abs_delta1 > inv_lambda;
        t.c1 = t.c1_value < checks.eps_j / checks.c1_slack;
        t.c7 = t.c7_violations == 0;
        t.c8 = t.c8_min > checks.zero_floor;
        report.trials.push_back(t);

        const double badness = std::max({t.residual_ball / (0.5 * cfg.eps_prime),
                                         t.residual_lambda_v / (0.5 * cfg.eps_prime),
                                         any_delta1 ? inv_lambda / std::max(t.min_abs_delta1, 1e-300) : 0.0});
        if (t.accepted()) {
            report.degree = degree;
            report.best = t;
            report.accepted = true;
            report.histogram = labyrinth_histogram(f_new, samples, checks.lambda_j);
            return {std::move(w), report};
        }
        if (badness < best_badness) {
            best_badness = badness;
            report.best = t;
            report.degree = degree;
            best_w = std::move(w);
        }
    }
    if (!best_w.empty())
        report.histogram = labyrinth_histogram(CandidateMap(f_prev.divisor(), f_prev.order(), best_w), samples,
                                               checks.lambda_j);
    std::ostringstream os;
    os << "no degree up to " << cfg.degrees.back() << " passed; best degree " << report.best.degree
       << " ball residual " << report.best.residual_ball << " (target " << 0.5 * cfg.eps_prime
       << "), min |F| on Delta1 " << report.best.min_abs_delta1 << " (need > " << inv_lambda << ")";
    throw DegreeCapExceeded(os.str(), report);
}

void to_json(json& j, const PhiSpec& p) {
    const char* kind = p.kind == PhiCase::Shift ? "shift" : p.kind == PhiCase::Scale ? "scale" : "identity";
    json w0 = json::array();
    for (Eigen::Index i = 0; i < p.w0.size(); ++i) w0.push_back({p.w0[i].real(), p.w0[i].imag()});
    j = json{{"case", kind}, {"w0", w0}, {"C", p.C}, {"max_abs", p.max_abs}, {"min_abs", p.min_abs}, {"lambda", p.lambda}};
}

PhiSpec phi_from_json(const json& j) {
    PhiSpec p;
    const auto kind = j.at("case").get<std::string>();
    p.kind = kind == "shift" ? PhiCase::Shift : kind == "scale" ? PhiCase::Scale : PhiCase::Identity;
    const auto& w0 = j.at("w0");
    p.w0.resize(static_cast<Eigen::Index>(w0.size()));
    for (std::size_t i = 0; i < w0.size(); ++i)
        p.w0[static_cast<Eigen::Index>(i)] = cplx(w0[i][0].get<double>(), w0[i][1].get<double>());
    p.C = j.at("C").get<double>();
    p.max_abs = j.at("max_abs").get<double>();
    p.min_abs = j.at("min_abs").get<double>();
    p.lambda = j.at("lambda").get<double>();
    return p;
}

void to_json(json& j, const DegreeTrial& t) {
    j = json{{"degree", t.degree},
             {"residual_ball", t.residual_ball},
             {"residual_lambda_V", t.residual_lambda_v},
             {"residual_delta1", t.residual_delta1},
             {"min_abs_delta1", t.min_abs_delta1},
             {"train_rms", t.train_rms},
             {"c1_value", t.c1_value},
             {"c7_violations", t.c7_violations},
             {"c8_min", t.c8_min},
             {"residual_ok", t.residual_ok},
             {"c1", t.c1},
             {"c7", t.c7},
             {"c8", t.c8}};
}

void to_json(json& j, const LabyrinthHistogram& h) {
    j = json{{"lambda", h.lambda}, {"below", h.below},   {"inside", h.inside}, {"above", h.above},
             {"min_abs", h.min_abs}, {"max_abs", h.max_abs}, {"edges", h.edges}, {"counts", h.counts}};
}

void to_json(json& j, const FitReport& r) {
    j = json{{"degree", r.degree},
             {"residuals",
              {{"ball", r.best.residual_ball}, {"lambda_V", r.best.residual_lambda_v}, {"delta1", r.best.residual_delta1}}},
             {"eps_prime", r.eps_prime},
             {"verdicts", {{"c1", r.best.c1}, {"c7", r.best.c7}, {"c8", r.best.c8}}},
             {"accepted", r.accepted},
             {"trials", r.trials},
             {"histogram", r.histogram}};
}

namespace {

double num(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

}  // namespace

FitReport fit_report_from_json(const json& j) {
    FitReport r;
    r.degree = j.at("degree").get<int>();
    r.eps_prime = num(j.at("eps_prime"));
    r.accepted = j.at("accepted").get<bool>();
    for (const auto& t : j.at("trials")) {
        DegreeTrial d;
        d.degree = t.at("degree").get<int>();
        d.residual_ball = num(t.at("residual_ball"));
        d.residual_lambda_v = num(t.at("residual_lambda_V"));
        d.residual_delta1 = num(t.at("residual_delta1"));
        d.min_abs_delta1 = num(t.at("min_abs_delta1"));
        d.train_rms = num(t.at("train_rms"));
        d.c1_value = num(t.at("c1_value"));
        d.c7_violations = t.at("c7_violations").get<std::size_t>();
        d.c8_min = num(t.at("c8_min"));
        d.residual_ok = t.at("residual_ok").get<bool>();
        d.c1 = t.at("c1").get<bool>();
        d.c7 = t.at("c7").get<bool>();
        d.c8 = t.at("c8").get<bool>();
        r.trials.push_back(d);
        if (d.degree == r.degree) r.best = d;
    }
    const auto& h = j.at("histogram");
    r.histogram.lambda = num(h.at("lambda"));
    r.histogram.below = h.at("below").get<std::size_t>();
    r.histogram.inside = h.at("inside").get<std::size_t>();
    r.histogram.above = h.at("above").get<std::size_t>();
    r.histogram.min_abs = num(h.at("min_abs"));
    r.histogram.max_abs = num(h.at("max_abs"));
    r.histogram.edges = h.at("edges").get<std::vector<double>>();
    r.histogram.counts = h.at("counts").get<std::vector<std::size_t>>();
    return r;
}

}  // namespace foliate
