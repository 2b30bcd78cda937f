#include "foliate/labyrinth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "foliate/grid.hpp"
#include "foliate/sampling.hpp"

namespace foliate {

namespace {

// Surface measure of the unit sphere S^{k} in R^{k+1}.
double sphere_area(int k) {
    const double h = 0.5 * (k + 1);
    return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

// Area of a geodesic cap of angular radius alpha on S^{dim-1}.
double cap_area(double alpha, int dim) {
    const int steps = 200;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double th = alpha * i / steps;
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::pow(std::sin(th), dim - 2);
    }
    return sphere_area(dim - 2) * acc * alpha / (3.0 * steps);
}

double json_double(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

// Exact min over pairs (i in a, k in b, i != k) of ball_distance, using a
// grid over the centers of b. Pairs whose gap is below 2 a_max always share
// a neighbourhood; when nothing that close exists the brute-force pass
// settles the value.
double min_pair_gap(const std::vector<TangentBall>& balls, const std::vector<std::size_t>& a,
                    const std::vector<std::size_t>& b, bool same_set) {
    double inf = std::numeric_limits<double>::infinity();
    if (a.empty() || b.empty()) return inf;
    double a_max = 0.0;
    for (auto i : a) a_max = std::max(a_max, balls[i].radius());
    for (auto i : b) a_max = std::max(a_max, balls[i].radius());
    const double cell = std::max(4.0 * a_max, 1e-12);
    PointGrid grid(balls[a.front()].center().size(), cell);
    for (std::size_t k = 0; k < b.size(); ++k) grid.insert(balls[b[k]].center(), static_cast<std::uint32_t>(k));
    double best = inf;
    for (std::size_t ia = 0; ia < a.size(); ++ia) {
        const auto& s = balls[a[ia]];
        grid.visit_near(s.center(), [&](std::uint32_t k) {
            if (same_set && k <= ia) return;
            const auto& t = balls[b[k]];
            if ((s.center() - t.center()).norm() - s.radius() - t.radius() >= best) return;
            best = std::min(best, ball_distance(s, t));
        });
    }
    if (best < 2.0 * a_max) return best;
    for (std::size_t ia = 0; ia < a.size(); ++ia)
        for (std::size_t k = same_set ? ia + 1 : 0; k < b.size(); ++k)
            best = std::min(best, ball_distance(balls[a[ia]], balls[b[k]]));
    return best;
}

}  // namespace

double reduced_outer_radius(const Shell& shell, double eta, double fraction) {
    const double r = shell.inner();
    const double bound = std::min(shell.outer(), std::sqrt(r * r + 0.25 * eta * eta));
    return r + fraction * (bound - r);
}

TangentLabyrinth place_levels(const Shell& shell, double lo, double hi, int levels, double eta, int n,
                              const BuildConfig& cfg, std::uint64_t seed, const Divisor* v) {
    if (levels < 1) throw ConfigError("labyrinth needs at least one level");
    if (!(lo < hi)) throw ConfigError("empty placement region");
    const int dim = 2 * n;
    const double m = static_cast<double>(levels);
    const double spacing = (hi * hi - lo * lo) / m;
    // Levels sit at rho_i^2 = lo^2 + (i + offset) * spacing. Nesting needs
    // a^2 < spacing and the top level needs a^2 < (1 - offset) * spacing.
    const double off = cfg.level_offset;
    if (!(off > 0.0 && off < 1.0)) throw ConfigError("level offset must lie in (0, 1)");
    const double a = std::min(cfg.c_gap * std::sqrt((1.0 - off) * spacing), 0.5 * eta * (1.0 - 1e-6));
    if (!(a > 0.0)) throw ConfigError("degenerate ball radius");

    TangentLabyrinth lab;
    lab.shell = shell;
    lab.r0 = hi;
    lab.eta_target = eta;

    // Directions of all lower levels, kept for hole-seeking. Cones on one
    // level are disjoint, so the hit count is the number of lower levels
    // shadowing a direction.
    std::vector<Vec> below_dirs;
    std::vector<double> below_half_chord;
    PointGrid below(dim, 2.0 * std::sin(std::atan(a / lo)));
    for (int i = 0; i < levels; ++i) {
        const double rho = std::sqrt(lo * lo + (i + off) * spacing);
        const double alpha = std::atan(a / rho);
        // Two balls lie in disjoint cones around their center directions when
        // the angle between the directions exceeds 2 alpha.
        const double chord_min = 2.0 * std::sin(alpha) * (1.0 + 1e-9);
        const double est = sphere_area(dim - 1) / cap_area(alpha, dim);
        const auto n_cand = static_cast<std::size_t>(std::ceil(cfg.candidates_per_disc * est)) + 16;

        Rng rng(derive_seed(seed, "level", static_cast<std::uint64_t>(i)));
        std::vector<Vec> cand;
        cand.reserve(n_cand);
        for (std::size_t c = 0; c < n_cand; ++c) cand.push_back(random_direction(rng, dim));

        std::vector<int> shadow(cand.size(), 0);
        if (!below_dirs.empty()) {
            for (std::size_t c = 0; c < cand.size(); ++c)
                below.visit_near(cand[c], [&](std::uint32_t k) {
                    if ((cand[c] - below_dirs[k]).norm() < below_half_chord[k]) ++shadow[c];
                });
        }
        std::vector<std::size_t> order(cand.size());
        for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return shadow[x] < shadow[y]; });

        PointGrid grid(dim, chord_min);
        std::vector<Vec> dirs;
        for (auto c : order) {
            if (cfg.max_per_level > 0 && dirs.size() >= cfg.max_per_level) break;
            bool free = true;
            grid.visit_near(cand[c], [&](std::uint32_t k) {
                if (free && (cand[c] - dirs[k]).norm() <= chord_min) free = false;
            });
            if (!free) continue;
            if (v && cfg.v_clearance > 0.0) {
                const double m = min_abs_on_disc(*v, TangentBall(rho * cand[c], a), 64, 30);
                if (m >= 1e-7 && m < cfg.v_clearance) continue;
            }
            grid.insert(cand[c], static_cast<std::uint32_t>(dirs.size()));
            dirs.push_back(cand[c]);
            if (lab.components.size() + dirs.size() > cfg.max_components) {
                std::ostringstream os;
                os << "labyrinth with " << levels << " levels exceeds " << cfg.max_components
                   << " components (ball radius " << a << ")";
                throw BuildBudgetExceeded(os.str(), {});
            }
        }
        for (const auto& d : dirs) {
            lab.components.emplace_back(rho * d, a);
            lab.level.push_back(i);
        }
        for (auto& d : dirs) {
            below.insert(d, static_cast<std::uint32_t>(below_dirs.size()));
            below_dirs.push_back(std::move(d));
            below_half_chord.push_back(0.5 * chord_min);
        }
    }
    lab.tidy = validate_tidy(lab.components, shell);
    return lab;
}

TangentLabyrinth build(const Shell& shell, double delta, double eta, int n, const BuildConfig& cfg,
                       const Divisor* v) {
    if (!(delta >= 0.0) || !(eta > 0.0)) throw ConfigError("labyrinth needs delta >= 0 and eta > 0");
    if (n < 2) throw ConfigError("labyrinth needs n >= 2");
    const double lo = shell.inner();
    double hi = cfg.placement == Placement::ReducedShell ? reduced_outer_radius(shell, eta, cfg.reduced_fraction)
                                                         : shell.outer();
    // Keep the top level's rim strictly inside R.
    hi = std::min(hi, shell.outer() * (1.0 - 1e-9));

    std::vector<BuildRound> history;
    int levels = std::max(1, cfg.initial_levels);
    for (int round = 0; round < cfg.max_rounds && levels <= cfg.max_levels; ++round, levels *= 2) {
        TangentLabyrinth lab;
        try {
            lab = place_levels(shell, lo, hi, levels, eta, n, cfg, derive_seed(cfg.seed, "place", round), v);
        } catch (const BuildBudgetExceeded& e) {
            throw BuildBudgetExceeded(e.what(), history);
        }
        lab.delta_target = delta;
        BuildRound rec{levels, lab.components.size(), lab.components.front().radius(),
                       std::numeric_limits<double>::infinity()};
        if (delta <= 0.0) {
            history.push_back(rec);
            lab.certified = true;
            lab.history = history;
            return lab;
        }
        PathSearchConfig search = cfg.search;
        search.early_exit_length = delta;
        search.seed = derive_seed(cfg.seed, "certify", round);
        const ObstacleConstraint obstacles(lab.components, cfg.clearance, 2 * n);
        const PathSearchResult res = search_crossing(shell, obstacles, search);
        rec.best_length = res.length;
        history.push_back(rec);
        if (!res.feasible || res.length > delta) {
            lab.certified = true;
            lab.best_crossing = res.length;
            lab.history = history;
            return lab;
        }
    }
    std::ostringstream os;
    os << "no labyrinth certified for delta=" << delta << " within " << cfg.max_rounds << " rounds / "
       << cfg.max_levels << " levels";
    throw BuildBudgetExceeded(os.str(), history);
}

namespace {

// argmin ||J x + b|| over |x| <= radius. Minimum-norm solution when it fits,
// otherwise the boundary point from (J^T J + mu I) x = -J^T b with mu found by
// bisection (|x(mu)| decreases in mu).
Vec ball_constrained_lsq(const Eigen::MatrixXd& jr, const Vec& b, double radius) {
    const Vec x0 = -jr.completeOrthogonalDecomposition().solve(b);
    if (x0.norm() <= radius) return x0;
    const Eigen::MatrixXd jtj = jr.transpose() * jr;
    const Vec jtb = jr.transpose() * b;
    const auto dim = jtj.rows();
    auto solve = [&](double mu) -> Vec {
        return -(jtj + mu * Eigen::MatrixXd::Identity(dim, dim)).ldlt().solve(jtb);
    };
    double lo = 0.0, hi = std::max(1e-12, jtb.norm() / radius);
    while (solve(hi).norm() > radius) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (solve(mid).norm() > radius) lo = mid;
        else hi = mid;
    }
    Vec x = solve(hi);
    if (x.norm() > radius) x *= radius / x.norm();
    return x;
}

}  // namespace

double min_abs_on_disc(const Divisor& v, const TangentBall& t, std::size_t samples, int refine_iters) {
    const auto pts = disc_samples(t, samples);
    double best = std::numeric_limits<double>::infinity();
    Vec start = t.center();
    for (const auto& p : pts) {
        const double val = v.eval(to_complex(p)).norm();
        if (val < best) {
            best = val;
            start = p;
        }
    }
    const Eigen::MatrixXd basis = complement_basis(t.center());
    auto value = [&](const Vec& u) { return v.eval(to_complex(Vec(t.center() + basis * u))).norm(); };

    // Gauss-Newton where every linearised step is solved exactly inside the
    // disc; a halving line search toward the current point keeps the value
    // decreasing for nonlinear h.
    Vec u = basis.transpose() * (start - t.center());
    double cur = best;
    for (int it = 0; it < refine_iters && cur > 1e-15; ++it) {
        const CVec z = to_complex(Vec(t.center() + basis * u));
        const CVec hz = v.eval(z);
        Vec res(2 * hz.size());
        for (Eigen::Index i = 0; i < hz.size(); ++i) {
            res[2 * i] = hz[i].real();
            res[2 * i + 1] = hz[i].imag();
        }
        const Eigen::MatrixXd jr = real_jacobian(v.jacobian(z)) * basis;
        const Vec target = ball_constrained_lsq(jr, res - jr * u, t.radius());
        const Vec dir = target - u;
        bool moved = false;
        double step = 1.0;
        for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
            const Vec cand = u + step * dir;
            const double val = value(cand);
            if (val < cur) {
                u = cand;
                cur = val;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    return std::min(best, cur);
}

LabyrinthSplit split(const TangentLabyrinth& lab, const Divisor* v, const SplitConfig& cfg) {
    LabyrinthSplit out;
    out.tol = cfg.tol;
    out.guard = cfg.guard;
    out.samples = cfg.samples;
    const bool v_empty = v == nullptr || v->q() == 0;
    for (std::size_t i = 0; i < lab.components.size(); ++i) {
        if (v_empty) {
            out.min_abs_h.push_back(std::numeric_limits<double>::infinity());
            out.lambda_0.push_back(i);
            continue;
        }
        const double m = min_abs_on_disc(*v, lab.components[i], cfg.samples, cfg.refine_iters);
        out.min_abs_h.push_back(m);
        if (m < cfg.tol) out.lambda_V.push_back(i);
        else if (m < cfg.guard * cfg.tol) throw AmbiguousClassification(i, m);
        else out.lambda_0.push_back(i);
    }
    return out;
}

bool InflatedPair::contains(const TangentLabyrinth& lab, double sigma, const Vec& z) const {
    for (auto i : members)
        if (dist_to_tangent_ball(lab.components[i], z) <= sigma * mu) return true;
    return false;
}

double distance_to_divisor(const TangentBall& t, const Divisor& v, std::span<const Vec> v_samples) {
    if (v_samples.empty()) return std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(v_samples.size());
    for (std::size_t k = 0; k < v_samples.size(); ++k) d.emplace_back(dist_to_tangent_ball(t, v_samples[k]), k);
    const std::size_t keep = std::min<std::size_t>(4, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep), d.end());
    double best = d.front().first;
    for (std::size_t s = 0; s < keep; ++s) {
        Vec p = v_samples[d[s].second];
        for (int it = 0; it < 40; ++it) {
            const Vec y = t.project(p);
            const auto z = project_to_divisor(v, to_complex(y));
            if (!z) break;
            const Vec q = to_real(*z);
            const double dist = (q - y).norm();
            const double prev = best;
            best = std::min(best, dist);
            p = q;
            if (prev - dist < 1e-15) break;
        }
    }
    return best;
}

InflatedPair inflate(const LabyrinthSplit& sp, const TangentLabyrinth& lab, const Divisor* v, double r_ball,
                     const InflateConfig& cfg) {
    InflatedPair out;
    if (sp.lambda_0.empty()) return out;
    out.members = sp.lambda_0;
    const auto& balls = lab.components;

    struct Term {
        const char* name;
        double value;
    };
    std::vector<Term> terms;
    terms.push_back({"lambda_0 pairwise", min_pair_gap(balls, sp.lambda_0, sp.lambda_0, true)});
    double to_ball = std::numeric_limits<double>::infinity();
    for (auto i : sp.lambda_0) to_ball = std::min(to_ball, balls[i].center_norm() - r_ball);
    terms.push_back({"inner ball", to_ball});
    if (v != nullptr && v->q() > 0) {
        const auto vs = divisor_samples(*v, cfg.v_samples, lab.shell.outer(), cfg.seed);
        double to_v = std::numeric_limits<double>::infinity();
        for (auto i : sp.lambda_0) to_v = std::min(to_v, distance_to_divisor(balls[i], *v, vs));
        terms.push_back({"divisor", to_v});
    }
    terms.push_back({"lambda_V", min_pair_gap(balls, sp.lambda_0, sp.lambda_V, false)});

    const auto it = std::min_element(terms.begin(), terms.end(),
                                     [](const Term& a, const Term& b) { return a.value < b.value; });
    // The (1 - 1e-6) keeps 2-inflations of the closest pair strictly apart.
    out.mu = cfg.fraction * it->value * (1.0 - 1e-6);
    out.limiting_term = it->name;
    if (!(out.mu > cfg.floor)) {
        std::ostringstream os;
        os << "inflation margin " << out.mu << " at or below floor " << cfg.floor << " (limited by "
           << it->name << ")";
        throw DegenerateMargin(os.str());
    }
    return out;
}

NestingCertificate nesting_order(const TangentLabyrinth& lab, double r_ball) {
    NestingCertificate cert;
    cert.r_ball = r_ball;
    if (lab.components.empty()) return cert;
    const auto& rho = lab.tidy.radial_levels;
    const auto& rad = lab.tidy.per_level_radius;
    if (!(r_ball < rho.front())) throw NoSeparation("first level does not clear the inner ball");
    cert.radii.push_back(0.5 * (r_ball + rho.front()));
    for (std::size_t l = 0; l < rho.size(); ++l) {
        const double outer = std::hypot(rho[l], rad[l]);
        const double next = l + 1 < rho.size() ? rho[l + 1] : lab.shell.outer();
        if (!(outer < next)) {
            std::ostringstream os;
            os << "level " << l << " reaches " << outer << ", not below " << next;
            throw NoSeparation(os.str());
        }
        cert.radii.push_back(0.5 * (outer + next));
    }
    return cert;
}

bool AvoidanceNeighborhood::contains(const Vec& z) const {
    for (const auto& t : base)
        if (dist_to_tangent_ball(t, z) < nu) return true;
    return false;
}

AvoidanceNeighborhood avoidance_neighborhood(const TangentLabyrinth& lab, double mu, double fraction) {
    AvoidanceNeighborhood o;
    o.base = lab.components;
    if (lab.components.empty()) return o;
    double room = std::numeric_limits<double>::infinity();
    for (const auto& t : lab.components)
        room = std::min({room, t.center_norm() - lab.shell.inner(), lab.shell.outer() - outermost_radius(t)});
    if (mu > 0.0) {
        o.nu = 0.5 * mu;
    } else {
        std::vector<std::size_t> all(lab.components.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        o.nu = fraction * std::min(room, min_pair_gap(lab.components, all, all, true));
    }
    o.nu = std::min(o.nu, 0.5 * room);
    if (!(o.nu > 0.0)) throw DegenerateMargin("avoidance margin collapsed");
    return o;
}

void to_json(json& j, const BuildRound& r) {
    j = json{{"levels", r.levels}, {"components", r.components}, {"radius", r.radius}, {"best_length", r.best_length}};
}

void to_json(json& j, const TangentLabyrinth& lab) {
    json comps = json::array();
    for (std::size_t i = 0; i < lab.components.size(); ++i) {
        json c = lab.components[i];
        c["level"] = lab.level[i];
        comps.push_back(std::move(c));
    }
    j = json{{"shell", lab.shell},
             {"R0", lab.r0},
             {"delta", lab.delta_target},
             {"eta", lab.eta_target},
             {"certified", lab.certified},
             {"best_crossing", lab.best_crossing},
             {"components", std::move(comps)},
             {"history", lab.history}};
}

TangentLabyrinth labyrinth_from_json(const json& j) {
    TangentLabyrinth lab;
    lab.shell = shell_from_json(j.at("shell"));
    lab.r0 = j.at("R0").get<double>();
    lab.delta_target = j.at("delta").get<double>();
    lab.eta_target = json_double(j.at("eta"));
    lab.certified = j.at("certified").get<bool>();
    lab.best_crossing = json_double(j.at("best_crossing"));
    for (const auto& c : j.at("components")) {
        lab.components.push_back(tangent_ball_from_json(c));
        lab.level.push_back(c.at("level").get<int>());
    }
    for (const auto& r : j.at("history"))
        lab.history.push_back({r.at("levels").get<int>(), r.at("components").get<std::size_t>(),
                               r.at("radius").get<double>(), json_double(r.at("best_length"))});
    if (!lab.components.empty()) lab.tidy = validate_tidy(lab.components, lab.shell);
    return lab;
}

void to_json(json& j, const LabyrinthSplit& s) {
    j = json{{"lambda_V", s.lambda_V}, {"lambda_0", s.lambda_0}, {"min_abs_h", s.min_abs_h},
             {"tol", s.tol},           {"guard", s.guard},       {"samples", s.samples}};
}

LabyrinthSplit split_from_json(const json& j) {
    LabyrinthSplit s;
    s.lambda_V = j.at("lambda_V").get<std::vector<std::size_t>>();
    s.lambda_0 = j.at("lambda_0").get<std::vector<std::size_t>>();
    for (const auto& v : j.at("min_abs_h")) s.min_abs_h.push_back(json_double(v));
    s.tol = j.at("tol").get<double>();
    s.guard = j.at("guard").get<double>();
    s.samples = j.at("samples").get<std::size_t>();
    return s;
}

void to_json(json& j, const InflatedPair& p) {
    j = json{{"mu", p.mu}, {"members", p.members}, {"limiting_term", p.limiting_term}};
}

InflatedPair inflated_from_json(const json& j) {
    InflatedPair p;
    p.mu = j.at("mu").get<double>();
    p.members = j.at("members").get<std::vector<std::size_t>>();
    p.limiting_term = j.at("limiting_term").get<std::string>();
    return p;
}

void to_json(json& j, const AvoidanceNeighborhood& o) {
    j = json{{"nu", o.nu}, {"base", o.base}};
}

AvoidanceNeighborhood avoidance_from_json(const json& j) {
    AvoidanceNeighborhood o;
    o.nu = j.at("nu").get<double>();
    for (const auto& b : j.at("base")) o.base.push_back(tangent_ball_from_json(b));
    return o;
}

}  // namespace foliate
