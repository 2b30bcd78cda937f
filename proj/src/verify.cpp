#include "foliate/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "foliate/sampling.hpp"

namespace foliate {

PathSearchResult min_avoiding_path(const Shell& shell, const TangentLabyrinth& lab, const PathSearchConfig& cfg,
                                   double clearance) {
    const Eigen::Index dim = lab.components.empty() ? 4 : static_cast<Eigen::Index>(lab.components.front().ambient_dim());
    const ObstacleConstraint c(lab.components, clearance, dim);
    return search_crossing(shell, c, cfg);
}

PathSearchResult min_band_path(const Shell& shell, const CandidateMap& f, double lambda, const PathSearchConfig& cfg,
                               double resolution) {
    const BandConstraint c(f, lambda, resolution);
    return search_crossing(shell, c, cfg);
}

namespace {

Vec real_residual(const CandidateMap& f, const CVec& c, const Vec& x) {
    const CVec d = f.eval(x) - c;
    Vec r(2 * d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        r[2 * i] = d[i].real();
        r[2 * i + 1] = d[i].imag();
    }
    return r;
}

}  // namespace

bool project_to_fiber(const CandidateMap& f, const CVec& c, Vec& x, double tol, int max_iter) {
    for (int it = 0; it <= max_iter; ++it) {
        const Vec r = real_residual(f, c, x);
        if (r.norm() <= tol) return true;
        if (it == max_iter) break;
        const Eigen::MatrixXd j = real_jacobian(f.jacobian(x));
        const Eigen::MatrixXd jjt = j * j.transpose();
        const Vec step = j.transpose() * jjt.ldlt().solve(r);
        if (!step.allFinite()) return false;
        x -= step;
    }
    return false;
}

TraceLedger trace_fiber(const CandidateMap& f, const CVec& c, const Vec& z0, const TraceConfig& cfg) {
    TraceLedger led;
    led.c = c;
    led.shell_length.assign(cfg.shells.size(), 0.0);
    Vec x = z0;
    if (!project_to_fiber(f, c, x, cfg.tol, cfg.newton_iters))
        throw ProjectionDiverged("start point does not project onto the fiber");
    auto shell_of = [&](double rad) {
        for (std::size_t k = 0; k < cfg.shells.size(); ++k)
            if (rad >= cfg.shells[k].inner() && rad <= cfg.shells[k].outer()) return static_cast<int>(k);
        return -1;
    };
    auto residual = [&](const Vec& p) { return (f.eval(p) - c).norm(); };

    led.path.points.push_back(x);
    led.max_residual = residual(x);
    led.rows.push_back({0, x.norm(), shell_of(x.norm()), 0.0, led.max_residual});
    if (x.norm() >= cfg.stop_radius) {
        led.stop_reason = "start outside stop radius";
        return led;
    }

    for (int step = 1; step <= cfg.max_steps; ++step) {
        const CMat jc = f.jacobian(x);
        if (rank_margin(jc) < cfg.rank_floor) {
            std::ostringstream os;
            os << "jacobian degenerate at |z|=" << x.norm();
            throw RankLoss(os.str());
        }
        const Eigen::MatrixXd j = real_jacobian(jc);
        const Eigen::MatrixXd proj =
            Eigen::MatrixXd::Identity(x.size(), x.size()) - j.transpose() * (j * j.transpose()).ldlt().solve(j);
        Vec w = proj * x;
        if (w.norm() < 1e-12 * std::max(1.0, x.norm())) {
            // On an axis point every kernel direction is radially flat; take the
            // dominant kernel column.
            Eigen::Index col = 0;
            proj.colwise().norm().maxCoeff(&col);
            w = proj.col(col);
        }
        w.normalize();

        auto advance = [&](double h, Vec& out) {
            out = x + h * w;
            return project_to_fiber(f, c, out, cfg.tol, cfg.newton_iters);
        };
        double h = cfg.step;
        Vec next;
        int halvings = 0;
        while (!advance(h, next)) {
            if (++halvings > 12) throw ProjectionDiverged("Newton projection failed after step halving");
            h *= 0.5;
        }
        bool done = false;
        if (next.norm() >= cfg.stop_radius) {
            // Land on the stop sphere.
            double lo = 0.0, hi = h;
            Vec cand = next;
            for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi);
                Vec p;
                if (!advance(mid, p)) {
                    hi = mid;
                    continue;
                }
                if (p.norm() >= cfg.stop_radius) {
                    hi = mid;
                    cand = p;
                } else {
                    lo = mid;
                }
            }
            next = cand;
            done = true;
        }
        const double seg = (next - x).norm();
        const double mid_rad = 0.5 * (next + x).norm();
        const int sh = shell_of(mid_rad);
        if (sh >= 0) led.shell_length[static_cast<std::size_t>(sh)] += seg;
        led.total_length += seg;
        const double res = residual(next);
        led.max_residual = std::max(led.max_residual, res);
        x = next;
        led.path.points.push_back(x);
        led.rows.push_back({step, x.norm(), shell_of(x.norm()), led.total_length, res});
        if (done) {
            led.stop_reason = "reached stop radius";
            return led;
        }
        if (seg < 1e-14) {
            led.stop_reason = "stalled";
            return led;
        }
    }
    led.stop_reason = "step cap";
    return led;
}

ZeroScanReport zero_avoidance(const CandidateMap& f, std::span<const AvoidanceNeighborhood> neighborhoods,
                              const ZeroScanConfig& cfg) {
    ZeroScanReport rep;
    rep.starts = cfg.starts;
    const Eigen::Index dim = 2 * f.n();
    const auto starts = halton_ball(cfg.starts, dim, cfg.radius, cfg.seed);
    auto clamp = [&](CVec z) {
        const double nrm = z.norm();
        if (nrm > cfg.radius) z *= cfg.radius / nrm;
        return z;
    };
    for (int comp = 0; comp < f.q(); ++comp) {
        for (const auto& s : starts) {
            CVec z = to_complex(s);
            CVec grad;
            cplx g = f.extra_factor_grad(comp, z, grad);
            double val = std::abs(g);
            for (int it = 0; it < cfg.iters && val > 1e-15; ++it) {
                const double gg = grad.squaredNorm();
                if (gg == 0.0) break;
                // Minimum-norm Newton step for g(z) = 0; also the steepest
                // descent direction of |g|^2.
                const CVec dir = -(g / gg) * grad.conjugate();
                bool moved = false;
                double t = 1.0;
                for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
                    const CVec cand = clamp(z + t * dir);
                    CVec cg;
                    const cplx gv = f.extra_factor_grad(comp, cand, cg);
                    if (std::abs(gv) < val) {
                        z = cand;
                        g = gv;
                        grad = cg;
                        val = std::abs(gv);
                        moved = true;
                        break;
                    }
                }
                if (!moved) break;
            }
            rep.min_value = std::min(rep.min_value, val);
            if (val >= cfg.floor) continue;
            ZeroHit hit{to_real(z), val, comp, -1};
            for (std::size_t k = 0; k < neighborhoods.size(); ++k) {
                if (neighborhoods[k].contains(hit.z)) {
                    hit.neighborhood = static_cast<int>(k);
                    break;
                }
            }
            if (hit.neighborhood >= 0) rep.violations.push_back(hit);
            rep.below_floor.push_back(std::move(hit));
        }
    }
    return rep;
}

BandSummary completeness_summary(double lambda, std::optional<int> j_lambda, std::span<const double> deltas,
                                 std::span<const bool> certified) {
    BandSummary b;
    b.lambda = lambda;
    b.j_lambda = j_lambda;
    if (!j_lambda) {
        b.argument = "band not reached within the computed steps; no bound";
        return b;
    }
    for (int j = *j_lambda; j <= static_cast<int>(deltas.size()); ++j) {
        const auto u = static_cast<std::size_t>(j - 1);
        if (u < certified.size() && !certified[u]) continue;
        b.steps.push_back(j);
        b.deltas.push_back(deltas[u]);
        b.partial_sum += deltas[u];
    }
    std::ostringstream os;
    os << "a path inside the band that escapes every compact set crosses shells " << *j_lambda << ".."
       << deltas.size() << " during pairwise disjoint parameter intervals, each crossing longer than the "
       << "shell's delta; its length therefore exceeds " << b.partial_sum
       << " here and grows without bound as more shells are added";
    b.argument = os.str();
    return b;
}

void to_json(json& j, const TraceLedger& t) {
    json c = json::array();
    for (Eigen::Index i = 0; i < t.c.size(); ++i) c.push_back({t.c[i].real(), t.c[i].imag()});
    j = json{{"c", c},
             {"shell_length", t.shell_length},
             {"max_residual", t.max_residual},
             {"total_length", t.total_length},
             {"steps", t.rows.size()},
             {"stop_reason", t.stop_reason}};
}

void to_json(json& j, const ZeroScanReport& z) {
    auto hits = [](const std::vector<ZeroHit>& v) {
        json a = json::array();
        for (const auto& h : v)
            a.push_back({{"z", std::vector<double>(h.z.data(), h.z.data() + h.z.size())},
                         {"value", h.value},
                         {"component", h.component},
                         {"neighborhood", h.neighborhood}});
        return a;
    };
    j = json{{"starts", z.starts},
             {"min_value", z.min_value},
             {"below_floor", hits(z.below_floor)},
             {"violations", hits(z.violations)}};
}

void to_json(json& j, const BandSummary& b) {
    j = json{{"lambda", b.lambda},
             {"j_lambda", b.j_lambda ? json(*b.j_lambda) : json(nullptr)},
             {"steps", b.steps},
             {"deltas", b.deltas},
             {"partial_sum", b.partial_sum},
             {"argument", b.argument}};
}

void to_json(json& j, const PathSearchResult& r) {
    json pts = json::array();
    for (const auto& p : r.path.points) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    j = json{{"feasible", r.feasible}, {"length", r.length}, {"restart_lengths", r.restart_lengths}, {"path", pts}};
}

}  // namespace foliate
