#include "foliate/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <thread>

#include "foliate/grid.hpp"

namespace foliate {

double Polyline::length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) s += (points[i] - points[i - 1]).norm();
    return s;
}

std::vector<double> Polyline::segment_lengths() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < points.size(); ++i) out.push_back((points[i] - points[i - 1]).norm());
    return out;
}

bool Polyline::crosses(const Shell& shell, double tol) const {
    if (points.empty()) return false;
    return points.front().norm() <= shell.inner() + tol && points.back().norm() >= shell.outer() - tol;
}

std::vector<Vec> PathConstraint::hint_nodes(Rng& rng, const Shell& shell, std::size_t count) const {
    // Bridge sampling: bisect between a feasible and an infeasible point and
    // keep the feasible end, which lands next to the constraint boundary.
    std::vector<Vec> out;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double sigma = 0.15 * shell.thickness();
    std::size_t attempts = 0;
    while (out.size() < count && attempts < 20 * count) {
        ++attempts;
        const double rad = shell.inner() + uni(rng) * shell.thickness();
        Vec p = rad * random_direction(rng, ambient_dim());
        Vec q = p + sigma * uni(rng) * random_direction(rng, p.size());
        bool pok = point_ok(p), qok = point_ok(q);
        if (pok == qok) continue;
        if (!pok) std::swap(p, q);
        for (int it = 0; it < 12; ++it) {
            Vec m = 0.5 * (p + q);
            if (point_ok(m)) p = m;
            else q = m;
        }
        const double nrm = p.norm();
        if (nrm > shell.inner() && nrm < shell.outer()) out.push_back(p);
    }
    return out;
}

namespace {
constexpr std::size_t kGridThreshold = 64;
}

ObstacleConstraint::ObstacleConstraint(std::vector<TangentBall> balls, double clearance, Eigen::Index ambient_dim)
    : balls_(std::move(balls)), clearance_(clearance), dim_(ambient_dim) {
    double a_max = 0.0;
    for (const auto& b : balls_) {
        if (static_cast<Eigen::Index>(b.ambient_dim()) != dim_) throw ConfigError("obstacle dimension mismatch");
        a_max = std::max(a_max, b.radius());
    }
    reach_ = a_max + clearance_;
    if (balls_.size() >= kGridThreshold) {
        // Cells of 1.5 reach; probing the segment every reach then covers
        // every center within reach of it.
        auto grid = std::make_shared<PointGrid>(dim_, 1.5 * reach_);
        for (std::size_t i = 0; i < balls_.size(); ++i) grid->insert(balls_[i].center(), static_cast<std::uint32_t>(i));
        grid_ = std::move(grid);
    }
}

std::vector<std::uint32_t> ObstacleConstraint::near_segment(const Vec& a, const Vec& b) const {
    std::vector<std::uint32_t> out;
    if (!grid_) {
        out.resize(balls_.size());
        for (std::size_t i = 0; i < balls_.size(); ++i) out[i] = static_cast<std::uint32_t>(i);
        return out;
    }
    const double len = (b - a).norm();
    const int probes = std::max(1, static_cast<int>(std::ceil(len / reach_)));
    if (static_cast<double>(probes) * std::pow(3.0, static_cast<double>(dim_)) > static_cast<double>(balls_.size())) {
        out.resize(balls_.size());
        for (std::size_t i = 0; i < balls_.size(); ++i) out[i] = static_cast<std::uint32_t>(i);
        return out;
    }
    for (int k = 0; k <= probes; ++k) {
        const Vec p = a + (b - a) * (static_cast<double>(k) / probes);
        grid_->visit_near(p, [&](std::uint32_t id) { out.push_back(id); });
    }
    if (probes > 0) {
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
}

bool ObstacleConstraint::point_ok(const Vec& p) const {
    for (auto i : near_segment(p, p)) {
        const auto& b = balls_[i];
        if ((p - b.center()).squaredNorm() > (b.radius() + clearance_) * (b.radius() + clearance_)) continue;
        if (dist_to_tangent_ball(b, p) <= clearance_) return false;
    }
    return true;
}

bool ObstacleConstraint::segment_ok(const Vec& a, const Vec& b) const {
    const Vec d = b - a;
    const double dd = d.squaredNorm();
    for (auto i : near_segment(a, b)) {
        const auto& t = balls_[i];
        // Quick rejection: the ball lies inside the round ball B(x, radius).
        const Vec& x = t.center();
        double s = dd > 0.0 ? (x - a).dot(d) / dd : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        const double reach = t.radius() + clearance_;
        if ((a + s * d - x).squaredNorm() > reach * reach) continue;
        if (segment_distance(t, a, b) <= clearance_) return false;
    }
    return true;
}

std::vector<Vec> ObstacleConstraint::hint_nodes(Rng& rng, const Shell& shell, std::size_t count) const {
    std::vector<Vec> out;
    if (balls_.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, balls_.size() - 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    std::size_t attempts = 0;
    while (out.size() < count && attempts < 10 * count) {
        ++attempts;
        const auto& b = balls_[pick(rng)];
        const Vec nrm = b.normal();
        Vec tan = random_direction(rng, nrm.size());
        tan -= tan.dot(nrm) * nrm;
        if (tan.norm() < 1e-9) continue;
        tan.normalize();
        Vec p;
        if (uni(rng) < 0.5) {
            // Just past the rim.
            const double past = clearance_ + std::abs(g(rng)) * 0.25 * b.radius();
            p = b.center() + (b.radius() + past) * tan + 0.2 * b.radius() * g(rng) * nrm;
        } else {
            // Above or below a face.
            const double side = (uni(rng) < 0.5 ? -1.0 : 1.0);
            const double off = clearance_ + std::abs(g(rng)) * 0.1 * b.radius();
            p = b.center() + uni(rng) * b.radius() * tan + side * off * nrm;
        }
        const double r = p.norm();
        if (r > shell.inner() && r < shell.outer() && point_ok(p)) out.push_back(std::move(p));
    }
    return out;
}

BandConstraint::BandConstraint(const CandidateMap& f, double lambda, double resolution)
    : f_(f), lambda_(lambda), resolution_(resolution) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("band requires 0 < lambda < 1");
}

bool BandConstraint::point_ok(const Vec& p) const {
    const double m = f_.eval(p).norm();
    return m >= lambda_ && m <= 1.0 / lambda_;
}

bool BandConstraint::segment_ok(const Vec& a, const Vec& b) const {
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / resolution_)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        if (!point_ok(a + t * (b - a))) return false;
    }
    return true;
}

bool replay_feasible(const Polyline& path, const PathConstraint& constraint) {
    for (std::size_t i = 0; i < path.points.size(); ++i) {
        if (!constraint.point_ok(path.points[i])) return false;
        if (i > 0 && !constraint.segment_ok(path.points[i - 1], path.points[i])) return false;
    }
    return true;
}

unsigned worker_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FOLIATE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Roadmap {
    std::vector<Vec> nodes;
    struct Edge {
        std::uint32_t u, v;
        double w;
        std::int8_t state;  // 0 unknown, 1 valid, -1 invalid
    };
    std::vector<Edge> edges;
    std::vector<std::vector<std::uint32_t>> adj;  // edge indices
    std::vector<std::int8_t> src_state, dst_state;
};

Vec sample_in_shell(Rng& rng, const Shell& shell, Eigen::Index dim) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double d = static_cast<double>(dim);
    const double lo = std::pow(shell.inner(), d), hi = std::pow(shell.outer(), d);
    const double rad = std::pow(lo + uni(rng) * (hi - lo), 1.0 / d);
    return rad * random_direction(rng, dim);
}

Roadmap build_roadmap(const Shell& shell, const PathConstraint& c, const PathSearchConfig& cfg, Rng& rng,
                      Eigen::Index dim) {
    Roadmap rm;
    const auto total = static_cast<std::size_t>(cfg.roadmap_nodes);
    const auto n_hint = static_cast<std::size_t>(cfg.hint_fraction * static_cast<double>(total));
    rm.nodes = c.hint_nodes(rng, shell, n_hint);
    std::size_t attempts = 0;
    while (rm.nodes.size() < total && attempts < 20 * total) {
        ++attempts;
        Vec p = sample_in_shell(rng, shell, dim);
        if (c.point_ok(p)) rm.nodes.push_back(std::move(p));
    }
    const std::size_t n = rm.nodes.size();
    rm.adj.assign(n, {});
    rm.src_state.assign(n, 0);
    rm.dst_state.assign(n, 0);

    const auto k = static_cast<std::size_t>(cfg.neighbors);
    std::vector<std::pair<double, std::uint32_t>> cand;
    std::vector<std::vector<std::uint32_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.emplace_back((rm.nodes[i] - rm.nodes[j]).squaredNorm(), static_cast<std::uint32_t>(j));
        }
        const std::size_t kk = std::min(k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
        for (std::size_t t = 0; t < kk; ++t) nbrs[i].push_back(cand[t].second);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (auto j : nbrs[i]) {
            // Keep each undirected edge once: add it from the lower index or
            // when the reverse direction did not already list it.
            const bool reverse_listed = std::find(nbrs[j].begin(), nbrs[j].end(), i) != nbrs[j].end();
            if (reverse_listed && j < i) continue;
            const auto e = static_cast<std::uint32_t>(rm.edges.size());
            rm.edges.push_back({static_cast<std::uint32_t>(i), j, (rm.nodes[i] - rm.nodes[j]).norm(), 0});
            rm.adj[i].push_back(e);
            rm.adj[j].push_back(e);
        }
    }
    return rm;
}

// Dijkstra from the inner sphere to the outer one. Node-to-sphere links are
// radial segments; edges are collision-checked the first time they are
// relaxed, so only the explored part of the roadmap is ever validated.
bool shortest_crossing(Roadmap& rm, const Shell& shell, const PathConstraint& c, Polyline& out) {
    const std::size_t n = rm.nodes.size();
    if (n == 0) return false;
    const double r = shell.inner(), R = shell.outer();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = rm.nodes[i].norm();
    auto foot = [&](std::size_t i, double rad) { return Vec(rad * rm.nodes[i] / norms[i]); };

    using QE = std::pair<double, std::uint32_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> prev(n, -1);  // edge index; -1 for the source link
    std::vector<char> done(n, 0);
    // Sources are pushed unchecked; their radial link is validated on pop.
    for (std::size_t i = 0; i < n; ++i) {
        dist[i] = norms[i] - r;
        pq.emplace(dist[i], static_cast<std::uint32_t>(i));
    }
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_node = -1;
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (done[u] || d > dist[u]) continue;
        if (d >= best) break;
        if (prev[u] < 0) {
            if (rm.src_state[u] == 0) rm.src_state[u] = c.segment_ok(foot(u, r), rm.nodes[u]) ? 1 : -1;
            if (rm.src_state[u] < 0) {
                dist[u] = std::numeric_limits<double>::infinity();
                continue;
            }
        }
        done[u] = 1;
        const double tot = d + (R - norms[u]);
        if (tot < best) {
            if (rm.dst_state[u] == 0) rm.dst_state[u] = c.segment_ok(rm.nodes[u], foot(u, R)) ? 1 : -1;
            if (rm.dst_state[u] > 0) {
                best = tot;
                best_node = u;
            }
        }
        for (auto e : rm.adj[u]) {
            auto& ed = rm.edges[e];
            const std::uint32_t v = ed.u == u ? ed.v : ed.u;
            if (done[v] || ed.state < 0) continue;
            const double nd = d + ed.w;
            if (nd >= dist[v] || nd >= best) continue;
            if (ed.state == 0) ed.state = c.segment_ok(rm.nodes[ed.u], rm.nodes[ed.v]) ? 1 : -1;
            if (ed.state < 0) continue;
            dist[v] = nd;
            prev[v] = e;
            pq.emplace(nd, v);
        }
    }
    if (best_node < 0) return false;
    std::vector<std::uint32_t> chain{static_cast<std::uint32_t>(best_node)};
    for (auto v = static_cast<std::uint32_t>(best_node); prev[v] >= 0;) {
        const auto& ed = rm.edges[static_cast<std::size_t>(prev[v])];
        v = ed.u == v ? ed.v : ed.u;
        chain.push_back(v);
    }
    std::reverse(chain.begin(), chain.end());
    out.points.clear();
    out.points.push_back(foot(chain.front(), r));
    for (auto v : chain) out.points.push_back(rm.nodes[v]);
    out.points.push_back(foot(chain.back(), R));
    return true;
}

void shorten(Polyline& path, const Shell& shell, const PathConstraint& c, Rng& rng, int sweeps) {
    const double r = shell.inner(), R = shell.outer();
    std::normal_distribution<double> g(0.0, 1.0);
    const double max_seg = shell.thickness() / 6.0;
    double prev_len = path.length();
    int stall = 0;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        auto& pts = path.points;
        // Drop leading/trailing vertices that already sit beyond the spheres.
        while (pts.size() > 2 && pts[1].norm() <= r) pts.erase(pts.begin());
        while (pts.size() > 2 && pts[pts.size() - 2].norm() >= R) pts.pop_back();
        // Endpoints: the nearest point of the inner ball (outer complement)
        // to the neighbouring vertex is its radial projection.
        if (pts.size() >= 2) {
            const Vec a = r * pts[1] / pts[1].norm();
            if (c.point_ok(a) && c.segment_ok(a, pts[1])) pts.front() = a;
            const Vec& q = pts[pts.size() - 2];
            const Vec b = R * q / q.norm();
            if (c.point_ok(b) && c.segment_ok(q, b)) pts.back() = b;
        }
        // Shortcuts.
        for (std::size_t i = 1; i + 1 < pts.size();) {
            if (c.segment_ok(pts[i - 1], pts[i + 1])) pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
            else ++i;
        }
        // Relaxation toward neighbour midpoints, then a random projected move.
        for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
            const Vec mid = 0.5 * (pts[i - 1] + pts[i + 1]);
            for (double t : {1.0, 0.5, 0.25, 0.1}) {
                Vec cand = pts[i] + t * (mid - pts[i]);
                if (c.point_ok(cand) && c.segment_ok(pts[i - 1], cand) && c.segment_ok(cand, pts[i + 1])) {
                    pts[i] = std::move(cand);
                    break;
                }
            }
            const double scale = 0.1 * std::min((pts[i] - pts[i - 1]).norm(), (pts[i + 1] - pts[i]).norm());
            Vec jitter(pts[i].size());
            for (Eigen::Index d = 0; d < jitter.size(); ++d) jitter[d] = g(rng);
            Vec cand = pts[i] + scale * jitter;
            const double before = (pts[i] - pts[i - 1]).norm() + (pts[i + 1] - pts[i]).norm();
            const double after = (cand - pts[i - 1]).norm() + (pts[i + 1] - cand).norm();
            if (after < before && c.point_ok(cand) && c.segment_ok(pts[i - 1], cand) &&
                c.segment_ok(cand, pts[i + 1]))
                pts[i] = std::move(cand);
        }
        // Subdivide long segments to give the path room to bend.
        if (sweep % 10 == 0) {
            std::vector<Vec> refined{pts.front()};
            for (std::size_t i = 1; i < pts.size(); ++i) {
                const double len = (pts[i] - pts[i - 1]).norm();
                const int parts = std::max(1, static_cast<int>(std::ceil(len / max_seg)));
                for (int k = 1; k < parts; ++k) refined.push_back(pts[i - 1] + (pts[i] - pts[i - 1]) * (double(k) / parts));
                refined.push_back(pts[i]);
            }
            pts = std::move(refined);
        }
        const double len = path.length();
        stall = (prev_len - len < 1e-10 * std::max(1.0, len)) ? stall + 1 : 0;
        prev_len = len;
        if (stall >= 15) break;
    }
}

PathSearchResult one_restart(const Shell& shell, const PathConstraint& c, const PathSearchConfig& cfg,
                             std::size_t index, Eigen::Index dim) {
    PathSearchResult res;
    Rng rng(derive_seed(cfg.seed, "path-restart", index));
    Roadmap rm = build_roadmap(shell, c, cfg, rng, dim);
    Polyline path;
    if (!shortest_crossing(rm, shell, c, path)) return res;
    shorten(path, shell, c, rng, cfg.shortening_sweeps);
    res.feasible = true;
    res.length = path.length();
    res.path = std::move(path);
    return res;
}

}  // namespace

PathSearchResult search_crossing(const Shell& shell, const PathConstraint& constraint,
                                 const PathSearchConfig& cfg) {
    const auto restarts = static_cast<std::size_t>(std::max(1, cfg.restarts));
    const std::size_t threads = std::min<std::size_t>(worker_threads(cfg.threads), restarts);
    const Eigen::Index dim = constraint.ambient_dim();
    PathSearchResult best;
    std::vector<PathSearchResult> batch(threads);
    // Restarts run in batches of `threads`; the early exit is checked only
    // between batches so the outcome does not depend on scheduling.
    for (std::size_t start = 0; start < restarts; start += threads) {
        const std::size_t count = std::min(threads, restarts - start);
        if (count == 1) {
            batch[0] = one_restart(shell, constraint, cfg, start, dim);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < count; ++t)
                pool.emplace_back([&, t] { batch[t] = one_restart(shell, constraint, cfg, start + t, dim); });
            for (auto& th : pool) th.join();
        }
        for (std::size_t t = 0; t < count; ++t) {
            best.restart_lengths.push_back(batch[t].length);
            if (batch[t].feasible && batch[t].length < best.length) {
                best.feasible = true;
                best.length = batch[t].length;
                best.path = std::move(batch[t].path);
            }
        }
        if (best.feasible && best.length <= cfg.early_exit_length) break;
    }
    return best;
}

}  // namespace foliate
