#include "foliate/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace foliate {

CVec to_complex(const Vec& x) {
    const Eigen::Index n = x.size() / 2;
    CVec z(n);
    for (Eigen::Index k = 0; k < n; ++k) z[k] = cplx(x[2 * k], x[2 * k + 1]);
    return z;
}

Vec to_real(const CVec& z) {
    Vec x(2 * z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        x[2 * k] = z[k].real();
        x[2 * k + 1] = z[k].imag();
    }
    return x;
}

Shell::Shell(double inner, double outer) : inner_(inner), outer_(outer) {
    if (!(inner > 0.0) || !(outer > inner)) {
        std::ostringstream os;
        os << "shell requires 0 < r < R, got r=" << inner << " R=" << outer;
        throw ConfigError(os.str());
    }
}

TangentBall::TangentBall(Vec center, double radius)
    : center_(std::move(center)), radius_(radius), center_norm_(center_.norm()) {
    if (center_.size() < 4 || center_.size() % 2 != 0)
        throw ConfigError("tangent ball center must live in R^{2n} with n >= 2");
    if (!(center_norm_ > 0.0)) throw ConfigError("tangent ball center must be nonzero");
    if (!(radius_ >= 0.0)) throw ConfigError("tangent ball radius must be nonnegative");
}

Vec TangentBall::project(const Vec& p) const {
    const Vec nrm = normal();
    const Vec d = p - center_;
    const double u = d.dot(nrm);
    Vec tangential = d - u * nrm;
    const double rho = tangential.norm();
    if (rho > radius_) tangential *= radius_ / rho;
    return center_ + tangential;
}

double dist_to_tangent_ball(const TangentBall& t, const Vec& p) {
    // Works with dot products only so the hot path allocates nothing.
    const Vec& x = t.center();
    const double xn = t.center_norm();
    const double px = p.dot(x);
    const double u = (px - xn * xn) / xn;
    const double d2 = p.squaredNorm() - 2.0 * px + xn * xn;
    const double rho = std::sqrt(std::max(0.0, d2 - u * u));
    const double over = std::max(0.0, rho - t.radius());
    return std::sqrt(u * u + over * over);
}

double outermost_radius(const TangentBall& t) {
    return std::hypot(t.center_norm(), t.radius());
}

double segment_distance(const TangentBall& t, const Vec& a, const Vec& b) {
    const Vec& x = t.center();
    const double xn = t.center_norm();
    const Vec d = b - a;
    // Everything along the segment is a quadratic in s; precompute coefficients.
    const double ax = a.dot(x), dx = d.dot(x);
    const double aa = a.squaredNorm(), ad = a.dot(d), dd = d.squaredNorm();
    auto dist = [&](double s) {
        const double px = ax + s * dx;
        const double u = (px - xn * xn) / xn;
        const double pp = aa + 2.0 * s * ad + s * s * dd;
        const double d2 = pp - 2.0 * px + xn * xn;
        const double rho = std::sqrt(std::max(0.0, d2 - u * u));
        const double over = std::max(0.0, rho - t.radius());
        return std::sqrt(u * u + over * over);
    };
    double lo = 0.0, hi = 1.0;
    constexpr double kPhi = 0.6180339887498949;
    double m1 = hi - kPhi * (hi - lo), m2 = lo + kPhi * (hi - lo);
    double f1 = dist(m1), f2 = dist(m2);
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
        if (f1 < f2) {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - kPhi * (hi - lo);
            f1 = dist(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + kPhi * (hi - lo);
            f2 = dist(m2);
        }
    }
    return std::min({f1, f2, dist(0.0), dist(1.0)});
}

double ball_distance(const TangentBall& s, const TangentBall& t) {
    // Both centers and both normals lie in span{u, v}; moving any offset out
    // of that plane only adds distance, so the closest pair lives there and
    // each ball reduces to a segment through its center.
    const Vec u = s.normal();
    const Vec v = t.normal();
    const Vec d = s.center() - t.center();
    const double cv = u.dot(v);
    const Vec w = v - cv * u;
    const double sv = w.norm();
    if (sv < 1e-12) return d.norm();  // parallel planes: d is along u
    const Vec e2 = w / sv;
    const Eigen::Vector2d dp(d.dot(u), d.dot(e2));
    const Eigen::Vector2d up(0.0, 1.0);   // in-plane direction of s
    const Eigen::Vector2d vp(-sv, cv);    // in-plane direction of t
    // minimise |dp + alpha up - beta vp| over |alpha| <= a, |beta| <= b
    Eigen::Matrix2d m;
    m << up, -vp;
    const Eigen::Vector2d free = m.partialPivLu().solve(-dp);
    if (std::abs(free[0]) <= s.radius() && std::abs(free[1]) <= t.radius()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double sign : {-1.0, 1.0}) {
        const double alpha = sign * s.radius();
        const double beta = std::clamp(vp.dot(dp + alpha * up), -t.radius(), t.radius());
        best = std::min(best, (dp + alpha * up - beta * vp).norm());
        const double beta2 = sign * t.radius();
        const double alpha2 = std::clamp(-up.dot(dp - beta2 * vp), -s.radius(), s.radius());
        best = std::min(best, (dp + alpha2 * up - beta2 * vp).norm());
    }
    return best;
}

TidyViolation::TidyViolation(Rule rule, std::size_t first, std::size_t second,
                             const std::string& what)
    : Error(what), rule_(rule), first_(first), second_(second) {}

TidyCertificate validate_tidy(std::span<const TangentBall> balls, const Shell& shell, double tol) {
    if (balls.empty()) throw TidyViolation(TidyViolation::Rule::Empty, 0, 0, "empty labyrinth");

    for (std::size_t i = 0; i < balls.size(); ++i) {
        const auto& b = balls[i];
        if (!(b.center_norm() > shell.inner()) || !(outermost_radius(b) < shell.outer())) {
            std::ostringstream os;
            os << "ball " << i << " (|x|=" << b.center_norm() << ", a=" << b.radius()
               << ") leaves shell (" << shell.inner() << ", " << shell.outer() << ")";
            throw TidyViolation(TidyViolation::Rule::OutsideShell, i, i, os.str());
        }
    }

    std::vector<std::size_t> order(balls.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return balls[a].center_norm() < balls[b].center_norm();
    });

    // Group into levels; remember one representative (the largest ball) per level.
    TidyCertificate cert;
    std::vector<std::vector<std::size_t>> levels;
    for (std::size_t idx : order) {
        const double nrm = balls[idx].center_norm();
        if (levels.empty() || nrm - cert.radial_levels.back() > tol) {
            levels.push_back({idx});
            cert.radial_levels.push_back(nrm);
            cert.per_level_radius.push_back(balls[idx].radius());
            continue;
        }
        const std::size_t first = levels.back().front();
        if (std::abs(balls[idx].radius() - cert.per_level_radius.back()) > tol) {
            std::ostringstream os;
            os << "balls " << first << " and " << idx << " share |x|=" << nrm
               << " but have radii " << balls[first].radius() << " and " << balls[idx].radius();
            throw TidyViolation(TidyViolation::Rule::UnequalRadiiOnLevel, first, idx, os.str());
        }
        levels.back().push_back(idx);
    }

    for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
        const std::size_t lo = levels[l].front();
        const std::size_t hi = levels[l + 1].front();
        const double outer_lo = std::hypot(cert.radial_levels[l], cert.per_level_radius[l]);
        const bool ok = outer_lo < cert.radial_levels[l + 1];
        cert.nesting_ok.push_back(ok);
        if (!ok) {
            std::ostringstream os;
            os << "ball " << lo << " reaches |y|=" << outer_lo << " which is not inside the sphere |y|="
               << cert.radial_levels[l + 1] << " through the center of ball " << hi;
            throw TidyViolation(TidyViolation::Rule::NotNested, lo, hi, os.str());
        }
    }

    // Components are connected components, so balls on one level must not touch.
    // Sweep along the first coordinate: balls further apart than the two radii
    // there cannot meet.
    for (auto& lvl : levels) {
        std::sort(lvl.begin(), lvl.end(),
                  [&](std::size_t a, std::size_t b) { return balls[a].center()[0] < balls[b].center()[0]; });
        for (std::size_t p = 0; p < lvl.size(); ++p) {
            const auto& s = balls[lvl[p]];
            for (std::size_t q = p + 1; q < lvl.size(); ++q) {
                const auto& t = balls[lvl[q]];
                const double reach = s.radius() + t.radius() + tol;
                if (t.center()[0] - s.center()[0] > reach) break;
                if ((s.center() - t.center()).norm() > reach) continue;
                if (ball_distance(s, t) <= tol) {
                    std::ostringstream os;
                    os << "balls " << lvl[p] << " and " << lvl[q] << " on level |x|="
                       << s.center_norm() << " intersect";
                    throw TidyViolation(TidyViolation::Rule::SameLevelOverlap, lvl[p], lvl[q], os.str());
                }
            }
        }
    }
    return cert;
}

void to_json(json& j, const Shell& s) {
    j = json{{"inner", s.inner()}, {"outer", s.outer()}};
}

Shell shell_from_json(const json& j) {
    return Shell(j.at("inner").get<double>(), j.at("outer").get<double>());
}

void to_json(json& j, const TangentBall& t) {
    j = json{{"center", std::vector<double>(t.center().data(), t.center().data() + t.center().size())},
             {"radius", t.radius()}};
}

TangentBall tangent_ball_from_json(const json& j) {
    const auto c = j.at("center").get<std::vector<double>>();
    return TangentBall(Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size())),
                       j.at("radius").get<double>());
}

}  // namespace foliate
