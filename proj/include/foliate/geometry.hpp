#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foliate/error.hpp"
#include "json.hpp"

namespace foliate {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;
using json = nlohmann::json;

inline constexpr double kGeomTol = 1e-9;

// C^n is identified with R^{2n} through z_k = x_{2k} + i x_{2k+1}.
CVec to_complex(const Vec& x);
Vec to_real(const CVec& z);

// Open spherical shell {r < |z| < R}.
class Shell {
public:
    Shell(double inner, double outer);

    double inner() const { return inner_; }
    double outer() const { return outer_; }
    double thickness() const { return outer_ - inner_; }

private:
    double inner_;
    double outer_;
};

// Closed round ball of dimension 2n-1 lying in the real hyperplane through
// `center` orthogonal to `center`. Only (center, radius) is stored; the
// hyperplane is always derived from the center.
class TangentBall {
public:
    TangentBall(Vec center, double radius);

    const Vec& center() const { return center_; }
    double radius() const { return radius_; }
    double center_norm() const { return center_norm_; }
    double diameter() const { return 2.0 * radius_; }
    Vec normal() const { return center_ / center_norm_; }
    std::size_t ambient_dim() const { return static_cast<std::size_t>(center_.size()); }

    // Nearest point of the ball to p.
    Vec project(const Vec& p) const;

private:
    Vec center_;
    double radius_;
    double center_norm_;
};

// Euclidean distance from p to the (2n-1)-disc T.
double dist_to_tangent_ball(const TangentBall& t, const Vec& p);

// max |y| over y in T; Pythagoras gives sqrt(|x|^2 + a^2).
double outermost_radius(const TangentBall& t);

// min over the closed segment [a, b] of the distance to T. The distance to a
// convex set is convex along a segment, so a bracketing search is exact up to
// the iteration tolerance.
double segment_distance(const TangentBall& t, const Vec& a, const Vec& b);

// Distance between two tangent balls, exact: reduces to a box-constrained
// least-squares problem in the plane of the two normals.
double ball_distance(const TangentBall& s, const TangentBall& t);

struct TidyCertificate {
    std::vector<double> radial_levels;     // sorted distinct center norms
    std::vector<double> per_level_radius;  // one radius per level
    std::vector<bool> nesting_ok;          // level i vs level i+1
};

class TidyViolation : public Error {
public:
    enum class Rule { UnequalRadiiOnLevel, NotNested, OutsideShell, SameLevelOverlap, Empty };

    TidyViolation(Rule rule, std::size_t first, std::size_t second, const std::string& what);

    Rule rule() const { return rule_; }
    std::size_t first() const { return first_; }
    std::size_t second() const { return second_; }

private:
    Rule rule_;
    std::size_t first_;
    std::size_t second_;
};

// Checks the tidy-collection rules: equal center norms share one radius, a
// ball on a lower level lies inside the open ball through every higher center,
// balls of one level are pairwise disjoint, and everything sits strictly
// inside the shell. Center norms closer than `tol` count as one level.
TidyCertificate validate_tidy(std::span<const TangentBall> balls, const Shell& shell,
                              double tol = kGeomTol);

void to_json(json& j, const Shell& s);
Shell shell_from_json(const json& j);
void to_json(json& j, const TangentBall& t);
TangentBall tangent_ball_from_json(const json& j);

}  // namespace foliate
