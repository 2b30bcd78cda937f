#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "foliate/geometry.hpp"

namespace foliate {

using CMat = Eigen::MatrixXcd;

// Multivariate complex polynomial in n variables, stored as a sparse term
// list in scaled coordinates: p(z) = sum_alpha c_alpha (z / scale)^alpha.
// The scale keeps coefficients of high-degree fits in a sane range.
class MultiPoly {
public:
    explicit MultiPoly(int n = 2, double scale = 1.0);

    // Adds c to the coefficient of (z/scale)^alpha.
    void add_term(std::span<const int> alpha, cplx c);

    int dimension() const { return n_; }
    double scale() const { return scale_; }
    int degree() const;
    std::size_t term_count() const { return coeffs_.size(); }
    std::span<const int> exponent(std::size_t i) const {
        return {exps_.data() + i * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
    }
    cplx coeff(std::size_t i) const { return coeffs_[i]; }
    bool is_zero() const;

    cplx eval(const CVec& z) const;
    // Returns p(z) and writes the holomorphic gradient (d/dz_k) into grad.
    cplx eval_grad(const CVec& z, CVec& grad) const;

    // All exponents with |alpha| <= degree in graded order.
    static std::vector<std::vector<int>> graded_exponents(int n, int degree);
    static MultiPoly coordinate(int n, int k);  // z_k
    static MultiPoly constant(int n, cplx c);

    friend void to_json(json& j, const MultiPoly& p);
    static MultiPoly from_json(const json& j, int n);

private:
    int n_;
    double scale_;
    int max_exp_ = 0;
    std::vector<int> exps_;
    std::vector<cplx> coeffs_;
};

// Defining map h = (h_1..h_q) for V = h^{-1}(0).
struct Divisor {
    std::vector<MultiPoly> h;
    bool smooth = true;

    int q() const { return static_cast<int>(h.size()); }
    int n() const { return h.empty() ? 0 : h.front().dimension(); }
    CVec eval(const CVec& z) const;
    CMat jacobian(const CVec& z) const;
};

// f_i = h_i + h_i^s * W_i. With s >= 1 the ansatz vanishes on V and agrees
// with h to order s there by construction. s = 0 drops the interpolation
// (f = h + W) and is used when V is empty.
class CandidateMap {
public:
    CandidateMap(Divisor divisor, int s);
    CandidateMap(Divisor divisor, int s, std::vector<MultiPoly> w);

    const Divisor& divisor() const { return divisor_; }
    int order() const { return s_; }
    int n() const { return divisor_.n(); }
    int q() const { return divisor_.q(); }
    const std::vector<MultiPoly>& correction() const { return w_; }

    CVec eval(const Vec& x) const;
    CVec eval(const CVec& z) const;
    CMat jacobian(const Vec& x) const;
    CMat jacobian(const CVec& z) const;
    // Value and Jacobian in one pass.
    CVec eval_jacobian(const CVec& z, CMat& jac) const;
    // The factor 1 + h^{s-1} W whose zeros are the zeros of f off V (s >= 1).
    CVec extra_factor(const CVec& z) const;
    // Component i of extra_factor with its holomorphic gradient.
    cplx extra_factor_grad(int i, const CVec& z, CVec& grad) const;

private:
    Divisor divisor_;
    int s_;
    std::vector<MultiPoly> w_;
};

// Real 2q x 2n Jacobian of (Re f, Im f) in the x coordinates, from the
// holomorphic q x n Jacobian.
Eigen::MatrixXd real_jacobian(const CMat& jac);

// Newton iteration with minimum-norm steps toward h = 0. Starting close to
// V it lands near the orthogonal projection. nullopt if it fails to converge.
std::optional<CVec> project_to_divisor(const Divisor& v, const CVec& z, double tol = 1e-13, int max_iter = 60);

// Points of V inside the closed ball of `radius`: low-discrepancy starts in a
// slightly larger ball projected onto V.
std::vector<Vec> divisor_samples(const Divisor& v, std::size_t count, double radius, std::uint64_t skip = 0);

// Smallest singular value of the q x n complex Jacobian.
double rank_margin(const CMat& jac);

// min over samples of rank_margin(jacobian(F, z)); > 0 means submersive on
// the samples.
double min_rank_margin(const CandidateMap& f, std::span<const Vec> samples);

// eps_j = min(eps_prev/2 (1 - 1e-6), sigma_min (r_cur - R_prev) / (2 safety)).
// A map within 2 eps_j of F on r_cur B then has derivative perturbation
// below sigma_min / safety on R_prev B (Cauchy estimate along complex lines).
double cauchy_epsilon_from_margin(double sigma_min, double r_prev_outer, double r_cur, double eps_prev,
                                  double safety);
double cauchy_epsilon(const CandidateMap& f_prev, double r_prev_outer, double r_cur, double eps_prev,
                      double safety, std::size_t samples = 4096);

struct EpsilonBudget {
    std::vector<double> values;  // eps_0, eps_1, ...

    // 0 < eps_j < eps_{j-1} / 2 for j >= 1.
    std::vector<bool> halving_flags() const;
    bool halving_ok() const;
};

void to_json(json& j, const Divisor& d);
Divisor divisor_from_json(const json& j);
void to_json(json& j, const CandidateMap& f);
CandidateMap candidate_from_json(const json& j);

}  // namespace foliate
