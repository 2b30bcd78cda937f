#include "foliate/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "foliate/sampling.hpp"

namespace foliate {

namespace {

// Scratch power table reused across calls on one thread.
std::vector<cplx>& power_table(const CVec& z, double scale, int max_exp) {
    thread_local std::vector<cplx> pw;
    const auto n = static_cast<std::size_t>(z.size());
    const auto stride = static_cast<std::size_t>(max_exp + 1);
    pw.resize(n * stride);
    for (std::size_t k = 0; k < n; ++k) {
        const cplx zk = z[static_cast<Eigen::Index>(k)] / scale;
        cplx acc = 1.0;
        for (std::size_t e = 0; e < stride; ++e) {
            pw[k * stride + e] = acc;
            acc *= zk;
        }
    }
    return pw;
}

}  // namespace

MultiPoly::MultiPoly(int n, double scale) : n_(n), scale_(scale) {
    if (n < 1) throw ConfigError("polynomial dimension must be positive");
    if (!(scale > 0.0)) throw ConfigError("polynomial scale must be positive");
}

void MultiPoly::add_term(std::span<const int> alpha, cplx c) {
    if (static_cast<int>(alpha.size()) != n_) throw ConfigError("exponent length does not match dimension");
    for (int a : alpha)
        if (a < 0) throw ConfigError("negative exponent");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (std::equal(alpha.begin(), alpha.end(), exps_.begin() + static_cast<std::ptrdiff_t>(i * n_))) {
            coeffs_[i] += c;
            return;
        }
    }
    exps_.insert(exps_.end(), alpha.begin(), alpha.end());
    coeffs_.push_back(c);
    max_exp_ = std::max(max_exp_, *std::max_element(alpha.begin(), alpha.end()));
}

int MultiPoly::degree() const {
    int deg = 0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (coeffs_[i] == cplx(0.0)) continue;
        int d = 0;
        for (int a : exponent(i)) d += a;
        deg = std::max(deg, d);
    }
    return deg;
}

bool MultiPoly::is_zero() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](cplx c) { return c == cplx(0.0); });
}

cplx MultiPoly::eval(const CVec& z) const {
    if (coeffs_.empty()) return 0.0;
    const auto& pw = power_table(z, scale_, max_exp_);
    const auto stride = static_cast<std::size_t>(max_exp_ + 1);
    cplx sum = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        cplx term = coeffs_[i];
        const int* e = exps_.data() + i * static_cast<std::size_t>(n_);
        for (int k = 0; k < n_; ++k) term *= pw[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(e[k])];
        sum += term;
    }
    return sum;
}

cplx MultiPoly::eval_grad(const CVec& z, CVec& grad) const {
    grad.setZero(n_);
    if (coeffs_.empty()) return 0.0;
    const auto& pw = power_table(z, scale_, max_exp_);
    const auto stride = static_cast<std::size_t>(max_exp_ + 1);
    cplx sum = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const int* e = exps_.data() + i * static_cast<std::size_t>(n_);
        cplx term = coeffs_[i];
        for (int k = 0; k < n_; ++k) term *= pw[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(e[k])];
        sum += term;
        for (int k = 0; k < n_; ++k) {
            if (e[k] == 0) continue;
            cplx d = coeffs_[i] * (static_cast<double>(e[k]) / scale_);
            for (int l = 0; l < n_; ++l) {
                const int p = (l == k) ? e[l] - 1 : e[l];
                d *= pw[static_cast<std::size_t>(l) * stride + static_cast<std::size_t>(p)];
            }
            grad[k] += d;
        }
    }
    return sum;
}

std::vector<std::vector<int>> MultiPoly::graded_exponents(int n, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> alpha(static_cast<std::size_t>(n), 0);
    // Enumerate compositions of each total degree t into n parts.
    std::function<void(int, int)> rec = [&](int k, int left) {
        if (k == n - 1) {
            alpha[static_cast<std::size_t>(k)] = left;
            out.push_back(alpha);
            return;
        }
        for (int a = left; a >= 0; --a) {
            alpha[static_cast<std::size_t>(k)] = a;
            rec(k + 1, left - a);
        }
    };
    for (int t = 0; t <= degree; ++t) rec(0, t);
    return out;
}

MultiPoly MultiPoly::coordinate(int n, int k) {
    MultiPoly p(n);
    std::vector<int> alpha(static_cast<std::size_t>(n), 0);
    alpha[static_cast<std::size_t>(k)] = 1;
    p.add_term(alpha, 1.0);
    return p;
}

MultiPoly MultiPoly::constant(int n, cplx c) {
    MultiPoly p(n);
    p.add_term(std::vector<int>(static_cast<std::size_t>(n), 0), c);
    return p;
}

void to_json(json& j, const MultiPoly& p) {
    json terms = json::array();
    for (std::size_t i = 0; i < p.term_count(); ++i) {
        const auto e = p.exponent(i);
        terms.push_back({{"alpha", std::vector<int>(e.begin(), e.end())},
                         {"re", p.coeff(i).real()},
                         {"im", p.coeff(i).imag()}});
    }
    j = json{{"scale", p.scale()}, {"terms", std::move(terms)}};
}

MultiPoly MultiPoly::from_json(const json& j, int n) {
    MultiPoly p(n, j.value("scale", 1.0));
    for (const auto& t : j.at("terms")) {
        const auto alpha = t.at("alpha").get<std::vector<int>>();
        p.add_term(alpha, cplx(t.value("re", 0.0), t.value("im", 0.0)));
    }
    return p;
}

CVec Divisor::eval(const CVec& z) const {
    CVec v(q());
    for (int i = 0; i < q(); ++i) v[i] = h[static_cast<std::size_t>(i)].eval(z);
    return v;
}

CMat Divisor::jacobian(const CVec& z) const {
    CMat jac(q(), n());
    CVec g;
    for (int i = 0; i < q(); ++i) {
        h[static_cast<std::size_t>(i)].eval_grad(z, g);
        jac.row(i) = g.transpose();
    }
    return jac;
}

CandidateMap::CandidateMap(Divisor divisor, int s) : divisor_(std::move(divisor)), s_(s) {
    if (divisor_.h.empty()) throw ConfigError("divisor needs at least one component");
    if (s_ < 0) throw ConfigError("interpolation order must be nonnegative");
    for (int i = 0; i < q(); ++i) w_.emplace_back(n());
}

CandidateMap::CandidateMap(Divisor divisor, int s, std::vector<MultiPoly> w)
    : divisor_(std::move(divisor)), s_(s), w_(std::move(w)) {
    if (divisor_.h.empty()) throw ConfigError("divisor needs at least one component");
    if (static_cast<int>(w_.size()) != q()) throw ConfigError("correction must have q components");
    if (s_ < 0) throw ConfigError("interpolation order must be nonnegative");
}

CVec CandidateMap::eval(const Vec& x) const { return eval(to_complex(x)); }

CVec CandidateMap::eval(const CVec& z) const {
    CVec v(q());
    for (int i = 0; i < q(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        const cplx h = divisor_.h[u].eval(z);
        v[i] = h + std::pow(h, s_) * w_[u].eval(z);
    }
    return v;
}

CMat CandidateMap::jacobian(const Vec& x) const { return jacobian(to_complex(x)); }

CMat CandidateMap::jacobian(const CVec& z) const {
    CMat jac;
    eval_jacobian(z, jac);
    return jac;
}

CVec CandidateMap::eval_jacobian(const CVec& z, CMat& jac) const {
    jac.resize(q(), n());
    CVec v(q());
    CVec gh, gw;
    for (int i = 0; i < q(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        const cplx h = divisor_.h[u].eval_grad(z, gh);
        const cplx w = w_[u].eval_grad(z, gw);
        const cplx hs = std::pow(h, s_);
        // d(h + h^s W) = dh (1 + s h^{s-1} W) + h^s dW
        const cplx lead = (s_ == 0) ? cplx(1.0) : 1.0 + static_cast<double>(s_) * std::pow(h, s_ - 1) * w;
        v[i] = h + hs * w;
        jac.row(i) = (lead * gh + hs * gw).transpose();
    }
    return v;
}

CVec CandidateMap::extra_factor(const CVec& z) const {
    CVec v(q());
    for (int i = 0; i < q(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (s_ == 0) {
            v[i] = divisor_.h[u].eval(z) + w_[u].eval(z);
            continue;
        }
        const cplx h = divisor_.h[u].eval(z);
        v[i] = 1.0 + std::pow(h, s_ - 1) * w_[u].eval(z);
    }
    return v;
}

cplx CandidateMap::extra_factor_grad(int i, const CVec& z, CVec& grad) const {
    const auto u = static_cast<std::size_t>(i);
    CVec gh, gw;
    const cplx h = divisor_.h[u].eval_grad(z, gh);
    const cplx w = w_[u].eval_grad(z, gw);
    if (s_ == 0) {
        grad = gh + gw;
        return h + w;
    }
    const cplx hs1 = std::pow(h, s_ - 1);
    grad = hs1 * gw;
    if (s_ >= 2) grad += (static_cast<double>(s_ - 1) * std::pow(h, s_ - 2) * w) * gh;
    return 1.0 + hs1 * w;
}

Eigen::MatrixXd real_jacobian(const CMat& jac) {
    const Eigen::Index q = jac.rows(), n = jac.cols();
    Eigen::MatrixXd out(2 * q, 2 * n);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const cplx g = jac(i, k);
            // d/dx_{2k} = g, d/dx_{2k+1} = i g
            out(2 * i, 2 * k) = g.real();
            out(2 * i + 1, 2 * k) = g.imag();
            out(2 * i, 2 * k + 1) = -g.imag();
            out(2 * i + 1, 2 * k + 1) = g.real();
        }
    }
    return out;
}

std::optional<CVec> project_to_divisor(const Divisor& v, const CVec& z0, double tol, int max_iter) {
    CVec z = z0;
    for (int it = 0; it < max_iter; ++it) {
        const CVec hz = v.eval(z);
        if (hz.norm() <= tol) return z;
        const CMat j = v.jacobian(z);
        const CMat jjt = j * j.adjoint();
        Eigen::ColPivHouseholderQR<CMat> qr(jjt);
        if (qr.rank() < jjt.rows()) return std::nullopt;
        z -= j.adjoint() * qr.solve(hz);
        if (!z.allFinite()) return std::nullopt;
    }
    if (v.eval(z).norm() <= tol * 100.0) return z;
    return std::nullopt;
}

std::vector<Vec> divisor_samples(const Divisor& v, std::size_t count, double radius, std::uint64_t skip) {
    std::vector<Vec> out;
    const Eigen::Index dim = 2 * v.n();
    std::uint64_t offset = skip;
    for (int round = 0; round < 64 && out.size() < count; ++round) {
        const std::size_t want = std::max<std::size_t>(64, 2 * (count - out.size()));
        for (const auto& p : halton_ball(want, dim, 1.2 * radius, offset)) {
            auto z = project_to_divisor(v, to_complex(p));
            if (!z) continue;
            Vec x = to_real(*z);
            if (x.norm() <= radius) out.push_back(std::move(x));
            if (out.size() == count) break;
        }
        offset += want * 4;
    }
    return out;
}

double rank_margin(const CMat& jac) {
    if (jac.rows() == 1) return jac.row(0).norm();
    Eigen::JacobiSVD<CMat> svd(jac);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

double min_rank_margin(const CandidateMap& f, std::span<const Vec> samples) {
    if (samples.empty()) throw ConfigError("min_rank_margin needs at least one sample");
    double best = std::numeric_limits<double>::infinity();
    CMat jac;
    for (const auto& x : samples) {
        f.eval_jacobian(to_complex(x), jac);
        best = std::min(best, rank_margin(jac));
    }
    return best;
}

double cauchy_epsilon_from_margin(double sigma_min, double r_prev_outer, double r_cur, double eps_prev,
                                  double safety) {
    if (!(sigma_min > 0.0)) throw DegenerateMargin("rank margin is not positive; previous map is not submersive");
    if (!(r_prev_outer < r_cur)) throw ConfigError("cauchy_epsilon requires R_{j-1} < r_j");
    if (!(safety >= 2.0)) throw ConfigError("cauchy_epsilon safety factor must be >= 2");
    return std::min(eps_prev / 2.0 * (1.0 - 1e-6), sigma_min * (r_cur - r_prev_outer) / (2.0 * safety));
}

double cauchy_epsilon(const CandidateMap& f_prev, double r_prev_outer, double r_cur, double eps_prev,
                      double safety, std::size_t samples) {
    const auto pts = ball_samples(samples, 2 * f_prev.n(), r_prev_outer, 0.5, 101);
    return cauchy_epsilon_from_margin(min_rank_margin(f_prev, pts), r_prev_outer, r_cur, eps_prev, safety);
}

std::vector<bool> EpsilonBudget::halving_flags() const {
    std::vector<bool> flags;
    for (std::size_t j = 1; j < values.size(); ++j)
        flags.push_back(values[j] > 0.0 && values[j] < values[j - 1] / 2.0);
    return flags;
}

bool EpsilonBudget::halving_ok() const {
    const auto f = halving_flags();
    return std::all_of(f.begin(), f.end(), [](bool b) { return b; });
}

void to_json(json& j, const Divisor& d) {
    json comps = json::array();
    for (const auto& p : d.h) comps.push_back(p);
    j = json{{"n", d.n()}, {"q", d.q()}, {"smooth", d.smooth}, {"h", std::move(comps)}};
}

Divisor divisor_from_json(const json& j) {
    Divisor d;
    const int n = j.at("n").get<int>();
    for (const auto& c : j.at("h")) d.h.push_back(MultiPoly::from_json(c, n));
    d.smooth = j.value("smooth", true);
    if (d.h.empty()) throw ConfigError("divisor JSON has no components");
    return d;
}

void to_json(json& j, const CandidateMap& f) {
    json w = json::array();
    for (const auto& p : f.correction()) w.push_back(p);
    j = json{{"n", f.n()}, {"q", f.q()}, {"s", f.order()}, {"divisor", f.divisor()}, {"W", std::move(w)}};
}

CandidateMap candidate_from_json(const json& j) {
    Divisor d = divisor_from_json(j.at("divisor"));
    std::vector<MultiPoly> w;
    for (const auto& c : j.at("W")) w.push_back(MultiPoly::from_json(c, d.n()));
    return CandidateMap(std::move(d), j.at("s").get<int>(), std::move(w));
}

}  // namespace foliate
