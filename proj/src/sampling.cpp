#include "foliate/sampling.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace foliate {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::array<unsigned, 16> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

// Points on the unit sphere S^{dim-1}: Fibonacci lattice for S^2, otherwise
// radially projected Halton ball points.
std::vector<Vec> unit_sphere_points(std::size_t count, Eigen::Index dim, double phase) {
    std::vector<Vec> out;
    out.reserve(count);
    if (dim == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < count; ++i) {
            const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
            const double th = golden * static_cast<double>(i) + phase;
            Vec v(3);
            v << r * std::cos(th), y, r * std::sin(th);
            out.push_back(std::move(v));
        }
        return out;
    }
    auto pts = halton_ball(count, dim, 1.0, 1 + static_cast<std::uint64_t>(phase * 1000.0));
    for (auto& p : pts) {
        const double nrm = p.norm();
        if (nrm < 1e-12) p = Vec::Unit(dim, 0);
        else p /= nrm;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return splitmix64(splitmix64(master ^ h) + index);
}

Vec random_direction(Rng& rng, Eigen::Index dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(dim);
    double nrm = 0.0;
    while (nrm < 1e-12) {
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = g(rng);
        nrm = v.norm();
    }
    return v / nrm;
}

Eigen::MatrixXd complement_basis(const Vec& normal) {
    const Eigen::Index dim = normal.size();
    const Vec nrm = normal.normalized();
    // Householder reflection sending e_k (k = argmax |n_k|) to n; its other
    // columns span n^perp.
    Eigen::Index k = 0;
    nrm.cwiseAbs().maxCoeff(&k);
    Vec v = nrm - Vec::Unit(dim, k);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
    const double vv = v.squaredNorm();
    if (vv > 1e-24) H -= 2.0 * v * v.transpose() / vv;
    Eigen::MatrixXd basis(dim, dim - 1);
    Eigen::Index col = 0;
    for (Eigen::Index c = 0; c < dim; ++c) {
        if (c == k) continue;
        basis.col(col++) = H.col(c);
    }
    return basis;
}

Eigen::MatrixXd random_rotation(Eigen::Index dim, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
}

double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

std::vector<Vec> halton_ball(std::size_t count, Eigen::Index dim, double radius, std::uint64_t skip) {
    if (dim > static_cast<Eigen::Index>(kPrimes.size())) throw ConfigError("halton_ball: dimension too large");
    std::vector<Vec> out;
    out.reserve(count);
    Vec p(dim);
    for (std::uint64_t i = skip + 1; out.size() < count; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) p[d] = 2.0 * radical_inverse(i, kPrimes[d]) - 1.0;
        if (p.squaredNorm() <= 1.0) out.push_back(radius * p);
    }
    return out;
}

std::vector<Vec> ball_samples(std::size_t count, Eigen::Index dim, double radius,
                              double boundary_fraction, std::uint64_t skip) {
    const auto n_boundary = static_cast<std::size_t>(std::round(boundary_fraction * static_cast<double>(count)));
    auto out = halton_ball(count - n_boundary, dim, radius, skip);
    auto shell = halton_ball(n_boundary, dim, 1.0, skip + 7919);
    for (auto& p : shell) {
        const double nrm = p.norm();
        out.push_back(nrm < 1e-12 ? Vec(radius * Vec::Unit(dim, 0)) : Vec(radius * p / nrm));
    }
    return out;
}

std::vector<Vec> sphere_samples(std::size_t count, Eigen::Index dim, double radius, Rng& rng) {
    std::vector<Vec> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(radius * random_direction(rng, dim));
    return out;
}

std::vector<Vec> disc_samples(const TangentBall& t, std::size_t count, double phase) {
    const Eigen::Index dim = static_cast<Eigen::Index>(t.ambient_dim());
    const Eigen::Index disc_dim = dim - 1;
    const Eigen::MatrixXd basis = complement_basis(t.center());
    std::vector<Vec> out;
    out.push_back(t.center());
    if (count <= 1 || t.radius() == 0.0) return out;

    const int rings = std::max(1, static_cast<int>(std::round(std::cbrt(static_cast<double>(count)) * 0.75)));
    double weight_sum = 0.0;
    for (int k = 1; k <= rings; ++k) weight_sum += std::pow(static_cast<double>(k), static_cast<double>(disc_dim - 1));
    for (int k = 1; k <= rings; ++k) {
        const double w = std::pow(static_cast<double>(k), static_cast<double>(disc_dim - 1)) / weight_sum;
        const auto m = std::max<std::size_t>(2, static_cast<std::size_t>(std::round(w * static_cast<double>(count - 1))));
        const double rad = t.radius() * static_cast<double>(k) / rings;
        for (const auto& u : unit_sphere_points(m, disc_dim, phase + 0.37 * k))
            out.push_back(t.center() + rad * (basis * u));
    }
    return out;
}

}  // namespace foliate
