#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "foliate/geometry.hpp"

namespace foliate {

// Uniform hash grid over R^d. visit_near reports every id inserted within
// one cell (per coordinate) of the query, which covers the Euclidean ball of
// radius `cell` around it. Hash collisions only add candidates.
class PointGrid {
public:
    PointGrid(Eigen::Index dim, double cell) : dim_(dim), cell_(cell) {
        if (dim > static_cast<Eigen::Index>(kMaxDim)) throw ConfigError("grid dimension too large");
    }

    double cell() const { return cell_; }

    void insert(const Vec& p, std::uint32_t id) { cells_[key_of(coords(p))].push_back(id); }

    template <class F>
    void visit_near(const Vec& p, F&& f) const {
        const Cell base = coords(p);
        Cell c{};
        std::array<int, kMaxDim> off;
        off.fill(-1);
        const auto n = static_cast<std::size_t>(dim_);
        while (true) {
            for (std::size_t d = 0; d < n; ++d) c[d] = base[d] + off[d];
            if (auto it = cells_.find(key_of(c)); it != cells_.end())
                for (auto id : it->second) f(id);
            std::size_t d = 0;
            while (d < n && off[d] == 1) off[d++] = -1;
            if (d == n) break;
            ++off[d];
        }
    }

private:
    static constexpr std::size_t kMaxDim = 16;
    using Cell = std::array<std::int64_t, kMaxDim>;

    Cell coords(const Vec& p) const {
        Cell c{};
        for (Eigen::Index d = 0; d < dim_; ++d) c[static_cast<std::size_t>(d)] = static_cast<std::int64_t>(std::floor(p[d] / cell_));
        return c;
    }
    std::uint64_t key_of(const Cell& c) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (Eigen::Index d = 0; d < dim_; ++d) {
            h ^= static_cast<std::uint64_t>(c[static_cast<std::size_t>(d)]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdULL;
        }
        return h;
    }

    Eigen::Index dim_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace foliate
