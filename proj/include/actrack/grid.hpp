#ifndef ACTRACK_GRID_HPP
#define ACTRACK_GRID_HPP

#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "actrack/model.hpp"

namespace actrack {

/// Regular rational lattice on the probability simplex: all compositions
/// (a_1..a_n) of the resolution d, divided by d. Point ids follow the
/// generation order (first coordinate descending), and membership tests are
/// exact because the coordinates are rationals with denominator d.
class BeliefGrid {
public:
    BeliefGrid(int n, int resolution) : n_(n), d_(resolution) {
        if (n < 2 || n > 9) throw std::invalid_argument("BeliefGrid: 2 <= n <= 9 supported");
        if (resolution < 1 || resolution > 127)
            throw std::invalid_argument("BeliefGrid: 1 <= resolution <= 127 supported");
        std::vector<int> cur(static_cast<std::size_t>(n), 0);
        enumerate(cur, 0, d_);
        index_.reserve(compositions_.size());
        for (std::size_t i = 0; i < compositions_.size(); ++i)
            index_.emplace(pack(compositions_[i]), static_cast<int>(i));
    }

    int n() const { return n_; }
    int resolution() const { return d_; }
    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<Vector>& points() const { return points_; }
    const Vector& point(int id) const { return points_[static_cast<std::size_t>(id)]; }
    const std::vector<std::vector<int>>& compositions() const { return compositions_; }

    /// Exact lookup; returns -1 if the composition is not a grid member.
    int index_of(const std::vector<int>& comp) const {
        auto it = index_.find(pack(comp));
        return it == index_.end() ? -1 : it->second;
    }

    /// Nearest grid point in Euclidean distance, computed by rounding p*d to
    /// the closest nonnegative composition of d (greedy largest-remainder
    /// repair of the rounding deficit, which is L2-optimal because the
    /// adjustment costs are separable). Deterministic, index-order ties.
    int nearest(const Vector& p) const {
        if (p.size() != n_) throw std::invalid_argument("BeliefGrid::nearest: dimension mismatch");
        std::vector<int> k(static_cast<std::size_t>(n_));
        std::vector<double> q(static_cast<std::size_t>(n_));
        int total = 0;
        for (int i = 0; i < n_; ++i) {
            q[static_cast<std::size_t>(i)] = p(i) * d_;
            double r = std::floor(q[static_cast<std::size_t>(i)] + 0.5);
            if (r < 0.0) r = 0.0;
            k[static_cast<std::size_t>(i)] = static_cast<int>(r);
            total += k[static_cast<std::size_t>(i)];
        }
        while (total < d_) {
            int best = -1;
            double best_err = -1e300;
            for (int i = 0; i < n_; ++i) {
                const double err = q[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(i)];
                if (err > best_err) { best_err = err; best = i; }
            }
            ++k[static_cast<std::size_t>(best)];
            ++total;
        }
        while (total > d_) {
            int best = -1;
            double best_err = 1e300;
            for (int i = 0; i < n_; ++i) {
                if (k[static_cast<std::size_t>(i)] == 0) continue;
                const double err = q[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(i)];
                if (err < best_err) { best_err = err; best = i; }
            }
            --k[static_cast<std::size_t>(best)];
            --total;
        }
        const int id = index_of(k);
        if (id < 0) throw std::logic_error("BeliefGrid::nearest: quantizer left the grid");
        return id;
    }

private:
    void enumerate(std::vector<int>& cur, int pos, int remaining) {
        if (pos == n_ - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            compositions_.push_back(cur);
            Vector p(n_);
            for (int i = 0; i < n_; ++i)
                p(i) = static_cast<double>(cur[static_cast<std::size_t>(i)]) / d_;
            points_.push_back(std::move(p));
            return;
        }
        for (int c = remaining; c >= 0; --c) {
            cur[static_cast<std::size_t>(pos)] = c;
            enumerate(cur, pos + 1, remaining - c);
        }
    }

    std::uint64_t pack(const std::vector<int>& comp) const {
        std::uint64_t key = 0;
        for (int v : comp) key = (key << 7) | static_cast<std::uint64_t>(v & 0x7f);
        return key;
    }

    int n_;
    int d_;
    std::vector<std::vector<int>> compositions_;
    std::vector<Vector> points_;
    std::unordered_map<std::uint64_t, int> index_;
};

}  // namespace actrack

#endif  // ACTRACK_GRID_HPP
