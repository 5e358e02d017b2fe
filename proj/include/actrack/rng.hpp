#ifndef ACTRACK_RNG_HPP
#define ACTRACK_RNG_HPP

#include <cstdint>
#include <cmath>
#include <Eigen/Dense>

namespace actrack {

/// Deterministic, portable random number generator: xoshiro256++ seeded
/// through splitmix64. Every run that starts from the same seed produces
/// the same stream on every platform, which std::normal_distribution does
/// not guarantee. Substreams are derived by hashing (seed, stream id), so
/// trial-parallel and serial executions consume identical numbers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
    }

    /// Independent substream `id` of the stream rooted at `seed`.
    static Rng substream(std::uint64_t seed, std::uint64_t id) {
        std::uint64_t x = seed;
        std::uint64_t a = splitmix64(x);
        std::uint64_t b = splitmix64(x);
        return Rng(a ^ (id * 0x9e3779b97f4a7c15ULL) ^ splitmix64_of(b + id));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();  // log(0) guard
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    Eigen::VectorXd normal_vector(Eigen::Index d) {
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal();
        return z;
    }

    /// Index i with probability weights(i); weights must be a probability
    /// vector. Walks the CDF in index order, so ties in the cumulative sum
    /// resolve to the lowest index.
    int categorical(const Eigen::VectorXd& weights) {
        const double u = uniform();
        double acc = 0.0;
        const int n = static_cast<int>(weights.size());
        for (int i = 0; i < n; ++i) {
            acc += weights(i);
            if (u < acc) return i;
        }
        return n - 1;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t splitmix64_of(std::uint64_t x) { return splitmix64(x); }

    std::uint64_t state_[4];
};

}  // namespace actrack

#endif  // ACTRACK_RNG_HPP
