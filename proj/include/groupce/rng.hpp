#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace groupce {

// mt19937_64 with hand-rolled draws. The engine sequence is pinned by the
// standard; std::* distributions are not, and seeded runs must reproduce
// bit-identically, so bounded ints / reals / normals are derived here.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, n), unbiased via rejection
    uint64_t uniform_index(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // uniform in [0, 1) with 53 random bits
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Marsaglia polar method with cached spare
    double normal(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double k = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * k;
        have_spare_ = true;
        return mean + stddev * u * k;
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Cheap seed mixing so derived streams (per step, per epoch) do not collide.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace groupce
