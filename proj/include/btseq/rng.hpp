#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace btseq {

// All randomness in a run flows from one root seed through named
// sub-streams ("init", "shuffle", "decode-sample", ...), so any component
// can be re-run in isolation and reproduce its draws exactly.

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t root_seed, std::string_view name) {
        return Rng(splitmix64(root_seed ^ splitmix64(fnv1a64(name))));
    }

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1); bit-derived so the stream is stable across
    // standard library implementations
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int uniform_int(int n) { return static_cast<int>(uniform() * n); }

    // index drawn from unnormalized nonnegative weights by CDF inversion
    int categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform() * static_cast<double>(i));
            if (j >= i) j = i - 1;
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace btseq
