#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace rcmk {

// Deterministic PRNG (splitmix64 core). All randomness in the library flows
// through this class so that fixed seeds give identical streams on every
// platform; std::random distributions are implementation-defined and are
// deliberately not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal();

    // exact Poisson sampler (Knuth product method); fine for the small
    // photon counts used by shot noise
    std::int64_t poisson(double mean);

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used to derive independent per-parameter RNG streams from a build
// seed and a parameter name (keeps non-site parameters bit-identical when a
// block variant is swapped).
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream_name);

// Locale-independent float formatting; CSV outputs must be byte stable.
std::string format_double(double v, int precision = 6);

// Runs chunk_fn(begin, end) over [0, count) split across `workers` threads.
// workers <= 1 runs inline on the calling thread.
void parallel_for(std::int64_t count, int workers,
                  const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);

}  // namespace rcmk
