#include "rcmk/util.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>
#include <vector>

#include "rcmk/error.hpp"

namespace rcmk {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0,1] so the log is finite.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double two_pi_u2 = 2.0 * 3.14159265358979323846 * u2;
    spare_ = mag * std::sin(two_pi_u2);
    has_spare_ = true;
    return mag * std::cos(two_pi_u2);
}

std::int64_t Rng::poisson(double mean) {
    if (mean < 0.0) throw ValueError("poisson mean must be non-negative");
    if (mean == 0.0) return 0;
    // Knuth's product method: exact and fast enough for the photon counts
    // used here (mean <= ~100). Split large means to keep exp(-mean) > 0.
    std::int64_t total = 0;
    double remaining = mean;
    const double chunk = 500.0;
    while (remaining > chunk) {
        total += poisson(chunk);
        remaining -= chunk;
    }
    double limit = std::exp(-remaining);
    double prod = uniform();
    std::int64_t count = 0;
    while (prod > limit) {
        ++count;
        prod *= uniform();
    }
    total += count;
    return total;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream_name) {
    // splitmix64 finalizer over (seed ^ name hash): cheap, well mixed, and
    // stable across platforms.
    std::uint64_t z = seed ^ fnv1a64(stream_name);
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

void parallel_for(std::int64_t count, int workers,
                  const std::function<void(std::int64_t, std::int64_t)>& chunk_fn) {
    if (count <= 0) return;
    if (workers <= 1 || count == 1) {
        chunk_fn(0, count);
        return;
    }
    const std::int64_t n_threads = std::min<std::int64_t>(workers, count);
    const std::int64_t base = count / n_threads;
    const std::int64_t rem = count % n_threads;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_threads));
    std::int64_t begin = 0;
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (std::int64_t t = 0; t < n_threads; ++t) {
        std::int64_t len = base + (t < rem ? 1 : 0);
        std::int64_t end = begin + len;
        threads.emplace_back([&, begin, end] {
            try {
                chunk_fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rcmk
