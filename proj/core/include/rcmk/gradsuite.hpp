#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcmk/autograd.hpp"

namespace rcmk {

struct GradSuiteCase {
    std::string name;
    std::uint64_t seed;
    GradcheckReport report;
};

struct GradSuiteResult {
    std::vector<GradSuiteCase> cases;
    bool all_passed() const;
    double worst_rel_err() const;
};

// Finite-difference verification of every differentiable building block:
// conv2d (with and without bias, strided, padded, grouped, depthwise),
// sample_norm, batch_norm (train mode), soft_threshold, the composed
// normalize-then-shrink stack, and a full block forward per variant. All in
// float64 at small shapes; `seeds` controls how many independent random
// draws each case gets.
GradSuiteResult run_gradcheck_suite(std::span<const std::uint64_t> seeds);

std::string format_gradsuite(const GradSuiteResult& r);

}  // namespace rcmk
