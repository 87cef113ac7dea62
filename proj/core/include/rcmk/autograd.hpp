#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "rcmk/tensor.hpp"

namespace rcmk {

// Reverse-mode tape. Define-by-run: every forward pass records its backward
// steps onto the thread's active tape; backward() replays them in reverse.
// A tape supports exactly one backward pass; reset() starts a fresh one.
class Tape {
public:
    static Tape& active();  // thread-local instance

    void record(std::function<void()> backward_step);
    void reset();
    void run_backward(const Tensor& root);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return steps_.size(); }

private:
    std::vector<std::function<void()>> steps_;
    bool consumed_ = false;
};

bool grad_enabled();

// Disables recording for its scope (evaluation paths).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Convenience: resets the thread's tape on entry (one scope per forward pass).
struct TapeScope {
    TapeScope() { Tape::active().reset(); }
};

// Backpropagates from a scalar root through the active tape. Gradients
// accumulate additively into every reachable requires_grad tensor.
void backward(const Tensor& root);

// --- helpers used by op implementations ---

bool should_record(std::initializer_list<const Tensor*> inputs);
// out.grad handle, or null when no gradient reached this tensor
Tensor grad_of(const Tensor& t);
void accumulate_grad(const Tensor& target, const Tensor& contribution);

// --- numerical verification ---

struct GradcheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    std::vector<std::int64_t> excluded;  // coordinates skipped as kink points
    std::string worst;                   // context for the worst coordinate
};

// Compares tape gradients of a scalar-valued f against central differences
// (f(x+h)-f(x-h))/2h, coordinate by coordinate. x must be Float64 and f
// deterministic (two forward evaluations must agree bitwise). Coordinates
// where one-sided derivatives disagree (kinks of relu/abs/soft-threshold)
// are excluded and reported rather than failed.
GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                          double step = 1e-5, double tol = 1e-4);

}  // namespace rcmk
