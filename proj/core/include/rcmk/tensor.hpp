#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rcmk/error.hpp"

namespace rcmk {

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1 };

std::size_t dtype_size(DType dt);
std::string_view dtype_name(DType dt);

// Dimension sizes, outermost first. Activations use (N, C, H, W).
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    DType dtype = DType::Float32;
    std::vector<float> f32;
    std::vector<double> f64;
    bool requires_grad = false;
    std::shared_ptr<Node> grad;  // allocated lazily, same shape/dtype
};

}  // namespace detail

// Dense row-major tensor. Tensor is a shared handle: copying a Tensor aliases
// the same storage, clone() copies it. Values are immutable once the tensor
// has been consumed by the tape; gradient accumulation and explicit parameter
// updates (optimizer steps, running statistics) go through raw_data().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, DType dtype = DType::Float32, bool requires_grad = false);
    static Tensor ones(Shape shape, DType dtype = DType::Float32);
    static Tensor full(Shape shape, double value, DType dtype = DType::Float32);
    static Tensor scalar(double value, DType dtype = DType::Float64);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t dim(std::size_t i) const;
    std::size_t ndim() const;
    std::int64_t numel() const;
    DType dtype() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool value);
    // Accumulated gradient; undefined tensor when none has been computed.
    Tensor grad() const;
    void zero_grad();

    template <typename T>
    std::span<const T> data() const;
    // In-place value access. Callers own the semantics: used for parameter
    // updates and buffer writes between tapes, never on traced intermediates.
    template <typename T>
    std::span<T> raw_data();

    double item() const;                          // numel() == 1
    double value_at(std::int64_t linear_index) const;
    void set_value_at(std::int64_t linear_index, double v);

    Tensor clone() const;   // deep copy of values; no autograd edge
    Tensor detach() const;  // value copy with grad tracking dropped
    Tensor astype(DType dtype) const;

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    static Tensor wrap(std::shared_ptr<detail::Node> node);

private:
    std::shared_ptr<detail::Node> node_;
};

// True when both are defined, same shape/dtype, and every value is bitwise equal.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace rcmk
