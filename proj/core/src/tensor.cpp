#include "rcmk/tensor.hpp"

#include <cstring>
#include <sstream>

namespace rcmk {

std::size_t dtype_size(DType dt) { return dt == DType::Float32 ? 4 : 8; }

std::string_view dtype_name(DType dt) {
    return dt == DType::Float32 ? "float32" : "float64";
}

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, DType dtype) {
    auto node = std::make_shared<detail::Node>();
    node->dtype = dtype;
    std::int64_t n = shape_numel(shape);
    node->shape = std::move(shape);
    if (dtype == DType::Float32)
        node->f32.assign(static_cast<std::size_t>(n), 0.0f);
    else
        node->f64.assign(static_cast<std::size_t>(n), 0.0);
    return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, DType dtype, bool requires_grad) {
    Tensor t = wrap(make_node(std::move(shape), dtype));
    t.node()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::ones(Shape shape, DType dtype) { return full(std::move(shape), 1.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
    Tensor t = wrap(make_node(std::move(shape), dtype));
    if (dtype == DType::Float32) {
        float v = static_cast<float>(value);
        for (auto& x : t.node()->f32) x = v;
    } else {
        for (auto& x : t.node()->f64) x = value;
    }
    return t;
}

Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(values.size()))
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->dtype = DType::Float32;
    node->f32 = std::move(values);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(values.size()))
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->dtype = DType::Float64;
    node->f64 = std::move(values);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ValueError("shape() on undefined tensor");
    return node_->shape;
}

std::int64_t Tensor::dim(std::size_t i) const {
    const Shape& s = shape();
    if (i >= s.size()) throw ShapeError("dim index out of range");
    return s[i];
}

std::size_t Tensor::ndim() const { return shape().size(); }

std::int64_t Tensor::numel() const {
    if (!node_) return 0;
    return node_->dtype == DType::Float32 ? static_cast<std::int64_t>(node_->f32.size())
                                          : static_cast<std::int64_t>(node_->f64.size());
}

DType Tensor::dtype() const {
    if (!node_) throw ValueError("dtype() on undefined tensor");
    return node_->dtype;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
    if (!node_) throw ValueError("set_requires_grad on undefined tensor");
    node_->requires_grad = value;
    return *this;
}

Tensor Tensor::grad() const {
    if (!node_ || !node_->grad) return {};
    return wrap(node_->grad);
}

void Tensor::zero_grad() {
    if (node_) node_->grad.reset();
}

template <>
std::span<const float> Tensor::data<float>() const {
    if (!node_) throw ValueError("data() on undefined tensor");
    if (node_->dtype != DType::Float32)
        throw DtypeError("data<float> on a float64 tensor");
    return {node_->f32.data(), node_->f32.size()};
}

template <>
std::span<const double> Tensor::data<double>() const {
    if (!node_) throw ValueError("data() on undefined tensor");
    if (node_->dtype != DType::Float64)
        throw DtypeError("data<double> on a float32 tensor");
    return {node_->f64.data(), node_->f64.size()};
}

template <>
std::span<float> Tensor::raw_data<float>() {
    if (!node_) throw ValueError("raw_data() on undefined tensor");
    if (node_->dtype != DType::Float32)
        throw DtypeError("raw_data<float> on a float64 tensor");
    return {node_->f32.data(), node_->f32.size()};
}

template <>
std::span<double> Tensor::raw_data<double>() {
    if (!node_) throw ValueError("raw_data() on undefined tensor");
    if (node_->dtype != DType::Float64)
        throw DtypeError("raw_data<double> on a float32 tensor");
    return {node_->f64.data(), node_->f64.size()};
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() needs exactly one element");
    return value_at(0);
}

double Tensor::value_at(std::int64_t linear_index) const {
    if (!node_) throw ValueError("value_at on undefined tensor");
    if (linear_index < 0 || linear_index >= numel())
        throw ShapeError("value_at index out of range");
    return node_->dtype == DType::Float32
               ? static_cast<double>(node_->f32[static_cast<std::size_t>(linear_index)])
               : node_->f64[static_cast<std::size_t>(linear_index)];
}

void Tensor::set_value_at(std::int64_t linear_index, double v) {
    if (!node_) throw ValueError("set_value_at on undefined tensor");
    if (linear_index < 0 || linear_index >= numel())
        throw ShapeError("set_value_at index out of range");
    if (node_->dtype == DType::Float32)
        node_->f32[static_cast<std::size_t>(linear_index)] = static_cast<float>(v);
    else
        node_->f64[static_cast<std::size_t>(linear_index)] = v;
}

Tensor Tensor::clone() const {
    if (!node_) return {};
    auto copy = std::make_shared<detail::Node>();
    copy->shape = node_->shape;
    copy->dtype = node_->dtype;
    copy->f32 = node_->f32;
    copy->f64 = node_->f64;
    copy->requires_grad = node_->requires_grad;
    return wrap(std::move(copy));
}

Tensor Tensor::detach() const {
    Tensor t = clone();
    if (t.node()) t.node()->requires_grad = false;
    return t;
}

Tensor Tensor::astype(DType dtype) const {
    if (!node_) throw ValueError("astype on undefined tensor");
    if (dtype == node_->dtype) return clone();
    Tensor out = zeros(node_->shape, dtype);
    std::int64_t n = numel();
    if (dtype == DType::Float32) {
        auto dst = out.raw_data<float>();
        for (std::int64_t i = 0; i < n; ++i)
            dst[static_cast<std::size_t>(i)] =
                static_cast<float>(node_->f64[static_cast<std::size_t>(i)]);
    } else {
        auto dst = out.raw_data<double>();
        for (std::int64_t i = 0; i < n; ++i)
            dst[static_cast<std::size_t>(i)] =
                static_cast<double>(node_->f32[static_cast<std::size_t>(i)]);
    }
    return out;
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.defined() || !b.defined()) return false;
    if (a.dtype() != b.dtype() || a.shape() != b.shape()) return false;
    if (a.dtype() == DType::Float32) {
        auto da = a.data<float>();
        auto db = b.data<float>();
        return std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) == 0;
    }
    auto da = a.data<double>();
    auto db = b.data<double>();
    return std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) == 0;
}

}  // namespace rcmk
