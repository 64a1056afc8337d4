// tensor storage, allocation accounting, element helpers
#include "edenvfi/tensor.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace edenvfi {

namespace {
std::atomic<int64_t> g_current{0};
std::atomic<int64_t> g_peak{0};

void bump_peak(int64_t cur) {
    int64_t prev = g_peak.load(std::memory_order_relaxed);
    while (cur > prev &&
           !g_peak.compare_exchange_weak(prev, cur, std::memory_order_relaxed)) {
    }
}
} // namespace

namespace memstat {
int64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
int64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed)); }
} // namespace memstat

Tensor::Buffer::Buffer(size_t n) : bytes(n) {
    p = static_cast<std::byte*>(std::aligned_alloc(64, (n + 63) / 64 * 64));
    if (!p) throw std::bad_alloc();
    bump_peak(g_current.fetch_add(static_cast<int64_t>(n)) + static_cast<int64_t>(n));
}

Tensor::Buffer::~Buffer() {
    std::free(p);
    g_current.fetch_sub(static_cast<int64_t>(bytes));
}

int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::empty(Shape shape, DType dt) {
    if (shape.empty()) throw ShapeError("tensor rank must be >= 1");
    for (int d : shape) {
        if (d < 1) throw ShapeError("tensor dims must be >= 1, got " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = numel_of(t.shape_);
    t.dtype_ = dt;
    t.buf_ = std::make_shared<Buffer>(static_cast<size_t>(t.numel_) * dtype_size(dt));
    return t;
}

Tensor Tensor::zeros(Shape shape, DType dt) {
    Tensor t = empty(std::move(shape), dt);
    t.zero_();
    return t;
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
    Tensor t = empty(std::move(shape), dt);
    t.fill_(value);
    return t;
}

Tensor Tensor::from(Shape shape, const std::vector<double>& values, DType dt) {
    Tensor t = empty(std::move(shape), dt);
    if (static_cast<int64_t>(values.size()) != t.numel_)
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(t.shape_));
    if (dt == DType::f32) {
        float* p = t.data<float>();
        for (int64_t i = 0; i < t.numel_; ++i) p[i] = static_cast<float>(values[static_cast<size_t>(i)]);
    } else {
        double* p = t.data<double>();
        for (int64_t i = 0; i < t.numel_; ++i) p[i] = values[static_cast<size_t>(i)];
    }
    return t;
}

Tensor Tensor::scalar(double value, DType dt) { return full({1}, value, dt); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, DType dt) {
    Tensor t = empty(std::move(shape), dt);
    if (dt == DType::f32) {
        float* p = t.data<float>();
        for (int64_t i = 0; i < t.numel_; ++i) p[i] = static_cast<float>(rng.normal() * stddev);
    } else {
        double* p = t.data<double>();
        for (int64_t i = 0; i < t.numel_; ++i) p[i] = rng.normal() * stddev;
    }
    return t;
}

void Tensor::check_dtype(DType want) const {
    if (!defined()) throw ContractError("access to an undefined tensor");
    if (dtype_ != want)
        throw ContractError(std::string("tensor dtype is ") + dtype_name(dtype_) +
                            ", accessed as " + dtype_name(want));
}

double Tensor::at(int64_t i) const {
    return dtype_ == DType::f32 ? static_cast<double>(data<float>()[i]) : data<double>()[i];
}

void Tensor::set(int64_t i, double v) {
    if (dtype_ == DType::f32)
        data<float>()[i] = static_cast<float>(v);
    else
        data<double>()[i] = v;
}

Tensor Tensor::clone() const {
    Tensor t = empty(shape_, dtype_);
    std::memcpy(t.buf_->p, buf_->p, static_cast<size_t>(numel_) * dtype_size(dtype_));
    return t;
}

Tensor Tensor::astype(DType dt) const {
    if (dt == dtype_) return clone();
    Tensor t = empty(shape_, dt);
    if (dt == DType::f32) {
        float* dst = t.data<float>();
        const double* src = data<double>();
        for (int64_t i = 0; i < numel_; ++i) dst[i] = static_cast<float>(src[i]);
    } else {
        double* dst = t.data<double>();
        const float* src = data<float>();
        for (int64_t i = 0; i < numel_; ++i) dst[i] = static_cast<double>(src[i]);
    }
    return t;
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (numel_of(new_shape) != numel_)
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                         " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
}

std::vector<double> Tensor::to_vector() const {
    std::vector<double> v(static_cast<size_t>(numel_));
    for (int64_t i = 0; i < numel_; ++i) v[static_cast<size_t>(i)] = at(i);
    return v;
}

void Tensor::zero_() {
    std::memset(buf_->p, 0, static_cast<size_t>(numel_) * dtype_size(dtype_));
}

void Tensor::fill_(double v) {
    if (dtype_ == DType::f32) {
        float* p = data<float>();
        float f = static_cast<float>(v);
        for (int64_t i = 0; i < numel_; ++i) p[i] = f;
    } else {
        double* p = data<double>();
        for (int64_t i = 0; i < numel_; ++i) p[i] = v;
    }
}

void Tensor::add_(const Tensor& other) { add_scaled_(other, 1.0); }

void Tensor::add_scaled_(const Tensor& other, double s) {
    if (!same_shape(other) || dtype_ != other.dtype_)
        throw ShapeError("in-place add: shape/dtype mismatch " + shape_str(shape_) + " vs " +
                         shape_str(other.shape_));
    if (dtype_ == DType::f32) {
        float* a = data<float>();
        const float* b = other.data<float>();
        float fs = static_cast<float>(s);
        for (int64_t i = 0; i < numel_; ++i) a[i] += fs * b[i];
    } else {
        double* a = data<double>();
        const double* b = other.data<double>();
        for (int64_t i = 0; i < numel_; ++i) a[i] += s * b[i];
    }
}

void Tensor::scale_(double s) {
    if (dtype_ == DType::f32) {
        float* p = data<float>();
        float fs = static_cast<float>(s);
        for (int64_t i = 0; i < numel_; ++i) p[i] *= fs;
    } else {
        double* p = data<double>();
        for (int64_t i = 0; i < numel_; ++i) p[i] *= s;
    }
}

} // namespace edenvfi
