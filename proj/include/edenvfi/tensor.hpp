// dense row-major n-d tensor with instrumented allocation tracking
#ifndef EDENVFI_TENSOR_HPP
#define EDENVFI_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "edenvfi/errors.hpp"
#include "edenvfi/rng.hpp"

namespace edenvfi {

enum class DType { f32, f64 };

inline size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }
inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

// global tensor-allocator accounting; peak_bytes is the benchmark's memory metric
namespace memstat {
int64_t current_bytes();
int64_t peak_bytes();
// peak := current, so a fresh high-water measurement can start mid-process
void reset_peak();
} // namespace memstat

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

class Tensor {
public:
    Tensor() = default;

    static Tensor empty(Shape shape, DType dt);
    static Tensor zeros(Shape shape, DType dt);
    static Tensor full(Shape shape, double value, DType dt);
    static Tensor from(Shape shape, const std::vector<double>& values, DType dt);
    static Tensor scalar(double value, DType dt);
    static Tensor randn(Shape shape, Rng& rng, double stddev, DType dt);

    bool defined() const { return buf_ != nullptr; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const Shape& shape() const { return shape_; }
    int64_t numel() const { return numel_; }
    DType dtype() const { return dtype_; }

    template <class T>
    T* data();
    template <class T>
    const T* data() const;

    // slow dtype-agnostic element access, intended for tests and small tensors
    double at(int64_t i) const;
    void set(int64_t i, double v);

    Tensor clone() const;
    Tensor astype(DType dt) const;
    // shares storage; element count must match
    Tensor reshaped(Shape new_shape) const;
    std::vector<double> to_vector() const;

    void zero_();
    void fill_(double v);
    void add_(const Tensor& other);          // elementwise, same shape+dtype
    void add_scaled_(const Tensor& other, double s);
    void scale_(double s);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    struct Buffer {
        explicit Buffer(size_t n);
        ~Buffer();
        Buffer(const Buffer&) = delete;
        Buffer& operator=(const Buffer&) = delete;
        std::byte* p = nullptr;
        size_t bytes = 0;
    };

    void check_dtype(DType want) const;

    std::shared_ptr<Buffer> buf_;
    Shape shape_;
    int64_t numel_ = 0;
    DType dtype_ = DType::f32;
};

template <class T>
inline T* Tensor::data() {
    check_dtype(sizeof(T) == 4 ? DType::f32 : DType::f64);
    return reinterpret_cast<T*>(buf_->p);
}

template <class T>
inline const T* Tensor::data() const {
    check_dtype(sizeof(T) == 4 ? DType::f32 : DType::f64);
    return reinterpret_cast<const T*>(buf_->p);
}

int64_t numel_of(const Shape& s);

} // namespace edenvfi

#endif
