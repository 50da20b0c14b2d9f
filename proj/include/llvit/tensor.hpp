#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "llvit/errors.hpp"

namespace llvit {

enum class Dtype { f32, i8, i32 };

inline size_t dtype_size(Dtype dt) {
    switch (dt) {
        case Dtype::f32: return 4;
        case Dtype::i8: return 1;
        case Dtype::i32: return 4;
    }
    return 0;
}

inline const char* dtype_name(Dtype dt) {
    switch (dt) {
        case Dtype::f32: return "f32";
        case Dtype::i8: return "i8";
        case Dtype::i32: return "i32";
    }
    return "?";
}

Dtype dtype_from_name(const std::string& name);

// Dense row-major n-d array. One flat buffer, uniform dtype, no strided
// views; the only layout is row-major over `shape`.
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, Dtype dt = Dtype::f32);
    static Tensor full(std::vector<int64_t> shape, float value);
    static Tensor from(std::vector<int64_t> shape, std::vector<float> values);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return numel_; }
    Dtype dtype() const { return dtype_; }

    float* f32() { return reinterpret_cast<float*>(data_.data()); }
    const float* f32() const { return reinterpret_cast<const float*>(data_.data()); }
    int8_t* i8() { return reinterpret_cast<int8_t*>(data_.data()); }
    const int8_t* i8() const { return reinterpret_cast<const int8_t*>(data_.data()); }
    int32_t* i32() { return reinterpret_cast<int32_t*>(data_.data()); }
    const int32_t* i32() const { return reinterpret_cast<const int32_t*>(data_.data()); }

    char* raw() { return data_.data(); }
    const char* raw() const { return data_.data(); }
    size_t nbytes() const { return data_.size(); }

    void zero() { std::memset(data_.data(), 0, data_.size()); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

   private:
    std::vector<int64_t> shape_;
    int64_t numel_ = 0;
    Dtype dtype_ = Dtype::f32;
    std::vector<char> data_;
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace llvit
