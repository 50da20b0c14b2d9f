#include "llvit/tensor.hpp"

namespace llvit {

Dtype dtype_from_name(const std::string& name) {
    if (name == "f32") return Dtype::f32;
    if (name == "i8") return Dtype::i8;
    if (name == "i32") return Dtype::i32;
    throw FormatError("unknown dtype: " + name);
}

Tensor Tensor::zeros(std::vector<int64_t> shape, Dtype dt) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = 1;
    for (int64_t e : t.shape_) {
        if (e < 0) throw DimensionError("negative extent in tensor shape");
        t.numel_ *= e;
    }
    t.dtype_ = dt;
    t.data_.assign(static_cast<size_t>(t.numel_) * dtype_size(dt), 0);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t = zeros(std::move(shape), Dtype::f32);
    float* p = t.f32();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = value;
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<float> values) {
    Tensor t = zeros(std::move(shape), Dtype::f32);
    if (static_cast<int64_t>(values.size()) != t.numel()) {
        throw DimensionError("value count does not match shape");
    }
    std::memcpy(t.raw(), values.data(), values.size() * sizeof(float));
    return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": shape mismatch");
    }
}

}  // namespace llvit
