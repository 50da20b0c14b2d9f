#include "llvit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "llvit/errors.hpp"
#include "llvit/rng.hpp"

namespace fs = std::filesystem;

namespace llvit {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(len));
    in.read(reinterpret_cast<char*>(buf.data()), len);
    if (!in) throw IoError("short read on " + path);
    return buf;
}

uint32_t be32(const uint8_t* p) {
    return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

void load_idx_pair(const std::string& image_path, const std::string& label_path, Dataset& out) {
    std::vector<uint8_t> img = read_file(image_path);
    if (img.size() < 16) throw IoError("truncated IDX image file: " + image_path);
    if (be32(img.data()) != kIdxImagesMagic) {
        throw FormatError("bad IDX image magic in " + image_path);
    }
    const uint32_t count = be32(img.data() + 4);
    const uint32_t rows = be32(img.data() + 8);
    const uint32_t cols = be32(img.data() + 12);
    const size_t expect = 16 + size_t{count} * rows * cols;
    if (img.size() < expect) throw IoError("truncated IDX image file: " + image_path);

    std::vector<uint8_t> lab = read_file(label_path);
    if (lab.size() < 8) throw IoError("truncated IDX label file: " + label_path);
    if (be32(lab.data()) != kIdxLabelsMagic) {
        throw FormatError("bad IDX label magic in " + label_path);
    }
    const uint32_t lcount = be32(lab.data() + 4);
    if (lcount != count) throw FormatError("IDX image/label count mismatch in " + image_path);
    if (lab.size() < 8 + size_t{lcount}) throw IoError("truncated IDX label file: " + label_path);

    out.height = static_cast<int>(rows);
    out.width = static_cast<int>(cols);
    out.channels = 1;
    out.num_classes = 10;
    out.pixels.assign(img.begin() + 16, img.begin() + static_cast<std::ptrdiff_t>(expect));
    out.labels.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint8_t y = lab[8 + i];
        if (y > 9) throw FormatError("IDX label out of range in " + label_path);
        out.labels[i] = y;
    }
}

// per-channel mean/std of the train split, copied onto both splits
void finalize_stats(DatasetPair& pair) {
    const int c = pair.train.channels;
    const int64_t per = pair.train.sample_bytes() / c;
    std::vector<double> sum(static_cast<size_t>(c), 0.0), sumsq(static_cast<size_t>(c), 0.0);
    const int64_t s = pair.train.size();
    for (int64_t i = 0; i < s; ++i) {
        const uint8_t* px = pair.train.sample(i);
        for (int64_t k = 0; k < per; ++k) {
            for (int ch = 0; ch < c; ++ch) {
                const double v = px[k * c + ch] / 255.0;
                sum[static_cast<size_t>(ch)] += v;
                sumsq[static_cast<size_t>(ch)] += v * v;
            }
        }
    }
    pair.train.mean.resize(static_cast<size_t>(c));
    pair.train.stddev.resize(static_cast<size_t>(c));
    const double n = static_cast<double>(s) * static_cast<double>(per);
    for (int ch = 0; ch < c; ++ch) {
        const double m = sum[static_cast<size_t>(ch)] / n;
        const double var = sumsq[static_cast<size_t>(ch)] / n - m * m;
        pair.train.mean[static_cast<size_t>(ch)] = static_cast<float>(m);
        pair.train.stddev[static_cast<size_t>(ch)] =
            static_cast<float>(std::sqrt(std::max(var, 1e-8)));
    }
    pair.test.mean = pair.train.mean;
    pair.test.stddev = pair.train.stddev;
}

}  // namespace

DatasetPair load_mnist(const std::string& dir) {
    DatasetPair pair;
    pair.train.name = "mnist/train";
    pair.test.name = "mnist/test";
    load_idx_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", pair.train);
    load_idx_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", pair.test);
    finalize_stats(pair);
    return pair;
}

namespace {

void load_cifar_batches(const std::vector<std::string>& paths, Dataset& out) {
    constexpr int64_t kRecord = 3073;  // 1 label + 3*1024 planar pixels
    constexpr int64_t kPerBatch = 10000;
    out.height = 32;
    out.width = 32;
    out.channels = 3;
    out.num_classes = 10;
    for (const std::string& path : paths) {
        std::vector<uint8_t> raw = read_file(path);
        if (raw.size() != static_cast<size_t>(kRecord * kPerBatch)) {
            throw FormatError("unexpected CIFAR batch size in " + path);
        }
        for (int64_t r = 0; r < kPerBatch; ++r) {
            const uint8_t* rec = raw.data() + r * kRecord;
            if (rec[0] > 9) throw FormatError("CIFAR label out of range in " + path);
            out.labels.push_back(rec[0]);
            const uint8_t* plane = rec + 1;
            const size_t base = out.pixels.size();
            out.pixels.resize(base + 32 * 32 * 3);
            uint8_t* dst = out.pixels.data() + base;
            for (int64_t p = 0; p < 1024; ++p) {
                dst[p * 3 + 0] = plane[p];
                dst[p * 3 + 1] = plane[1024 + p];
                dst[p * 3 + 2] = plane[2048 + p];
            }
        }
    }
}

}  // namespace

DatasetPair load_cifar10(const std::string& dir) {
    DatasetPair pair;
    pair.train.name = "cifar10/train";
    pair.test.name = "cifar10/test";
    std::vector<std::string> train_paths;
    for (int b = 1; b <= 5; ++b) {
        train_paths.push_back(dir + "/data_batch_" + std::to_string(b) + ".bin");
    }
    load_cifar_batches(train_paths, pair.train);
    load_cifar_batches({dir + "/test_batch.bin"}, pair.test);
    finalize_stats(pair);
    return pair;
}

void validate_flowers102_layout(const std::string& dir) {
    for (const char* f : {"jpg", "imagelabels.mat", "setid.mat"}) {
        if (!fs::exists(fs::path(dir) / f)) {
            throw FormatError(std::string("flowers102 layout: missing ") + f + " under " + dir);
        }
    }
}

void validate_tiny_imagenet_layout(const std::string& dir) {
    for (const char* f : {"train", "val", "wnids.txt"}) {
        if (!fs::exists(fs::path(dir) / f)) {
            throw FormatError(std::string("tiny-imagenet layout: missing ") + f + " under " + dir);
        }
    }
}

Batcher::Batcher(const Dataset& ds, int64_t batch_size, uint64_t seed, int64_t epoch, bool augment)
    : ds_(ds), batch_size_(batch_size), augment_(augment),
      stream_seed_(Rng::derive(seed, 0x6261746368ULL + static_cast<uint64_t>(epoch))) {
    if (batch_size < 1) throw ConfigError("batcher: batch size must be >= 1");
    order_.resize(static_cast<size_t>(ds.size()));
    for (int64_t i = 0; i < ds.size(); ++i) order_[static_cast<size_t>(i)] = i;
    Rng rng(stream_seed_);
    rng.shuffle(order_);
}

int64_t Batcher::num_batches() const {
    return (ds_.size() + batch_size_ - 1) / batch_size_;
}

void Batcher::reset() { cursor_ = 0; }

bool Batcher::next(Tensor& images, std::vector<int32_t>& labels) {
    if (cursor_ >= ds_.size()) return false;
    const int64_t count = std::min(batch_size_, ds_.size() - cursor_);
    const int h = ds_.height, w = ds_.width, c = ds_.channels;
    images = Tensor::zeros({count, h, w, c}, Dtype::f32);
    labels.resize(static_cast<size_t>(count));
    float* out = images.f32();

    // augmentation draws continue the shuffle stream, offset by the cursor so
    // each batch position has its own deterministic draw sequence
    constexpr int kPad = 4;
    for (int64_t i = 0; i < count; ++i) {
        const int64_t idx = order_[static_cast<size_t>(cursor_ + i)];
        labels[static_cast<size_t>(i)] = ds_.labels[static_cast<size_t>(idx)];
        const uint8_t* src = ds_.sample(idx);
        int dy = 0, dx = 0;
        bool flip = false;
        if (augment_) {
            Rng r(Rng::derive(stream_seed_, 0x617567ULL + static_cast<uint64_t>(cursor_ + i)));
            dy = static_cast<int>(r.index(2 * kPad + 1)) - kPad;
            dx = static_cast<int>(r.index(2 * kPad + 1)) - kPad;
            flip = r.index(2) == 1;
        }
        float* dst = out + i * h * w * c;
        for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            for (int x = 0; x < w; ++x) {
                int sx = flip ? (w - 1 - x) : x;
                sx += dx;
                for (int ch = 0; ch < c; ++ch) {
                    float v = 0.0f;
                    if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                        v = src[(sy * w + sx) * c + ch] / 255.0f;
                    }
                    dst[(y * w + x) * c + ch] =
                        (v - ds_.mean[static_cast<size_t>(ch)]) / ds_.stddev[static_cast<size_t>(ch)];
                }
            }
        }
    }
    cursor_ += count;
    return true;
}

Tensor normalized_batch(const Dataset& ds, int64_t start, int64_t count) {
    const int h = ds.height, w = ds.width, c = ds.channels;
    Tensor images = Tensor::zeros({count, h, w, c}, Dtype::f32);
    float* out = images.f32();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < count; ++i) {
        const uint8_t* src = ds.sample(start + i);
        float* dst = out + i * h * w * c;
        for (int64_t k = 0; k < static_cast<int64_t>(h) * w; ++k) {
            for (int ch = 0; ch < c; ++ch) {
                dst[k * c + ch] = (src[k * c + ch] / 255.0f - ds.mean[static_cast<size_t>(ch)]) /
                                  ds.stddev[static_cast<size_t>(ch)];
            }
        }
    }
    return images;
}

std::string resolve_data_root(const std::string& explicit_root) {
    if (!explicit_root.empty()) return explicit_root;
    if (const char* env = std::getenv("LLVIT_DATA_ROOT")) {
        if (*env) return env;
    }
    return "data";
}

DatasetPair load_dataset(const std::string& name, const std::string& root) {
    if (name == "mnist") return load_mnist(root + "/mnist");
    if (name == "cifar10") return load_cifar10(root + "/cifar10");
    if (name == "synth-digits") {
        const std::string dir = root + "/synth-digits";
        if (!fs::exists(fs::path(dir) / "train-images-idx3-ubyte")) {
            generate_synth_digits(dir, 8192, 2048, 1234);
        }
        DatasetPair pair = load_mnist(dir);
        pair.train.name = "synth-digits/train";
        pair.test.name = "synth-digits/test";
        return pair;
    }
    throw ConfigError("unknown dataset: " + name);
}

}  // namespace llvit
