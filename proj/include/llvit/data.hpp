#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvit/tensor.hpp"

namespace llvit {

// Raw pixels plus labels for one split. Pixels stay uint8 until batching;
// normalization stats always come from the train split.
struct Dataset {
    std::string name;
    int height = 0, width = 0, channels = 0;
    std::vector<uint8_t> pixels;  // [S * H * W * C], HWC per sample
    std::vector<int32_t> labels;
    int num_classes = 0;
    std::vector<float> mean, stddev;  // per channel, from the train split

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    int64_t sample_bytes() const { return int64_t{height} * width * channels; }
    const uint8_t* sample(int64_t i) const { return pixels.data() + i * sample_bytes(); }
};

struct DatasetPair {
    Dataset train, test;
};

// IDX-format pair (big-endian magic 0x00000803 images / 0x00000801 labels):
// train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
// t10k-labels-idx1-ubyte under `dir`.
DatasetPair load_mnist(const std::string& dir);

// CIFAR-10 binary batches (1 label byte + 3072 planar RGB bytes per record):
// data_batch_1..5.bin + test_batch.bin under `dir`; decoded to HWC.
DatasetPair load_cifar10(const std::string& dir);

// Layout validation only: checks the expected directory structure exists and
// throws FormatError otherwise. Full decoding of these sets is out of desk
// scope.
void validate_flowers102_layout(const std::string& dir);
void validate_tiny_imagenet_layout(const std::string& dir);

// Deterministic batch sequence over a dataset: the visit order is a pure
// function of (seed, epoch); augmentation (4px-pad random crop + horizontal
// flip) draws from the same stream. Images come out normalized f32
// [B, H, W, C]; the final batch may be short.
class Batcher {
   public:
    Batcher(const Dataset& ds, int64_t batch_size, uint64_t seed, int64_t epoch, bool augment);

    // Returns false when the epoch is exhausted.
    bool next(Tensor& images, std::vector<int32_t>& labels);
    int64_t num_batches() const;
    void reset();

   private:
    const Dataset& ds_;
    int64_t batch_size_;
    bool augment_;
    uint64_t stream_seed_;
    std::vector<int64_t> order_;
    int64_t cursor_ = 0;
};

// Normalized f32 [count, H, W, C] slice of samples [start, start+count) in
// stored order, no augmentation; the evaluation-side counterpart of Batcher.
Tensor normalized_batch(const Dataset& ds, int64_t start, int64_t count);

// Writes a deterministic procedurally drawn digit dataset in the IDX format
// (28x28 grayscale, 10 classes) under `dir`, using the standard MNIST file
// names, so the IDX load path is exercised end to end. Returns the directory.
std::string generate_synth_digits(const std::string& dir, int64_t train_count,
                                  int64_t test_count, uint64_t seed);

// Resolves a dataset root: explicit path if non-empty, else the
// LLVIT_DATA_ROOT environment variable, else "data".
std::string resolve_data_root(const std::string& explicit_root);

// Named dataset dispatch: "mnist", "synth-digits" (generated on demand under
// root/synth-digits), "cifar10".
DatasetPair load_dataset(const std::string& name, const std::string& root);

struct FetchItem {
    std::string url;
    std::string filename;
    std::string sha256;  // lowercase hex
};

// Download manifest for the real datasets; fetch_dataset downloads into
// root/<name>, verifies SHA-256 per file, and writes manifest.json.
std::vector<FetchItem> fetch_manifest(const std::string& name);
void fetch_dataset(const std::string& name, const std::string& root);

std::string sha256_file(const std::string& path);

}  // namespace llvit
