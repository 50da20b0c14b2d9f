#include "llvit/train.hpp"

#include <algorithm>
#include <cmath>

#include "llvit/errors.hpp"
#include "llvit/layers.hpp"

namespace llvit {

std::vector<int32_t> argmax_rows(const Tensor& logits) {
    const int64_t rows = logits.dim(0), cols = logits.dim(1);
    std::vector<int32_t> out(static_cast<size_t>(rows));
    const float* p = logits.f32();
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = p + r * cols;
        out[static_cast<size_t>(r)] =
            static_cast<int32_t>(std::max_element(row, row + cols) - row);
    }
    return out;
}

EpochMetrics train_epoch(Model& model, const Dataset& train, Optimizer& opt, float lr,
                         int64_t batch_size, uint64_t seed, int64_t epoch, bool augment) {
    Batcher batcher(train, batch_size, seed, epoch, augment);
    std::vector<Parameter*> params = model.params();

    double loss_sum = 0.0;
    int64_t seen = 0, correct = 0;
    Tensor images;
    std::vector<int32_t> labels;
    while (batcher.next(images, labels)) {
        Tensor logits = model.forward(images);
        Tensor dlogits;
        const float loss = softmax_xent(logits, labels, dlogits);
        if (!std::isfinite(loss)) {
            std::string stage;
            model.forward(images, &stage);
            if (stage.empty()) stage = "loss";
            throw TrainingError("non-finite loss at stage '" + stage + "' (epoch " +
                                std::to_string(epoch) + ")");
        }
        model.backward(dlogits);
        opt.step(params, lr);

        const int64_t b = images.dim(0);
        loss_sum += static_cast<double>(loss) * static_cast<double>(b);
        seen += b;
        const std::vector<int32_t> pred = argmax_rows(logits);
        for (int64_t i = 0; i < b; ++i) {
            if (pred[static_cast<size_t>(i)] == labels[static_cast<size_t>(i)]) ++correct;
        }
    }
    EpochMetrics m;
    m.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    m.accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    return m;
}

EvalResult evaluate(Model& model, const Dataset& ds, int64_t batch_size) {
    EvalResult res;
    res.per_class_correct.assign(static_cast<size_t>(ds.num_classes), 0);
    res.per_class_total.assign(static_cast<size_t>(ds.num_classes), 0);
    res.predictions.reserve(static_cast<size_t>(ds.size()));

    int64_t correct = 0;
    for (int64_t start = 0; start < ds.size(); start += batch_size) {
        const int64_t count = std::min(batch_size, ds.size() - start);
        Tensor images = normalized_batch(ds, start, count);
        Tensor logits = model.forward(images);
        const std::vector<int32_t> pred = argmax_rows(logits);
        for (int64_t i = 0; i < count; ++i) {
            const int32_t y = ds.labels[static_cast<size_t>(start + i)];
            const int32_t p = pred[static_cast<size_t>(i)];
            res.predictions.push_back(p);
            ++res.per_class_total[static_cast<size_t>(y)];
            if (p == y) {
                ++correct;
                ++res.per_class_correct[static_cast<size_t>(y)];
            }
        }
    }
    res.accuracy = ds.size() ? static_cast<double>(correct) / static_cast<double>(ds.size()) : 0.0;
    return res;
}

}  // namespace llvit
