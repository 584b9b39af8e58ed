#pragma once

#include <vector>

#include "hllm/model.hpp"
#include "hllm/objectives.hpp"

namespace hllm {

/// Adam-style optimizer with decoupled weight decay. Decay is applied only to
/// parameters flagged for it (matrices and tables, not biases, norm gains or
/// the temperature).
class AdamW {
public:
    AdamW(double lr, double weight_decay);

    /// Collects the model's trainable parameters; the model must outlive
    /// this optimizer.
    void attach(Recommender& model);

    /// Consumes accumulated gradients and updates parameter values.
    void step();

    size_t attached() const { return params_.size(); }

    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};

private:
    double lr_;
    double wd_;
    size_t t_{0};
    std::vector<Param*> params_;
    std::vector<Mat> m_;
    std::vector<Mat> v_;
};

struct TrainResult {
    std::vector<LossRecord> history;
};

/// Mini-batch training over the split's train sequences. Fully sequential:
/// batch order, negative draws and updates are deterministic for a fixed
/// seed. Aborts with NumericError after two consecutive non-finite steps.
TrainResult train(const SplitDataset& split, Recommender& model, const TrainConfig& cfg,
                  const LossReporter& reporter = nullptr);

}  // namespace hllm
