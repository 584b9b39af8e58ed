#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hllm/corpus.hpp"
#include "hllm/nn.hpp"
#include "hllm/rng.hpp"

namespace hllm {

/// Scaled similarity with a learnable temperature. The temperature is stored
/// as exp of a free scalar, so it stays positive under unconstrained updates.
struct Similarity {
    Param theta;           // 1x1 free scalar; temperature = exp(theta)
    bool normalize{true};  // cosine when true, raw dot product otherwise

    void init(double temperature, bool normalize_inputs);
    double temperature() const;

    double forward(const double* a, const double* b, size_t d) const;
    double forward(const std::vector<double>& a, const std::vector<double>& b) const;

    /// Accumulates d(similarity)/d(a,b) scaled by d_s into d_a/d_b (either
    /// may be null) and the temperature gradient into theta.g.
    void backward(const double* a, const double* b, size_t d, double d_s, double* d_a,
                  double* d_b);

    void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Negatives drawn for one training step. `emb` is filled by whichever stage
/// encodes items; sampling itself only picks ids.
struct NegativeSet {
    std::vector<std::string> ids;
    Mat emb;  // N x d once encoded
};

/// Draws n item ids uniformly with replacement from the catalog minus
/// `exclude`. Deterministic given the rng state. Throws DataError when no
/// item is eligible.
NegativeSet sample_negatives(Rng& rng, const Catalog& catalog,
                             const std::vector<std::string>& exclude, size_t n);

struct InfoNceGrads {
    Mat d_anchors;
    Mat d_positives;
    Mat d_negatives;
};

/// Mean softmax-contrastive loss over anchor rows. Row i of `positives` is
/// the ground-truth embedding for anchor row i; `negatives` rows are shared
/// across all anchors. Anchors are the pre-gathered valid prediction
/// positions, i.e. every position that has a next-item target. When `grads`
/// is given, input gradients and the temperature gradient are accumulated,
/// scaled by `grad_scale` (used when this loss enters a weighted sum). The
/// returned loss is never scaled.
double infonce_loss(const Mat& anchors, const Mat& positives, const Mat& negatives,
                    Similarity& sim, InfoNceGrads* grads, double grad_scale = 1.0);

double sigmoid(double z);

/// Binary cross-entropy over a probability, clamped to [1e-7, 1 - 1e-7].
double bce_loss(double x, double y);

/// bce_loss(sigmoid(logit), y); optionally writes d(loss)/d(logit), which is
/// zero in the clamped tails.
double bce_loss_from_logit(double logit, double y, double* d_logit);

/// lambda * generative + classification.
double combined_loss(double gen, double cls, double lambda);

enum class TrainMode { generative, disc_early, disc_late };

TrainMode train_mode_from_string(const std::string& s);
std::string train_mode_to_string(TrainMode m);

struct TrainConfig {
    double lr{1e-4};
    size_t batch_size{8};
    size_t epochs{1};
    size_t max_steps{0};  // 0 = bounded by epochs alone
    size_t negatives{512};
    double lambda{1.0};
    TrainMode mode{TrainMode::generative};
    uint64_t seed{1};
    double weight_decay{0.01};

    void validate() const;  // throws ConfigError
};

struct LossRecord {
    size_t step{0};   // global step, 1-based
    size_t epoch{0};  // 1-based
    double loss{0.0};
    double temperature{0.0};
};

using LossReporter = std::function<void(const LossRecord&)>;

/// Newline-delimited record formatting used by the loss log.
std::string format_loss_record(const LossRecord& rec);

}  // namespace hllm
