#include "hllm/objectives.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "hllm/error.hpp"

namespace hllm {

void Similarity::init(double temperature, bool normalize_inputs) {
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
    }
    theta.init(1, 1, false);
    theta.v.at(0, 0) = std::log(temperature);
    normalize = normalize_inputs;
}

double Similarity::temperature() const { return std::exp(theta.v.at(0, 0)); }

static double norm2(const double* a, size_t d) {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

double Similarity::forward(const double* a, const double* b, size_t d) const {
    double raw = dot(a, b, d);
    if (normalize) {
        const double na = norm2(a, d);
        const double nb = norm2(b, d);
        if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero vector");
        raw /= na * nb;
    }
    return raw / temperature();
}

double Similarity::forward(const std::vector<double>& a, const std::vector<double>& b) const {
    if (a.size() != b.size()) {
        throw DataError("similarity inputs differ in dimension: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
    }
    return forward(a.data(), b.data(), a.size());
}

void Similarity::backward(const double* a, const double* b, size_t d, double d_s, double* d_a,
                          double* d_b) {
    const double inv_tau = 1.0 / temperature();
    if (!normalize) {
        const double s = dot(a, b, d) * inv_tau;
        if (d_a) axpy(d_s * inv_tau, b, d_a, d);
        if (d_b) axpy(d_s * inv_tau, a, d_b, d);
        theta.g.at(0, 0) += -d_s * s;
        return;
    }
    const double na = norm2(a, d);
    const double nb = norm2(b, d);
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero vector");
    const double c = dot(a, b, d) / (na * nb);
    const double k = d_s * inv_tau;
    if (d_a) {
        const double inv = 1.0 / (na * nb);
        const double self = c / (na * na);
        for (size_t i = 0; i < d; ++i) d_a[i] += k * (b[i] * inv - self * a[i]);
    }
    if (d_b) {
        const double inv = 1.0 / (na * nb);
        const double self = c / (nb * nb);
        for (size_t i = 0; i < d; ++i) d_b[i] += k * (a[i] * inv - self * b[i]);
    }
    theta.g.at(0, 0) += -d_s * c * inv_tau;
}

void Similarity::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".theta", theta);
}

NegativeSet sample_negatives(Rng& rng, const Catalog& catalog,
                             const std::vector<std::string>& exclude, size_t n) {
    std::unordered_set<std::string> blocked(exclude.begin(), exclude.end());
    std::vector<size_t> eligible;
    eligible.reserve(catalog.size());
    for (size_t i = 0; i < catalog.items.size(); ++i) {
        if (!blocked.count(catalog.items[i].item_id)) eligible.push_back(i);
    }
    if (eligible.empty()) {
        throw DataError("negative sampling: every catalog item is excluded");
    }
    NegativeSet out;
    out.ids.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        const size_t pick = eligible[rng.uniform_below(eligible.size())];
        out.ids.push_back(catalog.items[pick].item_id);
    }
    return out;
}

double infonce_loss(const Mat& anchors, const Mat& positives, const Mat& negatives,
                    Similarity& sim, InfoNceGrads* grads, double grad_scale) {
    if (anchors.rows != positives.rows || anchors.cols != positives.cols) {
        throw DataError("contrastive loss: anchors and positives differ in shape");
    }
    if (negatives.rows > 0 && negatives.cols != anchors.cols) {
        throw DataError("contrastive loss: negative dimension mismatch");
    }
    if (anchors.rows == 0) throw DataError("contrastive loss: no valid prediction positions");

    const size_t m = anchors.rows;
    const size_t n = negatives.rows;
    const size_t d = anchors.cols;
    if (grads) {
        grads->d_anchors = Mat(m, d);
        grads->d_positives = Mat(m, d);
        grads->d_negatives = Mat(n, d);
    }

    std::vector<double> logits(n + 1);
    double total = 0.0;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (size_t i = 0; i < m; ++i) {
        const double* a = anchors.row(i);
        logits[0] = sim.forward(a, positives.row(i), d);
        for (size_t k = 0; k < n; ++k) logits[k + 1] = sim.forward(a, negatives.row(k), d);

        double mx = logits[0];
        for (size_t k = 1; k <= n; ++k) mx = std::max(mx, logits[k]);
        double z = 0.0;
        for (size_t k = 0; k <= n; ++k) z += std::exp(logits[k] - mx);
        total += mx + std::log(z) - logits[0];

        if (grads) {
            const double d0 = (std::exp(logits[0] - mx) / z - 1.0) * inv_m * grad_scale;
            sim.backward(a, positives.row(i), d, d0, grads->d_anchors.row(i),
                         grads->d_positives.row(i));
            for (size_t k = 0; k < n; ++k) {
                const double dk = std::exp(logits[k + 1] - mx) / z * inv_m * grad_scale;
                sim.backward(a, negatives.row(k), d, dk, grads->d_anchors.row(i),
                             grads->d_negatives.row(k));
            }
        }
    }
    const double loss = total * inv_m;
    if (!std::isfinite(loss)) throw NumericError("contrastive loss is non-finite");
    return loss;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

static constexpr double kProbEps = 1e-7;

double bce_loss(double x, double y) {
    const double p = std::min(1.0 - kProbEps, std::max(kProbEps, x));
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

double bce_loss_from_logit(double logit, double y, double* d_logit) {
    const double p = sigmoid(logit);
    if (d_logit) {
        *d_logit = (p > kProbEps && p < 1.0 - kProbEps) ? p - y : 0.0;
    }
    return bce_loss(p, y);
}

double combined_loss(double gen, double cls, double lambda) { return lambda * gen + cls; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "generative") return TrainMode::generative;
    if (s == "disc_early") return TrainMode::disc_early;
    if (s == "disc_late") return TrainMode::disc_late;
    throw ConfigError("unknown training mode '" + s +
                      "' (expected generative, disc_early or disc_late)");
}

std::string train_mode_to_string(TrainMode m) {
    switch (m) {
        case TrainMode::generative: return "generative";
        case TrainMode::disc_early: return "disc_early";
        case TrainMode::disc_late: return "disc_late";
    }
    throw ConfigError("invalid training mode value");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (negatives == 0) throw ConfigError("negative count must be at least 1");
    if (lambda < 0.0) throw ConfigError("auxiliary loss weight must be non-negative");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

std::string format_loss_record(const LossRecord& rec) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%.17g\t%.17g", rec.step, rec.epoch, rec.loss,
                  rec.temperature);
    return std::string(buf);
}

}  // namespace hllm
