#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "strsparse/fastgrnn.hpp"
#include "strsparse/layers.hpp"
#include "strsparse/optimizer.hpp"
#include "strsparse/tensor.hpp"

namespace strs {

/// Supervised dataset over dense inputs: classification (labels) or
/// regression (targets), batch axis first.
struct Dataset {
    Tensor inputs;            // [N, ...]
    std::vector<int> labels;  // classification
    Tensor targets;           // [N, K] regression targets
    bool regression = false;
    std::int64_t size() const { return inputs.dim(0); }
};

/// Variable-length sequence classification data.
struct SeqDataset {
    std::vector<Tensor> sequences;  // each [T, D]
    std::vector<int> labels;
};

struct EpochLog {
    std::int64_t epoch = 0;
    double loss = 0;
    double accuracy = 0;   // 0 for regression tasks
    double sparsity = 0;   // overall fraction of zeros among STR weights
    std::vector<double> alphas;  // one per STR layer (mean over entries)
};

struct TrainReport {
    std::vector<std::string> layer_names;
    std::vector<EpochLog> epochs;
    double final_loss = 0, final_accuracy = 0, final_sparsity = 0;

    /// "epoch,loss,accuracy,sparsity,alpha_<layer>,..." with full-precision
    /// values; byte-stable across reruns of the same seeded config.
    std::string to_csv() const;
};

/// Training aborted on a non-finite loss; names the first offending layer.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& what, std::string layer_name)
        : std::runtime_error(what), layer(std::move(layer_name)) {}
    std::string layer;
};

struct TrainHooks {
    /// Invoked at the top of every optimization step (budget-transfer
    /// training refreshes magnitude masks here).
    std::function<void()> before_step;
};

/// Mini-batch SGD with the STR forward/backward plumbing. Deterministic
/// given cfg.seed: the per-epoch shuffle and nothing else draws randomness.
/// Global granularity ties every layer's threshold to one shared scalar.
/// cfg.freeze_thresholds pins all thresholds at exactly zero first.
TrainReport train(Sequential& model, const Dataset& data, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Same loop over sequences for the low-rank gated cell. rank_trajectory,
/// when given, receives (r_W, r_U) after every epoch.
TrainReport train_fastgrnn(LowRankFastGRNN& cell, const SeqDataset& data,
                           const TrainConfig& cfg,
                           std::vector<std::pair<std::int64_t, std::int64_t>>* rank_trajectory
                           = nullptr);

/// Mean threshold value per STR layer, in layer order.
std::vector<double> layer_alphas(Sequential& model);

double evaluate_accuracy(Sequential& model, const Dataset& data);
double evaluate_accuracy(LowRankFastGRNN& cell, const SeqDataset& data);

}  // namespace strs
