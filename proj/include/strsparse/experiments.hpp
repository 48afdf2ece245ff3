#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "strsparse/budget.hpp"
#include "strsparse/datasets.hpp"
#include "strsparse/optimizer.hpp"
#include "strsparse/train.hpp"

namespace strs {

// ----- sparse regression ---------------------------------------------------------

struct SparseRegressionResult {
    std::vector<int> recovered;
    double precision = 0, recall = 0, f1 = 0;
    std::int64_t final_nnz = 0;
    /// Least squares restricted to the true support reproduces y to 1e-8
    /// (identifiability guard, independent of the training path).
    bool oracle_ok = false;
    double oracle_residual = 0;
    std::uint64_t seed_used = 0;
    double final_sparsity = 0;
};

/// Trains a single STR-reparameterized weight vector on y = Xw* with squared
/// loss (weight initialized at zero, so gradient descent stays in the row
/// space of X) and scores support recovery. Empty-vs-empty recovery counts
/// as F1 = 1.
SparseRegressionResult sparse_regression_run(std::int64_t d, std::int64_t n, std::int64_t r,
                                             const TrainConfig& cfg);

// ----- classification ------------------------------------------------------------

struct ClassificationSetup {
    std::string task = "synthetic-blobs";  // synthetic-blobs | synthetic-patterns | idx-images
    std::string model = "mlp";             // mlp | cnn
    StrOptions str;
    std::int64_t samples_per_class = 170;
    std::int64_t classes = 3;
    std::int64_t feature_dim = 32;
    std::int64_t image_size = 16;
    double noise = 0.6;
    std::string idx_images, idx_labels;
    bool synthetic_fallback = true;
};

/// Model + train/test datasets exactly as classification_run builds them.
struct ClassificationProblem {
    Sequential model;
    Dataset train_data, test_data;
    Tensor example_input;
};
ClassificationProblem make_classification_problem(const ClassificationSetup& setup,
                                                  const TrainConfig& cfg);

struct ClassificationResult {
    TrainReport report;
    BudgetReport budget;
    double test_accuracy = 0;
    ClassificationProblem problem;  // trained model, checkpointable
};

ClassificationResult classification_run(const ClassificationSetup& setup,
                                        const TrainConfig& cfg);

// ----- low-rank RNN --------------------------------------------------------------

struct RnnSetup {
    std::int64_t input_dim = 10;
    std::int64_t hidden_dim = 16;
    std::int64_t steps = 8;
    std::int64_t sequences_per_class = 64;
    double noise = 0.8;
    double s_init = -10.0;  // g(s_init) ~ 0 for the exponential threshold
};

struct LowRankRnnResult {
    double accuracy = 0, baseline_accuracy = 0;
    std::int64_t rank_w = 0, rank_u = 0;
    std::int64_t full_rank_w = 0, full_rank_u = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> rank_trajectory;
    TrainReport report;
};

/// Trains the masked low-rank cell and an identically initialized full-rank
/// baseline (thresholds frozen at zero) on the synthetic sequence task.
LowRankRnnResult lowrank_rnn_run(const RnnSetup& setup, const TrainConfig& cfg);

// ----- budget transfer -----------------------------------------------------------

/// Keeps the k = round(numel*(100-s)/100) largest-magnitude entries; ties
/// keep the lowest flat index. Exactly k survivors for every input.
Tensor magnitude_prune_to_budget(const Tensor& w, double sparsity_pct);

struct BudgetTransferResult {
    TrainReport report;
    double test_accuracy = 0;
    double overall_sparsity = 0;
};

/// Trains the setup's model with fixed per-layer sparsities enforced by
/// magnitude pruning re-applied before every step; masked weights receive
/// zero gradient (straight-through on the mask). budget_pcts follow the
/// model's STR layer order.
BudgetTransferResult budget_transfer_run(const std::vector<double>& budget_pcts,
                                         const ClassificationSetup& setup,
                                         const TrainConfig& cfg);

// ----- lambda sweep --------------------------------------------------------------

struct LambdaSweepResult {
    double lambda = 0;
    double achieved_sparsity_pct = 0;
    bool converged = false;
    int trials = 0;
    std::vector<std::pair<double, double>> history;  // (lambda, sparsity%)
};

/// Bisection on log(lambda) over short proxy runs until the final overall
/// sparsity lands within +-tolerance of the target; a non-monotone bracket
/// is widened once before giving up with the best attempt.
LambdaSweepResult lambda_sweep(double target_sparsity_pct, double tolerance_pct,
                               const ClassificationSetup& setup,
                               const TrainConfig& cfg_template, int max_trials);

/// Coarse geometric search for the smallest lambda reaching the target F1 on
/// sparse regression (F1 is not monotone in lambda, so no bisection).
LambdaSweepResult auto_lambda_for_f1(std::int64_t d, std::int64_t n, std::int64_t r,
                                     double target_f1, const TrainConfig& cfg_template,
                                     int max_trials);

/// Runs fn(seed_index) for each seed, optionally across worker threads;
/// results are collected in seed order regardless of completion order.
template <typename R>
std::vector<R> run_over_seeds(int seeds, int jobs, const std::function<R(int)>& fn);

}  // namespace strs
