#include "strsparse/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <numeric>
#include <thread>
#include <tuple>

#include "strsparse/kernels.hpp"

namespace strs {

namespace {

// Dataset seeds are derived from the run seed so the whole experiment is a
// pure function of (config, seed).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    return x;
}

/// Solve the r x r system A c = b in place by Gaussian elimination with
/// partial pivoting; returns false on a (near-)singular pivot.
bool solve_dense(Tensor& a, Tensor& b) {
    const std::int64_t n = a.dim(0);
    std::vector<std::int64_t> piv(static_cast<std::size_t>(n));
    std::iota(piv.begin(), piv.end(), 0);
    for (std::int64_t k = 0; k < n; ++k) {
        std::int64_t best = k;
        for (std::int64_t i = k + 1; i < n; ++i)
            if (std::fabs(a.at2(i, k)) > std::fabs(a.at2(best, k))) best = i;
        if (std::fabs(a.at2(best, k)) < 1e-12) return false;
        if (best != k) {
            for (std::int64_t j = 0; j < n; ++j) std::swap(a.at2(k, j), a.at2(best, j));
            std::swap(b[k], b[best]);
        }
        for (std::int64_t i = k + 1; i < n; ++i) {
            const double f = a.at2(i, k) / a.at2(k, k);
            for (std::int64_t j = k; j < n; ++j) a.at2(i, j) -= f * a.at2(k, j);
            b[i] -= f * b[k];
        }
    }
    for (std::int64_t i = n - 1; i >= 0; --i) {
        double v = b[i];
        for (std::int64_t j = i + 1; j < n; ++j) v -= a.at2(i, j) * b[j];
        b[i] = v / a.at2(i, i);
    }
    return true;
}

/// Max |X_S c - y| for the least-squares solution restricted to `support`.
double restricted_ls_residual(const SparseRegressionProblem& prob) {
    const std::int64_t r = static_cast<std::int64_t>(prob.support.size());
    if (r == 0) {
        double mx = 0;
        for (std::int64_t i = 0; i < prob.n; ++i)
            mx = std::max(mx, std::fabs(prob.targets.at2(i, 0)));
        return mx;
    }
    Tensor xs({prob.n, r});
    for (std::int64_t i = 0; i < prob.n; ++i)
        for (std::int64_t j = 0; j < r; ++j)
            xs.at2(i, j) = prob.design.at2(i, prob.support[static_cast<std::size_t>(j)]);
    Tensor gram = matmul(transpose(xs), xs);
    Tensor rhs({r});
    for (std::int64_t j = 0; j < r; ++j) {
        double v = 0;
        for (std::int64_t i = 0; i < prob.n; ++i) v += xs.at2(i, j) * prob.targets.at2(i, 0);
        rhs[j] = v;
    }
    if (!solve_dense(gram, rhs)) return std::numeric_limits<double>::infinity();
    double mx = 0;
    for (std::int64_t i = 0; i < prob.n; ++i) {
        double pred = 0;
        for (std::int64_t j = 0; j < r; ++j) pred += xs.at2(i, j) * rhs[j];
        mx = std::max(mx, std::fabs(pred - prob.targets.at2(i, 0)));
    }
    return mx;
}

}  // namespace

SparseRegressionResult sparse_regression_run(std::int64_t d, std::int64_t n, std::int64_t r,
                                             const TrainConfig& cfg) {
    const auto prob = SparseRegressionProblem::generate(d, n, r, cfg.seed);
    SparseRegressionResult res;
    res.seed_used = prob.seed_used;
    res.oracle_residual = restricted_ls_residual(prob);
    res.oracle_ok = r == 0 ? true : res.oracle_residual <= 1e-8;

    Sequential model;
    Tensor like({1, d});
    auto lin = std::make_unique<StrLinear>(
        "w", d, 1, StrParam::make(Granularity::kPerLayer, like, cfg.s_init, ThresholdFn{}));
    // near-zero init: small enough that descent stays essentially in the row
    // space of X, but above the initial threshold so the support indicator
    // does not freeze coordinates at zero
    {
        Rng init(derive_seed(cfg.seed, 21));
        const double alpha0 = g_eval(ThresholdFn{}, cfg.s_init);
        const double lo = std::max(1e-3, 4.0 * alpha0);
        Tensor& w = lin->mutable_weight();
        for (std::int64_t j = 0; j < d; ++j) {
            const double mag = init.uniform(lo, 2.0 * lo);
            w[j] = init.bounded(2) == 0 ? mag : -mag;
        }
    }
    model.add(std::move(lin));

    train(model, prob.as_dataset(), cfg);

    const StrWeightLayer* layer = model.str_layers().front();
    const Tensor wt = layer->effective_weight();
    res.final_nnz = nonzero_count(wt);
    res.final_sparsity = sparsity(wt);
    for (std::int64_t j = 0; j < d; ++j)
        if (wt[j] != 0.0) res.recovered.push_back(static_cast<int>(j));

    std::int64_t hits = 0;
    for (int j : res.recovered)
        if (std::binary_search(prob.support.begin(), prob.support.end(), j)) ++hits;
    if (res.recovered.empty() && prob.support.empty()) {
        res.precision = res.recall = res.f1 = 1.0;  // empty-vs-empty convention
    } else {
        res.precision = res.recovered.empty()
                            ? 0.0
                            : static_cast<double>(hits) / static_cast<double>(res.recovered.size());
        res.recall = prob.support.empty()
                         ? 1.0
                         : static_cast<double>(hits) / static_cast<double>(prob.support.size());
        res.f1 = (res.precision + res.recall) > 0
                     ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
                     : 0.0;
    }
    return res;
}

// Samples are interleaved by class, so a contiguous split at a multiple of
// the class count stays balanced and both halves share the task definition
// (blob centers, signal directions) drawn from the one seed.
static std::pair<Dataset, Dataset> split_dataset(Dataset full, std::int64_t train_rows) {
    Dataset train, test;
    const std::int64_t total = full.size();
    const std::int64_t row = full.inputs.numel() / total;
    std::vector<std::int64_t> tshape = full.inputs.shape();
    tshape[0] = train_rows;
    train.inputs = Tensor(tshape);
    std::copy(full.inputs.data(), full.inputs.data() + train_rows * row, train.inputs.data());
    train.labels.assign(full.labels.begin(), full.labels.begin() + train_rows);
    tshape[0] = total - train_rows;
    test.inputs = Tensor(tshape);
    std::copy(full.inputs.data() + train_rows * row, full.inputs.data() + total * row,
              test.inputs.data());
    test.labels.assign(full.labels.begin() + train_rows, full.labels.end());
    return {std::move(train), std::move(test)};
}

ClassificationProblem make_classification_problem(const ClassificationSetup& setup,
                                                  const TrainConfig& cfg) {
    ClassificationProblem p;
    const std::uint64_t data_seed = derive_seed(cfg.seed, 1);
    const std::uint64_t init_seed = derive_seed(cfg.seed, 3);
    Rng init_rng(init_seed);

    const std::int64_t test_per_class = std::max<std::int64_t>(setup.samples_per_class / 2, 16);
    if (setup.task == "synthetic-blobs") {
        Dataset full = make_blobs(setup.samples_per_class + test_per_class, setup.classes,
                                  setup.feature_dim, setup.noise, data_seed);
        std::tie(p.train_data, p.test_data) =
            split_dataset(std::move(full), setup.samples_per_class * setup.classes);
    } else if (setup.task == "synthetic-patterns") {
        Dataset full = make_pattern_images(setup.samples_per_class + test_per_class,
                                           setup.image_size, setup.noise, data_seed);
        std::tie(p.train_data, p.test_data) =
            split_dataset(std::move(full), setup.samples_per_class * 4);
    } else if (setup.task == "idx-images") {
        p.train_data = load_idx_dataset(setup.idx_images, setup.idx_labels,
                                        setup.synthetic_fallback, data_seed);
        p.test_data = p.train_data;  // no separate files; evaluate on train
    } else {
        throw std::invalid_argument("unknown task: " + setup.task);
    }

    StrOptions str = setup.str;
    str.s_init = cfg.s_init;
    if (setup.model == "mlp") {
        if (p.train_data.inputs.rank() != 2)
            throw std::invalid_argument("mlp expects flat features, got inputs " +
                                        p.train_data.inputs.shape_str());
        const std::int64_t dim = p.train_data.inputs.dim(1);
        int classes = 0;
        for (int l : p.train_data.labels) classes = std::max(classes, l + 1);
        p.model = make_mlp(dim, {64, 64}, classes, str, init_rng);
        p.example_input = Tensor({1, dim});
    } else if (setup.model == "cnn") {
        if (p.train_data.inputs.rank() != 4)
            throw std::invalid_argument("cnn expects image inputs, got " +
                                        p.train_data.inputs.shape_str());
        const std::int64_t img = p.train_data.inputs.dim(2);
        int classes = 0;
        for (int l : p.train_data.labels) classes = std::max(classes, l + 1);
        p.model = make_cnn(img, classes, str, init_rng);
        p.example_input = Tensor({1, 1, img, img});
    } else {
        throw std::invalid_argument("unknown model: " + setup.model);
    }
    return p;
}

ClassificationResult classification_run(const ClassificationSetup& setup,
                                        const TrainConfig& cfg) {
    ClassificationResult res;
    res.problem = make_classification_problem(setup, cfg);
    ClassificationProblem& p = res.problem;
    res.report = train(p.model, p.train_data, cfg);
    res.test_accuracy = evaluate_accuracy(p.model, p.test_data);

    const std::vector<LayerSpec> specs = model_specs(p.model, p.example_input);
    std::vector<double> pcts;
    for (StrWeightLayer* l : p.model.str_layers())
        pcts.push_back(100.0 * sparsity(l->effective_weight()));
    res.budget = report(specs, pcts);
    // exact measured nonzero counts instead of rounded ones
    std::size_t i = 0;
    res.budget.total_nonzeros = 0;
    res.budget.backbone_nonzeros = 0;
    for (StrWeightLayer* l : p.model.str_layers()) {
        res.budget.rows[i].nonzeros = nonzero_count(l->effective_weight());
        res.budget.total_nonzeros += res.budget.rows[i].nonzeros;
        if (specs[i].kind != LayerSpec::Kind::kFc)
            res.budget.backbone_nonzeros += res.budget.rows[i].nonzeros;
        ++i;
    }
    res.budget.overall_sparsity_pct =
        100.0 * (1.0 - static_cast<double>(res.budget.total_nonzeros) /
                           static_cast<double>(res.budget.total_params));
    if (res.budget.backbone_params > 0)
        res.budget.backbone_sparsity_pct =
            100.0 * (1.0 - static_cast<double>(res.budget.backbone_nonzeros) /
                               static_cast<double>(res.budget.backbone_params));
    return res;
}

LowRankRnnResult lowrank_rnn_run(const RnnSetup& setup, const TrainConfig& cfg) {
    const std::uint64_t data_seed = derive_seed(cfg.seed, 11);
    const std::uint64_t init_seed = derive_seed(cfg.seed, 13);
    const std::int64_t test_per_class =
        std::max<std::int64_t>(setup.sequences_per_class / 2, 16);
    // one draw shares the signal direction; contiguous split stays balanced
    const SeqDataset full = make_sequence_task(setup.sequences_per_class + test_per_class,
                                               setup.steps, setup.input_dim, setup.noise,
                                               data_seed);
    SeqDataset train_data, test_data;
    const std::size_t train_n = static_cast<std::size_t>(setup.sequences_per_class * 2);
    train_data.sequences.assign(full.sequences.begin(),
                                full.sequences.begin() + static_cast<std::ptrdiff_t>(train_n));
    train_data.labels.assign(full.labels.begin(),
                             full.labels.begin() + static_cast<std::ptrdiff_t>(train_n));
    test_data.sequences.assign(full.sequences.begin() + static_cast<std::ptrdiff_t>(train_n),
                               full.sequences.end());
    test_data.labels.assign(full.labels.begin() + static_cast<std::ptrdiff_t>(train_n),
                            full.labels.end());

    LowRankRnnResult res;
    res.full_rank_w = setup.input_dim;
    res.full_rank_u = setup.hidden_dim;

    {
        Rng rng(init_seed);
        LowRankFastGRNN cell(setup.input_dim, setup.hidden_dim, 2, setup.s_init, rng);
        res.report = train_fastgrnn(cell, train_data, cfg, &res.rank_trajectory);
        res.accuracy = evaluate_accuracy(cell, test_data);
        const auto [rw, ru] = cell.effective_rank();
        res.rank_w = rw;
        res.rank_u = ru;
    }
    {
        Rng rng(init_seed);  // identical initialization
        LowRankFastGRNN baseline(setup.input_dim, setup.hidden_dim, 2, setup.s_init, rng);
        TrainConfig bcfg = cfg;
        bcfg.freeze_thresholds = true;
        train_fastgrnn(baseline, train_data, bcfg);
        res.baseline_accuracy = evaluate_accuracy(baseline, test_data);
    }
    return res;
}

Tensor magnitude_prune_to_budget(const Tensor& w, double sparsity_pct) {
    if (sparsity_pct < 0.0 || sparsity_pct > 100.0)
        throw std::invalid_argument("magnitude prune: sparsity " +
                                    std::to_string(sparsity_pct) + " outside [0,100]");
    const std::int64_t n = w.numel();
    const std::int64_t keep =
        std::llround(static_cast<double>(n) * (100.0 - sparsity_pct) / 100.0);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) {
        const double ma = std::fabs(w[a]), mb = std::fabs(w[b]);
        if (ma != mb) return ma > mb;
        return a < b;  // ties: lowest flat index kept first
    });
    Tensor out(w.shape());
    for (std::int64_t i = 0; i < keep; ++i) out[idx[static_cast<std::size_t>(i)]] = w[idx[static_cast<std::size_t>(i)]];
    return out;
}

BudgetTransferResult budget_transfer_run(const std::vector<double>& budget_pcts,
                                         const ClassificationSetup& setup,
                                         const TrainConfig& cfg) {
    ClassificationProblem p = make_classification_problem(setup, cfg);
    auto str_layers = p.model.str_layers();
    if (budget_pcts.size() != str_layers.size())
        throw std::invalid_argument("budget transfer: " + std::to_string(budget_pcts.size()) +
                                    " sparsities for " + std::to_string(str_layers.size()) +
                                    " prunable layers");

    auto apply_masks = [&]() {
        for (std::size_t i = 0; i < str_layers.size(); ++i) {
            const Tensor pruned =
                magnitude_prune_to_budget(str_layers[i]->weight(), budget_pcts[i]);
            Tensor mask(pruned.shape());
            for (std::int64_t j = 0; j < pruned.numel(); ++j)
                mask[j] = pruned[j] != 0.0 ? 1.0 : 0.0;
            str_layers[i]->set_external_mask(std::move(mask));
        }
    };
    apply_masks();

    TrainHooks hooks;
    hooks.before_step = apply_masks;
    BudgetTransferResult res;
    res.report = train(p.model, p.train_data, cfg, hooks);
    res.test_accuracy = evaluate_accuracy(p.model, p.test_data);
    std::int64_t total = 0, nnz = 0;
    for (StrWeightLayer* l : str_layers) {
        const Tensor eff = l->effective_weight();
        total += eff.numel();
        nnz += nonzero_count(eff);
    }
    res.overall_sparsity = 1.0 - static_cast<double>(nnz) / static_cast<double>(total);
    return res;
}

namespace {

double proxy_sparsity(double lambda, const ClassificationSetup& setup,
                      const TrainConfig& cfg_template) {
    TrainConfig cfg = cfg_template;
    cfg.lambda = lambda;
    return classification_run(setup, cfg).budget.overall_sparsity_pct;
}

}  // namespace

LambdaSweepResult lambda_sweep(double target_sparsity_pct, double tolerance_pct,
                               const ClassificationSetup& setup,
                               const TrainConfig& cfg_template, int max_trials) {
    if (target_sparsity_pct < 0.0 || target_sparsity_pct > 100.0)
        throw std::invalid_argument("lambda sweep target must be in [0,100]");
    if (max_trials < 3) throw std::invalid_argument("lambda sweep needs max_trials >= 3");

    LambdaSweepResult res;
    if (target_sparsity_pct == 0.0) {
        res.lambda = 0.0;
        res.converged = true;
        return res;
    }

    auto run_trial = [&](double lambda) {
        const double s = proxy_sparsity(lambda, setup, cfg_template);
        res.history.emplace_back(lambda, s);
        ++res.trials;
        if (std::fabs(s - target_sparsity_pct) <
            std::fabs(res.achieved_sparsity_pct - target_sparsity_pct) || res.trials == 1) {
            res.achieved_sparsity_pct = s;
            res.lambda = lambda;
        }
        return s;
    };

    double lo = 1e-3, hi = 0.2;
    double s_lo = run_trial(lo);
    if (std::fabs(s_lo - target_sparsity_pct) <= tolerance_pct) {
        res.converged = true;
        return res;
    }
    double s_hi = run_trial(hi);
    if (std::fabs(s_hi - target_sparsity_pct) <= tolerance_pct) {
        res.converged = true;
        return res;
    }
    // bracket, widening once if needed
    if (!(s_lo < target_sparsity_pct && target_sparsity_pct < s_hi)) {
        if (target_sparsity_pct <= s_lo) {
            lo /= 100.0;
            s_lo = run_trial(lo);
        } else {
            hi *= 20.0;
            s_hi = run_trial(hi);
        }
        if (std::fabs(res.achieved_sparsity_pct - target_sparsity_pct) <= tolerance_pct) {
            res.converged = true;
            return res;
        }
        if (!(s_lo < target_sparsity_pct && target_sparsity_pct < s_hi)) return res;
    }
    while (res.trials < max_trials) {
        const double mid = std::sqrt(lo * hi);
        const double s_mid = run_trial(mid);
        if (std::fabs(s_mid - target_sparsity_pct) <= tolerance_pct) {
            res.converged = true;
            return res;
        }
        if (s_mid < target_sparsity_pct)
            lo = mid;
        else
            hi = mid;
    }
    return res;
}

LambdaSweepResult auto_lambda_for_f1(std::int64_t d, std::int64_t n, std::int64_t r,
                                     double target_f1, const TrainConfig& cfg_template,
                                     int max_trials) {
    LambdaSweepResult res;
    double best_f1 = -1.0;
    double lambda = 1e-3;
    for (int t = 0; t < max_trials; ++t, lambda *= 3.0) {
        TrainConfig cfg = cfg_template;
        cfg.lambda = lambda;
        const auto out = sparse_regression_run(d, n, r, cfg);
        res.history.emplace_back(lambda, out.f1);
        ++res.trials;
        if (out.f1 > best_f1) {
            best_f1 = out.f1;
            res.lambda = lambda;
            res.achieved_sparsity_pct = out.f1;  // carries F1 for this variant
        }
        if (out.f1 >= target_f1) {
            res.converged = true;
            break;
        }
    }
    return res;
}

template <typename R>
std::vector<R> run_over_seeds(int seeds, int jobs, const std::function<R(int)>& fn) {
    std::vector<R> results(static_cast<std::size_t>(seeds));
    if (jobs <= 1) {
        for (int i = 0; i < seeds; ++i) results[static_cast<std::size_t>(i)] = fn(i);
        return results;
    }
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(jobs, seeds); ++w) {
        workers.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < seeds; i = next.fetch_add(1))
                results[static_cast<std::size_t>(i)] = fn(i);
        });
    }
    for (std::thread& t : workers) t.join();
    return results;
}

template std::vector<SparseRegressionResult> run_over_seeds(
    int, int, const std::function<SparseRegressionResult(int)>&);
template std::vector<LowRankRnnResult> run_over_seeds(
    int, int, const std::function<LowRankRnnResult(int)>&);
template std::vector<double> run_over_seeds(int, int, const std::function<double(int)>&);

}  // namespace strs
