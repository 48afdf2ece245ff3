#include "strsparse/train.hpp"

#include <cmath>
#include <cstdio>

#include "strsparse/kernels.hpp"
#include "strsparse/rng.hpp"

namespace strs {

namespace {

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tensor gather_rows(const Tensor& src, const std::vector<std::int64_t>& perm,
                   std::size_t begin, std::size_t end) {
    const std::int64_t row = src.numel() / src.dim(0);
    std::vector<std::int64_t> shape = src.shape();
    shape[0] = static_cast<std::int64_t>(end - begin);
    Tensor out(shape);
    for (std::size_t i = begin; i < end; ++i)
        std::copy(src.data() + perm[i] * row, src.data() + (perm[i] + 1) * row,
                  out.data() + static_cast<std::int64_t>(i - begin) * row);
    return out;
}

double mean_alpha(const StrParam& p) {
    const Tensor a = p.thresholds();
    return sum(a) / static_cast<double>(a.numel());
}

}  // namespace

std::vector<double> layer_alphas(Sequential& model) {
    std::vector<double> out;
    for (const StrWeightLayer* l : static_cast<const Sequential&>(model).str_layers())
        out.push_back(mean_alpha(l->str_param()));
    return out;
}

std::string TrainReport::to_csv() const {
    std::string csv = "epoch,loss,accuracy,sparsity";
    for (const std::string& n : layer_names) csv += ",alpha_" + n;
    csv += "\n";
    for (const EpochLog& e : epochs) {
        csv += std::to_string(e.epoch) + "," + format_full(e.loss) + "," +
               format_full(e.accuracy) + "," + format_full(e.sparsity);
        for (double a : e.alphas) csv += "," + format_full(a);
        csv += "\n";
    }
    return csv;
}

TrainReport train(Sequential& model, const Dataset& data, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (!data.regression && data.labels.size() != static_cast<std::size_t>(data.size()))
        throw std::invalid_argument("train: labels do not match dataset size");

    auto str_layers = model.str_layers();
    if (cfg.freeze_thresholds)
        for (StrWeightLayer* l : str_layers)
            for (double& v : l->str_param().s.vec()) v = -1e9;

    const bool global = !str_layers.empty() &&
                        str_layers.front()->str_param().granularity == Granularity::kGlobal;

    // Under a global threshold the per-layer s tensors are mirrors of one
    // master scalar; their gradients are summed and the master takes a single
    // optimizer step per batch.
    std::vector<ParamRef> params;
    for (const ParamRef& p : model.params())
        if (!(global && p.is_threshold)) params.push_back(p);
    SgdMomentum opt(params, cfg.momentum);
    Tensor master_s = global && !str_layers.empty() ? str_layers.front()->str_param().s
                                                    : Tensor::scalar(0.0);
    Tensor master_vel({1});
    Tensor master_grad({1});

    const std::int64_t n = data.size();
    const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const std::int64_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;

    Rng rng(cfg.seed);
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    TrainReport report;
    for (const StrWeightLayer* l : str_layers)
        report.layer_names.push_back(l->layer_name());

    std::int64_t step = 0;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(perm);
        double loss_sum = 0, acc_sum = 0;
        for (std::int64_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++step) {
            const std::size_t begin = static_cast<std::size_t>(b0);
            const std::size_t end = static_cast<std::size_t>(std::min(n, b0 + cfg.batch_size));
            if (hooks.before_step) hooks.before_step();
            const Tensor bx = gather_rows(data.inputs, perm, begin, end);
            const double lr = cosine_lr(step, total_steps, warmup_steps, cfg.base_lr);

            model.zero_grads();
            const Tensor out = model.forward(bx);
            LossResult loss;
            if (data.regression) {
                const Tensor bt = gather_rows(data.targets, perm, begin, end);
                loss = mse_loss(out, bt);
            } else {
                std::vector<int> bl(end - begin);
                for (std::size_t i = begin; i < end; ++i)
                    bl[i - begin] = data.labels[static_cast<std::size_t>(perm[i])];
                loss = softmax_cross_entropy(out, bl);
                acc_sum += accuracy(out, bl) * static_cast<double>(end - begin);
            }
            if (!std::isfinite(loss.value)) {
                std::string layer = model.first_nonfinite_layer(bx);
                if (layer.empty()) layer = "(loss)";
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                           " step " + std::to_string(step) +
                                           ", first offending layer: " + layer,
                                       layer);
            }
            loss_sum += loss.value * static_cast<double>(end - begin);
            model.backward(loss.grad);

            opt.step(lr, cfg.lambda, cfg.freeze_thresholds);
            if (global && !cfg.freeze_thresholds) {
                master_grad[0] = 0.0;
                for (StrWeightLayer* l : str_layers) {
                    // gradient tensors were collected per layer; re-read them
                    std::vector<ParamRef> lp;
                    dynamic_cast<Layer*>(l)->collect_params(lp);
                    for (const ParamRef& p : lp)
                        if (p.is_threshold) master_grad[0] += (*p.grad)[0];
                }
                sgd_step(master_s, master_grad, master_vel, lr, cfg.lambda, cfg.momentum);
                for (StrWeightLayer* l : str_layers) l->str_param().s[0] = master_s[0];
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.loss = loss_sum / static_cast<double>(n);
        log.accuracy = data.regression ? 0.0 : acc_sum / static_cast<double>(n);
        log.sparsity = model_sparsity(model);
        log.alphas = layer_alphas(model);
        report.epochs.push_back(log);
    }

    if (!report.epochs.empty()) {
        report.final_loss = report.epochs.back().loss;
        report.final_accuracy = report.epochs.back().accuracy;
        report.final_sparsity = report.epochs.back().sparsity;
    }
    return report;
}

TrainReport train_fastgrnn(LowRankFastGRNN& cell, const SeqDataset& data,
                           const TrainConfig& cfg,
                           std::vector<std::pair<std::int64_t, std::int64_t>>* rank_trajectory) {
    cfg.validate();
    const std::int64_t n = static_cast<std::int64_t>(data.sequences.size());
    if (n == 0) throw std::invalid_argument("train_fastgrnn: empty dataset");

    if (cfg.freeze_thresholds) cell.freeze_masks_dense();

    std::vector<ParamRef> params;
    cell.collect_params(params);
    if (cfg.freeze_thresholds) {
        std::vector<ParamRef> kept;
        for (const ParamRef& p : params)
            if (!p.is_threshold) kept.push_back(p);
        params = kept;
    }
    SgdMomentum opt(params, cfg.momentum);

    const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const std::int64_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;

    Rng rng(cfg.seed);
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    TrainReport report;
    report.layer_names = {"mW", "mU"};

    std::int64_t step = 0;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(perm);
        double loss_sum = 0, acc_sum = 0;
        for (std::int64_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++step) {
            const std::int64_t bend = std::min(n, b0 + cfg.batch_size);
            const double bs = static_cast<double>(bend - b0);
            const double lr = cosine_lr(step, total_steps, warmup_steps, cfg.base_lr);
            cell.zero_grads();
            for (std::int64_t i = b0; i < bend; ++i) {
                const std::int64_t idx = perm[static_cast<std::size_t>(i)];
                const Tensor& seq = data.sequences[static_cast<std::size_t>(idx)];
                const std::vector<int> label = {data.labels[static_cast<std::size_t>(idx)]};
                const Tensor logits = cell.forward(seq);
                LossResult loss = softmax_cross_entropy(logits, label);
                if (!std::isfinite(loss.value))
                    throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                               " step " + std::to_string(step) +
                                               ", first offending layer: rnn",
                                           "rnn");
                loss_sum += loss.value;
                acc_sum += accuracy(logits, label);
                cell.backward(scale(loss.grad, 1.0 / bs));
            }
            opt.step(lr, cfg.lambda, cfg.freeze_thresholds);
        }

        const auto [rw, ru] = cell.effective_rank();
        if (rank_trajectory != nullptr) rank_trajectory->emplace_back(rw, ru);
        EpochLog log;
        log.epoch = epoch;
        log.loss = loss_sum / static_cast<double>(n);
        log.accuracy = acc_sum / static_cast<double>(n);
        const Tensor mw = cell.mask_w();
        const Tensor mu = cell.mask_u();
        log.sparsity = 1.0 - static_cast<double>(nonzero_count(mw) + nonzero_count(mu)) /
                                 static_cast<double>(mw.numel() + mu.numel());
        log.alphas = {mean_alpha(cell.w_param()), mean_alpha(cell.u_param())};
        report.epochs.push_back(log);
    }

    if (!report.epochs.empty()) {
        report.final_loss = report.epochs.back().loss;
        report.final_accuracy = report.epochs.back().accuracy;
        report.final_sparsity = report.epochs.back().sparsity;
    }
    return report;
}

double evaluate_accuracy(Sequential& model, const Dataset& data) {
    const Tensor out = model.forward(data.inputs);
    return accuracy(out, data.labels);
}

double evaluate_accuracy(LowRankFastGRNN& cell, const SeqDataset& data) {
    double acc = 0;
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        const Tensor logits = cell.forward(data.sequences[i]);
        acc += accuracy(logits, {data.labels[i]});
    }
    return acc / static_cast<double>(data.sequences.size());
}

}  // namespace strs
