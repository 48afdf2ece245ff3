#include "strsparse/train.hpp"

#include <cmath>

#include "doctest.h"
#include "strsparse/datasets.hpp"
#include "strsparse/rng.hpp"
#include "testutil.hpp"

using namespace strs;
using test::random_tensor;

namespace {

/// Reference dense MLP trainer, written against plain tensors only — no STR
/// code on any path. Mirrors the arithmetic order of the production loop so
/// the dense-limit comparison can be exact.
struct DenseRefTrainer {
    Tensor w1, w2, v1, v2;

    static double relu_mask(double x, double g) { return x > 0.0 ? g : 0.0; }

    void sgd(Tensor& w, Tensor& v, const Tensor& g, double lr, double wd, double mom) {
        for (std::int64_t i = 0; i < w.numel(); ++i) {
            const double step = g[i] + wd * w[i];
            const double vel = mom * v[i] + step;
            v[i] = vel;
            w[i] = w[i] - lr * vel;
        }
    }

    void run(const Dataset& data, const TrainConfig& cfg, std::int64_t max_steps) {
        v1 = Tensor(w1.shape());
        v2 = Tensor(w2.shape());
        const std::int64_t n = data.size();
        const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
        const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
        const std::int64_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;
        Rng rng(cfg.seed);
        std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        std::int64_t step = 0;
        for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            rng.shuffle(perm);
            for (std::int64_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++step) {
                if (step >= max_steps) return;
                const std::int64_t bend = std::min(n, b0 + cfg.batch_size);
                const std::int64_t bs = bend - b0;
                const double lr = cosine_lr(step, total_steps, warmup_steps, cfg.base_lr);
                Tensor x({bs, data.inputs.dim(1)});
                std::vector<int> labels(static_cast<std::size_t>(bs));
                for (std::int64_t i = 0; i < bs; ++i) {
                    const std::int64_t src = perm[static_cast<std::size_t>(b0 + i)];
                    std::copy(data.inputs.data() + src * x.dim(1),
                              data.inputs.data() + (src + 1) * x.dim(1),
                              x.data() + i * x.dim(1));
                    labels[static_cast<std::size_t>(i)] =
                        data.labels[static_cast<std::size_t>(src)];
                }
                // forward
                const Tensor a1 = matmul(x, transpose(w1));
                const Tensor h = relu(a1);
                const Tensor logits = matmul(h, transpose(w2));
                // softmax CE grad
                Tensor glog(logits.shape());
                const std::int64_t classes = logits.dim(1);
                for (std::int64_t b = 0; b < bs; ++b) {
                    const double* row = logits.data() + b * classes;
                    double mx = row[0];
                    for (std::int64_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
                    double z = 0;
                    for (std::int64_t k = 0; k < classes; ++k) z += std::exp(row[k] - mx);
                    for (std::int64_t k = 0; k < classes; ++k) {
                        const double p = std::exp(row[k] - mx) / z;
                        glog.at2(b, k) =
                            (p - (k == labels[static_cast<std::size_t>(b)] ? 1.0 : 0.0)) /
                            static_cast<double>(bs);
                    }
                }
                // backward
                const Tensor gw2 = matmul(transpose(glog), h);
                const Tensor gh = matmul(glog, w2);
                Tensor ga1(gh.shape());
                for (std::int64_t i = 0; i < gh.numel(); ++i)
                    ga1[i] = relu_mask(a1[i], gh[i]);
                const Tensor gw1 = matmul(transpose(ga1), x);
                sgd(w2, v2, gw2, lr, cfg.lambda, cfg.momentum);
                sgd(w1, v1, gw1, lr, cfg.lambda, cfg.momentum);
            }
        }
    }
};

}  // namespace

TEST_CASE("dense-limit training is bitwise identical to the dense reference") {
    const Dataset data = make_blobs(40, 3, 8, 0.4, 555);

    TrainConfig cfg;
    cfg.lambda = 1e-4;
    cfg.base_lr = 0.1;
    cfg.momentum = 0.9;
    cfg.batch_size = 12;
    cfg.epochs = 1;
    cfg.warmup_epochs = 0;
    cfg.seed = 9;
    cfg.freeze_thresholds = true;

    Rng init(77);
    StrOptions opt;
    Sequential model = make_mlp(8, {10}, 3, opt, init);
    std::vector<ParamRef> params = model.params();

    DenseRefTrainer ref;
    ref.w1 = *params[0].value;
    ref.w2 = *params[2].value;

    train(model, data, cfg);  // 120/12 = 10 steps
    ref.run(data, cfg, 10);

    for (std::int64_t i = 0; i < ref.w1.numel(); ++i) CHECK((*params[0].value)[i] == ref.w1[i]);
    for (std::int64_t i = 0; i < ref.w2.numel(); ++i) CHECK((*params[2].value)[i] == ref.w2[i]);
}

TEST_CASE("training is deterministic given the seed") {
    const Dataset data = make_blobs(20, 3, 8, 0.4, 556);
    TrainConfig cfg;
    cfg.lambda = 0.01;
    cfg.epochs = 3;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 16;
    cfg.seed = 4;

    auto run_once = [&]() {
        Rng init(5);
        StrOptions opt;
        opt.s_init = cfg.s_init;
        Sequential model = make_mlp(8, {12}, 3, opt, init);
        return train(model, data, cfg).to_csv();
    };
    const std::string a = run_once();
    const std::string b = run_once();
    CHECK(a == b);

    TrainConfig other = cfg;
    other.seed = 5;
    Rng init(5);
    StrOptions opt;
    Sequential model = make_mlp(8, {12}, 3, opt, init);
    CHECK(train(model, data, other).to_csv() != a);
}

TEST_CASE("lambda=0 with thresholds pinned at zero trains dense") {
    const Dataset data = make_blobs(20, 3, 8, 0.4, 557);
    TrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.epochs = 2;
    cfg.warmup_epochs = 0;
    cfg.seed = 6;
    cfg.freeze_thresholds = true;
    Rng init(7);
    StrOptions opt;
    Sequential model = make_mlp(8, {12}, 3, opt, init);
    const TrainReport rep = train(model, data, cfg);
    CHECK(rep.final_sparsity == 0.0);
}

TEST_CASE("no weight decay leaves thresholds without pressure to grow") {
    const Dataset data = make_blobs(40, 3, 16, 0.4, 563);
    TrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.s_init = -8.0;
    cfg.epochs = 25;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 24;
    cfg.seed = 7;
    Rng init(8);
    StrOptions opt;
    opt.s_init = cfg.s_init;
    Sequential model = make_mlp(16, {24}, 3, opt, init);
    const TrainReport rep = train(model, data, cfg);
    CHECK(rep.final_sparsity < 0.05);
}

TEST_CASE("weight decay pressure grows thresholds and sparsity") {
    const Dataset data = make_blobs(40, 3, 16, 0.4, 558);
    TrainConfig cfg;
    cfg.lambda = 0.05;
    cfg.s_init = -6.0;
    cfg.epochs = 25;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 24;
    cfg.seed = 7;
    Rng init(8);
    StrOptions opt;
    opt.s_init = cfg.s_init;
    Sequential model = make_mlp(16, {24}, 3, opt, init);
    const TrainReport rep = train(model, data, cfg);
    CHECK(rep.final_sparsity > 0.05);
    // alpha moved up from its initial value
    CHECK(rep.epochs.back().alphas[0] > g_eval({}, cfg.s_init));
}

TEST_CASE("global granularity keeps all layer thresholds equal") {
    const Dataset data = make_blobs(20, 3, 8, 0.4, 559);
    TrainConfig cfg;
    cfg.lambda = 0.02;
    cfg.epochs = 4;
    cfg.warmup_epochs = 1;
    cfg.seed = 8;
    Rng init(9);
    StrOptions opt;
    opt.granularity = Granularity::kGlobal;
    opt.s_init = cfg.s_init;
    Sequential model = make_mlp(8, {12, 12}, 3, opt, init);
    const TrainReport rep = train(model, data, cfg);
    for (const EpochLog& e : rep.epochs) {
        REQUIRE(e.alphas.size() == 3);
        CHECK(e.alphas[0] == e.alphas[1]);
        CHECK(e.alphas[1] == e.alphas[2]);
    }
    // and the shared threshold actually moved
    CHECK(rep.epochs.back().alphas[0] != rep.epochs.front().alphas[0]);
}

TEST_CASE("diverging training aborts naming the offending layer") {
    const Dataset data = make_blobs(20, 3, 8, 0.4, 560);
    TrainConfig cfg;
    cfg.base_lr = 1e18;  // compounding decay term overflows within ~20 steps
    cfg.lambda = 0.01;
    cfg.batch_size = 16;
    cfg.epochs = 12;
    cfg.warmup_epochs = 1;
    cfg.seed = 10;
    Rng init(11);
    StrOptions opt;
    Sequential model = make_mlp(8, {12}, 3, opt, init);
    CHECK_THROWS_AS(train(model, data, cfg), TrainingDiverged);
}

TEST_CASE("pruned weights decay exactly multiplicatively over one step") {
    Rng rng(61);
    // thresholds prune roughly half the weights
    StrLinear lin("fc", 8, 6,
                  StrParam::make(Granularity::kPerLayer, Tensor({6, 8}), -0.8, {}));
    lin.init_weights(rng);
    const double alpha = g_eval({}, -0.8);
    const Tensor before = lin.weight();
    const Tensor eff = lin.effective_weight();
    REQUIRE(sparsity(eff) > 0.0);

    const Tensor x = random_tensor({4, 8}, rng);
    lin.zero_grads();
    lin.forward(x);
    lin.backward(random_tensor({4, 6}, rng));

    std::vector<ParamRef> params;
    lin.collect_params(params);
    SgdMomentum opt(params, 0.9);  // fresh velocity: momentum is inert this step
    const double lr = 0.5, lambda = 0.25;  // powers of two round exactly
    opt.step(lr, lambda);

    for (std::int64_t i = 0; i < before.numel(); ++i) {
        if (eff[i] == 0.0 && std::fabs(before[i]) < alpha) {
            CHECK(lin.weight()[i] == (1.0 - lr * lambda) * before[i]);
        }
    }
}

TEST_CASE("epoch sparsity equals the accounting on the same weights") {
    const Dataset data = make_blobs(20, 3, 8, 0.4, 561);
    TrainConfig cfg;
    cfg.lambda = 0.05;
    cfg.epochs = 6;
    cfg.warmup_epochs = 1;
    cfg.seed = 12;
    Rng init(13);
    StrOptions opt;
    opt.s_init = cfg.s_init;
    Sequential model = make_mlp(8, {12}, 3, opt, init);
    const TrainReport rep = train(model, data, cfg);
    // recompute from the final weights: single source of truth
    CHECK(rep.final_sparsity == model_sparsity(model));
}

TEST_CASE("csv report carries one alpha column per layer") {
    const Dataset data = make_blobs(10, 2, 4, 0.3, 562);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.warmup_epochs = 0;
    cfg.seed = 13;
    Rng init(14);
    StrOptions opt;
    Sequential model = make_mlp(4, {6}, 2, opt, init);
    const TrainReport rep = train(model, data, cfg);
    const std::string csv = rep.to_csv();
    CHECK(csv.find("epoch,loss,accuracy,sparsity,alpha_fc1,alpha_fc2") == 0);
    // one header plus one line per epoch
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 3);
}

TEST_CASE("per-channel and per-weight granularities train end to end") {
    const Dataset data = make_blobs(30, 3, 12, 0.4, 564);
    for (Granularity g : {Granularity::kPerChannel, Granularity::kPerWeight}) {
        TrainConfig cfg;
        cfg.lambda = 0.05;
        cfg.s_init = -6.0;
        cfg.epochs = 15;
        cfg.warmup_epochs = 1;
        cfg.batch_size = 30;
        cfg.seed = 20;
        Rng init(21);
        StrOptions opt;
        opt.granularity = g;
        opt.s_init = cfg.s_init;
        Sequential model = make_mlp(12, {16}, 3, opt, init);
        const TrainReport rep = train(model, data, cfg);
        CAPTURE(to_string(g));
        CHECK(rep.final_sparsity > 0.0);
        CHECK(rep.final_sparsity < 1.0);
        CHECK(std::isfinite(rep.final_loss));
        // threshold state kept its per-granularity shape through training
        const auto layers = model.str_layers();
        if (g == Granularity::kPerChannel)
            CHECK(layers[0]->str_param().s.shape() == std::vector<std::int64_t>{16});
        else
            CHECK(layers[0]->str_param().s.same_shape(layers[0]->weight()));
    }
}
