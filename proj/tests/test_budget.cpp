#include "strsparse/budget.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "strsparse/rng.hpp"

using namespace strs;

TEST_CASE("layer accounting formulas") {
    LayerSpec conv;
    conv.kind = LayerSpec::Kind::kConv;
    conv.in_channels = 3;
    conv.out_channels = 64;
    conv.kernel_h = conv.kernel_w = 7;
    conv.output_h = conv.output_w = 112;
    CHECK(layer_params(conv) == 9408);
    CHECK(layer_flops_dense(conv) == 118013952);

    LayerSpec fc;
    fc.kind = LayerSpec::Kind::kFc;
    fc.in_channels = 2048;
    fc.out_channels = 1000;
    CHECK(layer_params(fc) == 2048000);
    CHECK(layer_flops_dense(fc) == 2048000);

    LayerSpec ap;
    ap.kind = LayerSpec::Kind::kAvgPool;
    ap.in_channels = 2048;
    ap.output_h = ap.output_w = 7;
    CHECK(layer_params(ap) == 0);
    CHECK(layer_flops_dense(ap) == 100352);

    LayerSpec dw;
    dw.kind = LayerSpec::Kind::kDepthwiseConv;
    dw.in_channels = dw.out_channels = dw.groups = 32;
    dw.kernel_h = dw.kernel_w = 3;
    dw.output_h = dw.output_w = 112;
    CHECK(layer_params(dw) == 288);
    CHECK(layer_flops_dense(dw) == 3612672);
}

TEST_CASE("resnet50 totals and structure") {
    const auto specs = arch_resnet50();
    REQUIRE(specs.size() == 55);  // 54 parameter layers + the average pool
    std::int64_t params = 0, flops = 0;
    for (const auto& s : specs) {
        params += layer_params(s);
        flops += layer_flops_dense(s);
    }
    CHECK(params == 25502912);
    CHECK(flops == 4089284608);
    CHECK(specs[0].name == "conv1");
    CHECK(layer_params(specs[1]) == 4096);          // layer1.0.conv1
    CHECK(layer_flops_dense(specs[1]) == 12845056);
    CHECK(specs[53].name == "fc");
    CHECK(specs[54].kind == LayerSpec::Kind::kAvgPool);

    const BudgetReport rep = report(specs, std::vector<double>(specs.size(), 0.0));
    CHECK(rep.total_params == 25502912);
    CHECK(rep.total_flops == 4089284608);
    CHECK(rep.backbone_params == 23454912);
    CHECK(rep.backbone_flops == 4087136256);
    CHECK(rep.backbone_params + 2048000 == rep.total_params);
}

TEST_CASE("mobilenetv1 totals and structure") {
    const auto specs = arch_mobilenetv1();
    REQUIRE(specs.size() == 28);
    std::int64_t params = 0, flops = 0;
    for (const auto& s : specs) {
        params += layer_params(s);
        flops += layer_flops_dense(s);
    }
    CHECK(params == 4209088);
    CHECK(flops == 568740352);
    CHECK(layer_params(specs[1]) == 288);  // first depthwise layer
    CHECK(specs[1].kind == LayerSpec::Kind::kDepthwiseConv);
    CHECK(layer_flops_dense(specs[1]) == 3612672);
    const BudgetReport rep = report(specs, std::vector<double>(28, 0.0));
    CHECK(rep.backbone_params == 3185088);
}

TEST_CASE("report applies the sparse-FLOPs formula") {
    const auto specs = arch_resnet50();
    std::vector<double> pcts(specs.size(), 0.0);
    const BudgetReport dense = report(specs, pcts);
    CHECK(dense.total_sparse_flops == static_cast<double>(dense.total_flops));
    CHECK(dense.total_nonzeros == dense.total_params);
    CHECK(dense.overall_sparsity_pct == 0.0);

    // single layer at 100%: its sparse flops vanish
    pcts[0] = 100.0;
    const BudgetReport one = report(specs, pcts);
    CHECK(one.rows[0].sparse_flops == 0.0);
    CHECK(one.rows[0].nonzeros == 0);

    // linear in (100 - s): halving the density halves sparse flops
    pcts[0] = 50.0;
    const BudgetReport half = report(specs, pcts);
    pcts[0] = 75.0;
    const BudgetReport quarter = report(specs, pcts);
    CHECK(quarter.rows[0].sparse_flops == 0.5 * half.rows[0].sparse_flops);

    CHECK_THROWS(report(specs, std::vector<double>(3, 0.0)));
    pcts[0] = 101.0;
    CHECK_THROWS(report(specs, pcts));
}

TEST_CASE("budget csv round-trips at full precision") {
    const auto specs = arch_mobilenetv1();
    Rng rng(71);
    std::vector<double> pcts;
    for (std::size_t i = 0; i < specs.size(); ++i) pcts.push_back(rng.uniform(0.0, 99.9));
    const BudgetReport rep = report(specs, pcts);
    const std::string csv = budget_to_csv(rep);
    const std::vector<double> back = import_budget_csv(csv, specs);
    REQUIRE(back.size() == pcts.size());
    for (std::size_t i = 0; i < pcts.size(); ++i) CHECK(back[i] == pcts[i]);
}

TEST_CASE("budget import failures name the problem") {
    const auto specs = arch_mobilenetv1();
    const std::string header = "layer,dense_params,nonzeros,sparsity_pct,dense_flops,sparse_flops";
    CHECK_THROWS_WITH_AS(import_budget_csv("bogus\n", specs), doctest::Contains("header"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(import_budget_csv(header + "\nlayer1,864,864,0,10838016\n", specs),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(import_budget_csv(header + "\nlayer1,864,864,abc,10838016,0\n", specs),
                         doctest::Contains("line 2"), std::runtime_error);
    // missing layer is named
    CHECK_THROWS_WITH_AS(import_budget_csv(header + "\nlayer1,864,864,0,10838016,10838016\n",
                                           specs),
                         doctest::Contains("layer2"), std::runtime_error);
}

TEST_CASE("architecture file round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "strsparse_test_arch";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "tiny.csv").string();
    {
        std::ofstream out(path);
        out << "name,kind,in_channels,out_channels,kernel_h,kernel_w,stride,padding,groups,"
               "output_h,output_w\n";
        out << "c1,conv,3,16,3,3,2,1,1,8,8\n";
        out << "c2,depthwise-conv,16,16,3,3,1,1,16,8,8\n";
        out << "head,fc,1024,10,1,1,1,0,1,1,1\n";
    }
    const auto specs = load_arch_file(path);
    REQUIRE(specs.size() == 3);
    CHECK(layer_params(specs[0]) == 3 * 16 * 9);
    CHECK(layer_params(specs[1]) == 16 * 9);
    CHECK(layer_params(specs[2]) == 10240);
    CHECK(layer_flops_dense(specs[0]) == 64 * 432);

    std::ofstream bad(path);
    bad << "wrong header\n";
    bad.close();
    CHECK_THROWS_WITH_AS(load_arch_file(path), doctest::Contains("header"), std::runtime_error);
}

TEST_CASE("report_from_model measures actual weights") {
    Rng rng(72);
    StrOptions opt;
    opt.s_init = -1e9;
    Sequential model = make_mlp(6, {8}, 3, opt, rng);
    model.forward(Tensor({1, 6}));
    const BudgetReport dense = report_from_model(model);
    REQUIRE(dense.rows.size() == 2);
    for (const auto& row : dense.rows) {
        CHECK(row.sparsity_pct == 0.0);
        CHECK(row.nonzeros == row.dense_params);
    }
    CHECK(dense.overall_sparsity_pct == 0.0);

    // fully prune the first layer: its row reads 100%
    model.str_layers()[0]->str_param().s[0] = 1e9;
    const BudgetReport pruned = report_from_model(model);
    CHECK(pruned.rows[0].sparsity_pct == 100.0);
    CHECK(pruned.rows[0].nonzeros == 0);
    CHECK(pruned.rows[1].sparsity_pct == 0.0);

    // agrees with report() fed the measured sparsities
    std::vector<LayerSpec> specs;
    std::vector<double> pcts;
    for (const auto& row : pruned.rows) {
        LayerSpec s;
        s.name = row.name;
        s.kind = LayerSpec::Kind::kFc;
        s.out_channels = 1;
        s.in_channels = row.dense_params;
        pcts.push_back(row.sparsity_pct);
        specs.push_back(std::move(s));
    }
    const BudgetReport direct = report(specs, pcts);
    CHECK(direct.total_nonzeros == pruned.total_nonzeros);
    CHECK(direct.overall_sparsity_pct == doctest::Approx(pruned.overall_sparsity_pct));
}
