#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strsparse/layers.hpp"

namespace strs {

/// Static description of one parameterized layer (or the final average
/// pool). One multiply-add counts as one FLOP; batch-norm is excluded.
struct LayerSpec {
    enum class Kind { kConv, kDepthwiseConv, kFc, kAvgPool };
    std::string name;
    Kind kind = Kind::kConv;
    std::int64_t in_channels = 0, out_channels = 0;
    std::int64_t kernel_h = 0, kernel_w = 0;
    std::int64_t stride = 1, padding = 0, groups = 1;
    std::int64_t output_h = 1, output_w = 1;
};

std::string to_string(LayerSpec::Kind kind);
LayerSpec::Kind layer_kind_from_string(const std::string& s);

/// Dense parameter count: kh*kw*(in/groups)*out for convs, in*out for fc,
/// 0 for pooling.
std::int64_t layer_params(const LayerSpec& spec);

/// Dense FLOPs: output_h*output_w*params for conv/fc (fc output is 1x1);
/// one FLOP per input element for the average pool.
std::int64_t layer_flops_dense(const LayerSpec& spec);

/// The 54 parameter layers of ResNet50 plus the final average pool, row for
/// row the published accounting table.
std::vector<LayerSpec> arch_resnet50();

/// The 28 parameter layers of MobileNetV1. The published overall FLOPs for
/// this architecture do not include the final average pool, so no pool row
/// is emitted here.
std::vector<LayerSpec> arch_mobilenetv1();

/// Layer specs from a CSV file with header
/// name,kind,in_channels,out_channels,kernel_h,kernel_w,stride,padding,groups,output_h,output_w
std::vector<LayerSpec> load_arch_file(const std::string& path);

struct BudgetRow {
    std::string name;
    std::int64_t dense_params = 0;
    std::int64_t nonzeros = 0;
    double sparsity_pct = 0;
    std::int64_t dense_flops = 0;
    double sparse_flops = 0;
};

struct BudgetReport {
    std::vector<BudgetRow> rows;
    std::int64_t total_params = 0, total_flops = 0;
    std::int64_t total_nonzeros = 0;
    double total_sparse_flops = 0;
    double overall_sparsity_pct = 0;
    // all parameterized layers except the final fc
    std::int64_t backbone_params = 0, backbone_flops = 0;
    std::int64_t backbone_nonzeros = 0;
    double backbone_sparsity_pct = 0;

    std::string to_table() const;
};

/// Accounting for the given per-layer sparsity percentages; each row gets
/// nonzeros = round(params*(100-s)/100) and sparse FLOPs = flops*(100-s)/100.
BudgetReport report(const std::vector<LayerSpec>& specs,
                    const std::vector<double>& sparsity_pcts);

/// Same with sparsity measured from the model's effective weights.
BudgetReport report_from_model(Sequential& model);

/// Specs derived from a model's STR layers (inputs must have been shaped by
/// construction; spatial sizes are resolved by a dry forward pass over
/// `example_input`).
std::vector<LayerSpec> model_specs(Sequential& model, const Tensor& example_input);

/// CSV with header layer,dense_params,nonzeros,sparsity_pct,dense_flops,sparse_flops.
void export_budget(const BudgetReport& rep, const std::string& path);
std::string budget_to_csv(const BudgetReport& rep);

/// Reads the sparsity_pct column keyed by layer name, in spec order.
/// Missing layers and malformed rows raise errors naming the layer / line.
std::vector<double> import_budget(const std::string& path,
                                  const std::vector<LayerSpec>& specs);
std::vector<double> import_budget_csv(const std::string& content,
                                      const std::vector<LayerSpec>& specs);

}  // namespace strs
