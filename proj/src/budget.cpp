#include "strsparse/budget.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace strs {

std::string to_string(LayerSpec::Kind kind) {
    switch (kind) {
        case LayerSpec::Kind::kConv: return "conv";
        case LayerSpec::Kind::kDepthwiseConv: return "depthwise-conv";
        case LayerSpec::Kind::kFc: return "fc";
        case LayerSpec::Kind::kAvgPool: return "avgpool";
    }
    return "?";
}

LayerSpec::Kind layer_kind_from_string(const std::string& s) {
    if (s == "conv") return LayerSpec::Kind::kConv;
    if (s == "depthwise-conv" || s == "dw-conv" || s == "dw") return LayerSpec::Kind::kDepthwiseConv;
    if (s == "fc") return LayerSpec::Kind::kFc;
    if (s == "avgpool") return LayerSpec::Kind::kAvgPool;
    throw std::invalid_argument("unknown layer kind: " + s);
}

std::int64_t layer_params(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerSpec::Kind::kConv:
        case LayerSpec::Kind::kDepthwiseConv:
            return spec.kernel_h * spec.kernel_w * (spec.in_channels / spec.groups) *
                   spec.out_channels;
        case LayerSpec::Kind::kFc:
            return spec.in_channels * spec.out_channels;
        case LayerSpec::Kind::kAvgPool:
            return 0;
    }
    return 0;
}

std::int64_t layer_flops_dense(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerSpec::Kind::kConv:
        case LayerSpec::Kind::kDepthwiseConv:
        case LayerSpec::Kind::kFc:
            return spec.output_h * spec.output_w * layer_params(spec);
        case LayerSpec::Kind::kAvgPool:
            // one FLOP per pooled input element
            return spec.output_h * spec.output_w * spec.in_channels;
    }
    return 0;
}

namespace {

LayerSpec conv_spec(std::string name, std::int64_t in_ch, std::int64_t out_ch, std::int64_t k,
                    std::int64_t stride, std::int64_t out_hw, std::int64_t groups = 1) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = groups == in_ch && groups > 1 ? LayerSpec::Kind::kDepthwiseConv
                                           : LayerSpec::Kind::kConv;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_h = s.kernel_w = k;
    s.stride = stride;
    s.padding = k / 2;
    s.groups = groups;
    s.output_h = s.output_w = out_hw;
    return s;
}

LayerSpec fc_spec(std::string name, std::int64_t in, std::int64_t out) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerSpec::Kind::kFc;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_h = s.kernel_w = 1;
    s.output_h = s.output_w = 1;
    return s;
}

LayerSpec avgpool_spec(std::string name, std::int64_t channels, std::int64_t hw) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerSpec::Kind::kAvgPool;
    s.in_channels = channels;
    s.out_channels = channels;
    s.output_h = s.output_w = hw;  // pooled input extent
    return s;
}

}  // namespace

std::vector<LayerSpec> arch_resnet50() {
    std::vector<LayerSpec> specs;
    specs.push_back(conv_spec("conv1", 3, 64, 7, 2, 112));
    struct Stage {
        std::string prefix;
        int blocks;
        std::int64_t mid, out, hw;
    };
    // stride 2 sits on conv2 of the first block of stages 2-4
    const Stage stages[] = {
        {"layer1", 3, 64, 256, 56},
        {"layer2", 4, 128, 512, 28},
        {"layer3", 6, 256, 1024, 14},
        {"layer4", 3, 512, 2048, 7},
    };
    std::int64_t in_ch = 64;
    std::int64_t in_hw = 56;
    for (const Stage& st : stages) {
        for (int b = 0; b < st.blocks; ++b) {
            const std::string p = st.prefix + "." + std::to_string(b);
            const std::int64_t block_in = b == 0 ? in_ch : st.out;
            const std::int64_t conv1_hw = b == 0 ? in_hw : st.hw;
            specs.push_back(conv_spec(p + ".conv1", block_in, st.mid, 1, 1, conv1_hw));
            specs.push_back(conv_spec(p + ".conv2", st.mid, st.mid, 3,
                                      b == 0 && conv1_hw != st.hw ? 2 : 1, st.hw));
            specs.push_back(conv_spec(p + ".conv3", st.mid, st.out, 1, 1, st.hw));
            if (b == 0)
                specs.push_back(conv_spec(p + ".downsample.0", block_in, st.out, 1,
                                          conv1_hw != st.hw ? 2 : 1, st.hw));
        }
        in_ch = st.out;
        in_hw = st.hw;
    }
    specs.push_back(fc_spec("fc", 2048, 1000));
    specs.push_back(avgpool_spec("avgpool", 2048, 7));
    return specs;
}

std::vector<LayerSpec> arch_mobilenetv1() {
    std::vector<LayerSpec> specs;
    specs.push_back(conv_spec("layer1", 3, 32, 3, 2, 112));
    struct Pair {
        std::int64_t in, out, out_hw;
        bool down;  // stride-2 depthwise
    };
    const Pair pairs[] = {
        {32, 64, 112, false},  {64, 128, 56, true},   {128, 128, 56, false},
        {128, 256, 28, true},  {256, 256, 28, false}, {256, 512, 14, true},
        {512, 512, 14, false}, {512, 512, 14, false}, {512, 512, 14, false},
        {512, 512, 14, false}, {512, 512, 14, false}, {512, 1024, 7, true},
        {1024, 1024, 7, false},
    };
    int layer = 2;
    for (const Pair& pr : pairs) {
        specs.push_back(conv_spec("layer" + std::to_string(layer) + ".dw", pr.in, pr.in, 3,
                                  pr.down ? 2 : 1, pr.out_hw, pr.in));
        ++layer;
        specs.push_back(
            conv_spec("layer" + std::to_string(layer) + ".pw", pr.in, pr.out, 1, 1, pr.out_hw));
        ++layer;
    }
    specs.push_back(fc_spec("fc", 1024, 1000));
    return specs;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::int64_t parse_int_field(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" +
                                 s + "'");
    }
}

double parse_double_field(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" +
                                 s + "'");
    }
}

}  // namespace

std::vector<LayerSpec> load_arch_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open architecture file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty architecture file");
    const std::string header =
        "name,kind,in_channels,out_channels,kernel_h,kernel_w,stride,padding,groups,output_h,"
        "output_w";
    if (line != header && line != header + "\r")
        throw std::runtime_error(path + ": line 1: expected header '" + header + "'");
    std::vector<LayerSpec> specs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 11)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected 11 fields, got " + std::to_string(f.size()));
        LayerSpec s;
        s.name = f[0];
        s.kind = layer_kind_from_string(f[1]);
        s.in_channels = parse_int_field(f[2], line_no, "in_channels");
        s.out_channels = parse_int_field(f[3], line_no, "out_channels");
        s.kernel_h = parse_int_field(f[4], line_no, "kernel_h");
        s.kernel_w = parse_int_field(f[5], line_no, "kernel_w");
        s.stride = parse_int_field(f[6], line_no, "stride");
        s.padding = parse_int_field(f[7], line_no, "padding");
        s.groups = parse_int_field(f[8], line_no, "groups");
        s.output_h = parse_int_field(f[9], line_no, "output_h");
        s.output_w = parse_int_field(f[10], line_no, "output_w");
        specs.push_back(std::move(s));
    }
    return specs;
}

BudgetReport report(const std::vector<LayerSpec>& specs,
                    const std::vector<double>& sparsity_pcts) {
    if (specs.size() != sparsity_pcts.size())
        throw std::invalid_argument("report: " + std::to_string(specs.size()) +
                                    " layers but " + std::to_string(sparsity_pcts.size()) +
                                    " sparsity values");
    BudgetReport rep;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const double s = sparsity_pcts[i];
        if (s < 0.0 || s > 100.0)
            throw std::invalid_argument("report: sparsity " + std::to_string(s) +
                                        " for layer '" + specs[i].name +
                                        "' outside [0,100]");
        BudgetRow row;
        row.name = specs[i].name;
        row.dense_params = layer_params(specs[i]);
        row.dense_flops = layer_flops_dense(specs[i]);
        row.sparsity_pct = s;
        row.nonzeros =
            std::llround(static_cast<double>(row.dense_params) * (100.0 - s) / 100.0);
        row.sparse_flops = static_cast<double>(row.dense_flops) * (100.0 - s) / 100.0;
        rep.rows.push_back(row);

        rep.total_params += row.dense_params;
        rep.total_flops += row.dense_flops;
        rep.total_nonzeros += row.nonzeros;
        rep.total_sparse_flops += row.sparse_flops;
        const bool backbone =
            specs[i].kind != LayerSpec::Kind::kFc && specs[i].kind != LayerSpec::Kind::kAvgPool;
        if (backbone) {
            rep.backbone_params += row.dense_params;
            rep.backbone_flops += row.dense_flops;
        }
    }
    if (rep.total_params > 0)
        rep.overall_sparsity_pct =
            100.0 * (1.0 - static_cast<double>(rep.total_nonzeros) /
                               static_cast<double>(rep.total_params));
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (specs[i].kind != LayerSpec::Kind::kFc &&
            specs[i].kind != LayerSpec::Kind::kAvgPool)
            rep.backbone_nonzeros += rep.rows[i].nonzeros;
    if (rep.backbone_params > 0)
        rep.backbone_sparsity_pct =
            100.0 * (1.0 - static_cast<double>(rep.backbone_nonzeros) /
                               static_cast<double>(rep.backbone_params));
    return rep;
}

std::vector<LayerSpec> model_specs(Sequential& model, const Tensor& example_input) {
    // Walk the layers with a live activation so conv output extents are known.
    std::vector<LayerSpec> specs;
    Tensor cur = example_input;
    for (std::size_t i = 0; i < model.size(); ++i) {
        Layer& l = model.layer(i);
        Tensor next = l.forward(cur);
        if (auto* lin = dynamic_cast<StrLinear*>(&l)) {
            specs.push_back(fc_spec(lin->layer_name(), lin->in_features(), lin->out_features()));
        } else if (auto* conv = dynamic_cast<StrConv*>(&l)) {
            LayerSpec s;
            s.name = conv->layer_name();
            s.kind = conv->kind() == "depthwise-conv" ? LayerSpec::Kind::kDepthwiseConv
                                                      : LayerSpec::Kind::kConv;
            s.in_channels = conv->in_channels();
            s.out_channels = conv->out_channels();
            s.kernel_h = s.kernel_w = conv->kernel_size();
            s.stride = conv->stride();
            s.padding = conv->padding();
            s.groups = conv->groups();
            s.output_h = next.dim(2);
            s.output_w = next.dim(3);
            specs.push_back(std::move(s));
        }
        cur = next;
    }
    return specs;
}

BudgetReport report_from_model(Sequential& model) {
    std::vector<double> pcts;
    std::vector<LayerSpec> specs;
    for (StrWeightLayer* l : model.str_layers()) {
        const Tensor eff = l->effective_weight();
        pcts.push_back(100.0 * sparsity(eff));
        LayerSpec s;
        s.name = l->layer_name();
        if (l->kind() == "fc") {
            s.kind = LayerSpec::Kind::kFc;
            s.in_channels = eff.dim(1);
            s.out_channels = eff.dim(0);
            s.kernel_h = s.kernel_w = 1;
            s.output_h = s.output_w = 1;
        } else {
            // spatial extent unknown here; params accounting is exact, FLOPs
            // are per output position
            s.kind = l->kind() == "depthwise-conv" ? LayerSpec::Kind::kDepthwiseConv
                                                   : LayerSpec::Kind::kConv;
            s.out_channels = eff.dim(0);
            s.groups = 1;
            s.in_channels = eff.dim(1);
            s.kernel_h = eff.dim(2);
            s.kernel_w = eff.dim(3);
            s.output_h = s.output_w = 1;
        }
        specs.push_back(std::move(s));
    }
    BudgetReport rep = report(specs, pcts);
    // replace rounded nonzeros with exact measured counts
    std::int64_t nnz_total = 0;
    rep.backbone_nonzeros = 0;
    std::size_t i = 0;
    for (StrWeightLayer* l : model.str_layers()) {
        rep.rows[i].nonzeros = nonzero_count(l->effective_weight());
        nnz_total += rep.rows[i].nonzeros;
        if (specs[i].kind != LayerSpec::Kind::kFc) rep.backbone_nonzeros += rep.rows[i].nonzeros;
        ++i;
    }
    rep.total_nonzeros = nnz_total;
    if (rep.backbone_params > 0)
        rep.backbone_sparsity_pct =
            100.0 * (1.0 - static_cast<double>(rep.backbone_nonzeros) /
                               static_cast<double>(rep.backbone_params));
    if (rep.total_params > 0)
        rep.overall_sparsity_pct =
            100.0 * (1.0 - static_cast<double>(nnz_total) /
                               static_cast<double>(rep.total_params));
    return rep;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string budget_to_csv(const BudgetReport& rep) {
    std::string csv = "layer,dense_params,nonzeros,sparsity_pct,dense_flops,sparse_flops\n";
    for (const BudgetRow& r : rep.rows) {
        csv += r.name + "," + std::to_string(r.dense_params) + "," +
               std::to_string(r.nonzeros) + "," + fmt_double(r.sparsity_pct) + "," +
               std::to_string(r.dense_flops) + "," + fmt_double(r.sparse_flops) + "\n";
    }
    return csv;
}

void export_budget(const BudgetReport& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write budget file: " + path);
    out << budget_to_csv(rep);
}

std::vector<double> import_budget_csv(const std::string& content,
                                      const std::vector<LayerSpec>& specs) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("budget CSV is empty");
    const std::string header = "layer,dense_params,nonzeros,sparsity_pct,dense_flops,sparse_flops";
    {
        std::string stripped = line;
        if (!stripped.empty() && stripped.back() == '\r') stripped.pop_back();
        if (stripped != header)
            throw std::runtime_error("line 1: expected header '" + header + "'");
    }
    std::vector<std::pair<std::string, double>> entries;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": expected 6 fields, got " + std::to_string(f.size()));
        const double s = parse_double_field(f[3], line_no, "sparsity_pct");
        if (s < 0.0 || s > 100.0)
            throw std::runtime_error("line " + std::to_string(line_no) + ": sparsity_pct " +
                                     f[3] + " outside [0,100]");
        entries.emplace_back(f[0], s);
    }
    std::vector<double> out;
    for (const LayerSpec& spec : specs) {
        bool found = false;
        for (const auto& [name, s] : entries) {
            if (name == spec.name) {
                out.push_back(s);
                found = true;
                break;
            }
        }
        if (!found)
            throw std::runtime_error("budget CSV is missing layer '" + spec.name + "'");
    }
    return out;
}

std::vector<double> import_budget(const std::string& path,
                                  const std::vector<LayerSpec>& specs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open budget file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return import_budget_csv(ss.str(), specs);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string BudgetReport::to_table() const {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-28s %14s %14s %10s %16s %16s\n", "layer", "params",
                  "nonzeros", "sparsity%", "dense_flops", "sparse_flops");
    out += buf;
    for (const BudgetRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%-28s %14lld %14lld %10.2f %16lld %16.0f\n",
                      r.name.c_str(), static_cast<long long>(r.dense_params),
                      static_cast<long long>(r.nonzeros), r.sparsity_pct,
                      static_cast<long long>(r.dense_flops), r.sparse_flops);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-28s %14lld %14lld %10.2f %16lld %16s\n", "Backbone",
                  static_cast<long long>(backbone_params),
                  static_cast<long long>(backbone_nonzeros), backbone_sparsity_pct,
                  static_cast<long long>(backbone_flops), "");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-28s %14lld %14lld %10.2f %16lld %16.0f\n", "Overall",
                  static_cast<long long>(total_params),
                  static_cast<long long>(total_nonzeros), overall_sparsity_pct,
                  static_cast<long long>(total_flops), total_sparse_flops);
    out += buf;
    return out;
}

}  // namespace strs
