#include "strsparse/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "strsparse/str_ops.hpp"

namespace strs {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape();
    j["data"] = t.vec();
    return j;
}

Tensor tensor_from_json(const json& j) {
    if (!j.contains("shape") || !j.contains("data"))
        throw std::runtime_error("tensor JSON must have 'shape' and 'data'");
    return Tensor(j["shape"].get<std::vector<std::int64_t>>(),
                  j["data"].get<std::vector<double>>());
}

json checkpoint_json(Sequential& model) {
    json layers = json::object();
    for (const StrWeightLayer* l : static_cast<const Sequential&>(model).str_layers()) {
        json entry;
        entry["weight"] = tensor_to_json(l->weight());
        entry["s"] = tensor_to_json(l->str_param().s);
        entry["fn"] = to_string(l->str_param().fn.kind);
        entry["k"] = l->str_param().fn.k;
        entry["granularity"] = to_string(l->str_param().granularity);
        entry["kind"] = l->kind();
        layers[l->layer_name()] = std::move(entry);
    }
    json root;
    root["layers"] = std::move(layers);
    return root;
}

void save_checkpoint(Sequential& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << checkpoint_json(model).dump(2) << "\n";
}

void load_checkpoint(Sequential& model, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json root;
    in >> root;
    if (!root.contains("layers")) throw std::runtime_error(path + ": not a checkpoint file");
    const json& layers = root["layers"];
    for (StrWeightLayer* l : model.str_layers()) {
        if (!layers.contains(l->layer_name()))
            throw std::runtime_error(path + ": checkpoint is missing layer '" +
                                     l->layer_name() + "'");
        const json& entry = layers[l->layer_name()];
        Tensor w = tensor_from_json(entry["weight"]);
        if (!w.same_shape(l->weight()))
            throw std::runtime_error(path + ": layer '" + l->layer_name() + "' has shape " +
                                     w.shape_str() + ", model expects " +
                                     l->weight().shape_str());
        l->mutable_weight() = std::move(w);
        StrParam& p = l->str_param();
        p.s = tensor_from_json(entry["s"]);
        p.fn.kind = threshold_kind_from_string(entry["fn"].get<std::string>());
        p.fn.k = entry["k"].get<double>();
        p.granularity = granularity_from_string(entry["granularity"].get<std::string>());
        p.check_compatible(l->weight());
    }
}

std::string checkpoint_summary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json root;
    in >> root;
    if (!root.contains("layers")) throw std::runtime_error(path + ": not a checkpoint file");
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-16s %-14s %-12s %12s %12s %12s\n", "layer", "shape",
                  "granularity", "params", "nonzeros", "sparsity%");
    out += buf;
    for (const auto& [name, entry] : root["layers"].items()) {
        const Tensor w = tensor_from_json(entry["weight"]);
        StrParam p;
        p.s = tensor_from_json(entry["s"]);
        p.fn.kind = threshold_kind_from_string(entry["fn"].get<std::string>());
        p.fn.k = entry["k"].get<double>();
        p.granularity = granularity_from_string(entry["granularity"].get<std::string>());
        const Tensor eff = str_forward(w, p);
        const std::int64_t nnz = nonzero_count(eff);
        std::snprintf(buf, sizeof buf, "%-16s %-14s %-12s %12lld %12lld %12.2f\n", name.c_str(),
                      w.shape_str().c_str(), to_string(p.granularity).c_str(),
                      static_cast<long long>(w.numel()), static_cast<long long>(nnz),
                      100.0 * (1.0 - static_cast<double>(nnz) / static_cast<double>(w.numel())));
        out += buf;
    }
    return out;
}

}  // namespace strs
