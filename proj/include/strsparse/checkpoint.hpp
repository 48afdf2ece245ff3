#pragma once

#include <string>

#include "strsparse/layers.hpp"
#include "strsparse/tensor.hpp"

#include "json.hpp"

namespace strs {

/// {"shape":[...], "data":[...]}
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

/// Checkpoint: {"layers": {name: {"weight", "s", "fn", "k", "granularity"}}}
/// — enough to reload the model and resume.
nlohmann::json checkpoint_json(Sequential& model);
void save_checkpoint(Sequential& model, const std::string& path);

/// Restores weights and thresholds by layer name; unknown or missing layers
/// are an error.
void load_checkpoint(Sequential& model, const std::string& path);

/// Human-readable per-layer summary (shape, sparsity, threshold) of a saved
/// checkpoint.
std::string checkpoint_summary(const std::string& path);

}  // namespace strs
