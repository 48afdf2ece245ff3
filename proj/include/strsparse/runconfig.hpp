#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strsparse/experiments.hpp"
#include "strsparse/optimizer.hpp"

namespace strs {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Run configuration: a flat `key = value` document ('#' comments). Every
/// key has a default; unknown keys are a hard error so typos cannot pass
/// silently. `--set key=value` overrides win over the file.
struct RunConfig {
    // experiment selection
    std::string experiment = "mlp-blobs";  // mlp-blobs | cnn-patterns | lowrank-rnn
    std::string granularity = "per-layer";
    std::string threshold_fn = "sigmoid";
    double threshold_k = 1.0;

    // optimization (Table-style knobs)
    double lambda = 0.01;
    double s_init = -8.0;
    double base_lr = 0.1;
    double momentum = 0.9;
    std::int64_t batch_size = 32;
    std::int64_t epochs = 40;
    std::int64_t warmup_epochs = 2;
    std::uint64_t seed = 1;
    bool freeze_thresholds = false;

    // synthetic task shape
    std::int64_t samples_per_class = 170;
    std::int64_t classes = 3;
    std::int64_t feature_dim = 32;
    std::int64_t image_size = 16;
    double noise = 0.6;

    // low-rank RNN task
    std::int64_t rnn_input_dim = 10;
    std::int64_t rnn_hidden_dim = 16;
    std::int64_t rnn_steps = 8;
    std::int64_t rnn_sequences_per_class = 64;
    double rnn_noise = 0.8;
    double rnn_s_init = -10.0;

    // data & output
    std::string dataset = "synthetic";  // synthetic | idx
    std::string idx_images;
    std::string idx_labels;
    bool synthetic_fallback = true;
    std::string output_dir;  // default: $STRSPARSE_OUT or "runs"

    static RunConfig from_file(const std::string& path);
    void apply_override(const std::string& key_equals_value);
    void set(const std::string& key, const std::string& value);

    /// Canonical snapshot (fixed key order, full precision) — identical
    /// configs serialize identically, which names and deduplicates runs.
    std::string to_string() const;
    std::string content_hash() const;  // 16 hex chars (FNV-1a)

    std::string resolved_output_dir() const;

    TrainConfig train_config() const;
    ClassificationSetup classification_setup() const;
    RnnSetup rnn_setup() const;
    void validate() const;
};

}  // namespace strs
