#include "strsparse/runconfig.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace strs {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v +
                          "'");
    }
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "experiment") experiment = value;
    else if (key == "granularity") granularity = value;
    else if (key == "threshold_fn") threshold_fn = value;
    else if (key == "threshold_k") threshold_k = parse_double(value, key);
    else if (key == "lambda") lambda = parse_double(value, key);
    else if (key == "s_init") s_init = parse_double(value, key);
    else if (key == "base_lr") base_lr = parse_double(value, key);
    else if (key == "momentum") momentum = parse_double(value, key);
    else if (key == "batch_size") batch_size = parse_int(value, key);
    else if (key == "epochs") epochs = parse_int(value, key);
    else if (key == "warmup_epochs") warmup_epochs = parse_int(value, key);
    else if (key == "seed") seed = parse_uint(value, key);
    else if (key == "freeze_thresholds") freeze_thresholds = parse_bool(value, key);
    else if (key == "samples_per_class") samples_per_class = parse_int(value, key);
    else if (key == "classes") classes = parse_int(value, key);
    else if (key == "feature_dim") feature_dim = parse_int(value, key);
    else if (key == "image_size") image_size = parse_int(value, key);
    else if (key == "noise") noise = parse_double(value, key);
    else if (key == "rnn_input_dim") rnn_input_dim = parse_int(value, key);
    else if (key == "rnn_hidden_dim") rnn_hidden_dim = parse_int(value, key);
    else if (key == "rnn_steps") rnn_steps = parse_int(value, key);
    else if (key == "rnn_sequences_per_class") rnn_sequences_per_class = parse_int(value, key);
    else if (key == "rnn_noise") rnn_noise = parse_double(value, key);
    else if (key == "rnn_s_init") rnn_s_init = parse_double(value, key);
    else if (key == "dataset") dataset = value;
    else if (key == "idx_images") idx_images = value;
    else if (key == "idx_labels") idx_labels = value;
    else if (key == "synthetic_fallback") synthetic_fallback = parse_bool(value, key);
    else if (key == "output_dir") output_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ": line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + t + "'");
        try {
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

void RunConfig::apply_override(const std::string& kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

std::string RunConfig::to_string() const {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("experiment", experiment);
    kv("granularity", granularity);
    kv("threshold_fn", threshold_fn);
    kv("threshold_k", fmt_double(threshold_k));
    kv("lambda", fmt_double(lambda));
    kv("s_init", fmt_double(s_init));
    kv("base_lr", fmt_double(base_lr));
    kv("momentum", fmt_double(momentum));
    kv("batch_size", std::to_string(batch_size));
    kv("epochs", std::to_string(epochs));
    kv("warmup_epochs", std::to_string(warmup_epochs));
    kv("seed", std::to_string(seed));
    kv("freeze_thresholds", freeze_thresholds ? "true" : "false");
    kv("samples_per_class", std::to_string(samples_per_class));
    kv("classes", std::to_string(classes));
    kv("feature_dim", std::to_string(feature_dim));
    kv("image_size", std::to_string(image_size));
    kv("noise", fmt_double(noise));
    kv("rnn_input_dim", std::to_string(rnn_input_dim));
    kv("rnn_hidden_dim", std::to_string(rnn_hidden_dim));
    kv("rnn_steps", std::to_string(rnn_steps));
    kv("rnn_sequences_per_class", std::to_string(rnn_sequences_per_class));
    kv("rnn_noise", fmt_double(rnn_noise));
    kv("rnn_s_init", fmt_double(rnn_s_init));
    kv("dataset", dataset);
    kv("idx_images", idx_images);
    kv("idx_labels", idx_labels);
    kv("synthetic_fallback", synthetic_fallback ? "true" : "false");
    // output_dir is deliberately not part of the snapshot: where a run is
    // written does not change what it computes, so the content hash (and the
    // artifacts) stay identical across output locations
    return out;
}

std::string RunConfig::content_hash() const {
    const std::string s = to_string();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string RunConfig::resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    if (const char* env = std::getenv("STRSPARSE_OUT"); env != nullptr && *env != '\0')
        return env;
    return "runs";
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.s_init = experiment == "lowrank-rnn" ? rnn_s_init : s_init;
    cfg.base_lr = base_lr;
    cfg.momentum = momentum;
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.warmup_epochs = warmup_epochs;
    cfg.seed = seed;
    cfg.freeze_thresholds = freeze_thresholds;
    return cfg;
}

ClassificationSetup RunConfig::classification_setup() const {
    ClassificationSetup setup;
    if (experiment == "mlp-blobs") {
        setup.task = dataset == "idx" ? "idx-images" : "synthetic-blobs";
        setup.model = "mlp";
    } else if (experiment == "cnn-patterns") {
        setup.task = dataset == "idx" ? "idx-images" : "synthetic-patterns";
        setup.model = "cnn";
    } else {
        throw ConfigError("experiment '" + experiment + "' is not a classification run");
    }
    setup.str.granularity = granularity_from_string(granularity);
    setup.str.fn.kind = threshold_kind_from_string(threshold_fn);
    setup.str.fn.k = threshold_k;
    setup.str.s_init = s_init;
    setup.samples_per_class = samples_per_class;
    setup.classes = classes;
    setup.feature_dim = feature_dim;
    setup.image_size = image_size;
    setup.noise = noise;
    setup.idx_images = idx_images;
    setup.idx_labels = idx_labels;
    setup.synthetic_fallback = synthetic_fallback;
    return setup;
}

RnnSetup RunConfig::rnn_setup() const {
    RnnSetup setup;
    setup.input_dim = rnn_input_dim;
    setup.hidden_dim = rnn_hidden_dim;
    setup.steps = rnn_steps;
    setup.sequences_per_class = rnn_sequences_per_class;
    setup.noise = rnn_noise;
    setup.s_init = rnn_s_init;
    return setup;
}

void RunConfig::validate() const {
    if (experiment != "mlp-blobs" && experiment != "cnn-patterns" &&
        experiment != "lowrank-rnn")
        throw ConfigError("unknown experiment '" + experiment +
                          "' (expected mlp-blobs, cnn-patterns or lowrank-rnn)");
    if (dataset != "synthetic" && dataset != "idx")
        throw ConfigError("unknown dataset '" + dataset + "' (expected synthetic or idx)");
    try {
        granularity_from_string(granularity);
        threshold_kind_from_string(threshold_fn);
        train_config().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace strs
