#include "momenta/config.hpp"

#include <fstream>
#include <set>

#include "momenta/error.hpp"

namespace momenta {

namespace {

const std::set<std::string> kKnownKeys = {
    "batch_size",    "epochs",        "learning_rate",      "beta1",
    "beta2",         "adam_epsilon",  "focal_gamma",        "focal_alpha_harm",
    "focal_alpha_target", "lambda_target", "seed",          "c_harm",
    "hidden",        "variant",       "threads",            "early_stopping",
    "patience"};

std::optional<std::vector<double>> parse_alpha(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j.at(key);
    if (v.is_string()) {
        if (v.get<std::string>() == "inverse-frequency") return std::nullopt;
        throw ConfigError("config-invalid",
                          std::string(key) + " must be \"inverse-frequency\" or an array");
    }
    return v.get<std::vector<double>>();
}

}  // namespace

TrainConfig parse_train_config(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("config-invalid", "training config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKnownKeys.count(key))
            throw ConfigError("config-unknown-key", "unknown config key: " + key);

    TrainConfig c;
    try {
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
        c.focal_alpha_harm = parse_alpha(j, "focal_alpha_harm");
        c.focal_alpha_target = parse_alpha(j, "focal_alpha_target");
        c.lambda_target = j.value("lambda_target", c.lambda_target);
        c.seed = j.value("seed", c.seed);
        c.model.c_harm = j.value("c_harm", c.model.c_harm);
        c.model.hidden = j.value("hidden", c.model.hidden);
        if (j.contains("variant"))
            c.model.variant = parse_variant(j.at("variant").get<std::string>());
        c.threads = j.value("threads", c.threads);
        c.early_stopping = j.value("early_stopping", c.early_stopping);
        c.patience = j.value("patience", c.patience);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config-invalid", e.what());
    }
    if (c.batch_size <= 0 || c.epochs <= 0 || c.learning_rate <= 0.0)
        throw ConfigError("config-invalid",
                          "batch_size, epochs and learning_rate must be positive");
    if (c.threads <= 0)
        throw ConfigError("config-invalid", "threads must be positive");
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("config-not-found", "cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config-invalid", std::string(path) + ": " + e.what());
    }
    return parse_train_config(j);
}

nlohmann::ordered_json train_config_json(const TrainConfig& config) {
    nlohmann::ordered_json j;
    j["batch_size"] = config.batch_size;
    j["epochs"] = config.epochs;
    j["learning_rate"] = config.learning_rate;
    j["beta1"] = config.beta1;
    j["beta2"] = config.beta2;
    j["adam_epsilon"] = config.adam_epsilon;
    j["focal_gamma"] = config.focal_gamma;
    if (config.focal_alpha_harm)
        j["focal_alpha_harm"] = *config.focal_alpha_harm;
    else
        j["focal_alpha_harm"] = "inverse-frequency";
    if (config.focal_alpha_target)
        j["focal_alpha_target"] = *config.focal_alpha_target;
    else
        j["focal_alpha_target"] = "inverse-frequency";
    j["lambda_target"] = config.lambda_target;
    j["seed"] = config.seed;
    j["c_harm"] = config.model.c_harm;
    j["hidden"] = config.model.hidden;
    j["variant"] = std::string(to_string(config.model.variant));
    j["threads"] = config.threads;
    j["early_stopping"] = config.early_stopping;
    j["patience"] = config.patience;
    return j;
}

void write_run_snapshot(const std::string& path, const std::string& command,
                        const nlohmann::ordered_json& resolved) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["schema_version"] = kSchemaVersion;
    j["resolved"] = resolved;
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot write config snapshot: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace momenta
