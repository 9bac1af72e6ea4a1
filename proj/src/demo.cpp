#include "momenta/demo.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "momenta/config.hpp"
#include "momenta/error.hpp"
#include "momenta/metrics.hpp"
#include "momenta/synth.hpp"

namespace momenta {

namespace fs = std::filesystem;

DemoResult run_demo(const std::string& out_dir, uint64_t seed, int threads) {
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    DemoResult result;
    result.manifest_path = path("manifest.jsonl");
    result.cache_path = path("embeddings.mcf");
    result.checkpoint_path = path("model.mcf");
    result.history_path = path("history.json");
    result.snapshot_path = path("demo.config.json");

    DatasetManifest manifest = make_demo_manifest("demo", 80, seed);
    write_manifest(manifest, result.manifest_path);

    fs::remove(result.cache_path);  // rebuild from scratch for reproducible bytes
    EmbeddingCache cache = EmbeddingCache::open_rw(result.cache_path);
    SyntheticBackend backend;
    for (const auto& r : manifest.records) cache.put(r.id, encode_bundle(r, backend));

    TrainConfig config;
    config.batch_size = 16;
    config.epochs = 30;
    config.seed = seed;
    config.threads = threads;
    config.model.c_harm = 3;
    config.model.variant = Variant::full;

    TrainResult trained = train(manifest, cache, config);
    save_checkpoint(trained.params, result.checkpoint_path);

    nlohmann::ordered_json history = nlohmann::ordered_json::array();
    for (const auto& e : trained.history) {
        nlohmann::ordered_json h;
        h["epoch"] = e.epoch;
        h["train_loss"] = e.train_loss;
        if (e.val_accuracy)
            h["val_accuracy"] = *e.val_accuracy;
        else
            h["val_accuracy"] = nullptr;
        history.push_back(std::move(h));
    }
    {
        std::ofstream out(result.history_path, std::ios::binary);
        if (!out)
            throw Error("io-error", "cannot write history: " + result.history_path);
        out << history.dump(2) << '\n';
    }

    for (EvalTask task : {EvalTask::harm2, EvalTask::harm3, EvalTask::target}) {
        MetricsReport report =
            evaluate(trained.params, manifest, cache, task, Split::test, threads);
        std::string rp = path("report_" + std::string(to_string(task)) + ".json");
        std::ofstream out(rp, std::ios::binary);
        if (!out)
            throw Error("io-error", "cannot write report: " + rp);
        out << report_to_json(report);
        result.report_paths.push_back(rp);
    }

    nlohmann::ordered_json resolved;
    resolved["out_dir"] = out_dir;
    resolved["records"] = manifest.records.size();
    resolved["backend"] = "synthetic";
    resolved["training"] = train_config_json(config);
    write_run_snapshot(result.snapshot_path, "demo", resolved);
    return result;
}

}  // namespace momenta
