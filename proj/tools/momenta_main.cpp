// momenta: dataset curation, annotation consolidation, encoding, training
// and evaluation for multimodal harmful-meme classification.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "momenta/annotation.hpp"
#include "momenta/config.hpp"
#include "momenta/demo.hpp"
#include "momenta/error.hpp"
#include "momenta/metrics.hpp"
#include "momenta/pipeline.hpp"
#include "momenta/synth.hpp"

namespace fs = std::filesystem;
using namespace momenta;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

// MOMENTA_CACHE_DIR relocates relative cache paths.
std::string resolve_cache_path(const std::string& path) {
    const char* dir = std::getenv("MOMENTA_CACHE_DIR");
    if (!dir || *dir == '\0' || fs::path(path).is_absolute()) return path;
    return (fs::path(dir) / path).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot open for writing: " + path);
    out << text;
    if (!out)
        throw Error("io-error", "write failed: " + path);
}

void print_report(const MetricsReport& r) {
    std::ostringstream line;
    line << "task " << to_string(r.task) << ": accuracy " << r.accuracy << "  macro_f1 "
         << r.macro_f1 << "  mmae " << r.mmae << "  n " << r.num_examples;
    std::cout << line.str() << "\n";
}

std::map<std::string, FilterFlags> read_flags_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("flags-not-found", "cannot open flags file: " + path);
    std::map<std::string, FilterFlags> flags;
    std::string line;
    size_t line_no = 0;
    auto parse_bool = [&](const std::string& tok) {
        if (tok == "1" || tok == "true") return true;
        if (tok == "0" || tok == "false") return false;
        throw Error("flags-invalid",
                    "line " + std::to_string(line_no) + ": bad boolean " + tok);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string id, a, b, c, d, e;
        if (!(ls >> id >> a >> b >> c >> d >> e))
            throw Error("flags-invalid",
                        "line " + std::to_string(line_no) +
                            ": expected id is_english text_readable is_cartoon "
                            "has_image has_text");
        flags[id] = {parse_bool(a), parse_bool(b), parse_bool(c), parse_bool(d),
                     parse_bool(e)};
    }
    return flags;
}

SplitRatios parse_ratios(const std::string& text) {
    SplitRatios r;
    char comma1, comma2;
    std::istringstream in(text);
    if (!(in >> r.train >> comma1 >> r.validation >> comma2 >> r.test) ||
        comma1 != ',' || comma2 != ',')
        throw ConfigError("ratio-invalid", "expected --ratios a,b,c, got " + text);
    return r;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct CliOptions {
    // shared
    std::string manifest, out, cache, config_path, report;
    std::string flags_path, rejects_path;
    std::string annotations, decided, escalations;
    std::string task = "harm2";
    std::string backend = "synthetic";
    std::string ckpt, split = "test";
    std::string manifests, train_manifest, test_manifest;
    std::string ratios;
    int threshold = 4;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    bool no_combined = false;
    uint64_t demo_seed = 0;
    // train overrides
    int epochs = -1;
    int c_harm = -1;
    std::string variant;
};

TrainConfig resolved_train_config(const CliOptions& opt) {
    TrainConfig config;
    if (!opt.config_path.empty()) config = load_train_config(opt.config_path);
    if (opt.seed_set) config.seed = opt.seed;
    if (opt.epochs > 0) config.epochs = opt.epochs;
    if (opt.c_harm > 0) config.model.c_harm = opt.c_harm;
    if (!opt.variant.empty()) config.model.variant = parse_variant(opt.variant);
    if (opt.threads > 0) config.threads = opt.threads;
    return config;
}

int run_ingest(const CliOptions& opt) {
    DatasetManifest in = read_manifest(opt.manifest);
    auto flags = read_flags_file(opt.flags_path);
    DatasetManifest kept;
    kept.name = in.name;
    std::map<std::string, int> reject_counts;
    std::ostringstream rejects;
    for (const auto& r : in.records) {
        auto it = flags.find(r.id);
        if (it == flags.end())
            throw Error("flags-missing", "no filter flags for record " + r.id);
        FilterDecision d = filter_record(it->second);
        if (d.keep) {
            kept.records.push_back(r);
        } else {
            ++reject_counts[d.reason];
            rejects << r.id << '\t' << d.reason << '\n';
        }
    }
    write_manifest(kept, opt.out);
    if (!opt.rejects_path.empty()) write_text(opt.rejects_path, rejects.str());

    std::cout << "kept " << kept.records.size() << " of " << in.records.size() << "\n";
    for (const auto& [reason, count] : reject_counts)
        std::cout << "rejected " << reason << " " << count << "\n";

    ordered_json resolved;
    resolved["manifest"] = opt.manifest;
    resolved["flags"] = opt.flags_path;
    resolved["out"] = opt.out;
    write_run_snapshot(opt.out + ".config.json", "ingest", resolved);
    return 0;
}

int run_dedup(const CliOptions& opt) {
    DatasetManifest in = read_manifest(opt.manifest);
    std::vector<HashedImage> images;
    for (const auto& r : in.records) {
        Raster img = read_pgm(r.image_ref);
        images.push_back({r.id, r.width, r.height, perceptual_hash(img)});
    }
    auto groups = dedup(images, opt.threshold);

    std::ostringstream report;
    std::set<std::string> kept_ids;
    for (const auto& g : groups) {
        kept_ids.insert(g.kept_id);
        for (size_t i = 0; i < g.member_ids.size(); ++i)
            report << (i ? " " : "") << g.member_ids[i];
        report << '\n';
    }
    write_text(opt.report, report.str());

    DatasetManifest kept;
    kept.name = in.name;
    for (const auto& r : in.records)
        if (kept_ids.count(r.id)) kept.records.push_back(r);
    write_manifest(kept, opt.out);
    std::cout << "groups " << groups.size() << ", kept " << kept.records.size() << " of "
              << in.records.size() << "\n";

    ordered_json resolved;
    resolved["manifest"] = opt.manifest;
    resolved["threshold"] = opt.threshold;
    resolved["report"] = opt.report;
    resolved["out"] = opt.out;
    write_run_snapshot(opt.out + ".config.json", "dedup", resolved);
    return 0;
}

int run_split(const CliOptions& opt) {
    DatasetManifest in = read_manifest(opt.manifest);
    SplitRatios ratios = parse_ratios(opt.ratios);
    DatasetManifest out = split_dataset(in.records, ratios, opt.seed, in.name);
    write_manifest(out, opt.out);
    auto c = out.split_counts();
    std::cout << "train " << c.train << " validation " << c.validation << " test "
              << c.test << "\n";

    ordered_json resolved;
    resolved["manifest"] = opt.manifest;
    resolved["ratios"] = opt.ratios;
    resolved["seed"] = opt.seed;
    resolved["out"] = opt.out;
    write_run_snapshot(opt.out + ".config.json", "split", resolved);
    return 0;
}

int run_consolidate(const CliOptions& opt) {
    auto sets = read_annotations(opt.annotations);
    std::ostringstream decided, escalations;
    for (const auto& s : sets) {
        ConsolidationResult r = consolidate(s);
        if (r.harm.decided) {
            std::string target = "-";
            std::string target_method = "-";
            if (r.target && r.target->decided) {
                target = to_string(target_from_ordinal(r.target->label));
                target_method =
                    r.target->method == ConsolidationMethod::unanimous ? "unanimous"
                                                                       : "majority";
            } else if (r.target) {
                escalations << s.meme_id << "\ttarget\n";
            }
            decided << s.meme_id << '\t' << to_string(harm_from_ordinal(r.harm.label))
                    << '\t' << target << '\t'
                    << (r.harm.method == ConsolidationMethod::unanimous ? "unanimous"
                                                                        : "majority")
                    << '\t' << target_method << '\n';
        } else {
            escalations << s.meme_id << "\tharm\n";
        }
    }
    write_text(opt.decided, decided.str());
    write_text(opt.escalations, escalations.str());
    std::cout << "consolidated " << sets.size() << " memes\n";

    ordered_json resolved;
    resolved["annotations"] = opt.annotations;
    resolved["decided"] = opt.decided;
    resolved["escalations"] = opt.escalations;
    write_run_snapshot(opt.decided + ".config.json", "consolidate", resolved);
    return 0;
}

int run_kappa(const CliOptions& opt) {
    auto sets = read_annotations(opt.annotations);
    AgreementTask task;
    if (opt.task == "harm")
        task = AgreementTask::harm;
    else if (opt.task == "target")
        task = AgreementTask::target;
    else
        throw ConfigError("config-invalid", "kappa task must be harm or target");
    double value = average_pairwise_kappa(sets, task);
    std::cout.precision(6);
    std::cout << std::fixed << value << "\n";
    return 0;
}

int run_encode(const CliOptions& opt) {
    DatasetManifest manifest = read_manifest(opt.manifest);
    std::unique_ptr<EncoderBackend> backend;
    if (opt.backend == "synthetic") {
        backend = std::make_unique<SyntheticBackend>();
    } else if (opt.backend == "external") {
        throw Error("backend-unavailable",
                    "external encoder adapters are not configured in this build");
    } else {
        throw ConfigError("config-invalid", "backend must be synthetic or external");
    }

    std::string cache_path = resolve_cache_path(opt.cache);
    EmbeddingCache cache = EmbeddingCache::open_rw(cache_path);
    size_t overwrites = 0;
    for (const auto& r : manifest.records)
        if (cache.put(r.id, encode_bundle(r, *backend))) ++overwrites;
    std::cout << "encoded " << manifest.records.size() << " records";
    if (overwrites) std::cout << " (" << overwrites << " overwritten)";
    std::cout << "\n";

    ordered_json resolved;
    resolved["manifest"] = opt.manifest;
    resolved["backend"] = opt.backend;
    resolved["cache"] = cache_path;
    write_run_snapshot(cache_path + ".config.json", "encode", resolved);
    return 0;
}

int run_train(const CliOptions& opt) {
    TrainConfig config = resolved_train_config(opt);
    DatasetManifest manifest = read_manifest(opt.manifest);
    EmbeddingCache cache = EmbeddingCache::open_ro(resolve_cache_path(opt.cache));
    TrainResult result = train(manifest, cache, config);
    save_checkpoint(result.params, opt.out);

    ordered_json history = ordered_json::array();
    for (const auto& e : result.history) {
        ordered_json h;
        h["epoch"] = e.epoch;
        h["train_loss"] = e.train_loss;
        if (e.val_accuracy)
            h["val_accuracy"] = *e.val_accuracy;
        else
            h["val_accuracy"] = nullptr;
        history.push_back(std::move(h));
    }
    write_text(opt.out + ".history.json", history.dump(2) + "\n");

    const auto& last = result.history.back();
    std::cout << "trained " << config.epochs << " epochs, final train loss "
              << last.train_loss;
    if (last.val_accuracy) std::cout << ", val accuracy " << *last.val_accuracy;
    std::cout << "\n";

    ordered_json resolved;
    resolved["manifest"] = opt.manifest;
    resolved["cache"] = opt.cache;
    resolved["out"] = opt.out;
    resolved["training"] = train_config_json(config);
    write_run_snapshot(opt.out + ".config.json", "train", resolved);
    return 0;
}

int run_eval(const CliOptions& opt) {
    if (!fs::exists(opt.ckpt))
        throw Error("checkpoint-not-found", "no checkpoint at " + opt.ckpt);
    ModelParams params = load_checkpoint(opt.ckpt);
    if (opt.manifest.empty() || opt.cache.empty())
        throw ConfigError("config-invalid", "eval needs --manifest and --cache");
    DatasetManifest manifest = read_manifest(opt.manifest);
    EmbeddingCache cache = EmbeddingCache::open_ro(resolve_cache_path(opt.cache));
    MetricsReport report = evaluate(params, manifest, cache, parse_task(opt.task),
                                    parse_split(opt.split), opt.threads);
    print_report(report);
    if (!opt.report.empty()) {
        write_text(opt.report, report_to_json(report));
        ordered_json resolved;
        resolved["ckpt"] = opt.ckpt;
        resolved["manifest"] = opt.manifest;
        resolved["cache"] = opt.cache;
        resolved["task"] = opt.task;
        resolved["split"] = opt.split;
        write_run_snapshot(opt.report + ".config.json", "eval", resolved);
    }
    return 0;
}

int run_transfer(const CliOptions& opt) {
    TrainConfig config = resolved_train_config(opt);
    std::vector<DatasetManifest> manifests;
    for (const auto& path : split_list(opt.manifests)) {
        DatasetManifest m = read_manifest(path);
        if (m.name.empty()) m.name = fs::path(path).stem().string();
        manifests.push_back(std::move(m));
    }
    EmbeddingCache cache = EmbeddingCache::open_ro(resolve_cache_path(opt.cache));
    auto cells = transfer_matrix(manifests, cache, config, !opt.no_combined);

    std::cout << "train\\eval          harm2   harm3  target\n";
    for (const auto& c : cells) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-10s->%-8s %6.2f  %6.2f  %6.2f",
                      c.train_name.c_str(), c.eval_name.c_str(), c.harm2.macro_f1,
                      c.harm3.macro_f1, c.target.macro_f1);
        std::cout << line << "\n";
    }
    if (!opt.report.empty()) {
        write_text(opt.report, transfer_to_json(cells));
        ordered_json resolved;
        resolved["manifests"] = opt.manifests;
        resolved["cache"] = opt.cache;
        resolved["training"] = train_config_json(config);
        write_run_snapshot(opt.report + ".config.json", "transfer", resolved);
    }
    return 0;
}

int run_baseline(const CliOptions& opt) {
    DatasetManifest train_m = read_manifest(opt.train_manifest);
    DatasetManifest test_m = read_manifest(opt.test_manifest);
    MetricsReport report = majority_baseline(train_m, test_m, parse_task(opt.task));
    print_report(report);
    if (!opt.report.empty()) {
        write_text(opt.report, report_to_json(report));
        ordered_json resolved;
        resolved["train"] = opt.train_manifest;
        resolved["test"] = opt.test_manifest;
        resolved["task"] = opt.task;
        write_run_snapshot(opt.report + ".config.json", "baseline", resolved);
    }
    return 0;
}

int run_demo_cmd(const CliOptions& opt) {
    DemoResult r = run_demo(opt.out, opt.demo_seed, opt.threads);
    std::cout << "manifest   " << r.manifest_path << "\n"
              << "cache      " << r.cache_path << "\n"
              << "checkpoint " << r.checkpoint_path << "\n";
    for (const auto& p : r.report_paths) std::cout << "report     " << p << "\n";
    return 0;
}

}  // namespace

int dispatch(int argc, char** argv) {
    CLI::App app{"multimodal harmful-meme classification toolkit"};
    app.set_version_flag("--version", std::string("momenta ") + kVersion +
                                          " (manifest schema_version " +
                                          std::to_string(kSchemaVersion) + ")");
    app.require_subcommand(1);
    CliOptions opt;

    auto* ingest = app.add_subcommand("ingest", "filter a manifest by curation flags");
    ingest->add_option("--manifest", opt.manifest)->required();
    ingest->add_option("--flags", opt.flags_path)->required();
    ingest->add_option("--out", opt.out)->required();
    ingest->add_option("--rejects", opt.rejects_path);

    auto* dedup_cmd = app.add_subcommand("dedup", "group near-duplicate images");
    dedup_cmd->add_option("--manifest", opt.manifest)->required();
    dedup_cmd->add_option("--threshold", opt.threshold);
    dedup_cmd->add_option("--report", opt.report)->required();
    dedup_cmd->add_option("--out", opt.out)->required();

    auto* split_cmd = app.add_subcommand("split", "deterministic stratified split");
    split_cmd->add_option("--manifest", opt.manifest)->required();
    split_cmd->add_option("--ratios", opt.ratios)->required();
    split_cmd->add_option("--seed", opt.seed);
    split_cmd->add_option("--out", opt.out)->required();

    auto* cons = app.add_subcommand("consolidate", "resolve triple annotations");
    cons->add_option("--annotations", opt.annotations)->required();
    cons->add_option("--decided", opt.decided)->required();
    cons->add_option("--escalations", opt.escalations)->required();

    auto* kappa_cmd = app.add_subcommand("kappa", "average pairwise agreement");
    kappa_cmd->add_option("--annotations", opt.annotations)->required();
    kappa_cmd->add_option("--task", opt.task)->required();

    auto* encode = app.add_subcommand("encode", "extract embedding bundles");
    encode->add_option("--manifest", opt.manifest)->required();
    encode->add_option("--backend", opt.backend);
    encode->add_option("--cache", opt.cache)->required();

    auto* train_cmd = app.add_subcommand("train", "train the fusion model");
    train_cmd->add_option("--manifest", opt.manifest)->required();
    train_cmd->add_option("--cache", opt.cache)->required();
    train_cmd->add_option("--config", opt.config_path);
    train_cmd->add_option("--out", opt.out)->required();
    train_cmd->add_option("--seed", opt.seed);
    train_cmd->add_option("--epochs", opt.epochs);
    train_cmd->add_option("--c-harm", opt.c_harm);
    train_cmd->add_option("--variant", opt.variant);
    train_cmd->add_option("--threads", opt.threads);

    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint");
    eval_cmd->add_option("--ckpt", opt.ckpt)->required();
    eval_cmd->add_option("--manifest", opt.manifest);
    eval_cmd->add_option("--cache", opt.cache);
    eval_cmd->add_option("--task", opt.task);
    eval_cmd->add_option("--split", opt.split);
    eval_cmd->add_option("--report", opt.report);
    eval_cmd->add_option("--threads", opt.threads);

    auto* transfer_cmd = app.add_subcommand("transfer", "cross-dataset macro-F1 matrix");
    transfer_cmd->add_option("--manifests", opt.manifests)->required();
    transfer_cmd->add_option("--cache", opt.cache)->required();
    transfer_cmd->add_option("--config", opt.config_path);
    transfer_cmd->add_option("--report", opt.report);
    transfer_cmd->add_flag("--no-combined", opt.no_combined);
    transfer_cmd->add_option("--seed", opt.seed);

    auto* baseline_cmd = app.add_subcommand("baseline", "majority-class reference");
    baseline_cmd->add_option("--train", opt.train_manifest)->required();
    baseline_cmd->add_option("--test", opt.test_manifest)->required();
    baseline_cmd->add_option("--task", opt.task)->required();
    baseline_cmd->add_option("--report", opt.report);

    auto* demo_cmd = app.add_subcommand("demo", "end-to-end synthetic run");
    demo_cmd->add_option("--out", opt.out)->required();
    demo_cmd->add_option("--seed", opt.demo_seed);
    demo_cmd->add_option("--threads", opt.threads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }
    opt.seed_set = train_cmd->count("--seed") > 0 || transfer_cmd->count("--seed") > 0;

    try {
        if (app.got_subcommand(ingest)) return run_ingest(opt);
        if (app.got_subcommand(dedup_cmd)) return run_dedup(opt);
        if (app.got_subcommand(split_cmd)) return run_split(opt);
        if (app.got_subcommand(cons)) return run_consolidate(opt);
        if (app.got_subcommand(kappa_cmd)) return run_kappa(opt);
        if (app.got_subcommand(encode)) return run_encode(opt);
        if (app.got_subcommand(train_cmd)) return run_train(opt);
        if (app.got_subcommand(eval_cmd)) return run_eval(opt);
        if (app.got_subcommand(transfer_cmd)) return run_transfer(opt);
        if (app.got_subcommand(baseline_cmd)) return run_baseline(opt);
        if (app.got_subcommand(demo_cmd)) return run_demo_cmd(opt);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int main(int argc, char** argv) { return dispatch(argc, argv); }
