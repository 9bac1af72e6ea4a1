#include "momenta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include <json.hpp>

#include "momenta/error.hpp"

namespace momenta {

std::string_view to_string(EvalTask t) {
    switch (t) {
        case EvalTask::harm2: return "harm2";
        case EvalTask::harm3: return "harm3";
        case EvalTask::target: return "target";
    }
    return "?";
}

EvalTask parse_task(std::string_view s) {
    if (s == "harm2") return EvalTask::harm2;
    if (s == "harm3") return EvalTask::harm3;
    if (s == "target") return EvalTask::target;
    throw ConfigError("config-invalid", "unknown task: " + std::string(s));
}

int num_classes(EvalTask t) {
    switch (t) {
        case EvalTask::harm2: return 2;
        case EvalTask::harm3: return kNumHarmClasses;
        case EvalTask::target: return kNumTargetClasses;
    }
    return 0;
}

namespace {

void check_lengths(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size())
        throw Error("length-mismatch", "label sequences differ in length");
    if (truth.empty())
        throw Error("length-mismatch", "label sequences are empty");
}

}  // namespace

double accuracy_pct(std::span<const int> truth, std::span<const int> predicted) {
    check_lengths(truth, predicted);
    int64_t correct = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predicted[i]) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

double macro_f1_pct(std::span<const int> truth, std::span<const int> predicted,
                    int num_classes) {
    check_lengths(truth, predicted);
    std::vector<int64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
            predicted[i] >= num_classes)
            throw Error("label-invalid", "class index out of range");
        if (truth[i] == predicted[i])
            ++tp[truth[i]];
        else {
            ++fn[truth[i]];
            ++fp[predicted[i]];
        }
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (tp[c] + fp[c] + fn[c] == 0) continue;  // absent on both sides
        ++present;
        double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    if (present == 0)
        throw Error("label-invalid", "no class present in either sequence");
    return 100.0 * sum / static_cast<double>(present);
}

double mmae(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    check_lengths(truth, predicted);
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        int64_t abs_err = 0, count = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != c) continue;
            abs_err += std::abs(predicted[i] - truth[i]);
            ++count;
        }
        if (count == 0) continue;  // zero-support class skipped
        ++present;
        sum += static_cast<double>(abs_err) / static_cast<double>(count);
    }
    if (present == 0)
        throw Error("label-invalid", "no true class has support");
    return sum / static_cast<double>(present);
}

MetricsReport compute_report(EvalTask task, std::span<const int> truth,
                             std::span<const int> predicted) {
    check_lengths(truth, predicted);
    const int k = num_classes(task);
    MetricsReport report;
    report.task = task;
    report.num_examples = static_cast<int64_t>(truth.size());
    report.accuracy = accuracy_pct(truth, predicted);
    report.macro_f1 = macro_f1_pct(truth, predicted, k);
    report.mmae = mmae(truth, predicted, k);

    report.confusion.assign(k, std::vector<int64_t>(k, 0));
    for (size_t i = 0; i < truth.size(); ++i) ++report.confusion[truth[i]][predicted[i]];

    std::vector<int64_t> tp(k, 0), fp(k, 0), fn(k, 0);
    for (int t = 0; t < k; ++t)
        for (int p = 0; p < k; ++p) {
            if (t == p)
                tp[t] += report.confusion[t][p];
            else {
                fn[t] += report.confusion[t][p];
                fp[p] += report.confusion[t][p];
            }
        }
    for (int c = 0; c < k; ++c) {
        double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        report.per_class_f1.push_back(
            denom > 0.0 ? 100.0 * 2.0 * static_cast<double>(tp[c]) / denom : 0.0);
    }
    return report;
}

namespace {

int task_label(const MemeRecord& r, EvalTask task) {
    switch (task) {
        case EvalTask::harm2: return ordinal_index(merge_to_binary(r.harm));
        case EvalTask::harm3: return ordinal_index(r.harm);
        case EvalTask::target: return ordinal_index(*r.target);
    }
    return 0;
}

}  // namespace

MetricsReport evaluate(const ModelParams& params, const DatasetManifest& manifest,
                       const EmbeddingCache& cache, EvalTask task, Split split,
                       int threads) {
    if (task == EvalTask::harm3 && params.config.c_harm != 3)
        throw Error("task-mismatch", "harm3 evaluation needs a 3-class model");
    if (task == EvalTask::harm2 && params.config.c_harm != 2 && params.config.c_harm != 3)
        throw Error("task-mismatch", "harm2 evaluation needs a 2- or 3-class model");

    std::vector<const MemeRecord*> records;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        if (task == EvalTask::target && r.harm == HarmLabel::harmless) continue;
        records.push_back(&r);
    }
    if (records.empty())
        throw Error("manifest-invalid", "no records to evaluate for task " +
                                            std::string(to_string(task)));

    std::vector<int> truth(records.size()), predicted(records.size());
    auto score_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const MemeRecord& r = *records[i];
            auto bundle = cache.get(r.id);
            if (!bundle)
                throw Error("missing-embeddings", "no cached embedding for record " + r.id);
            ForwardTrace t = forward(*bundle, params, params.config.variant);
            int pred;
            if (task == EvalTask::target) {
                t.logits_target.maxCoeff(&pred);
            } else {
                t.logits_harm.maxCoeff(&pred);
                if (task == EvalTask::harm2 && params.config.c_harm == 3)
                    pred = pred == 0 ? 0 : 1;  // merge_to_binary on the prediction
            }
            truth[i] = task_label(r, task);
            predicted[i] = pred;
        }
    };

    if (threads <= 1 || records.size() < 2) {
        score_range(0, records.size());
    } else {
        size_t n = records.size();
        size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
        size_t chunk = (n + workers - 1) / workers;
        std::vector<std::future<void>> futures;
        for (size_t w = 0; w < workers; ++w) {
            size_t begin = w * chunk, end = std::min(begin + chunk, n);
            if (begin >= end) break;
            futures.push_back(std::async(std::launch::async, score_range, begin, end));
        }
        for (auto& f : futures) f.get();
    }
    return compute_report(task, truth, predicted);
}

MetricsReport majority_baseline(const DatasetManifest& train_manifest,
                                const DatasetManifest& test_manifest, EvalTask task) {
    const int k = num_classes(task);
    std::vector<int64_t> counts(k, 0);
    for (const auto& r : train_manifest.records) {
        if (r.split != Split::train) continue;
        if (task == EvalTask::target && !r.target) continue;
        ++counts[task_label(r, task)];
    }
    int64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0)
        throw Error("manifest-invalid", "empty training split for majority baseline");
    int majority = 0;
    for (int c = 1; c < k; ++c)
        if (counts[c] > counts[majority]) majority = c;  // ties keep the lower ordinal

    std::vector<int> truth, predicted;
    for (const auto& r : test_manifest.records) {
        if (r.split != Split::test) continue;
        if (task == EvalTask::target && r.harm == HarmLabel::harmless) continue;
        truth.push_back(task_label(r, task));
        predicted.push_back(majority);
    }
    if (truth.empty())
        throw Error("manifest-invalid", "empty test split for majority baseline");
    return compute_report(task, truth, predicted);
}

std::vector<TransferCell> transfer_matrix(const std::vector<DatasetManifest>& manifests,
                                          const EmbeddingCache& cache,
                                          const TrainConfig& config,
                                          bool include_combined) {
    if (manifests.size() < 2)
        throw ConfigError("config-invalid", "transfer needs at least two manifests");
    TrainConfig cfg = config;
    cfg.model.c_harm = 3;  // harm2 comes from merging the 3-class predictions

    std::vector<DatasetManifest> rows = manifests;
    if (include_combined) {
        DatasetManifest combined;
        combined.name = "combined";
        std::set<std::string> seen;
        for (const auto& m : manifests) {
            for (const auto& r : m.records) {
                if (!seen.insert(r.id).second)
                    throw Error("manifest-invalid",
                                "duplicate id across transfer manifests: " + r.id);
                combined.records.push_back(r);
            }
        }
        rows.push_back(std::move(combined));
    }

    std::vector<TransferCell> cells;
    for (const auto& train_row : rows) {
        TrainResult trained = train(train_row, cache, cfg);
        for (const auto& eval_row : rows) {
            TransferCell cell;
            cell.train_name = train_row.name;
            cell.eval_name = eval_row.name;
            cell.harm2 = evaluate(trained.params, eval_row, cache, EvalTask::harm2,
                                  Split::test, config.threads);
            cell.harm3 = evaluate(trained.params, eval_row, cache, EvalTask::harm3,
                                  Split::test, config.threads);
            cell.target = evaluate(trained.params, eval_row, cache, EvalTask::target,
                                   Split::test, config.threads);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["task"] = std::string(to_string(report.task));
    j["num_examples"] = report.num_examples;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    j["mmae"] = report.mmae;
    j["per_class_f1"] = report.per_class_f1;
    j["confusion"] = report.confusion;
    return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
    return report_json(report).dump(2) + "\n";
}

std::string transfer_to_json(const std::vector<TransferCell>& cells) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& cell : cells) {
        nlohmann::ordered_json j;
        j["train"] = cell.train_name;
        j["eval"] = cell.eval_name;
        j["harm2"] = report_json(cell.harm2);
        j["harm3"] = report_json(cell.harm3);
        j["target"] = report_json(cell.target);
        out.push_back(std::move(j));
    }
    return out.dump(2) + "\n";
}

}  // namespace momenta
