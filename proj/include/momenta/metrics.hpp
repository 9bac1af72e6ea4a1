#pragma once

#include <span>
#include <string>
#include <vector>

#include "momenta/encoder.hpp"
#include "momenta/train.hpp"

namespace momenta {

enum class EvalTask { harm2, harm3, target };

std::string_view to_string(EvalTask t);
EvalTask parse_task(std::string_view s);

int num_classes(EvalTask t);

struct MetricsReport {
    EvalTask task = EvalTask::harm2;
    double accuracy = 0.0;   // percent
    double macro_f1 = 0.0;   // percent
    double mmae = 0.0;
    std::vector<double> per_class_f1;            // percent, one per task class
    std::vector<std::vector<int64_t>> confusion;  // rows = true class
    int64_t num_examples = 0;
};

// Percent of exact matches.
double accuracy_pct(std::span<const int> truth, std::span<const int> predicted);

// Mean per-class F1 over the classes present in truth or predictions;
// a class seen on only one side scores 0 and still counts.
double macro_f1_pct(std::span<const int> truth, std::span<const int> predicted,
                    int num_classes);

// Macro-averaged mean absolute error over the true classes with support.
double mmae(std::span<const int> truth, std::span<const int> predicted, int num_classes);

MetricsReport compute_report(EvalTask task, std::span<const int> truth,
                             std::span<const int> predicted);

// Scores one split (default test) of the manifest. harm2 on a 3-class model
// merges predictions and labels to binary; the target task is restricted to
// harmful records.
MetricsReport evaluate(const ModelParams& params, const DatasetManifest& manifest,
                       const EmbeddingCache& cache, EvalTask task,
                       Split split = Split::test, int threads = 1);

// Predicts the most frequent training-split class for every test record;
// ties break toward the lower ordinal.
MetricsReport majority_baseline(const DatasetManifest& train_manifest,
                                const DatasetManifest& test_manifest, EvalTask task);

struct TransferCell {
    std::string train_name;
    std::string eval_name;
    MetricsReport harm2;
    MetricsReport harm3;
    MetricsReport target;
};

// Trains one 3-class multi-task model per row dataset (plus the concatenation
// when requested) and scores it on every column's test split. All manifests
// must be encoded into the one cache.
std::vector<TransferCell> transfer_matrix(const std::vector<DatasetManifest>& manifests,
                                          const EmbeddingCache& cache,
                                          const TrainConfig& config,
                                          bool include_combined = true);

// Stable-keyed JSON with fields accuracy, macro_f1, mmae, per_class_f1 and
// confusion; identical reports serialize to identical bytes.
std::string report_to_json(const MetricsReport& report);
std::string transfer_to_json(const std::vector<TransferCell>& cells);

}  // namespace momenta
