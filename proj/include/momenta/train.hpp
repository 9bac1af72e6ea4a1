#pragma once

#include <optional>
#include <string>
#include <vector>

#include "momenta/model.hpp"

namespace momenta {

// Training hyperparameters. Defaults are the fusion-model settings: batch 64,
// 50 epochs, Adam at 1e-3.
struct TrainConfig {
    int batch_size = 64;
    int epochs = 50;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double focal_gamma = 2.0;
    // Empty means inverse class frequency on the training split, normalized
    // to mean 1.
    std::optional<std::vector<double>> focal_alpha_harm;
    std::optional<std::vector<double>> focal_alpha_target;
    double lambda_target = 1.0;
    uint64_t seed = 0;
    ModelConfig model;
    int threads = 1;
    bool early_stopping = false;  // fixed-epoch training by default
    int patience = 5;
};

// Resolved loss weighting for both tasks.
struct LossSpec {
    Eigen::VectorXd alpha_harm;    // length c_harm
    Eigen::VectorXd alpha_target;  // length 4
    double gamma = 2.0;
    double lambda_target = 1.0;
};

// Fills the alpha defaults from the manifest's training split.
LossSpec make_loss_spec(const TrainConfig& config, const DatasetManifest& manifest);

// FL = -alpha[t] * (1 - p_t)^gamma * log(p_t), p_t clipped to [1e-7, 1].
// probs must be a distribution (sum within 1e-5 of 1). gamma = 0 with unit
// alpha reduces to cross-entropy.
double focal_loss(const Eigen::VectorXd& probs, int true_class,
                  const Eigen::VectorXd& alpha, double gamma);

// Harm focal loss plus lambda-weighted target focal loss; harmless examples
// contribute no target term at all. The harm label is merged to binary when
// the trace comes from a 2-class model.
double multitask_loss(const ForwardTrace& trace, HarmLabel harm,
                      std::optional<TargetLabel> target, const LossSpec& spec,
                      int c_harm);

// Analytic gradients of multitask_loss for one example, same layout as the
// parameters.
ModelParams loss_gradients(const EmbeddingBundle& bundle, HarmLabel harm,
                           std::optional<TargetLabel> target,
                           const ModelParams& params, const LossSpec& spec);

ModelParams zeros_like(const ModelParams& params);

// Visits every learnable tensor of one or more parameter sets in a fixed
// order, passing the group name first. All sets must share a variant.
template <typename F, typename P0, typename... Ps>
void visit_tensors(F&& f, P0& p0, Ps&... ps) {
    f("scorer_H", p0.scorer_H, ps.scorer_H...);
    f("scorer_G", p0.scorer_G, ps.scorer_G...);
    f("proj_H.W", p0.proj_H.W, ps.proj_H.W...);
    f("proj_H.b", p0.proj_H.b, ps.proj_H.b...);
    f("proj_G.W", p0.proj_G.W, ps.proj_G.W...);
    f("proj_G.b", p0.proj_G.b, ps.proj_G.b...);
    f("mix_I", p0.mix_I, ps.mix_I...);
    f("mix_T", p0.mix_T, ps.mix_T...);
    f("cmaf_hidden.W", p0.cmaf_hidden.W, ps.cmaf_hidden.W...);
    f("cmaf_hidden.b", p0.cmaf_hidden.b, ps.cmaf_hidden.b...);
    f("cmaf_out.W", p0.cmaf_out.W, ps.cmaf_out.W...);
    f("cmaf_out.b", p0.cmaf_out.b, ps.cmaf_out.b...);
    f("mix_F", p0.mix_F, ps.mix_F...);
    if (p0.config.variant == Variant::no_cmaf) {
        f("concat_proj.W", p0.concat_proj.W, ps.concat_proj.W...);
        f("concat_proj.b", p0.concat_proj.b, ps.concat_proj.b...);
    }
    f("head_harm.W", p0.head_harm.W, ps.head_harm.W...);
    f("head_harm.b", p0.head_harm.b, ps.head_harm.b...);
    f("head_target.W", p0.head_target.W, ps.head_target.W...);
    f("head_target.b", p0.head_target.b, ps.head_target.b...);
}

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_accuracy;  // absent without a validation split
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

// Seeded per-epoch shuffling, mini-batch Adam steps on the mean multitask
// loss. Deterministic for fixed (manifest, cache, config); a non-finite loss
// aborts with the epoch/batch position.
TrainResult train(const DatasetManifest& manifest, const EmbeddingCache& cache,
                  const TrainConfig& config);

// Mean multitask loss of one split under fixed parameters.
double dataset_loss(const DatasetManifest& manifest, const EmbeddingCache& cache,
                    const ModelParams& params, const LossSpec& spec, Split split);

}  // namespace momenta
