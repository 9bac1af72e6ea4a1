#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "momenta/encoder.hpp"

namespace momenta {

// Ablation variants of the fusion network.
//   full            both local streams, cross-modality attention fusion
//   clip_only       global embeddings straight into the fusion head
//   clip_proposals  local fusion on the image side only
//   clip_attributes local fusion on the text side only
//   no_cmaf         attention fusion replaced by concat + dense 1024->512
enum class Variant { full, clip_only, clip_proposals, clip_attributes, no_cmaf };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

constexpr int kFusedDim = 512;
constexpr int kCmafInputDim = 2 * kFusedDim;

struct Dense {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return W * x + b; }
};

struct ModelConfig {
    int c_harm = 3;       // 2 or 3 harm classes
    int hidden = 128;     // CMAF score-network hidden width
    Variant variant = Variant::full;
};

// Every learnable tensor of the network. concat_proj exists only for the
// no_cmaf variant. The 2-vectors mix_I/mix_T/mix_F weight a stacked pair of
// 512-vectors, which keeps the fused representation at 512 throughout.
struct ModelParams {
    ModelConfig config;
    uint64_t seed = 0;

    Eigen::VectorXd scorer_H;  // 4096, proposal self-attention scorer
    Eigen::VectorXd scorer_G;  // 768, attribute self-attention scorer
    Dense proj_H;              // 4096 -> 512
    Dense proj_G;              // 768 -> 512
    Eigen::Vector2d mix_I;
    Eigen::Vector2d mix_T;
    Dense cmaf_hidden;         // 1024 -> hidden
    Dense cmaf_out;            // hidden -> 2
    Eigen::Vector2d mix_F;
    Dense concat_proj;         // 1024 -> 512 (no_cmaf only, else empty)
    Dense head_harm;           // 512 -> c_harm
    Dense head_target;         // 512 -> 4
};

// Weights ~ N(0, 0.02^2) from per-tensor streams derived from the seed,
// biases zero. Per-tensor streams keep shared tensors identical across
// variants for the same seed.
ModelParams init_params(uint64_t seed, const ModelConfig& config);

// Activations of one forward pass, including everything the explanation
// surface exposes (modality scores and both local attention weight vectors).
struct ForwardTrace {
    Eigen::VectorXd h_att;      // 4096 pooled proposals (zero when unused/empty)
    Eigen::VectorXd g_att;      // 768 pooled attributes
    Eigen::VectorXd f_i_res;    // 512
    Eigen::VectorXd f_t_res;    // 512
    double a_v = 0.5;
    double a_t = 0.5;
    Eigen::VectorXd f_meme;     // 512
    Eigen::VectorXd logits_harm;
    Eigen::VectorXd logits_target;
    Eigen::VectorXd proposal_weights;   // n (empty when n = 0 or stream unused)
    Eigen::VectorXd attribute_weights;  // m

    // intermediates kept for the backward pass
    Eigen::VectorXd cmaf_pre;     // hidden pre-activation
    Eigen::VectorXd cmaf_act;     // softplus(cmaf_pre)
    Eigen::VectorXd proj_h_out;   // 512
    Eigen::VectorXd proj_g_out;   // 512
};

Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

// softplus(x) = log(1 + e^x), the smooth ramp used inside CMAF.
double softplus(double x);
double sigmoid(double x);

// weights = softmax(rows * scorer); pooled = rows^T * weights.
// k = 0 pools to the zero vector with empty weights.
std::pair<Eigen::VectorXd, Eigen::VectorXd> self_attend(const Eigen::MatrixXd& rows,
                                                        const Eigen::VectorXd& scorer);

// mix[0]*global + mix[1]*(W*local + b): the learnable 2-weight combination of
// a global embedding with its projected local pooled vector.
Eigen::VectorXd fuse_intra(const Eigen::VectorXd& global_vec,
                           const Eigen::VectorXd& local_pooled, const Dense& proj,
                           const Eigen::Vector2d& mix);

struct CmafResult {
    Eigen::VectorXd f_meme;
    double a_v = 0.0;
    double a_t = 0.0;
};

// Modality attention generation plus weighted residual combination:
// (a_v, a_t) = softmax over a small score network on [f_i_res; f_t_res],
// then f_meme = mix_F[0]*(1+a_v)*f_i_res + mix_F[1]*(1+a_t)*f_t_res.
CmafResult cmaf(const Eigen::VectorXd& f_i_res, const Eigen::VectorXd& f_t_res,
                const ModelParams& params);

// Full forward pass for the requested variant. Pure: identical inputs give
// identical traces. Throws "variant-mismatch" when params were built for a
// different variant.
ForwardTrace forward(const EmbeddingBundle& bundle, const ModelParams& params,
                     Variant variant);

// Checkpoints use the shared container format (one f32 tensor per entry)
// plus a JSON sidecar at <path>.meta.json carrying variant, c_harm, hidden
// and seed.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace momenta
