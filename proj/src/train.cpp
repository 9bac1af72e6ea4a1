#include "momenta/train.hpp"

#include <algorithm>
#include <cmath>

#include "momenta/error.hpp"
#include "momenta/rng.hpp"

namespace momenta {

namespace {

Eigen::VectorXd inverse_frequency_alpha(const std::vector<int64_t>& counts) {
    const int k = static_cast<int>(counts.size());
    Eigen::VectorXd alpha(k);
    for (int c = 0; c < k; ++c)
        alpha(c) = 1.0 / static_cast<double>(std::max<int64_t>(counts[c], 1));
    alpha *= static_cast<double>(k) / alpha.sum();  // mean 1
    return alpha;
}

int harm_ordinal_for(HarmLabel harm, int c_harm) {
    return c_harm == 2 ? ordinal_index(merge_to_binary(harm)) : ordinal_index(harm);
}

}  // namespace

LossSpec make_loss_spec(const TrainConfig& config, const DatasetManifest& manifest) {
    LossSpec spec;
    spec.gamma = config.focal_gamma;
    spec.lambda_target = config.lambda_target;
    if (spec.gamma < 0.0)
        throw ConfigError("config-invalid", "focal_gamma must be >= 0");
    if (spec.lambda_target < 0.0)
        throw ConfigError("config-invalid", "lambda_target must be >= 0");

    const int c_harm = config.model.c_harm;
    if (config.focal_alpha_harm) {
        if (static_cast<int>(config.focal_alpha_harm->size()) != c_harm)
            throw ConfigError("config-invalid", "focal_alpha_harm length must equal c_harm");
        spec.alpha_harm = Eigen::Map<const Eigen::VectorXd>(config.focal_alpha_harm->data(),
                                                            c_harm);
    } else {
        std::vector<int64_t> counts(c_harm, 0);
        for (const auto& r : manifest.records)
            if (r.split == Split::train) ++counts[harm_ordinal_for(r.harm, c_harm)];
        spec.alpha_harm = inverse_frequency_alpha(counts);
    }
    if (config.focal_alpha_target) {
        if (static_cast<int>(config.focal_alpha_target->size()) != kNumTargetClasses)
            throw ConfigError("config-invalid", "focal_alpha_target length must be 4");
        spec.alpha_target = Eigen::Map<const Eigen::VectorXd>(
            config.focal_alpha_target->data(), kNumTargetClasses);
    } else {
        std::vector<int64_t> counts(kNumTargetClasses, 0);
        for (const auto& r : manifest.records)
            if (r.split == Split::train && r.target) ++counts[ordinal_index(*r.target)];
        spec.alpha_target = inverse_frequency_alpha(counts);
    }
    return spec;
}

double focal_loss(const Eigen::VectorXd& probs, int true_class,
                  const Eigen::VectorXd& alpha, double gamma) {
    if (true_class < 0 || true_class >= probs.size())
        throw Error("label-invalid", "true class out of range");
    if (alpha.size() != probs.size())
        throw Error("shape-mismatch", "alpha length must match class count");
    if (!probs.allFinite() || probs.minCoeff() < -1e-9 ||
        std::abs(probs.sum() - 1.0) > 1e-5)
        throw Error("probs-invalid", "probabilities are not a distribution");
    double pt = std::clamp(probs(true_class), 1e-7, 1.0);
    return -alpha(true_class) * std::pow(1.0 - pt, gamma) * std::log(pt);
}

namespace {

// d FL / d p_t at the clipped value; zero in the clipped regions.
double focal_dloss_dpt(double pt, double alpha, double gamma) {
    if (pt < 1e-7) return 0.0;
    double pc = std::min(pt, 1.0);
    double q = 1.0 - pc;
    double g = -alpha * std::pow(q, gamma) / pc;
    if (gamma > 0.0 && q > 0.0)
        g += alpha * gamma * std::pow(q, gamma - 1.0) * std::log(pc);
    return g;
}

// d FL / d logits for one example, from the softmax probabilities.
Eigen::VectorXd focal_dloss_dlogits(const Eigen::VectorXd& probs, int true_class,
                                    const Eigen::VectorXd& alpha, double gamma) {
    double pt = probs(true_class);
    double g = focal_dloss_dpt(pt, alpha(true_class), gamma);
    Eigen::VectorXd d = -g * pt * probs;
    d(true_class) += g * pt;
    return d;
}

struct DenseExample {
    Eigen::VectorXd f_image;    // 512
    Eigen::VectorXd f_text;     // 512
    Eigen::MatrixXd proposals;  // n x 4096
    Eigen::MatrixXd attributes; // m x 768
    int harm_ord = 0;           // in the model's c_harm space
    int target_ord = -1;        // -1 when absent
    bool harmful = false;
};

DenseExample to_dense(const EmbeddingBundle& bundle, HarmLabel harm,
                      std::optional<TargetLabel> target, int c_harm) {
    DenseExample e;
    e.f_image = bundle.f_image.cast<double>();
    e.f_text = bundle.f_text.cast<double>();
    e.proposals = bundle.proposals.cast<double>();
    e.attributes = bundle.attributes.cast<double>();
    e.harm_ord = harm_ordinal_for(harm, c_harm);
    e.harmful = harm != HarmLabel::harmless;
    if (e.harmful != target.has_value())
        throw Error("label-inconsistent",
                    "target must be present exactly on harmful records");
    if (target) e.target_ord = ordinal_index(*target);
    return e;
}

struct BatchForward {
    Eigen::MatrixXd FI, FT;      // inputs, 512 x B
    Eigen::MatrixXd Ha, PH, Fi;  // proposal stream (when used)
    Eigen::MatrixXd Ga, PG, Ft;  // attribute stream (when used)
    Eigen::MatrixXd Z;           // 1024 x B
    Eigen::MatrixXd U, S, A;     // CMAF internals (when used)
    Eigen::MatrixXd FM, Yh, Yt;
    std::vector<Eigen::VectorXd> aw, gw;  // per-example attention weights
};

// Whole-batch forward pass; dense layers run as GEMMs so the big weight
// matrices stream once per batch instead of once per example.
BatchForward batch_forward(const std::vector<const DenseExample*>& batch,
                           const ModelParams& p) {
    const int B = static_cast<int>(batch.size());
    const Variant variant = p.config.variant;
    const bool use_props = variant == Variant::full || variant == Variant::clip_proposals ||
                           variant == Variant::no_cmaf;
    const bool use_attrs = variant == Variant::full || variant == Variant::clip_attributes ||
                           variant == Variant::no_cmaf;

    BatchForward f;
    f.FI.resize(kFusedDim, B);
    f.FT.resize(kFusedDim, B);
    for (int e = 0; e < B; ++e) {
        f.FI.col(e) = batch[e]->f_image;
        f.FT.col(e) = batch[e]->f_text;
    }

    f.aw.resize(B);
    if (use_props) {
        f.Ha = Eigen::MatrixXd::Zero(kProposalDim, B);
        for (int e = 0; e < B; ++e) {
            const auto& H = batch[e]->proposals;
            if (H.rows() > 0) {
                f.aw[e] = softmax(H * p.scorer_H);
                f.Ha.col(e) = H.transpose() * f.aw[e];
            }
        }
        f.PH = (p.proj_H.W * f.Ha).colwise() + p.proj_H.b;
        f.Fi = p.mix_I(0) * f.FI + p.mix_I(1) * f.PH;
    } else {
        f.Fi = f.FI;
    }

    f.gw.resize(B);
    if (use_attrs) {
        f.Ga = Eigen::MatrixXd::Zero(kAttributeDim, B);
        for (int e = 0; e < B; ++e) {
            const auto& G = batch[e]->attributes;
            if (G.rows() > 0) {
                f.gw[e] = softmax(G * p.scorer_G);
                f.Ga.col(e) = G.transpose() * f.gw[e];
            }
        }
        f.PG = (p.proj_G.W * f.Ga).colwise() + p.proj_G.b;
        f.Ft = p.mix_T(0) * f.FT + p.mix_T(1) * f.PG;
    } else {
        f.Ft = f.FT;
    }

    f.Z.resize(kCmafInputDim, B);
    f.Z.topRows(kFusedDim) = f.Fi;
    f.Z.bottomRows(kFusedDim) = f.Ft;

    if (variant != Variant::no_cmaf) {
        f.U = (p.cmaf_hidden.W * f.Z).colwise() + p.cmaf_hidden.b;
        f.S = f.U.unaryExpr([](double x) { return softplus(x); });
        Eigen::MatrixXd O = (p.cmaf_out.W * f.S).colwise() + p.cmaf_out.b;
        f.A.resize(2, B);
        for (int e = 0; e < B; ++e) f.A.col(e) = softmax(O.col(e));
        f.FM.resize(kFusedDim, B);
        for (int e = 0; e < B; ++e)
            f.FM.col(e) = p.mix_F(0) * (1.0 + f.A(0, e)) * f.Fi.col(e) +
                          p.mix_F(1) * (1.0 + f.A(1, e)) * f.Ft.col(e);
    } else {
        f.FM = (p.concat_proj.W * f.Z).colwise() + p.concat_proj.b;
    }

    f.Yh = (p.head_harm.W * f.FM).colwise() + p.head_harm.b;
    f.Yt = (p.head_target.W * f.FM).colwise() + p.head_target.b;
    return f;
}

// Mean multitask loss over the batch; gradients of the mean are accumulated
// into *grads when non-null.
double batch_loss_grad(const std::vector<const DenseExample*>& batch,
                       const ModelParams& p, const LossSpec& spec,
                       ModelParams* grads) {
    const int B = static_cast<int>(batch.size());
    const Variant variant = p.config.variant;
    const bool use_props = variant == Variant::full || variant == Variant::clip_proposals ||
                           variant == Variant::no_cmaf;
    const bool use_attrs = variant == Variant::full || variant == Variant::clip_attributes ||
                           variant == Variant::no_cmaf;

    BatchForward f = batch_forward(batch, p);

    double loss = 0.0;
    Eigen::MatrixXd dYh = Eigen::MatrixXd::Zero(p.config.c_harm, B);
    Eigen::MatrixXd dYt = Eigen::MatrixXd::Zero(kNumTargetClasses, B);
    const double inv_b = 1.0 / B;
    // Non-finite activations surface as a NaN loss so the training loop can
    // report the divergence position instead of a validation error.
    if (!f.Yh.allFinite() || !f.Yt.allFinite())
        return std::numeric_limits<double>::quiet_NaN();
    for (int e = 0; e < B; ++e) {
        Eigen::VectorXd ph = softmax(f.Yh.col(e));
        loss += focal_loss(ph, batch[e]->harm_ord, spec.alpha_harm, spec.gamma);
        if (grads)
            dYh.col(e) = inv_b * focal_dloss_dlogits(ph, batch[e]->harm_ord,
                                                     spec.alpha_harm, spec.gamma);
        if (batch[e]->harmful) {
            Eigen::VectorXd pt = softmax(f.Yt.col(e));
            loss += spec.lambda_target *
                    focal_loss(pt, batch[e]->target_ord, spec.alpha_target, spec.gamma);
            if (grads && spec.lambda_target != 0.0)
                dYt.col(e) = (spec.lambda_target * inv_b) *
                             focal_dloss_dlogits(pt, batch[e]->target_ord,
                                                 spec.alpha_target, spec.gamma);
        }
    }
    loss *= inv_b;
    if (!grads) return loss;

    ModelParams& g = *grads;
    g.head_harm.W += dYh * f.FM.transpose();
    g.head_harm.b += dYh.rowwise().sum();
    g.head_target.W += dYt * f.FM.transpose();
    g.head_target.b += dYt.rowwise().sum();

    Eigen::MatrixXd dFM =
        p.head_harm.W.transpose() * dYh + p.head_target.W.transpose() * dYt;

    Eigen::MatrixXd dFi, dFt;
    if (variant != Variant::no_cmaf) {
        Eigen::VectorXd da_v(B), da_t(B);
        dFi.resize(kFusedDim, B);
        dFt.resize(kFusedDim, B);
        for (int e = 0; e < B; ++e) {
            Eigen::VectorXd fv = (1.0 + f.A(0, e)) * f.Fi.col(e);
            Eigen::VectorXd ft2 = (1.0 + f.A(1, e)) * f.Ft.col(e);
            g.mix_F(0) += dFM.col(e).dot(fv);
            g.mix_F(1) += dFM.col(e).dot(ft2);
            Eigen::VectorXd dfv = p.mix_F(0) * dFM.col(e);
            Eigen::VectorXd dft2 = p.mix_F(1) * dFM.col(e);
            da_v(e) = dfv.dot(f.Fi.col(e));
            da_t(e) = dft2.dot(f.Ft.col(e));
            dFi.col(e) = (1.0 + f.A(0, e)) * dfv;
            dFt.col(e) = (1.0 + f.A(1, e)) * dft2;
        }
        // softmax over the two modality scores
        Eigen::MatrixXd dO(2, B);
        for (int e = 0; e < B; ++e) {
            double s = f.A(0, e) * da_v(e) + f.A(1, e) * da_t(e);
            dO(0, e) = f.A(0, e) * (da_v(e) - s);
            dO(1, e) = f.A(1, e) * (da_t(e) - s);
        }
        g.cmaf_out.W += dO * f.S.transpose();
        g.cmaf_out.b += dO.rowwise().sum();
        Eigen::MatrixXd dS = p.cmaf_out.W.transpose() * dO;
        Eigen::MatrixXd dU =
            dS.array() * f.U.unaryExpr([](double x) { return sigmoid(x); }).array();
        g.cmaf_hidden.W += dU * f.Z.transpose();
        g.cmaf_hidden.b += dU.rowwise().sum();
        Eigen::MatrixXd dZ = p.cmaf_hidden.W.transpose() * dU;
        dFi += dZ.topRows(kFusedDim);
        dFt += dZ.bottomRows(kFusedDim);
    } else {
        g.concat_proj.W += dFM * f.Z.transpose();
        g.concat_proj.b += dFM.rowwise().sum();
        Eigen::MatrixXd dZ = p.concat_proj.W.transpose() * dFM;
        dFi = dZ.topRows(kFusedDim);
        dFt = dZ.bottomRows(kFusedDim);
    }

    if (use_props) {
        for (int e = 0; e < B; ++e) {
            g.mix_I(0) += dFi.col(e).dot(f.FI.col(e));
            g.mix_I(1) += dFi.col(e).dot(f.PH.col(e));
        }
        Eigen::MatrixXd dPH = p.mix_I(1) * dFi;
        g.proj_H.W += dPH * f.Ha.transpose();
        g.proj_H.b += dPH.rowwise().sum();
        Eigen::MatrixXd dHa = p.proj_H.W.transpose() * dPH;
        for (int e = 0; e < B; ++e) {
            const auto& H = batch[e]->proposals;
            if (H.rows() == 0) continue;
            Eigen::VectorXd daw = H * dHa.col(e);
            double s = f.aw[e].dot(daw);
            Eigen::VectorXd ds = f.aw[e].array() * (daw.array() - s);
            g.scorer_H += H.transpose() * ds;
        }
    }
    if (use_attrs) {
        for (int e = 0; e < B; ++e) {
            g.mix_T(0) += dFt.col(e).dot(f.FT.col(e));
            g.mix_T(1) += dFt.col(e).dot(f.PG.col(e));
        }
        Eigen::MatrixXd dPG = p.mix_T(1) * dFt;
        g.proj_G.W += dPG * f.Ga.transpose();
        g.proj_G.b += dPG.rowwise().sum();
        Eigen::MatrixXd dGa = p.proj_G.W.transpose() * dPG;
        for (int e = 0; e < B; ++e) {
            const auto& G = batch[e]->attributes;
            if (G.rows() == 0) continue;
            Eigen::VectorXd dgw = G * dGa.col(e);
            double s = f.gw[e].dot(dgw);
            Eigen::VectorXd ds = f.gw[e].array() * (dgw.array() - s);
            g.scorer_G += G.transpose() * ds;
        }
    }
    return loss;
}

struct AdamState {
    ModelParams m;
    ModelParams v;
    int64_t step = 0;
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& config) {
    ++state.step;
    const double b1 = config.beta1, b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr = config.learning_rate;
    const double eps = config.adam_epsilon;
    visit_tensors(
        [&](const char*, auto& w, const auto& dw, auto& m, auto& v) {
            m = b1 * m + (1.0 - b1) * dw;
            v.array() = b2 * v.array() + (1.0 - b2) * dw.array().square();
            w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
        },
        params, grads, state.m, state.v);
}

}  // namespace

double multitask_loss(const ForwardTrace& trace, HarmLabel harm,
                      std::optional<TargetLabel> target, const LossSpec& spec,
                      int c_harm) {
    bool harmful = harm != HarmLabel::harmless;
    if (harmful != target.has_value())
        throw Error("label-inconsistent", "target must be present exactly on harmful records");
    double loss = focal_loss(softmax(trace.logits_harm), harm_ordinal_for(harm, c_harm),
                             spec.alpha_harm, spec.gamma);
    if (harmful)
        loss += spec.lambda_target * focal_loss(softmax(trace.logits_target),
                                                ordinal_index(*target), spec.alpha_target,
                                                spec.gamma);
    return loss;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    visit_tensors([](const char*, auto& t) { t.setZero(); }, z);
    return z;
}

ModelParams loss_gradients(const EmbeddingBundle& bundle, HarmLabel harm,
                           std::optional<TargetLabel> target,
                           const ModelParams& params, const LossSpec& spec) {
    DenseExample e = to_dense(bundle, harm, target, params.config.c_harm);
    ModelParams grads = zeros_like(params);
    std::vector<const DenseExample*> batch{&e};
    batch_loss_grad(batch, params, spec, &grads);
    return grads;
}

TrainResult train(const DatasetManifest& manifest, const EmbeddingCache& cache,
                  const TrainConfig& config) {
    if (config.batch_size <= 0 || config.epochs <= 0 || config.learning_rate <= 0.0)
        throw ConfigError("config-invalid",
                          "batch_size, epochs and learning_rate must be positive");

    LossSpec spec = make_loss_spec(config, manifest);

    std::vector<DenseExample> train_ex, val_ex;
    for (const auto& r : manifest.records) {
        if (r.split == Split::test) continue;
        auto bundle = cache.get(r.id);
        if (!bundle)
            throw Error("missing-embeddings", "no cached embedding for record " + r.id);
        DenseExample e = to_dense(*bundle, r.harm, r.target, config.model.c_harm);
        (r.split == Split::train ? train_ex : val_ex).push_back(std::move(e));
    }
    if (train_ex.empty())
        throw Error("manifest-invalid", "no training records in manifest");

    ModelParams params = init_params(config.seed, config.model);
    AdamState state{zeros_like(params), zeros_like(params), 0};
    ModelParams grads = zeros_like(params);

    std::vector<const DenseExample*> val_batch;
    for (const auto& e : val_ex) val_batch.push_back(&e);
    auto val_accuracy = [&]() -> std::optional<double> {
        if (val_batch.empty()) return std::nullopt;
        BatchForward f = batch_forward(val_batch, params);
        int correct = 0;
        for (int e = 0; e < static_cast<int>(val_batch.size()); ++e) {
            int pred;
            f.Yh.col(e).maxCoeff(&pred);
            if (pred == val_batch[e]->harm_ord) ++correct;
        }
        return 100.0 * correct / static_cast<double>(val_batch.size());
    };

    TrainResult result;
    std::vector<size_t> order(train_ex.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_val = -1.0;
    int since_best = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffler(derive_key(config.seed, "shuffle/" + std::to_string(epoch)));
        shuffler.shuffle(order);

        double epoch_loss = 0.0;
        size_t seen = 0;
        const size_t bs = static_cast<size_t>(config.batch_size);
        for (size_t start = 0; start < order.size(); start += bs) {
            size_t end = std::min(start + bs, order.size());
            std::vector<const DenseExample*> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(&train_ex[order[i]]);

            visit_tensors([](const char*, auto& t) { t.setZero(); }, grads);
            double loss = batch_loss_grad(batch, params, spec, &grads);
            if (!std::isfinite(loss))
                throw Error("divergence", "non-finite loss at epoch " +
                                              std::to_string(epoch) + " batch " +
                                              std::to_string(start / bs));
            adam_step(params, grads, state, config);
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(seen);
        stats.val_accuracy = val_accuracy();
        result.history.push_back(stats);

        if (config.early_stopping && stats.val_accuracy) {
            if (*stats.val_accuracy > best_val) {
                best_val = *stats.val_accuracy;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
    }
    result.params = std::move(params);
    return result;
}

double dataset_loss(const DatasetManifest& manifest, const EmbeddingCache& cache,
                    const ModelParams& params, const LossSpec& spec, Split split) {
    std::vector<DenseExample> examples;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        auto bundle = cache.get(r.id);
        if (!bundle)
            throw Error("missing-embeddings", "no cached embedding for record " + r.id);
        examples.push_back(to_dense(*bundle, r.harm, r.target, params.config.c_harm));
    }
    if (examples.empty())
        throw Error("manifest-invalid", "split has no records");
    std::vector<const DenseExample*> batch;
    for (const auto& e : examples) batch.push_back(&e);
    return batch_loss_grad(batch, params, spec, nullptr);
}

}  // namespace momenta
