#include "momenta/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "momenta/error.hpp"
#include "momenta/rng.hpp"

namespace momenta {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::clip_only: return "clip_only";
        case Variant::clip_proposals: return "clip_proposals";
        case Variant::clip_attributes: return "clip_attributes";
        case Variant::no_cmaf: return "no_cmaf";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    if (s == "full") return Variant::full;
    if (s == "clip_only") return Variant::clip_only;
    if (s == "clip_proposals") return Variant::clip_proposals;
    if (s == "clip_attributes") return Variant::clip_attributes;
    if (s == "no_cmaf") return Variant::no_cmaf;
    throw ConfigError("config-invalid", "unknown variant: " + std::string(s));
}

namespace {

constexpr double kInitStd = 0.02;

void fill_gaussian(Eigen::Ref<Eigen::MatrixXd> m, uint64_t seed, std::string_view name) {
    Rng rng(derive_key(seed, name));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = kInitStd * rng.normal();
}

Dense init_dense(int out_dim, int in_dim, uint64_t seed, std::string_view name) {
    Dense d;
    d.W.resize(out_dim, in_dim);
    fill_gaussian(d.W, seed, name);
    d.b = Eigen::VectorXd::Zero(out_dim);
    return d;
}

}  // namespace

ModelParams init_params(uint64_t seed, const ModelConfig& config) {
    if (config.c_harm != 2 && config.c_harm != 3)
        throw ConfigError("config-invalid",
                          "c_harm must be 2 or 3, got " + std::to_string(config.c_harm));
    if (config.hidden <= 0)
        throw ConfigError("config-invalid", "hidden width must be positive");

    ModelParams p;
    p.config = config;
    p.seed = seed;

    p.scorer_H.resize(kProposalDim);
    fill_gaussian(p.scorer_H, seed, "scorer_H");
    p.scorer_G.resize(kAttributeDim);
    fill_gaussian(p.scorer_G, seed, "scorer_G");
    p.proj_H = init_dense(kFusedDim, kProposalDim, seed, "proj_H");
    p.proj_G = init_dense(kFusedDim, kAttributeDim, seed, "proj_G");
    fill_gaussian(p.mix_I, seed, "mix_I");
    fill_gaussian(p.mix_T, seed, "mix_T");
    p.cmaf_hidden = init_dense(config.hidden, kCmafInputDim, seed, "cmaf_hidden");
    p.cmaf_out = init_dense(2, config.hidden, seed, "cmaf_out");
    fill_gaussian(p.mix_F, seed, "mix_F");
    if (config.variant == Variant::no_cmaf)
        p.concat_proj = init_dense(kFusedDim, kCmafInputDim, seed, "concat_proj");
    p.head_harm = init_dense(config.c_harm, kFusedDim, seed, "head_harm");
    p.head_target = init_dense(kNumTargetClasses, kFusedDim, seed, "head_target");
    return p;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    if (scores.size() == 0) return scores;
    double m = scores.maxCoeff();
    Eigen::VectorXd e = (scores.array() - m).exp();
    return e / e.sum();
}

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> self_attend(const Eigen::MatrixXd& rows,
                                                        const Eigen::VectorXd& scorer) {
    if (rows.rows() == 0)
        return {Eigen::VectorXd::Zero(scorer.size()), Eigen::VectorXd()};
    if (rows.cols() != scorer.size())
        throw Error("shape-mismatch",
                    "self_attend: rows have " + std::to_string(rows.cols()) +
                        " columns, scorer has " + std::to_string(scorer.size()));
    Eigen::VectorXd weights = softmax(rows * scorer);
    Eigen::VectorXd pooled = rows.transpose() * weights;
    return {pooled, weights};
}

Eigen::VectorXd fuse_intra(const Eigen::VectorXd& global_vec,
                           const Eigen::VectorXd& local_pooled, const Dense& proj,
                           const Eigen::Vector2d& mix) {
    if (proj.W.cols() != local_pooled.size() || proj.W.rows() != global_vec.size())
        throw Error("shape-mismatch", "fuse_intra: projection does not map local to global");
    return mix(0) * global_vec + mix(1) * proj.apply(local_pooled);
}

CmafResult cmaf(const Eigen::VectorXd& f_i_res, const Eigen::VectorXd& f_t_res,
                const ModelParams& params) {
    Eigen::VectorXd z(kCmafInputDim);
    z << f_i_res, f_t_res;
    Eigen::VectorXd pre = params.cmaf_hidden.apply(z);
    Eigen::VectorXd act = pre.unaryExpr([](double x) { return softplus(x); });
    Eigen::VectorXd scores = softmax(params.cmaf_out.apply(act));
    CmafResult r;
    r.a_v = scores(0);
    r.a_t = scores(1);
    r.f_meme = params.mix_F(0) * (1.0 + r.a_v) * f_i_res +
               params.mix_F(1) * (1.0 + r.a_t) * f_t_res;
    return r;
}

ForwardTrace forward(const EmbeddingBundle& bundle, const ModelParams& params,
                     Variant variant) {
    if (variant != params.config.variant)
        throw Error("variant-mismatch",
                    std::string("params built for ") + std::string(to_string(params.config.variant)) +
                        ", forward requested " + std::string(to_string(variant)));

    ForwardTrace t;
    t.h_att = Eigen::VectorXd::Zero(kProposalDim);
    t.g_att = Eigen::VectorXd::Zero(kAttributeDim);

    const Eigen::VectorXd f_i = bundle.f_image.cast<double>();
    const Eigen::VectorXd f_t = bundle.f_text.cast<double>();

    const bool use_proposals =
        variant == Variant::full || variant == Variant::clip_proposals ||
        variant == Variant::no_cmaf;
    const bool use_attributes =
        variant == Variant::full || variant == Variant::clip_attributes ||
        variant == Variant::no_cmaf;

    if (use_proposals) {
        auto [pooled, weights] = self_attend(bundle.proposals.cast<double>(), params.scorer_H);
        t.h_att = pooled;
        t.proposal_weights = weights;
        t.proj_h_out = params.proj_H.apply(t.h_att);
        t.f_i_res = params.mix_I(0) * f_i + params.mix_I(1) * t.proj_h_out;
    } else {
        t.f_i_res = f_i;
    }

    if (use_attributes) {
        auto [pooled, weights] = self_attend(bundle.attributes.cast<double>(), params.scorer_G);
        t.g_att = pooled;
        t.attribute_weights = weights;
        t.proj_g_out = params.proj_G.apply(t.g_att);
        t.f_t_res = params.mix_T(0) * f_t + params.mix_T(1) * t.proj_g_out;
    } else {
        t.f_t_res = f_t;
    }

    if (variant == Variant::no_cmaf) {
        Eigen::VectorXd z(kCmafInputDim);
        z << t.f_i_res, t.f_t_res;
        t.f_meme = params.concat_proj.apply(z);
        t.a_v = 0.5;  // no modality attention in this variant
        t.a_t = 0.5;
    } else {
        Eigen::VectorXd z(kCmafInputDim);
        z << t.f_i_res, t.f_t_res;
        t.cmaf_pre = params.cmaf_hidden.apply(z);
        t.cmaf_act = t.cmaf_pre.unaryExpr([](double x) { return softplus(x); });
        Eigen::VectorXd scores = softmax(params.cmaf_out.apply(t.cmaf_act));
        t.a_v = scores(0);
        t.a_t = scores(1);
        t.f_meme = params.mix_F(0) * (1.0 + t.a_v) * t.f_i_res +
                   params.mix_F(1) * (1.0 + t.a_t) * t.f_t_res;
    }

    t.logits_harm = params.head_harm.apply(t.f_meme);
    t.logits_target = params.head_target.apply(t.f_meme);
    return t;
}

namespace {

void put_tensor(TensorFile& file, const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<float> values(static_cast<size_t>(m.rows()) * m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            values[static_cast<size_t>(r) * m.cols() + c] = static_cast<float>(m(r, c));
    uint32_t dims[] = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
    file.put_f32(name, dims, values);
}

Eigen::MatrixXd get_tensor(const TensorFile& file, const std::string& name) {
    auto e = file.get(name);
    if (!e)
        throw Error("checkpoint-invalid", "missing tensor: " + name);
    if (e->dims.size() != 2)
        throw Error("checkpoint-invalid", "tensor is not rank 2: " + name);
    Eigen::MatrixXd m(e->dims[0], e->dims[1]);
    for (uint32_t r = 0; r < e->dims[0]; ++r)
        for (uint32_t c = 0; c < e->dims[1]; ++c)
            m(r, c) = e->f32[static_cast<size_t>(r) * e->dims[1] + c];
    return m;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    if (std::filesystem::exists(path))
        std::filesystem::remove(path);
    TensorFile file = TensorFile::open_rw(path);
    put_tensor(file, "scorer_H", params.scorer_H);
    put_tensor(file, "scorer_G", params.scorer_G);
    put_tensor(file, "proj_H.W", params.proj_H.W);
    put_tensor(file, "proj_H.b", params.proj_H.b);
    put_tensor(file, "proj_G.W", params.proj_G.W);
    put_tensor(file, "proj_G.b", params.proj_G.b);
    put_tensor(file, "mix_I", params.mix_I);
    put_tensor(file, "mix_T", params.mix_T);
    put_tensor(file, "cmaf_hidden.W", params.cmaf_hidden.W);
    put_tensor(file, "cmaf_hidden.b", params.cmaf_hidden.b);
    put_tensor(file, "cmaf_out.W", params.cmaf_out.W);
    put_tensor(file, "cmaf_out.b", params.cmaf_out.b);
    put_tensor(file, "mix_F", params.mix_F);
    if (params.config.variant == Variant::no_cmaf) {
        put_tensor(file, "concat_proj.W", params.concat_proj.W);
        put_tensor(file, "concat_proj.b", params.concat_proj.b);
    }
    put_tensor(file, "head_harm.W", params.head_harm.W);
    put_tensor(file, "head_harm.b", params.head_harm.b);
    put_tensor(file, "head_target.W", params.head_target.W);
    put_tensor(file, "head_target.b", params.head_target.b);

    nlohmann::ordered_json meta;
    meta["variant"] = std::string(to_string(params.config.variant));
    meta["c_harm"] = params.config.c_harm;
    meta["hidden"] = params.config.hidden;
    meta["seed"] = params.seed;
    meta["schema_version"] = kSchemaVersion;
    std::ofstream out(path + ".meta.json", std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot write checkpoint metadata: " + path + ".meta.json");
    out << meta.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw Error("checkpoint-not-found", "no checkpoint at " + path);
    std::ifstream meta_in(path + ".meta.json", std::ios::binary);
    if (!meta_in)
        throw Error("checkpoint-not-found", "missing metadata sidecar: " + path + ".meta.json");
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint-invalid", std::string("bad metadata: ") + e.what());
    }

    ModelParams p;
    p.config.variant = parse_variant(meta.at("variant").get<std::string>());
    p.config.c_harm = meta.at("c_harm").get<int>();
    p.config.hidden = meta.at("hidden").get<int>();
    p.seed = meta.at("seed").get<uint64_t>();

    TensorFile file = TensorFile::open_ro(path);
    p.scorer_H = get_tensor(file, "scorer_H");
    p.scorer_G = get_tensor(file, "scorer_G");
    p.proj_H.W = get_tensor(file, "proj_H.W");
    p.proj_H.b = get_tensor(file, "proj_H.b");
    p.proj_G.W = get_tensor(file, "proj_G.W");
    p.proj_G.b = get_tensor(file, "proj_G.b");
    p.mix_I = get_tensor(file, "mix_I");
    p.mix_T = get_tensor(file, "mix_T");
    p.cmaf_hidden.W = get_tensor(file, "cmaf_hidden.W");
    p.cmaf_hidden.b = get_tensor(file, "cmaf_hidden.b");
    p.cmaf_out.W = get_tensor(file, "cmaf_out.W");
    p.cmaf_out.b = get_tensor(file, "cmaf_out.b");
    p.mix_F = get_tensor(file, "mix_F");
    if (p.config.variant == Variant::no_cmaf) {
        p.concat_proj.W = get_tensor(file, "concat_proj.W");
        p.concat_proj.b = get_tensor(file, "concat_proj.b");
    }
    p.head_harm.W = get_tensor(file, "head_harm.W");
    p.head_harm.b = get_tensor(file, "head_harm.b");
    p.head_target.W = get_tensor(file, "head_target.W");
    p.head_target.b = get_tensor(file, "head_target.b");
    return p;
}

}  // namespace momenta
