#include <doctest.h>

#include <filesystem>

#include "momenta/error.hpp"
#include "momenta/model.hpp"
#include "momenta/rng.hpp"

using namespace momenta;

namespace {

MemeRecord record_for(const std::string& id) {
    MemeRecord r;
    r.id = id;
    r.ocr_text = "text " + id;
    r.image_ref = "synthetic://" + id;
    r.source = "unit";
    r.width = 400;
    r.height = 300;
    return r;
}

EmbeddingBundle bundle_for(const std::string& id, std::optional<int> n = {},
                           std::optional<int> m = {}) {
    SyntheticBackend backend({n, m});
    return backend.encode(record_for(id));
}

}  // namespace

TEST_CASE("self-attention over one row returns that row") {
    Eigen::MatrixXd rows(1, 4);
    rows << 1.0, -2.0, 0.5, 3.0;
    Eigen::VectorXd scorer = Eigen::VectorXd::Ones(4);
    auto [pooled, weights] = self_attend(rows, scorer);
    REQUIRE(weights.size() == 1);
    CHECK(weights(0) == doctest::Approx(1.0));
    CHECK(pooled.isApprox(rows.row(0).transpose()));
}

TEST_CASE("identical rows share the weight evenly") {
    Eigen::MatrixXd rows(2, 3);
    rows << 1, 2, 3, 1, 2, 3;
    Eigen::VectorXd scorer(3);
    scorer << 0.3, -0.1, 0.2;
    auto [pooled, weights] = self_attend(rows, scorer);
    CHECK(weights(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(weights(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pooled.isApprox(rows.row(0).transpose(), 1e-12));
}

TEST_CASE("self-attention hand value on two orthogonal rows") {
    Eigen::MatrixXd rows(2, 2);
    rows << 1, 0, 0, 1;
    Eigen::VectorXd scorer(2);
    scorer << 1, 0;
    auto [pooled, weights] = self_attend(rows, scorer);
    const double e = std::exp(1.0);
    double w0 = e / (e + 1.0);  // 0.7311
    CHECK(weights(0) == doctest::Approx(w0).epsilon(1e-12));
    CHECK(weights(1) == doctest::Approx(1.0 - w0).epsilon(1e-12));
    CHECK(pooled(0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(pooled(1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("self-attention of an empty set pools to zero") {
    Eigen::MatrixXd rows(0, 5);
    Eigen::VectorXd scorer = Eigen::VectorXd::Ones(5);
    auto [pooled, weights] = self_attend(rows, scorer);
    CHECK(pooled.isZero());
    CHECK(weights.size() == 0);
}

TEST_CASE("self-attention weights are invariant under constant score shifts") {
    Rng rng(3);
    Eigen::MatrixXd rows(4, 6);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c) rows(r, c) = rng.normal();
    Eigen::VectorXd scorer(6);
    for (int c = 0; c < 6; ++c) scorer(c) = rng.normal();
    auto [pooled1, w1] = self_attend(rows, scorer);
    // adding a constant column to every row shifts all scores equally
    Eigen::MatrixXd shifted = rows;
    Eigen::VectorXd scorer2 = scorer;
    auto scores = rows * scorer;
    auto probs = softmax(scores);
    auto probs_shifted = softmax((scores.array() + 7.5).matrix());
    CHECK(probs.isApprox(probs_shifted, 1e-12));
    CHECK(w1.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w1.minCoeff() >= 0.0);
    (void)pooled1;
    (void)shifted;
    (void)scorer2;
}

TEST_CASE("fuse_intra mixes the global and projected local vectors") {
    const int d = 8;
    Eigen::VectorXd global = Eigen::VectorXd::Ones(d);
    Eigen::VectorXd local = Eigen::VectorXd::Constant(d, 2.0);
    Dense proj;
    proj.W = Eigen::MatrixXd::Identity(d, d);
    proj.b = Eigen::VectorXd::Zero(d);

    CHECK(fuse_intra(global, local, proj, {1.0, 0.0}).isApprox(global));
    CHECK(fuse_intra(global, local, proj, {0.0, 1.0}).isApprox(local));

    Dense zero;
    zero.W = Eigen::MatrixXd::Zero(d, d);
    zero.b = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd mixed = fuse_intra(global, local, zero, {0.5, 0.5});
    CHECK(mixed.isApprox(Eigen::VectorXd::Constant(d, 0.5)));

    Dense wrong;
    wrong.W = Eigen::MatrixXd::Zero(d, d + 1);
    wrong.b = Eigen::VectorXd::Zero(d);
    CHECK_THROWS_AS(fuse_intra(global, local, wrong, {0.5, 0.5}), Error);
}

TEST_CASE("cmaf with a zeroed score head splits attention evenly") {
    ModelParams p = init_params(11, {});
    p.cmaf_out.W.setZero();
    p.cmaf_out.b.setZero();
    Eigen::VectorXd fi = Eigen::VectorXd::Ones(kFusedDim);
    Eigen::VectorXd ft = Eigen::VectorXd::Constant(kFusedDim, -1.0);
    auto r = cmaf(fi, ft, p);
    CHECK(r.a_v == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.a_t == doctest::Approx(0.5).epsilon(1e-12));
    Eigen::VectorXd expected = p.mix_F(0) * 1.5 * fi + p.mix_F(1) * 1.5 * ft;
    CHECK(r.f_meme.isApprox(expected, 1e-12));
}

TEST_CASE("cmaf isolates the image stream when the text side is zero") {
    ModelParams p = init_params(12, {});
    p.mix_F << 1.0, 0.0;
    Eigen::VectorXd fi = Eigen::VectorXd::Random(kFusedDim);
    Eigen::VectorXd ft = Eigen::VectorXd::Zero(kFusedDim);
    auto r = cmaf(fi, ft, p);
    CHECK(r.f_meme.isApprox((1.0 + r.a_v) * fi, 1e-12));
}

TEST_CASE("modality scores always sum to one") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        ModelParams p = init_params(rng.next_u64(), {});
        Eigen::VectorXd fi(kFusedDim), ft(kFusedDim);
        for (int k = 0; k < kFusedDim; ++k) {
            fi(k) = 3.0 * rng.normal();
            ft(k) = 3.0 * rng.normal();
        }
        auto r = cmaf(fi, ft, p);
        CHECK(std::abs(r.a_v + r.a_t - 1.0) < 1e-6);
    }
}

TEST_CASE("init_params is deterministic and has the declared shapes") {
    ModelParams a = init_params(5, {3, 128, Variant::full});
    ModelParams b = init_params(5, {3, 128, Variant::full});
    CHECK(a.scorer_H == b.scorer_H);
    CHECK(a.proj_H.W == b.proj_H.W);
    CHECK(a.head_harm.W == b.head_harm.W);
    ModelParams c = init_params(6, {3, 128, Variant::full});
    CHECK(a.scorer_H != c.scorer_H);

    CHECK(a.scorer_H.size() == 4096);
    CHECK(a.scorer_G.size() == 768);
    CHECK(a.proj_H.W.rows() == 512);
    CHECK(a.proj_H.W.cols() == 4096);
    CHECK(a.cmaf_hidden.W.rows() == 128);
    CHECK(a.cmaf_hidden.W.cols() == 1024);
    CHECK(a.cmaf_out.W.rows() == 2);
    CHECK(a.head_harm.W.rows() == 3);
    CHECK(a.head_target.W.rows() == 4);
    CHECK(a.proj_H.b.isZero());
    CHECK(a.head_harm.b.isZero());
    CHECK(a.concat_proj.W.size() == 0);  // full variant has no concat dense

    ModelParams two = init_params(5, {2, 128, Variant::full});
    CHECK(two.head_harm.W.rows() == 2);
    ModelParams nc = init_params(5, {3, 128, Variant::no_cmaf});
    CHECK(nc.concat_proj.W.rows() == 512);
    CHECK(nc.concat_proj.W.cols() == 1024);

    CHECK_THROWS_AS(init_params(5, {4, 128, Variant::full}), ConfigError);
}

TEST_CASE("initialization matches the declared scale") {
    ModelParams p = init_params(21, {});
    double mean = p.scorer_H.mean();
    double sd = std::sqrt((p.scorer_H.array() - mean).square().mean());
    CHECK(std::abs(mean) < 0.002);
    CHECK(sd == doctest::Approx(0.02).epsilon(0.15));  // 0.02 +- 0.003
}

TEST_CASE("forward produces finite logits for empty detections") {
    ModelParams p = init_params(31, {});
    auto bundle = bundle_for("empty", 0, 0);
    ForwardTrace t = forward(bundle, p, Variant::full);
    CHECK(t.logits_harm.size() == 3);
    CHECK(t.logits_target.size() == 4);
    CHECK(t.logits_harm.allFinite());
    CHECK(t.logits_target.allFinite());
    CHECK(t.proposal_weights.size() == 0);
    CHECK(t.attribute_weights.size() == 0);
    CHECK(t.h_att.isZero());
    CHECK(t.g_att.isZero());
}

TEST_CASE("forward is pure and attention weights normalize") {
    ModelParams p = init_params(32, {});
    auto bundle = bundle_for("pure", 3, 2);
    ForwardTrace t1 = forward(bundle, p, Variant::full);
    ForwardTrace t2 = forward(bundle, p, Variant::full);
    CHECK(t1.logits_harm == t2.logits_harm);
    CHECK(t1.logits_target == t2.logits_target);
    CHECK(std::abs(t1.a_v + t1.a_t - 1.0) < 1e-6);
    CHECK(std::abs(t1.proposal_weights.sum() - 1.0) < 1e-6);
    CHECK(std::abs(t1.attribute_weights.sum() - 1.0) < 1e-6);
    CHECK(t1.proposal_weights.minCoeff() >= 0.0);
}

TEST_CASE("permuting proposal rows permutes weights and keeps logits") {
    ModelParams p = init_params(33, {});
    auto bundle = bundle_for("perm", 4, 3);
    ForwardTrace base = forward(bundle, p, Variant::full);

    EmbeddingBundle shuffled = bundle;
    std::vector<int> perm{2, 0, 3, 1};
    for (int i = 0; i < 4; ++i) {
        shuffled.proposals.row(i) = bundle.proposals.row(perm[i]);
        shuffled.proposal_boxes[i] = bundle.proposal_boxes[perm[i]];
    }
    ForwardTrace moved = forward(shuffled, p, Variant::full);
    CHECK((moved.logits_harm - base.logits_harm).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((moved.logits_target - base.logits_target).cwiseAbs().maxCoeff() < 1e-6);
    for (int i = 0; i < 4; ++i)
        CHECK(moved.proposal_weights(i) ==
              doctest::Approx(base.proposal_weights(perm[i])).epsilon(1e-12));
}

TEST_CASE("clip_only equals full when the mix weights drop the local paths") {
    ModelParams full_params = init_params(44, {3, 128, Variant::full});
    full_params.mix_I << 1.0, 0.0;
    full_params.mix_T << 1.0, 0.0;
    ModelParams clip_params = init_params(44, {3, 128, Variant::clip_only});
    // shared tensors come from the same per-tensor streams
    CHECK(clip_params.head_harm.W == full_params.head_harm.W);

    for (int i = 0; i < 5; ++i) {
        auto bundle = bundle_for("ablate-" + std::to_string(i));
        ForwardTrace tf = forward(bundle, full_params, Variant::full);
        ForwardTrace tc = forward(bundle, clip_params, Variant::clip_only);
        CHECK((tf.logits_harm - tc.logits_harm).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((tf.logits_target - tc.logits_target).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("one-sided variants bypass exactly one local stream") {
    auto bundle = bundle_for("sided", 2, 2);
    ModelParams cp = init_params(55, {3, 128, Variant::clip_proposals});
    ForwardTrace tp = forward(bundle, cp, Variant::clip_proposals);
    CHECK(tp.proposal_weights.size() == 2);
    CHECK(tp.attribute_weights.size() == 0);
    CHECK(tp.f_t_res.isApprox(bundle.f_text.cast<double>()));

    ModelParams ca = init_params(55, {3, 128, Variant::clip_attributes});
    ForwardTrace ta = forward(bundle, ca, Variant::clip_attributes);
    CHECK(ta.proposal_weights.size() == 0);
    CHECK(ta.attribute_weights.size() == 2);
    CHECK(ta.f_i_res.isApprox(bundle.f_image.cast<double>()));
}

TEST_CASE("no_cmaf replaces attention fusion with a dense projection") {
    auto bundle = bundle_for("nocmaf");
    ModelParams p = init_params(66, {3, 128, Variant::no_cmaf});
    ForwardTrace t = forward(bundle, p, Variant::no_cmaf);
    Eigen::VectorXd z(kCmafInputDim);
    z << t.f_i_res, t.f_t_res;
    CHECK(t.f_meme.isApprox(p.concat_proj.W * z + p.concat_proj.b, 1e-12));
    CHECK(t.a_v == 0.5);
    CHECK(t.a_t == 0.5);
}

TEST_CASE("forward rejects params built for a different variant") {
    ModelParams p = init_params(7, {3, 128, Variant::full});
    auto bundle = bundle_for("mismatch");
    CHECK_THROWS_AS(forward(bundle, p, Variant::no_cmaf), Error);
}

TEST_CASE("checkpoints round-trip through the container") {
    auto dir = std::filesystem::temp_directory_path() / "momenta-ckpt-test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "model.mcf").string();

    ModelParams p = init_params(77, {2, 128, Variant::no_cmaf});
    save_checkpoint(p, path);
    ModelParams q = load_checkpoint(path);
    CHECK(q.config.c_harm == 2);
    CHECK(q.config.variant == Variant::no_cmaf);
    CHECK(q.seed == 77);
    // float32 storage: compare at that precision
    CHECK(q.scorer_H.cast<float>() == p.scorer_H.cast<float>());
    CHECK(q.concat_proj.W.cast<float>() == p.concat_proj.W.cast<float>());
    CHECK(q.head_harm.W.cast<float>() == p.head_harm.W.cast<float>());

    // save(load(x)) is stable at f32
    save_checkpoint(q, path);
    ModelParams q2 = load_checkpoint(path);
    CHECK(q2.scorer_H == q.scorer_H);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.mcf").string()), Error);
    std::filesystem::remove_all(dir);
}
