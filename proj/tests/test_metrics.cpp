#include <doctest.h>

#include <filesystem>
#include <map>

#include "momenta/error.hpp"
#include "momenta/metrics.hpp"
#include "momenta/rng.hpp"
#include "momenta/synth.hpp"
#include "table_shapes.hpp"

using namespace momenta;

namespace {

// Independent references, written as plain loops over the definitions.
double brute_accuracy(const std::vector<int>& y, const std::vector<int>& p) {
    int64_t ok = 0;
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i] == p[i]) ++ok;
    return 100.0 * static_cast<double>(ok) / static_cast<double>(y.size());
}

double brute_mmae(const std::vector<int>& y, const std::vector<int>& p, int k) {
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < k; ++c) {
        int64_t err = 0, n = 0;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) {
                err += std::abs(p[i] - y[i]);
                ++n;
            }
        if (n == 0) continue;
        ++present;
        total += static_cast<double>(err) / static_cast<double>(n);
    }
    return total / present;
}

double brute_macro_f1(const std::vector<int>& y, const std::vector<int>& p, int k) {
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < k; ++c) {
        int64_t tp = 0, in_true = 0, in_pred = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            if (y[i] == c) ++in_true;
            if (p[i] == c) ++in_pred;
            if (y[i] == c && p[i] == c) ++tp;
        }
        if (in_true + in_pred == 0) continue;
        double precision = in_pred ? static_cast<double>(tp) / in_pred : 0.0;
        double recall = in_true ? static_cast<double>(tp) / in_true : 0.0;
        total += (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall)
                                          : 0.0;
        ++present;
    }
    return 100.0 * total / present;
}

}  // namespace

TEST_CASE("metrics match brute-force references on random label sets") {
    Rng rng(77);
    for (int iteration = 0; iteration < 300; ++iteration) {
        int k = 2 + static_cast<int>(rng.below(3));
        size_t n = 1 + rng.below(200);
        std::vector<int> y(n), p(n);
        for (size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.below(k));
            p[i] = static_cast<int>(rng.below(k));
        }
        CHECK(accuracy_pct(y, p) == brute_accuracy(y, p));
        CHECK(mmae(y, p, k) == brute_mmae(y, p, k));
        CHECK(std::abs(macro_f1_pct(y, p, k) - brute_macro_f1(y, p, k)) <= 1e-9);
    }
}

TEST_CASE("metric identities") {
    std::vector<int> y{0, 1, 2, 1, 0, 2};
    CHECK(accuracy_pct(y, y) == 100.0);
    CHECK(macro_f1_pct(y, y, 3) == 100.0);
    CHECK(mmae(y, y, 3) == 0.0);

    // sample order does not matter for mmae
    std::vector<int> p{2, 1, 0, 1, 0, 2};
    std::vector<int> y2{2, 1, 0, 0, 1, 2}, p2{0, 1, 2, 0, 1, 2};
    CHECK(mmae(y, p, 3) == mmae(y2, p2, 3));

    // constant prediction equals the mean distance over present classes
    std::vector<int> truth{0, 0, 1, 2, 3};
    std::vector<int> constant(truth.size(), 2);
    CHECK(mmae(truth, constant, 4) == doctest::Approx((2 + 1 + 0 + 1) / 4.0));

    CHECK_THROWS_AS(accuracy_pct(std::vector<int>{1}, std::vector<int>{}), Error);
    CHECK_THROWS_AS(mmae(std::vector<int>{}, std::vector<int>{}, 3), Error);
}

TEST_CASE("compute_report confusion rows sum to class supports") {
    Rng rng(5);
    std::vector<int> y(50), p(50);
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = static_cast<int>(rng.below(3));
        p[i] = static_cast<int>(rng.below(3));
    }
    auto report = compute_report(EvalTask::harm3, y, p);
    std::map<int, int64_t> supports;
    for (int v : y) ++supports[v];
    for (int c = 0; c < 3; ++c) {
        int64_t row = 0;
        for (int q = 0; q < 3; ++q) row += report.confusion[c][q];
        CHECK(row == supports[c]);
    }
    CHECK(report.per_class_f1.size() == 3);
    CHECK(report.num_examples == 50);
}

TEST_CASE("majority baseline reproduces the published corpus statistics") {
    auto covid = make_shaped_manifest("covid", covid_corpus_shape(), 1);
    auto politics = make_shaped_manifest("politics", politics_corpus_shape(), 2);

    auto covid2 = majority_baseline(covid, covid, EvalTask::harm2);
    CHECK(covid2.mmae == 0.5);
    CHECK(covid2.accuracy == doctest::Approx(100.0 * 230.0 / 354.0).epsilon(1e-12));

    auto covid3 = majority_baseline(covid, covid, EvalTask::harm3);
    CHECK(covid3.mmae == 1.0);
    auto covid_t = majority_baseline(covid, covid, EvalTask::target);
    CHECK(covid_t.mmae == 1.5);

    auto pol2 = majority_baseline(politics, politics, EvalTask::harm2);
    CHECK(pol2.mmae == 0.5);
    CHECK(pol2.accuracy == doctest::Approx(51.27).epsilon(0.0002));
    CHECK(pol2.macro_f1 == doctest::Approx(33.89).epsilon(0.0002));
    auto pol3 = majority_baseline(politics, politics, EvalTask::harm3);
    CHECK(pol3.mmae == 1.0);
    auto pol_t = majority_baseline(politics, politics, EvalTask::target);
    CHECK(pol_t.mmae == 1.5);
}

TEST_CASE("majority baseline accuracy equals the majority test frequency") {
    DatasetShape shape;
    shape.train.harm = {6, 3, 1};
    shape.train.target = {2, 1, 1, 0};
    shape.test.harm = {5, 4, 1};
    shape.test.target = {3, 1, 1, 0};
    auto m = make_shaped_manifest("tiny", shape, 3);
    auto r = majority_baseline(m, m, EvalTask::harm2);
    CHECK(r.accuracy == doctest::Approx(50.0));  // 5 harmless of 10

    // single-class test set matching the majority scores 100
    DatasetShape pure;
    pure.train.harm = {4, 0, 0};
    pure.test.harm = {3, 0, 0};
    auto mp = make_shaped_manifest("pure", pure, 4);
    CHECK(majority_baseline(mp, mp, EvalTask::harm2).accuracy == 100.0);
}

TEST_CASE("majority ties break toward the lower ordinal") {
    DatasetShape shape;
    shape.train.harm = {3, 3, 0};
    shape.train.target = {1, 1, 1, 0};
    shape.test.harm = {1, 1, 0};
    shape.test.target = {1, 0, 0, 0};
    auto m = make_shaped_manifest("tie", shape, 5);
    auto r = majority_baseline(m, m, EvalTask::harm3);
    // prediction is class 0 everywhere: one hit, one miss
    CHECK(r.accuracy == doctest::Approx(50.0));
    CHECK(r.confusion[0][0] == 1);
    CHECK(r.confusion[1][0] == 1);
}

namespace {

struct EvalFixture {
    std::filesystem::path dir;
    DatasetManifest manifest;
    std::string cache_path;

    EvalFixture() : dir(std::filesystem::temp_directory_path() / "momenta-eval-test") {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        cache_path = (dir / "cache.mcf").string();
        manifest = make_demo_manifest("eval", 60, 11);
        EmbeddingCache cache = EmbeddingCache::open_rw(cache_path);
        SyntheticBackend backend;
        for (const auto& r : manifest.records) cache.put(r.id, encode_bundle(r, backend));
    }
    ~EvalFixture() { std::filesystem::remove_all(dir); }
};

}  // namespace

TEST_CASE("evaluate merges 3-class predictions for the binary task") {
    EvalFixture fx;
    EmbeddingCache cache = EmbeddingCache::open_ro(fx.cache_path);
    ModelParams params = init_params(123, {3, 128, Variant::full});

    auto merged = evaluate(params, fx.manifest, cache, EvalTask::harm2);

    // record-wise reference: merge label and argmax prediction separately
    std::vector<int> truth, predicted;
    for (const auto& r : fx.manifest.records) {
        if (r.split != Split::test) continue;
        auto bundle = cache.get(r.id);
        ForwardTrace t = forward(*bundle, params, Variant::full);
        int pred;
        t.logits_harm.maxCoeff(&pred);
        predicted.push_back(pred == 0 ? 0 : 1);
        truth.push_back(ordinal_index(merge_to_binary(r.harm)));
    }
    auto reference = compute_report(EvalTask::harm2, truth, predicted);
    CHECK(merged.accuracy == reference.accuracy);
    CHECK(merged.macro_f1 == reference.macro_f1);
    CHECK(merged.mmae == reference.mmae);
    CHECK(merged.confusion == reference.confusion);
}

TEST_CASE("evaluate scopes the target task to harmful records") {
    EvalFixture fx;
    EmbeddingCache cache = EmbeddingCache::open_ro(fx.cache_path);
    ModelParams params = init_params(9, {3, 128, Variant::full});
    auto report = evaluate(params, fx.manifest, cache, EvalTask::target);
    int64_t harmful_test = 0;
    for (const auto& r : fx.manifest.records)
        if (r.split == Split::test && r.harm != HarmLabel::harmless) ++harmful_test;
    CHECK(report.num_examples == harmful_test);
}

TEST_CASE("evaluate is pure and supports threaded scoring") {
    EvalFixture fx;
    EmbeddingCache cache = EmbeddingCache::open_ro(fx.cache_path);
    ModelParams params = init_params(77, {3, 128, Variant::full});
    auto a = evaluate(params, fx.manifest, cache, EvalTask::harm3);
    auto b = evaluate(params, fx.manifest, cache, EvalTask::harm3);
    auto c = evaluate(params, fx.manifest, cache, EvalTask::harm3, Split::test, 4);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.confusion == b.confusion);
    CHECK(a.accuracy == c.accuracy);
    CHECK(a.confusion == c.confusion);
    CHECK(report_to_json(a) == report_to_json(c));

    // 2-class evaluation of a 2-class model works without merging
    ModelParams two = init_params(5, {2, 128, Variant::full});
    auto r2 = evaluate(two, fx.manifest, cache, EvalTask::harm2);
    CHECK(r2.num_examples > 0);
    CHECK_THROWS_AS(evaluate(two, fx.manifest, cache, EvalTask::harm3), Error);
}

TEST_CASE("transfer matrix produces every row-column cell") {
    auto dir = std::filesystem::temp_directory_path() / "momenta-transfer-test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto cache_path = (dir / "cache.mcf").string();

    auto a = make_demo_manifest("set-a", 40, 21);
    auto b = make_demo_manifest("set-b", 40, 22);
    {
        EmbeddingCache cache = EmbeddingCache::open_rw(cache_path);
        SyntheticBackend backend;
        for (const auto& r : a.records) cache.put(r.id, encode_bundle(r, backend));
        for (const auto& r : b.records) cache.put(r.id, encode_bundle(r, backend));
    }
    EmbeddingCache cache = EmbeddingCache::open_ro(cache_path);

    TrainConfig config;
    config.epochs = 2;
    config.batch_size = 16;
    config.seed = 3;
    auto cells = transfer_matrix({a, b}, cache, config);
    CHECK(cells.size() == 9);  // (a, b, combined)^2

    std::map<std::pair<std::string, std::string>, const TransferCell*> by_key;
    for (const auto& c : cells) by_key[{c.train_name, c.eval_name}] = &c;
    REQUIRE(by_key.count({"set-a", "set-a"}));
    REQUIRE(by_key.count({"combined", "set-b"}));

    // diagonal equals a direct train+evaluate with the same settings
    TrainConfig direct_cfg = config;
    direct_cfg.model.c_harm = 3;
    TrainResult direct = train(a, cache, direct_cfg);
    auto report = evaluate(direct.params, a, cache, EvalTask::harm3);
    CHECK(by_key[{"set-a", "set-a"}]->harm3.macro_f1 ==
          doctest::Approx(report.macro_f1).epsilon(1e-12));

    CHECK_THROWS_AS(transfer_matrix({a}, cache, config), ConfigError);
    std::filesystem::remove_all(dir);
}
