#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "momenta/annotation.hpp"
#include "momenta/error.hpp"
#include "momenta/rng.hpp"

using namespace momenta;

namespace {

AnnotationSet triple(const std::string& id, HarmLabel a, HarmLabel b, HarmLabel c) {
    AnnotationSet s;
    s.meme_id = id;
    s.labels = {{"ann1", a, std::nullopt}, {"ann2", b, std::nullopt},
                {"ann3", c, std::nullopt}};
    for (auto& l : s.labels)
        if (l.harm != HarmLabel::harmless) l.target = TargetLabel::individual;
    return s;
}

}  // namespace

TEST_CASE("consolidation of unanimous, majority and split votes") {
    auto unanimous = consolidate(
        triple("m1", HarmLabel::harmless, HarmLabel::harmless, HarmLabel::harmless));
    CHECK(unanimous.harm.decided);
    CHECK(unanimous.harm.label == 0);
    CHECK(unanimous.harm.method == ConsolidationMethod::unanimous);
    CHECK_FALSE(unanimous.target.has_value());

    auto majority = consolidate(triple("m2", HarmLabel::partially_harmful,
                                       HarmLabel::partially_harmful,
                                       HarmLabel::very_harmful));
    CHECK(majority.harm.decided);
    CHECK(majority.harm.label == 1);
    CHECK(majority.harm.method == ConsolidationMethod::majority);

    auto split = consolidate(triple("m3", HarmLabel::harmless,
                                    HarmLabel::partially_harmful,
                                    HarmLabel::very_harmful));
    CHECK_FALSE(split.harm.decided);
    CHECK(split.harm.method == ConsolidationMethod::consolidator);
}

TEST_CASE("consolidation requires exactly three distinct annotators") {
    AnnotationSet two;
    two.meme_id = "m";
    two.labels = {{"a", HarmLabel::harmless, std::nullopt},
                  {"b", HarmLabel::harmless, std::nullopt}};
    CHECK_THROWS_AS(consolidate(two), Error);

    auto dup = triple("m", HarmLabel::harmless, HarmLabel::harmless, HarmLabel::harmless);
    dup.labels[1].annotator_id = "ann1";
    CHECK_THROWS_AS(consolidate(dup), Error);
}

TEST_CASE("consolidate matches exhaustive enumeration over harm triples") {
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                auto r = consolidate(triple("m", harm_from_ordinal(a),
                                            harm_from_ordinal(b), harm_from_ordinal(c)));
                // oracle: count occurrences directly
                int counts[3] = {0, 0, 0};
                ++counts[a];
                ++counts[b];
                ++counts[c];
                int best = static_cast<int>(
                    std::max_element(counts, counts + 3) - counts);
                if (counts[best] >= 2) {
                    REQUIRE(r.harm.decided);
                    CHECK(r.harm.label == best);
                    CHECK((r.harm.method == ConsolidationMethod::unanimous) ==
                          (counts[best] == 3));
                } else {
                    CHECK_FALSE(r.harm.decided);
                }
                // escalation happens exactly when all three differ
                bool all_distinct = a != b && b != c && a != c;
                CHECK(r.harm.decided == !all_distinct);
            }
}

TEST_CASE("consolidation is invariant under annotator permutation") {
    auto base = triple("m", HarmLabel::harmless, HarmLabel::partially_harmful,
                       HarmLabel::partially_harmful);
    auto r0 = consolidate(base);
    std::sort(base.labels.begin(), base.labels.end(),
              [](const auto& x, const auto& y) { return x.annotator_id > y.annotator_id; });
    auto r1 = consolidate(base);
    CHECK(r0.harm.decided == r1.harm.decided);
    CHECK(r0.harm.label == r1.harm.label);
    CHECK(r0.harm.method == r1.harm.method);
}

TEST_CASE("target consolidation only counts annotators who judged harmful") {
    AnnotationSet s;
    s.meme_id = "m";
    s.labels = {{"a", HarmLabel::harmless, std::nullopt},
                {"b", HarmLabel::partially_harmful, TargetLabel::society},
                {"c", HarmLabel::very_harmful, TargetLabel::society}};
    auto r = consolidate(s);
    REQUIRE(r.target.has_value());
    CHECK(r.target->decided);
    CHECK(r.target->label == ordinal_index(TargetLabel::society));
    CHECK(r.target->method == ConsolidationMethod::unanimous);

    // two harmful voters that disagree escalate the target
    s.labels[2].target = TargetLabel::individual;
    auto r2 = consolidate(s);
    REQUIRE(r2.target.has_value());
    CHECK_FALSE(r2.target->decided);

    // all harmless: no target decision at all
    auto r3 = consolidate(
        triple("m", HarmLabel::harmless, HarmLabel::harmless, HarmLabel::harmless));
    CHECK_FALSE(r3.target.has_value());
}

TEST_CASE("kappa hand values") {
    std::vector<int> same{0, 1, 0, 1, 2};
    CHECK(cohen_kappa(same, same) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    CHECK(cohen_kappa(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<int> c{0, 0, 0, 1}, d{0, 0, 1, 1};
    CHECK(cohen_kappa(c, d) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kappa is symmetric and invariant under relabeling") {
    Rng rng(13);
    for (int iteration = 0; iteration < 50; ++iteration) {
        size_t n = 2 + rng.below(40);
        std::vector<int> a(n), b(n);
        for (size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng.below(4));
            b[i] = static_cast<int>(rng.below(4));
        }
        double k_ab = cohen_kappa(a, b);
        double k_ba = cohen_kappa(b, a);
        CHECK(k_ab == doctest::Approx(k_ba).epsilon(1e-12));
        CHECK(k_ab >= -1.0 - 1e-12);
        CHECK(k_ab <= 1.0 + 1e-12);

        // bijective relabeling leaves kappa unchanged
        int perm[4] = {2, 0, 3, 1};
        std::vector<int> ap(n), bp(n);
        for (size_t i = 0; i < n; ++i) {
            ap[i] = perm[a[i]];
            bp[i] = perm[b[i]];
        }
        CHECK(cohen_kappa(ap, bp) == doctest::Approx(k_ab).epsilon(1e-12));
    }
}

TEST_CASE("kappa degenerate marginals convention") {
    std::vector<int> x{1, 1, 1};
    CHECK(cohen_kappa(x, x) == 1.0);  // p_e = 1, identical
    std::vector<int> y{1, 1, 1}, z{2, 2, 2};
    // p_e = 0 here (disjoint point masses), so the formula applies: kappa = 0/1
    CHECK(cohen_kappa(y, z) == doctest::Approx(0.0));
    std::vector<int> short_seq{1};
    CHECK_THROWS_AS(cohen_kappa(std::vector<int>{1, 2}, short_seq), Error);
}

namespace {

// Builds annotation sets where annotators x and y label `n` shared memes with
// the given sequences; names memes uniquely per block.
void add_pair_block(std::vector<AnnotationSet>& sets, const std::string& prefix,
                    const std::string& x, const std::string& y,
                    const std::vector<HarmLabel>& xs, const std::vector<HarmLabel>& ys) {
    for (size_t i = 0; i < xs.size(); ++i) {
        AnnotationSet s;
        s.meme_id = prefix + std::to_string(i);
        s.labels.push_back({x, xs[i], std::nullopt});
        s.labels.push_back({y, ys[i], std::nullopt});
        sets.push_back(std::move(s));
    }
}

}  // namespace

TEST_CASE("average pairwise kappa") {
    // single pair: equals the direct kappa
    std::vector<AnnotationSet> sets;
    add_pair_block(sets, "p", "a", "b",
                   {HarmLabel::harmless, HarmLabel::harmless, HarmLabel::very_harmful,
                    HarmLabel::very_harmful},
                   {HarmLabel::harmless, HarmLabel::very_harmful, HarmLabel::harmless,
                    HarmLabel::very_harmful});
    double direct = cohen_kappa(std::vector<int>{0, 0, 2, 2}, std::vector<int>{0, 2, 0, 2});
    CHECK(average_pairwise_kappa(sets, AgreementTask::harm) ==
          doctest::Approx(direct).epsilon(1e-12));

    // unanimous panels give 1.0
    std::vector<AnnotationSet> unanimous;
    for (int i = 0; i < 6; ++i) {
        AnnotationSet s;
        s.meme_id = "u" + std::to_string(i);
        HarmLabel h = harm_from_ordinal(i % 3);
        for (const char* ann : {"a", "b", "c"}) s.labels.push_back({ann, h, std::nullopt});
        unanimous.push_back(std::move(s));
    }
    CHECK(average_pairwise_kappa(unanimous, AgreementTask::harm) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // three annotators in disjoint pair blocks average the pairwise values
    std::vector<AnnotationSet> blocks;
    add_pair_block(blocks, "ab", "a", "b",
                   {HarmLabel::harmless, HarmLabel::harmless, HarmLabel::very_harmful,
                    HarmLabel::very_harmful},
                   {HarmLabel::harmless, HarmLabel::very_harmful, HarmLabel::harmless,
                    HarmLabel::very_harmful});  // kappa 0
    add_pair_block(blocks, "ac", "a", "c",
                   {HarmLabel::harmless, HarmLabel::harmless, HarmLabel::harmless,
                    HarmLabel::very_harmful},
                   {HarmLabel::harmless, HarmLabel::harmless, HarmLabel::very_harmful,
                    HarmLabel::very_harmful});  // kappa 0.5
    add_pair_block(blocks, "bc", "b", "c",
                   {HarmLabel::harmless, HarmLabel::very_harmful},
                   {HarmLabel::harmless, HarmLabel::very_harmful});  // kappa 1
    CHECK(average_pairwise_kappa(blocks, AgreementTask::harm) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // no pair shares any meme
    std::vector<AnnotationSet> disjoint;
    AnnotationSet s1, s2;
    s1.meme_id = "only-a";
    s1.labels.push_back({"a", HarmLabel::harmless, std::nullopt});
    s2.meme_id = "only-b";
    s2.labels.push_back({"b", HarmLabel::harmless, std::nullopt});
    disjoint = {s1, s2};
    CHECK_THROWS_AS(average_pairwise_kappa(disjoint, AgreementTask::harm), Error);
}

TEST_CASE("target kappa uses only target-labeled memes") {
    std::vector<AnnotationSet> sets;
    for (int i = 0; i < 4; ++i) {
        AnnotationSet s;
        s.meme_id = "t" + std::to_string(i);
        TargetLabel t = target_from_ordinal(i % 4);
        s.labels.push_back({"a", HarmLabel::very_harmful, t});
        s.labels.push_back({"b", HarmLabel::very_harmful, t});
        sets.push_back(std::move(s));
    }
    // one harmless-only meme must not disturb the target statistic
    AnnotationSet harmless;
    harmless.meme_id = "h";
    harmless.labels.push_back({"a", HarmLabel::harmless, std::nullopt});
    harmless.labels.push_back({"b", HarmLabel::harmless, std::nullopt});
    sets.push_back(harmless);
    CHECK(average_pairwise_kappa(sets, AgreementTask::target) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("annotation file round trip") {
    auto dir = std::filesystem::temp_directory_path() / "momenta-annotation-test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "ann.tsv").string();

    std::vector<AnnotationSet> sets;
    sets.push_back(triple("meme-1", HarmLabel::harmless, HarmLabel::partially_harmful,
                          HarmLabel::partially_harmful));
    sets.push_back(triple("meme-2", HarmLabel::very_harmful, HarmLabel::very_harmful,
                          HarmLabel::very_harmful));
    write_annotations(sets, path);
    auto back = read_annotations(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].meme_id == "meme-1");
    CHECK(back[0].labels.size() == 3);
    CHECK(back[1].labels[0].target == TargetLabel::individual);

    AnnotationSet bad;
    bad.meme_id = "has space";
    bad.labels.push_back({"a", HarmLabel::harmless, std::nullopt});
    CHECK_THROWS_AS(write_annotations({bad}, path), Error);
    std::filesystem::remove_all(dir);
}
