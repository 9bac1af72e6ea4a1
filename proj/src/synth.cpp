#include "momenta/synth.hpp"

#include <numeric>

#include "momenta/error.hpp"
#include "momenta/pipeline.hpp"
#include "momenta/rng.hpp"

namespace momenta {

namespace {

const char* kWords[] = {"election", "debate",  "virus",   "mask",    "vote",
                        "press",    "rally",   "speech",  "poll",    "crisis",
                        "border",   "economy", "tax",     "crowd",   "news",
                        "party",    "senate",  "protest", "banner",  "slogan"};

std::string synth_text(Rng& rng) {
    int words = 3 + static_cast<int>(rng.below(6));
    std::string text;
    for (int w = 0; w < words; ++w) {
        if (w) text += ' ';
        text += kWords[rng.below(std::size(kWords))];
    }
    return text;
}

MemeRecord make_record(const std::string& id, HarmLabel harm,
                       std::optional<TargetLabel> target, Split split, Rng& rng) {
    MemeRecord r;
    r.id = id;
    r.image_ref = "synthetic://" + id;
    r.ocr_text = synth_text(rng);
    r.harm = harm;
    r.target = target;
    r.split = split;
    r.source = "synthetic";
    r.width = 320 + static_cast<int>(rng.below(640));
    r.height = 240 + static_cast<int>(rng.below(480));
    return r;
}

void append_split(DatasetManifest& manifest, const std::string& name,
                  const SplitShape& shape, Split split, Rng& rng) {
    int harmful = shape.harm[1] + shape.harm[2];
    int targets = std::accumulate(shape.target.begin(), shape.target.end(), 0);
    if (harmful != targets)
        throw Error("shape-invalid", "target counts must sum to the harmful count");

    // Targets are dealt to harmful records class by class.
    std::vector<TargetLabel> deal;
    for (int c = 0; c < kNumTargetClasses; ++c)
        for (int i = 0; i < shape.target[c]; ++i) deal.push_back(target_from_ordinal(c));

    size_t dealt = 0;
    for (int c = 0; c < kNumHarmClasses; ++c) {
        HarmLabel harm = harm_from_ordinal(c);
        for (int i = 0; i < shape.harm[c]; ++i) {
            std::string id = name + "-" + std::string(to_string(split)) + "-h" +
                             std::to_string(c) + "-" + std::to_string(i);
            std::optional<TargetLabel> target;
            if (harm != HarmLabel::harmless) target = deal[dealt++];
            manifest.records.push_back(make_record(id, harm, target, split, rng));
        }
    }
}

}  // namespace

DatasetManifest make_shaped_manifest(const std::string& name, const DatasetShape& shape,
                                     uint64_t seed) {
    DatasetManifest manifest;
    manifest.name = name;
    Rng rng(derive_key(seed, "shaped/" + name));
    append_split(manifest, name, shape.train, Split::train, rng);
    append_split(manifest, name, shape.validation, Split::validation, rng);
    append_split(manifest, name, shape.test, Split::test, rng);
    validate_manifest(manifest);
    return manifest;
}

DatasetManifest make_overfit_manifest(uint64_t seed) {
    DatasetManifest manifest;
    manifest.name = "overfit32";
    Rng rng(derive_key(seed, "overfit32"));
    int counts[kNumHarmClasses] = {11, 11, 10};
    int next_target = 0;
    for (int c = 0; c < kNumHarmClasses; ++c) {
        HarmLabel harm = harm_from_ordinal(c);
        for (int i = 0; i < counts[c]; ++i) {
            std::string id = "ov-" + std::to_string(c) + "-" + std::to_string(i);
            std::optional<TargetLabel> target;
            if (harm != HarmLabel::harmless)
                target = target_from_ordinal(next_target++ % kNumTargetClasses);
            manifest.records.push_back(make_record(id, harm, target, Split::train, rng));
        }
    }
    validate_manifest(manifest);
    return manifest;
}

DatasetManifest make_demo_manifest(const std::string& name, int num_records, uint64_t seed) {
    if (num_records < 20)
        throw ConfigError("config-invalid", "demo manifest needs at least 20 records");
    std::vector<MemeRecord> records;
    Rng rng(derive_key(seed, "demo/" + name));
    for (int i = 0; i < num_records; ++i) {
        // roughly 45% harmless, 35% partially harmful, 20% very harmful
        double u = rng.uniform();
        HarmLabel harm = u < 0.45   ? HarmLabel::harmless
                         : u < 0.80 ? HarmLabel::partially_harmful
                                    : HarmLabel::very_harmful;
        std::optional<TargetLabel> target;
        if (harm != HarmLabel::harmless)
            target = target_from_ordinal(static_cast<int>(rng.below(kNumTargetClasses)));
        records.push_back(
            make_record(name + "-" + std::to_string(i), harm, target, Split::train, rng));
    }
    DatasetManifest manifest =
        split_dataset(records, {0.7, 0.15, 0.15}, derive_key(seed, "demo-split"), name);
    validate_manifest(manifest);
    return manifest;
}

}  // namespace momenta
