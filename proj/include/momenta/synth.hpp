#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "momenta/record.hpp"

namespace momenta {

// Builders for self-contained synthetic datasets, used by the demo command
// and the verification suites.

// Per-split class counts: harm[split][harm_class], target[split][target_class].
// The target counts must sum to the split's harmful count.
struct SplitShape {
    std::array<int, kNumHarmClasses> harm = {0, 0, 0};
    std::array<int, kNumTargetClasses> target = {0, 0, 0, 0};
};

struct DatasetShape {
    SplitShape train;
    SplitShape validation;
    SplitShape test;
};

// Builds a manifest with exactly the requested label counts. Texts and
// dimensions come from a seeded generator, so the result is deterministic.
DatasetManifest make_shaped_manifest(const std::string& name, const DatasetShape& shape,
                                     uint64_t seed);

// 32 records, balanced 3-class harm (11/11/10), all in the train split, with
// targets cycling over the four classes on harmful records.
DatasetManifest make_overfit_manifest(uint64_t seed);

// A small stratified dataset with all three splits populated, for demos and
// end-to-end tests.
DatasetManifest make_demo_manifest(const std::string& name, int num_records, uint64_t seed);

}  // namespace momenta
