#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace momenta {

// End-to-end synthetic run: build a dataset, encode it with the synthetic
// backend, train a small 3-class model, evaluate all three tasks and write
// the reports plus a resolved-config snapshot into out_dir. Deterministic
// per seed: two runs produce byte-identical files.
struct DemoResult {
    std::string manifest_path;
    std::string cache_path;
    std::string checkpoint_path;
    std::vector<std::string> report_paths;  // harm2, harm3, target
    std::string history_path;
    std::string snapshot_path;
};

DemoResult run_demo(const std::string& out_dir, uint64_t seed, int threads = 1);

}  // namespace momenta
