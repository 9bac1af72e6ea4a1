#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "momenta/record.hpp"

namespace momenta {

// Curation judgments for one meme. All five must be set explicitly; the
// filter does not accept unknowns.
struct FilterFlags {
    bool is_english = false;
    bool text_readable = false;
    bool is_cartoon = false;
    bool has_image = false;
    bool has_text = false;
};

struct FilterDecision {
    bool keep = false;
    std::string reason;  // first failing criterion, empty when kept
};

// Rejection reasons in fixed priority order:
// non-english, unreadable-text, cartoon, unimodal.
FilterDecision filter_record(const FilterFlags& flags);

// 8-bit grayscale raster, row-major.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// PGM (P5 binary or P2 ascii), maxval <= 255.
Raster read_pgm(const std::string& path);
void write_pgm(const Raster& image, const std::string& path);

// Difference hash: box-average downscale to 9x8, one bit per horizontal
// neighbor pair, set where left pixel > right pixel. Empty image is an error.
uint64_t perceptual_hash(const Raster& image);

int hamming_distance(uint64_t a, uint64_t b);

// Hash plus the resolution needed for the keep rule.
struct HashedImage {
    std::string id;
    int width = 0;
    int height = 0;
    uint64_t hash = 0;
};

struct DedupGroup {
    std::vector<std::string> member_ids;  // kept_id first, rest sorted
    std::string kept_id;
};

// Connected components under Hamming(hash, hash) <= threshold. The member
// with the largest width*height is kept; ties go to the smallest id.
// Groups are ordered by their kept_id.
std::vector<DedupGroup> dedup(const std::vector<HashedImage>& images, int hamming_threshold);

struct SplitRatios {
    double train = 0.0;
    double validation = 0.0;
    double test = 0.0;
};

// Deterministic stratified split by HarmLabel. Per class the members are
// shuffled with a seed-derived stream, validation and test take floor(n*r)
// each and the remainder goes to train. Input order of the records is kept.
DatasetManifest split_dataset(const std::vector<MemeRecord>& records,
                              const SplitRatios& ratios, uint64_t seed,
                              const std::string& name = "");

}  // namespace momenta
