#include "momenta/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "momenta/error.hpp"
#include "momenta/rng.hpp"

namespace momenta {

FilterDecision filter_record(const FilterFlags& flags) {
    if (!flags.is_english) return {false, "non-english"};
    if (!flags.text_readable) return {false, "unreadable-text"};
    if (flags.is_cartoon) return {false, "cartoon"};
    if (!(flags.has_image && flags.has_text)) return {false, "unimodal"};
    return {true, ""};
}

namespace {

// Skips whitespace and `#` comments in a PGM header.
int next_pgm_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c))
        throw Error("image-invalid", "malformed PGM header: " + path);
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

Raster read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("image-not-found", "cannot open image: " + path);
    char m0 = static_cast<char>(in.get());
    char m1 = static_cast<char>(in.get());
    if (m0 != 'P' || (m1 != '5' && m1 != '2'))
        throw Error("image-invalid", "not a PGM file: " + path);
    bool binary = m1 == '5';
    Raster img;
    img.width = next_pgm_int(in, path);
    img.height = next_pgm_int(in, path);
    int maxval = next_pgm_int(in, path);
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
        throw Error("image-invalid", "unsupported PGM geometry: " + path);
    size_t n = static_cast<size_t>(img.width) * img.height;
    img.pixels.resize(n);
    if (binary) {
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n)
            throw Error("image-invalid", "truncated PGM payload: " + path);
    } else {
        for (size_t i = 0; i < n; ++i) {
            int v = next_pgm_int(in, path);
            img.pixels[i] = static_cast<uint8_t>(std::min(v, 255));
        }
    }
    return img;
}

void write_pgm(const Raster& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot open for writing: " + path);
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out)
        throw Error("io-error", "write failed: " + path);
}

namespace {

// Box-averages the raster down to `cols` x `rows`. Boxes are clamped to at
// least one source pixel so tiny inputs still hash.
std::vector<double> box_downscale(const Raster& img, int cols, int rows) {
    std::vector<double> out(static_cast<size_t>(cols) * rows, 0.0);
    for (int by = 0; by < rows; ++by) {
        int y0 = static_cast<int>(static_cast<int64_t>(by) * img.height / rows);
        int y1 = static_cast<int>(static_cast<int64_t>(by + 1) * img.height / rows);
        y1 = std::min(std::max(y1, y0 + 1), img.height);
        y0 = std::min(y0, img.height - 1);
        for (int bx = 0; bx < cols; ++bx) {
            int x0 = static_cast<int>(static_cast<int64_t>(bx) * img.width / cols);
            int x1 = static_cast<int>(static_cast<int64_t>(bx + 1) * img.width / cols);
            x1 = std::min(std::max(x1, x0 + 1), img.width);
            x0 = std::min(x0, img.width - 1);
            int64_t sum = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    sum += img.at(x, y);
            out[static_cast<size_t>(by) * cols + bx] =
                static_cast<double>(sum) / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

}  // namespace

uint64_t perceptual_hash(const Raster& image) {
    if (image.width <= 0 || image.height <= 0 || image.pixels.empty())
        throw Error("image-invalid", "empty image");
    if (image.pixels.size() != static_cast<size_t>(image.width) * image.height)
        throw Error("image-invalid", "pixel buffer does not match dimensions");
    const int cols = 9, rows = 8;
    std::vector<double> small = box_downscale(image, cols, rows);
    uint64_t hash = 0;
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols - 1; ++x) {
            int bit = y * (cols - 1) + x;
            if (small[static_cast<size_t>(y) * cols + x] >
                small[static_cast<size_t>(y) * cols + x + 1])
                hash |= 1ull << (63 - bit);
        }
    }
    return hash;
}

int hamming_distance(uint64_t a, uint64_t b) {
    return std::popcount(a ^ b);
}

namespace {

struct UnionFind {
    std::vector<size_t> parent;
    explicit UnionFind(size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), size_t{0});
    }
    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<DedupGroup> dedup(const std::vector<HashedImage>& images, int hamming_threshold) {
    if (hamming_threshold < 0)
        throw ConfigError("threshold-invalid", "negative hamming threshold");
    const size_t n = images.size();
    UnionFind uf(n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (hamming_distance(images[i].hash, images[j].hash) <= hamming_threshold)
                uf.unite(i, j);

    std::map<size_t, std::vector<size_t>> components;
    for (size_t i = 0; i < n; ++i)
        components[uf.find(i)].push_back(i);

    std::vector<DedupGroup> groups;
    groups.reserve(components.size());
    for (auto& [root, members] : components) {
        size_t best = members.front();
        for (size_t idx : members) {
            int64_t area = static_cast<int64_t>(images[idx].width) * images[idx].height;
            int64_t best_area =
                static_cast<int64_t>(images[best].width) * images[best].height;
            if (area > best_area || (area == best_area && images[idx].id < images[best].id))
                best = idx;
        }
        DedupGroup g;
        g.kept_id = images[best].id;
        g.member_ids.push_back(g.kept_id);
        std::vector<std::string> rest;
        for (size_t idx : members)
            if (idx != best) rest.push_back(images[idx].id);
        std::sort(rest.begin(), rest.end());
        g.member_ids.insert(g.member_ids.end(), rest.begin(), rest.end());
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(),
              [](const DedupGroup& a, const DedupGroup& b) { return a.kept_id < b.kept_id; });
    return groups;
}

DatasetManifest split_dataset(const std::vector<MemeRecord>& records,
                              const SplitRatios& ratios, uint64_t seed,
                              const std::string& name) {
    double sum = ratios.train + ratios.validation + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("ratio-invalid",
                          "split ratios must sum to 1, got " + std::to_string(sum));
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0)
        throw ConfigError("ratio-invalid", "split ratios must be non-negative");

    DatasetManifest out;
    out.name = name;
    out.records = records;

    for (int c = 0; c < kNumHarmClasses; ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < out.records.size(); ++i)
            if (ordinal_index(out.records[i].harm) == c) members.push_back(i);
        Rng rng(derive_key(seed, "split/" + std::to_string(c)));
        rng.shuffle(members);
        size_t n = members.size();
        size_t n_val = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios.validation));
        size_t n_test = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios.test));
        size_t n_train = n - n_val - n_test;  // remainder goes to train
        for (size_t k = 0; k < n; ++k) {
            Split s = k < n_train               ? Split::train
                      : k < n_train + n_val     ? Split::validation
                                                : Split::test;
            out.records[members[k]].split = s;
        }
    }
    return out;
}

}  // namespace momenta
