#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "momenta/container.hpp"
#include "momenta/record.hpp"

namespace momenta {

constexpr int kImageDim = 512;      // global image embedding
constexpr int kTextDim = 512;       // global text embedding
constexpr int kProposalDim = 4096;  // per-box crop encoding
constexpr int kAttributeDim = 768;  // per-attribute sentence encoding

struct BoxF {
    float x = 0, y = 0, w = 0, h = 0;
};

// The four feature families for one meme. Matrices are row-per-detection;
// both counts may be zero and vary per meme. Stored in float32, which is
// also the on-disk precision.
struct EmbeddingBundle {
    Eigen::VectorXf f_image;    // 512
    Eigen::VectorXf f_text;     // 512
    Eigen::MatrixXf proposals;  // n x 4096, faces then foreground objects
    Eigen::MatrixXf attributes; // m x 768
    std::vector<BoxF> proposal_boxes;         // n
    std::vector<std::string> attribute_names; // m

    Eigen::Index num_proposals() const { return proposals.rows(); }
    Eigen::Index num_attributes() const { return attributes.rows(); }
};

// Throws "bundle-invalid" on any dimension or finiteness violation.
void validate_bundle(const EmbeddingBundle& bundle);

enum class Capability {
    clip_image,
    clip_text,
    face_detect,
    object_detect,
    attribute_detect,
    proposal_encode,
    attribute_encode,
};

std::string_view to_string(Capability c);

class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    virtual std::string name() const = 0;
    virtual std::set<Capability> capabilities() const = 0;
    virtual EmbeddingBundle encode(const MemeRecord& record) = 0;
};

// Checks capabilities up front, delegates, and validates the result.
EmbeddingBundle encode_bundle(const MemeRecord& record, EncoderBackend& backend);

// Deterministic rows keyed by hash(seed_material): Gaussian entries scaled to
// unit L2 norm, exact at float32 precision.
Eigen::MatrixXf synthetic_rows(std::string_view seed_material, int rows, int cols);

// Hermetic backend: a pure function of (record.id, record.ocr_text). The
// detection counts default to n = 1 + hash % 4 and m = 1 + hash % 3.
class SyntheticBackend : public EncoderBackend {
public:
    struct Options {
        std::optional<int> proposal_count;
        std::optional<int> attribute_count;
    };

    SyntheticBackend() = default;
    explicit SyntheticBackend(Options options) : options_(options) {}

    std::string name() const override { return "synthetic"; }
    std::set<Capability> capabilities() const override;
    EmbeddingBundle encode(const MemeRecord& record) override;

private:
    Options options_;
};

// On-disk bundle store over the shared container format. One meme becomes
// six entries keyed "<id>/f_image" .. "<id>/names"; a later put wins.
class EmbeddingCache {
public:
    static EmbeddingCache open_rw(const std::string& path);
    static EmbeddingCache open_ro(const std::string& path);

    bool contains(const std::string& id) const;
    std::vector<std::string> ids() const;

    // Returns true when an existing bundle was overwritten.
    bool put(const std::string& id, const EmbeddingBundle& bundle);
    // Miss yields nullopt; a damaged entry throws "cache-corrupt".
    std::optional<EmbeddingBundle> get(const std::string& id) const;

    const std::string& path() const { return file_.path(); }

private:
    explicit EmbeddingCache(TensorFile file) : file_(std::move(file)) {}
    TensorFile file_;
};

}  // namespace momenta
