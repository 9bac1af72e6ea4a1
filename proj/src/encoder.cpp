#include "momenta/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "momenta/error.hpp"
#include "momenta/rng.hpp"

namespace momenta {

std::string_view to_string(Capability c) {
    switch (c) {
        case Capability::clip_image: return "clip_image";
        case Capability::clip_text: return "clip_text";
        case Capability::face_detect: return "face_detect";
        case Capability::object_detect: return "object_detect";
        case Capability::attribute_detect: return "attribute_detect";
        case Capability::proposal_encode: return "proposal_encode";
        case Capability::attribute_encode: return "attribute_encode";
    }
    return "?";
}

void validate_bundle(const EmbeddingBundle& bundle) {
    auto fail = [](const std::string& what) { throw Error("bundle-invalid", what); };
    if (bundle.f_image.size() != kImageDim)
        fail("f_image must have length " + std::to_string(kImageDim));
    if (bundle.f_text.size() != kTextDim)
        fail("f_text must have length " + std::to_string(kTextDim));
    if (bundle.proposals.rows() > 0 && bundle.proposals.cols() != kProposalDim)
        fail("proposals must have " + std::to_string(kProposalDim) + " columns");
    if (bundle.attributes.rows() > 0 && bundle.attributes.cols() != kAttributeDim)
        fail("attributes must have " + std::to_string(kAttributeDim) + " columns");
    if (static_cast<Eigen::Index>(bundle.proposal_boxes.size()) != bundle.proposals.rows())
        fail("proposal_boxes count does not match proposal rows");
    if (static_cast<Eigen::Index>(bundle.attribute_names.size()) != bundle.attributes.rows())
        fail("attribute_names count does not match attribute rows");
    if (!bundle.f_image.allFinite() || !bundle.f_text.allFinite() ||
        !bundle.proposals.allFinite() || !bundle.attributes.allFinite())
        fail("non-finite entries");
}

EmbeddingBundle encode_bundle(const MemeRecord& record, EncoderBackend& backend) {
    static const Capability kAll[] = {
        Capability::clip_image,     Capability::clip_text,
        Capability::face_detect,    Capability::object_detect,
        Capability::attribute_detect, Capability::proposal_encode,
        Capability::attribute_encode};
    auto caps = backend.capabilities();
    for (Capability c : kAll)
        if (!caps.count(c))
            throw Error("backend-capability-missing",
                        backend.name() + " lacks " + std::string(to_string(c)));
    EmbeddingBundle bundle = backend.encode(record);
    validate_bundle(bundle);
    return bundle;
}

Eigen::MatrixXf synthetic_rows(std::string_view seed_material, int rows, int cols) {
    Rng rng(hash_bytes(seed_material));
    Eigen::MatrixXf out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (int c = 0; c < cols; ++c) {
            float v = static_cast<float>(rng.normal());
            out(r, c) = v;
            sq += static_cast<double>(v) * v;
        }
        float inv = sq > 0.0 ? static_cast<float>(1.0 / std::sqrt(sq)) : 0.0f;
        out.row(r) *= inv;
    }
    return out;
}

std::set<Capability> SyntheticBackend::capabilities() const {
    return {Capability::clip_image,       Capability::clip_text,
            Capability::face_detect,      Capability::object_detect,
            Capability::attribute_detect, Capability::proposal_encode,
            Capability::attribute_encode};
}

namespace {

const char* kAttributeVocab[] = {
    "politics",  "election",  "debate",   "virus",    "mask",     "vaccine",
    "campaign",  "senate",    "congress", "protest",  "economy",  "press",
    "celebrity", "sports",    "weather",  "travel",   "school",   "office",
    "family",    "party",     "flag",     "podium",   "crowd",    "speech",
    "poster",    "interview", "meeting",  "market",   "hospital", "court",
    "border",    "military"};

}  // namespace

EmbeddingBundle SyntheticBackend::encode(const MemeRecord& record) {
    if (record.id.empty())
        throw Error("backend-failure", "synthetic backend needs a record id (clip_image)");
    const std::string base = record.id + '\x1f' + record.ocr_text;
    const uint64_t h = hash_bytes(base);

    EmbeddingBundle bundle;
    bundle.f_image = synthetic_rows(base + "\x1f" "clip_image", 1, kImageDim).row(0);
    bundle.f_text = synthetic_rows(base + "\x1f" "clip_text", 1, kTextDim).row(0);

    int n = options_.proposal_count.value_or(1 + static_cast<int>(h % 4));
    int m = options_.attribute_count.value_or(1 + static_cast<int>(h % 3));
    bundle.proposals = synthetic_rows(base + "\x1f" "proposals", n, kProposalDim);
    bundle.attributes = synthetic_rows(base + "\x1f" "attributes", m, kAttributeDim);

    float w = static_cast<float>(std::max(record.width, 1));
    float hgt = static_cast<float>(std::max(record.height, 1));
    Rng boxes(hash_bytes(base + "\x1f" "boxes"));
    for (int i = 0; i < n; ++i) {
        BoxF b;
        b.x = static_cast<float>(boxes.uniform()) * w * 0.75f;
        b.y = static_cast<float>(boxes.uniform()) * hgt * 0.75f;
        b.w = std::max(1.0f, static_cast<float>(boxes.uniform()) * (w - b.x));
        b.h = std::max(1.0f, static_cast<float>(boxes.uniform()) * (hgt - b.y));
        bundle.proposal_boxes.push_back(b);
    }
    Rng names(hash_bytes(base + "\x1f" "attribute_names"));
    for (int i = 0; i < m; ++i) {
        uint64_t word = names.next_u64();
        char suffix[8];
        std::snprintf(suffix, sizeof(suffix), "%04x",
                      static_cast<unsigned>(names.next_u64() & 0xffff));
        bundle.attribute_names.push_back(
            std::string(kAttributeVocab[word % std::size(kAttributeVocab)]) + "-" + suffix);
    }
    return bundle;
}

EmbeddingCache EmbeddingCache::open_rw(const std::string& path) {
    return EmbeddingCache(TensorFile::open_rw(path));
}

EmbeddingCache EmbeddingCache::open_ro(const std::string& path) {
    return EmbeddingCache(TensorFile::open_ro(path));
}

bool EmbeddingCache::contains(const std::string& id) const {
    return file_.contains(id + "/f_image");
}

std::vector<std::string> EmbeddingCache::ids() const {
    std::vector<std::string> out;
    for (const auto& entry_id : file_.ids()) {
        constexpr std::string_view suffix = "/f_image";
        if (entry_id.size() > suffix.size() &&
            entry_id.compare(entry_id.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(entry_id.substr(0, entry_id.size() - suffix.size()));
    }
    return out;
}

namespace {

std::string pack_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& name : names) {
        uint32_t len = static_cast<uint32_t>(name.size());
        out.append(reinterpret_cast<const char*>(&len), sizeof(len));
        out.append(name);
    }
    return out;
}

std::vector<std::string> unpack_names(const std::string& bytes, uint32_t count,
                                      const std::string& id) {
    std::vector<std::string> names;
    size_t pos = 0;
    for (uint32_t i = 0; i < count; ++i) {
        if (pos + sizeof(uint32_t) > bytes.size())
            throw Error("cache-corrupt", "name block truncated: " + id);
        uint32_t len;
        std::memcpy(&len, bytes.data() + pos, sizeof(len));
        pos += sizeof(len);
        if (pos + len > bytes.size())
            throw Error("cache-corrupt", "name block truncated: " + id);
        names.emplace_back(bytes.substr(pos, len));
        pos += len;
    }
    return names;
}

std::vector<float> matrix_to_rows(const Eigen::MatrixXf& m) {
    std::vector<float> out(static_cast<size_t>(m.rows()) * m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
    return out;
}

Eigen::MatrixXf rows_to_matrix(const std::vector<float>& v, uint32_t rows, uint32_t cols) {
    Eigen::MatrixXf m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < cols; ++c)
            m(r, c) = v[static_cast<size_t>(r) * cols + c];
    return m;
}

}  // namespace

bool EmbeddingCache::put(const std::string& id, const EmbeddingBundle& bundle) {
    validate_bundle(bundle);
    const uint32_t n = static_cast<uint32_t>(bundle.proposals.rows());
    const uint32_t m = static_cast<uint32_t>(bundle.attributes.rows());

    std::vector<float> fi(bundle.f_image.data(), bundle.f_image.data() + kImageDim);
    std::vector<float> ft(bundle.f_text.data(), bundle.f_text.data() + kTextDim);
    uint32_t d_fi[] = {kImageDim};
    bool overwrote = file_.put_f32(id + "/f_image", d_fi, fi);
    uint32_t d_ft[] = {kTextDim};
    file_.put_f32(id + "/f_text", d_ft, ft);

    uint32_t d_p[] = {n, kProposalDim};
    file_.put_f32(id + "/proposals", d_p, matrix_to_rows(bundle.proposals));
    std::vector<float> boxes;
    for (const auto& b : bundle.proposal_boxes) {
        boxes.push_back(b.x);
        boxes.push_back(b.y);
        boxes.push_back(b.w);
        boxes.push_back(b.h);
    }
    uint32_t d_b[] = {n, 4};
    file_.put_f32(id + "/boxes", d_b, boxes);

    uint32_t d_a[] = {m, kAttributeDim};
    file_.put_f32(id + "/attributes", d_a, matrix_to_rows(bundle.attributes));
    uint32_t d_n[] = {m};
    file_.put_bytes(id + "/names", d_n, pack_names(bundle.attribute_names));
    return overwrote;
}

std::optional<EmbeddingBundle> EmbeddingCache::get(const std::string& id) const {
    auto fi = file_.get(id + "/f_image");
    if (!fi) return std::nullopt;
    auto require = [&](const std::string& suffix) {
        auto e = file_.get(id + suffix);
        if (!e)
            throw Error("cache-corrupt", "bundle incomplete, missing " + id + suffix);
        return *e;
    };
    auto ft = require("/f_text");
    auto props = require("/proposals");
    auto boxes = require("/boxes");
    auto attrs = require("/attributes");
    auto names = require("/names");

    if (fi->dims != std::vector<uint32_t>{kImageDim} ||
        ft.dims != std::vector<uint32_t>{kTextDim} || props.dims.size() != 2 ||
        props.dims[1] != kProposalDim || attrs.dims.size() != 2 ||
        attrs.dims[1] != kAttributeDim || boxes.dims.size() != 2 || boxes.dims[1] != 4 ||
        boxes.dims[0] != props.dims[0] || names.dims.size() != 1 ||
        names.dims[0] != attrs.dims[0])
        throw Error("cache-corrupt", "inconsistent bundle dims: " + id);

    EmbeddingBundle bundle;
    bundle.f_image = Eigen::Map<const Eigen::VectorXf>(fi->f32.data(), kImageDim);
    bundle.f_text = Eigen::Map<const Eigen::VectorXf>(ft.f32.data(), kTextDim);
    bundle.proposals = rows_to_matrix(props.f32, props.dims[0], kProposalDim);
    bundle.attributes = rows_to_matrix(attrs.f32, attrs.dims[0], kAttributeDim);
    for (uint32_t i = 0; i < boxes.dims[0]; ++i)
        bundle.proposal_boxes.push_back({boxes.f32[i * 4 + 0], boxes.f32[i * 4 + 1],
                                         boxes.f32[i * 4 + 2], boxes.f32[i * 4 + 3]});
    bundle.attribute_names = unpack_names(names.bytes, names.dims[0], id);
    return bundle;
}

}  // namespace momenta
