#include "momenta/record.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "momenta/error.hpp"

namespace momenta {

using ordered_json = nlohmann::ordered_json;

ValidationResult validate_record(const MemeRecord& record) {
    ValidationResult result;
    if (record.id.empty())
        result.issues.push_back({"id", "empty id"});
    if (record.width <= 0)
        result.issues.push_back({"width", "non-positive width"});
    if (record.height <= 0)
        result.issues.push_back({"height", "non-positive height"});
    bool harmful = record.harm != HarmLabel::harmless;
    if (harmful && !record.target)
        result.issues.push_back({"target", "missing target on harmful record"});
    if (!harmful && record.target)
        result.issues.push_back({"target", "target on harmless record"});
    return result;
}

SplitCounts DatasetManifest::split_counts() const {
    SplitCounts c;
    for (const auto& r : records) {
        switch (r.split) {
            case Split::train: ++c.train; break;
            case Split::validation: ++c.validation; break;
            case Split::test: ++c.test; break;
        }
    }
    return c;
}

std::vector<const MemeRecord*> DatasetManifest::split_records(Split s) const {
    std::vector<const MemeRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

void validate_manifest(const DatasetManifest& manifest) {
    std::unordered_set<std::string> seen;
    for (const auto& r : manifest.records) {
        if (!seen.insert(r.id).second)
            throw Error("manifest-invalid", "duplicate id: " + r.id);
        auto v = validate_record(r);
        if (!v.ok())
            throw Error("manifest-invalid",
                        "record " + r.id + ": " + v.issues.front().message);
    }
}

static ordered_json record_to_json(const MemeRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["image_ref"] = r.image_ref;
    j["ocr_text"] = r.ocr_text;
    j["harm"] = std::string(to_string(r.harm));
    if (r.target)
        j["target"] = std::string(to_string(*r.target));
    else
        j["target"] = nullptr;
    j["split"] = std::string(to_string(r.split));
    j["source"] = r.source;
    j["width"] = r.width;
    j["height"] = r.height;
    return j;
}

static MemeRecord record_from_json(const ordered_json& j, size_t line_no) {
    auto context = [&](const char* what) {
        return "line " + std::to_string(line_no) + ": " + what;
    };
    for (const auto& key : {"id", "image_ref", "ocr_text", "harm", "target",
                            "split", "source", "width", "height"})
        if (!j.contains(key))
            throw Error("manifest-invalid", context("missing field ") + key);
    MemeRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.image_ref = j.at("image_ref").get<std::string>();
        r.ocr_text = j.at("ocr_text").get<std::string>();
        r.harm = parse_harm(j.at("harm").get<std::string>());
        if (!j.at("target").is_null())
            r.target = parse_target(j.at("target").get<std::string>());
        r.split = parse_split(j.at("split").get<std::string>());
        r.source = j.at("source").get<std::string>();
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("manifest-invalid", context(e.what()));
    }
    return r;
}

std::string manifest_to_string(const DatasetManifest& manifest) {
    std::ostringstream out;
    ordered_json header;
    header["manifest"] = manifest.name;
    header["schema_version"] = manifest.schema_version;
    out << header.dump() << '\n';
    for (const auto& r : manifest.records)
        out << record_to_json(r).dump() << '\n';
    return out.str();
}

DatasetManifest manifest_from_string(const std::string& text) {
    DatasetManifest manifest;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("manifest-invalid",
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!header_seen && j.contains("schema_version")) {
            header_seen = true;
            manifest.name = j.value("manifest", "");
            manifest.schema_version = j.at("schema_version").get<int>();
            if (manifest.schema_version > kSchemaVersion)
                throw Error("manifest-invalid",
                            "unsupported schema_version " +
                                std::to_string(manifest.schema_version));
            continue;
        }
        header_seen = true;
        manifest.records.push_back(record_from_json(j, line_no));
    }
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot open for writing: " + path);
    out << manifest_to_string(manifest);
    if (!out)
        throw Error("io-error", "write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("manifest-not-found", "cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return manifest_from_string(buf.str());
}

}  // namespace momenta
