#pragma once

#include <optional>
#include <string>
#include <vector>

#include "momenta/labels.hpp"

namespace momenta {

constexpr int kSchemaVersion = 1;

// One meme: image reference, OCR text, labels, split, provenance.
// Immutable by convention once it enters a manifest.
struct MemeRecord {
    std::string id;
    std::string image_ref;
    std::string ocr_text;
    HarmLabel harm = HarmLabel::harmless;
    std::optional<TargetLabel> target;
    Split split = Split::train;
    std::string source;
    int width = 0;
    int height = 0;
};

struct ValidationIssue {
    std::string field;
    std::string message;
};

struct ValidationResult {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Checks the record-level invariants: non-empty id, positive dimensions,
// and the target/harm consistency rule (a target exists iff the meme is
// harmful). Violations are collected, not thrown.
ValidationResult validate_record(const MemeRecord& record);

struct SplitCounts {
    int train = 0;
    int validation = 0;
    int test = 0;
};

struct DatasetManifest {
    std::string name;
    int schema_version = kSchemaVersion;
    std::vector<MemeRecord> records;

    SplitCounts split_counts() const;
    std::vector<const MemeRecord*> split_records(Split s) const;
};

// Throws "manifest-invalid" on duplicate ids or any record-level violation.
void validate_manifest(const DatasetManifest& manifest);

// Line-delimited serialization: a header line carrying name/schema_version,
// then one JSON object per record with fields id, image_ref, ocr_text, harm,
// target, split, source, width, height (target is null on harmless records).
std::string manifest_to_string(const DatasetManifest& manifest);
DatasetManifest manifest_from_string(const std::string& text);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace momenta
