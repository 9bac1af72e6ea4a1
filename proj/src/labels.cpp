#include "momenta/labels.hpp"

#include "momenta/error.hpp"

namespace momenta {

HarmLabel harm_from_ordinal(int i) {
    if (i < 0 || i >= kNumHarmClasses)
        throw Error("label-invalid", "harm ordinal out of range: " + std::to_string(i));
    return static_cast<HarmLabel>(i);
}

TargetLabel target_from_ordinal(int i) {
    if (i < 0 || i >= kNumTargetClasses)
        throw Error("label-invalid", "target ordinal out of range: " + std::to_string(i));
    return static_cast<TargetLabel>(i);
}

std::string_view to_string(HarmLabel h) {
    switch (h) {
        case HarmLabel::harmless: return "harmless";
        case HarmLabel::partially_harmful: return "partially_harmful";
        case HarmLabel::very_harmful: return "very_harmful";
    }
    return "?";
}

std::string_view to_string(TargetLabel t) {
    switch (t) {
        case TargetLabel::individual: return "individual";
        case TargetLabel::organization: return "organization";
        case TargetLabel::community: return "community";
        case TargetLabel::society: return "society";
    }
    return "?";
}

std::string_view to_string(BinaryHarm b) {
    return b == BinaryHarm::harmless ? "harmless" : "harmful";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

HarmLabel parse_harm(std::string_view s) {
    if (s == "harmless") return HarmLabel::harmless;
    if (s == "partially_harmful") return HarmLabel::partially_harmful;
    if (s == "very_harmful") return HarmLabel::very_harmful;
    throw Error("label-invalid", "unknown harm label: " + std::string(s));
}

TargetLabel parse_target(std::string_view s) {
    if (s == "individual") return TargetLabel::individual;
    if (s == "organization") return TargetLabel::organization;
    if (s == "community") return TargetLabel::community;
    if (s == "society") return TargetLabel::society;
    throw Error("label-invalid", "unknown target label: " + std::string(s));
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw Error("label-invalid", "unknown split: " + std::string(s));
}

}  // namespace momenta
