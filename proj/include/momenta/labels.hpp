#pragma once

#include <string>
#include <string_view>

namespace momenta {

// Harm intensity. Ordinal order is fixed: the ordinal metric (MMAE) and the
// binary merge both depend on it.
enum class HarmLabel { harmless = 0, partially_harmful = 1, very_harmful = 2 };

// Attacked entity for harmful memes. Ordinal order follows the annotation
// scheme listing: individual, organization, community, society.
enum class TargetLabel { individual = 0, organization = 1, community = 2, society = 3 };

enum class BinaryHarm { harmless = 0, harmful = 1 };

enum class Split { train = 0, validation = 1, test = 2 };

constexpr int kNumHarmClasses = 3;
constexpr int kNumTargetClasses = 4;

constexpr int ordinal_index(HarmLabel h) { return static_cast<int>(h); }
constexpr int ordinal_index(TargetLabel t) { return static_cast<int>(t); }
constexpr int ordinal_index(BinaryHarm b) { return static_cast<int>(b); }

HarmLabel harm_from_ordinal(int i);
TargetLabel target_from_ordinal(int i);

// Collapses the two harmful intensities into one class.
constexpr BinaryHarm merge_to_binary(HarmLabel h) {
    return h == HarmLabel::harmless ? BinaryHarm::harmless : BinaryHarm::harmful;
}

std::string_view to_string(HarmLabel h);
std::string_view to_string(TargetLabel t);
std::string_view to_string(BinaryHarm b);
std::string_view to_string(Split s);

HarmLabel parse_harm(std::string_view s);
TargetLabel parse_target(std::string_view s);
Split parse_split(std::string_view s);

}  // namespace momenta
