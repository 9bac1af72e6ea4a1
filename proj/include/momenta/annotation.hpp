#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "momenta/labels.hpp"

namespace momenta {

struct AnnotatorLabel {
    std::string annotator_id;
    HarmLabel harm = HarmLabel::harmless;
    std::optional<TargetLabel> target;
};

// All labels submitted for one meme, pre-consolidation. The protocol expects
// exactly three annotators per meme.
struct AnnotationSet {
    std::string meme_id;
    std::vector<AnnotatorLabel> labels;
};

enum class ConsolidationMethod { unanimous, majority, consolidator };

// Per-task outcome: either a decided ordinal (unanimous or strict majority),
// or an escalation to a human consolidator.
struct TaskDecision {
    bool decided = false;
    int label = -1;  // ordinal in the task's label space, valid when decided
    ConsolidationMethod method = ConsolidationMethod::consolidator;
};

struct ConsolidationResult {
    std::string meme_id;
    TaskDecision harm;
    // Target is consolidated over the annotators who judged the meme harmful
    // and supplied a target; absent when no annotator did.
    std::optional<TaskDecision> target;
};

// Strict-majority consolidation, applied independently per task. Throws a
// protocol error unless exactly three labels were submitted.
ConsolidationResult consolidate(const AnnotationSet& annotations);

// Cohen's kappa over two equal-length sequences of class codes.
// By convention returns 1 when chance agreement is 1 and the sequences are
// identical, 0 otherwise.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

enum class AgreementTask { harm, target };

// Mean of cohen_kappa over every annotator pair that shares at least one
// labeled meme for the task. Errors when no pair shares any.
double average_pairwise_kappa(const std::vector<AnnotationSet>& sets, AgreementTask task);

// Annotation file: one line per (meme_id, annotator_id, harm, target),
// tab- or space-separated, target written as "-" when absent. Ids must not
// contain whitespace.
std::vector<AnnotationSet> read_annotations(const std::string& path);
void write_annotations(const std::vector<AnnotationSet>& sets, const std::string& path);

}  // namespace momenta
