#include "momenta/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "momenta/error.hpp"

namespace momenta {

namespace {

// Strict majority over submitted ordinals; all-distinct escalates.
TaskDecision decide(const std::vector<int>& votes) {
    std::map<int, int> counts;
    for (int v : votes) ++counts[v];
    int best_label = -1, best_count = 0;
    for (auto [label, count] : counts) {
        if (count > best_count) {
            best_label = label;
            best_count = count;
        }
    }
    TaskDecision d;
    if (best_count == static_cast<int>(votes.size())) {
        d = {true, best_label, ConsolidationMethod::unanimous};
    } else if (best_count * 2 > static_cast<int>(votes.size())) {
        d = {true, best_label, ConsolidationMethod::majority};
    } else {
        d = {false, -1, ConsolidationMethod::consolidator};
    }
    return d;
}

}  // namespace

ConsolidationResult consolidate(const AnnotationSet& annotations) {
    if (annotations.labels.size() != 3)
        throw Error("protocol-error",
                    "meme " + annotations.meme_id + ": expected 3 annotations, got " +
                        std::to_string(annotations.labels.size()));
    std::set<std::string> annotators;
    for (const auto& l : annotations.labels)
        if (!annotators.insert(l.annotator_id).second)
            throw Error("protocol-error", "meme " + annotations.meme_id +
                                              ": duplicate annotator " + l.annotator_id);

    ConsolidationResult result;
    result.meme_id = annotations.meme_id;

    std::vector<int> harm_votes;
    for (const auto& l : annotations.labels)
        harm_votes.push_back(ordinal_index(l.harm));
    result.harm = decide(harm_votes);

    // Targets are undefined for harmless votes, so only annotators who judged
    // the meme harmful take part in the target decision.
    std::vector<int> target_votes;
    for (const auto& l : annotations.labels)
        if (l.harm != HarmLabel::harmless && l.target)
            target_votes.push_back(ordinal_index(*l.target));
    if (!target_votes.empty()) result.target = decide(target_votes);
    return result;
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size())
        throw Error("length-mismatch", "kappa sequences differ in length: " +
                                           std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()));
    if (a.empty())
        throw Error("length-mismatch", "kappa needs at least one item");

    const double n = static_cast<double>(a.size());
    std::map<int, double> freq_a, freq_b;
    double agree = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        freq_a[a[i]] += 1.0;
        freq_b[b[i]] += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    double p_o = agree / n;
    double p_e = 0.0;
    for (auto [label, count_a] : freq_a) {
        auto it = freq_b.find(label);
        if (it != freq_b.end()) p_e += (count_a / n) * (it->second / n);
    }
    if (p_e >= 1.0 - 1e-15)
        return p_o >= 1.0 - 1e-15 ? 1.0 : 0.0;
    return (p_o - p_e) / (1.0 - p_e);
}

double average_pairwise_kappa(const std::vector<AnnotationSet>& sets, AgreementTask task) {
    // annotator -> meme -> code
    std::map<std::string, std::map<std::string, int>> codes;
    for (const auto& s : sets) {
        for (const auto& l : s.labels) {
            if (task == AgreementTask::harm) {
                codes[l.annotator_id][s.meme_id] = ordinal_index(l.harm);
            } else if (l.target) {
                codes[l.annotator_id][s.meme_id] = ordinal_index(*l.target);
            }
        }
    }
    std::vector<std::string> annotators;
    for (const auto& [id, _] : codes) annotators.push_back(id);

    double sum = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < annotators.size(); ++i) {
        for (size_t j = i + 1; j < annotators.size(); ++j) {
            const auto& ca = codes[annotators[i]];
            const auto& cb = codes[annotators[j]];
            std::vector<int> seq_a, seq_b;
            for (const auto& [meme, code] : ca) {
                auto it = cb.find(meme);
                if (it != cb.end()) {
                    seq_a.push_back(code);
                    seq_b.push_back(it->second);
                }
            }
            if (seq_a.empty()) continue;
            sum += cohen_kappa(seq_a, seq_b);
            ++pairs;
        }
    }
    if (pairs == 0)
        throw Error("no-shared-memes", "no annotator pair shares a labeled meme");
    return sum / pairs;
}

namespace {

bool has_space(const std::string& s) {
    return s.find_first_of(" \t\r\n") != std::string::npos;
}

}  // namespace

std::vector<AnnotationSet> read_annotations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("annotations-not-found", "cannot open annotations: " + path);
    std::map<std::string, AnnotationSet> by_meme;
    std::vector<std::string> order;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string meme_id, annotator_id, harm_s, target_s;
        if (!(ls >> meme_id >> annotator_id >> harm_s >> target_s))
            throw Error("annotations-invalid",
                        "line " + std::to_string(line_no) +
                            ": expected meme_id annotator_id harm target");
        AnnotatorLabel label;
        label.annotator_id = annotator_id;
        label.harm = parse_harm(harm_s);
        if (target_s != "-") label.target = parse_target(target_s);
        auto [it, inserted] = by_meme.try_emplace(meme_id);
        if (inserted) {
            it->second.meme_id = meme_id;
            order.push_back(meme_id);
        }
        it->second.labels.push_back(std::move(label));
    }
    std::vector<AnnotationSet> sets;
    sets.reserve(order.size());
    for (const auto& id : order) sets.push_back(std::move(by_meme[id]));
    return sets;
}

void write_annotations(const std::vector<AnnotationSet>& sets, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io-error", "cannot open for writing: " + path);
    for (const auto& s : sets) {
        if (has_space(s.meme_id))
            throw Error("annotations-invalid", "meme id contains whitespace: " + s.meme_id);
        for (const auto& l : s.labels) {
            if (has_space(l.annotator_id))
                throw Error("annotations-invalid",
                            "annotator id contains whitespace: " + l.annotator_id);
            out << s.meme_id << '\t' << l.annotator_id << '\t' << to_string(l.harm) << '\t'
                << (l.target ? to_string(*l.target) : "-") << '\n';
        }
    }
    if (!out)
        throw Error("io-error", "write failed: " + path);
}

}  // namespace momenta
