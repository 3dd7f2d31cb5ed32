#pragma once
// Entity linking for datasets without gold concepts: exact token-span matches
// against the KG concept vocabulary, longest-entity selection, and the
// maximum-total-length cross edge.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kear/corpus.hpp"
#include "kear/text.hpp"

namespace kear {

// Precomputed token-span matcher over a concept vocabulary. Concepts are
// compared by their token sequences, so punctuation differences do not block
// a match; the returned strings are the original vocabulary entries.
class ConceptMatcher {
  public:
    explicit ConceptMatcher(const std::set<std::string>& vocab) {
        for (const auto& entry : vocab) {
            auto tokens = tokenize_for_retrieval(entry);
            if (tokens.empty()) continue;
            if (tokens.size() > max_tokens_) max_tokens_ = tokens.size();
            by_span_[join(tokens, 0, tokens.size())].push_back(entry);
        }
    }

    std::set<std::string> find_all(const std::string& text) const {
        std::set<std::string> found;
        auto words = tokenize_for_retrieval(text);
        for (size_t i = 0; i < words.size(); ++i) {
            for (size_t len = 1; len <= max_tokens_ && i + len <= words.size(); ++len) {
                auto it = by_span_.find(join(words, i, len));
                if (it == by_span_.end()) continue;
                for (const auto& entry : it->second) found.insert(entry);
            }
        }
        return found;
    }

  private:
    static std::string join(const std::vector<std::string>& words, size_t start, size_t len) {
        std::string out = words[start];
        for (size_t k = 1; k < len; ++k) {
            out += ' ';
            out += words[start + k];
        }
        return out;
    }

    std::map<std::string, std::vector<std::string>> by_span_;
    size_t max_tokens_ = 1;
};

// All vocabulary concepts occurring in the text as contiguous word-boundary
// aligned token spans; overlapping matches all included.
inline std::set<std::string> link_entities(const std::string& text,
                                           const std::set<std::string>& vocab) {
    return ConceptMatcher(vocab).find_all(text);
}

// Maximum character length; ties by ascending lexicographic order.
inline std::optional<std::string> select_longest(const std::set<std::string>& entities) {
    std::optional<std::string> best;
    for (const auto& e : entities) {
        if (!best || e.size() > best->size()) best = e;  // set order makes ties lexicographic
    }
    return best;
}

// Among triples connecting E_q and E_c (either orientation), the one with
// maximum |head| + |tail| in characters; ties by larger weight, then relation
// name, then discovery order.
inline std::optional<TripleRecord> best_edge(const KnowledgeGraph& g,
                                             const std::set<std::string>& e_q,
                                             const std::set<std::string>& e_c) {
    std::optional<TripleRecord> best;
    size_t best_total = 0;
    auto consider = [&](const TripleRecord& t) {
        size_t total = t.head.size() + t.tail.size();
        bool better = !best || total > best_total ||
                      (total == best_total &&
                       (t.weight > best->weight ||
                        (t.weight == best->weight && t.relation < best->relation)));
        if (better) {
            best = t;
            best_total = total;
        }
    };
    for (const auto& head : e_q) {
        for (size_t idx : g.outgoing(head)) {
            if (e_c.count(g.triples[idx].tail)) consider(g.triples[idx]);
        }
    }
    for (const auto& head : e_c) {
        for (size_t idx : g.outgoing(head)) {
            if (e_q.count(g.triples[idx].tail)) consider(g.triples[idx]);
        }
    }
    return best;
}

}  // namespace kear
