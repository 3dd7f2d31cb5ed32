#pragma once
// Dictionary knowledge: first definition of the closest lexical match.

#include <cmath>
#include <optional>
#include <string>

#include "kear/corpus.hpp"
#include "kear/text.hpp"

namespace kear {

// Exact match if present; otherwise the term with minimum edit distance,
// accepted only when distance <= ceil(0.4 * |term|); ties resolved by
// ascending lexicographic order (term_list is sorted).
inline std::optional<std::string> closest_lexical_match(const Dictionary& d,
                                                        const std::string& term) {
    if (term.empty()) return std::nullopt;
    if (d.entries.count(term)) return term;
    size_t threshold = static_cast<size_t>(std::ceil(0.4 * static_cast<double>(term.size())));
    std::optional<std::string> best;
    size_t best_dist = threshold + 1;
    for (const auto& candidate : d.term_list) {
        size_t dist = levenshtein_bounded(term, candidate, threshold);
        if (dist < best_dist) {
            best_dist = dist;
            best = candidate;
        }
    }
    return best;
}

inline std::optional<std::string> first_definition(const Dictionary& d, const std::string& term) {
    auto match = closest_lexical_match(d, term);
    if (!match) return std::nullopt;
    return d.entries.at(*match).front();
}

// "e_q: d_q [SEP] e_c: d_c"; a missing definition drops its segment entirely.
inline std::string render_dict_knowledge(const std::string& e_q, const std::string& e_c,
                                         const Dictionary& d) {
    std::string out;
    if (auto d_q = first_definition(d, e_q)) {
        out = e_q + ": " + *d_q;
    }
    if (auto d_c = first_definition(d, e_c)) {
        if (!out.empty()) out += " " + std::string(kSepPlaceholder) + " ";
        out += e_c + ": " + *d_c;
    }
    return out;
}

}  // namespace kear
