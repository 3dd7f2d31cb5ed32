#pragma once
// Triple selection: direct-edge rule first, otherwise relation-type-weighted
// scoring over the triples originating from the choice concept.

#include <map>
#include <optional>
#include <string>

#include "kear/corpus.hpp"

namespace kear {

struct ScoredTriple {
    TripleRecord triple;
    double relation_type_weight = 1.0;  // N / N_r over the concept's outgoing triples; >= 1
    double score = 0.0;                 // triple.weight * relation_type_weight
};

// Edge head == e_q, tail == e_c. Among parallel edges: maximum weight, then
// relation name ascending, then input order. Absence is a normal outcome.
inline std::optional<TripleRecord> direct_edge(const KnowledgeGraph& g, const std::string& e_q,
                                               const std::string& e_c) {
    const TripleRecord* best = nullptr;
    for (size_t idx : g.outgoing(e_q)) {
        const TripleRecord& t = g.triples[idx];
        if (t.tail != e_c) continue;
        if (!best || t.weight > best->weight ||
            (t.weight == best->weight && t.relation < best->relation)) {
            best = &t;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

// weight(r) = N / N_r over the multiset of triples with head e_c.
inline std::map<std::string, double> relation_type_weights(const KnowledgeGraph& g,
                                                           const std::string& e_c) {
    std::map<std::string, double> counts;
    const auto& out = g.outgoing(e_c);
    for (size_t idx : out) counts[g.triples[idx].relation] += 1.0;
    std::map<std::string, double> weights;
    double total = static_cast<double>(out.size());
    for (const auto& [rel, n_r] : counts) weights[rel] = total / n_r;
    return weights;
}

// Direct edge wins outright (score = its weight, type weight 1 by convention).
// Otherwise argmax of w_j * t_{r_j} over triples originating from e_c; ties by
// larger weight, then relation name, then input order.
inline std::optional<ScoredTriple> select_triple(const KnowledgeGraph& g, const std::string& e_q,
                                                 const std::string& e_c) {
    if (auto direct = direct_edge(g, e_q, e_c)) {
        return ScoredTriple{*direct, 1.0, direct->weight};
    }
    const auto& out = g.outgoing(e_c);
    if (out.empty()) return std::nullopt;
    auto type_weights = relation_type_weights(g, e_c);
    std::optional<ScoredTriple> best;
    for (size_t idx : out) {
        const TripleRecord& t = g.triples[idx];
        double tw = type_weights.at(t.relation);
        double score = t.weight * tw;
        bool better = !best || score > best->score ||
                      (score == best->score &&
                       (t.weight > best->triple.weight ||
                        (t.weight == best->triple.weight && t.relation < best->triple.relation)));
        if (better) best = ScoredTriple{t, tw, score};
    }
    return best;
}

inline std::string render_kg_knowledge(const TripleRecord& t) {
    return t.head + " " + t.relation + " " + t.tail;
}

inline std::string render_kg_knowledge(const std::optional<TripleRecord>& t) {
    return t ? render_kg_knowledge(*t) : std::string();
}

inline std::string render_kg_knowledge(const std::optional<ScoredTriple>& t) {
    return t ? render_kg_knowledge(t->triple) : std::string();
}

}  // namespace kear
