#include <catch2/catch_amalgamated.hpp>

#include "kear/kg_retriever.hpp"

using namespace kear;

namespace {

KnowledgeGraph graph(std::vector<TripleRecord> triples) { return make_kg(std::move(triples)); }

// Brute-force reference for select_triple: score every outgoing triple with
// independently recomputed type weights, apply the documented tie-breaks.
std::optional<ScoredTriple> select_triple_oracle(const KnowledgeGraph& g, const std::string& e_q,
                                                 const std::string& e_c) {
    // direct edge: max weight, then relation ascending, then input order
    const TripleRecord* direct = nullptr;
    for (size_t i : g.outgoing(e_q)) {
        const auto& t = g.triples[i];
        if (t.tail != e_c) continue;
        if (!direct || t.weight > direct->weight ||
            (t.weight == direct->weight && t.relation < direct->relation)) {
            direct = &t;
        }
    }
    if (direct) return ScoredTriple{*direct, 1.0, direct->weight};

    const auto& out = g.outgoing(e_c);
    if (out.empty()) return std::nullopt;
    std::map<std::string, size_t> counts;
    for (size_t i : out) counts[g.triples[i].relation] += 1;
    std::optional<ScoredTriple> best;
    for (size_t i : out) {
        const auto& t = g.triples[i];
        double tw = static_cast<double>(out.size()) / static_cast<double>(counts[t.relation]);
        double s = t.weight * tw;
        bool better =
            !best || s > best->score ||
            (s == best->score && (t.weight > best->triple.weight ||
                                  (t.weight == best->triple.weight &&
                                   t.relation < best->triple.relation)));
        if (better) best = ScoredTriple{t, tw, s};
    }
    return best;
}

}  // namespace

TEST_CASE("direct_edge basics", "[kg_retriever]") {
    KnowledgeGraph g = graph({{"surface", "AtLocation", "tetrahedron", 1.0}});
    auto hit = direct_edge(g, "surface", "tetrahedron");
    REQUIRE(hit);
    CHECK(hit->relation == "AtLocation");

    KnowledgeGraph empty = graph({});
    CHECK_FALSE(direct_edge(empty, "surface", "tetrahedron"));

    // tie on weight: relation name ascending wins
    KnowledgeGraph ties = graph({{"a", "R2", "b", 2.0}, {"a", "R1", "b", 2.0}});
    auto best = direct_edge(ties, "a", "b");
    REQUIRE(best);
    CHECK(best->relation == "R1");

    // reverse edges do not count as direct
    KnowledgeGraph reversed = graph({{"b", "R", "a", 5.0}});
    CHECK_FALSE(direct_edge(reversed, "a", "b"));
}

TEST_CASE("relation_type_weights", "[kg_retriever]") {
    // 3 RelatedTo + 1 UsedFor: weights 4/3 and 4 (counted by hand)
    KnowledgeGraph g = graph({{"x", "RelatedTo", "p", 1.0},
                              {"x", "RelatedTo", "q", 2.0},
                              {"x", "RelatedTo", "s", 1.5},
                              {"x", "UsedFor", "t", 1.0}});
    auto w = relation_type_weights(g, "x");
    REQUIRE(w.size() == 2);
    CHECK(w.at("RelatedTo") == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(w.at("UsedFor") == Catch::Approx(4.0).epsilon(1e-12));

    // single relation: weight exactly 1
    KnowledgeGraph single = graph({{"y", "R", "a", 1.0}, {"y", "R", "b", 1.0}});
    auto ws = relation_type_weights(single, "y");
    REQUIRE(ws.size() == 1);
    CHECK(ws.at("R") == 1.0);

    CHECK(relation_type_weights(g, "unknown").empty());
}

TEST_CASE("relation_type_weights consistency invariant", "[kg_retriever]") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TripleRecord> triples;
        size_t n = 1 + rng.index(50);
        for (size_t i = 0; i < n; ++i) {
            triples.push_back({"hub", "R" + std::to_string(rng.index(5)),
                               "t" + std::to_string(i), rng.uniform(0.1, 3.0)});
        }
        KnowledgeGraph g = graph(triples);
        auto w = relation_type_weights(g, "hub");
        std::map<std::string, size_t> counts;
        for (const auto& t : g.triples) counts[t.relation]++;
        size_t total = 0;
        for (const auto& [rel, n_r] : counts) {
            total += n_r;
            CHECK(w.at(rel) >= 1.0);
            // weight(r) * N_r == N
            CHECK(w.at(rel) * static_cast<double>(n_r) ==
                  Catch::Approx(static_cast<double>(n)).epsilon(1e-12));
        }
        CHECK(total == n);
    }
}

TEST_CASE("select_triple worked example", "[kg_retriever]") {
    // scores: 1*(4/3), 2*(4/3)=2.667, 1.5*(4/3), 1*4=4.0 -> UsedFor wins
    KnowledgeGraph g = graph({{"x", "RelatedTo", "p", 1.0},
                              {"x", "RelatedTo", "q", 2.0},
                              {"x", "RelatedTo", "s", 1.5},
                              {"x", "UsedFor", "t", 1.0}});
    auto best = select_triple(g, "unrelated", "x");
    REQUIRE(best);
    CHECK(best->triple.relation == "UsedFor");
    CHECK(best->score == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(best->relation_type_weight == Catch::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("select_triple rule precedence and degenerate cases", "[kg_retriever]") {
    // direct edge beats higher-scoring outgoing triples
    KnowledgeGraph g = graph({{"q", "Direct", "c", 0.1}, {"c", "Rare", "z", 100.0}});
    auto best = select_triple(g, "q", "c");
    REQUIRE(best);
    CHECK(best->triple.relation == "Direct");
    CHECK(best->score == Catch::Approx(0.1));
    CHECK(best->relation_type_weight == 1.0);

    CHECK_FALSE(select_triple(g, "q", "absent"));

    // concept with only incoming edges yields nothing
    KnowledgeGraph incoming = graph({{"z", "R", "c", 1.0}});
    CHECK_FALSE(select_triple(incoming, "q", "c"));
}

TEST_CASE("select_triple matches brute force on random graphs", "[kg_retriever]") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<TripleRecord> triples;
        size_t n = rng.index(51);
        for (size_t i = 0; i < n; ++i) {
            // small value pools make score and weight ties common
            triples.push_back({rng.uniform() < 0.7 ? "ec" : "eq",
                               "R" + std::to_string(rng.index(4)),
                               rng.uniform() < 0.2 ? "ec" : "t" + std::to_string(rng.index(6)),
                               (1.0 + static_cast<double>(rng.index(4))) / 2.0});
        }
        KnowledgeGraph g = graph(triples);
        auto got = select_triple(g, "eq", "ec");
        auto want = select_triple_oracle(g, "eq", "ec");
        REQUIRE(got.has_value() == want.has_value());
        if (got) {
            CHECK(got->triple.head == want->triple.head);
            CHECK(got->triple.relation == want->triple.relation);
            CHECK(got->triple.tail == want->triple.tail);
            CHECK(got->triple.weight == want->triple.weight);
            CHECK(got->score == want->score);
            CHECK(got->relation_type_weight == want->relation_type_weight);
            CHECK(got->score ==
                  Catch::Approx(got->triple.weight * got->relation_type_weight).epsilon(1e-12));
            CHECK(got->relation_type_weight >= 1.0);
        }
    }
}

TEST_CASE("select_triple invariant under permutation without input-order ties",
          "[kg_retriever]") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TripleRecord> triples;
        size_t n = 1 + rng.index(20);
        for (size_t i = 0; i < n; ++i) {
            // distinct weights: the input-order tie-break is never reached
            triples.push_back({"ec", "R" + std::to_string(rng.index(3)),
                               "t" + std::to_string(i), 1.0 + 0.001 * static_cast<double>(i)});
        }
        KnowledgeGraph g1 = graph(triples);
        rng.shuffle(triples);
        KnowledgeGraph g2 = graph(triples);
        auto a = select_triple(g1, "none", "ec");
        auto b = select_triple(g2, "none", "ec");
        REQUIRE(a);
        REQUIRE(b);
        CHECK(a->triple.tail == b->triple.tail);
        CHECK(a->score == b->score);
    }
}

TEST_CASE("render_kg_knowledge", "[kg_retriever]") {
    TripleRecord surface{"surface", "AtLocation", "tetrahedron", 1.0};
    CHECK(render_kg_knowledge(surface) == "surface AtLocation tetrahedron");
    TripleRecord dog{"dog", "Desires", "bone", 1.0};
    CHECK(render_kg_knowledge(dog) == "dog Desires bone");
    CHECK(render_kg_knowledge(std::optional<ScoredTriple>{}) == "");
    CHECK(render_kg_knowledge(std::optional<TripleRecord>{}) == "");
}
