#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kear/retrieval_index.hpp"
#include "test_util.hpp"

using namespace kear;

namespace {

// Independent brute-force BM25: recomputes tf/df/lengths from the raw texts
// and evaluates the stated formula per document, per distinct query term in
// sorted order.
struct Bm25Oracle {
    std::vector<std::vector<std::string>> docs;
    double k1, b;

    explicit Bm25Oracle(const std::vector<IndexedDocument>& documents, double k1_in, double b_in)
        : k1(k1_in), b(b_in) {
        for (const auto& d : documents) docs.push_back(tokenize_for_retrieval(d.text));
    }

    double score(const std::vector<std::string>& query, size_t doc) const {
        double avgdl = 0.0;
        for (const auto& d : docs) avgdl += static_cast<double>(d.size());
        avgdl = docs.empty() ? 0.0 : avgdl / static_cast<double>(docs.size());
        if (avgdl <= 0.0) return 0.0;
        std::set<std::string> distinct(query.begin(), query.end());
        double total = 0.0;
        double n = static_cast<double>(docs.size());
        for (const auto& term : distinct) {
            double tf = 0.0;
            for (const auto& w : docs[doc]) {
                if (w == term) tf += 1.0;
            }
            if (tf == 0.0) continue;
            double df = 0.0;
            for (const auto& d : docs) {
                if (std::find(d.begin(), d.end(), term) != d.end()) df += 1.0;
            }
            double dl = static_cast<double>(docs[doc].size());
            double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
            total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        return total;
    }

    std::vector<size_t> top_m(const std::string& query, size_t m,
                              const std::optional<std::string>& exclude,
                              const std::vector<IndexedDocument>& documents) const {
        auto terms = tokenize_for_retrieval(query);
        std::vector<std::pair<double, size_t>> scored;
        for (size_t i = 0; i < docs.size(); ++i) {
            double s = score(terms, i);
            if (s <= 0.0) continue;
            if (exclude && documents[i].doc_id == *exclude) continue;
            scored.push_back({s, i});
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b2) {
            if (a.first != b2.first) return a.first > b2.first;
            return a.second < b2.second;
        });
        std::vector<size_t> out;
        for (size_t i = 0; i < scored.size() && i < m; ++i) out.push_back(scored[i].second);
        return out;
    }
};

IndexedDocument doc(const std::string& id, const std::string& text) {
    return {id, "test", text, text, ""};
}

}  // namespace

TEST_CASE("tokenize_for_retrieval", "[retrieval_index]") {
    CHECK(tokenize_for_retrieval("What has a surface?") ==
          std::vector<std::string>{"what", "has", "a", "surface"});
    CHECK(tokenize_for_retrieval("").empty());
    CHECK(tokenize_for_retrieval("ice-cream") == std::vector<std::string>{"ice", "cream"});
}

TEST_CASE("build_index postings and errors", "[retrieval_index]") {
    auto ix = build_index({doc("a", "dog eats bone"), doc("b", "dog runs")});
    CHECK(ix.postings().at("dog").size() == 2);
    CHECK(ix.postings().at("bone").size() == 1);
    CHECK(ix.average_doc_length() == Catch::Approx(2.5));

    CHECK_THROWS_WITH(build_index({doc("a", "x"), doc("a", "y")}),
                      Catch::Matchers::ContainsSubstring("duplicate doc_id"));

    // single empty doc: avgdl 0, scores defined as 0
    auto empty = build_index({doc("a", "")});
    CHECK(empty.doc_lengths() == std::vector<double>{0.0});
    CHECK(empty.average_doc_length() == 0.0);
    CHECK(bm25_score(empty, {"dog"}, 0) == 0.0);
}

TEST_CASE("bm25_score basics", "[retrieval_index]") {
    auto ix = build_index({doc("d0", "dog eats bone"), doc("d1", "dog runs"),
                           doc("d2", "cat sleeps")});

    SECTION("term absent from all docs contributes 0") {
        CHECK(bm25_score(ix, {"unicorn"}, 0) == 0.0);
    }
    SECTION("query equal to the whole doc scores positive") {
        CHECK(bm25_score(ix, {"dog", "eats", "bone"}, 0) > 0.0);
    }
    SECTION("hand-computed toy corpus matches the brute-force oracle") {
        Bm25Oracle oracle(ix.documents(), ix.k1(), ix.b());
        std::vector<std::string> query = {"dog", "bone"};
        for (size_t d = 0; d < 3; ++d) {
            double got = bm25_score(ix, query, d);
            double want = oracle.score(query, d);
            CHECK_THAT(got, Catch::Matchers::WithinRel(want, 1e-9));
        }
        // frozen spot value: idf(dog)=ln 1.6, idf(bone)=ln(8/3), dl=3, avgdl=7/3
        double sat = 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * (3.0 / (7.0 / 3.0))));
        double expect = (std::log(1.6) + std::log(8.0 / 3.0)) * sat;
        CHECK_THAT(bm25_score(ix, query, 0), Catch::Matchers::WithinRel(expect, 1e-12));
    }
    SECTION("repeated query terms counted once") {
        CHECK(bm25_score(ix, {"dog", "dog"}, 1) == bm25_score(ix, {"dog"}, 1));
    }
    SECTION("invalid doc index throws") {
        CHECK_THROWS(bm25_score(ix, {"dog"}, 99));
    }
}

TEST_CASE("top_m ranking, exclusion, zero-score drop", "[retrieval_index]") {
    auto ix = build_index({doc("d0", "dog eats bone"), doc("d1", "dog runs"),
                           doc("d2", "cat sleeps")});

    auto hits = ix.top_m("dog bone", 10);
    REQUIRE(hits.size() == 2);  // d2 has zero score and is excluded
    CHECK(hits[0] == 0);
    CHECK(hits[1] == 1);

    CHECK(ix.top_m("unicorn horn", 10).empty());

    // excluding the best-scoring doc: result starts at second best and the
    // budget still allows M items
    auto excluded = ix.top_m("dog bone", 1, std::string("d0"));
    REQUIRE(excluded.size() == 1);
    CHECK(excluded[0] == 1);

    CHECK(ix.top_m("dog", 0).empty());
}

TEST_CASE("bm25 monotonicity in tf with dl held fixed", "[retrieval_index]") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        double k1 = rng.uniform(0.0, 3.0);
        double b = rng.uniform(0.0, 1.0);
        double dl = 1.0 + static_cast<double>(rng.index(30));
        double avgdl = 1.0 + rng.uniform(0.0, 20.0);
        size_t df = 1 + rng.index(50);
        size_t n = df + rng.index(100);
        double prev = 0.0;
        for (int tf = 0; tf <= 20; ++tf) {
            double s = bm25_term_score(static_cast<double>(tf), df, dl, avgdl, n, k1, b);
            CHECK(s >= prev);  // adding an occurrence never decreases the score
            prev = s;
        }
    }
}

TEST_CASE("top_m matches brute force on random corpora", "[retrieval_index]") {
    Rng rng(29);
    std::vector<std::string> pool;
    for (int i = 0; i < 40; ++i) pool.push_back("w" + std::to_string(i));
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<IndexedDocument> docs;
        size_t n = 5 + rng.index(60);
        for (size_t i = 0; i < n; ++i) {
            std::string text;
            size_t len = rng.index(12);
            for (size_t k = 0; k < len; ++k) {
                if (!text.empty()) text += ' ';
                text += pool[rng.index(pool.size())];
            }
            docs.push_back(doc("doc" + std::to_string(i), text));
        }
        double k1 = rng.uniform(0.5, 2.0), b = rng.uniform(0.0, 1.0);
        auto ix = build_index(docs, k1, b);
        Bm25Oracle oracle(docs, k1, b);
        for (int q = 0; q < 8; ++q) {
            std::string query;
            size_t len = 1 + rng.index(4);
            for (size_t k = 0; k < len; ++k) {
                if (!query.empty()) query += ' ';
                query += pool[rng.index(pool.size())];
            }
            size_t m = 1 + rng.index(8);
            auto got = ix.top_m(query, m);
            auto want = oracle.top_m(query, m, std::nullopt, docs);
            CHECK(got == want);
        }
    }
}

TEST_CASE("index build determinism", "[retrieval_index]") {
    std::vector<IndexedDocument> docs = {doc("a", "x y z"), doc("b", "x x q"), doc("c", "z q")};
    auto ix1 = build_index(docs);
    auto ix2 = build_index(docs);
    CHECK(ix1.top_m("x z", 3) == ix2.top_m("x z", 3));
    CHECK(bm25_score(ix1, {"x"}, 1) == bm25_score(ix2, {"x"}, 1));
}

TEST_CASE("index persistence round-trip preserves query results", "[retrieval_index]") {
    kear::test::TempDir tmp("index");
    Rng rng(37);
    std::vector<std::string> pool;
    for (int i = 0; i < 25; ++i) pool.push_back("t" + std::to_string(i));
    std::vector<IndexedDocument> docs;
    for (size_t i = 0; i < 30; ++i) {
        std::string text;
        for (size_t k = 0, len = 1 + rng.index(10); k < len; ++k) {
            if (!text.empty()) text += ' ';
            text += pool[rng.index(pool.size())];
        }
        docs.push_back(doc("doc" + std::to_string(i), text));
    }
    auto ix = build_index(docs, 1.4, 0.6);
    ix.save(tmp.file("ix.json"));
    auto loaded = InvertedIndex::load(tmp.file("ix.json"));
    CHECK(loaded.k1() == ix.k1());
    CHECK(loaded.doc_count() == ix.doc_count());
    for (int q = 0; q < 50; ++q) {
        std::string query = pool[rng.index(pool.size())] + " " + pool[rng.index(pool.size())];
        CHECK(loaded.top_m(query, 5) == ix.top_m(query, 5));
        for (size_t d = 0; d < docs.size(); ++d) {
            CHECK(loaded.score(tokenize_for_retrieval(query), d) ==
                  ix.score(tokenize_for_retrieval(query), d));
        }
    }

    kear::test::write_file(tmp.file("bad.json"), "{\"format_version\": 99}\n");
    CHECK_THROWS_WITH(InvertedIndex::load(tmp.file("bad.json")),
                      Catch::Matchers::ContainsSubstring("format version"));
}

TEST_CASE("build_query", "[retrieval_index]") {
    CHECK(build_query("q text", "c", "kg here", "dict here") == "q text c kg here dict here");
    CHECK(build_query("q", "c", "", "d") == "q c d");
    CHECK(build_query("q", "c", "", "") == "q c");
    // separators are stripped, never indexed
    CHECK(build_query("q", "c", "", "a: x [SEP] b: y") == "q c a: x b: y");
}

TEST_CASE("render_train_knowledge", "[retrieval_index]") {
    IndexedDocument d1{"t1", "src", "indexed text ignored", "What do dogs like to eat?", "bones"};
    IndexedDocument d2{"t2", "src", "ignored", "Where do cats nap?", "sofa"};
    CHECK(render_train_knowledge({d1}) == "What do dogs like to eat? bones");
    CHECK(render_train_knowledge({}) == "");
    std::string two = render_train_knowledge({d1, d2});
    CHECK(two ==
          "What do dogs like to eat? bones [SEP] Where do cats nap? sofa");
    // knowledge part of the indexed text never leaks into the rendering
    CHECK(two.find("indexed text") == std::string::npos);
}
