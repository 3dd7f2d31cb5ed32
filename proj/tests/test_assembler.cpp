#include <catch2/catch_amalgamated.hpp>

#include "kear/assembler.hpp"

using namespace kear;

namespace {

Tokenizer toy_tokenizer() {
    return build_vocab({"what has a surface tetrahedron object kg dict train knowledge words "
                        "extra pad filler alpha beta gamma delta"},
                       1);
}

void check_invariants(const AugmentedInput& in, int max_len, const Tokenizer& tok) {
    size_t l = in.token_ids.size();
    REQUIRE(l >= 2);
    REQUIRE(l <= static_cast<size_t>(max_len));
    REQUIRE(in.segment_ids.size() == l);
    REQUIRE(in.position_ids.size() == l);
    CHECK(in.token_ids.front() == tok.cls_id);
    for (size_t i = 0; i < l; ++i) {
        CHECK(in.position_ids[i] == static_cast<int>(i) + 1);  // strictly 1..l
        int expected_segment = i < static_cast<size_t>(in.question_span_end) ? 0 : 1;
        CHECK(in.segment_ids[i] == expected_segment);
    }
    CHECK(in.question_span_end >= 2);
    CHECK(in.token_ids[static_cast<size_t>(in.question_span_end) - 1] == tok.sep_id);
}

}  // namespace

TEST_CASE("build_vocab determinism and thresholds", "[assembler]") {
    std::vector<std::string> corpus = {"a b b c c c", "a d"};
    Tokenizer t1 = build_vocab(corpus, 1);
    Tokenizer t2 = build_vocab(corpus, 1);
    CHECK(t1.vocab == t2.vocab);
    // ids by descending count then lexicographic: c(3) b(2) a(2)... a before b? counts: a=2,b=2,c=3,d=1
    CHECK(t1.vocab.at("c") == 4);
    CHECK(t1.vocab.at("a") == 5);  // count tie with b, lexicographic
    CHECK(t1.vocab.at("b") == 6);
    CHECK(t1.vocab.at("d") == 7);

    Tokenizer limited = build_vocab(corpus, 2);
    CHECK(limited.vocab.count("d") == 0);
    CHECK(limited.token_id("d") == limited.unk_id);  // below min_count maps to UNK

    CHECK_THROWS_WITH(build_vocab({"", "   "}, 1), Catch::Matchers::ContainsSubstring("empty"));
    CHECK_THROWS(build_vocab(corpus, 0));
}

TEST_CASE("tokenizer placeholder handling", "[assembler]") {
    Tokenizer tok = build_vocab({"alpha beta"}, 1);
    auto ids = tok.encode("alpha [SEP] beta");
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == tok.vocab.at("alpha"));
    CHECK(ids[1] == tok.sep_id);
    CHECK(ids[2] == tok.vocab.at("beta"));
    // placeholders are not vocabulary words
    CHECK(tok.vocab.count("sep") == 0);
}

TEST_CASE("assemble layout", "[assembler]") {
    Tokenizer tok = toy_tokenizer();

    SECTION("all knowledge empty: [CLS] q c [SEP], all segment 0") {
        auto in = assemble("what has a surface", "tetrahedron", {}, tok, 64);
        REQUIRE(in.token_ids.size() == 7);
        CHECK(in.token_ids.front() == tok.cls_id);
        CHECK(in.token_ids.back() == tok.sep_id);
        CHECK(in.question_span_end == 7);
        for (int s : in.segment_ids) CHECK(s == 0);
        for (size_t i = 0; i < in.position_ids.size(); ++i) {
            CHECK(in.position_ids[i] == static_cast<int>(i) + 1);
        }
    }

    SECTION("nonempty bundle: knowledge carries segment 1 and ends with [SEP]") {
        KnowledgeBundle k{"kg words", "dict words", "train words"};
        auto in = assemble("what", "surface", k, tok, 64);
        // [CLS] what surface [SEP] kg words [SEP] dict words [SEP] train words [SEP]
        REQUIRE(in.token_ids.size() == 13);
        CHECK(in.question_span_end == 4);
        CHECK(in.token_ids.back() == tok.sep_id);
        for (size_t i = 0; i < 4; ++i) CHECK(in.segment_ids[i] == 0);
        for (size_t i = 4; i < in.token_ids.size(); ++i) CHECK(in.segment_ids[i] == 1);
    }

    SECTION("empty fields omit their tokens and separator") {
        KnowledgeBundle k{"", "dict words", ""};
        auto in = assemble("what", "surface", k, tok, 64);
        // [CLS] what surface [SEP] dict words [SEP]
        REQUIRE(in.token_ids.size() == 7);
        int seps = 0;
        for (int id : in.token_ids) {
            if (id == tok.sep_id) ++seps;
        }
        CHECK(seps == 2);
    }
}

TEST_CASE("assemble truncation", "[assembler]") {
    Tokenizer tok = toy_tokenizer();
    KnowledgeBundle k{"alpha beta", "gamma delta", "knowledge words extra pad"};
    auto full = assemble("what has", "surface", k, tok, 64);
    size_t full_len = full.token_ids.size();  // 5 qa + 3 + 3 + 5 = 16

    SECTION("max_len smaller by 3 removes exactly 3 trailing knowledge tokens") {
        auto trimmed = assemble("what has", "surface", k, tok, static_cast<int>(full_len) - 3);
        REQUIRE(trimmed.token_ids.size() == full_len - 3);
        // question/choice region intact
        for (int i = 0; i < trimmed.question_span_end; ++i) {
            CHECK(trimmed.token_ids[static_cast<size_t>(i)] ==
                  full.token_ids[static_cast<size_t>(i)]);
        }
        CHECK(trimmed.token_ids.back() == tok.sep_id);
    }

    SECTION("truncation order is train, then dict, then kg") {
        // tight budget: only the kg section plus its separator fits
        auto in = assemble("what has", "surface", k, tok, 9);
        // [CLS] what has surface [SEP] alpha beta [SEP]
        REQUIRE(in.token_ids.size() <= 9);
        std::vector<int> kg_ids = tok.encode("alpha beta");
        REQUIRE(in.token_ids.size() == 8);
        CHECK(std::equal(kg_ids.begin(), kg_ids.end(), in.token_ids.begin() + 5));
        // no dict/train tokens survive
        for (int id : in.token_ids) {
            CHECK(id != tok.token_id("gamma"));
            CHECK(id != tok.token_id("knowledge"));
        }
    }

    SECTION("question/choice region never truncated; overflow is an error") {
        CHECK_THROWS_WITH(assemble("what has a surface tetrahedron object kg dict train",
                                   "knowledge words extra pad filler", k, tok, 8),
                          Catch::Matchers::ContainsSubstring("question/choice"));
    }

    SECTION("max_len below the minimum is rejected") {
        CHECK_THROWS_AS(assemble("what", "surface", k, tok, 7), std::invalid_argument);
    }
}

TEST_CASE("knowledge isolation: train text never changes the QA region", "[assembler]") {
    Tokenizer tok = toy_tokenizer();
    Rng rng(19);
    std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "pad", "extra"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string train1, train2;
        for (size_t i = 0, n = rng.index(6); i < n; ++i) train1 += words[rng.index(6)] + " ";
        for (size_t i = 0, n = rng.index(6); i < n; ++i) train2 += words[rng.index(6)] + " ";
        KnowledgeBundle k1{"kg words", "dict words", train1};
        KnowledgeBundle k2{"kg words", "dict words", train2};
        int max_len = 10 + static_cast<int>(rng.index(12));
        auto a = assemble("what has", "surface", k1, tok, max_len);
        auto b = assemble("what has", "surface", k2, tok, max_len);
        REQUIRE(a.question_span_end == b.question_span_end);
        for (int i = 0; i < a.question_span_end; ++i) {
            CHECK(a.token_ids[static_cast<size_t>(i)] == b.token_ids[static_cast<size_t>(i)]);
        }
    }
}

TEST_CASE("assembled inputs satisfy type invariants on random cases", "[assembler]") {
    Tokenizer tok = toy_tokenizer();
    Rng rng(101);
    std::vector<std::string> words = {"what", "has", "a", "surface", "alpha", "beta", "gamma",
                                      "delta", "pad", "filler", "zzz"};
    auto random_text = [&](size_t max_words) {
        std::string s;
        for (size_t i = 0, n = rng.index(max_words + 1); i < n; ++i) {
            if (!s.empty()) s += ' ';
            s += words[rng.index(words.size())];
        }
        return s;
    };
    for (int trial = 0; trial < 1200; ++trial) {
        KnowledgeBundle k{random_text(6), random_text(6), random_text(10)};
        std::string q = random_text(5);
        std::string c = words[rng.index(words.size())];
        int max_len = 8 + static_cast<int>(rng.index(24));
        size_t qa_len = 2 + tok.encode(q).size() + tok.encode(c).size();
        if (qa_len > static_cast<size_t>(max_len)) {
            CHECK_THROWS(assemble(q, c, k, tok, max_len));
            continue;
        }
        auto in = assemble(q, c, k, tok, max_len);
        check_invariants(in, max_len, tok);
    }
}

TEST_CASE("assembly determinism", "[assembler]") {
    Tokenizer tok = toy_tokenizer();
    KnowledgeBundle k{"kg words", "dict words [SEP] more", "train words"};
    auto a = assemble("what has a", "surface", k, tok, 16);
    auto b = assemble("what has a", "surface", k, tok, 16);
    CHECK(a.token_ids == b.token_ids);
    CHECK(a.segment_ids == b.segment_ids);
    CHECK(a.position_ids == b.position_ids);
}

TEST_CASE("encode_question", "[assembler]") {
    Tokenizer tok = toy_tokenizer();
    QuestionRecord rec;
    rec.id = "q";
    rec.question_text = "what has a surface";
    rec.choices = {"tetrahedron", "object", "alpha", "beta", "gamma"};

    std::vector<KnowledgeBundle> bundles(5);
    auto inputs = encode_question(rec, bundles, tok, 32);
    CHECK(inputs.size() == 5);

    bundles.pop_back();
    CHECK_THROWS_WITH(encode_question(rec, bundles, tok, 32),
                      Catch::Matchers::ContainsSubstring("bundle count"));

    // identical bundles: inputs differ only in the choice tokens
    std::vector<KnowledgeBundle> same(5, KnowledgeBundle{"kg words", "", ""});
    auto ins = encode_question(rec, same, tok, 32);
    size_t q_tokens = tok.encode(rec.question_text).size();
    for (size_t i = 1; i < ins.size(); ++i) {
        REQUIRE(ins[i].token_ids.size() == ins[0].token_ids.size());
        for (size_t t = 0; t < ins[i].token_ids.size(); ++t) {
            bool is_choice_pos = t >= 1 + q_tokens && t < 1 + q_tokens + 1;
            if (!is_choice_pos) CHECK(ins[i].token_ids[t] == ins[0].token_ids[t]);
        }
    }
}
