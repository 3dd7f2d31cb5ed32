#include <catch2/catch_amalgamated.hpp>

#include "kear/ensemble.hpp"
#include "test_util.hpp"

using namespace kear;

namespace {

ChoiceDistribution dist(std::vector<double> p) { return ChoiceDistribution{std::move(p)}; }

// independent prefix evaluation: hand-rolled vote counting per question
double brute_force_prefix_accuracy(const std::vector<ModelPredictions>& models, size_t k,
                                   const std::vector<int>& answers) {
    long correct = 0;
    size_t n_questions = answers.size();
    for (size_t q = 0; q < n_questions; ++q) {
        size_t n = models[0].probs[q].probs.size();
        std::vector<int> counts(n, 0);
        for (size_t m = 0; m < k; ++m) counts[static_cast<size_t>(models[m].preds[q])]++;
        int best = -1, best_count = -1;
        double best_mean = -1.0;
        for (size_t c = 0; c < n; ++c) {
            double mean = 0.0;
            for (size_t m = 0; m < k; ++m) mean += models[m].probs[q].probs[c];
            mean /= static_cast<double>(k);
            if (counts[c] > best_count ||
                (counts[c] == best_count && mean > best_mean)) {
                best = static_cast<int>(c);
                best_count = counts[c];
                best_mean = mean;
            }
        }
        if (best == answers[q]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_questions);
}

}  // namespace

TEST_CASE("majority_vote", "[ensemble]") {
    SECTION("strict majority wins") {
        CHECK(majority_vote({0, 0, 1},
                            {dist({0.6, 0.4}), dist({0.7, 0.3}), dist({0.2, 0.8})}) == 0);
    }
    SECTION("single model returns its own prediction") {
        CHECK(majority_vote({2}, {dist({0.1, 0.2, 0.7})}) == 2);
    }
    SECTION("vote tie broken by mean probability") {
        // means: index 0 -> (0.52 + 0.40) / 2 = 0.46, index 1 -> 0.54
        CHECK(majority_vote({0, 1}, {dist({0.52, 0.48}), dist({0.40, 0.60})}) == 1);
    }
    SECTION("full tie falls back to the lowest index") {
        CHECK(majority_vote({0, 1}, {dist({0.5, 0.5}), dist({0.5, 0.5})}) == 0);
    }
    SECTION("identical models return that prediction") {
        std::vector<int> votes(7, 3);
        std::vector<ChoiceDistribution> probs(7, dist({0.1, 0.1, 0.1, 0.7}));
        CHECK(majority_vote(votes, probs) == 3);
    }
    SECTION("model order does not matter") {
        std::vector<int> votes = {0, 1, 1, 2, 0};
        std::vector<ChoiceDistribution> probs = {dist({0.5, 0.3, 0.2}), dist({0.2, 0.6, 0.2}),
                                                 dist({0.3, 0.4, 0.3}), dist({0.1, 0.2, 0.7}),
                                                 dist({0.6, 0.2, 0.2})};
        int baseline = majority_vote(votes, probs);
        Rng rng(3);
        std::vector<size_t> order = {0, 1, 2, 3, 4};
        for (int t = 0; t < 50; ++t) {
            rng.shuffle(order);
            std::vector<int> v;
            std::vector<ChoiceDistribution> p;
            for (size_t i : order) {
                v.push_back(votes[i]);
                p.push_back(probs[i]);
            }
            CHECK(majority_vote(v, p) == baseline);
        }
    }
    SECTION("inconsistent choice counts rejected") {
        CHECK_THROWS_WITH(majority_vote({0, 0}, {dist({0.5, 0.5}), dist({0.3, 0.3, 0.4})}),
                          Catch::Matchers::ContainsSubstring("inconsistent"));
    }
    SECTION("empty input rejected") {
        CHECK_THROWS(majority_vote({}, {}));
    }
}

TEST_CASE("greedy_prefix_select", "[ensemble]") {
    SECTION("single model: roster of one with its own accuracy") {
        ModelPredictions m;
        m.name = "only";
        m.preds = {0, 1, 0};
        m.probs = {dist({0.9, 0.1}), dist({0.2, 0.8}), dist({0.6, 0.4})};
        PrefixSelection sel = greedy_prefix_select({m}, {"a", "b", "c"}, {0, 1, 1});
        CHECK(sel.roster_size == 1);
        CHECK_THAT(sel.report.accuracy, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
    }

    SECTION("empty model list rejected") {
        CHECK_THROWS(greedy_prefix_select({}, {}, {}));
    }

    SECTION("matches brute force on synthetic models") {
        Rng rng(41);
        const size_t n_questions = 50, n_models = 4, n_choices = 4;
        std::vector<std::string> ids;
        std::vector<int> answers;
        for (size_t q = 0; q < n_questions; ++q) {
            ids.push_back("q" + std::to_string(q));
            answers.push_back(static_cast<int>(rng.index(n_choices)));
        }
        std::vector<ModelPredictions> models(n_models);
        for (size_t m = 0; m < n_models; ++m) {
            models[m].name = "m" + std::to_string(m);
            for (size_t q = 0; q < n_questions; ++q) {
                std::vector<double> p(n_choices);
                double total = 0.0;
                for (auto& v : p) {
                    v = rng.uniform(0.01, 1.0);
                    total += v;
                }
                for (auto& v : p) v /= total;
                models[m].probs.push_back(dist(p));
                models[m].preds.push_back(models[m].probs.back().argmax());
            }
        }
        // rank descending by individual accuracy (precondition of the operation)
        std::stable_sort(models.begin(), models.end(),
                         [&](const ModelPredictions& a, const ModelPredictions& b) {
                             long ca = 0, cb = 0;
                             for (size_t q = 0; q < n_questions; ++q) {
                                 if (a.preds[q] == answers[q]) ++ca;
                                 if (b.preds[q] == answers[q]) ++cb;
                             }
                             return ca > cb;
                         });

        PrefixSelection sel = greedy_prefix_select(models, ids, answers);
        REQUIRE(sel.prefix_accuracies.size() == n_models);
        double best = -1.0;
        int best_k = 0;
        for (size_t k = 1; k <= n_models; ++k) {
            double acc = brute_force_prefix_accuracy(models, k, answers);
            CHECK_THAT(sel.prefix_accuracies[k - 1], Catch::Matchers::WithinAbs(acc, 1e-12));
            if (acc > best) {
                best = acc;
                best_k = static_cast<int>(k);
            }
        }
        CHECK(sel.roster_size == best_k);
        CHECK_THAT(sel.report.accuracy, Catch::Matchers::WithinAbs(best, 1e-12));
        // the best single model is itself a candidate prefix
        CHECK(sel.report.accuracy >= sel.prefix_accuracies[0]);
    }
}

TEST_CASE("prediction file round-trip", "[ensemble]") {
    kear::test::TempDir tmp("preds");
    std::vector<std::string> ids = {"a", "b"};
    std::vector<ChoiceDistribution> probs = {dist({0.25, 0.75}), dist({0.9, 0.1})};
    std::vector<int> preds = {1, 0};
    save_predictions(tmp.file("p.jsonl"), ids, probs, preds);
    ModelPredictions m = load_predictions(tmp.file("p.jsonl"), ids);
    CHECK(m.preds == preds);
    CHECK(m.probs[0].probs == probs[0].probs);
    CHECK(m.probs[1].probs == probs[1].probs);

    CHECK_THROWS_WITH(load_predictions(tmp.file("p.jsonl"), {"a", "b", "missing"}),
                      Catch::Matchers::ContainsSubstring("missing prediction"));
}
