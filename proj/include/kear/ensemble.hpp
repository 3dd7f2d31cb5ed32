#pragma once
// Majority-vote combination of trained models and greedy prefix selection of
// the ensemble roster.

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kear/encoder.hpp"
#include "kear/training.hpp"

namespace kear {

// Per-model predictions aligned to one shared question order.
struct ModelPredictions {
    std::string name;
    std::vector<int> preds;
    std::vector<ChoiceDistribution> probs;
};

// The index with the most votes; ties broken by the highest mean probability
// over all models among the tied indices, then by lowest index.
inline int majority_vote(const std::vector<int>& votes,
                         const std::vector<ChoiceDistribution>& probs) {
    if (votes.empty() || votes.size() != probs.size()) {
        throw std::invalid_argument("majority_vote: need one distribution per vote");
    }
    size_t n = probs[0].probs.size();
    for (const auto& p : probs) {
        if (p.probs.size() != n) {
            throw std::invalid_argument("majority_vote: inconsistent choice counts across models");
        }
    }
    std::vector<int> counts(n, 0);
    for (int v : votes) {
        if (v < 0 || v >= static_cast<int>(n)) {
            throw std::invalid_argument("majority_vote: vote out of range");
        }
        ++counts[static_cast<size_t>(v)];
    }
    int max_count = 0;
    for (int c : counts) max_count = std::max(max_count, c);
    int best = -1;
    double best_mean = -1.0;
    for (size_t i = 0; i < n; ++i) {
        if (counts[i] != max_count) continue;
        // summed in sorted order so the tie-break is independent of model order
        std::vector<double> column;
        column.reserve(probs.size());
        for (const auto& p : probs) column.push_back(p.probs[i]);
        std::sort(column.begin(), column.end());
        double mean = 0.0;
        for (double v : column) mean += v;
        mean /= static_cast<double>(probs.size());
        if (mean > best_mean) {
            best_mean = mean;
            best = static_cast<int>(i);
        }
    }
    return best;
}

inline EvalReport ensemble_evaluate(const std::vector<const ModelPredictions*>& models,
                                    const std::vector<std::string>& ids,
                                    const std::vector<int>& answers) {
    EvalReport report;
    long correct = 0;
    for (size_t qi = 0; qi < ids.size(); ++qi) {
        std::vector<int> votes;
        std::vector<ChoiceDistribution> probs;
        for (const ModelPredictions* m : models) {
            votes.push_back(m->preds[qi]);
            probs.push_back(m->probs[qi]);
        }
        QuestionResult r;
        r.id = ids[qi];
        r.predicted = majority_vote(votes, probs);
        size_t n = probs[0].probs.size();
        r.dist.probs.assign(n, 0.0);
        for (const auto& p : probs) {
            for (size_t i = 0; i < n; ++i) r.dist.probs[i] += p.probs[i] / probs.size();
        }
        r.correct = r.predicted == answers[qi];
        if (r.correct) ++correct;
        report.per_question.push_back(std::move(r));
    }
    report.accuracy = ids.empty() ? 0.0 : static_cast<double>(correct) / ids.size();
    return report;
}

struct PrefixSelection {
    int roster_size = 0;
    EvalReport report;
    std::vector<double> prefix_accuracies;  // accuracy of ensembling models[0..k)
};

// Models must arrive ranked descending by individual dev accuracy. Evaluates
// every prefix M_1..M_k and returns the k maximizing ensemble dev accuracy
// (smallest k on ties).
inline PrefixSelection greedy_prefix_select(const std::vector<ModelPredictions>& ranked,
                                            const std::vector<std::string>& ids,
                                            const std::vector<int>& answers) {
    if (ranked.empty()) throw std::invalid_argument("greedy_prefix_select: empty model list");
    PrefixSelection sel;
    std::vector<const ModelPredictions*> prefix;
    std::vector<EvalReport> reports;
    for (const auto& m : ranked) {
        prefix.push_back(&m);
        reports.push_back(ensemble_evaluate(prefix, ids, answers));
        sel.prefix_accuracies.push_back(reports.back().accuracy);
    }
    size_t best_k = 0;
    for (size_t k = 1; k < reports.size(); ++k) {
        if (reports[k].accuracy > reports[best_k].accuracy) best_k = k;
    }
    sel.roster_size = static_cast<int>(best_k + 1);
    sel.report = std::move(reports[best_k]);
    return sel;
}

// Prediction file: one JSON line per question with "id", "probs", "pred".
inline void save_predictions(const std::string& path, const std::vector<std::string>& ids,
                             const std::vector<ChoiceDistribution>& probs,
                             const std::vector<int>& preds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write predictions file: " + path);
    for (size_t i = 0; i < ids.size(); ++i) {
        json j;
        j["id"] = ids[i];
        j["probs"] = probs[i].probs;
        j["pred"] = preds[i];
        out << j.dump() << "\n";
    }
}

// Loads predictions and aligns them to the given question order.
inline ModelPredictions load_predictions(const std::string& path,
                                         const std::vector<std::string>& ids) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open predictions file: " + path);
    std::map<std::string, std::pair<std::vector<double>, int>> by_id;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            by_id[j.at("id").get<std::string>()] = {j.at("probs").get<std::vector<double>>(),
                                                    j.at("pred").get<int>()};
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    ModelPredictions m;
    m.name = path;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error(path + ": missing prediction for question " + id);
        }
        m.probs.push_back(ChoiceDistribution{it->second.first});
        m.preds.push_back(it->second.second);
    }
    return m;
}

}  // namespace kear
