#pragma once
// Synthetic benchmark generator. Questions are unanswerable from their own
// text: the fact tying a question to its correct choice lives exclusively in
// the knowledge graph, the dictionary, or near-duplicate training questions.
// Generation is fully deterministic per seed.
//
// kg-dict mode: every entity (question key, answer, distractors) is fresh per
// question; the planted fact is either a KG triple (key -> answer) or a
// dictionary definition of the answer naming the key. Entity names are kept
// far from every dictionary term in edit distance so fuzzy lookup cannot
// cross-match.
//
// train-dup mode: questions come in groups of near-duplicates sharing three
// rare signature words and one answer drawn from a small pool; the knowledge
// graph and dictionary are empty, so only training-data retrieval can reveal
// the answer. Group size exceeds the retrieval depth M = 10, which keeps the
// retrieved list inside the group.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "kear/common.hpp"
#include "kear/corpus.hpp"
#include "kear/dict_retriever.hpp"
#include "kear/kg_retriever.hpp"
#include "kear/text.hpp"

namespace kear {

enum class SynthMode { kKgDict, kTrainDup };

inline SynthMode parse_synth_mode(const std::string& name) {
    if (name == "kg-dict") return SynthMode::kKgDict;
    if (name == "train-dup") return SynthMode::kTrainDup;
    throw std::invalid_argument("unknown synth mode: " + name);
}

struct SynthConfig {
    SynthMode mode = SynthMode::kKgDict;
    uint64_t seed = 0;
    int num_train = 2000;
    int num_dev = 500;
    int vocab_size = 200;  // filler pool (kg-dict) / answer pool (train-dup)
    int num_choices = 4;
};

struct SynthData {
    std::vector<QuestionRecord> train;
    std::vector<QuestionRecord> dev;
    KnowledgeGraph kg;
    Dictionary dict;
};

namespace synth_detail {

inline std::string random_word(Rng& rng, int len) {
    std::string w;
    for (int i = 0; i < len; ++i) {
        w.push_back(static_cast<char>('a' + rng.index(26)));
    }
    return w;
}

inline constexpr int kEntityLen = 10;
// threshold the dictionary matcher applies to length-10 queries
inline constexpr size_t kFuzzyBound = 4;  // ceil(0.4 * 10)

inline std::string fresh_entity(Rng& rng, std::set<std::string>& used,
                                const std::vector<std::string>& dict_terms) {
    while (true) {
        std::string e = random_word(rng, kEntityLen);
        if (!used.insert(e).second) continue;
        bool clashes = false;
        for (const auto& t : dict_terms) {
            if (levenshtein_bounded(e, t, kFuzzyBound) <= kFuzzyBound) {
                clashes = true;
                break;
            }
        }
        if (clashes) {
            used.erase(e);
            continue;
        }
        return e;
    }
}

}  // namespace synth_detail

inline SynthData generate_synthetic(const SynthConfig& cfg) {
    if (cfg.num_train < 1 || cfg.num_dev < 1 || cfg.vocab_size < 8 || cfg.num_choices < 2) {
        throw std::invalid_argument("synth: sizes must be >= 1 (vocab_size >= 8, choices >= 2)");
    }
    SynthData data;
    if (cfg.mode == SynthMode::kKgDict) {
        Rng rng(cfg.seed);
        using synth_detail::fresh_entity;

        std::vector<std::string> fillers;
        std::set<std::string> filler_set;
        while (static_cast<int>(fillers.size()) < cfg.vocab_size) {
            std::string w = synth_detail::random_word(rng, 5 + static_cast<int>(rng.index(3)));
            if (filler_set.insert(w).second) fillers.push_back(w);
        }

        int total = cfg.num_train + cfg.num_dev;
        std::vector<bool> is_dict_fact(static_cast<size_t>(total));
        for (int i = 0; i < total; ++i) is_dict_fact[static_cast<size_t>(i)] = rng.uniform() < 0.5;

        // dictionary terms first, so every later entity can be kept outside
        // fuzzy-match range of all of them
        std::set<std::string> used;
        std::vector<std::string> dict_terms;
        for (int i = 0; i < total; ++i) {
            if (is_dict_fact[static_cast<size_t>(i)]) {
                dict_terms.push_back(fresh_entity(rng, used, dict_terms));
            }
        }

        std::vector<TripleRecord> triples;
        std::map<std::string, std::vector<std::string>> dict_entries;
        const std::vector<std::string> relations = {"linksto", "goeswith", "pairedwith"};

        size_t dict_cursor = 0;
        for (int i = 0; i < total; ++i) {
            bool dev = i >= cfg.num_train;
            QuestionRecord rec;
            rec.id = (dev ? "synth-dev-" : "synth-train-") +
                     std::to_string(dev ? i - cfg.num_train : i);
            std::string key = fresh_entity(rng, used, dict_terms);
            std::string answer;
            if (is_dict_fact[static_cast<size_t>(i)]) {
                answer = dict_terms[dict_cursor++];
                dict_entries[answer].push_back("goes with " + key);
                if (rng.uniform() < 0.3) dict_entries[answer].push_back("a synthetic entity");
            } else {
                answer = fresh_entity(rng, used, dict_terms);
                triples.push_back({key, relations[rng.index(relations.size())], answer,
                                   rng.uniform(0.5, 2.0)});
            }
            std::vector<std::string> choices;
            choices.push_back(answer);
            for (int c = 1; c < cfg.num_choices; ++c) {
                choices.push_back(fresh_entity(rng, used, dict_terms));
            }
            rng.shuffle(choices);
            for (size_t c = 0; c < choices.size(); ++c) {
                if (choices[c] == answer) rec.answer_index = static_cast<int>(c);
            }
            rec.choices = std::move(choices);
            rec.question_concept = key;
            rec.question_text = "which of these goes with " + key + " " +
                                fillers[rng.index(fillers.size())] + " " +
                                fillers[rng.index(fillers.size())];
            (dev ? data.dev : data.train).push_back(std::move(rec));
        }
        data.kg = make_kg(std::move(triples));
        for (auto& [term, defs] : dict_entries) {
            data.dict.entries.emplace(term, std::move(defs));
            data.dict.term_list.push_back(term);
        }
        return data;
    }

    // train-dup mode
    Rng rng(cfg.seed);
    const int group_size = 12;  // must exceed the retrieval depth M = 10
    int num_groups = cfg.num_train / group_size;
    if (num_groups < 2) throw std::invalid_argument("synth train-dup: num_train too small");

    std::set<std::string> used;
    std::vector<std::string> answer_pool;
    int pool_size = std::max(8, std::min(64, cfg.vocab_size));
    for (int i = 0; i < pool_size; ++i) {
        while (true) {
            std::string e = synth_detail::random_word(rng, synth_detail::kEntityLen);
            if (used.insert(e).second) {
                answer_pool.push_back(e);
                break;
            }
        }
    }

    struct Group {
        std::vector<std::string> sig;  // three rare signature words
        std::string answer;
    };
    std::vector<Group> groups;
    for (int g = 0; g < num_groups; ++g) {
        Group grp;
        for (int s = 0; s < 3; ++s) {
            while (true) {
                std::string w = synth_detail::random_word(rng, synth_detail::kEntityLen);
                if (used.insert(w).second) {
                    grp.sig.push_back(w);
                    break;
                }
            }
        }
        grp.answer = answer_pool[rng.index(answer_pool.size())];
        groups.push_back(std::move(grp));
    }

    const std::vector<std::string> templates = {"which one fits", "pick the match",
                                                "what goes here", "choose the right one"};
    auto make_question = [&](const Group& grp, const std::string& id) {
        QuestionRecord rec;
        rec.id = id;
        rec.question_text = grp.sig[0] + " " + grp.sig[1] + " " + grp.sig[2] + " " +
                            templates[rng.index(templates.size())];
        std::vector<std::string> choices;
        choices.push_back(grp.answer);
        while (static_cast<int>(choices.size()) < cfg.num_choices) {
            const std::string& d = answer_pool[rng.index(answer_pool.size())];
            if (d == grp.answer) continue;
            if (std::find(choices.begin(), choices.end(), d) != choices.end()) continue;
            choices.push_back(d);
        }
        rng.shuffle(choices);
        for (size_t c = 0; c < choices.size(); ++c) {
            if (choices[c] == grp.answer) rec.answer_index = static_cast<int>(c);
        }
        rec.choices = std::move(choices);
        return rec;
    };

    for (int g = 0; g < num_groups; ++g) {
        for (int s = 0; s < group_size; ++s) {
            data.train.push_back(make_question(
                groups[static_cast<size_t>(g)],
                "synth-train-" + std::to_string(g * group_size + s)));
        }
    }
    for (int i = 0; i < cfg.num_dev; ++i) {
        data.dev.push_back(make_question(groups[static_cast<size_t>(i % num_groups)],
                                         "synth-dev-" + std::to_string(i)));
    }
    return data;
}

inline void write_synthetic(const std::string& dir, const SynthData& data) {
    std::filesystem::create_directories(dir);
    save_questions(dir + "/train.jsonl", data.train);
    save_questions(dir + "/dev.jsonl", data.dev);
    save_kg(dir + "/kg.tsv", data.kg);
    save_dictionary(dir + "/dict.tsv", data.dict);
}

// Rule-based reference solver: a choice is the answer exactly when the KG has
// a direct edge from the question concept to it, or its first definition names
// the question concept. Falls back to choice 0 when the sources are withheld.
inline int oracle_answer(const QuestionRecord& rec, const KnowledgeGraph* kg,
                         const Dictionary* dict) {
    std::string key = rec.question_concept ? *rec.question_concept : std::string();
    for (size_t i = 0; i < rec.choices.size(); ++i) {
        std::string c = normalize_text(rec.choices[i]);
        if (kg && !key.empty() && direct_edge(*kg, key, c)) return static_cast<int>(i);
        if (dict && !key.empty()) {
            if (auto def = first_definition(*dict, c)) {
                if (def->find(key) != std::string::npos) return static_cast<int>(i);
            }
        }
    }
    return 0;
}

}  // namespace kear
