#pragma once
// Wiring between the retrievers and the model input: knowledge bundle
// construction per (question, choice), indexed-document construction for
// training questions, the augmented JSONL interchange format, and the
// human-readable case-study rendering.

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kear/assembler.hpp"
#include "kear/corpus.hpp"
#include "kear/dict_retriever.hpp"
#include "kear/entity_linker.hpp"
#include "kear/kg_retriever.hpp"
#include "kear/retrieval_index.hpp"
#include "kear/training.hpp"

namespace kear {

struct AugmentOptions {
    size_t top_m = 10;  // retrieved training questions per query
};

// Question/choice concepts for one pair. Records with a gold question concept
// use it directly, and the normalized choice text stands in for a missing
// choice concept. Records without gold concepts fall back to entity linking:
// longest linked entity for definitions, best cross edge for triples.
struct ConceptResolution {
    std::string e_q;
    std::string e_c;
    bool linked = false;              // true when entity linking produced the concepts
    std::set<std::string> linked_q;   // populated only when linked
    std::set<std::string> linked_c;
};

inline ConceptResolution resolve_concepts(const QuestionRecord& rec, size_t choice_idx,
                                          const ConceptMatcher* matcher) {
    ConceptResolution r;
    if (rec.choice_concepts) {
        r.e_c = (*rec.choice_concepts)[choice_idx];
    }
    if (rec.question_concept) {
        r.e_q = *rec.question_concept;
        if (r.e_c.empty()) r.e_c = normalize_text(rec.choices[choice_idx]);
        return r;
    }
    if (!matcher) {
        if (r.e_c.empty()) r.e_c = normalize_text(rec.choices[choice_idx]);
        return r;
    }
    r.linked = true;
    r.linked_q = matcher->find_all(normalize_text(rec.question_text));
    r.linked_c = matcher->find_all(normalize_text(rec.choices[choice_idx]));
    if (auto e = select_longest(r.linked_q)) r.e_q = *e;
    if (r.e_c.empty()) {
        if (auto e = select_longest(r.linked_c)) r.e_c = *e;
    }
    return r;
}

inline std::string kg_text_for(const QuestionRecord& rec, const ConceptResolution& concepts,
                               const KnowledgeGraph& g) {
    (void)rec;
    if (concepts.linked) {
        return render_kg_knowledge(best_edge(g, concepts.linked_q, concepts.linked_c));
    }
    if (concepts.e_q.empty() && concepts.e_c.empty()) return {};
    return render_kg_knowledge(select_triple(g, concepts.e_q, concepts.e_c));
}

inline KnowledgeBundle build_bundle(const QuestionRecord& rec, size_t choice_idx,
                                    const KnowledgeGraph* kg, const Dictionary* dict,
                                    const InvertedIndex* index, const AugmentOptions& opts,
                                    const ConceptMatcher* matcher) {
    ConceptResolution concepts = resolve_concepts(rec, choice_idx, matcher);
    KnowledgeBundle bundle;
    if (kg) bundle.kg_text = kg_text_for(rec, concepts, *kg);
    // raw source text may carry tabs or newlines; bundle fields must not
    if (dict) {
        bundle.dict_text = squeeze_spaces(render_dict_knowledge(concepts.e_q, concepts.e_c, *dict));
    }
    if (index) {
        std::string query = build_query(rec.question_text, rec.choices[choice_idx],
                                        bundle.kg_text, bundle.dict_text);
        // self-filter: a training question never retrieves itself
        auto hits = index->top_m(query, opts.top_m, rec.id);
        std::vector<IndexedDocument> retrieved;
        retrieved.reserve(hits.size());
        for (size_t doc : hits) retrieved.push_back(index->documents()[doc]);
        bundle.train_text = squeeze_spaces(render_train_knowledge(retrieved));
    }
    return bundle;
}

inline std::vector<KnowledgeBundle> build_bundles(const QuestionRecord& rec,
                                                  const KnowledgeGraph* kg,
                                                  const Dictionary* dict,
                                                  const InvertedIndex* index,
                                                  const AugmentOptions& opts,
                                                  const ConceptMatcher* matcher) {
    std::vector<KnowledgeBundle> bundles;
    bundles.reserve(rec.choices.size());
    for (size_t i = 0; i < rec.choices.size(); ++i) {
        bundles.push_back(build_bundle(rec, i, kg, dict, index, opts, matcher));
    }
    return bundles;
}

// Indexed text for a training question: [q; c*; K_KG(q, c*); K_dict(q, c*)].
inline IndexedDocument make_indexed_document(const QuestionRecord& rec,
                                             const std::string& source,
                                             const KnowledgeGraph* kg, const Dictionary* dict,
                                             const ConceptMatcher* matcher) {
    if (!rec.answer_index) {
        throw std::runtime_error("build-index: question " + rec.id + " has no gold answer");
    }
    size_t gold = static_cast<size_t>(*rec.answer_index);
    ConceptResolution concepts = resolve_concepts(rec, gold, matcher);
    std::string kg_text = kg ? kg_text_for(rec, concepts, *kg) : std::string();
    std::string dict_text =
        dict ? render_dict_knowledge(concepts.e_q, concepts.e_c, *dict) : std::string();
    IndexedDocument doc;
    doc.doc_id = rec.id;
    doc.source_dataset = source;
    doc.text = build_query(rec.question_text, rec.choices[gold], kg_text, dict_text);
    doc.stored_question = rec.question_text;
    doc.stored_answer = rec.choices[gold];
    return doc;
}

// ---- augmented JSONL (the augment -> train interchange) --------------------

struct AugmentedRecord {
    std::string id;
    std::string question;
    int n_choices = 0;
    int choice_index = 0;
    std::string choice;
    std::optional<int> answer_index;
    KnowledgeBundle bundle;
};

inline std::vector<AugmentedRecord> augment_question(const QuestionRecord& rec,
                                                     const KnowledgeGraph* kg,
                                                     const Dictionary* dict,
                                                     const InvertedIndex* index,
                                                     const AugmentOptions& opts,
                                                     const ConceptMatcher* matcher) {
    std::vector<AugmentedRecord> out;
    auto bundles = build_bundles(rec, kg, dict, index, opts, matcher);
    for (size_t i = 0; i < rec.choices.size(); ++i) {
        AugmentedRecord r;
        r.id = rec.id;
        r.question = rec.question_text;
        r.n_choices = static_cast<int>(rec.choices.size());
        r.choice_index = static_cast<int>(i);
        r.choice = rec.choices[i];
        r.answer_index = rec.answer_index;
        r.bundle = bundles[i];
        out.push_back(std::move(r));
    }
    return out;
}

inline void save_augmented(const std::string& path, const std::vector<AugmentedRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write augmented file: " + path);
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["question"] = r.question;
        j["n_choices"] = r.n_choices;
        j["choice_index"] = r.choice_index;
        j["choice"] = r.choice;
        if (r.answer_index) j["answer"] = *r.answer_index;
        j["kg"] = r.bundle.kg_text;
        j["dict"] = r.bundle.dict_text;
        j["train"] = r.bundle.train_text;
        out << j.dump() << "\n";
    }
}

inline std::vector<AugmentedRecord> load_augmented(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open augmented file: " + path);
    std::vector<AugmentedRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            AugmentedRecord r;
            r.id = j.at("id").get<std::string>();
            r.question = j.at("question").get<std::string>();
            r.n_choices = j.at("n_choices").get<int>();
            r.choice_index = j.at("choice_index").get<int>();
            r.choice = j.at("choice").get<std::string>();
            if (j.contains("answer")) r.answer_index = j.at("answer").get<int>();
            r.bundle.kg_text = j.at("kg").get<std::string>();
            r.bundle.dict_text = j.at("dict").get<std::string>();
            r.bundle.train_text = j.at("train").get<std::string>();
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

// Grouped view of the augmented rows of one question, in first-seen order.
struct AugmentedQuestion {
    std::string id;
    std::string question;
    std::vector<std::string> choices;
    std::vector<KnowledgeBundle> bundles;
    std::optional<int> answer_index;
};

inline std::vector<AugmentedQuestion> group_augmented(const std::vector<AugmentedRecord>& records) {
    std::vector<AugmentedQuestion> out;
    std::map<std::string, size_t> position;
    for (const auto& r : records) {
        auto [it, inserted] = position.emplace(r.id, out.size());
        if (inserted) {
            AugmentedQuestion q;
            q.id = r.id;
            q.question = r.question;
            q.choices.resize(static_cast<size_t>(r.n_choices));
            q.bundles.resize(static_cast<size_t>(r.n_choices));
            q.answer_index = r.answer_index;
            out.push_back(std::move(q));
        }
        AugmentedQuestion& q = out[it->second];
        if (r.choice_index < 0 || r.choice_index >= static_cast<int>(q.choices.size())) {
            throw std::runtime_error("augmented question " + r.id + ": choice index out of range");
        }
        q.choices[static_cast<size_t>(r.choice_index)] = r.choice;
        q.bundles[static_cast<size_t>(r.choice_index)] = r.bundle;
    }
    return out;
}

inline TrainExample to_train_example(const AugmentedQuestion& q, const Tokenizer& tok,
                                     int max_len) {
    TrainExample ex;
    ex.id = q.id;
    ex.answer = q.answer_index;
    for (size_t i = 0; i < q.choices.size(); ++i) {
        ex.inputs.push_back(assemble(q.question, q.choices[i], q.bundles[i], tok, max_len));
    }
    return ex;
}

inline std::vector<TrainExample> to_train_examples(const std::vector<AugmentedQuestion>& qs,
                                                   const Tokenizer& tok, int max_len) {
    std::vector<TrainExample> out;
    out.reserve(qs.size());
    for (const auto& q : qs) out.push_back(to_train_example(q, tok, max_len));
    return out;
}

// Texts the tokenizer vocabulary is built from: each question text once, each
// choice once, each knowledge text once (not once per choice line).
inline std::vector<std::string> vocab_corpus(const std::vector<AugmentedQuestion>& qs) {
    std::vector<std::string> corpus;
    for (const auto& q : qs) {
        corpus.push_back(q.question);
        for (const auto& c : q.choices) corpus.push_back(c);
        for (const auto& b : q.bundles) {
            if (!b.kg_text.empty()) corpus.push_back(b.kg_text);
            if (!b.dict_text.empty()) corpus.push_back(b.dict_text);
            if (!b.train_text.empty()) corpus.push_back(b.train_text);
        }
    }
    return corpus;
}

// ---- case-study rendering ---------------------------------------------------

// Table-style breakdown of one question: choices, per-choice KG rows, and the
// dictionary/training rows of the focus choice (the gold one when known).
inline std::string render_explain(const QuestionRecord& rec,
                                  const std::vector<KnowledgeBundle>& bundles) {
    std::string out;
    out += "Question: " + rec.question_text + "\n";
    out += "Choices:";
    for (size_t i = 0; i < rec.choices.size(); ++i) {
        char label = static_cast<char>('A' + i);
        out += std::string(" ") + label + ") " + rec.choices[i];
        if (rec.answer_index && static_cast<size_t>(*rec.answer_index) == i) out += " *";
        if (i + 1 < rec.choices.size()) out += ",";
    }
    out += "\n";
    bool any_kg = false;
    for (size_t i = 0; i < bundles.size(); ++i) {
        if (bundles[i].kg_text.empty()) continue;
        out += any_kg ? "    " : "KG: ";
        out += bundles[i].kg_text + "\n";
        any_kg = true;
    }
    size_t focus = rec.answer_index ? static_cast<size_t>(*rec.answer_index) : 0;
    const KnowledgeBundle& fb = bundles[focus];
    if (!fb.dict_text.empty()) {
        std::string dict = fb.dict_text;
        const std::string sep = " " + std::string(kSepPlaceholder) + " ";
        size_t pos;
        while ((pos = dict.find(sep)) != std::string::npos) {
            dict.replace(pos, sep.size(), "\n            ");
        }
        out += "Dictionary: " + dict + "\n";
    }
    if (!fb.train_text.empty()) {
        std::string train = fb.train_text;
        const std::string sep = " " + std::string(kSepPlaceholder) + " ";
        size_t pos;
        while ((pos = train.find(sep)) != std::string::npos) {
            train.replace(pos, sep.size(), "\n               ");
        }
        out += "Training Data: " + train + "\n";
    }
    return out;
}

}  // namespace kear
