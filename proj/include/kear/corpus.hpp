#pragma once
// Data model and ingestion: questions, knowledge-graph triples, dictionary
// entries. Loaders are pure functions of their input files; everything they
// return is immutable afterwards and safe for concurrent readers.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kear/common.hpp"
#include "kear/text.hpp"

namespace kear {

using json = nlohmann::json;

struct QuestionRecord {
    std::string id;
    std::string question_text;
    std::vector<std::string> choices;
    std::optional<std::string> question_concept;               // normalized
    std::optional<std::vector<std::string>> choice_concepts;   // normalized
    std::optional<int> answer_index;
};

struct TripleRecord {
    std::string head;      // normalized concept
    std::string relation;  // verbatim relation name
    std::string tail;      // normalized concept
    double weight = 0.0;   // confidence, > 0
};

struct KnowledgeGraph {
    std::vector<TripleRecord> triples;
    // concept -> indices of triples whose head equals that concept, in input order
    std::map<std::string, std::vector<size_t>> out_adjacency;
    std::set<std::string> concept_vocabulary;  // all heads and tails

    const std::vector<size_t>& outgoing(const std::string& node) const {
        static const std::vector<size_t> kEmpty;
        auto it = out_adjacency.find(node);
        return it == out_adjacency.end() ? kEmpty : it->second;
    }
};

struct Dictionary {
    // normalized term -> definitions ordered by sense index (first = most frequent)
    std::map<std::string, std::vector<std::string>> entries;
    std::vector<std::string> term_list;  // sorted; exactly the keys of entries
};

enum class QuestionFormat { kCsqaJsonl, kGenericJsonl };

inline QuestionFormat parse_question_format(const std::string& name) {
    if (name == "csqa-jsonl") return QuestionFormat::kCsqaJsonl;
    if (name == "generic-jsonl") return QuestionFormat::kGenericJsonl;
    throw std::invalid_argument("unknown question format: " + name);
}

inline void validate_question(const QuestionRecord& rec) {
    if (rec.choices.size() < 2) {
        throw std::runtime_error("question " + rec.id + ": needs at least 2 choices");
    }
    std::set<std::string> seen;
    for (const auto& c : rec.choices) {
        std::string norm = normalize_text(c);
        if (norm.empty()) {
            throw std::runtime_error("question " + rec.id + ": empty choice after normalization");
        }
        if (!seen.insert(norm).second) {
            throw std::runtime_error("question " + rec.id + ": duplicate choice '" + norm + "'");
        }
    }
    if (rec.answer_index &&
        (*rec.answer_index < 0 || *rec.answer_index >= static_cast<int>(rec.choices.size()))) {
        throw std::runtime_error("question " + rec.id + ": answer index out of range");
    }
    if (rec.choice_concepts && rec.choice_concepts->size() != rec.choices.size()) {
        throw std::runtime_error("question " + rec.id + ": choice_concepts count mismatch");
    }
}

namespace detail {

inline std::runtime_error line_error(const std::string& path, size_t line_no, const std::string& what) {
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

inline QuestionRecord parse_csqa_line(const json& j) {
    QuestionRecord rec;
    rec.id = j.at("id").get<std::string>();
    const json& q = j.at("question");
    rec.question_text = q.at("stem").get<std::string>();
    if (q.contains("question_concept")) {
        rec.question_concept = normalize_text(q.at("question_concept").get<std::string>());
    }
    std::vector<std::string> labels;
    for (const json& choice : q.at("choices")) {
        labels.push_back(choice.at("label").get<std::string>());
        rec.choices.push_back(choice.at("text").get<std::string>());
    }
    if (j.contains("answerKey")) {
        std::string key = j.at("answerKey").get<std::string>();
        auto it = std::find(labels.begin(), labels.end(), key);
        if (it == labels.end()) {
            throw std::runtime_error("answer label '" + key + "' not among choice labels");
        }
        rec.answer_index = static_cast<int>(it - labels.begin());
    }
    return rec;
}

inline QuestionRecord parse_generic_line(const json& j) {
    QuestionRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.question_text = j.at("question").get<std::string>();
    for (const json& choice : j.at("choices")) {
        rec.choices.push_back(choice.get<std::string>());
    }
    if (j.contains("answer")) rec.answer_index = j.at("answer").get<int>();
    if (j.contains("question_concept")) {
        rec.question_concept = normalize_text(j.at("question_concept").get<std::string>());
    }
    if (j.contains("choice_concepts")) {
        std::vector<std::string> concepts;
        for (const json& c : j.at("choice_concepts")) {
            concepts.push_back(normalize_text(c.get<std::string>()));
        }
        rec.choice_concepts = std::move(concepts);
    }
    return rec;
}

}  // namespace detail

inline std::vector<QuestionRecord> load_questions(const std::string& path, QuestionFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open questions file: " + path);
    std::vector<QuestionRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            QuestionRecord rec = format == QuestionFormat::kCsqaJsonl
                                     ? detail::parse_csqa_line(j)
                                     : detail::parse_generic_line(j);
            validate_question(rec);
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw detail::line_error(path, line_no, e.what());
        }
    }
    return records;
}

// Sniff csqa-jsonl ("question" is an object) vs generic-jsonl.
inline QuestionFormat detect_question_format(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open questions file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        return j.contains("question") && j.at("question").is_object()
                   ? QuestionFormat::kCsqaJsonl
                   : QuestionFormat::kGenericJsonl;
    }
    return QuestionFormat::kGenericJsonl;
}

inline void save_questions(const std::string& path, const std::vector<QuestionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write questions file: " + path);
    for (const auto& rec : records) {
        json j;
        j["id"] = rec.id;
        j["question"] = rec.question_text;
        j["choices"] = rec.choices;
        if (rec.answer_index) j["answer"] = *rec.answer_index;
        if (rec.question_concept) j["question_concept"] = *rec.question_concept;
        if (rec.choice_concepts) j["choice_concepts"] = *rec.choice_concepts;
        out << j.dump() << "\n";
    }
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(start));
            break;
        }
        cols.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return cols;
}

inline double parse_positive_weight(const std::string& s) {
    size_t used = 0;
    double w;
    try {
        w = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric weight '" + s + "'");
    }
    if (used != s.size()) throw std::runtime_error("non-numeric weight '" + s + "'");
    if (!(w > 0.0)) throw std::runtime_error("non-positive weight '" + s + "'");
    return w;
}

}  // namespace detail

// TSV: head<TAB>relation<TAB>tail<TAB>weight. Duplicate rows are kept; they
// are distinct triples with their own weights.
inline KnowledgeGraph load_kg(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kg file: " + path);
    KnowledgeGraph g;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cols = detail::split_tabs(line);
        if (cols.size() != 4) {
            throw detail::line_error(path, line_no,
                                     "expected 4 columns, got " + std::to_string(cols.size()));
        }
        TripleRecord t;
        t.head = normalize_text(cols[0]);
        t.tail = normalize_text(cols[2]);
        t.relation = squeeze_spaces(cols[1]);
        try {
            t.weight = detail::parse_positive_weight(cols[3]);
        } catch (const std::exception& e) {
            throw detail::line_error(path, line_no, e.what());
        }
        if (t.head.empty() || t.tail.empty() || normalize_text(t.relation).empty()) {
            throw detail::line_error(path, line_no, "empty concept or relation after normalization");
        }
        size_t idx = g.triples.size();
        g.out_adjacency[t.head].push_back(idx);
        g.concept_vocabulary.insert(t.head);
        g.concept_vocabulary.insert(t.tail);
        g.triples.push_back(std::move(t));
    }
    return g;
}

inline KnowledgeGraph make_kg(std::vector<TripleRecord> triples) {
    KnowledgeGraph g;
    g.triples = std::move(triples);
    for (size_t i = 0; i < g.triples.size(); ++i) {
        const auto& t = g.triples[i];
        g.out_adjacency[t.head].push_back(i);
        g.concept_vocabulary.insert(t.head);
        g.concept_vocabulary.insert(t.tail);
    }
    return g;
}

inline void save_kg(const std::string& path, const KnowledgeGraph& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write kg file: " + path);
    for (const auto& t : g.triples) {
        out << t.head << '\t' << t.relation << '\t' << t.tail << '\t'
            << format_double(t.weight) << "\n";
    }
}

// TSV: term<TAB>sense_index<TAB>definition (definition may contain tabs).
inline Dictionary load_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dictionary file: " + path);
    std::map<std::string, std::map<long, std::string>> staged;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t tab1 = line.find('\t');
        size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw detail::line_error(path, line_no, "expected term<TAB>sense<TAB>definition");
        }
        std::string term = normalize_text(line.substr(0, tab1));
        std::string sense_str = line.substr(tab1 + 1, tab2 - tab1 - 1);
        std::string definition = line.substr(tab2 + 1);
        long sense;
        size_t used = 0;
        try {
            sense = std::stol(sense_str, &used);
        } catch (const std::exception&) {
            throw detail::line_error(path, line_no, "non-integer sense_index '" + sense_str + "'");
        }
        if (used != sense_str.size()) {
            throw detail::line_error(path, line_no, "non-integer sense_index '" + sense_str + "'");
        }
        if (term.empty()) throw detail::line_error(path, line_no, "empty term");
        auto [it, inserted] = staged[term].emplace(sense, definition);
        (void)it;
        if (!inserted) {
            throw detail::line_error(path, line_no, "duplicate sense " + sense_str +
                                                        " for term '" + term + "'");
        }
    }
    Dictionary d;
    for (auto& [term, senses] : staged) {
        std::vector<std::string> defs;
        defs.reserve(senses.size());
        for (auto& [idx, def] : senses) defs.push_back(std::move(def));
        d.entries.emplace(term, std::move(defs));
        d.term_list.push_back(term);
    }
    return d;
}

inline void save_dictionary(const std::string& path, const Dictionary& d) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dictionary file: " + path);
    for (const auto& [term, defs] : d.entries) {
        for (size_t i = 0; i < defs.size(); ++i) {
            out << term << '\t' << i << '\t' << defs[i] << "\n";
        }
    }
}

}  // namespace kear
