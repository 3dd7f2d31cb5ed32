#pragma once
// Fuses question, choice and the three knowledge texts into the model-ready
// token sequence with segment and position ids.
//
// Layout: [CLS] q c [SEP] kg [SEP] dict [SEP] train [SEP]
// Segment id is 0 through the first [SEP] inclusive and 1 afterwards; position
// ids run from 1 to the total length. Empty knowledge fields omit their tokens
// and separator. When the sequence exceeds max_len, tokens are removed from
// the end of the knowledge region only (train tail first, then dict, then kg);
// the question/choice region is never truncated.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kear/corpus.hpp"
#include "kear/text.hpp"

namespace kear {

struct KnowledgeBundle {
    std::string kg_text;
    std::string dict_text;
    std::string train_text;
};

struct AugmentedInput {
    std::vector<int> token_ids;
    std::vector<int> segment_ids;   // 0 = question/choice region, 1 = knowledge
    std::vector<int> position_ids;  // 1..l
    int question_span_end = 0;      // first index carrying segment id 1 (== l if none)
};

struct Tokenizer {
    std::map<std::string, int> vocab;  // word -> id, ids start after the specials
    int pad_id = 0;
    int unk_id = 1;
    int cls_id = 2;
    int sep_id = 3;

    int vocab_size() const { return 4 + static_cast<int>(vocab.size()); }

    // Word-level split (lowercase, non-alphanumeric boundaries) with [SEP]
    // placeholders preserved as separator tokens.
    static std::vector<std::string> split_with_placeholders(std::string_view text) {
        std::vector<std::string> out;
        size_t pos = 0;
        while (pos < text.size()) {
            size_t hit = text.find(kSepPlaceholder, pos);
            size_t end = hit == std::string_view::npos ? text.size() : hit;
            for (auto& w : tokenize_for_retrieval(text.substr(pos, end - pos))) {
                out.push_back(std::move(w));
            }
            if (hit == std::string_view::npos) break;
            out.emplace_back(kSepPlaceholder);
            pos = hit + kSepPlaceholder.size();
        }
        return out;
    }

    int token_id(const std::string& word) const {
        if (word == kSepPlaceholder) return sep_id;
        auto it = vocab.find(word);
        return it == vocab.end() ? unk_id : it->second;
    }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (const auto& w : split_with_placeholders(text)) ids.push_back(token_id(w));
        return ids;
    }
};

// Deterministic id assignment: descending count, then lexicographic.
inline Tokenizer build_vocab(const std::vector<std::string>& corpus, int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
    std::map<std::string, long> counts;
    long total = 0;
    for (const auto& text : corpus) {
        for (const auto& w : Tokenizer::split_with_placeholders(text)) {
            if (w == kSepPlaceholder) continue;
            ++counts[w];
            ++total;
        }
    }
    if (total == 0) throw std::runtime_error("build_vocab: empty corpus");
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Tokenizer tok;
    int next_id = 4;
    for (const auto& [word, count] : ranked) {
        if (count < min_count) continue;
        tok.vocab.emplace(word, next_id++);
    }
    return tok;
}

inline AugmentedInput assemble(const std::string& q, const std::string& c,
                               const KnowledgeBundle& k, const Tokenizer& tok, int max_len) {
    if (max_len < 8) throw std::invalid_argument("assemble: max_len must be >= 8");

    std::vector<int> qa;
    qa.push_back(tok.cls_id);
    for (int id : tok.encode(q)) qa.push_back(id);
    for (int id : tok.encode(c)) qa.push_back(id);
    qa.push_back(tok.sep_id);
    if (static_cast<int>(qa.size()) > max_len) {
        throw std::runtime_error("assemble: question/choice region alone exceeds max_len");
    }

    // kg, dict, train in layout order; truncation pops from the back section first
    std::vector<std::vector<int>> sections = {tok.encode(k.kg_text), tok.encode(k.dict_text),
                                              tok.encode(k.train_text)};
    auto total_len = [&] {
        size_t n = qa.size();
        for (const auto& s : sections) {
            if (!s.empty()) n += s.size() + 1;  // content plus trailing separator
        }
        return n;
    };
    while (total_len() > static_cast<size_t>(max_len)) {
        for (int s = 2; s >= 0; --s) {
            if (!sections[s].empty()) {
                sections[s].pop_back();
                break;
            }
        }
    }

    AugmentedInput out;
    out.token_ids = qa;
    out.question_span_end = static_cast<int>(qa.size());
    for (const auto& s : sections) {
        if (s.empty()) continue;
        out.token_ids.insert(out.token_ids.end(), s.begin(), s.end());
        out.token_ids.push_back(tok.sep_id);
    }
    int l = static_cast<int>(out.token_ids.size());
    out.segment_ids.assign(l, 1);
    std::fill(out.segment_ids.begin(), out.segment_ids.begin() + out.question_span_end, 0);
    out.position_ids.resize(l);
    for (int i = 0; i < l; ++i) out.position_ids[i] = i + 1;
    return out;
}

// One AugmentedInput per choice, each with that choice's own bundle.
inline std::vector<AugmentedInput> encode_question(const QuestionRecord& rec,
                                                   const std::vector<KnowledgeBundle>& bundles,
                                                   const Tokenizer& tok, int max_len) {
    if (bundles.size() != rec.choices.size()) {
        throw std::invalid_argument("encode_question: bundle count mismatch for question " +
                                    rec.id);
    }
    std::vector<AugmentedInput> inputs;
    inputs.reserve(rec.choices.size());
    for (size_t i = 0; i < rec.choices.size(); ++i) {
        inputs.push_back(assemble(rec.question_text, rec.choices[i], bundles[i], tok, max_len));
    }
    return inputs;
}

}  // namespace kear
