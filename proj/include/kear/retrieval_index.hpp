#pragma once
// Okapi BM25 inverted index over augmented training documents, with the
// self-filtering top-M query used for training-data knowledge.
//
// Variant: +1 smoothed idf (never negative), distinct-term sum, k1 = 1.2 and
// b = 0.75 defaults. Rankings tie-break by ascending document index.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kear/common.hpp"
#include "kear/text.hpp"

namespace kear {

using json = nlohmann::json;

inline constexpr double kDefaultBm25K1 = 1.2;
inline constexpr double kDefaultBm25B = 0.75;
inline constexpr int kIndexFormatVersion = 1;

struct IndexedDocument {
    std::string doc_id;          // source question id, unique within an index
    std::string source_dataset;
    std::string text;            // indexed concatenation [q; c*; K_KG; K_dict]
    std::string stored_question; // q, used verbatim when rendering K_train
    std::string stored_answer;   // gold choice text c*
};

// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)
inline double bm25_idf(size_t doc_count, size_t df) {
    double n = static_cast<double>(doc_count);
    double d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

// idf * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)); 0 when the corpus has no tokens.
inline double bm25_term_score(double tf, size_t df, double dl, double avgdl, size_t doc_count,
                              double k1, double b) {
    if (tf <= 0.0 || avgdl <= 0.0) return 0.0;
    double denom = tf + k1 * (1.0 - b + b * dl / avgdl);
    return bm25_idf(doc_count, df) * tf * (k1 + 1.0) / denom;
}

class InvertedIndex {
  public:
    struct Posting {
        size_t doc;
        double tf;
    };

    InvertedIndex() = default;

    const std::vector<IndexedDocument>& documents() const { return docs_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::vector<double>& doc_lengths() const { return doc_lengths_; }
    double average_doc_length() const { return avgdl_; }
    size_t doc_count() const { return docs_.size(); }
    double k1() const { return k1_; }
    double b() const { return b_; }

    // Repeated query terms are counted once.
    double score(const std::vector<std::string>& query_terms, size_t doc) const {
        if (doc >= docs_.size()) {
            throw std::invalid_argument("bm25_score: invalid doc index " + std::to_string(doc));
        }
        std::set<std::string> distinct(query_terms.begin(), query_terms.end());
        double total = 0.0;
        for (const auto& term : distinct) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            for (const auto& p : it->second) {
                if (p.doc == doc) {
                    total += bm25_term_score(p.tf, it->second.size(), doc_lengths_[doc], avgdl_,
                                             docs_.size(), k1_, b_);
                    break;
                }
            }
        }
        return total;
    }

    // Documents sorted by descending score, ties by ascending index; the
    // excluded id is removed before truncation and zero scorers are dropped.
    std::vector<size_t> top_m(const std::string& query, size_t m,
                              const std::optional<std::string>& exclude_id = std::nullopt) const {
        std::vector<double> scores(docs_.size(), 0.0);
        auto terms = tokenize_for_retrieval(query);
        std::set<std::string> distinct(terms.begin(), terms.end());
        for (const auto& term : distinct) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            size_t df = it->second.size();
            for (const auto& p : it->second) {
                scores[p.doc] +=
                    bm25_term_score(p.tf, df, doc_lengths_[p.doc], avgdl_, docs_.size(), k1_, b_);
            }
        }
        std::vector<size_t> candidates;
        for (size_t i = 0; i < docs_.size(); ++i) {
            if (scores[i] <= 0.0) continue;
            if (exclude_id && docs_[i].doc_id == *exclude_id) continue;
            candidates.push_back(i);
        }
        std::sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b2) {
            if (scores[a] != scores[b2]) return scores[a] > scores[b2];
            return a < b2;
        });
        if (candidates.size() > m) candidates.resize(m);
        return candidates;
    }

    void save(const std::string& path) const {
        json j;
        j["format_version"] = kIndexFormatVersion;
        j["k1"] = k1_;
        j["b"] = b_;
        j["avgdl"] = avgdl_;
        j["doc_lengths"] = doc_lengths_;
        json docs = json::array();
        for (const auto& d : docs_) {
            docs.push_back({{"doc_id", d.doc_id},
                            {"source", d.source_dataset},
                            {"text", d.text},
                            {"question", d.stored_question},
                            {"answer", d.stored_answer}});
        }
        j["documents"] = std::move(docs);
        json postings;
        for (const auto& [term, list] : postings_) {
            json entries = json::array();
            for (const auto& p : list) entries.push_back({p.doc, p.tf});
            postings[term] = std::move(entries);
        }
        j["postings"] = std::move(postings);
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write index file: " + path);
        out << j.dump() << "\n";
    }

    static InvertedIndex load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open index file: " + path);
        json j = json::parse(in);
        if (!j.contains("format_version") || j["format_version"].get<int>() != kIndexFormatVersion) {
            throw std::runtime_error("unsupported index format version in " + path);
        }
        InvertedIndex ix;
        ix.k1_ = j.at("k1").get<double>();
        ix.b_ = j.at("b").get<double>();
        ix.avgdl_ = j.at("avgdl").get<double>();
        ix.doc_lengths_ = j.at("doc_lengths").get<std::vector<double>>();
        for (const json& d : j.at("documents")) {
            ix.docs_.push_back({d.at("doc_id").get<std::string>(),
                                d.at("source").get<std::string>(),
                                d.at("text").get<std::string>(),
                                d.at("question").get<std::string>(),
                                d.at("answer").get<std::string>()});
        }
        for (const auto& [term, entries] : j.at("postings").items()) {
            std::vector<Posting> list;
            for (const json& e : entries) {
                list.push_back({e.at(0).get<size_t>(), e.at(1).get<double>()});
            }
            ix.postings_.emplace(term, std::move(list));
        }
        return ix;
    }

    friend InvertedIndex build_index(std::vector<IndexedDocument> docs, double k1, double b);

  private:
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<double> doc_lengths_;
    double avgdl_ = 0.0;
    double k1_ = kDefaultBm25K1;
    double b_ = kDefaultBm25B;
    std::vector<IndexedDocument> docs_;
};

inline InvertedIndex build_index(std::vector<IndexedDocument> docs, double k1 = kDefaultBm25K1,
                                 double b = kDefaultBm25B) {
    InvertedIndex ix;
    ix.k1_ = k1;
    ix.b_ = b;
    std::set<std::string> ids;
    for (const auto& d : docs) {
        if (!ids.insert(d.doc_id).second) {
            throw std::runtime_error("duplicate doc_id in index: " + d.doc_id);
        }
    }
    double total_len = 0.0;
    for (size_t i = 0; i < docs.size(); ++i) {
        auto terms = tokenize_for_retrieval(docs[i].text);
        ix.doc_lengths_.push_back(static_cast<double>(terms.size()));
        total_len += static_cast<double>(terms.size());
        std::map<std::string, double> tf;
        for (const auto& t : terms) tf[t] += 1.0;
        for (const auto& [term, count] : tf) ix.postings_[term].push_back({i, count});
    }
    ix.avgdl_ = docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size());
    ix.docs_ = std::move(docs);
    return ix;
}

inline double bm25_score(const InvertedIndex& ix, const std::vector<std::string>& query_terms,
                         size_t doc) {
    return ix.score(query_terms, doc);
}

// "q c kg dict" joined with single spaces; [SEP] placeholders are stripped so
// separators never become index tokens.
inline std::string build_query(const std::string& q, const std::string& c,
                               const std::string& kg_text, const std::string& dict_text) {
    std::string joined;
    for (const std::string* part : {&q, &c, &kg_text, &dict_text}) {
        if (part->empty()) continue;
        if (!joined.empty()) joined += ' ';
        joined += strip_sep_placeholders(*part);
    }
    return squeeze_spaces(joined);
}

// "q_1 c_1* [SEP] q_2 c_2* [SEP] ..." from the stored answer pairs only; the
// knowledge part of each retrieved document is dropped.
inline std::string render_train_knowledge(const std::vector<IndexedDocument>& retrieved) {
    std::string out;
    for (const auto& doc : retrieved) {
        if (!out.empty()) out += " " + std::string(kSepPlaceholder) + " ";
        out += doc.stored_question + " " + doc.stored_answer;
    }
    return out;
}

}  // namespace kear
