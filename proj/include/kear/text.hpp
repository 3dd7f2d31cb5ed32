#pragma once
// Text normalization and tokenization rules shared by every retriever.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace kear {

// Placeholder the renderers emit between knowledge segments; the assembler
// resolves it to the separator token, retrieval strips it.
inline constexpr std::string_view kSepPlaceholder = "[SEP]";

// lowercase, underscores to spaces, collapse whitespace, trim. Idempotent.
inline std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (uc == '_' || std::isspace(uc)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

// normalize, then split on any non-alphanumeric character; no stemming,
// no stop-word removal.
inline std::vector<std::string> tokenize_for_retrieval(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<size_t> row(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) row[i] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
        size_t prev_diag = row[0];
        row[0] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            size_t del = row[i] + 1;
            size_t ins = row[i - 1] + 1;
            size_t sub = prev_diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            prev_diag = row[i];
            row[i] = std::min(std::min(del, ins), sub);
        }
    }
    return row[a.size()];
}

// levenshtein with early exit: returns any value > bound when the true
// distance exceeds bound.
inline size_t levenshtein_bounded(std::string_view a, std::string_view b, size_t bound) {
    size_t la = a.size(), lb = b.size();
    size_t diff = la > lb ? la - lb : lb - la;
    if (diff > bound) return bound + 1;
    return levenshtein(a, b);
}

// collapse runs of whitespace to single spaces and trim (no case folding).
inline std::string squeeze_spaces(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending = true;
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(c);
    }
    return out;
}

inline std::string strip_sep_placeholders(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos < text.size()) {
        size_t hit = text.find(kSepPlaceholder, pos);
        if (hit == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, hit - pos));
        out.push_back(' ');
        pos = hit + kSepPlaceholder.size();
    }
    return out;
}

}  // namespace kear
