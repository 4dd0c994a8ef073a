#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfuse {

// Deterministic suffix-rule lemmatizer plus exception list. Rules are applied
// after an exact exception lookup; the longest matching suffix wins, applied
// once (output is a fixed point of the table by construction of the defaults).
struct TextNormConfig {
    std::set<std::string> stopwords;
    std::vector<std::pair<std::string, std::string>> suffix_rules;  // suffix -> replacement
    std::map<std::string, std::string> exceptions;                  // word -> lemma

    static TextNormConfig defaults() {
        TextNormConfig cfg;
        cfg.stopwords = {"a",  "an", "and", "are", "as",  "at",  "be", "but", "by",
                         "for", "if", "in",  "is",  "it",  "of",  "on", "or",  "the",
                         "to",  "was", "were", "with", "this", "that"};
        cfg.suffix_rules = {{"sses", "ss"}, {"ies", "y"}, {"ing", ""}, {"ed", ""}, {"s", ""}};
        cfg.exceptions = {{"ran", "run"},   {"went", "go"},  {"was", "be"},
                          {"were", "be"},   {"better", "good"}, {"men", "man"},
                          {"women", "woman"}, {"children", "child"}, {"feet", "foot"}};
        return cfg;
    }
};

namespace detail {

// Minimal UTF-8 decode; invalid bytes pass through as single code points.
inline std::uint32_t utf8_next(const std::string& s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = b0;
    std::size_t extra = 0;
    if ((b0 & 0xE0) == 0xC0) { cp = b0 & 0x1F; extra = 1; }
    else if ((b0 & 0xF0) == 0xE0) { cp = b0 & 0x0F; extra = 2; }
    else if ((b0 & 0xF8) == 0xF0) { cp = b0 & 0x07; extra = 3; }
    for (std::size_t k = 0; k < extra && i + 1 < s.size(); ++k) {
        const auto b = static_cast<unsigned char>(s[i + 1]);
        if ((b & 0xC0) != 0x80) break;
        cp = (cp << 6) | (b & 0x3F);
        ++i;
    }
    ++i;
    return cp;
}

inline bool is_punct_cp(std::uint32_t cp) {
    if (cp < 0x80)
        return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') ||
               (cp >= '[' && cp <= '`') || (cp >= '{' && cp <= '~');
    // General punctuation, supplemental punctuation, CJK symbols, fullwidth forms.
    return (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
           (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
           cp == 0x00A1 || cp == 0x00BF || cp == 0x00AB || cp == 0x00BB;
}

inline bool is_space_cp(std::uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x00A0;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) out += static_cast<char>(cp);
    else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace detail

inline std::string lemmatize(const std::string& token, const TextNormConfig& cfg) {
    const auto it = cfg.exceptions.find(token);
    if (it != cfg.exceptions.end()) return it->second;
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& rule : cfg.suffix_rules) {
        if (token.size() > rule.first.size() &&
            token.compare(token.size() - rule.first.size(), rule.first.size(), rule.first) == 0) {
            if (!best || rule.first.size() > best->first.size()) best = &rule;
        }
    }
    if (!best) return token;
    return token.substr(0, token.size() - best->first.size()) + best->second;
}

inline std::vector<std::string> normalize_text(const std::string& raw,
                                               const TextNormConfig& cfg) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    auto flush = [&] {
        if (cur.empty()) return;
        if (!cfg.stopwords.count(cur)) {
            const std::string lemma = lemmatize(cur, cfg);
            if (!lemma.empty() && !cfg.stopwords.count(lemma)) tokens.push_back(lemma);
        }
        cur.clear();
    };
    while (i < raw.size()) {
        std::uint32_t cp = detail::utf8_next(raw, i);
        if (detail::is_space_cp(cp)) { flush(); continue; }
        if (detail::is_punct_cp(cp)) continue;
        if (cp >= 'A' && cp <= 'Z') cp += 32;  // ASCII lowercase only
        detail::append_utf8(cur, cp);
    }
    flush();
    return tokens;
}

// Stopword file: one word per line. Rule file: "suffix<TAB>replacement" per
// line; lines prefixed '^' are exact exceptions ("^word<TAB>lemma").
inline TextNormConfig load_norm_config(const std::string& stopword_path,
                                       const std::string& rule_path) {
    TextNormConfig cfg;
    if (!stopword_path.empty()) {
        std::ifstream in(stopword_path);
        if (!in) throw std::runtime_error("cannot open stopword file: " + stopword_path);
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (!line.empty()) cfg.stopwords.insert(line);
        }
    }
    if (!rule_path.empty()) {
        std::ifstream in(rule_path);
        if (!in) throw std::runtime_error("cannot open lemma rule file: " + rule_path);
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error("lemma rule line missing tab: " + line);
            if (line[0] == '^')
                cfg.exceptions[line.substr(1, tab - 1)] = line.substr(tab + 1);
            else
                cfg.suffix_rules.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        }
    }
    return cfg;
}

}  // namespace mmfuse
