#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

namespace skillforge {

inline std::string to_lower(std::string s) {
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool starts_with(const std::string& s, const std::string& p) {
    return s.rfind(p, 0) == 0;
}

// Token stream of a text: lowercase, every non-alphanumeric ASCII byte acts as
// a separator, empty pieces dropped. Bytes >= 0x80 are kept verbatim so UTF-8
// content survives untouched. Duplicates are kept (order preserved).
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        bool keep = (c >= 0x80) || std::isalnum(c);
        if (keep) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Normalized keyword set of a text. Idempotent: feeding the joined result back
// in yields the same set. Optional stop list filters tokens after lowering.
inline std::set<std::string> normalize_keywords(const std::string& text,
                                                const std::set<std::string>& stop = {}) {
    std::set<std::string> out;
    for (auto& t : tokenize(text))
        if (!stop.count(t)) out.insert(t);
    return out;
}

// Union of normalized tokens over a list of keyword phrases.
inline std::set<std::string> normalize_phrases(const std::vector<std::string>& phrases,
                                               const std::set<std::string>& stop = {}) {
    std::set<std::string> out;
    for (auto& p : phrases)
        for (auto& t : tokenize(p))
            if (!stop.count(t)) out.insert(t);
    return out;
}

inline bool is_subset(const std::set<std::string>& small, const std::set<std::string>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

inline bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else return true;
    }
    return false;
}

// Glob match: '*' spans any byte run (slashes included), '?' one byte, all
// else literal. Iterative two-pointer form, no backtracking blowup.
inline bool glob_match(const std::string& pat, const std::string& str) {
    size_t p = 0, s = 0, star = std::string::npos, mark = 0;
    while (s < str.size()) {
        if (p < pat.size() && (pat[p] == '?' || pat[p] == str[s])) {
            ++p, ++s;
        } else if (p < pat.size() && pat[p] == '*') {
            star = p++;
            mark = s;
        } else if (star != std::string::npos) {
            p = star + 1;
            s = ++mark;
        } else {
            return false;
        }
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
}

// printf-style rounding, shared by reports and the demotion reason string so
// the same value always prints the same bytes.
inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace skillforge
