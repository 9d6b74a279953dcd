#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "skills.hpp"
#include "text.hpp"

namespace skillforge {

// Skill files are markdown with a front-matter header between lines that are
// exactly "---". Serialization is canonical: fixed key order, fixed quoting,
// fixed wrapping. parse(serialize(x)) == x for any valid skill, and a file
// already in canonical form re-serializes byte for byte.

namespace detail {

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

struct FrontMatter {
    std::vector<std::string> lines; // header lines, delimiters stripped
    std::string body;               // raw text after the closing delimiter
};

inline FrontMatter split_front_matter(const std::string& text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "---")
        fail(errc::malformed_front_matter, "missing opening delimiter");
    FrontMatter fm;
    size_t close = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i] == "---") {
            close = i;
            break;
        }
        fm.lines.push_back(lines[i]);
    }
    if (close == 0) fail(errc::malformed_front_matter, "missing closing delimiter");
    std::string body;
    for (size_t i = close + 1; i < lines.size(); ++i) {
        body += lines[i];
        body += '\n';
    }
    fm.body = body;
    return fm;
}

inline size_t indent_of(const std::string& s) {
    size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return i;
}

// key: value split at the first colon; value may be empty (section headers).
inline bool split_key(const std::string& line, std::string& key, std::string& value) {
    size_t c = line.find(':');
    if (c == std::string::npos) return false;
    key = trim(line.substr(0, c));
    value = trim(line.substr(c + 1));
    return !key.empty();
}

// Splits "[a, b, c]" on top-level commas; commas inside quotes or parentheses
// do not split. Surrounding quotes on items are removed.
inline std::vector<std::string> parse_bracket_list(const std::string& raw, const char* what) {
    std::string s = trim(raw);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        fail(errc::malformed_front_matter, std::string(what) + ": expected [list]");
    std::string inner = s.substr(1, s.size() - 2);
    std::vector<std::string> items;
    std::string cur;
    int depth = 0;
    bool quoted = false;
    for (char c : inner) {
        if (c == '"') quoted = !quoted;
        if (!quoted) {
            if (c == '(') ++depth;
            if (c == ')') --depth;
            if (c == ',' && depth == 0) {
                items.push_back(cur);
                cur.clear();
                continue;
            }
        }
        cur.push_back(c);
    }
    if (!trim(cur).empty() || !items.empty()) items.push_back(cur);
    std::vector<std::string> out;
    for (auto& it : items) {
        std::string v = trim(it);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        if (v.empty()) fail(errc::malformed_front_matter, std::string(what) + ": empty list item");
        out.push_back(v);
    }
    return out;
}

inline std::string unquote(const std::string& raw) {
    std::string v = trim(raw);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

inline int open_brackets(const std::string& s) {
    int d = 0;
    bool q = false;
    for (char c : s) {
        if (c == '"') q = !q;
        if (!q && c == '[') ++d;
        if (!q && c == ']') --d;
    }
    return d;
}

// Joins wrapped list values: keeps consuming lines while brackets stay open.
inline std::string join_wrapped(const std::vector<std::string>& lines, size_t& i, std::string value) {
    while (open_brackets(value) > 0 && i + 1 < lines.size()) {
        ++i;
        value += " " + trim(lines[i]);
    }
    if (open_brackets(value) > 0) fail(errc::malformed_front_matter, "unterminated list");
    return value;
}

// Emits a bracketed list, quoting items, wrapping so no line exceeds 71
// columns before the closing bracket. Continuations align under the bracket.
inline void emit_list(std::string& out, const std::string& prefix,
                      const std::vector<std::string>& items, bool quote) {
    std::string line = prefix + "[";
    std::string indent(prefix.size() + 1, ' ');
    for (size_t k = 0; k < items.size(); ++k) {
        std::string item = quote ? "\"" + items[k] + "\"" : items[k];
        if (k == 0) {
            line += item;
        } else if (line.size() + 2 + item.size() > 71) {
            out += line + ",\n";
            line = indent + item;
        } else {
            line += ", " + item;
        }
    }
    out += line + "]\n";
}

// Body text canonical form: trailing whitespace-only tail collapsed to one
// final newline. Interior blank lines are untouched.
inline std::string canonical_body(const std::string& body) {
    size_t end = body.find_last_not_of(" \t\n");
    if (end == std::string::npos) return "";
    return body.substr(0, end + 1) + "\n";
}

} // namespace detail

// -------------------------------------------------------------------- rules

inline std::string rule_pattern_text(const RuleSkill& r) {
    switch (r.predicate) {
        case RulePredicate::repeat_action:
            return "last_action_equals(current_action) >= " + std::to_string(r.threshold);
        case RulePredicate::stale_page:
            return "stale_page";
        case RulePredicate::selector_rejected:
            return "selector_rejected";
    }
    return "";
}

inline void parse_rule_pattern(const std::string& text, RuleSkill& r) {
    std::string t = trim(text);
    if (t == "stale_page") {
        r.predicate = RulePredicate::stale_page;
        return;
    }
    if (t == "selector_rejected") {
        r.predicate = RulePredicate::selector_rejected;
        return;
    }
    const std::string head = "last_action_equals(current_action) >=";
    if (starts_with(t, head)) {
        std::string n = trim(t.substr(head.size()));
        if (n.empty() || n.find_first_not_of("0123456789") != std::string::npos)
            fail(errc::unknown_predicate, t);
        r.predicate = RulePredicate::repeat_action;
        r.threshold = std::atoi(n.c_str());
        return;
    }
    fail(errc::unknown_predicate, t);
}

inline RuleSkill parse_rule(const std::string& text) {
    auto fm = detail::split_front_matter(text);
    RuleSkill r;
    r.priority = RulePriority::normal;
    bool in_trigger = false, saw_pattern = false;
    for (size_t i = 0; i < fm.lines.size(); ++i) {
        const std::string& line = fm.lines[i];
        if (trim(line).empty()) continue;
        size_t ind = detail::indent_of(line);
        std::string key, value;
        if (!detail::split_key(line, key, value))
            fail(errc::malformed_front_matter, "bad line: " + line);
        if (ind == 0) {
            in_trigger = false;
            if (key == "id") r.id = value;
            else if (key == "trigger") in_trigger = true;
            else if (key == "priority") {
                if (value == "high") r.priority = RulePriority::high;
                else if (value == "normal") r.priority = RulePriority::normal;
                else if (value == "low") r.priority = RulePriority::low;
                else fail(errc::malformed_front_matter, "priority: " + value);
            } else fail(errc::malformed_front_matter, "unknown key: " + key);
        } else if (in_trigger) {
            if (key == "pattern") {
                parse_rule_pattern(value, r);
                saw_pattern = true;
            } else if (key == "sites") {
                value = detail::join_wrapped(fm.lines, i, value);
                r.sites = detail::parse_bracket_list(value, "sites");
            } else fail(errc::malformed_front_matter, "unknown trigger key: " + key);
        } else {
            fail(errc::malformed_front_matter, "stray indented line: " + line);
        }
    }
    if (r.id.empty()) fail(errc::missing_field, "rule id");
    if (!saw_pattern) fail(errc::missing_field, "rule " + r.id + ": trigger pattern");
    if (r.sites.empty()) fail(errc::missing_field, "rule " + r.id + ": sites");
    r.body = detail::canonical_body(fm.body);
    validate_rule(r);
    return r;
}

inline std::string serialize(const RuleSkill& r) {
    std::string out = "---\n";
    out += "id: " + r.id + "\n";
    out += "trigger:\n";
    out += "  pattern: " + rule_pattern_text(r) + "\n";
    detail::emit_list(out, "  sites: ", r.sites, true);
    out += std::string("priority: ") + priority_name(r.priority) + "\n";
    out += "---\n";
    out += detail::canonical_body(r.body);
    return out;
}

// ------------------------------------------------------------------ routines

inline RoutineSkill parse_routine(const std::string& text) {
    auto fm = detail::split_front_matter(text);
    RoutineSkill r;
    r.url_glob = "*";
    enum class Sec { none, trigger, polarity, confidence } sec = Sec::none;
    PolarityVariant* variant = nullptr;
    bool saw_keywords = false;
    for (size_t i = 0; i < fm.lines.size(); ++i) {
        const std::string& line = fm.lines[i];
        if (trim(line).empty()) continue;
        size_t ind = detail::indent_of(line);
        std::string rest = trim(line);
        if (ind == 0) {
            sec = Sec::none;
            variant = nullptr;
            std::string key, value;
            if (!detail::split_key(line, key, value))
                fail(errc::malformed_front_matter, "bad line: " + line);
            if (key == "id") r.id = value;
            else if (key == "trigger") sec = Sec::trigger;
            else if (key == "polarity_pair") sec = Sec::polarity;
            else if (key == "confidence") sec = Sec::confidence;
            else fail(errc::malformed_front_matter, "unknown key: " + key);
            continue;
        }
        if (sec == Sec::trigger) {
            std::string key, value;
            if (!detail::split_key(line, key, value))
                fail(errc::malformed_front_matter, "bad line: " + line);
            if (key == "keywords") {
                value = detail::join_wrapped(fm.lines, i, value);
                r.trigger_keywords = detail::parse_bracket_list(value, "keywords");
                saw_keywords = true;
            } else if (key == "url_glob") {
                r.url_glob = detail::unquote(value);
            } else fail(errc::malformed_front_matter, "unknown trigger key: " + key);
        } else if (sec == Sec::polarity) {
            if (starts_with(rest, "- ")) {
                std::string key, value;
                if (!detail::split_key(rest.substr(2), key, value) || key != "dir")
                    fail(errc::bad_polarity, "variant must start with dir");
                r.polarity.push_back(PolarityVariant{value, {}});
                variant = &r.polarity.back();
            } else {
                std::string key, value;
                if (!variant || !detail::split_key(line, key, value) || key != "keywords")
                    fail(errc::bad_polarity, "variant line: " + line);
                value = detail::join_wrapped(fm.lines, i, value);
                variant->keywords = detail::parse_bracket_list(value, "variant keywords");
            }
        } else if (sec == Sec::confidence) {
            std::string key, value;
            if (!detail::split_key(line, key, value))
                fail(errc::malformed_front_matter, "bad line: " + line);
            long long n = std::atoll(value.c_str());
            if (!value.empty() && value[0] == '-') fail(errc::negative_count, r.id + ": " + key);
            if (key == "n_pass") r.stats.n_pass = n;
            else if (key == "n_fail") r.stats.n_fail = n;
            else fail(errc::malformed_front_matter, "unknown confidence key: " + key);
        } else {
            fail(errc::malformed_front_matter, "stray indented line: " + line);
        }
    }
    if (r.id.empty()) fail(errc::missing_field, "routine id");
    if (!saw_keywords) fail(errc::missing_field, "routine " + r.id + ": trigger keywords");

    // Peel trailing pre:/post: condition lines off the body. A condition list
    // may wrap across lines, and middle continuation lines carry no brackets,
    // so the backward scan tracks how many closing brackets are still waiting
    // for their opener; a head line only counts once its list is balanced.
    auto lines = detail::split_lines(fm.body);
    size_t end = lines.size();
    while (end > 0 && trim(lines[end - 1]).empty()) --end;
    size_t first_cond = end;
    long long pending = 0; // closing brackets not yet matched, reading upward
    for (size_t i = end; i > 0; --i) {
        std::string t = trim(lines[i - 1]);
        if (t.empty()) break; // canonical form keeps a blank above the block
        pending -= detail::open_brackets(t);
        bool head = starts_with(t, "pre:") || starts_with(t, "post:");
        if (head && pending <= 0) {
            first_cond = i - 1;
            pending = 0;
            continue;
        }
        if (pending > 0) continue;
        break;
    }
    std::string body;
    for (size_t i = 0; i < first_cond; ++i) body += lines[i] + "\n";
    for (size_t i = first_cond; i < end; ++i) {
        std::string t = trim(lines[i]);
        if (t.empty()) continue;
        bool is_pre = starts_with(t, "pre:");
        if (!is_pre && !starts_with(t, "post:"))
            fail(errc::malformed_front_matter, "condition line: " + t);
        std::string value = trim(t.substr(t.find(':') + 1));
        value = detail::join_wrapped(lines, i, value);
        (is_pre ? r.pre : r.post) = detail::parse_bracket_list(value, is_pre ? "pre" : "post");
    }
    r.body = detail::canonical_body(body);
    if (r.body.empty()) fail(errc::missing_field, "routine " + r.id + ": body");
    validate_routine(r);
    return r;
}

inline std::string serialize(const RoutineSkill& r) {
    std::string out = "---\n";
    out += "id: " + r.id + "\n";
    out += "trigger:\n";
    detail::emit_list(out, "  keywords: ", r.trigger_keywords, true);
    out += "  url_glob: \"" + r.url_glob + "\"\n";
    if (!r.polarity.empty()) {
        out += "polarity_pair:\n";
        // asc first, canonical order
        std::vector<const PolarityVariant*> vs;
        for (auto& v : r.polarity) vs.push_back(&v);
        if (vs.size() == 2 && vs[0]->dir != "asc") std::swap(vs[0], vs[1]);
        for (auto* v : vs) {
            out += "  - dir: " + v->dir + "\n";
            detail::emit_list(out, "    keywords: ", v->keywords, true);
        }
    }
    out += "confidence:\n";
    out += "  n_pass: " + std::to_string(r.stats.n_pass) + "\n";
    out += "  n_fail: " + std::to_string(r.stats.n_fail) + "\n";
    out += "---\n";
    out += detail::canonical_body(r.body);
    if (!r.pre.empty() || !r.post.empty()) {
        out += "\n";
        if (!r.pre.empty()) detail::emit_list(out, "pre:  ", r.pre, false);
        if (!r.post.empty()) detail::emit_list(out, "post: ", r.post, false);
    }
    return out;
}

// ----------------------------------------------------------------- blacklist

inline std::vector<DemotionEntry> parse_demoted_log(const std::string& text) {
    auto fm = detail::split_front_matter(text); // header block is "# demoted.md"
    std::vector<DemotionEntry> entries;
    DemotionEntry* cur = nullptr;
    auto lines = detail::split_lines(fm.body);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string t = trim(lines[i]);
        if (t.empty()) continue;
        if (starts_with(t, "- ")) {
            std::string key, value;
            if (!detail::split_key(t.substr(2), key, value) || key != "id" || value.empty())
                fail(errc::malformed_entry, "entry must start with id: " + t);
            entries.push_back(DemotionEntry{value, "", "", {}});
            cur = &entries.back();
            continue;
        }
        std::string key, value;
        if (!cur || !detail::split_key(t, key, value))
            fail(errc::malformed_entry, "stray line: " + t);
        if (key == "demoted_at") cur->demoted_at = value;
        else if (key == "reason") cur->reason = detail::unquote(value);
        else if (key == "keywords") {
            value = detail::join_wrapped(lines, i, value);
            cur->keywords = detail::parse_bracket_list(value, "keywords");
        } else fail(errc::malformed_entry, "unknown entry key: " + key);
    }
    for (auto& e : entries) {
        if (e.reason.empty() || e.keywords.empty())
            fail(errc::malformed_entry, "entry " + e.id + ": missing reason or keywords");
        if (!valid_demotion_reason(e.reason))
            fail(errc::malformed_entry, "entry " + e.id + ": reason format: " + e.reason);
    }
    return entries;
}

inline std::string serialize_demoted(const std::vector<DemotionEntry>& entries) {
    std::string out = "---\n# demoted.md\n---\n";
    for (auto& e : entries) {
        out += "- id: " + e.id + "\n";
        if (!e.demoted_at.empty()) out += "  demoted_at: " + e.demoted_at + "\n";
        out += "  reason: \"" + e.reason + "\"\n";
        detail::emit_list(out, "  keywords: ", e.keywords, true);
    }
    return out;
}

// ----------------------------------------------------------- directory layout
//
//   <dir>/rules/<id>.md
//   <dir>/routines/<id>.md
//   <dir>/demoted.md
//   <dir>/reflections.md   (opaque, optional)

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot write " + p.string());
    out << content;
    if (!out) fail(errc::io_error, "short write " + p.string());
}

inline SkillLibrary load_library(const fs::path& dir) {
    if (!fs::exists(dir)) fail(errc::io_error, "no such library dir: " + dir.string());
    SkillLibrary lib;
    auto load_dir = [&](const fs::path& sub, bool rules) {
        if (!fs::exists(sub)) return;
        std::vector<fs::path> files;
        for (auto& e : fs::directory_iterator(sub))
            if (e.path().extension() == ".md") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (auto& f : files) {
            if (rules) lib.rules.push_back(parse_rule(read_file(f)));
            else lib.routines.push_back(parse_routine(read_file(f)));
        }
    };
    load_dir(dir / "rules", true);
    load_dir(dir / "routines", false);
    if (fs::exists(dir / "demoted.md")) lib.demoted = parse_demoted_log(read_file(dir / "demoted.md"));
    if (fs::exists(dir / "reflections.md")) lib.reflections = read_file(dir / "reflections.md");
    validate_library(lib);
    return lib;
}

inline void save_library(const fs::path& dir, const SkillLibrary& lib) {
    validate_library(lib);
    fs::create_directories(dir / "rules");
    fs::create_directories(dir / "routines");
    // Blacklist first, then routines, then rules: a reader that observes a
    // routine file missing will already see its blacklist entry.
    write_file(dir / "demoted.md", serialize_demoted(lib.demoted));
    std::set<std::string> keep;
    for (auto& r : lib.routines) {
        write_file(dir / "routines" / (r.id + ".md"), serialize(r));
        keep.insert(r.id + ".md");
    }
    for (auto& e : fs::directory_iterator(dir / "routines"))
        if (e.path().extension() == ".md" && !keep.count(e.path().filename().string()))
            fs::remove(e.path());
    keep.clear();
    for (auto& r : lib.rules) {
        write_file(dir / "rules" / (r.id + ".md"), serialize(r));
        keep.insert(r.id + ".md");
    }
    for (auto& e : fs::directory_iterator(dir / "rules"))
        if (e.path().extension() == ".md" && !keep.count(e.path().filename().string()))
            fs::remove(e.path());
    if (!lib.reflections.empty()) write_file(dir / "reflections.md", lib.reflections);
}

} // namespace skillforge
