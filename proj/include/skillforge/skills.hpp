#pragma once

#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "text.hpp"

namespace skillforge {

// ---------------------------------------------------------------- confidence

struct ConfidenceStats {
    long long n_pass = 0;
    long long n_fail = 0;

    long long invocations() const { return n_pass + n_fail; }
};

// Empirical pass rate; the prior only applies while the skill has no history.
inline double confidence(const ConfidenceStats& s, double prior = 0.5) {
    if (s.n_pass < 0 || s.n_fail < 0) fail(errc::negative_count, "confidence counters");
    long long n = s.invocations();
    return n > 0 ? static_cast<double>(s.n_pass) / static_cast<double>(n) : prior;
}

// --------------------------------------------------------------------- rules

enum class RulePriority { high, normal, low };

inline const char* priority_name(RulePriority p) {
    switch (p) {
        case RulePriority::high:   return "high";
        case RulePriority::normal: return "normal";
        case RulePriority::low:    return "low";
    }
    return "normal";
}

inline int priority_rank(RulePriority p) { return static_cast<int>(p); }

// Closed predicate set. repeat_action carries the consecutive-count threshold;
// the two monitor predicates are bare flags.
enum class RulePredicate { repeat_action, stale_page, selector_rejected };

struct RuleSkill {
    std::string id;
    RulePredicate predicate = RulePredicate::repeat_action;
    int threshold = 2;                 // repeat_action only
    std::vector<std::string> sites;    // url glob patterns, at least one
    RulePriority priority = RulePriority::normal;
    std::string body;                  // guidance text, kept verbatim
};

// ------------------------------------------------------------------ routines

struct PolarityVariant {
    std::string dir;                   // "asc" or "desc"
    std::vector<std::string> keywords; // raw phrases as written in the file
};

struct RoutineSkill {
    std::string id;
    std::vector<std::string> trigger_keywords; // raw phrases, nonempty
    std::string url_glob = "*";
    std::vector<PolarityVariant> polarity;     // empty or exactly two
    ConfidenceStats stats;
    std::string body;                          // program text, kept verbatim
    std::vector<std::string> pre;              // named condition flags
    std::vector<std::string> post;

    bool has_polarity() const { return !polarity.empty(); }
};

// ----------------------------------------------------------------- blacklist

struct DemotionEntry {
    std::string id;
    std::string demoted_at;            // ISO date, may be empty on old entries
    std::string reason;                // "fail_ratio=<r> over <n> invocations"
    std::vector<std::string> keywords; // raw phrases of the demoted skill
};

// Reason strings are machine-readable; this recovers the invocation count.
inline long long demotion_invocations(const DemotionEntry& e) {
    size_t over = e.reason.find(" over ");
    if (over == std::string::npos) return 0;
    return std::atoll(e.reason.c_str() + over + 6);
}

inline bool valid_demotion_reason(const std::string& reason) {
    // fail_ratio=<digits>.<2 digits> over <digits> invocations
    if (!starts_with(reason, "fail_ratio=")) return false;
    size_t i = 11;
    size_t d0 = i;
    while (i < reason.size() && std::isdigit(static_cast<unsigned char>(reason[i]))) ++i;
    if (i == d0 || i >= reason.size() || reason[i] != '.') return false;
    ++i;
    size_t frac = 0;
    while (i < reason.size() && std::isdigit(static_cast<unsigned char>(reason[i]))) ++i, ++frac;
    if (frac != 2) return false;
    if (reason.compare(i, 6, " over ") != 0) return false;
    i += 6;
    size_t n0 = i;
    while (i < reason.size() && std::isdigit(static_cast<unsigned char>(reason[i]))) ++i;
    if (i == n0) return false;
    return reason.compare(i, std::string::npos, " invocations") == 0;
}

// ------------------------------------------------------------------- library

struct SkillLibrary {
    std::vector<RuleSkill> rules;
    std::vector<RoutineSkill> routines;
    std::vector<DemotionEntry> demoted;   // append only
    std::string reflections;              // opaque blob, round-tripped verbatim

    const RoutineSkill* find_routine(const std::string& id) const {
        for (auto& r : routines)
            if (r.id == id) return &r;
        return nullptr;
    }

    RoutineSkill* find_routine(const std::string& id) {
        for (auto& r : routines)
            if (r.id == id) return &r;
        return nullptr;
    }
};

// Structural checks shared by parse and save paths. Active skills must have
// unique ids, polarity variants must be a disjoint asc/desc pair, and nothing
// active may sit on the blacklist.
inline void validate_routine(const RoutineSkill& r) {
    if (r.id.empty()) fail(errc::missing_field, "routine id");
    if (r.trigger_keywords.empty()) fail(errc::missing_field, "routine " + r.id + ": trigger keywords");
    if (normalize_phrases(r.trigger_keywords).empty())
        fail(errc::missing_field, "routine " + r.id + ": trigger keywords normalize to nothing");
    if (r.stats.n_pass < 0 || r.stats.n_fail < 0)
        fail(errc::negative_count, "routine " + r.id);
    if (!r.polarity.empty()) {
        if (r.polarity.size() != 2)
            fail(errc::bad_polarity, "routine " + r.id + ": polarity_pair needs exactly two variants");
        for (auto& v : r.polarity)
            if (v.dir != "asc" && v.dir != "desc")
                fail(errc::bad_polarity, "routine " + r.id + ": dir " + v.dir);
        if (r.polarity[0].dir == r.polarity[1].dir)
            fail(errc::bad_polarity, "routine " + r.id + ": duplicate dir");
        if (intersects(normalize_phrases(r.polarity[0].keywords),
                       normalize_phrases(r.polarity[1].keywords)))
            fail(errc::bad_polarity, "routine " + r.id + ": variant keyword sets overlap");
    }
}

inline void validate_rule(const RuleSkill& r) {
    if (r.id.empty()) fail(errc::missing_field, "rule id");
    if (r.sites.empty()) fail(errc::missing_field, "rule " + r.id + ": sites");
    if (r.predicate == RulePredicate::repeat_action && r.threshold < 1)
        fail(errc::invariant_violation, "rule " + r.id + ": threshold");
}

inline void validate_library(const SkillLibrary& lib) {
    std::set<std::string> ids;
    for (auto& r : lib.rules) {
        validate_rule(r);
        if (!ids.insert(r.id).second) fail(errc::invariant_violation, "duplicate skill id " + r.id);
    }
    for (auto& r : lib.routines) {
        validate_routine(r);
        if (!ids.insert(r.id).second) fail(errc::invariant_violation, "duplicate skill id " + r.id);
    }
    std::set<std::string> black;
    for (auto& e : lib.demoted) {
        if (e.id.empty() || e.reason.empty() || e.keywords.empty())
            fail(errc::malformed_entry, "blacklist entry " + e.id);
        black.insert(e.id);
    }
    for (auto& r : lib.routines)
        if (black.count(r.id))
            fail(errc::invariant_violation, "active routine " + r.id + " is blacklisted");
}

} // namespace skillforge
