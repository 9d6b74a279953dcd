#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "skills.hpp"
#include "text.hpp"

namespace skillforge {

// A routine is eligible for a subgoal when at least one of its trigger
// phrases, as a normalized token set, is contained in the subgoal's token set
// and its url_glob matches the page. Retrieval is a pure argmax over
// confidence; ties go to the lexicographically smallest id, so the result is
// a deterministic function of (library, subgoal, url).

struct RetrievalMatch {
    std::string id;
    double score = 0.0;
    std::optional<std::string> dir; // set for polarity routines when one side matches
};

inline bool routine_eligible(const RoutineSkill& r, const std::set<std::string>& subgoal,
                             const std::string& url) {
    if (!glob_match(r.url_glob, url)) return false;
    for (auto& phrase : r.trigger_keywords) {
        auto toks = normalize_keywords(phrase);
        if (!toks.empty() && is_subset(toks, subgoal)) return true;
    }
    return false;
}

// Throws ambiguous_polarity when both variants of the winning routine
// intersect the subgoal; the caller is expected to fall back to the actor.
inline std::optional<RetrievalMatch> retrieve(const SkillLibrary& lib,
                                              const std::set<std::string>& subgoal,
                                              const std::string& url,
                                              double prior = 0.5) {
    const RoutineSkill* best = nullptr;
    double best_c = -1.0;
    for (auto& r : lib.routines) {
        if (!routine_eligible(r, subgoal, url)) continue;
        double c = confidence(r.stats, prior);
        if (c > best_c || (c == best_c && best && r.id < best->id)) {
            best = &r;
            best_c = c;
        }
    }
    if (!best) return std::nullopt;
    RetrievalMatch m{best->id, best_c, std::nullopt};
    if (best->has_polarity()) {
        bool hit0 = intersects(normalize_phrases(best->polarity[0].keywords), subgoal);
        bool hit1 = intersects(normalize_phrases(best->polarity[1].keywords), subgoal);
        if (hit0 && hit1)
            fail(errc::ambiguous_polarity, best->id + ": both directions match subgoal");
        if (hit0) m.dir = best->polarity[0].dir;
        else if (hit1) m.dir = best->polarity[1].dir;
    }
    return m;
}

// ----------------------------------------------------------------- rules

// One executed action as seen by the rule window: normalized signature plus a
// hash of the observable page state after the action.
struct ActionRecord {
    std::string signature;
    uint64_t state_hash = 0;
};

struct MonitorFlags {
    std::string url;
    bool stale_page = false;
    bool selector_rejected = false;
};

inline bool rule_fires(const RuleSkill& rule, const std::vector<ActionRecord>& window,
                       const MonitorFlags& monitor) {
    bool site_ok = false;
    for (auto& g : rule.sites)
        if (glob_match(g, monitor.url)) site_ok = true;
    if (!site_ok) return false;
    switch (rule.predicate) {
        case RulePredicate::stale_page:
            return monitor.stale_page;
        case RulePredicate::selector_rejected:
            return monitor.selector_rejected;
        case RulePredicate::repeat_action: {
            size_t k = static_cast<size_t>(rule.threshold);
            if (window.size() < k || k == 0) return false;
            const ActionRecord& last = window.back();
            for (size_t i = window.size() - k; i < window.size(); ++i) {
                if (window[i].signature != last.signature) return false;
                if (window[i].state_hash != last.state_hash) return false;
            }
            return true;
        }
    }
    return false;
}

// Fired rules ordered by (priority high first, id ascending).
inline std::vector<const RuleSkill*> match_rules(const SkillLibrary& lib,
                                                 const std::vector<ActionRecord>& window,
                                                 const MonitorFlags& monitor) {
    std::vector<const RuleSkill*> out;
    for (auto& r : lib.rules)
        if (rule_fires(r, window, monitor)) out.push_back(&r);
    std::sort(out.begin(), out.end(), [](const RuleSkill* a, const RuleSkill* b) {
        if (priority_rank(a->priority) != priority_rank(b->priority))
            return priority_rank(a->priority) < priority_rank(b->priority);
        return a->id < b->id;
    });
    return out;
}

} // namespace skillforge
