#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "skills.hpp"
#include "text.hpp"

namespace skillforge {

// ------------------------------------------------------------------- config

struct LearningConfig {
    double theta_demote = 0.5;      // strict: demote only when fail ratio exceeds this
    long long min_invocations = 3;
    double jaccard_threshold = 0.85;
    double prior = 0.5;
    // Direction-flip token pairs, ascending sense first. Multi-word entries
    // are matched as token runs after normalization.
    std::vector<std::pair<std::string, std::string>> antonyms = {
        {"asc", "desc"},         {"min", "max"},        {"cheapest", "most-expensive"},
        {"oldest", "newest"},    {"lowest", "highest"}, {"smallest", "largest"},
    };
};

// ------------------------------------------------------------ counter flow

inline void record_outcome(SkillLibrary& lib, const std::string& routine_id, bool passed) {
    RoutineSkill* r = lib.find_routine(routine_id);
    if (!r) fail(errc::unknown_skill, routine_id);
    if (passed) ++r->stats.n_pass;
    else ++r->stats.n_fail;
}

inline bool demote_check(const ConfidenceStats& s, const LearningConfig& cfg) {
    long long n = s.invocations();
    if (n < cfg.min_invocations) return false;
    return static_cast<double>(s.n_fail) / static_cast<double>(n) > cfg.theta_demote;
}

struct UpdateEvent {
    std::string kind;   // admit | merge | demote | reject
    std::string id;
    std::string detail; // merge: "<a>+<b>", demote: reason, reject: colliding entry id
};

// Removes every routine whose failure ratio crosses the threshold and appends
// a blacklist entry per removal. The blacklist is append-only; entries are
// never rewritten or dropped.
inline std::vector<UpdateEvent> scan_demotions(SkillLibrary& lib, const LearningConfig& cfg,
                                               const std::string& today) {
    std::vector<UpdateEvent> events;
    std::vector<RoutineSkill> kept;
    kept.reserve(lib.routines.size());
    for (auto& r : lib.routines) {
        if (!demote_check(r.stats, cfg)) {
            kept.push_back(std::move(r));
            continue;
        }
        long long n = r.stats.invocations();
        double ratio = static_cast<double>(r.stats.n_fail) / static_cast<double>(n);
        std::string reason = "fail_ratio=" + format_fixed(ratio, 2) + " over " +
                             std::to_string(n) + " invocations";
        lib.demoted.push_back(DemotionEntry{r.id, today, reason, r.trigger_keywords});
        events.push_back(UpdateEvent{"demote", r.id, reason});
    }
    lib.routines = std::move(kept);
    return events;
}

// First blacklist entry (file order) whose normalized keyword tokens
// intersect the candidate's; null when the candidate is clean.
inline const DemotionEntry* check_blacklist(const SkillLibrary& lib,
                                            const std::vector<std::string>& candidate_keywords) {
    auto cand = normalize_phrases(candidate_keywords);
    for (auto& e : lib.demoted)
        if (intersects(normalize_phrases(e.keywords), cand)) return &e;
    return nullptr;
}

// -------------------------------------------------------------- body algebra

inline double jaccard_body(const std::string& a, const std::string& b) {
    auto sa = normalize_keywords(a);
    auto sb = normalize_keywords(b);
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0;
    for (auto& t : sa)
        if (sb.count(t)) ++inter;
    size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

inline bool run_starts_at(const std::vector<std::string>& seq, size_t at,
                          const std::vector<std::string>& run) {
    if (at + run.size() > seq.size()) return false;
    for (size_t k = 0; k < run.size(); ++k)
        if (seq[at + k] != run[k]) return false;
    return true;
}

} // namespace detail

// Token-sequence comparison: the two bodies must be identical except at
// positions where an antonym pair substitutes (one run per side), and every
// substitution must point the same way. Returns (comparable, a_is_ascending).
inline std::pair<bool, bool> antonym_diff(const std::string& body_a, const std::string& body_b,
                                          const LearningConfig& cfg) {
    auto ta = tokenize(body_a);
    auto tb = tokenize(body_b);
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> lex;
    for (auto& [p, q] : cfg.antonyms) lex.emplace_back(tokenize(p), tokenize(q));
    size_t i = 0, j = 0;
    int orient = 0; // 1: a carries the ascending tokens, 2: b does
    int diffs = 0;
    while (i < ta.size() && j < tb.size()) {
        if (ta[i] == tb[j]) {
            ++i, ++j;
            continue;
        }
        bool matched = false;
        for (auto& [p, q] : lex) {
            if (detail::run_starts_at(ta, i, p) && detail::run_starts_at(tb, j, q)) {
                if (orient == 2) return {false, false};
                orient = 1;
                i += p.size();
                j += q.size();
                matched = true;
                break;
            }
            if (detail::run_starts_at(ta, i, q) && detail::run_starts_at(tb, j, p)) {
                if (orient == 1) return {false, false};
                orient = 2;
                i += q.size();
                j += p.size();
                matched = true;
                break;
            }
        }
        if (!matched) return {false, false};
        ++diffs;
    }
    if (i != ta.size() || j != tb.size() || diffs == 0) return {false, false};
    return {true, orient == 1};
}

// ------------------------------------------------------------ polarity merge

namespace detail {

inline std::string phrase_key(const std::string& phrase) {
    return join(tokenize(phrase), " ");
}

// Phrases of a that do not appear in b, compared after normalization.
inline std::vector<std::string> phrase_difference(const std::vector<std::string>& a,
                                                  const std::vector<std::string>& b) {
    std::set<std::string> bk;
    for (auto& p : b) bk.insert(phrase_key(p));
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& p : a) {
        auto k = phrase_key(p);
        if (!bk.count(k) && seen.insert(k).second) out.push_back(p);
    }
    return out;
}

inline std::string shared_prefix_id(const std::string& a, const std::string& b) {
    size_t n = 0;
    while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
    std::string p = a.substr(0, n);
    while (!p.empty() && (p.back() == '_' || p.back() == '-')) p.pop_back();
    if (p.empty()) p = std::min(a, b) + "_pm";
    return p;
}

inline bool id_taken(const SkillLibrary& lib, const std::string& id) {
    for (auto& r : lib.rules)
        if (r.id == id) return true;
    return lib.find_routine(id) != nullptr;
}

} // namespace detail

// Two plain routines are a polarity pair when their bodies agree everywhere
// except antonym positions, overlap enough, share a url_glob, and each owns
// at least one distinguishing trigger phrase (token-disjoint across sides).
inline bool polarity_pair_check(const RoutineSkill& a, const RoutineSkill& b,
                                const LearningConfig& cfg) {
    if (a.has_polarity() || b.has_polarity()) return false;
    if (a.url_glob != b.url_glob) return false;
    if (jaccard_body(a.body, b.body) < cfg.jaccard_threshold) return false;
    auto [ok, a_asc] = antonym_diff(a.body, b.body, cfg);
    (void)a_asc;
    if (!ok) return false;
    auto da = detail::phrase_difference(a.trigger_keywords, b.trigger_keywords);
    auto db = detail::phrase_difference(b.trigger_keywords, a.trigger_keywords);
    if (da.empty() || db.empty()) return false;
    return !intersects(normalize_phrases(da), normalize_phrases(db));
}

// Greedily folds polarity pairs, smallest (id, id) pair first, until no pair
// remains. The merged routine sums both counterparts' counters and keeps the
// ascending side's body, so a later demotion scan sees the combined history.
inline std::vector<UpdateEvent> merge_polarity_pairs(SkillLibrary& lib,
                                                     const LearningConfig& cfg) {
    std::vector<UpdateEvent> events;
    for (;;) {
        size_t best_i = 0, best_j = 0;
        bool found = false;
        for (size_t i = 0; i < lib.routines.size(); ++i) {
            for (size_t j = 0; j < lib.routines.size(); ++j) {
                if (i == j) continue;
                const auto& a = lib.routines[i];
                const auto& b = lib.routines[j];
                if (a.id >= b.id) continue;
                if (!polarity_pair_check(a, b, cfg)) continue;
                if (!found || std::make_pair(a.id, b.id) <
                                  std::make_pair(lib.routines[best_i].id, lib.routines[best_j].id)) {
                    best_i = i;
                    best_j = j;
                    found = true;
                }
            }
        }
        if (!found) return events;

        RoutineSkill a = lib.routines[best_i]; // smaller id
        RoutineSkill b = lib.routines[best_j];
        auto [ok, a_asc] = antonym_diff(a.body, b.body, cfg);
        (void)ok;
        const RoutineSkill& asc = a_asc ? a : b;
        const RoutineSkill& desc = a_asc ? b : a;

        RoutineSkill merged;
        merged.trigger_keywords = a.trigger_keywords;
        for (auto& p : detail::phrase_difference(b.trigger_keywords, a.trigger_keywords))
            merged.trigger_keywords.push_back(p);
        merged.url_glob = a.url_glob;
        merged.polarity = {
            PolarityVariant{"asc", detail::phrase_difference(asc.trigger_keywords, desc.trigger_keywords)},
            PolarityVariant{"desc", detail::phrase_difference(desc.trigger_keywords, asc.trigger_keywords)},
        };
        merged.stats.n_pass = a.stats.n_pass + b.stats.n_pass;
        merged.stats.n_fail = a.stats.n_fail + b.stats.n_fail;
        merged.body = asc.body;
        merged.pre = asc.pre;
        merged.post = asc.post;

        size_t lo = std::min(best_i, best_j), hi = std::max(best_i, best_j);
        lib.routines.erase(lib.routines.begin() + hi);
        lib.routines.erase(lib.routines.begin() + lo);
        merged.id = detail::shared_prefix_id(a.id, b.id);
        while (detail::id_taken(lib, merged.id)) merged.id += "_pm";
        lib.routines.insert(lib.routines.begin() + lo, merged);
        events.push_back(UpdateEvent{"merge", merged.id, a.id + "+" + b.id});
    }
}

// ----------------------------------------------------------------- induction

struct RoutineCandidate {
    std::string id;
    std::vector<std::string> keywords;
    std::string url_glob = "*";
    std::string body;
    std::vector<std::string> params;
    std::vector<std::string> pre, post;
};

// One subgoal segment of a finished trajectory, as the reflector saw it.
// Candidate fields hold the distilled program when the segment is novel.
struct SubgoalRecord {
    std::vector<std::string> keywords;
    std::string url;
    std::string served_by;        // routine id when a retrieval hit executed it
    bool routine_passed = false;  // the routine's post-check verdict
    int primitive_actions = 0;
    bool verified = false;        // a progress check ran after the segment
    bool passed = false;          // the subgoal itself succeeded
    std::string candidate_id;
    std::string candidate_url_glob;
    std::string candidate_body;
    std::vector<std::string> candidate_params;
    std::vector<std::string> candidate_pre, candidate_post;
};

struct TrajectoryReport {
    std::string task_id;
    bool success = false;
    std::vector<SubgoalRecord> subgoals;
};

inline bool well_formed_params(const std::vector<std::string>& params) {
    std::set<std::string> seen;
    for (auto& p : params) {
        if (p.empty()) return false;
        for (char c : p)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
        if (std::isdigit(static_cast<unsigned char>(p[0]))) return false;
        if (!seen.insert(p).second) return false;
    }
    return true;
}

// Candidates come only from successful trajectories: a segment qualifies when
// it was not routine-served, took at least two primitive actions, passed, and
// a verification ran after it. Malformed parameterizations are dropped here,
// before any admission bookkeeping.
inline std::vector<RoutineCandidate> induce(const TrajectoryReport& report,
                                            const SkillLibrary& lib) {
    (void)lib;
    std::vector<RoutineCandidate> out;
    if (!report.success) return out;
    std::set<std::string> proposed;
    for (auto& seg : report.subgoals) {
        if (!seg.served_by.empty()) continue;
        if (seg.primitive_actions < 2) continue;
        if (!seg.verified || !seg.passed) continue;
        if (seg.candidate_id.empty() || seg.candidate_body.empty()) continue;
        if (!well_formed_params(seg.candidate_params)) continue;
        if (!proposed.insert(seg.candidate_id).second) continue;
        RoutineCandidate c;
        c.id = seg.candidate_id;
        c.keywords = seg.keywords;
        c.url_glob = seg.candidate_url_glob.empty() ? "*" : seg.candidate_url_glob;
        c.body = seg.candidate_body;
        c.params = seg.candidate_params;
        c.pre = seg.candidate_pre;
        c.post = seg.candidate_post;
        out.push_back(std::move(c));
    }
    return out;
}

// ------------------------------------------------------------- update cycle

// Per-task library update, applied in a fixed order: outcome recording for
// every routine the task fired, induction, blacklist-gated admission at
// (1,0), polarity merging, then the demotion scan. The scan runs last so a
// merge that pools enough failures is caught in the same cycle.
inline std::vector<UpdateEvent> library_update(SkillLibrary& lib, const TrajectoryReport& report,
                                               const LearningConfig& cfg,
                                               const std::string& today) {
    std::vector<UpdateEvent> events;
    for (auto& seg : report.subgoals) {
        if (seg.served_by.empty()) continue;
        // tolerate a routine another writer demoted between firing and update
        if (lib.find_routine(seg.served_by))
            record_outcome(lib, seg.served_by, seg.routine_passed);
    }
    for (auto& cand : induce(report, lib)) {
        if (const DemotionEntry* hit = check_blacklist(lib, cand.keywords)) {
            events.push_back(UpdateEvent{"reject", cand.id, hit->id});
            continue;
        }
        RoutineSkill r;
        r.id = cand.id;
        int suffix = 2;
        while (detail::id_taken(lib, r.id)) r.id = cand.id + "_" + std::to_string(suffix++);
        r.trigger_keywords = cand.keywords;
        r.url_glob = cand.url_glob;
        r.stats = ConfidenceStats{1, 0};
        r.body = cand.body;
        r.pre = cand.pre;
        r.post = cand.post;
        validate_routine(r);
        lib.routines.push_back(std::move(r));
        events.push_back(UpdateEvent{"admit", lib.routines.back().id, ""});
    }
    for (auto& e : merge_polarity_pairs(lib, cfg)) events.push_back(e);
    for (auto& e : scan_demotions(lib, cfg, today)) events.push_back(e);
    return events;
}

// ------------------------------------------------------------------ locking

// Advisory exclusive lock over a library directory, held for the whole
// load-update-save span of a writer. flock scopes the lock to the open file
// description, so concurrent threads of one process exclude each other too.
class LibraryLock {
public:
    explicit LibraryLock(const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir);
        path_ = dir / ".lock";
        fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) fail(errc::io_error, "open " + path_.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            fail(errc::io_error, "flock " + path_.string());
        }
    }

    LibraryLock(const LibraryLock&) = delete;
    LibraryLock& operator=(const LibraryLock&) = delete;

    ~LibraryLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace skillforge
