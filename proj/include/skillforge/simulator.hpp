#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "learning.hpp"
#include "ledger.hpp"
#include "retrieval.hpp"
#include "rng.hpp"
#include "skill_io.hpp"
#include "skills.hpp"
#include "text.hpp"

namespace skillforge {

// Deterministic mock agent: a seeded task stream drives the plan / act /
// reflect / learn loop against a real skill library, with token, cache and
// wall-time bookkeeping written to the ledger. No model is consulted; action
// outcomes are Bernoulli draws (or scripted overrides) so every run is a pure
// function of its config.

inline bool should_reflect(long long i, bool last_action_errored, long long k_reflect) {
    if (k_reflect < 1) fail(errc::config_invalid, "reflector cadence must be >= 1");
    if (i < 1) return false;
    return i % k_reflect == 0 || last_action_errored;
}

// ------------------------------------------------------------------- inputs

struct TemplateSpec {
    std::string id;
    std::string domain = "web";
    std::string url;                       // page the subgoal runs on
    std::vector<std::string> keywords;     // phrases the planner emits verbatim
    int base_actions = 4;                  // primitive actions when no routine serves
    int routine_savings = 3;               // actions a covering routine absorbs
    double reliability = 1.0;              // routine post-check pass rate
    double fallback_p = 0.95;              // manual execution pass rate
    bool loopy = false;                    // injects a stuck repeat loop before progress
    double weight = 1.0;
    // Distilled-candidate payload; empty id marks the subgoal non-inducible.
    std::string candidate_id;
    std::string candidate_url_glob;
    std::string candidate_body;
    std::vector<std::string> candidate_params;
    std::vector<std::string> candidate_pre, candidate_post;
};

// One subgoal instance inside a task. Forced outcome fields take -1 (sample
// from the stream RNG), 0 or 1; scripted scenarios force everything so the
// replay is schedule-proof.
struct ScriptedSubgoal {
    std::vector<std::string> keywords;
    std::string url;
    int base_actions = 4;
    int routine_savings = 3;
    bool loopy = false;
    bool verified = true;     // scripted verification verdict at the boundary
    double reliability = 1.0;
    double fallback_p = 1.0;
    int forced_routine_pass = -1;
    int forced_fallback_pass = -1;
    std::string candidate_id;
    std::string candidate_url_glob;
    std::string candidate_body;
    std::vector<std::string> candidate_params;
    std::vector<std::string> candidate_pre, candidate_post;
};

struct SyntheticTask {
    int index = 0; // 1-based position in the stream
    std::string task_id;
    std::string domain;
    bool feasible = true;
    std::vector<ScriptedSubgoal> subgoals;
};

struct SimConfig {
    std::uint64_t seed = 42;
    int n_tasks = 500;
    int max_steps = 50;        // non-eval rows per task
    long long k_reflect = 3;
    bool learning = true;
    bool rules_enabled = true;
    bool verify_subgoals = true;
    double infeasible_rate = 0.0;
    int min_subgoals = 1;
    int max_subgoals = 2;
    LearningConfig learn;
    std::vector<TemplateSpec> templates;
    SkillLibrary seed_library;
    // prompt model: stable prefix (system + skill index) + volatile context,
    // with an optional per-actor-call visual payload
    long long stable_prefix_tokens = 6000;
    long long per_skill_tokens = 150;
    long long volatile_tokens = 2500;
    long long visual_tokens = 0;
    bool compression = false;
    double beta_vis = 0.6;
    long long q_plan = 900;
    long long q_reflect = 300;
    long long q_act = 220;
    long long llm_wall_ms = 800;
    long long action_wall_ms = 300;
    std::string run_id = "sim";
    std::string method = "ours";
    std::string model_name = "sim-llm";
    std::string today = "2026-01-14";
};

inline void validate_sim_config(const SimConfig& cfg) {
    if (cfg.n_tasks < 0) fail(errc::config_invalid, "n_tasks must be >= 0");
    if (cfg.max_steps < 2) fail(errc::config_invalid, "max_steps must be >= 2");
    if (cfg.k_reflect < 1) fail(errc::config_invalid, "k_reflect must be >= 1");
    if (cfg.min_subgoals < 1 || cfg.max_subgoals < cfg.min_subgoals)
        fail(errc::config_invalid, "subgoal range");
    if (cfg.infeasible_rate < 0.0 || cfg.infeasible_rate > 1.0)
        fail(errc::config_invalid, "infeasible_rate");
    if (cfg.stable_prefix_tokens < 0 || cfg.per_skill_tokens < 0 || cfg.volatile_tokens < 0 ||
        cfg.visual_tokens < 0 || cfg.q_plan < 0 || cfg.q_reflect < 0 || cfg.q_act < 0 ||
        cfg.llm_wall_ms < 0 || cfg.action_wall_ms < 0)
        fail(errc::config_invalid, "token/time model fields must be non-negative");
    if (cfg.beta_vis < 0.0 || cfg.beta_vis > 1.0) fail(errc::config_invalid, "beta_vis");
    if (cfg.run_id.empty()) fail(errc::config_invalid, "run_id");
    for (auto& t : cfg.templates) {
        if (t.id.empty() || t.keywords.empty() || t.url.empty())
            fail(errc::config_invalid, "template needs id, keywords, url");
        if (t.base_actions < 1 || t.routine_savings < 0 || t.routine_savings > t.base_actions)
            fail(errc::config_invalid, "template " + t.id + ": action counts");
        if (t.reliability < 0 || t.reliability > 1 || t.fallback_p < 0 || t.fallback_p > 1)
            fail(errc::config_invalid, "template " + t.id + ": probabilities");
        if (t.weight <= 0) fail(errc::config_invalid, "template " + t.id + ": weight");
    }
    validate_library(cfg.seed_library);
}

// --------------------------------------------------------------- generation

inline ScriptedSubgoal subgoal_from_template(const TemplateSpec& t) {
    ScriptedSubgoal sg;
    sg.keywords = t.keywords;
    sg.url = t.url;
    sg.base_actions = t.base_actions;
    sg.routine_savings = t.routine_savings;
    sg.loopy = t.loopy;
    sg.reliability = t.reliability;
    sg.fallback_p = t.fallback_p;
    sg.candidate_id = t.candidate_id;
    sg.candidate_url_glob = t.candidate_url_glob.empty() ? "*" : t.candidate_url_glob;
    sg.candidate_body = t.candidate_body;
    sg.candidate_params = t.candidate_params;
    sg.candidate_pre = t.candidate_pre;
    sg.candidate_post = t.candidate_post;
    return sg;
}

inline std::vector<SyntheticTask> generate_stream(const SimConfig& cfg) {
    validate_sim_config(cfg);
    if (cfg.templates.empty()) fail(errc::empty_input, "no task templates");
    double total_w = 0.0;
    for (auto& t : cfg.templates) total_w += t.weight;
    pcg32 rng(cfg.seed, 1);
    auto pick = [&]() -> const TemplateSpec& {
        double x = rng.uniform() * total_w;
        double acc = 0.0;
        for (auto& t : cfg.templates) {
            acc += t.weight;
            if (x < acc) return t;
        }
        return cfg.templates.back();
    };
    std::vector<SyntheticTask> tasks;
    tasks.reserve(cfg.n_tasks);
    for (int i = 1; i <= cfg.n_tasks; ++i) {
        SyntheticTask task;
        task.index = i;
        char buf[16];
        std::snprintf(buf, sizeof buf, "t%04d", i);
        task.task_id = buf;
        task.feasible = cfg.infeasible_rate <= 0.0 || !rng.bernoulli(cfg.infeasible_rate);
        int span = cfg.max_subgoals - cfg.min_subgoals + 1;
        int n_sub = cfg.min_subgoals + static_cast<int>(rng.bounded(static_cast<uint32_t>(span)));
        for (int s = 0; s < n_sub; ++s) {
            const TemplateSpec& t = pick();
            if (task.domain.empty()) task.domain = t.domain;
            task.subgoals.push_back(subgoal_from_template(t));
        }
        if (task.domain.empty()) task.domain = "web";
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// ---------------------------------------------------------------- execution

// The stable prompt prefix carries skill definitions, not live counters, so
// outcome bookkeeping alone does not invalidate the cache; admissions, merges
// and demotions do, for exactly the next call.
inline std::uint64_t library_fingerprint(const SkillLibrary& lib) {
    std::vector<std::string> parts;
    parts.reserve(lib.rules.size() + lib.routines.size());
    for (auto& r : lib.rules)
        parts.push_back("R|" + r.id + "|" + rule_pattern_text(r) + "|" + join(r.sites, ",") + "|" +
                        r.body);
    for (auto& r : lib.routines) {
        std::string p = "P|" + r.id + "|" + join(r.trigger_keywords, ",") + "|" + r.url_glob + "|";
        for (auto& v : r.polarity) p += v.dir + ":" + join(v.keywords, ",") + ";";
        p += "|" + r.body + "|" + join(r.pre, ",") + "|" + join(r.post, ",");
        parts.push_back(std::move(p));
    }
    std::sort(parts.begin(), parts.end());
    std::uint64_t h = 14695981039346656037ULL;
    for (auto& p : parts) h = fnv1a(p, h);
    return h;
}

struct TaskRun {
    std::vector<LedgerEvent> rows; // includes the terminal eval row
    TrajectoryReport report;
    std::string status;
    std::vector<std::pair<std::string, std::string>> retrievals; // (routine id, dir)
    bool rule_vetoed = false;
};

namespace detail {

struct budget_exhausted {};

// Row emitter for one task; owns step numbering, the action window for rule
// matching, the cadence counter and the per-stream cache state.
struct TaskEmitter {
    const SimConfig& cfg;
    const SyntheticTask& task;
    const SkillLibrary& lib;
    const std::string& run_id;
    std::uint64_t& prefix_prev; // per-ledger-stream cache fingerprint
    TaskRun& out;

    long long step = 0;
    long long actions_done = 0; // action + routine rows, drives the cadence
    long long page_counter = 0; // advances only when an action makes progress
    std::vector<ActionRecord> window;
    long long prefix_tokens = 0;
    std::uint64_t fp = 0;

    TaskEmitter(const SimConfig& c, const SyntheticTask& t, const SkillLibrary& l,
                const std::string& rid, std::uint64_t& prev, TaskRun& o)
        : cfg(c), task(t), lib(l), run_id(rid), prefix_prev(prev), out(o) {
        prefix_tokens = cfg.stable_prefix_tokens +
                        cfg.per_skill_tokens *
                            static_cast<long long>(lib.rules.size() + lib.routines.size());
        fp = library_fingerprint(lib);
    }

    LedgerEvent base() {
        LedgerEvent e;
        e.run_id = run_id;
        e.task_id = task.task_id;
        e.domain = task.domain;
        e.method = cfg.method;
        e.step_idx = step++;
        return e;
    }

    void push(LedgerEvent e) {
        if (static_cast<int>(out.rows.size()) >= cfg.max_steps) throw budget_exhausted{};
        out.rows.push_back(std::move(e));
    }

    void llm(const std::string& type, long long completion, const std::string& skill_id,
             bool visual) {
        LedgerEvent e = base();
        e.event_type = type;
        e.model = cfg.model_name;
        long long vis = 0;
        if (visual)
            vis = cfg.compression
                      ? static_cast<long long>(static_cast<double>(cfg.visual_tokens) * cfg.beta_vis)
                      : cfg.visual_tokens;
        e.prompt_tokens = prefix_tokens + cfg.volatile_tokens + vis;
        e.cached_prompt_tokens = (fp == prefix_prev) ? prefix_tokens : 0;
        prefix_prev = fp;
        e.completion_tokens = completion;
        e.reflector_fired = type == "reflector";
        e.skill_id = skill_id;
        e.wall_time_ms = cfg.llm_wall_ms;
        push(std::move(e));
    }

    void planner(const std::string& skill_id = "") { llm("planner", cfg.q_plan, skill_id, false); }
    void actor() { llm("actor", cfg.q_act, "", true); }
    void reflector() { llm("reflector", cfg.q_reflect, "", false); }

    void action(const std::string& name, const std::string& target, bool advances) {
        LedgerEvent e = base();
        e.event_type = "action";
        e.action_name = name;
        e.action_target = target;
        e.wall_time_ms = cfg.action_wall_ms;
        push(std::move(e));
        if (advances) ++page_counter;
        window.push_back(ActionRecord{normalize_action_signature(name, target),
                                      fnv1a(task.task_id + ":" + std::to_string(page_counter))});
        ++actions_done;
    }

    void routine(const std::string& id) {
        LedgerEvent e = base();
        e.event_type = "routine";
        e.routine_id = id;
        e.skill_id = id;
        e.wall_time_ms = cfg.action_wall_ms;
        push(std::move(e));
        ++page_counter;
        window.push_back(ActionRecord{"routine#" + id,
                                      fnv1a(task.task_id + ":" + std::to_string(page_counter))});
        ++actions_done;
    }

    // Cadence check after a non-final action of a segment.
    void maybe_cadence_reflector() {
        if (should_reflect(actions_done, false, cfg.k_reflect)) reflector();
    }

    bool last_row_is_reflector() const {
        return !out.rows.empty() && out.rows.back().event_type == "reflector";
    }
};

} // namespace detail

// Runs one task against a fixed library snapshot. The library is only read;
// the returned report carries everything the learning update needs.
inline TaskRun run_task(const SimConfig& cfg, const SkillLibrary& lib, const SyntheticTask& task,
                        const std::string& run_id, pcg32& rng, std::uint64_t& prefix_prev) {
    TaskRun out;
    out.report.task_id = task.task_id;
    detail::TaskEmitter em(cfg, task, lib, run_id, prefix_prev, out);

    bool task_failed = false;
    std::string fail_status = status_fail;

    auto draw = [&](int forced, double p) {
        if (forced >= 0) return forced == 1;
        return rng.bernoulli(p);
    };

    try {
        if (!task.feasible) {
            em.planner();
        } else {
            em.planner();
            for (const auto& sg : task.subgoals) {
                SubgoalRecord seg;
                seg.keywords = sg.keywords;
                seg.url = sg.url;
                seg.candidate_id = sg.candidate_id;
                seg.candidate_url_glob = sg.candidate_url_glob;
                seg.candidate_body = sg.candidate_body;
                seg.candidate_params = sg.candidate_params;
                seg.candidate_pre = sg.candidate_pre;
                seg.candidate_post = sg.candidate_post;

                std::optional<RetrievalMatch> match;
                try {
                    match = retrieve(lib, normalize_phrases(sg.keywords), sg.url, cfg.learn.prior);
                } catch (const error& e) {
                    if (e.code() != errc::ambiguous_polarity) throw;
                    // ambiguous direction: decline the routine, let the actor work
                }

                auto manual_pass = [&](int forced) {
                    for (int j = 0; j < sg.base_actions; ++j) {
                        em.actor();
                        em.action("click", "node" + std::to_string(em.page_counter + 1), true);
                        if (j + 1 < sg.base_actions) em.maybe_cadence_reflector();
                    }
                    return draw(forced, sg.fallback_p);
                };
                // reflect on the error, re-plan, then one manual retry
                auto recover = [&]() {
                    em.reflector();
                    em.planner();
                    return manual_pass(sg.forced_fallback_pass);
                };

                if (match) {
                    out.retrievals.emplace_back(match->id, match->dir.value_or(""));
                    seg.served_by = match->id;
                    em.routine(match->id);
                    int residual = sg.base_actions - sg.routine_savings;
                    for (int j = 0; j < residual; ++j) {
                        em.actor();
                        em.action("click", "node" + std::to_string(em.page_counter + 1), true);
                        if (j + 1 < residual) em.maybe_cadence_reflector();
                    }
                    seg.primitive_actions = residual;
                    seg.routine_passed = draw(sg.forced_routine_pass, sg.reliability);
                    seg.passed = seg.routine_passed ? true : recover();
                } else {
                    if (sg.loopy) {
                        // stuck loop: same signature, no page progress, until a
                        // rule veto or the repeat marker at five
                        bool vetoed = false;
                        for (int r = 0; r < 5 && !vetoed; ++r) {
                            em.actor();
                            em.action("click", "next_page_btn", false);
                            if (cfg.rules_enabled) {
                                auto fired = match_rules(lib, em.window,
                                                         MonitorFlags{sg.url, false, false});
                                if (!fired.empty()) {
                                    em.planner(fired[0]->id);
                                    out.rule_vetoed = true;
                                    vetoed = true;
                                }
                            }
                        }
                        if (!vetoed) {
                            fail_status = status_repeat;
                            task_failed = true;
                            break;
                        }
                    }
                    seg.primitive_actions = sg.base_actions;
                    seg.passed = manual_pass(sg.forced_fallback_pass) ? true : recover();
                }

                if (cfg.verify_subgoals ||
                    should_reflect(em.actions_done, !seg.passed, cfg.k_reflect)) {
                    if (!em.last_row_is_reflector()) em.reflector();
                    seg.verified = sg.verified;
                }
                out.report.subgoals.push_back(seg);
                if (!seg.passed) {
                    task_failed = true;
                    break;
                }
            }
        }
    } catch (const detail::budget_exhausted&) {
        task_failed = true;
    }

    LedgerEvent ev = em.base();
    ev.event_type = "eval";
    ev.evaluator_status =
        !task.feasible ? status_infeasible : (task_failed ? fail_status : status_success);
    out.rows.push_back(std::move(ev));
    out.status = out.rows.back().evaluator_status;
    out.report.success = out.status == status_success;
    return out;
}

// ------------------------------------------------------------------ streams

struct TaskSummary {
    int index = 0;
    std::string task_id;
    std::string status;
    long long steps = 0;
    long long tokens = 0;
    bool skill_hit = false;
    std::vector<UpdateEvent> events;
    std::vector<std::pair<std::string, std::string>> retrievals;
};

struct StreamResult {
    SkillLibrary library;
    std::vector<LedgerEvent> rows;
    std::vector<TaskSummary> tasks;
    long long admits = 0, merges = 0, demotes = 0, rejects = 0;
    int last_library_change_task = 0; // stream index of the last admit/merge/demote
    long long seed_routines = 0;

    std::string csv() const {
        std::ostringstream os;
        os << ledger_header() << '\n';
        for (auto& e : rows) os << to_csv_row(e) << '\n';
        return os.str();
    }
};

inline StreamResult run_stream(const SimConfig& cfg, const std::vector<SyntheticTask>& tasks) {
    validate_sim_config(cfg);
    if (tasks.empty()) fail(errc::empty_input, "no tasks");
    StreamResult res;
    res.library = cfg.seed_library;
    res.seed_routines = static_cast<long long>(res.library.routines.size());
    pcg32 rng(cfg.seed, 2);
    std::uint64_t prefix_prev = library_fingerprint(res.library);
    for (const auto& task : tasks) {
        TaskRun tr = run_task(cfg, res.library, task, cfg.run_id, rng, prefix_prev);
        TaskSummary ts;
        ts.index = task.index;
        ts.task_id = task.task_id;
        ts.status = tr.status;
        for (auto& e : tr.rows) {
            if (e.event_type != "eval") ++ts.steps;
            ts.tokens += e.prompt_tokens + e.completion_tokens + e.reasoning_tokens;
            if (!e.routine_id.empty() || !e.skill_id.empty()) ts.skill_hit = true;
        }
        ts.retrievals = tr.retrievals;
        res.rows.insert(res.rows.end(), tr.rows.begin(), tr.rows.end());
        if (cfg.learning) {
            ts.events = library_update(res.library, tr.report, cfg.learn, cfg.today);
            for (auto& ev : ts.events) {
                if (ev.kind == "admit") ++res.admits;
                else if (ev.kind == "merge") ++res.merges;
                else if (ev.kind == "demote") ++res.demotes;
                else if (ev.kind == "reject") ++res.rejects;
                if (ev.kind != "reject") res.last_library_change_task = task.index;
            }
        }
        res.tasks.push_back(std::move(ts));
    }
    return res;
}

inline StreamResult simulate(const SimConfig& cfg) {
    return run_stream(cfg, generate_stream(cfg));
}

// Library evolution counters in the shape of the end-of-run statistics table:
// a polarity-pair merge counts as one induced routine.
struct LibraryEvolution {
    long long seed_routines = 0;
    long long induced = 0;
    long long demoted = 0;
    long long active = 0;
    long long polarity_pairs = 0;
};

inline LibraryEvolution library_evolution(const StreamResult& res) {
    LibraryEvolution ev;
    ev.seed_routines = res.seed_routines;
    ev.induced = res.admits - res.merges;
    ev.demoted = res.demotes;
    ev.active = static_cast<long long>(res.library.routines.size());
    ev.polarity_pairs = res.merges;
    return ev;
}

// ---------------------------------------------------------------- parallel

// N workers share one on-disk library; each worker owns an independent ledger
// stream. Execution runs against a locked snapshot; the learning update
// reloads, applies and saves under the same exclusive lock, so interleavings
// can reorder updates but never corrupt the library.
struct WorkerLedger {
    std::string run_id;
    std::vector<LedgerEvent> rows;

    std::string csv() const {
        std::ostringstream os;
        os << ledger_header() << '\n';
        for (auto& e : rows) os << to_csv_row(e) << '\n';
        return os.str();
    }
};

struct ParallelResult {
    std::vector<WorkerLedger> workers;
    SkillLibrary final_library;
    long long admits = 0, merges = 0, demotes = 0, rejects = 0;
};

inline ParallelResult run_parallel(const SimConfig& cfg, const std::vector<SyntheticTask>& tasks,
                                   int workers, const std::filesystem::path& library_dir) {
    validate_sim_config(cfg);
    if (workers < 1) fail(errc::config_invalid, "workers must be >= 1");
    if (tasks.empty()) fail(errc::empty_input, "no tasks");
    {
        LibraryLock lock(library_dir);
        save_library(library_dir, cfg.seed_library);
    }
    ParallelResult res;
    res.workers.resize(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        res.workers[w].run_id = cfg.run_id + "-w" + std::to_string(w + 1);

    std::vector<std::string> errors_seen;
    std::mutex mu; // guards the error list and the event counters
    auto body = [&](int w) {
        try {
            std::uint64_t prefix_prev = library_fingerprint(cfg.seed_library);
            for (size_t t = static_cast<size_t>(w); t < tasks.size(); t += workers) {
                SkillLibrary snapshot;
                {
                    LibraryLock lock(library_dir);
                    snapshot = load_library(library_dir);
                }
                pcg32 rng(cfg.seed, 1000 + static_cast<std::uint64_t>(tasks[t].index));
                TaskRun tr =
                    run_task(cfg, snapshot, tasks[t], res.workers[w].run_id, rng, prefix_prev);
                if (cfg.learning) {
                    LibraryLock lock(library_dir);
                    SkillLibrary fresh = load_library(library_dir);
                    auto events = library_update(fresh, tr.report, cfg.learn, cfg.today);
                    save_library(library_dir, fresh);
                    std::lock_guard<std::mutex> g(mu);
                    for (auto& ev : events) {
                        if (ev.kind == "admit") ++res.admits;
                        else if (ev.kind == "merge") ++res.merges;
                        else if (ev.kind == "demote") ++res.demotes;
                        else if (ev.kind == "reject") ++res.rejects;
                    }
                }
                res.workers[w].rows.insert(res.workers[w].rows.end(), tr.rows.begin(),
                                           tr.rows.end());
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> g(mu);
            errors_seen.push_back(e.what());
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& th : pool) th.join();
    if (!errors_seen.empty()) fail(errc::invariant_violation, "worker: " + errors_seen.front());
    {
        LibraryLock lock(library_dir);
        res.final_library = load_library(library_dir);
    }
    return res;
}

} // namespace skillforge
