#pragma once

#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "ledger.hpp"

namespace skillforge {

// Aggregates over a set of task trajectories. Percentages are stored as
// percentages (58.3, not 0.583); token counts in thousands.
struct MetricReport {
    long long n_tasks = 0;
    double success_rate = 0.0;      // percent
    double mean_steps = 0.0;
    double mean_tokens_k = 0.0;
    double mean_time_s = 0.0;
    double action_repeat_rate = 0.0; // percent of tasks ending fail:repeat_action
    double skill_hit_rate = 0.0;     // percent of tasks with at least one skill row
    // Step overhead: mean steps over failures / mean steps over successes,
    // infeasible tasks excluded. Absent when either cohort is empty.
    std::optional<double> step_overhead;
    // Cache utilization: total cached / total prompt over rows that carry
    // model tokens. Absent when the trajectory set has none.
    std::optional<double> cache_utilization;
};

namespace detail {

inline double pct(long long num, long long den) {
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

} // namespace detail

inline MetricReport build_report(const std::vector<TaskTrajectoryView>& tasks) {
    if (tasks.empty()) fail(errc::empty_input, "no tasks");
    MetricReport rep;
    rep.n_tasks = static_cast<long long>(tasks.size());
    long long successes = 0, repeats = 0, hits = 0;
    long long steps_total = 0, tokens_total = 0, wall_total = 0;
    long long succ_tasks = 0, succ_steps = 0, fail_tasks = 0, fail_steps = 0;
    long long cached_total = 0, prompt_total = 0;
    bool any_llm = false;
    for (const auto& t : tasks) {
        if (t.success()) ++successes;
        if (t.status() == status_repeat) ++repeats;
        if (t.skill_hit()) ++hits;
        steps_total += t.steps();
        tokens_total += t.tokens_total();
        wall_total += t.wall_ms_total();
        if (!t.infeasible()) {
            if (t.success()) {
                ++succ_tasks;
                succ_steps += t.steps();
            } else {
                ++fail_tasks;
                fail_steps += t.steps();
            }
        }
        for (const auto& e : t.events) {
            if (e.is_llm_call()) {
                any_llm = true;
                cached_total += e.cached_prompt_tokens;
                prompt_total += e.prompt_tokens;
            }
        }
    }
    rep.success_rate = detail::pct(successes, rep.n_tasks);
    rep.mean_steps = static_cast<double>(steps_total) / static_cast<double>(rep.n_tasks);
    rep.mean_tokens_k = static_cast<double>(tokens_total) / static_cast<double>(rep.n_tasks) / 1000.0;
    rep.mean_time_s = static_cast<double>(wall_total) / static_cast<double>(rep.n_tasks) / 1000.0;
    rep.action_repeat_rate = detail::pct(repeats, rep.n_tasks);
    rep.skill_hit_rate = detail::pct(hits, rep.n_tasks);
    if (succ_tasks > 0 && fail_tasks > 0) {
        double ms = static_cast<double>(succ_steps) / static_cast<double>(succ_tasks);
        double mf = static_cast<double>(fail_steps) / static_cast<double>(fail_tasks);
        if (ms > 0.0) rep.step_overhead = mf / ms;
    }
    if (any_llm && prompt_total > 0)
        rep.cache_utilization = static_cast<double>(cached_total) / static_cast<double>(prompt_total);
    return rep;
}

struct BlockStats {
    std::vector<MetricReport> blocks;
    MetricReport overall;
};

// Splits the task sequence at the given cumulative boundaries (1-based,
// strictly increasing, last one equal to the task count) and reports each
// block alongside the whole-run aggregate.
inline BlockStats block_stats(const std::vector<TaskTrajectoryView>& tasks,
                              const std::vector<long long>& boundaries) {
    if (tasks.empty()) fail(errc::empty_input, "no tasks");
    if (boundaries.empty()) fail(errc::bad_partition, "no boundaries");
    long long prev = 0;
    for (long long b : boundaries) {
        if (b <= prev) fail(errc::bad_partition, "boundaries must increase");
        prev = b;
    }
    if (prev != static_cast<long long>(tasks.size()))
        fail(errc::bad_partition, "last boundary must equal task count");
    BlockStats out;
    size_t begin = 0;
    for (long long b : boundaries) {
        std::vector<TaskTrajectoryView> block(tasks.begin() + begin, tasks.begin() + b);
        out.blocks.push_back(build_report(block));
        begin = static_cast<size_t>(b);
    }
    out.overall = build_report(tasks);
    return out;
}

// success_rate in percent over mean tokens in thousands
inline double token_efficiency(double success_rate, double mean_tokens_k) {
    if (mean_tokens_k <= 0.0) fail(errc::zero_tokens, "token efficiency needs tokens");
    return success_rate / mean_tokens_k;
}

} // namespace skillforge
