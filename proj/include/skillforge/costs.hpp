#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "ledger.hpp"

namespace skillforge {

// Token-denominated cost model. kappa_h prices the planner/reflector model,
// kappa_l the actor model, both per completion token; q_* are per-call
// completion budgets. Visual compression scales actor output by beta_vis.
struct CostModel {
    double kappa_h = 1.0;
    double kappa_l = 1.0;
    double q_plan = 0.0;
    double q_reflect = 0.0;
    double q_act = 0.0;
    long long k_reflect = 3;
    bool compression = false;
    double beta_vis = 1.0;
    double n_rollout = 1.0;
    double verify_multiplier = 0.0;
    double induce_tokens = 0.0;
    double pre_tokens = 0.0; // one-time library construction, amortized outside
};

inline void validate_cost_model(const CostModel& m) {
    if (m.k_reflect < 1) fail(errc::config_invalid, "k_reflect must be >= 1");
    if (m.kappa_h < 0 || m.kappa_l < 0 || m.q_plan < 0 || m.q_reflect < 0 || m.q_act < 0 ||
        m.n_rollout < 0 || m.verify_multiplier < 0 || m.induce_tokens < 0 || m.pre_tokens < 0 ||
        m.beta_vis < 0)
        fail(errc::config_invalid, "cost model fields must be non-negative");
}

// Single-execution cost of one task attempt: planner calls plus the cadence
// share of reflector calls at the high price, actor calls at the low price.
inline double exec_cost(const CostModel& m, long long n_plans, long long n_steps) {
    validate_cost_model(m);
    if (n_plans < 0 || n_steps < 0) fail(errc::negative_count, "plan/step counts");
    double reflects = static_cast<double>(n_steps / m.k_reflect);
    double act = static_cast<double>(n_steps) * m.q_act * (m.compression ? m.beta_vis : 1.0);
    return m.kappa_h * (static_cast<double>(n_plans) * m.q_plan + reflects * m.q_reflect) +
           m.kappa_l * act;
}

struct TaskCostTerms {
    double exec = 0.0;     // one execution
    double rollout = 0.0;  // n_rollout executions
    double verify = 0.0;   // verifier passes, priced as executions
    double induce = 0.0;   // flat induction charge
    double total = 0.0;
};

inline TaskCostTerms per_task_cost(const CostModel& m, long long n_plans, long long n_steps) {
    TaskCostTerms t;
    t.exec = exec_cost(m, n_plans, n_steps);
    t.rollout = m.n_rollout * t.exec;
    t.verify = m.verify_multiplier * t.exec;
    t.induce = m.induce_tokens;
    t.total = t.rollout + t.verify + t.induce;
    return t;
}

struct BenchmarkCost {
    double mean_exec = 0.0;    // mean single-execution cost (the plain-agent price)
    double rollout_term = 0.0; // n_rollout * mean_exec
    double verify_term = 0.0;
    double induce_term = 0.0;
    double pre_per_task = 0.0; // pre_tokens spread over the benchmark
    double mean_total = 0.0;   // rollout + verify + induce + pre_per_task
    double overhead_ratio = 0.0; // mean_total / mean_exec
};

// Benchmark-level decomposition. mean_total is the sum of its four printed
// terms by construction; the ratio compares against running each task once
// with no learning machinery.
inline BenchmarkCost benchmark_cost(const CostModel& m,
                                    const std::vector<std::pair<long long, long long>>& plan_steps) {
    if (plan_steps.empty()) fail(errc::empty_input, "no tasks");
    BenchmarkCost out;
    double n = static_cast<double>(plan_steps.size());
    for (auto& [plans, steps] : plan_steps) out.mean_exec += exec_cost(m, plans, steps);
    out.mean_exec /= n;
    out.rollout_term = m.n_rollout * out.mean_exec;
    out.verify_term = m.verify_multiplier * out.mean_exec;
    out.induce_term = m.induce_tokens;
    out.pre_per_task = m.pre_tokens / n;
    out.mean_total = out.rollout_term + out.verify_term + out.induce_term + out.pre_per_task;
    if (out.mean_exec <= 0.0) fail(errc::zero_tokens, "zero baseline execution cost");
    out.overhead_ratio = out.mean_total / out.mean_exec;
    return out;
}

// headline per-task cost plus a one-time cost spread over n tasks
inline double amortized_cost(double headline_per_task, double one_time, long long n_tasks) {
    if (n_tasks <= 0) fail(errc::config_invalid, "amortization needs a positive task count");
    if (headline_per_task < 0 || one_time < 0) fail(errc::negative_count, "costs");
    return headline_per_task + one_time / static_cast<double>(n_tasks);
}

// ------------------------------------------------------------ dollar pricing

struct ModelPrice {
    double cached = 0.0; // $ per 1M cached prompt tokens
    double input = 0.0;  // $ per 1M uncached prompt tokens
    double output = 0.0; // $ per 1M completion + reasoning tokens
};

using PriceTable = std::map<std::string, ModelPrice>;

struct DollarCost {
    double total = 0.0;
    double per_task = 0.0;
};

// Prices every row that carries model tokens. Cached prompt tokens bill at
// the cached rate, the remainder at the input rate.
inline DollarCost dollar_cost(const std::vector<TaskTrajectoryView>& tasks,
                              const PriceTable& prices) {
    if (tasks.empty()) fail(errc::empty_input, "no tasks");
    DollarCost out;
    auto price_row = [&](const LedgerEvent& e) {
        if (e.prompt_tokens == 0 && e.completion_tokens == 0 && e.reasoning_tokens == 0) return;
        auto it = prices.find(e.model);
        if (it == prices.end()) fail(errc::unknown_model, e.model.empty() ? "(blank)" : e.model);
        const ModelPrice& p = it->second;
        double c = static_cast<double>(e.cached_prompt_tokens) * p.cached +
                   static_cast<double>(e.prompt_tokens - e.cached_prompt_tokens) * p.input +
                   static_cast<double>(e.completion_tokens + e.reasoning_tokens) * p.output;
        out.total += c / 1e6;
    };
    for (const auto& t : tasks) {
        for (const auto& e : t.events) price_row(e);
        price_row(t.eval);
    }
    out.per_task = out.total / static_cast<double>(tasks.size());
    return out;
}

} // namespace skillforge
