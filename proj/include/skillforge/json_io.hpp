#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "costs.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "simulator.hpp"
#include "skill_io.hpp"
#include "skills.hpp"
#include "stats.hpp"

namespace skillforge {

using json = nlohmann::json;

namespace detail {

// Configs are rejected on unknown keys so typos fail loudly instead of
// silently falling back to defaults.
inline void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    if (!obj.is_object()) fail(errc::config_invalid, where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) fail(errc::config_invalid, where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(errc::config_invalid, std::string("bad value for '") + key + "'");
    }
}

inline std::vector<std::string> get_strings(const json& obj, const char* key) {
    std::vector<std::string> out;
    if (!obj.contains(key)) return out;
    if (!obj.at(key).is_array()) fail(errc::config_invalid, std::string(key) + " must be a list");
    for (auto& v : obj.at(key)) out.push_back(v.get<std::string>());
    return out;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(errc::config_invalid, path + ": " + e.what());
    }
    return j;
}

} // namespace detail

// ------------------------------------------------------------ skill library

inline RuleSkill json_to_rule(const json& j) {
    detail::require_keys(j, {"id", "predicate", "threshold", "sites", "priority", "body"}, "rule");
    RuleSkill r;
    r.id = detail::get_or<std::string>(j, "id", "");
    std::string pred = detail::get_or<std::string>(j, "predicate", "repeat_action");
    if (pred == "repeat_action") r.predicate = RulePredicate::repeat_action;
    else if (pred == "stale_page") r.predicate = RulePredicate::stale_page;
    else if (pred == "selector_rejected") r.predicate = RulePredicate::selector_rejected;
    else fail(errc::unknown_predicate, pred);
    r.threshold = detail::get_or<long long>(j, "threshold", 2);
    r.sites = detail::get_strings(j, "sites");
    std::string prio = detail::get_or<std::string>(j, "priority", "normal");
    if (prio == "high") r.priority = RulePriority::high;
    else if (prio == "normal") r.priority = RulePriority::normal;
    else if (prio == "low") r.priority = RulePriority::low;
    else fail(errc::config_invalid, "rule priority: " + prio);
    r.body = detail::get_or<std::string>(j, "body", "");
    validate_rule(r);
    return r;
}

inline RoutineSkill json_to_routine(const json& j) {
    detail::require_keys(
        j, {"id", "keywords", "url_glob", "polarity", "n_pass", "n_fail", "body", "pre", "post"},
        "routine");
    RoutineSkill r;
    r.id = detail::get_or<std::string>(j, "id", "");
    r.trigger_keywords = detail::get_strings(j, "keywords");
    r.url_glob = detail::get_or<std::string>(j, "url_glob", "*");
    if (j.contains("polarity")) {
        for (auto& v : j.at("polarity")) {
            detail::require_keys(v, {"dir", "keywords"}, "polarity variant");
            PolarityVariant pv;
            pv.dir = detail::get_or<std::string>(v, "dir", "");
            pv.keywords = detail::get_strings(v, "keywords");
            r.polarity.push_back(std::move(pv));
        }
    }
    r.stats.n_pass = detail::get_or<long long>(j, "n_pass", 0);
    r.stats.n_fail = detail::get_or<long long>(j, "n_fail", 0);
    r.body = detail::get_or<std::string>(j, "body", "");
    r.pre = detail::get_strings(j, "pre");
    r.post = detail::get_strings(j, "post");
    validate_routine(r);
    return r;
}

inline SkillLibrary json_to_library(const json& j) {
    detail::require_keys(j, {"rules", "routines", "demoted", "reflections"}, "library");
    SkillLibrary lib;
    if (j.contains("rules"))
        for (auto& r : j.at("rules")) lib.rules.push_back(json_to_rule(r));
    if (j.contains("routines"))
        for (auto& r : j.at("routines")) lib.routines.push_back(json_to_routine(r));
    if (j.contains("demoted")) {
        for (auto& d : j.at("demoted")) {
            detail::require_keys(d, {"id", "demoted_at", "reason", "keywords"}, "demoted entry");
            DemotionEntry e;
            e.id = detail::get_or<std::string>(d, "id", "");
            e.demoted_at = detail::get_or<std::string>(d, "demoted_at", "");
            e.reason = detail::get_or<std::string>(d, "reason", "");
            e.keywords = detail::get_strings(d, "keywords");
            lib.demoted.push_back(std::move(e));
        }
    }
    lib.reflections = detail::get_or<std::string>(j, "reflections", "");
    validate_library(lib);
    return lib;
}

// -------------------------------------------------------------- sim configs

inline TemplateSpec json_to_template(const json& j) {
    detail::require_keys(j,
                         {"id", "domain", "url", "keywords", "base_actions", "routine_savings",
                          "reliability", "fallback_p", "loopy", "weight", "candidate"},
                         "template");
    TemplateSpec t;
    t.id = detail::get_or<std::string>(j, "id", "");
    t.domain = detail::get_or<std::string>(j, "domain", "web");
    t.url = detail::get_or<std::string>(j, "url", "");
    t.keywords = detail::get_strings(j, "keywords");
    t.base_actions = detail::get_or<int>(j, "base_actions", 4);
    t.routine_savings = detail::get_or<int>(j, "routine_savings", 3);
    t.reliability = detail::get_or<double>(j, "reliability", 1.0);
    t.fallback_p = detail::get_or<double>(j, "fallback_p", 0.95);
    t.loopy = detail::get_or<bool>(j, "loopy", false);
    t.weight = detail::get_or<double>(j, "weight", 1.0);
    if (j.contains("candidate")) {
        const json& c = j.at("candidate");
        detail::require_keys(c, {"id", "url_glob", "body", "params", "pre", "post"}, "candidate");
        t.candidate_id = detail::get_or<std::string>(c, "id", "");
        t.candidate_url_glob = detail::get_or<std::string>(c, "url_glob", "*");
        t.candidate_body = detail::get_or<std::string>(c, "body", "");
        t.candidate_params = detail::get_strings(c, "params");
        t.candidate_pre = detail::get_strings(c, "pre");
        t.candidate_post = detail::get_strings(c, "post");
    }
    return t;
}

inline ScriptedSubgoal json_to_subgoal(const json& j) {
    detail::require_keys(j,
                         {"keywords", "url", "base_actions", "routine_savings", "loopy", "verified",
                          "reliability", "fallback_p", "routine_pass", "fallback_pass", "candidate"},
                         "subgoal");
    ScriptedSubgoal sg;
    sg.keywords = detail::get_strings(j, "keywords");
    sg.url = detail::get_or<std::string>(j, "url", "");
    sg.base_actions = detail::get_or<int>(j, "base_actions", 4);
    sg.routine_savings = detail::get_or<int>(j, "routine_savings", 3);
    sg.loopy = detail::get_or<bool>(j, "loopy", false);
    sg.verified = detail::get_or<bool>(j, "verified", true);
    sg.reliability = detail::get_or<double>(j, "reliability", 1.0);
    sg.fallback_p = detail::get_or<double>(j, "fallback_p", 1.0);
    if (j.contains("routine_pass")) sg.forced_routine_pass = j.at("routine_pass").get<bool>() ? 1 : 0;
    if (j.contains("fallback_pass"))
        sg.forced_fallback_pass = j.at("fallback_pass").get<bool>() ? 1 : 0;
    if (j.contains("candidate")) {
        const json& c = j.at("candidate");
        detail::require_keys(c, {"id", "url_glob", "body", "params", "pre", "post"}, "candidate");
        sg.candidate_id = detail::get_or<std::string>(c, "id", "");
        sg.candidate_url_glob = detail::get_or<std::string>(c, "url_glob", "*");
        sg.candidate_body = detail::get_or<std::string>(c, "body", "");
        sg.candidate_params = detail::get_strings(c, "params");
        sg.candidate_pre = detail::get_strings(c, "pre");
        sg.candidate_post = detail::get_strings(c, "post");
    }
    return sg;
}

struct ScenarioSpec {
    SimConfig config;
    std::optional<std::vector<SyntheticTask>> tasks; // scripted replay when present
};

inline ScenarioSpec parse_sim_config(const json& j) {
    detail::require_keys(
        j, {"seed",           "n_tasks",        "max_steps",       "k_reflect",
            "learning",       "rules_enabled",  "verify_subgoals", "infeasible_rate",
            "min_subgoals",   "max_subgoals",   "learn",           "templates",
            "seed_library",   "seed_library_dir", "stable_prefix_tokens", "per_skill_tokens",
            "volatile_tokens", "visual_tokens", "compression",     "beta_vis",
            "q_plan",         "q_reflect",      "q_act",           "llm_wall_ms",
            "action_wall_ms", "run_id",         "method",          "model_name",
            "today",          "tasks"},
        "config");
    ScenarioSpec spec;
    SimConfig& c = spec.config;
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    c.n_tasks = detail::get_or<int>(j, "n_tasks", c.n_tasks);
    c.max_steps = detail::get_or<int>(j, "max_steps", c.max_steps);
    c.k_reflect = detail::get_or<long long>(j, "k_reflect", c.k_reflect);
    c.learning = detail::get_or<bool>(j, "learning", c.learning);
    c.rules_enabled = detail::get_or<bool>(j, "rules_enabled", c.rules_enabled);
    c.verify_subgoals = detail::get_or<bool>(j, "verify_subgoals", c.verify_subgoals);
    c.infeasible_rate = detail::get_or<double>(j, "infeasible_rate", c.infeasible_rate);
    c.min_subgoals = detail::get_or<int>(j, "min_subgoals", c.min_subgoals);
    c.max_subgoals = detail::get_or<int>(j, "max_subgoals", c.max_subgoals);
    if (j.contains("learn")) {
        const json& l = j.at("learn");
        detail::require_keys(
            l, {"theta_demote", "min_invocations", "jaccard_threshold", "prior", "antonyms"},
            "learn");
        c.learn.theta_demote = detail::get_or<double>(l, "theta_demote", c.learn.theta_demote);
        c.learn.min_invocations =
            detail::get_or<long long>(l, "min_invocations", c.learn.min_invocations);
        c.learn.jaccard_threshold =
            detail::get_or<double>(l, "jaccard_threshold", c.learn.jaccard_threshold);
        c.learn.prior = detail::get_or<double>(l, "prior", c.learn.prior);
        if (l.contains("antonyms")) {
            c.learn.antonyms.clear();
            for (auto& p : l.at("antonyms")) {
                if (!p.is_array() || p.size() != 2)
                    fail(errc::config_invalid, "antonyms: expected [asc, desc] pairs");
                c.learn.antonyms.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
            }
        }
    }
    if (j.contains("templates"))
        for (auto& t : j.at("templates")) c.templates.push_back(json_to_template(t));
    if (j.contains("seed_library") && j.contains("seed_library_dir"))
        fail(errc::config_invalid, "give seed_library or seed_library_dir, not both");
    if (j.contains("seed_library")) c.seed_library = json_to_library(j.at("seed_library"));
    if (j.contains("seed_library_dir"))
        c.seed_library = load_library(j.at("seed_library_dir").get<std::string>());
    c.stable_prefix_tokens =
        detail::get_or<long long>(j, "stable_prefix_tokens", c.stable_prefix_tokens);
    c.per_skill_tokens = detail::get_or<long long>(j, "per_skill_tokens", c.per_skill_tokens);
    c.volatile_tokens = detail::get_or<long long>(j, "volatile_tokens", c.volatile_tokens);
    c.visual_tokens = detail::get_or<long long>(j, "visual_tokens", c.visual_tokens);
    c.compression = detail::get_or<bool>(j, "compression", c.compression);
    c.beta_vis = detail::get_or<double>(j, "beta_vis", c.beta_vis);
    c.q_plan = detail::get_or<long long>(j, "q_plan", c.q_plan);
    c.q_reflect = detail::get_or<long long>(j, "q_reflect", c.q_reflect);
    c.q_act = detail::get_or<long long>(j, "q_act", c.q_act);
    c.llm_wall_ms = detail::get_or<long long>(j, "llm_wall_ms", c.llm_wall_ms);
    c.action_wall_ms = detail::get_or<long long>(j, "action_wall_ms", c.action_wall_ms);
    c.run_id = detail::get_or<std::string>(j, "run_id", c.run_id);
    c.method = detail::get_or<std::string>(j, "method", c.method);
    c.model_name = detail::get_or<std::string>(j, "model_name", c.model_name);
    c.today = detail::get_or<std::string>(j, "today", c.today);
    if (j.contains("tasks")) {
        std::vector<SyntheticTask> tasks;
        int idx = 0;
        for (auto& t : j.at("tasks")) {
            detail::require_keys(t, {"task_id", "domain", "feasible", "subgoals"}, "task");
            SyntheticTask st;
            st.index = ++idx;
            st.task_id = detail::get_or<std::string>(t, "task_id", "");
            st.domain = detail::get_or<std::string>(t, "domain", "web");
            st.feasible = detail::get_or<bool>(t, "feasible", true);
            if (t.contains("subgoals"))
                for (auto& sg : t.at("subgoals")) st.subgoals.push_back(json_to_subgoal(sg));
            if (st.task_id.empty()) fail(errc::config_invalid, "scenario task without task_id");
            tasks.push_back(std::move(st));
        }
        spec.tasks = std::move(tasks);
        c.n_tasks = idx;
    }
    return spec;
}

inline ScenarioSpec load_sim_config(const std::string& path) {
    return parse_sim_config(detail::load_json_file(path));
}

// ------------------------------------------------------------- cost configs

inline CostModel parse_cost_model(const json& j) {
    detail::require_keys(j,
                         {"kappa_h", "kappa_l", "q_plan", "q_reflect", "q_act", "k_reflect",
                          "compression", "beta_vis", "n_rollout", "verify_multiplier",
                          "induce_tokens", "pre_tokens"},
                         "cost model");
    CostModel m;
    m.kappa_h = detail::get_or<double>(j, "kappa_h", m.kappa_h);
    m.kappa_l = detail::get_or<double>(j, "kappa_l", m.kappa_l);
    m.q_plan = detail::get_or<double>(j, "q_plan", m.q_plan);
    m.q_reflect = detail::get_or<double>(j, "q_reflect", m.q_reflect);
    m.q_act = detail::get_or<double>(j, "q_act", m.q_act);
    m.k_reflect = detail::get_or<long long>(j, "k_reflect", m.k_reflect);
    m.compression = detail::get_or<bool>(j, "compression", m.compression);
    m.beta_vis = detail::get_or<double>(j, "beta_vis", m.beta_vis);
    m.n_rollout = detail::get_or<double>(j, "n_rollout", m.n_rollout);
    m.verify_multiplier = detail::get_or<double>(j, "verify_multiplier", m.verify_multiplier);
    m.induce_tokens = detail::get_or<double>(j, "induce_tokens", m.induce_tokens);
    m.pre_tokens = detail::get_or<double>(j, "pre_tokens", m.pre_tokens);
    validate_cost_model(m);
    return m;
}

inline CostModel load_cost_model(const std::string& path) {
    return parse_cost_model(detail::load_json_file(path));
}

inline PriceTable parse_price_table(const json& j) {
    if (!j.is_object() || j.empty()) fail(errc::config_invalid, "price table must be a non-empty object");
    PriceTable t;
    for (auto it = j.begin(); it != j.end(); ++it) {
        detail::require_keys(it.value(), {"cached", "input", "output"}, "price entry " + it.key());
        ModelPrice p;
        p.cached = detail::get_or<double>(it.value(), "cached", 0.0);
        p.input = detail::get_or<double>(it.value(), "input", 0.0);
        p.output = detail::get_or<double>(it.value(), "output", 0.0);
        if (p.cached < 0 || p.input < 0 || p.output < 0)
            fail(errc::config_invalid, "negative price for " + it.key());
        t[it.key()] = p;
    }
    return t;
}

inline PriceTable load_price_table(const std::string& path) {
    return parse_price_table(detail::load_json_file(path));
}

// ----------------------------------------------------------------- reports

inline json metric_report_json(const MetricReport& r) {
    json j;
    j["n_tasks"] = r.n_tasks;
    j["success_rate_pct"] = r.success_rate;
    j["mean_steps"] = r.mean_steps;
    j["mean_tokens_k"] = r.mean_tokens_k;
    j["mean_time_s"] = r.mean_time_s;
    j["action_repeat_rate_pct"] = r.action_repeat_rate;
    j["skill_hit_rate_pct"] = r.skill_hit_rate;
    j["step_overhead"] = r.step_overhead ? json(*r.step_overhead) : json(nullptr);
    j["cache_utilization"] = r.cache_utilization ? json(*r.cache_utilization) : json(nullptr);
    return j;
}

inline json block_stats_json(const BlockStats& b, const std::vector<long long>& boundaries) {
    json j;
    j["boundaries"] = boundaries;
    j["blocks"] = json::array();
    for (auto& blk : b.blocks) j["blocks"].push_back(metric_report_json(blk));
    j["overall"] = metric_report_json(b.overall);
    return j;
}

inline json interval_json(const Interval& iv) {
    return json{{"point", iv.point}, {"lo", iv.lo}, {"hi", iv.hi}};
}

inline json comparison_json(const PairedComparison& c) {
    json j;
    j["sr_a"] = interval_json(c.bootstrap.a);
    j["sr_b"] = interval_json(c.bootstrap.b);
    j["delta"] = interval_json(c.bootstrap.diff);
    j["iterations"] = c.bootstrap.iterations;
    j["seed"] = c.bootstrap.seed;
    j["alpha"] = c.bootstrap.alpha;
    j["n11"] = c.n11;
    j["n10"] = c.n10;
    j["n01"] = c.n01;
    j["n00"] = c.n00;
    j["mcnemar_p"] = c.mcnemar_p;
    return j;
}

inline json benchmark_cost_json(const BenchmarkCost& b) {
    json j;
    j["rollout_term"] = b.rollout_term;
    j["verify_term"] = b.verify_term;
    j["induce_term"] = b.induce_term;
    j["pre_per_task"] = b.pre_per_task;
    j["mean_total"] = b.mean_total;
    j["mean_exec"] = b.mean_exec;
    j["overhead_ratio"] = b.overhead_ratio;
    return j;
}

inline json evolution_json(const LibraryEvolution& ev) {
    json j;
    j["seed_routines"] = ev.seed_routines;
    j["induced"] = ev.induced;
    j["demoted"] = ev.demoted;
    j["active"] = ev.active;
    j["polarity_pairs"] = ev.polarity_pairs;
    return j;
}

inline json library_inspect_json(const SkillLibrary& lib) {
    json j;
    j["rules"] = json::array();
    for (auto& r : lib.rules) {
        json e;
        e["id"] = r.id;
        e["pattern"] = rule_pattern_text(r);
        e["sites"] = r.sites;
        e["priority"] = priority_name(r.priority);
        j["rules"].push_back(e);
    }
    j["routines"] = json::array();
    for (auto& r : lib.routines) {
        json e;
        e["id"] = r.id;
        e["keywords"] = r.trigger_keywords;
        e["url_glob"] = r.url_glob;
        e["n_pass"] = r.stats.n_pass;
        e["n_fail"] = r.stats.n_fail;
        e["confidence"] = confidence(r.stats);
        e["polarity"] = json::array();
        for (auto& v : r.polarity)
            e["polarity"].push_back(json{{"dir", v.dir}, {"keywords", v.keywords}});
        j["routines"].push_back(e);
    }
    j["demoted"] = json::array();
    for (auto& d : lib.demoted) {
        j["demoted"].push_back(json{
            {"id", d.id}, {"demoted_at", d.demoted_at}, {"reason", d.reason}, {"keywords", d.keywords}});
    }
    return j;
}

} // namespace skillforge
