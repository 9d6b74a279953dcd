// Operator CLI: analyze ledgers, run simulations, compare runs, price costs
// and inspect skill libraries. Every command is a thin shell over the library
// headers; numeric output comes straight from the module calls.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "skillforge/skillforge.hpp"

namespace sf = skillforge;
using json = sf::json;

namespace {

// 0 ok, 1 validation, 2 I/O, 3 statistical precondition
int exit_code_for(sf::errc c) {
    switch (c) {
        case sf::errc::io_error:
            return 2;
        case sf::errc::empty_input:
        case sf::errc::degenerate_cohort:
        case sf::errc::zero_tokens:
        case sf::errc::no_llm_calls:
        case sf::errc::bad_partition:
        case sf::errc::length_mismatch:
            return 3;
        default:
            return 1;
    }
}

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::vector<sf::TaskTrajectoryView> load_ledger(const std::string& path) {
    std::ifstream in(path);
    if (!in) sf::fail(sf::errc::io_error, "cannot open " + path);
    return sf::read_tasks(in);
}

std::string default_library_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SKILLFORGE_LIBRARY_DIR"); env && *env) return env;
    return "skills";
}

std::vector<long long> parse_blocks(const std::string& spec) {
    std::vector<long long> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = sf::trim(item);
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            sf::fail(sf::errc::config_invalid, "--blocks expects comma-separated integers");
        out.push_back(std::atoll(item.c_str()));
    }
    return out;
}

void print_report(const sf::MetricReport& r, const std::string& label) {
    std::cout << label << ": n=" << r.n_tasks << " sr=" << fmt(r.success_rate, 1) << "%"
              << " steps=" << fmt(r.mean_steps, 2) << " tokens_k=" << fmt(r.mean_tokens_k, 2)
              << " time_s=" << fmt(r.mean_time_s, 2) << " arr=" << fmt(r.action_repeat_rate, 1)
              << "%"
              << " sor=" << (r.step_overhead ? fmt(*r.step_overhead, 2) : std::string("n/a"))
              << " cache_u=" << (r.cache_utilization ? fmt(*r.cache_utilization, 2) : std::string("n/a"))
              << " skill_hit=" << fmt(r.skill_hit_rate, 1) << "%\n";
}

// ----------------------------------------------------------------- analyze

int cmd_analyze(const std::string& ledger, const std::string& blocks, bool as_json) {
    auto tasks = load_ledger(ledger);
    if (blocks.empty()) {
        auto rep = sf::build_report(tasks);
        if (as_json) std::cout << sf::metric_report_json(rep).dump(2) << "\n";
        else print_report(rep, "overall");
        return 0;
    }
    auto bounds = parse_blocks(blocks);
    auto bs = sf::block_stats(tasks, bounds);
    if (as_json) {
        std::cout << sf::block_stats_json(bs, bounds).dump(2) << "\n";
        return 0;
    }
    long long lo = 1;
    for (size_t i = 0; i < bs.blocks.size(); ++i) {
        print_report(bs.blocks[i],
                     "tasks " + std::to_string(lo) + "-" + std::to_string(bounds[i]));
        lo = bounds[i] + 1;
    }
    print_report(bs.overall, "overall");
    return 0;
}

// ---------------------------------------------------------------- simulate

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) sf::fail(sf::errc::io_error, "cannot write " + path);
    out << content;
}

int cmd_simulate(const std::string& config_path, const std::string& scenario_path,
                 std::uint64_t seed, bool seed_set, int n_tasks, const std::string& ledger_out,
                 const std::string& library_flag, int workers, bool as_json) {
    if (config_path.empty() == scenario_path.empty())
        sf::fail(sf::errc::config_invalid, "give exactly one of --config or --scenario");
    sf::ScenarioSpec spec =
        sf::load_sim_config(config_path.empty() ? scenario_path : config_path);
    if (!config_path.empty() && spec.tasks)
        sf::fail(sf::errc::config_invalid, "--config file contains a task script; use --scenario");
    if (scenario_path.empty() == bool(spec.tasks))
        sf::fail(sf::errc::config_invalid, "--scenario file needs a tasks list");
    if (seed_set) spec.config.seed = seed;
    if (n_tasks > 0) spec.config.n_tasks = n_tasks;
    std::string library_dir = default_library_dir(library_flag);

    std::vector<sf::SyntheticTask> tasks =
        spec.tasks ? *spec.tasks : sf::generate_stream(spec.config);

    if (workers > 1) {
        auto par = sf::run_parallel(spec.config, tasks, workers, library_dir);
        std::string stem = ledger_out;
        if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv")
            stem = stem.substr(0, stem.size() - 4);
        json j;
        j["workers"] = workers;
        j["ledgers"] = json::array();
        for (auto& w : par.workers) {
            std::string path = stem + "-" + w.run_id + ".csv";
            write_text_file(path, w.csv());
            j["ledgers"].push_back(path);
        }
        sf::LibraryEvolution ev;
        ev.seed_routines = static_cast<long long>(spec.config.seed_library.routines.size());
        ev.induced = par.admits - par.merges;
        ev.demoted = par.demotes;
        ev.active = static_cast<long long>(par.final_library.routines.size());
        ev.polarity_pairs = par.merges;
        j["library"] = sf::evolution_json(ev);
        if (as_json) {
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << "workers=" << workers << " tasks=" << tasks.size() << "\n";
            std::cout << "library: seed=" << ev.seed_routines << " induced=" << ev.induced
                      << " demoted=" << ev.demoted << " active=" << ev.active
                      << " pairs=" << ev.polarity_pairs << "\n";
        }
        return 0;
    }

    auto res = sf::run_stream(spec.config, tasks);
    write_text_file(ledger_out, res.csv());
    {
        sf::LibraryLock lock(library_dir);
        sf::save_library(library_dir, res.library);
    }
    auto views = sf::read_tasks(res.rows);
    long long n = static_cast<long long>(views.size());
    std::vector<long long> bounds;
    for (long long q = 1; q <= 4; ++q) bounds.push_back(n * q / 4);
    std::vector<long long> uniq;
    for (long long b : bounds)
        if (uniq.empty() || b > uniq.back()) uniq.push_back(b);
    auto bs = sf::block_stats(views, uniq);
    auto ev = sf::library_evolution(res);
    if (as_json) {
        json j = sf::block_stats_json(bs, uniq);
        j["library"] = sf::evolution_json(ev);
        j["ledger"] = ledger_out;
        j["library_dir"] = library_dir;
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    long long lo = 1;
    for (size_t i = 0; i < bs.blocks.size(); ++i) {
        print_report(bs.blocks[i], "tasks " + std::to_string(lo) + "-" + std::to_string(uniq[i]));
        lo = uniq[i] + 1;
    }
    print_report(bs.overall, "overall");
    std::cout << "library: seed=" << ev.seed_routines << " induced=" << ev.induced
              << " demoted=" << ev.demoted << " active=" << ev.active
              << " pairs=" << ev.polarity_pairs << "\n";
    std::cout << "ledger written to " << ledger_out << ", library to " << library_dir << "\n";
    return 0;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const std::string& ledger_a, const std::string& ledger_b, int iters,
                std::uint64_t seed, double alpha, bool as_json) {
    auto ta = load_ledger(ledger_a);
    auto tb = load_ledger(ledger_b);
    std::map<std::string, int> ma, mb;
    for (auto& t : ta) ma[t.task_id] = t.success() ? 1 : 0;
    for (auto& t : tb) mb[t.task_id] = t.success() ? 1 : 0;
    if (ma.size() != ta.size() || mb.size() != tb.size())
        sf::fail(sf::errc::invariant_violation, "duplicate task ids within a ledger");
    if (ma.size() != mb.size())
        sf::fail(sf::errc::length_mismatch, "ledgers cover different task counts");
    std::vector<int> a, b;
    for (auto& [id, v] : ma) {
        auto it = mb.find(id);
        if (it == mb.end())
            sf::fail(sf::errc::length_mismatch, "task " + id + " missing from second ledger");
        a.push_back(v);
        b.push_back(it->second);
    }
    auto cmp = sf::compare_outcomes(a, b, iters, seed, alpha);
    if (as_json) {
        std::cout << sf::comparison_json(cmp).dump(2) << "\n";
        return 0;
    }
    auto iv = [&](const sf::Interval& i) {
        return fmt(i.point, 2) + "% [" + fmt(i.lo, 2) + ", " + fmt(i.hi, 2) + "]";
    };
    std::cout << "sr_a=" << iv(cmp.bootstrap.a) << " sr_b=" << iv(cmp.bootstrap.b)
              << " delta=" << iv(cmp.bootstrap.diff) << " mcnemar_p=" << fmt(cmp.mcnemar_p, 6)
              << "\n";
    std::cout << "discordant: a_only=" << cmp.n10 << " b_only=" << cmp.n01
              << " (n11=" << cmp.n11 << ", n00=" << cmp.n00 << ")\n";
    return 0;
}

// -------------------------------------------------------------------- cost

int cmd_cost(const std::string& ledger, const std::string& model_path,
             const std::string& prices_path, double one_time, long long amortize_n,
             bool as_json) {
    auto tasks = load_ledger(ledger);
    sf::CostModel model = sf::load_cost_model(model_path);
    std::vector<std::pair<long long, long long>> plan_steps;
    for (auto& t : tasks) {
        long long plans = 0, steps = 0;
        for (auto& e : t.events) {
            if (e.event_type == "planner") ++plans;
            if (e.event_type == "action" || e.event_type == "routine") ++steps;
        }
        plan_steps.emplace_back(plans, steps);
    }
    auto bench = sf::benchmark_cost(model, plan_steps);
    auto rep = sf::build_report(tasks);
    double eta = sf::token_efficiency(rep.success_rate, rep.mean_tokens_k);

    json j = sf::benchmark_cost_json(bench);
    j["eta"] = eta;
    if (!prices_path.empty()) {
        auto prices = sf::load_price_table(prices_path);
        auto dollars = sf::dollar_cost(tasks, prices);
        long long n = amortize_n > 0 ? amortize_n : rep.n_tasks;
        double amortized = sf::amortized_cost(dollars.per_task, one_time, n);
        j["dollars_per_task"] = dollars.per_task;
        j["dollars_total"] = dollars.total;
        j["one_time_dollars"] = one_time;
        j["amortize_n"] = n;
        j["amortized_per_task"] = amortized;
    }
    if (as_json) {
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "token terms per task: rollout=" << fmt(bench.rollout_term, 2)
              << " verify=" << fmt(bench.verify_term, 2) << " induce=" << fmt(bench.induce_term, 2)
              << " pre=" << fmt(bench.pre_per_task, 2) << " total=" << fmt(bench.mean_total, 2)
              << "\n";
    std::cout << "overhead ratio rho=" << fmt(bench.overhead_ratio, 2)
              << " token_efficiency eta=" << fmt(eta, 3) << "\n";
    if (j.contains("dollars_per_task")) {
        std::cout << "dollars/task=" << fmt(j["dollars_per_task"].get<double>(), 3)
                  << " amortized/task=" << fmt(j["amortized_per_task"].get<double>(), 3) << " (over "
                  << j["amortize_n"].get<long long>() << " tasks, one-time "
                  << fmt(one_time, 3) << ")\n";
    }
    return 0;
}

// ----------------------------------------------------------------- library

int cmd_library(const std::string& dir_flag, bool validate_only, bool as_json) {
    std::string dir = default_library_dir(dir_flag);
    if (!std::filesystem::exists(dir)) sf::fail(sf::errc::io_error, "no such directory: " + dir);
    sf::SkillLibrary lib = sf::load_library(dir);
    if (validate_only) {
        std::cout << "ok: " << lib.rules.size() << " rules, " << lib.routines.size()
                  << " routines, " << lib.demoted.size() << " blacklist entries\n";
        return 0;
    }
    if (as_json) {
        std::cout << sf::library_inspect_json(lib).dump(2) << "\n";
        return 0;
    }
    for (auto& r : lib.rules)
        std::cout << "rule " << r.id << " [" << sf::priority_name(r.priority)
                  << "] pattern: " << sf::rule_pattern_text(r) << "\n";
    for (auto& r : lib.routines) {
        std::cout << "routine " << r.id << " confidence=" << fmt(sf::confidence(r.stats), 2) << " ("
                  << r.stats.n_pass << "/" << r.stats.invocations() << ")"
                  << " keywords=" << sf::join(r.trigger_keywords, "; ");
        if (r.has_polarity())
            std::cout << " polarity=" << r.polarity[0].dir << "|" << r.polarity[1].dir;
        std::cout << "\n";
    }
    for (auto& d : lib.demoted)
        std::cout << "demoted " << d.id << " (" << d.demoted_at << "): " << d.reason << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"skill library lifecycle toolkit"};
    app.require_subcommand(1);

    std::string ledger, blocks, config_path, scenario_path, library_dir, ledger_out = "ledger.csv";
    std::string ledger_b, model_path, prices_path;
    bool as_json = false, validate_only = false;
    std::uint64_t seed = 7;
    int iters = 1000, workers = 1, n_tasks = 0;
    double alpha = 0.05, one_time = 0.0;
    long long amortize_n = 0;

    auto* analyze = app.add_subcommand("analyze", "metrics over a trajectory ledger");
    analyze->add_option("--ledger", ledger, "ledger CSV path")->required();
    analyze->add_option("--blocks", blocks, "cumulative block boundaries, e.g. 100,300,600,910");
    analyze->add_flag("--json", as_json, "machine-readable output");

    auto* simulate = app.add_subcommand("simulate", "run the mock-agent simulator");
    simulate->add_option("--config", config_path, "simulation config (JSON)");
    simulate->add_option("--scenario", scenario_path, "scripted scenario file (JSON)");
    auto* seed_opt = simulate->add_option("--seed", seed, "override stream seed");
    simulate->add_option("--tasks", n_tasks, "override task count");
    simulate->add_option("--ledger", ledger_out, "output ledger path");
    simulate->add_option("--library", library_dir, "library directory (or SKILLFORGE_LIBRARY_DIR)");
    simulate->add_option("--workers", workers, "parallel workers sharing the library");
    simulate->add_flag("--json", as_json, "machine-readable output");

    auto* compare = app.add_subcommand("compare", "paired bootstrap + exact McNemar");
    compare->add_option("--ledger-a", ledger, "first ledger")->required();
    compare->add_option("--ledger-b", ledger_b, "second ledger")->required();
    compare->add_option("--iters", iters, "bootstrap replicates");
    compare->add_option("--seed", seed, "bootstrap seed");
    compare->add_option("--alpha", alpha, "interval alpha");
    compare->add_flag("--json", as_json, "machine-readable output");

    auto* cost = app.add_subcommand("cost", "token cost identity and dollar pricing");
    cost->add_option("--ledger", ledger, "ledger CSV path")->required();
    cost->add_option("--cost-model", model_path, "cost model JSON")->required();
    cost->add_option("--prices", prices_path, "price table JSON");
    cost->add_option("--one-time", one_time, "one-time dollar cost to amortize");
    cost->add_option("--amortize-n", amortize_n, "task count for amortization");
    cost->add_flag("--json", as_json, "machine-readable output");

    auto* library = app.add_subcommand("library", "inspect or validate a library directory");
    library->add_option("--dir", library_dir, "library directory (or SKILLFORGE_LIBRARY_DIR)");
    library->add_flag("--validate", validate_only, "schema check only");
    library->add_flag("--json", as_json, "machine-readable output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(analyze)) return cmd_analyze(ledger, blocks, as_json);
        if (app.got_subcommand(simulate))
            return cmd_simulate(config_path, scenario_path, seed, seed_opt->count() > 0, n_tasks,
                                ledger_out, library_dir, workers, as_json);
        if (app.got_subcommand(compare))
            return cmd_compare(ledger, ledger_b, iters, seed, alpha, as_json);
        if (app.got_subcommand(cost))
            return cmd_cost(ledger, model_path, prices_path, one_time, amortize_n, as_json);
        if (app.got_subcommand(library)) return cmd_library(library_dir, validate_only, as_json);
    } catch (const sf::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
