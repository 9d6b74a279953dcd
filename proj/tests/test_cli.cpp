#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixture_gen.hpp"
#include "skillforge/json_io.hpp"
#include "skillforge/metrics.hpp"

namespace sf = skillforge;
using json = sf::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the installed binary through the shell; args must not contain quotes.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const char* bin = SKILLFORGE_CLI_PATH;
    static fixtures::TempDir io;
    static int n = 0;
    auto out_path = io.path() / ("out" + std::to_string(n));
    auto err_path = io.path() / ("err" + std::to_string(n));
    ++n;
    std::string cmd = env_prefix + "\"" + bin + "\" " + args + " > \"" + out_path.string() +
                      "\" 2> \"" + err_path.string() + "\"";
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

std::string config_path(const char* name) {
    return std::string(SKILLFORGE_CONFIG_DIR) + "/" + name;
}

// Tiny two-row tasks (planner + eval) for outcome-level comparisons.
void write_outcome_ledger(const std::filesystem::path& path, const std::string& run_id,
                          const std::vector<std::pair<std::string, int>>& outcomes) {
    std::ofstream f(path, std::ios::binary);
    sf::LedgerWriter w(f);
    for (auto& [id, success] : outcomes) {
        sf::LedgerEvent p;
        p.run_id = run_id;
        p.task_id = id;
        p.step_idx = 0;
        p.event_type = "planner";
        p.model = "sim-llm";
        p.prompt_tokens = 10;
        p.completion_tokens = 2;
        p.wall_time_ms = 5;
        w.append_event(p);
        sf::LedgerEvent e;
        e.run_id = run_id;
        e.task_id = id;
        e.step_idx = 1;
        e.event_type = "eval";
        e.evaluator_status = success ? "success" : "fail";
        w.append_event(e);
    }
}

} // namespace

TEST_CASE("analyze matches the module output", "[cli]") {
    fixtures::TempDir dir;
    auto csv = dir.path() / "bench.csv";
    fixtures::write_stream_csv(csv);
    auto tasks = sf::read_tasks(fixtures::stream_events());

    auto res = run_cli("analyze --ledger " + csv.string() + " --json");
    REQUIRE(res.code == 0);
    CHECK(json::parse(res.out) == sf::metric_report_json(sf::build_report(tasks)));

    res = run_cli("analyze --ledger " + csv.string() + " --blocks 100,300,600,910 --json");
    REQUIRE(res.code == 0);
    json j = json::parse(res.out);
    CHECK(j["boundaries"] == json::array({100, 300, 600, 910}));
    fixtures::StreamExpectations want;
    REQUIRE(j["blocks"].size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(j["blocks"][i]["success_rate_pct"].get<double>() ==
              Catch::Approx(want.block_sr[i]).margin(1e-9));
        CHECK(j["blocks"][i]["mean_steps"].get<double>() ==
              Catch::Approx(want.block_steps[i]).margin(1e-9));
    }
    CHECK(j["overall"]["success_rate_pct"].get<double>() == Catch::Approx(want.sr).margin(1e-9));

    res = run_cli("analyze --ledger " + csv.string());
    REQUIRE(res.code == 0);
    CHECK(res.out ==
          "overall: n=910 sr=58.4% steps=9.31 tokens_k=114.98 time_s=240.00 arr=9.1% "
          "sor=1.80 cache_u=0.72 skill_hit=44.7%\n");
}

TEST_CASE("analyze exit codes", "[cli]") {
    fixtures::TempDir dir;
    CHECK(run_cli("analyze --ledger " + (dir.path() / "nope.csv").string()).code == 2);

    auto bad = dir.path() / "bad.csv";
    std::ofstream(bad) << "not,a,ledger\n1,2\n";
    CHECK(run_cli("analyze --ledger " + bad.string()).code == 1);

    auto empty = dir.path() / "empty.csv";
    sf::write_file(empty, "");
    CHECK(run_cli("analyze --ledger " + empty.string()).code == 3);

    auto csv = dir.path() / "bench.csv";
    fixtures::write_stream_csv(csv);
    CHECK(run_cli("analyze --ledger " + csv.string() + " --blocks 50").code == 3);
    CHECK(run_cli("analyze --ledger " + csv.string() + " --blocks abc").code == 1);
}

TEST_CASE("simulate runs scripted scenarios deterministically", "[cli]") {
    fixtures::TempDir dir;
    auto ledger1 = dir.path() / "a.csv";
    auto ledger2 = dir.path() / "b.csv";
    auto lib1 = dir.path() / "lib1";
    auto lib2 = dir.path() / "lib2";
    std::string scenario = config_path("lifecycle_demo.json");

    auto res = run_cli("simulate --scenario " + scenario + " --ledger " + ledger1.string() +
                       " --library " + lib1.string());
    REQUIRE(res.code == 0);
    CHECK(res.out.find("library: seed=1 induced=1 demoted=1 active=1 pairs=1") !=
          std::string::npos);
    CHECK(res.out.find("ledger written to " + ledger1.string()) != std::string::npos);

    std::ifstream in(ledger1);
    auto tasks = sf::read_tasks(in);
    REQUIRE(tasks.size() == 30);
    for (auto& t : tasks) CHECK(t.success());

    auto lib = sf::load_library(lib1);
    REQUIRE(lib.routines.size() == 1);
    CHECK(lib.routines[0].id == "sort_by_price");
    REQUIRE(lib.demoted.size() == 1);
    CHECK(lib.demoted[0].reason == "fail_ratio=0.62 over 8 invocations");

    auto res2 = run_cli("simulate --scenario " + scenario + " --ledger " + ledger2.string() +
                        " --library " + lib2.string());
    REQUIRE(res2.code == 0);
    CHECK(slurp(ledger1) == slurp(ledger2));
}

TEST_CASE("simulate separates configs from scenarios", "[cli]") {
    fixtures::TempDir dir;
    std::string tail = " --ledger " + (dir.path() / "x.csv").string() + " --library " +
                       (dir.path() / "lib").string();
    // a task script under --config, and a template config under --scenario
    CHECK(run_cli("simulate --config " + config_path("lifecycle_demo.json") + tail).code == 1);
    CHECK(run_cli("simulate --scenario " + config_path("stream_learning.json") + tail).code == 1);
    CHECK(run_cli("simulate" + tail).code == 1); // neither flag
    CHECK(run_cli("simulate --config " + config_path("stream_learning.json") + " --scenario " +
                  config_path("lifecycle_demo.json") + tail)
              .code == 1);
}

TEST_CASE("simulate --config generates streams; seed and task overrides apply", "[cli]") {
    fixtures::TempDir dir;
    std::string cfg = config_path("stream_learning.json");
    auto mk = [&](const std::string& name, const std::string& extra) {
        auto ledger = dir.path() / (name + ".csv");
        auto res = run_cli("simulate --config " + cfg + " --tasks 30 --ledger " + ledger.string() +
                           " --library " + (dir.path() / ("lib_" + name)).string() + extra);
        REQUIRE(res.code == 0);
        return slurp(ledger);
    };
    std::string base = mk("base", "");
    std::string seed1 = mk("seed1", " --seed 1"); // config already says seed 1
    std::string seed99 = mk("seed99", " --seed 99");
    CHECK(base == seed1);
    CHECK(base != seed99);

    std::ifstream in(dir.path() / "base.csv");
    CHECK(sf::read_tasks(in).size() == 30);
}

TEST_CASE("simulate --json reports blocks and library evolution", "[cli]") {
    fixtures::TempDir dir;
    auto ledger = dir.path() / "out.csv";
    auto res = run_cli("simulate --config " + config_path("stream_learning.json") +
                       " --tasks 24 --ledger " + ledger.string() + " --library " +
                       (dir.path() / "lib").string() + " --json");
    REQUIRE(res.code == 0);
    json j = json::parse(res.out);
    CHECK(j["boundaries"] == json::array({6, 12, 18, 24}));
    CHECK(j["blocks"].size() == 4);
    CHECK(j["library"]["active"].get<long long>() >= 1);
    CHECK(j["library"]["induced"].get<long long>() >= 1);
    CHECK(j["ledger"] == ledger.string());
}

TEST_CASE("compare on identical and shifted ledgers", "[cli]") {
    fixtures::TempDir dir;
    auto a = dir.path() / "a.csv";
    auto b = dir.path() / "b.csv";
    write_outcome_ledger(a, "runa",
                         {{"t1", 1}, {"t2", 1}, {"t3", 1}, {"t4", 0}, {"t5", 1}, {"t6", 0}});
    write_outcome_ledger(b, "runb",
                         {{"t1", 1}, {"t2", 0}, {"t3", 1}, {"t4", 0}, {"t5", 1}, {"t6", 0}});

    auto res = run_cli("compare --ledger-a " + a.string() + " --ledger-b " + a.string() + " --json");
    REQUIRE(res.code == 0);
    json j = json::parse(res.out);
    CHECK(j["delta"]["point"].get<double>() == 0.0);
    CHECK(j["delta"]["lo"].get<double>() == 0.0);
    CHECK(j["delta"]["hi"].get<double>() == 0.0);
    CHECK(j["mcnemar_p"].get<double>() == 1.0);
    CHECK(j["n10"].get<long long>() == 0);
    CHECK(j["n01"].get<long long>() == 0);

    res = run_cli("compare --ledger-a " + a.string() + " --ledger-b " + b.string());
    REQUIRE(res.code == 0);
    CHECK(res.out.find("sr_a=66.67%") != std::string::npos);
    CHECK(res.out.find("sr_b=50.00%") != std::string::npos);
    CHECK(res.out.find("mcnemar_p=1.000000") != std::string::npos);
    CHECK(res.out.find("discordant: a_only=1 b_only=0 (n11=3, n00=2)") != std::string::npos);
}

TEST_CASE("compare rejects unpaired ledgers", "[cli]") {
    fixtures::TempDir dir;
    auto a = dir.path() / "a.csv";
    auto short_b = dir.path() / "short.csv";
    auto disjoint = dir.path() / "disjoint.csv";
    auto dup = dir.path() / "dup.csv";
    write_outcome_ledger(a, "runa", {{"t1", 1}, {"t2", 0}, {"t3", 1}});
    write_outcome_ledger(short_b, "runb", {{"t1", 1}, {"t2", 0}});
    write_outcome_ledger(disjoint, "runb", {{"x1", 1}, {"x2", 0}, {"x3", 1}});
    // same task ids under two run ids: ambiguous pairing within one file
    {
        std::ofstream f(dup, std::ios::binary);
        sf::LedgerWriter w(f);
        for (const char* rid : {"r1", "r2"}) {
            sf::LedgerEvent e;
            e.run_id = rid;
            e.task_id = "t1";
            e.step_idx = 0;
            e.event_type = "eval";
            e.evaluator_status = "success";
            w.append_event(e);
        }
    }
    CHECK(run_cli("compare --ledger-a " + a.string() + " --ledger-b " + short_b.string()).code == 3);
    CHECK(run_cli("compare --ledger-a " + a.string() + " --ledger-b " + disjoint.string()).code ==
          3);
    CHECK(run_cli("compare --ledger-a " + dup.string() + " --ledger-b " + a.string()).code == 1);
    CHECK(run_cli("compare --ledger-a " + a.string() + " --ledger-b missing.csv").code == 2);
}

TEST_CASE("cost reproduces the module's decomposition and pricing", "[cli]") {
    fixtures::TempDir dir;
    auto csv = dir.path() / "bench.csv";
    fixtures::write_stream_csv(csv);
    auto tasks = sf::read_tasks(fixtures::stream_events());

    auto res = run_cli("cost --ledger " + csv.string() + " --cost-model " +
                       config_path("cost_model.json") + " --json");
    REQUIRE(res.code == 0);
    json j = json::parse(res.out);

    // recompute through the modules on the same rows
    auto model = sf::load_cost_model(config_path("cost_model.json"));
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
    CHECK(j["mean_exec"].get<double>() == Catch::Approx(bench.mean_exec).margin(1e-9));
    CHECK(j["mean_total"].get<double>() == Catch::Approx(bench.mean_total).margin(1e-9));
    double four = j["rollout_term"].get<double>() + j["verify_term"].get<double>() +
                  j["induce_term"].get<double>() + j["pre_per_task"].get<double>();
    CHECK(j["mean_total"].get<double>() == Catch::Approx(four).margin(1e-9));
    CHECK(j["overhead_ratio"].get<double>() ==
          Catch::Approx(j["mean_total"].get<double>() / j["mean_exec"].get<double>()).margin(1e-12));

    auto rep = sf::build_report(tasks);
    CHECK(j["eta"].get<double>() ==
          Catch::Approx(rep.success_rate / rep.mean_tokens_k).margin(1e-9));

    res = run_cli("cost --ledger " + csv.string() + " --cost-model " +
                  config_path("cost_model.json") + " --prices " + config_path("prices.json") +
                  " --one-time 43.7 --amortize-n 30 --json");
    REQUIRE(res.code == 0);
    j = json::parse(res.out);
    auto dollars = sf::dollar_cost(tasks, sf::load_price_table(config_path("prices.json")));
    CHECK(j["dollars_per_task"].get<double>() == Catch::Approx(dollars.per_task).margin(1e-12));
    CHECK(j["dollars_total"].get<double>() == Catch::Approx(dollars.total).margin(1e-12));
    CHECK(j["amortize_n"].get<long long>() == 30);
    CHECK(j["amortized_per_task"].get<double>() ==
          Catch::Approx(dollars.per_task + 43.7 / 30.0).margin(1e-12));

    res = run_cli("cost --ledger " + csv.string() + " --cost-model " +
                  config_path("cost_model.json"));
    REQUIRE(res.code == 0);
    CHECK(res.out.find("overhead ratio rho=") != std::string::npos);
    CHECK(res.out.find("token_efficiency eta=") != std::string::npos);
}

TEST_CASE("cost exit codes", "[cli]") {
    fixtures::TempDir dir;
    auto csv = dir.path() / "bench.csv";
    fixtures::write_stream_csv(csv);

    CHECK(run_cli("cost --ledger " + csv.string() + " --cost-model nope.json").code == 2);

    auto empty = dir.path() / "empty.csv";
    {
        std::ofstream f(empty, std::ios::binary);
        sf::LedgerWriter w(f);
    }
    CHECK(run_cli("cost --ledger " + empty.string() + " --cost-model " +
                  config_path("cost_model.json"))
              .code == 3);

    // a tokened row on a model absent from the price table
    auto mystery = dir.path() / "mystery.csv";
    {
        std::ofstream f(mystery, std::ios::binary);
        sf::LedgerWriter w(f);
        sf::LedgerEvent p;
        p.run_id = "r";
        p.task_id = "t1";
        p.step_idx = 0;
        p.event_type = "planner";
        p.model = "mystery";
        p.prompt_tokens = 10;
        p.completion_tokens = 2;
        w.append_event(p);
        sf::LedgerEvent e;
        e.run_id = "r";
        e.task_id = "t1";
        e.step_idx = 1;
        e.event_type = "eval";
        e.evaluator_status = "success";
        w.append_event(e);
    }
    CHECK(run_cli("cost --ledger " + mystery.string() + " --cost-model " +
                  config_path("cost_model.json") + " --prices " + config_path("prices.json"))
              .code == 1);
    CHECK(run_cli("cost --ledger " + mystery.string() + " --cost-model " +
                  config_path("cost_model.json"))
              .code == 0);
}

TEST_CASE("library inspection and validation", "[cli]") {
    fixtures::TempDir dir;
    auto lib = dir.path() / "lib";
    fixtures::write_sample_library(lib);

    auto res = run_cli("library --dir " + lib.string() + " --validate");
    REQUIRE(res.code == 0);
    CHECK(res.out == "ok: 1 rules, 1 routines, 2 blacklist entries\n");

    res = run_cli("library --dir " + lib.string() + " --json");
    REQUIRE(res.code == 0);
    json j = json::parse(res.out);
    CHECK(j["rules"][0]["id"] == "repeat_click_same_element");
    CHECK(j["routines"][0]["id"] == "sort_by_attribute");
    CHECK(j["routines"][0]["confidence"].get<double>() == Catch::Approx(0.94).margin(1e-12));
    CHECK(j["demoted"].size() == 2);

    res = run_cli("library --dir " + lib.string());
    REQUIRE(res.code == 0);
    CHECK(res.out.find("routine sort_by_attribute confidence=0.94 (47/50)") != std::string::npos);
    CHECK(res.out.find("polarity=asc|desc") != std::string::npos);

    // the env var stands in for --dir
    res = run_cli("library --validate", "SKILLFORGE_LIBRARY_DIR=\"" + lib.string() + "\" ");
    REQUIRE(res.code == 0);
    CHECK(res.out == "ok: 1 rules, 1 routines, 2 blacklist entries\n");

    CHECK(run_cli("library --dir " + (dir.path() / "missing").string()).code == 2);

    // an active routine that is also blacklisted must not load
    sf::RoutineSkill ghost;
    ghost.id = "dropdown_via_keyboard_shortcut";
    ghost.trigger_keywords = {"open dropdown"};
    ghost.url_glob = "*";
    ghost.stats = {1, 0};
    ghost.body = "def run() -> None:\n    noop()\n";
    sf::write_file(lib / "routines" / "dropdown_via_keyboard_shortcut.md", sf::serialize(ghost));
    CHECK(run_cli("library --dir " + lib.string() + " --validate").code == 1);
}
