#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixture_gen.hpp"
#include "skillforge/costs.hpp"
#include "skillforge/text.hpp"

namespace sf = skillforge;
using fixtures::thrown;

namespace {

// Independent re-derivation of the execution cost, using floating-point
// floor instead of integer division. Exact for the magnitudes tested here.
double ref_exec(const sf::CostModel& m, long long plans, long long steps) {
    double reflects = std::floor(static_cast<double>(steps) / static_cast<double>(m.k_reflect));
    double act = static_cast<double>(steps) * m.q_act * (m.compression ? m.beta_vis : 1.0);
    return m.kappa_h * (static_cast<double>(plans) * m.q_plan + reflects * m.q_reflect) +
           m.kappa_l * act;
}

sf::CostModel worked_example() {
    sf::CostModel m;
    m.q_plan = 1000;
    m.q_reflect = 500;
    m.q_act = 200;
    m.k_reflect = 3;
    return m;
}

} // namespace

TEST_CASE("exec_cost worked example and reflect cadence", "[costs]") {
    auto m = worked_example();
    // 1 plan + 3 reflects + 9 actor calls
    CHECK(sf::exec_cost(m, 1, 9) == Catch::Approx(4300.0).margin(1e-12));
    // cadence floors: 8 steps buy 2 reflects, 2 steps none
    CHECK(sf::exec_cost(m, 1, 8) == Catch::Approx(1000 + 1000 + 1600).margin(1e-12));
    CHECK(sf::exec_cost(m, 1, 2) == Catch::Approx(1000 + 0 + 400).margin(1e-12));
    CHECK(sf::exec_cost(m, 0, 0) == 0.0);
    CHECK(sf::exec_cost(m, 2, 3) == Catch::Approx(2000 + 500 + 600).margin(1e-12));

    m.kappa_h = 2.0;
    m.kappa_l = 0.5;
    CHECK(sf::exec_cost(m, 1, 9) == Catch::Approx(2 * 2500 + 0.5 * 1800).margin(1e-12));
}

TEST_CASE("visual compression scales only the actor term", "[costs]") {
    auto m = worked_example();
    m.beta_vis = 0.3;
    // beta is inert until compression is on
    CHECK(sf::exec_cost(m, 1, 10) == Catch::Approx(1000 + 1500 + 2000).margin(1e-12));
    m.compression = true;
    CHECK(sf::exec_cost(m, 1, 10) == Catch::Approx(1000 + 1500 + 600).margin(1e-12));
}

TEST_CASE("cost model validation", "[costs]") {
    auto m = worked_example();
    CHECK_NOTHROW(sf::validate_cost_model(m));
    m.k_reflect = 0;
    CHECK(thrown([&] { sf::exec_cost(m, 1, 1); }) == sf::errc::config_invalid);
    m = worked_example();
    m.q_act = -1;
    CHECK(thrown([&] { sf::exec_cost(m, 1, 1); }) == sf::errc::config_invalid);
    m = worked_example();
    CHECK(thrown([&] { sf::exec_cost(m, -1, 5); }) == sf::errc::negative_count);
    CHECK(thrown([&] { sf::exec_cost(m, 1, -5); }) == sf::errc::negative_count);
}

TEST_CASE("per-task decomposition", "[costs]") {
    auto m = worked_example();
    m.n_rollout = 1.0;
    m.verify_multiplier = 1.2;
    auto t = sf::per_task_cost(m, 1, 9);
    CHECK(t.exec == Catch::Approx(4300.0).margin(1e-12));
    CHECK(t.rollout == Catch::Approx(4300.0).margin(1e-12));
    CHECK(t.verify == Catch::Approx(5160.0).margin(1e-9));
    CHECK(t.induce == 0.0);
    CHECK(t.total == Catch::Approx(9460.0).margin(1e-9));
    // verify multiplier of 1.2 makes the attempt 2.2x a plain run
    CHECK(t.total / t.exec == Catch::Approx(2.2).margin(1e-12));

    m.n_rollout = 3.0;
    m.induce_tokens = 2200;
    t = sf::per_task_cost(m, 1, 9);
    CHECK(t.total == Catch::Approx(3 * 4300.0 + 5160.0 + 2200.0).margin(1e-9));
}

TEST_CASE("benchmark decomposition identity", "[costs]") {
    auto m = worked_example();
    m.n_rollout = 3.0;
    m.verify_multiplier = 1.2;
    m.induce_tokens = 2200;
    m.pre_tokens = 5000;
    std::vector<std::pair<long long, long long>> tasks;
    sf::pcg32 g(81, 11);
    for (int i = 0; i < 910; ++i)
        tasks.emplace_back(1 + g.bounded(2), 1 + g.bounded(20));
    auto bc = sf::benchmark_cost(m, tasks);

    double sum = 0;
    for (auto& [p, s] : tasks) sum += ref_exec(m, p, s);
    CHECK(bc.mean_exec == Catch::Approx(sum / 910.0).margin(1e-9));
    CHECK(bc.rollout_term == Catch::Approx(3.0 * bc.mean_exec).margin(1e-9));
    CHECK(bc.verify_term == Catch::Approx(1.2 * bc.mean_exec).margin(1e-9));
    CHECK(bc.induce_term == 2200.0);
    CHECK(bc.pre_per_task == Catch::Approx(5000.0 / 910.0).margin(1e-12));
    CHECK(bc.mean_total ==
          Catch::Approx(bc.rollout_term + bc.verify_term + bc.induce_term + bc.pre_per_task)
              .margin(1e-9));
    CHECK(bc.overhead_ratio == Catch::Approx(bc.mean_total / bc.mean_exec).margin(1e-12));
    CHECK(bc.overhead_ratio > 4.2); // 3 rollouts + 1.2 verifies already exceed this

    CHECK(thrown([&] { sf::benchmark_cost(m, {}); }) == sf::errc::empty_input);
    sf::CostModel zero;
    CHECK(thrown([&] { sf::benchmark_cost(zero, {{1, 5}}); }) == sf::errc::zero_tokens);
}

TEST_CASE("benchmark identity holds across random models", "[costs]") {
    sf::pcg32 g(82, 11);
    for (int iter = 0; iter < 200; ++iter) {
        sf::CostModel m;
        m.kappa_h = 0.5 + g.bounded(4);
        m.kappa_l = 0.25 * (1 + g.bounded(4));
        m.q_plan = 100 + g.bounded(2000);
        m.q_reflect = g.bounded(1000);
        m.q_act = 1 + g.bounded(500);
        m.k_reflect = 1 + g.bounded(8);
        m.compression = g.bounded(2) == 0;
        m.beta_vis = 0.1 * (1 + g.bounded(10));
        m.n_rollout = 1 + g.bounded(3);
        m.verify_multiplier = 0.5 * g.bounded(4);
        m.induce_tokens = g.bounded(4000);
        m.pre_tokens = g.bounded(100000);
        std::vector<std::pair<long long, long long>> tasks;
        int n = 1 + static_cast<int>(g.bounded(60));
        double sum = 0;
        for (int i = 0; i < n; ++i) {
            long long p = 1 + g.bounded(3), s = g.bounded(30);
            tasks.emplace_back(p, s);
            sum += ref_exec(m, p, s);
        }
        auto bc = sf::benchmark_cost(m, tasks);
        CHECK(bc.mean_exec == Catch::Approx(sum / n).epsilon(1e-12));
        double four_terms = bc.rollout_term + bc.verify_term + bc.induce_term + bc.pre_per_task;
        CHECK(bc.mean_total == Catch::Approx(four_terms).epsilon(1e-12));
        CHECK(bc.overhead_ratio * bc.mean_exec == Catch::Approx(bc.mean_total).epsilon(1e-12));
    }
}

TEST_CASE("amortization of the one-time library cost", "[costs]") {
    // headline 0.593K/task with a 43.7K one-time outlay
    CHECK(sf::amortized_cost(0.593, 43.7, 910) == Catch::Approx(0.641).margin(0.001));
    CHECK(sf::amortized_cost(0.593, 43.7, 100) == Catch::Approx(1.030).margin(0.001));
    double at30 = sf::amortized_cost(0.593, 43.7, 30);
    CHECK(at30 == Catch::Approx(2.0497).margin(0.001));
    // the 30-task ratio rounds to 3.46x, not 3.5 or above
    CHECK(sf::format_fixed(at30 / 0.593, 2) == "3.46");
    CHECK(at30 / 0.593 < 3.5);

    CHECK(thrown([] { sf::amortized_cost(1.0, 1.0, 0); }) == sf::errc::config_invalid);
    CHECK(thrown([] { sf::amortized_cost(1.0, 1.0, -5); }) == sf::errc::config_invalid);
    CHECK(thrown([] { sf::amortized_cost(-1.0, 1.0, 10); }) == sf::errc::negative_count);
    CHECK(thrown([] { sf::amortized_cost(1.0, -1.0, 10); }) == sf::errc::negative_count);
}

// --------------------------------------------------------------- dollars

namespace {

sf::TaskTrajectoryView token_task(const std::string& id) {
    sf::TaskTrajectoryView v;
    v.run_id = "run";
    v.task_id = id;
    v.eval.run_id = "run";
    v.eval.task_id = id;
    v.eval.step_idx = 1;
    v.eval.event_type = "eval";
    v.eval.evaluator_status = "success";
    return v;
}

sf::LedgerEvent token_row(const std::string& model, long long prompt, long long cached,
                          long long completion, long long reasoning = 0) {
    sf::LedgerEvent e;
    e.event_type = "planner";
    e.model = model;
    e.prompt_tokens = prompt;
    e.cached_prompt_tokens = cached;
    e.completion_tokens = completion;
    e.reasoning_tokens = reasoning;
    return e;
}

} // namespace

TEST_CASE("dollar pricing", "[costs]") {
    sf::PriceTable prices{{"sim-llm", {0.05, 0.50, 2.00}},
                          {"actor-mini", {0.01, 0.10, 0.40}}};

    auto t = token_task("a");
    t.events.push_back(token_row("sim-llm", 100000, 60000, 3000, 500));
    auto d = sf::dollar_cost({t}, prices);
    // 60k cached @0.05 + 40k fresh @0.50 + 3.5k out @2.00 = $0.03
    CHECK(d.total == Catch::Approx(0.03).margin(1e-12));
    CHECK(d.per_task == Catch::Approx(0.03).margin(1e-12));

    // a million uncached input tokens at $0.25/M costs a quarter
    sf::PriceTable quarter{{"m", {0.0, 0.25, 1.0}}};
    auto q = token_task("q");
    q.events.push_back(token_row("m", 1000000, 0, 0));
    CHECK(sf::dollar_cost({q}, quarter).total == Catch::Approx(0.25).margin(1e-12));

    // mixed models within one task, plus a second task for the mean
    auto u = token_task("b");
    u.events.push_back(token_row("sim-llm", 10000, 10000, 1000));
    u.events.push_back(token_row("actor-mini", 20000, 0, 5000));
    d = sf::dollar_cost({t, u}, prices);
    double b_cost = (10000 * 0.05 + 1000 * 2.00 + 20000 * 0.10 + 5000 * 0.40) / 1e6;
    CHECK(d.total == Catch::Approx(0.03 + b_cost).margin(1e-12));
    CHECK(d.per_task == Catch::Approx((0.03 + b_cost) / 2).margin(1e-12));
}

TEST_CASE("dollar pricing skips token-free rows and rejects unknown models", "[costs]") {
    sf::PriceTable prices{{"sim-llm", {0.05, 0.50, 2.00}}};

    // action and eval rows carry no tokens and no model; they are not priced
    auto t = token_task("a");
    sf::LedgerEvent act;
    act.event_type = "action";
    act.action_name = "click";
    t.events.push_back(act);
    t.events.push_back(token_row("sim-llm", 100, 0, 10));
    CHECK(sf::dollar_cost({t}, prices).total == Catch::Approx((100 * 0.5 + 10 * 2.0) / 1e6));

    // a tokened row on an unpriced model is an error, not a zero
    auto u = token_task("u");
    u.events.push_back(token_row("mystery", 100, 0, 10));
    CHECK(thrown([&] { sf::dollar_cost({u}, prices); }) == sf::errc::unknown_model);

    // reasoning-only rows still need a price
    auto r = token_task("r");
    r.events.push_back(token_row("mystery", 0, 0, 0, 50));
    CHECK(thrown([&] { sf::dollar_cost({r}, prices); }) == sf::errc::unknown_model);

    CHECK(thrown([&] { sf::dollar_cost({}, prices); }) == sf::errc::empty_input);
}
