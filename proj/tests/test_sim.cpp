#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <numbers>

#include "dvoc/errors.hpp"
#include "dvoc/sim.hpp"
#include "support.hpp"

using namespace dvoc;
using dvoc::test::kOmega60;
using dvoc::test::kTestbedVStar;
using dvoc::test::testbed_params;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

Scenario lone_inverter(const DvocParams& p, std::optional<PolarState> init) {
    Scenario s;
    s.name = "lone";
    s.inverters = {{"inv1", p, init}};
    s.topology.inverters = {{"inv1", 0.0}};
    return s;
}

// Two inverters sharing a load bus; per-unit scale, mild line so RK4 sits in its asymptotic regime.
Scenario pu_pair(double l_henry, double r_ohm) {
    const DvocParams p({43.43, 0.9722, kPi / 2}, {0.5, 0.0, 1.0}, kOmega60);
    Scenario s;
    s.name = "pair";
    s.inverters = {{"a", p, PolarState{0.6, 0.0}}, {"b", p, PolarState{1.2, 2.0}}};
    s.topology.inverters = {{"a", 0.0}, {"b", 0.0}};
    s.topology.loads = {{"bus", 0.5}};
    s.topology.branches = {{"la", "a", "bus", r_ohm, l_henry, true}, {"lb", "b", "bus", r_ohm, l_henry, true}};
    return s;
}

Scenario testbed_pair() {
    const DvocParams p = testbed_params();
    Scenario s;
    s.name = "testbed";
    s.inverters = {{"inv1", p, PolarState{kTestbedVStar, 0.0}}, {"inv2", p, PolarState{0.9 * kTestbedVStar, 1.5}}};
    s.topology.inverters = {{"inv1", 24e-6}, {"inv2", 24e-6}};
    s.topology.loads = {{"bus", 500.0 / (kTestbedVStar * kTestbedVStar)}};
    s.topology.branches = {{"line1", "inv1", "bus", 0.1, 2e-4, true}, {"line2", "inv2", "bus", 0.1, 2e-4, true}};
    return s;
}

bool same_bits(const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

bool same_trace(const Trace& x, const Trace& y) {
    if (!same_bits(x.time, y.time) || x.inverters.size() != y.inverters.size()) return false;
    for (std::size_t k = 0; k < x.inverters.size(); ++k) {
        const auto& a = x.inverters[k];
        const auto& b = y.inverters[k];
        if (!same_bits(a.va, b.va) || !same_bits(a.vb, b.vb) || !same_bits(a.ia, b.ia) || !same_bits(a.ib, b.ib) ||
            !same_bits(a.p, b.p) || !same_bits(a.q, b.q) || !same_bits(a.vmag, b.vmag) || !same_bits(a.theta, b.theta))
            return false;
    }
    return true;
}

AlphaBetaVec final_voltage(const Trace& t, std::size_t k) { return {t.inverters[k].va.back(), t.inverters[k].vb.back()}; }

}  // namespace

TEST_CASE("unloaded inverter at its set-point rotates rigidly") {
    const DvocParams p({21.71, 0.9722, kPi / 2}, {0.0, 0.0, kTestbedVStar}, kOmega60);
    SimConfig cfg;
    const double period = 2 * kPi / kOmega60;
    cfg.dt = period / 20000;
    cfg.t_end = period;
    cfg.record_decimation = 20000;
    const Trace t = run_scenario(lone_inverter(p, PolarState{kTestbedVStar, 0.0}), cfg);
    REQUIRE(t.size() == 2);
    CHECK_THAT(t.inverters[0].vmag.back(), WithinRel(kTestbedVStar, 1e-9));
    CHECK_THAT(t.inverters[0].theta.back() - t.inverters[0].theta.front(), WithinRel(2 * kPi, 1e-9));
}

TEST_CASE("zero initial state stays at the origin") {
    const Scenario s = lone_inverter(testbed_params(), PolarState{0.0, 0.0});
    SimConfig cfg;
    cfg.t_end = 0.01;
    const Trace t = run_scenario(s, cfg);
    for (const auto& col : {t.inverters[0].va, t.inverters[0].vb, t.inverters[0].ia, t.inverters[0].p})
        for (double x : col) REQUIRE(x == 0.0);
}

TEST_CASE("RK4 converges at fourth order on a smooth segment") {
    auto order_for = [](const Scenario& s, NetworkModel model, double h) {
        std::vector<AlphaBetaVec> finals;
        for (double dt : {h, h / 2, h / 4}) {
            SimConfig cfg;
            cfg.network = model;
            cfg.dt = dt;
            cfg.t_end = 0.01;
            cfg.record_decimation = static_cast<int>(std::llround(cfg.t_end / dt));
            finals.push_back(final_voltage(run_scenario(s, cfg), 1));
        }
        const double e1 = (finals[0] - finals[1]).norm();
        const double e2 = (finals[1] - finals[2]).norm();
        return std::log2(e1 / e2);
    };
    CHECK(order_for(pu_pair(1e-3, 0.1), NetworkModel::quasistatic, 1e-4) >= 3.8);
    CHECK(order_for(pu_pair(1e-2, 1.0), NetworkModel::dynamic, 1e-4) >= 3.8);
}

TEST_CASE("identical inputs give bit-identical traces") {
    Scenario s = testbed_pair();
    s.inverters[1].initial.reset();
    SimConfig cfg;
    cfg.t_end = 0.05;
    cfg.noise_seed = 42;
    cfg.noise_amplitude = 1e-5;
    const Trace a = run_scenario(s, cfg);
    const Trace b = run_scenario(s, cfg);
    CHECK(same_trace(a, b));
    cfg.noise_seed = 43;
    CHECK_FALSE(same_trace(a, run_scenario(s, cfg)));
}

TEST_CASE("an event does not alter the trace before it") {
    const Scenario base = testbed_pair();
    Scenario with_event = base;
    with_event.events = {{0.02, BranchSwitch{"line2", false}}};
    SimConfig cfg;
    cfg.t_end = 0.04;
    cfg.record_decimation = 10;
    const Trace a = run_scenario(base, cfg);
    const Trace b = run_scenario(with_event, cfg);
    std::size_t before = 0;
    while (a.time[before] < 0.02) ++before;
    REQUIRE(before > 100);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& x = a.inverters[k];
        const auto& y = b.inverters[k];
        for (std::size_t i = 0; i < before; ++i) {
            REQUIRE(x.va[i] == y.va[i]);
            REQUIRE(x.ia[i] == y.ia[i]);
            REQUIRE(x.q[i] == y.q[i]);
        }
    }
    CHECK(a.inverters[1].ia[before + 50] != b.inverters[1].ia[before + 50]);
    CHECK(b.log.empty());
}

TEST_CASE("events fire on the first step boundary at or after their time") {
    Scenario s = testbed_pair();
    s.events = {{0.0012345, SetPointChange{"inv2", 400.0, std::nullopt, std::nullopt}},
                {0.003, SetPointChange{"inv1", std::nullopt, -100.0, std::nullopt}}};
    SimConfig cfg;
    cfg.dt = 2e-6;
    cfg.t_end = 0.005;
    const Trace t = run_scenario(s, cfg);
    REQUIRE(t.events.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(t.events[k].time >= s.events[k].time - 1e-9 * cfg.dt);
        CHECK(t.events[k].time - s.events[k].time < cfg.dt);
    }
    CHECK(std::get<DvocParams>(t.final_controllers[1]).p_star() == 400.0);
    CHECK(std::get<DvocParams>(t.final_controllers[0]).q_star() == -100.0);
    CHECK(std::get<DvocParams>(t.initial_controllers[1]).p_star() == 500.0);
}

TEST_CASE("trace layout") {
    SimConfig cfg;
    cfg.dt = 2e-6;
    cfg.t_end = 0.01;
    cfg.record_decimation = 7;
    const Trace t = run_scenario(testbed_pair(), cfg);
    CHECK_THAT(t.sample_interval, WithinRel(1.4e-5, 1e-12));
    for (std::size_t i = 1; i < t.size(); ++i) REQUIRE_THAT(t.time[i] - t.time[i - 1], WithinRel(1.4e-5, 1e-9));
    for (const auto& s : t.inverters) {
        CHECK(s.va.size() == t.size());
        CHECK(s.theta.size() == t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            REQUIRE_THAT(s.vmag[i], WithinRel(std::hypot(s.va[i], s.vb[i]), 1e-15));
            REQUIRE_THAT(s.p[i], WithinRel(s.va[i] * s.ia[i] + s.vb[i] * s.ib[i], 1e-12));
        }
    }
}

TEST_CASE("sampled controller converges to the continuous one as the rate grows") {
    Scenario s = testbed_pair();
    SimConfig cfg;
    cfg.dt = 1.0 / 960000.0;
    cfg.t_end = 0.05;
    cfg.record_decimation = 16;
    const Trace cont = run_scenario(s, cfg);
    double prev = std::numeric_limits<double>::infinity();
    for (double khz : {60.0, 120.0, 240.0, 480.0}) {
        cfg.sampled_hz = khz * 1e3;
        const Trace t = run_scenario(s, cfg);
        double worst = 0.0;
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t i = 0; i < t.size(); ++i)
                worst = std::max(worst, std::abs(t.inverters[k].vmag[i] - cont.inverters[k].vmag[i]));
        INFO("f_c = " << khz << " kHz, max |d|v|| = " << worst);
        CHECK(worst < prev);
        CHECK(worst > 0.0);
        prev = worst;
    }
}

TEST_CASE("configuration validation") {
    SimConfig c;
    c.dt = 0.0;
    c.t_end = -1.0;
    c.record_decimation = 0;
    try {
        validate(c);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.problems().size() == 3);
    }
    SimConfig sampled;
    sampled.dt = 1e-6;
    sampled.sampled_hz = 32000.0;
    CHECK_THROWS_AS(validate(sampled), ValidationError);
    sampled.dt = 1.0 / 320000.0;
    CHECK_NOTHROW(validate(sampled));
    CHECK(sample_interval_steps(sampled) == 10);
}

TEST_CASE("dt outside the RK4 stability region is rejected before running") {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.01;
    CHECK_THROWS_AS(run_scenario(testbed_pair(), cfg), ValidationError);
}

TEST_CASE("divergence is reported with a diagnostic") {
    const DvocParams p({1e7, 0.9722, kPi / 2}, {500.0, 0.0, kTestbedVStar}, kOmega60);
    Scenario s = lone_inverter(p, PolarState{kTestbedVStar, 0.0});
    s.topology.loads = {{"bus", 0.1}};
    s.topology.branches = {{"line1", "inv1", "bus", 0.1, 0.0, true}};
    SimConfig cfg;
    cfg.network = NetworkModel::quasistatic;
    cfg.dt = 1e-4;
    cfg.t_end = 0.1;
    try {
        (void)run_scenario(s, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("inv1") != std::string::npos);
        CHECK(msg.find("t = ") != std::string::npos);
    }
}

TEST_CASE("scenario validation") {
    Scenario s = testbed_pair();
    s.inverters[1].id = "other";
    s.events = {{0.5, BranchSwitch{"nope", true}}, {0.1, LoadChange{"bus", -1.0}}};
    try {
        validate(s);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.problems().size() >= 4);
    }
}

TEST_CASE("stateless step matches the stepping engine") {
    const Scenario s = testbed_pair();
    SimConfig cfg;
    cfg.dt = 2e-6;
    Simulator sim(s, cfg);
    for (int k = 0; k < 10; ++k) sim.step();
    const SystemState mid = sim.state();
    sim.step();
    const SystemState next = step(mid, cfg);
    CHECK(next.step_index == sim.state().step_index);
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(std::get<DvocState>(next.inverters[k]).v == std::get<DvocState>(sim.state().inverters[k]).v);
    CHECK(next.network.branch_currents == sim.state().network.branch_currents);
}

TEST_CASE("conventional droop inverters settle on their droop line") {
    Scenario s;
    s.name = "droop";
    const DroopParams d{0.001, 0.01, kOmega60, kTestbedVStar, 400.0, 0.0};
    s.inverters = {{"inv1", d, std::nullopt}};
    s.topology.inverters = {{"inv1", 0.0}};
    s.topology.loads = {{"bus", 500.0 / (kTestbedVStar * kTestbedVStar)}};
    s.topology.branches = {{"line1", "inv1", "bus", 0.1, 2e-4, true}};
    SimConfig cfg;
    cfg.t_end = 10.0;
    cfg.dt = 1e-5;
    cfg.network = NetworkModel::quasistatic;
    cfg.record_decimation = 1000;
    const Trace t = run_scenario(s, cfg);
    const auto& inv = t.inverters[0];
    const std::size_t last = t.size() - 1;
    const double omega = (inv.theta[last] - inv.theta[last - 1]) / (t.time[last] - t.time[last - 1]);
    CHECK_THAT(omega, WithinRel(kOmega60 + d.kp * (d.p_star - inv.p[last]), 1e-9));
    CHECK_THAT(inv.vmag[last], WithinRel(kTestbedVStar + d.kq * (d.q_star - inv.q[last]), 1e-6));
}

TEST_CASE("batch runs keep job order and isolate failures") {
    std::vector<BatchJob> jobs;
    SimConfig cfg;
    cfg.t_end = 0.005;
    jobs.push_back({testbed_pair(), cfg});
    Scenario broken = testbed_pair();
    broken.inverters.pop_back();
    jobs.push_back({broken, cfg});
    Scenario other = testbed_pair();
    other.inverters[0].initial = PolarState{100.0, 0.3};
    jobs.push_back({other, cfg});
    const auto results = run_batch(jobs, 3);
    REQUIRE(results.size() == 3);
    REQUIRE(results[0].trace);
    CHECK_FALSE(results[1].trace);
    CHECK_FALSE(results[1].error.empty());
    CHECK_FALSE(results[1].numeric_failure);
    REQUIRE(results[2].trace);
    CHECK(same_trace(*results[0].trace, run_scenario(jobs[0].scenario, cfg)));
    CHECK(same_trace(*results[2].trace, run_scenario(jobs[2].scenario, cfg)));
}
