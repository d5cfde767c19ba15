#include "dvoc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "dvoc/errors.hpp"

namespace dvoc {

namespace {

// Largest |lambda dt| on the negative real axis that RK4 tolerates, with margin.
constexpr double kRk4StabilityLimit = 2.5;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

void validate(const SimConfig& c) {
    std::vector<std::string> problems;
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) problems.push_back("dt must be finite and > 0");
    if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) problems.push_back("t_end must be finite and > 0");
    if (c.record_decimation < 1) problems.push_back("record_decimation must be >= 1");
    if (!(c.noise_amplitude >= 0.0) || !std::isfinite(c.noise_amplitude))
        problems.push_back("noise_amplitude must be finite and >= 0");
    if (!(c.blackstart_fraction > 0.0) || !std::isfinite(c.blackstart_fraction))
        problems.push_back("blackstart_fraction must be finite and > 0");
    if (c.network_omega && (!(*c.network_omega > 0.0) || !std::isfinite(*c.network_omega)))
        problems.push_back("network_omega must be finite and > 0");
    if (c.sampled_hz) {
        const double fc = *c.sampled_hz;
        if (!(fc > 0.0) || !std::isfinite(fc)) {
            problems.push_back("controller sample rate must be finite and > 0");
        } else if (c.dt > 0.0) {
            const double ratio = 1.0 / (fc * c.dt);
            const double rounded = std::round(ratio);
            if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * rounded) {
                std::ostringstream msg;
                msg << "controller sample period must be an integer number of steps (1/(f_c dt) = " << ratio << ")";
                problems.push_back(msg.str());
            }
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::size_t sample_interval_steps(const SimConfig& config) {
    if (!config.sampled_hz) return 0;
    return static_cast<std::size_t>(std::llround(1.0 / (*config.sampled_hz * config.dt)));
}

double v_star_of(const Controller& c) {
    return std::visit(overloaded{[](const DvocParams& p) { return p.v_star(); },
                                 [](const DroopParams& p) { return p.v_star; }},
                      c);
}

double omega0_of(const Controller& c) {
    return std::visit(overloaded{[](const DvocParams& p) { return p.omega0(); },
                                 [](const DroopParams& p) { return p.omega0; }},
                      c);
}

void validate(const Scenario& s) {
    std::vector<std::string> problems;
    try {
        validate(s.topology);
    } catch (const ValidationError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (s.inverters.empty()) problems.push_back("scenario has no inverters");
    if (s.inverters.size() != s.topology.inverters.size()) {
        problems.push_back("inverter list and topology inverter nodes differ in length");
    } else {
        for (std::size_t k = 0; k < s.inverters.size(); ++k)
            if (s.inverters[k].id != s.topology.inverters[k].id)
                problems.push_back("inverter '" + s.inverters[k].id + "' does not match topology node '" +
                                   s.topology.inverters[k].id + "'");
    }
    for (const auto& inv : s.inverters) {
        if (const auto* droop = std::get_if<DroopParams>(&inv.controller)) {
            try {
                validate(*droop);
            } catch (const ValidationError& e) {
                for (const auto& p : e.problems()) problems.push_back("inverter '" + inv.id + "': " + p);
            }
        }
        if (inv.initial && (!std::isfinite(inv.initial->magnitude) || !std::isfinite(inv.initial->theta) ||
                            inv.initial->magnitude < 0.0))
            problems.push_back("inverter '" + inv.id + "': initial state must be finite with magnitude >= 0");
    }
    double last = 0.0;
    for (std::size_t k = 0; k < s.events.size(); ++k) {
        const auto& ev = s.events[k];
        const std::string name = "event " + std::to_string(k);
        if (!(ev.time >= 0.0) || !std::isfinite(ev.time)) problems.push_back(name + ": time must be finite and >= 0");
        if (ev.time < last) problems.push_back(name + ": events must be sorted by time");
        last = std::max(last, ev.time);
        std::visit(overloaded{
                       [&](const BranchSwitch& a) {
                           if (!find_branch(s.topology, a.branch))
                               problems.push_back(name + ": unknown branch '" + a.branch + "'");
                       },
                       [&](const LoadChange& a) {
                           if (!find_load(s.topology, a.load))
                               problems.push_back(name + ": unknown load '" + a.load + "'");
                           if (!(a.g_siemens >= 0.0) || !std::isfinite(a.g_siemens))
                               problems.push_back(name + ": load conductance must be finite and >= 0");
                       },
                       [&](const SetPointChange& a) {
                           if (!find_inverter(s.topology, a.inverter))
                               problems.push_back(name + ": unknown inverter '" + a.inverter + "'");
                           if (a.v_star && !(*a.v_star > 0.0)) problems.push_back(name + ": v_star must be > 0");
                           if ((a.p_star && !std::isfinite(*a.p_star)) || (a.q_star && !std::isfinite(*a.q_star)))
                               problems.push_back(name + ": set-points must be finite");
                       }},
                   ev.action);
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

struct Simulator::Impl {
    SimConfig config;
    SystemState state;
    std::size_t sample_steps = 0;
    double network_omega = 0.0;
    std::optional<DynamicNetwork> dynamic;
    std::optional<QuasiStaticNetwork> quasistatic;
    std::mt19937_64 rng;
    std::vector<std::string> log;

    // Flat state: one slot per inverter (dVOC: v; droop: magnitude, theta) then one per branch.
    std::vector<AlphaBetaVec> x, k1, k2, k3, k4, stage;
    std::vector<AlphaBetaVec> volts, injections, d_branch;

    Impl(SystemState s, const SimConfig& c) : config(c), state(std::move(s)), rng(c.noise_seed) {
        validate(config);
        sample_steps = sample_interval_steps(config);
        network_omega = config.network_omega.value_or(omega0_of(state.controllers.front()));
        const std::size_t n = state.inverters.size() + state.topology.branches.size();
        for (auto* v : {&x, &k1, &k2, &k3, &k4, &stage}) v->assign(n, {});
        volts.assign(state.inverters.size(), {});
        injections.assign(state.inverters.size(), {});
        d_branch.assign(state.topology.branches.size(), {});
        if (state.network.branch_currents.size() != state.topology.branches.size())
            state.network.branch_currents.assign(state.topology.branches.size(), {});
        rebuild();
    }

    [[nodiscard]] std::size_t inverter_count() const { return state.inverters.size(); }

    void rebuild() {
        if (config.network == NetworkModel::dynamic) {
            quasistatic.reset();
            dynamic.emplace(state.topology);
            const double rate = dynamic->stiffest_rate();
            if (rate * config.dt > kRk4StabilityLimit) {
                std::ostringstream msg;
                msg << "dt = " << config.dt << " s is outside the RK4 stability region for this network "
                    << "(fastest branch mode " << rate << " 1/s); use dt <= " << kRk4StabilityLimit / rate << " s";
                throw ValidationError(msg.str());
            }
        } else {
            dynamic.reset();
            quasistatic.emplace(state.topology, network_omega);
        }
    }

    void pack() {
        for (std::size_t k = 0; k < inverter_count(); ++k) {
            x[k] = std::visit(overloaded{[](const DvocState& s) { return s.v; },
                                         [](const PolarState& s) { return AlphaBetaVec{s.magnitude, s.theta}; }},
                              state.inverters[k]);
        }
        std::copy(state.network.branch_currents.begin(), state.network.branch_currents.end(),
                  x.begin() + static_cast<std::ptrdiff_t>(inverter_count()));
    }

    void unpack() {
        for (std::size_t k = 0; k < inverter_count(); ++k) {
            if (std::holds_alternative<DvocState>(state.inverters[k])) {
                state.inverters[k] = DvocState{x[k]};
            } else {
                state.inverters[k] = PolarState{x[k].a, x[k].b};
            }
        }
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(inverter_count()), x.end(),
                  state.network.branch_currents.begin());
    }

    [[nodiscard]] AlphaBetaVec voltage(std::size_t k, AlphaBetaVec slot) const {
        if (std::holds_alternative<DvocState>(state.inverters[k])) return slot;
        return from_polar({slot.a, slot.b});
    }

    // Branch-side currents (dynamic) or full terminal currents (quasi-static) for state y.
    void network_eval(const std::vector<AlphaBetaVec>& y) {
        for (std::size_t k = 0; k < inverter_count(); ++k) volts[k] = voltage(k, y[k]);
        const std::span<const AlphaBetaVec> branches(y.data() + inverter_count(), state.topology.branches.size());
        if (dynamic) {
            dynamic->evaluate(volts, branches, d_branch, injections);
        } else {
            injections = quasistatic->currents(volts);
            std::fill(d_branch.begin(), d_branch.end(), AlphaBetaVec{});
        }
    }

    struct ControllerEval {
        AlphaBetaVec rate;     // derivative of the controller slot
        AlphaBetaVec current;  // terminal current including the filter capacitor
    };

    // Continuous-time controller with the measurement consistent with the plant.
    [[nodiscard]] ControllerEval continuous(std::size_t k, AlphaBetaVec slot, AlphaBetaVec inj) const {
        const Controller& ctrl = state.controllers[k];
        const double cap = dynamic ? state.topology.inverters[k].c_farad : 0.0;
        if (const auto* dv = std::get_if<DvocParams>(&ctrl)) {
            const AlphaBetaVec open = dvoc_rhs(DvocState{slot}, inj, *dv);
            if (cap == 0.0) return {open, inj};
            // i_o = inj + C dv/dt enters the law through -eta R(kappa) i_o.
            const Mat2 m = identity2() + (dv->eta() * cap) * rotation(dv->kappa());
            const AlphaBetaVec rate = solve(m, open);
            return {rate, inj + cap * rate};
        }
        const auto& dp = std::get<DroopParams>(ctrl);
        const PolarState ps{slot.a, slot.b};
        const AlphaBetaVec v = from_polar(ps);
        const PowerPair pq = measure_power(v, inj);
        if (cap == 0.0) {
            const PolarRate r = droop_rhs(ps, pq.p, pq.q, dp);
            return {{r.magnitude, r.theta}, inj};
        }
        // p = p_b + C r dr/dt, q = q_b - C r^2 dtheta/dt.
        const double r = ps.magnitude;
        const PolarRate open = droop_rhs(ps, pq.p, pq.q, dp);
        const Mat2 m{1.0, -dp.kq * cap * r * r, dp.kp * cap * r, 1.0};
        const AlphaBetaVec rate = solve(m, {open.magnitude, open.theta});
        const double c = std::cos(ps.theta);
        const double s = std::sin(ps.theta);
        const AlphaBetaVec vdot{rate.a * c - r * rate.b * s, rate.a * s + r * rate.b * c};
        return {rate, inj + cap * vdot};
    }

    [[nodiscard]] AlphaBetaVec sampled_rate(std::size_t k, AlphaBetaVec slot, AlphaBetaVec held) const {
        const Controller& ctrl = state.controllers[k];
        if (const auto* dv = std::get_if<DvocParams>(&ctrl)) return dvoc_rhs(DvocState{slot}, held, *dv);
        const PolarState ps{slot.a, slot.b};
        const PowerPair pq = measure_power(from_polar(ps), held);
        const PolarRate r = droop_rhs(ps, pq.p, pq.q, std::get<DroopParams>(ctrl));
        return {r.magnitude, r.theta};
    }

    void rhs(const std::vector<AlphaBetaVec>& y, std::vector<AlphaBetaVec>& dy) {
        network_eval(y);
        for (std::size_t k = 0; k < inverter_count(); ++k) {
            dy[k] = sample_steps > 0 ? sampled_rate(k, y[k], state.held_currents[k])
                                     : continuous(k, y[k], injections[k]).rate;
        }
        std::copy(d_branch.begin(), d_branch.end(), dy.begin() + static_cast<std::ptrdiff_t>(inverter_count()));
    }

    std::vector<Measurement> measure_at(const std::vector<AlphaBetaVec>& y) {
        network_eval(y);
        std::vector<Measurement> out(inverter_count());
        for (std::size_t k = 0; k < inverter_count(); ++k)
            out[k] = {volts[k], continuous(k, y[k], injections[k]).current};
        return out;
    }

    void step() {
        pack();
        if (sample_steps > 0 && (state.step_index % sample_steps == 0 || state.held_currents.size() != inverter_count())) {
            const auto m = measure_at(x);
            state.held_currents.resize(inverter_count());
            for (std::size_t k = 0; k < inverter_count(); ++k) state.held_currents[k] = m[k].i_o;
        }
        const double h = config.dt;
        const std::size_t n = x.size();
        rhs(x, k1);
        for (std::size_t j = 0; j < n; ++j) stage[j] = x[j] + (0.5 * h) * k1[j];
        rhs(stage, k2);
        for (std::size_t j = 0; j < n; ++j) stage[j] = x[j] + (0.5 * h) * k2[j];
        rhs(stage, k3);
        for (std::size_t j = 0; j < n; ++j) stage[j] = x[j] + h * k3[j];
        rhs(stage, k4);
        for (std::size_t j = 0; j < n; ++j) x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

        if (config.noise_amplitude > 0.0) {
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t k = 0; k < inverter_count(); ++k) {
                const double scale = config.noise_amplitude * v_star_of(state.controllers[k]);
                if (std::holds_alternative<DvocState>(state.inverters[k])) {
                    x[k].a += scale * gauss(rng);
                    x[k].b += scale * gauss(rng);
                } else {
                    x[k].a += scale * gauss(rng);
                }
            }
        }

        state.step_index += 1;
        state.time = static_cast<double>(state.step_index) * h;
        for (std::size_t j = 0; j < n; ++j) {
            if (!x[j].finite()) {
                std::ostringstream msg;
                msg.precision(17);
                if (j < inverter_count()) {
                    msg << "non-finite controller state at t = " << state.time << " s, inverter '"
                        << state.topology.inverters[j].id << "', last |v| = " << voltage(j, state_slot(j)).norm();
                } else {
                    msg << "non-finite branch current at t = " << state.time << " s, branch '"
                        << state.topology.branches[j - inverter_count()].id << "'";
                }
                throw NumericError(msg.str());
            }
        }
        unpack();
    }

    [[nodiscard]] AlphaBetaVec state_slot(std::size_t k) const {
        return std::visit(overloaded{[](const DvocState& s) { return s.v; },
                                     [](const PolarState& s) { return AlphaBetaVec{s.magnitude, s.theta}; }},
                          state.inverters[k]);
    }

    void apply(const Event& event) {
        if (const auto* sp = std::get_if<SetPointChange>(&event.action)) {
            const auto idx = find_inverter(state.topology, sp->inverter);
            if (!idx) throw ValidationError("event references unknown inverter '" + sp->inverter + "'");
            Controller& ctrl = state.controllers[*idx];
            if (auto* dv = std::get_if<DvocParams>(&ctrl)) {
                SetPoints next = dv->set_points();
                if (sp->p_star) next.p_star = *sp->p_star;
                if (sp->q_star) next.q_star = *sp->q_star;
                if (sp->v_star) next.v_star = *sp->v_star;
                *dv = dv->with_set_points(next);
            } else {
                auto& dp = std::get<DroopParams>(ctrl);
                if (sp->p_star) dp.p_star = *sp->p_star;
                if (sp->q_star) dp.q_star = *sp->q_star;
                if (sp->v_star) dp.v_star = *sp->v_star;
            }
            return;
        }
        state.topology = apply_event(state.topology, event, &log);
        if (const auto* sw = std::get_if<BranchSwitch>(&event.action); sw && !sw->close)
            state.network.branch_currents[*find_branch(state.topology, sw->branch)] = {};
        rebuild();
    }
};

namespace {

SystemState initial_state(const Scenario& scenario, const SimConfig& config) {
    validate(scenario);
    SystemState s;
    s.topology = scenario.topology;
    s.network.branch_currents.assign(scenario.topology.branches.size(), {});
    std::mt19937_64 rng(config.noise_seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (const auto& inv : scenario.inverters) {
        s.controllers.push_back(inv.controller);
        // Always draw so that adding an explicit initial state elsewhere does not shift other angles.
        const double theta = angle(rng);
        const double vs = v_star_of(inv.controller);
        if (std::holds_alternative<DvocParams>(inv.controller)) {
            const PolarState init = inv.initial.value_or(PolarState{config.blackstart_fraction * vs, theta});
            s.inverters.emplace_back(DvocState{from_polar(init)});
        } else {
            s.inverters.emplace_back(inv.initial.value_or(PolarState{vs, theta}));
        }
    }
    return s;
}

// Mixes the scenario seed away from the one used for initial angles.
SimConfig with_noise_stream(SimConfig c) {
    c.noise_seed = c.noise_seed * 0x9E3779B97F4A7C15ULL + 1;
    return c;
}

}  // namespace

Simulator::Simulator(const Scenario& scenario, const SimConfig& config)
    : impl_(std::make_unique<Impl>(initial_state(scenario, config), config)) {
    impl_->rng.seed(with_noise_stream(config).noise_seed);
}

Simulator::Simulator(SystemState state, const SimConfig& config)
    : impl_(std::make_unique<Impl>(std::move(state), config)) {}

Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

void Simulator::step() { impl_->step(); }
void Simulator::apply(const Event& event) { impl_->apply(event); }
const SystemState& Simulator::state() const { return impl_->state; }
const std::vector<std::string>& Simulator::log() const { return impl_->log; }

std::vector<Measurement> Simulator::measure() const {
    impl_->pack();
    return impl_->measure_at(impl_->x);
}

SystemState step(const SystemState& state, const SimConfig& config) {
    Simulator sim(state, config);
    sim.step();
    return sim.state();
}

namespace {

std::string describe(const Event& ev) {
    return std::visit(overloaded{
                          [](const BranchSwitch& a) { return (a.close ? "connect " : "disconnect ") + a.branch; },
                          [](const LoadChange& a) {
                              std::ostringstream s;
                              s.precision(17);
                              s << "load " << a.load << " g_siemens=" << a.g_siemens;
                              return s.str();
                          },
                          [](const SetPointChange& a) {
                              std::ostringstream s;
                              s.precision(17);
                              s << "setpoint " << a.inverter;
                              if (a.p_star) s << " p_star=" << *a.p_star;
                              if (a.q_star) s << " q_star=" << *a.q_star;
                              if (a.v_star) s << " v_star=" << *a.v_star;
                              return s.str();
                          }},
                      ev.action);
}

// Every topology the run will visit must be solvable and RK4-stable.
void precheck_topologies(const Scenario& scenario, const SimConfig& config) {
    Topology topo = scenario.topology;
    const double omega = config.network_omega.value_or(omega0_of(scenario.inverters.front().controller));
    auto check = [&](const Topology& t) {
        if (config.network == NetworkModel::dynamic) {
            const DynamicNetwork net(t);
            if (net.stiffest_rate() * config.dt > kRk4StabilityLimit) {
                std::ostringstream msg;
                msg << "dt = " << config.dt << " s is outside the RK4 stability region for this network "
                    << "(fastest branch mode " << net.stiffest_rate() << " 1/s); use dt <= "
                    << kRk4StabilityLimit / net.stiffest_rate() << " s";
                throw ValidationError(msg.str());
            }
        } else {
            (void)QuasiStaticNetwork(t, omega);
        }
    };
    check(topo);
    for (const auto& ev : scenario.events) {
        if (std::holds_alternative<SetPointChange>(ev.action) || ev.time > config.t_end) continue;
        topo = apply_event(topo, ev);
        check(topo);
    }
}

}  // namespace

Trace run_scenario(const Scenario& scenario, const SimConfig& config) {
    validate(config);
    validate(scenario);
    precheck_topologies(scenario, config);

    Simulator sim(scenario, config);
    const auto total_steps = static_cast<std::uint64_t>(std::llround(config.t_end / config.dt));
    const auto decimation = static_cast<std::uint64_t>(config.record_decimation);
    const std::size_t n = scenario.inverters.size();

    Trace trace;
    trace.sample_interval = config.dt * static_cast<double>(decimation);
    trace.inverters.resize(n);
    for (std::size_t k = 0; k < n; ++k) trace.inverters[k].id = scenario.inverters[k].id;
    for (const auto& inv : scenario.inverters) trace.initial_controllers.push_back(inv.controller);
    const std::size_t expected = static_cast<std::size_t>(total_steps / decimation) + 1;
    trace.time.reserve(expected);
    for (auto& s : trace.inverters)
        for (auto* col : {&s.va, &s.vb, &s.ia, &s.ib, &s.p, &s.q, &s.vmag, &s.theta}) col->reserve(expected);

    std::vector<double> theta(n, 0.0);
    auto track_angles = [&](bool first) {
        const auto& st = sim.state();
        for (std::size_t k = 0; k < n; ++k) {
            if (const auto* ps = std::get_if<PolarState>(&st.inverters[k])) {
                theta[k] = ps->theta;
                continue;
            }
            const AlphaBetaVec v = std::get<DvocState>(st.inverters[k]).v;
            const double raw = std::atan2(v.b, v.a);
            if (first) {
                theta[k] = raw;
            } else {
                theta[k] += std::remainder(raw - theta[k], 2.0 * std::numbers::pi);
            }
        }
    };
    track_angles(true);

    std::size_t next_event = 0;
    for (std::uint64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * config.dt;
        while (next_event < scenario.events.size() &&
               scenario.events[next_event].time <= t + 1e-9 * config.dt) {
            const Event& ev = scenario.events[next_event++];
            sim.apply(ev);
            trace.events.push_back({t, describe(ev)});
        }
        if (k % decimation == 0) {
            const auto meas = sim.measure();
            trace.time.push_back(t);
            for (std::size_t j = 0; j < n; ++j) {
                auto& s = trace.inverters[j];
                const PowerPair pq = measure_power(meas[j].v, meas[j].i_o);
                s.va.push_back(meas[j].v.a);
                s.vb.push_back(meas[j].v.b);
                s.ia.push_back(meas[j].i_o.a);
                s.ib.push_back(meas[j].i_o.b);
                s.p.push_back(pq.p);
                s.q.push_back(pq.q);
                s.vmag.push_back(meas[j].v.norm());
                s.theta.push_back(theta[j]);
            }
        }
        if (k == total_steps) break;
        sim.step();
        track_angles(false);
    }
    trace.final_controllers = sim.state().controllers;
    trace.log = sim.log();
    return trace;
}

std::vector<BatchResult> run_batch(const std::vector<BatchJob>& jobs, unsigned threads) {
    std::vector<BatchResult> results(jobs.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                results[j].trace = run_scenario(jobs[j].scenario, jobs[j].config);
            } catch (const NumericError& e) {
                results[j].error = e.what();
                results[j].numeric_failure = true;
            } catch (const std::exception& e) {
                results[j].error = e.what();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    return results;
}

}  // namespace dvoc
