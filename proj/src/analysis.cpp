#include "dvoc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "dvoc/errors.hpp"

namespace dvoc {

namespace {

std::size_t first_index_at_or_after(const Trace& trace, double t) {
    const auto it = std::lower_bound(trace.time.begin(), trace.time.end(), t - 1e-12);
    return static_cast<std::size_t>(it - trace.time.begin());
}

}  // namespace

BlackStartCurve blackstart_analytic(double v0, const DvocParams& params, std::span<const double> times) {
    if (!(v0 >= 0.0) || !std::isfinite(v0)) throw ValidationError("black-start v0 must be finite and >= 0");
    const double vs = params.v_star();
    const double rate = params.eta() * params.alpha();
    BlackStartCurve curve;
    curve.times.assign(times.begin(), times.end());
    curve.magnitude.reserve(times.size());

    if (v0 == 0.0) {
        curve.degenerate = true;
        curve.magnitude.assign(times.size(), 0.0);
        return curve;
    }
    if (v0 == vs) {
        curve.h0 = std::numeric_limits<double>::infinity();
        curve.magnitude.assign(times.size(), vs);
        return curve;
    }
    const double gap = v0 * v0 - vs * vs;
    curve.h0 = v0 / std::sqrt(std::abs(gap));
    // v* h e^{rt} / sqrt(h^2 e^{2rt} +- 1) rewritten as v* / sqrt(1 +- e^{-2rt} / h^2), which cannot overflow.
    const double sign = gap < 0.0 ? 1.0 : -1.0;
    const double inv_h2 = 1.0 / (curve.h0 * curve.h0);
    for (double t : times) curve.magnitude.push_back(vs / std::sqrt(1.0 + sign * std::exp(-2.0 * rate * t) * inv_h2));
    return curve;
}

BlackStartComparison blackstart_compare(const Trace& trace, const DvocParams& params, std::size_t inverter) {
    BlackStartComparison out;
    if (inverter >= trace.inverters.size() || trace.size() < 2) return out;
    const auto& vmag = trace.inverters[inverter].vmag;
    const double vs = params.v_star();
    const double v0 = vmag.front();
    if (!(v0 > 0.0) || v0 >= 0.05 * vs) return out;

    std::size_t lo = vmag.size();
    std::size_t hi = vmag.size();
    for (std::size_t k = 0; k < vmag.size(); ++k) {
        if (lo == vmag.size() && vmag[k] >= 0.05 * vs) lo = k;
        if (lo != vmag.size() && vmag[k] >= 0.95 * vs) {
            hi = k;
            break;
        }
    }
    if (lo == vmag.size() || hi == vmag.size()) return out;

    const std::span<const double> times(trace.time.data() + lo, hi - lo + 1);
    const BlackStartCurve curve = blackstart_analytic(v0, params, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double dev = std::abs(vmag[lo + k] - curve.magnitude[k]) / curve.magnitude[k];
        out.max_relative_deviation = std::max(out.max_relative_deviation, dev);
    }
    out.defined = true;
    out.rise_start = trace.time[lo];
    out.rise_end = trace.time[hi];
    out.samples = times.size();
    return out;
}

std::vector<double> estimate_frequency(const Trace& trace, double t_from, double t_to) {
    if (trace.size() < 3) throw std::domain_error("trace too short for a frequency estimate");
    const std::size_t lo = std::max<std::size_t>(first_index_at_or_after(trace, t_from), 1);
    std::size_t hi = first_index_at_or_after(trace, t_to);
    if (hi >= trace.size() || trace.time[hi] > t_to + 1e-12) hi = hi == 0 ? 0 : hi - 1;
    hi = std::min(hi, trace.size() - 2);
    if (hi < lo) throw std::domain_error("frequency window holds no interior samples");

    std::vector<double> out;
    for (std::size_t k = 0; k < trace.inverters.size(); ++k) {
        const auto& s = trace.inverters[k];
        const double floor = 1e-6 * v_star_of(trace.initial_controllers[k]);
        double acc = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            if (s.vmag[i - 1] < floor || s.vmag[i] < floor || s.vmag[i + 1] < floor)
                throw std::domain_error("amplitude too small for a phase estimate in inverter '" + s.id + "'");
            acc += (s.theta[i + 1] - s.theta[i - 1]) / (trace.time[i + 1] - trace.time[i - 1]);
        }
        out.push_back(acc / static_cast<double>(hi - lo + 1));
    }
    return out;
}

std::optional<double> sync_time(const Trace& trace, double threshold, std::optional<double> trigger) {
    if (trace.inverters.size() < 2) throw ValidationError("sync_time needs at least two inverters");
    const double t0 = trigger.value_or(trace.events.empty() ? 0.0 : trace.events.front().time);
    double vs = 0.0;
    for (const auto& c : trace.initial_controllers) vs = std::max(vs, v_star_of(c));
    const double period = 2.0 * std::numbers::pi / omega0_of(trace.initial_controllers.front());
    const double limit = threshold * vs;

    std::optional<std::size_t> start;
    for (std::size_t i = first_index_at_or_after(trace, t0); i < trace.size(); ++i) {
        double worst = 0.0;
        for (std::size_t a = 0; a < trace.inverters.size(); ++a) {
            for (std::size_t b = a + 1; b < trace.inverters.size(); ++b) {
                const auto& x = trace.inverters[a];
                const auto& y = trace.inverters[b];
                worst = std::max(worst, std::hypot(x.va[i] - y.va[i], x.vb[i] - y.vb[i]));
            }
        }
        if (worst >= limit) {
            start.reset();
            continue;
        }
        if (!start) start = i;
        if (trace.time[i] - trace.time[*start] >= period - 1e-12) return trace.time[*start] - t0;
    }
    return std::nullopt;
}

SteadyState measure_steady_state(const Trace& trace, std::size_t inverter, double periods, double tolerance) {
    SteadyState out;
    const auto& s = trace.inverters.at(inverter);
    const Controller& ctrl = trace.final_controllers.empty() ? trace.initial_controllers.at(inverter)
                                                             : trace.final_controllers.at(inverter);
    const double omega0 = omega0_of(ctrl);
    const double period = 2.0 * std::numbers::pi / omega0;
    const double t_end = trace.time.back();
    const double t_start = t_end - periods * period;
    if (t_start < trace.time.front()) return out;

    const std::size_t lo = first_index_at_or_after(trace, t_start);
    const std::size_t n = trace.size() - lo;
    if (n < 4) return out;
    double vmin = s.vmag[lo], vmax = s.vmag[lo];
    for (std::size_t i = lo; i < trace.size(); ++i) {
        out.p += s.p[i];
        out.q += s.q[i];
        out.vmag += s.vmag[i];
        vmin = std::min(vmin, s.vmag[i]);
        vmax = std::max(vmax, s.vmag[i]);
    }
    out.p /= static_cast<double>(n);
    out.q /= static_cast<double>(n);
    out.vmag /= static_cast<double>(n);
    out.amplitude_drift = out.vmag > 0.0 ? (vmax - vmin) / out.vmag : std::numeric_limits<double>::infinity();

    try {
        out.omega = estimate_frequency(trace, t_start, t_end)[inverter];
        double fmin = std::numeric_limits<double>::infinity();
        double fmax = -fmin;
        const int whole = static_cast<int>(std::floor(periods + 1e-9));
        for (int k = 0; k < whole; ++k) {
            const double a = t_start + k * period;
            const double f = estimate_frequency(trace, a, a + period)[inverter];
            fmin = std::min(fmin, f);
            fmax = std::max(fmax, f);
        }
        out.frequency_drift = whole > 0 ? (fmax - fmin) / omega0 : 0.0;
    } catch (const std::domain_error&) {
        out.frequency_drift = std::numeric_limits<double>::infinity();
        return out;
    }
    out.settled = out.amplitude_drift < tolerance && out.frequency_drift < tolerance;
    return out;
}

SyncMetrics compute_metrics(const Trace& trace, double threshold) {
    SyncMetrics m;
    const std::size_t n = trace.inverters.size();
    if (n >= 2) m.sync_time = sync_time(trace, threshold);
    const std::size_t last = trace.size() - 1;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            m.residual = std::max(m.residual, std::hypot(trace.inverters[a].va[last] - trace.inverters[b].va[last],
                                                         trace.inverters[a].vb[last] - trace.inverters[b].vb[last]));
    m.settled = true;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const SteadyState ss = measure_steady_state(trace, k);
        m.settled = m.settled && ss.settled;
        m.steady_p.push_back(ss.p);
        m.steady_q.push_back(ss.q);
        m.steady_amplitudes.push_back(ss.vmag);
        m.steady_freq += ss.omega / static_cast<double>(n);
        total += ss.p;
    }
    for (double p : m.steady_p) m.sharing_ratios.push_back(total != 0.0 ? p / total : 0.0);
    return m;
}

namespace {

// Magnitude equation of the polar law divided by eta |v|.
double magnitude_balance(const DvocParams& prm, double p, double q, double r) {
    const double vs2 = prm.v_star() * prm.v_star();
    const double a = prm.p_star() / vs2 - p / (r * r);
    const double b = prm.q_star() / vs2 - q / (r * r);
    return std::cos(prm.kappa()) * a + std::sin(prm.kappa()) * b + prm.alpha() * (1.0 - r * r / vs2);
}

double magnitude_balance_slope(const DvocParams& prm, double p, double q, double r) {
    const double vs2 = prm.v_star() * prm.v_star();
    return 2.0 * (std::cos(prm.kappa()) * p + std::sin(prm.kappa()) * q) / (r * r * r) - 2.0 * prm.alpha() * r / vs2;
}

}  // namespace

double stationary_frequency(const DvocParams& prm, double p, double q, double magnitude) {
    const double vs2 = prm.v_star() * prm.v_star();
    const double r2 = magnitude * magnitude;
    const double a = prm.p_star() / vs2 - p / r2;
    const double b = prm.q_star() / vs2 - q / r2;
    return prm.omega0() + prm.eta() * (std::sin(prm.kappa()) * a - std::cos(prm.kappa()) * b);
}

StationaryPoint stationary_point(const DvocParams& prm, double p, double q) {
    double lo = 0.2 * prm.v_star();
    double hi = 2.0 * prm.v_star();
    if (!(magnitude_balance(prm, p, q, hi) < 0.0))
        throw std::domain_error("no stable stationary magnitude in [0.2 v*, 2 v*] for the given (p, q)");
    // With a net inductive demand the balance is negative near the lower end as
    // well (unstable low-voltage root), so walk down from the top for the stable root.
    constexpr int kScan = 512;
    const double span = hi - lo;
    bool bracketed = false;
    for (int k = 1; k <= kScan; ++k) {
        const double r = 2.0 * prm.v_star() - span * k / kScan;
        if (magnitude_balance(prm, p, q, r) > 0.0) {
            lo = r;
            hi = r + span / kScan;
            bracketed = true;
            break;
        }
    }
    if (!bracketed) throw std::domain_error("no stable stationary magnitude in [0.2 v*, 2 v*] for the given (p, q)");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * prm.v_star(); ++it) {
        const double mid = 0.5 * (lo + hi);
        (magnitude_balance(prm, p, q, mid) > 0.0 ? lo : hi) = mid;
    }
    double r = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double slope = magnitude_balance_slope(prm, p, q, r);
        if (slope == 0.0) break;
        const double next = r - magnitude_balance(prm, p, q, r) / slope;
        if (!(next > 0.0) || std::abs(next - r) > 1e-6 * prm.v_star()) break;
        r = next;
    }
    return {r, stationary_frequency(prm, p, q, r)};
}

ClosedFormSweep droop_sweep_closed_form(const DvocParams& prm, DroopAxis axis, std::span<const double> grid) {
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw ValidationError("droop sweep grid must be strictly increasing");
    ClosedFormSweep out;
    for (auto* c : {&out.exact, &out.approx, &out.linearized}) {
        c->axis = axis;
        c->source = CurveSource::closed_form;
    }
    for (double x : grid) {
        if (axis == DroopAxis::p) {
            const StationaryPoint sp = stationary_point(prm, x, prm.q_star());
            out.exact.points.push_back({x, sp.omega});
            out.approx.points.push_back({x, droop_approx_freq(x, prm)});
            out.linearized.points.push_back({x, droop_approx_freq(x, prm)});
        } else {
            const StationaryPoint sp = stationary_point(prm, prm.p_star(), x);
            out.exact.points.push_back({x, sp.magnitude});
            out.approx.points.push_back({x, droop_approx_vmag_ss(x, prm)});
            out.linearized.points.push_back({x, droop_linearized_vmag_ss(x, prm)});
        }
    }
    return out;
}

Scenario droop_sweep_variant(const Scenario& base, DroopAxis axis, double value) {
    Scenario s = base;
    if (s.inverters.empty()) throw ValidationError("droop sweep template has no inverter");
    const Controller& ctrl = s.inverters.front().controller;
    const double vs = v_star_of(ctrl);
    const double omega0 = omega0_of(ctrl);
    if (axis == DroopAxis::p) {
        if (s.topology.loads.empty()) throw ValidationError("p-axis droop sweep needs a load node in the template");
        if (value < 0.0) throw ValidationError("p-axis sweep values must be >= 0 (resistive loads)");
        s.topology.loads.front().g_siemens = value / (vs * vs);
    } else if (value > 0.0) {
        Branch b;
        b.id = "sweep_q";
        b.from = s.topology.inverters.front().id;
        b.to = std::string(kGroundNode);
        // Quality factor 10: the resistance damps the switch-on DC offset within a few
        // cycles; the reactance is raised so the branch still draws `value` var at v*.
        constexpr double kQuality = 10.0;
        const double x = vs * vs / (value * (1.0 + 1.0 / (kQuality * kQuality)));
        b.l_henry = x / omega0;
        b.r_ohm = x / kQuality;
        s.topology.branches.push_back(b);
    } else if (value < 0.0) {
        s.topology.inverters.front().c_farad += -value / (omega0 * vs * vs);
    }
    s.name = base.name + (axis == DroopAxis::p ? "@p=" : "@q=") + std::to_string(value);
    return s;
}

SimulatedSweep droop_sweep_simulated(const Scenario& base, DroopAxis axis, std::span<const double> grid,
                                     const SimConfig& config, unsigned threads) {
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw ValidationError("droop sweep grid must be strictly increasing");
    std::vector<BatchJob> jobs;
    for (double x : grid) jobs.push_back({droop_sweep_variant(base, axis, x), config});
    const auto results = run_batch(jobs, threads);

    SimulatedSweep out;
    out.curve.axis = axis;
    out.curve.source = CurveSource::simulated;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        SimulatedSweepPoint pt;
        pt.target = grid[k];
        if (!results[k].trace) {
            pt.error = results[k].error;
        } else {
            pt.steady = measure_steady_state(*results[k].trace, 0);
            if (!pt.steady.settled) pt.error = "did not settle";
        }
        out.points.push_back(pt);
    }
    std::vector<CurvePoint> pts;
    for (const auto& pt : out.points) {
        if (!pt.error.empty()) continue;
        pts.push_back(axis == DroopAxis::p ? CurvePoint{pt.steady.p, pt.steady.omega}
                                           : CurvePoint{pt.steady.q, pt.steady.vmag});
    }
    std::sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
    for (const auto& p : pts)
        if (out.curve.points.empty() || p.x > out.curve.points.back().x) out.curve.points.push_back(p);
    return out;
}

StationarityResidual stationarity_residual(const DvocParams& prm, const SteadyState& ss) {
    StationarityResidual r;
    r.omega_rel = std::abs(ss.omega - stationary_frequency(prm, ss.p, ss.q, ss.vmag)) / prm.omega0();
    const StationaryPoint sp = stationary_point(prm, ss.p, ss.q);
    r.magnitude_rel = std::abs(ss.vmag - sp.magnitude) / sp.magnitude;
    return r;
}

std::vector<PowerPair> forward_power_flow(const Topology& topo, double omega, std::span<const AlphaBetaVec> voltages) {
    const auto currents = solve_currents_quasistatic(topo, omega, voltages);
    std::vector<PowerPair> out;
    for (std::size_t k = 0; k < voltages.size(); ++k) out.push_back(measure_power(voltages[k], currents[k]));
    return out;
}

const char* to_string(ConsistencyStatus s) {
    switch (s) {
        case ConsistencyStatus::consistent: return "consistent";
        case ConsistencyStatus::inconsistent: return "inconsistent";
        case ConsistencyStatus::unsolved: return "unsolved";
    }
    return "unknown";
}

ConsistencyReport check_setpoint_consistency(const Topology& topo, std::span<const SetPoints> set_points,
                                             double omega, double tolerance) {
    using cd = std::complex<double>;
    const std::size_t n = topo.inverters.size();
    if (set_points.size() != n) throw ValidationError("need one set-point triple per inverter");
    const QuasiStaticNetwork net(topo, omega);
    const Eigen::MatrixXcd& y = net.reduced();

    double base = 0.0;
    for (const auto& sp : set_points) base = std::max({base, std::abs(sp.p_star), std::abs(sp.q_star)});
    if (base == 0.0) base = 1.0;

    Eigen::VectorXd angles = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    auto voltages = [&](const Eigen::VectorXd& th) {
        Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k)
            v(static_cast<Eigen::Index>(k)) = std::polar(set_points[k].v_star, th(static_cast<Eigen::Index>(k)));
        return v;
    };
    // s_k = v_k conj(i_k) = p_k + j q_k with q = v^T J i.
    auto residual = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXcd v = voltages(th);
        const Eigen::VectorXcd i = y * v;
        Eigen::VectorXd r(static_cast<Eigen::Index>(2 * n));
        for (std::size_t k = 0; k < n; ++k) {
            const auto e = static_cast<Eigen::Index>(k);
            const cd s = v(e) * std::conj(i(e));
            r(2 * e) = s.real() - set_points[k].p_star;
            r(2 * e + 1) = s.imag() - set_points[k].q_star;
        }
        return r;
    };

    ConsistencyReport rep;
    Eigen::VectorXd r = residual(angles);
    bool converged = n <= 1;
    bool failed = false;
    const auto unknowns = static_cast<Eigen::Index>(n > 0 ? n - 1 : 0);
    for (int it = 0; it < 100 && !converged; ++it) {
        rep.iterations = it + 1;
        const Eigen::VectorXcd v = voltages(angles);
        const Eigen::VectorXcd i = y * v;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), unknowns);
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
            for (Eigen::Index m = 1; m < static_cast<Eigen::Index>(n); ++m) {
                // d s_k / d theta_m, with d v_m / d theta_m = j v_m.
                cd d = -cd(0, 1) * v(k) * std::conj(y(k, m) * v(m));
                if (k == m) d += cd(0, 1) * v(k) * std::conj(i(k));
                jac(2 * k, m - 1) = d.real();
                jac(2 * k + 1, m - 1) = d.imag();
            }
        }
        const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
        if (!step.allFinite()) {
            failed = true;
            break;
        }
        double scale = 1.0;
        bool improved = false;
        Eigen::VectorXd trial = angles;
        for (int h = 0; h < 40; ++h, scale *= 0.5) {
            trial = angles;
            trial.tail(unknowns) += scale * step;
            const Eigen::VectorXd rt = residual(trial);
            if (rt.allFinite() && rt.norm() < r.norm()) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            converged = true;  // local minimum of the residual
            break;
        }
        const double moved = (scale * step).norm();
        angles = trial;
        r = residual(angles);
        if (moved < 1e-14 || r.norm() < 1e-15 * base) converged = true;
    }
    if (!r.allFinite()) failed = true;

    rep.residual = r.norm();
    rep.residual_pu = rep.residual / base;
    const Eigen::VectorXcd v = voltages(angles);
    const Eigen::VectorXcd i = y * v;
    for (std::size_t k = 0; k < n; ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        rep.angles.push_back(angles(e));
        const cd s = v(e) * std::conj(i(e));
        rep.achieved.push_back({s.real(), s.imag()});
    }
    if (failed || !converged) {
        rep.status = ConsistencyStatus::unsolved;
    } else {
        rep.status = rep.residual_pu < tolerance ? ConsistencyStatus::consistent : ConsistencyStatus::inconsistent;
    }
    return rep;
}

}  // namespace dvoc
