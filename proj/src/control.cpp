#include "dvoc/control.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvoc/errors.hpp"

namespace dvoc {

DvocParams::DvocParams(DvocGains gains, SetPoints set_points, double omega0)
    : gains_(gains), set_points_(set_points), omega0_(omega0) {
    std::vector<std::string> problems;
    if (!(gains.eta > 0.0) || !std::isfinite(gains.eta)) problems.push_back("eta must be finite and > 0");
    if (!(gains.alpha > 0.0) || !std::isfinite(gains.alpha)) problems.push_back("alpha must be finite and > 0");
    if (!(gains.kappa >= 0.0 && gains.kappa <= std::numbers::pi)) problems.push_back("kappa must lie in [0, pi]");
    if (!(set_points.v_star > 0.0) || !std::isfinite(set_points.v_star))
        problems.push_back("v_star must be finite and > 0");
    if (!std::isfinite(set_points.p_star)) problems.push_back("p_star must be finite");
    if (!std::isfinite(set_points.q_star)) problems.push_back("q_star must be finite");
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) problems.push_back("omega0 must be finite and > 0");
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

void validate(const DroopParams& params) {
    std::vector<std::string> problems;
    if (!std::isfinite(params.kp)) problems.push_back("kp must be finite");
    if (!std::isfinite(params.kq)) problems.push_back("kq must be finite");
    if (!(params.omega0 > 0.0) || !std::isfinite(params.omega0)) problems.push_back("omega0 must be finite and > 0");
    if (!(params.v_star > 0.0) || !std::isfinite(params.v_star)) problems.push_back("v_star must be finite and > 0");
    if (!std::isfinite(params.p_star) || !std::isfinite(params.q_star)) problems.push_back("set-points must be finite");
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

Mat2 rotation(double kappa) {
    const double c = std::cos(kappa);
    const double s = std::sin(kappa);
    return {c, -s, s, c};
}

Mat2 gain_matrix(const DvocParams& params) {
    const double inv = 1.0 / (params.v_star() * params.v_star());
    const Mat2 power{params.p_star(), params.q_star(), -params.q_star(), params.p_star()};
    return inv * (rotation(params.kappa()) * power);
}

double magnitude_error(AlphaBetaVec v, double v_star) {
    const double vs2 = v_star * v_star;
    return (vs2 - v.norm2()) / vs2;
}

AlphaBetaVec phase_error(AlphaBetaVec v, AlphaBetaVec i_o, const DvocParams& params) {
    return gain_matrix(params) * v - rotation(params.kappa()) * i_o;
}

AlphaBetaVec dvoc_rhs(const DvocState& state, AlphaBetaVec i_o, const DvocParams& params) {
    const AlphaBetaVec v = state.v;
    const Mat2 k = gain_matrix(params);
    const Mat2 r = rotation(params.kappa());
    const AlphaBetaVec inner = k * v - r * i_o + (params.alpha() * magnitude_error(v, params.v_star())) * v;
    return params.omega0() * rotate_quarter(v) + params.eta() * inner;
}

PolarRate dvoc_rhs_polar(const PolarState& state, double p, double q, const DvocParams& params) {
    const double mag = state.magnitude;
    if (!(mag > 0.0)) throw std::domain_error("polar dVOC form is undefined at zero magnitude");
    const double vs2 = params.v_star() * params.v_star();
    const double m2 = mag * mag;
    const double dp = params.p_star() / vs2 - p / m2;
    const double dq = params.q_star() / vs2 - q / m2;

    // R(kappa) [dp, -dq]
    const Mat2 r = rotation(params.kappa());
    const AlphaBetaVec mixed = r * AlphaBetaVec{dp, -dq};

    PolarRate rate;
    rate.magnitude = params.eta() * mag * mixed.a + (params.eta() * params.alpha() / vs2) * (vs2 - m2) * mag;
    rate.theta = params.eta() * mixed.b + params.omega0();
    return rate;
}

double droop_approx_freq(double p, const DvocParams& params) {
    return params.omega0() + params.eta() / (params.v_star() * params.v_star()) * (params.p_star() - p);
}

double droop_approx_vmag_ss(double q, const DvocParams& params) {
    return params.v_star() + (params.q_star() - q) / (params.alpha() * params.v_star());
}

double droop_linearized_vmag_ss(double q, const DvocParams& params) {
    return params.v_star() + (params.q_star() - q) / (2.0 * params.alpha() * params.v_star());
}

PolarRate droop_rhs(const PolarState& state, double p, double q, const DroopParams& params) {
    return {-state.magnitude + params.v_star + params.kq * (params.q_star - q),
            params.omega0 + params.kp * (params.p_star - p)};
}

double kappa_from_line(double omega0, double inductance, double resistance) {
    if (inductance < 0.0 || resistance < 0.0) throw ValidationError("line R and L must be non-negative");
    if (inductance == 0.0 && resistance == 0.0) throw ValidationError("line impedance is zero (R = L = 0)");
    return std::atan2(omega0 * inductance, resistance);
}

PolarState to_polar(AlphaBetaVec v) { return {v.norm(), std::atan2(v.b, v.a)}; }

AlphaBetaVec from_polar(const PolarState& s) {
    return {s.magnitude * std::cos(s.theta), s.magnitude * std::sin(s.theta)};
}

}  // namespace dvoc
