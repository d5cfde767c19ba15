#pragma once

// Dispatchable virtual oscillator control (dVOC): the control law in
// rectangular alpha-beta coordinates, its phase/magnitude error split, the
// polar form with its embedded droop behaviour, and a conventional droop
// controller used as a baseline.
//
// Power convention throughout: p = v^T i and q = v^T J i with peak-amplitude
// alpha-beta vectors. No 1/2 or 3/2 factors are applied anywhere.

#include "dvoc/vec2.hpp"

namespace dvoc {

struct DvocGains {
    double eta = 0.0;    ///< synchronisation gain, ohm*rad/s
    double alpha = 0.0;  ///< voltage-magnitude gain, siemens
    double kappa = 0.0;  ///< rotation angle, rad, in [0, pi]
};

struct SetPoints {
    double p_star = 0.0;  ///< W
    double q_star = 0.0;  ///< var
    double v_star = 0.0;  ///< V, peak amplitude of the alpha-beta vector
};

/// Validated dVOC constants. Construction throws ValidationError unless
/// eta > 0, alpha > 0, 0 <= kappa <= pi, v* > 0 and omega0 > 0.
class DvocParams {
public:
    DvocParams(DvocGains gains, SetPoints set_points, double omega0);

    [[nodiscard]] double eta() const { return gains_.eta; }
    [[nodiscard]] double alpha() const { return gains_.alpha; }
    [[nodiscard]] double kappa() const { return gains_.kappa; }
    [[nodiscard]] double p_star() const { return set_points_.p_star; }
    [[nodiscard]] double q_star() const { return set_points_.q_star; }
    [[nodiscard]] double v_star() const { return set_points_.v_star; }
    [[nodiscard]] double omega0() const { return omega0_; }
    [[nodiscard]] const DvocGains& gains() const { return gains_; }
    [[nodiscard]] const SetPoints& set_points() const { return set_points_; }

    /// Same gains, new set-points (dispatch).
    [[nodiscard]] DvocParams with_set_points(SetPoints sp) const { return {gains_, sp, omega0_}; }

    friend bool operator==(const DvocParams& x, const DvocParams& y) {
        return x.gains_.eta == y.gains_.eta && x.gains_.alpha == y.gains_.alpha &&
               x.gains_.kappa == y.gains_.kappa && x.set_points_.p_star == y.set_points_.p_star &&
               x.set_points_.q_star == y.set_points_.q_star && x.set_points_.v_star == y.set_points_.v_star &&
               x.omega0_ == y.omega0_;
    }

private:
    DvocGains gains_;
    SetPoints set_points_;
    double omega0_;
};

struct DvocState {
    AlphaBetaVec v;

    friend bool operator==(const DvocState&, const DvocState&) = default;
};

/// Voltage in polar form. theta is never wrapped.
struct PolarState {
    double magnitude = 0.0;
    double theta = 0.0;

    friend bool operator==(const PolarState&, const PolarState&) = default;
};

/// Time derivative of a PolarState.
struct PolarRate {
    double magnitude = 0.0;  ///< V/s
    double theta = 0.0;      ///< rad/s
};

/// Conventional P-f / Q-V droop constants.
struct DroopParams {
    double kp = 0.0;  ///< rad/s per W
    double kq = 0.0;  ///< V per var
    double omega0 = 0.0;
    double v_star = 0.0;
    double p_star = 0.0;
    double q_star = 0.0;

    friend bool operator==(const DroopParams&, const DroopParams&) = default;
};

/// Throws ValidationError if any constant is non-finite or omega0, v* are not positive.
void validate(const DroopParams& params);

[[nodiscard]] Mat2 rotation(double kappa);

/// K = (1/v*^2) R(kappa) [[p*, q*], [-q*, p*]].
[[nodiscard]] Mat2 gain_matrix(const DvocParams& params);

/// phi(v) = (v*^2 - |v|^2) / v*^2.
[[nodiscard]] double magnitude_error(AlphaBetaVec v, double v_star);

/// e_theta = K v - R(kappa) i_o.
[[nodiscard]] AlphaBetaVec phase_error(AlphaBetaVec v, AlphaBetaVec i_o, const DvocParams& params);

/// dv/dt = omega0 J v + eta (K v - R(kappa) i_o + alpha phi(v) v).
[[nodiscard]] AlphaBetaVec dvoc_rhs(const DvocState& state, AlphaBetaVec i_o, const DvocParams& params);

/// The same law written in (|v|, theta) with the measured powers p, q.
/// Throws std::domain_error at zero magnitude where the chart is undefined.
[[nodiscard]] PolarRate dvoc_rhs_polar(const PolarState& state, double p, double q, const DvocParams& params);

/// Small-deviation frequency droop: omega0 + (eta / v*^2) (p* - p).
[[nodiscard]] double droop_approx_freq(double p, const DvocParams& params);

/// Steady-state magnitude of the small-deviation V-Q droop as commonly
/// quoted: v* + (q* - q) / (alpha v*).
[[nodiscard]] double droop_approx_vmag_ss(double q, const DvocParams& params);

/// First-order expansion of the exact stationary magnitude around v*:
/// v* + (q* - q) / (2 alpha v*). Valid at kappa = pi/2; the factor of two
/// comes from d(v*^2 - |v|^2) = -2 v* d|v|.
[[nodiscard]] double droop_linearized_vmag_ss(double q, const DvocParams& params);

/// Conventional droop: dtheta/dt = omega0 + kp (p* - p), d|v|/dt = -|v| + v* + kq (q* - q).
[[nodiscard]] PolarRate droop_rhs(const PolarState& state, double p, double q, const DroopParams& params);

/// kappa = atan2(omega0 L, R). Throws ValidationError for R = L = 0 or negative values.
[[nodiscard]] double kappa_from_line(double omega0, double inductance, double resistance);

[[nodiscard]] PolarState to_polar(AlphaBetaVec v);
[[nodiscard]] AlphaBetaVec from_polar(const PolarState& s);

}  // namespace dvoc
