#include <array>
#include <string>
#include <string_view>

#include "dvoc/scenario.hpp"

namespace dvoc {

namespace {

struct Builtin {
    std::string_view name;
    std::string_view text;
};

// Testbed inverters: eta 21.71, alpha 0.9722, kappa pi/2, 500 W / -125 var / 120 Vrms, 24 uF filter.
// Assumed line: every inverter reaches the load bus through L_g = 0.2 mH plus 0.1 ohm.

constexpr std::string_view kFig2 = R"({
  "name": "paper-fig2",
  "inverters": [
    {"id": "inv1", "controller": "dvoc", "eta_ohm_rad_s": 43.43, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 0.5, "q_star_var": 0.0, "v_star_vpeak": 1.0,
     "f0_hz": 60.0, "c_f_farad": 0.0, "initial": {"v0_vpeak": 1.0, "theta0_rad": 0.0}}
  ],
  "loads": [{"id": "bus", "g_siemens": 0.5}],
  "branches": [{"id": "line1", "from": "inv1", "to": "bus", "r_ohm": 0.001, "l_henry": 1e-5}],
  "sim": {"dt_s": 1e-6, "t_end_s": 0.6, "network": "dynamic", "record_decimation": 100, "noise_seed": 8},
  "outputs": ["trace", "metrics", "curve"]
})";

constexpr std::string_view kFig4 = R"({
  "name": "paper-fig4",
  "inverters": [
    {"id": "inv1", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 500.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6}
  ],
  "loads": [{"id": "bus", "p_w": 500.0, "v_rated_vrms": 120.0}],
  "branches": [{"id": "line1", "from": "inv1", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4}],
  "sim": {"dt_s": 1e-6, "t_end_s": 0.8, "network": "dynamic", "record_decimation": 100, "noise_seed": 8},
  "outputs": ["trace", "metrics"]
})";

constexpr std::string_view kFig5 = R"({
  "name": "paper-fig5",
  "inverters": [
    {"id": "inv1", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 500.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6},
    {"id": "inv2", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 500.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6}
  ],
  "loads": [{"id": "bus", "p_w": 500.0, "v_rated_vrms": 120.0}],
  "branches": [
    {"id": "line1", "from": "inv1", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4},
    {"id": "line2", "from": "inv2", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4, "connected": false}
  ],
  "events": [{"t_s": 0.6, "type": "connect", "branch": "line2"}],
  "sim": {"dt_s": 1e-6, "t_end_s": 1.2, "network": "dynamic", "record_decimation": 100, "noise_seed": 8},
  "outputs": ["trace", "metrics"]
})";

constexpr std::string_view kFig6 = R"({
  "name": "paper-fig6",
  "inverters": [
    {"id": "inv1", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 500.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6},
    {"id": "inv2", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 500.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6}
  ],
  "loads": [{"id": "bus", "p_w": 250.0, "v_rated_vrms": 120.0}],
  "branches": [
    {"id": "line1", "from": "inv1", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4},
    {"id": "line2", "from": "inv2", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4}
  ],
  "events": [{"t_s": 0.6, "type": "load_step", "load": "bus", "p_w": 750.0, "v_rated_vrms": 120.0}],
  "sim": {"dt_s": 1e-6, "t_end_s": 1.0, "network": "dynamic", "record_decimation": 100, "noise_seed": 8},
  "outputs": ["trace", "metrics"]
})";

constexpr std::string_view kFig7 = R"({
  "name": "paper-fig7",
  "inverters": [
    {"id": "inv1", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 250.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6},
    {"id": "inv2", "controller": "dvoc", "eta_ohm_rad_s": 21.71, "alpha_siemens": 0.9722,
     "kappa_rad": 1.5707963267948966, "p_star_w": 250.0, "q_star_var": -125.0, "v_star_vrms": 120.0,
     "f0_hz": 60.0, "c_f_farad": 24e-6}
  ],
  "loads": [{"id": "bus", "p_w": 750.0, "v_rated_vrms": 120.0}],
  "branches": [
    {"id": "line1", "from": "inv1", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4},
    {"id": "line2", "from": "inv2", "to": "bus", "r_ohm": 0.1, "l_henry": 2e-4}
  ],
  "events": [{"t_s": 0.6, "type": "setpoint", "inverter": "inv2", "p_star_w": 500.0}],
  "sim": {"dt_s": 1e-6, "t_end_s": 1.2, "network": "dynamic", "record_decimation": 100, "noise_seed": 8},
  "outputs": ["trace", "metrics"]
})";

constexpr std::array kBuiltins{
    Builtin{"blackstart", kFig4}, Builtin{"paper-fig2", kFig2}, Builtin{"paper-fig4", kFig4},
    Builtin{"paper-fig5", kFig5}, Builtin{"paper-fig6", kFig6}, Builtin{"paper-fig7", kFig7},
};

}  // namespace

std::vector<std::string> builtin_scenario_names() {
    std::vector<std::string> out;
    for (const auto& b : kBuiltins) out.emplace_back(b.name);
    return out;
}

std::optional<std::string_view> builtin_scenario_text(std::string_view name) {
    for (const auto& b : kBuiltins)
        if (b.name == name) return b.text;
    return std::nullopt;
}

}  // namespace dvoc
