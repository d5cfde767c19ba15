#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dvoc/analysis.hpp"
#include "dvoc/control.hpp"
#include "dvoc/errors.hpp"
#include "dvoc/network.hpp"
#include "dvoc/scenario.hpp"
#include "dvoc/sim.hpp"

namespace py = pybind11;
using namespace dvoc;

namespace {

py::array_t<double> as_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::tuple as_tuple(AlphaBetaVec v) { return py::make_tuple(v.a, v.b); }

AlphaBetaVec as_vec(std::pair<double, double> p) { return {p.first, p.second}; }

py::dict trace_to_dict(const Trace& trace) {
    py::dict out;
    out["time"] = as_array(trace.time);
    py::dict invs;
    for (const auto& s : trace.inverters) {
        py::dict d;
        d["va"] = as_array(s.va);
        d["vb"] = as_array(s.vb);
        d["ia"] = as_array(s.ia);
        d["ib"] = as_array(s.ib);
        d["p"] = as_array(s.p);
        d["q"] = as_array(s.q);
        d["vmag"] = as_array(s.vmag);
        d["theta"] = as_array(s.theta);
        invs[py::str(s.id)] = d;
    }
    out["inverters"] = invs;
    py::list events;
    for (const auto& e : trace.events) events.append(py::make_tuple(e.time, e.description));
    out["events"] = events;
    out["log"] = trace.log;
    return out;
}

}  // namespace

PYBIND11_MODULE(_dvoc, m) {
    m.doc() = "dVOC inverter network simulation";
    m.attr("__version__") = DVOC_VERSION;

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            validation_error(e.what());
        } catch (const NumericError& e) {
            numeric_error(e.what());
        }
    });

    py::class_<DvocParams>(m, "DvocParams")
        .def(py::init([](double eta, double alpha, double kappa, double p_star, double q_star, double v_star,
                         double omega0) { return DvocParams({eta, alpha, kappa}, {p_star, q_star, v_star}, omega0); }),
             py::arg("eta"), py::arg("alpha"), py::arg("kappa"), py::arg("p_star"), py::arg("q_star"),
             py::arg("v_star"), py::arg("omega0"))
        .def_property_readonly("eta", &DvocParams::eta)
        .def_property_readonly("alpha", &DvocParams::alpha)
        .def_property_readonly("kappa", &DvocParams::kappa)
        .def_property_readonly("p_star", &DvocParams::p_star)
        .def_property_readonly("q_star", &DvocParams::q_star)
        .def_property_readonly("v_star", &DvocParams::v_star)
        .def_property_readonly("omega0", &DvocParams::omega0)
        .def("__repr__", [](const DvocParams& p) {
            return "DvocParams(eta=" + std::to_string(p.eta()) + ", alpha=" + std::to_string(p.alpha()) +
                   ", kappa=" + std::to_string(p.kappa()) + ", p_star=" + std::to_string(p.p_star()) +
                   ", q_star=" + std::to_string(p.q_star()) + ", v_star=" + std::to_string(p.v_star()) + ")";
        });

    m.def(
        "dvoc_rhs",
        [](std::pair<double, double> v, std::pair<double, double> i_o, const DvocParams& p) {
            return as_tuple(dvoc_rhs({as_vec(v)}, as_vec(i_o), p));
        },
        py::arg("v"), py::arg("i_o"), py::arg("params"), "dv/dt of the dVOC law for voltage v and current i_o.");
    m.def(
        "dvoc_rhs_polar",
        [](double magnitude, double theta, double p, double q, const DvocParams& prm) {
            const PolarRate r = dvoc_rhs_polar({magnitude, theta}, p, q, prm);
            return py::make_tuple(r.magnitude, r.theta);
        },
        py::arg("magnitude"), py::arg("theta"), py::arg("p"), py::arg("q"), py::arg("params"));
    m.def(
        "phase_error",
        [](std::pair<double, double> v, std::pair<double, double> i_o, const DvocParams& p) {
            return as_tuple(phase_error(as_vec(v), as_vec(i_o), p));
        },
        py::arg("v"), py::arg("i_o"), py::arg("params"));
    m.def(
        "magnitude_error", [](std::pair<double, double> v, double v_star) { return magnitude_error(as_vec(v), v_star); },
        py::arg("v"), py::arg("v_star"));
    m.def(
        "gain_matrix",
        [](const DvocParams& p) {
            const Mat2 k = gain_matrix(p);
            return std::vector<std::vector<double>>{{k.m00, k.m01}, {k.m10, k.m11}};
        },
        py::arg("params"));
    m.def(
        "measure_power",
        [](std::pair<double, double> v, std::pair<double, double> i) {
            const PowerPair s = measure_power(as_vec(v), as_vec(i));
            return py::make_tuple(s.p, s.q);
        },
        py::arg("v"), py::arg("i"));
    m.def("kappa_from_line", &kappa_from_line, py::arg("omega0"), py::arg("inductance"), py::arg("resistance"));
    m.def("droop_approx_freq", &droop_approx_freq, py::arg("p"), py::arg("params"));
    m.def("droop_approx_vmag_ss", &droop_approx_vmag_ss, py::arg("q"), py::arg("params"));
    m.def("droop_linearized_vmag_ss", &droop_linearized_vmag_ss, py::arg("q"), py::arg("params"));
    m.def(
        "stationary_point",
        [](const DvocParams& prm, double p, double q) {
            const StationaryPoint s = stationary_point(prm, p, q);
            return py::make_tuple(s.magnitude, s.omega);
        },
        py::arg("params"), py::arg("p"), py::arg("q"));
    m.def(
        "blackstart_analytic",
        [](double v0, const DvocParams& prm, const std::vector<double>& times) {
            return as_array(blackstart_analytic(v0, prm, times).magnitude);
        },
        py::arg("v0"), py::arg("params"), py::arg("times"));

    py::class_<ScenarioFile>(m, "Scenario")
        .def_property_readonly("name", [](const ScenarioFile& f) { return f.scenario.name; })
        .def_property_readonly("inverter_ids",
                               [](const ScenarioFile& f) {
                                   std::vector<std::string> ids;
                                   for (const auto& i : f.scenario.inverters) ids.push_back(i.id);
                                   return ids;
                               })
        .def_property(
            "dt", [](const ScenarioFile& f) { return f.config.dt; },
            [](ScenarioFile& f, double dt) { f.config.dt = dt; })
        .def_property(
            "t_end", [](const ScenarioFile& f) { return f.config.t_end; },
            [](ScenarioFile& f, double t) { f.config.t_end = t; })
        .def_property(
            "seed", [](const ScenarioFile& f) { return f.config.noise_seed; },
            [](ScenarioFile& f, std::uint64_t s) { f.config.noise_seed = s; })
        .def("to_json", [](const ScenarioFile& f) { return serialize_scenario(f); })
        .def("__eq__", [](const ScenarioFile& a, const ScenarioFile& b) { return a == b; });

    m.def("builtin_scenarios", &builtin_scenario_names);
    m.def("load_scenario", [](const std::string& name) { return load_scenario(name); }, py::arg("name_or_path"));
    m.def("parse_scenario", [](const std::string& text) { return parse_scenario_text(text); }, py::arg("text"));
    m.def(
        "run",
        [](const ScenarioFile& f) {
            Trace trace;
            {
                py::gil_scoped_release release;
                trace = run_scenario(f.scenario, f.config);
            }
            return trace_to_dict(trace);
        },
        py::arg("scenario"), "Integrates the scenario and returns its trace as numpy arrays.");
    m.def(
        "check_consistency",
        [](const ScenarioFile& f, double tolerance) {
            std::vector<SetPoints> sps;
            for (const auto& inv : f.scenario.inverters) {
                if (const auto* d = std::get_if<DvocParams>(&inv.controller)) {
                    sps.push_back(d->set_points());
                } else {
                    const auto& dr = std::get<DroopParams>(inv.controller);
                    sps.push_back({dr.p_star, dr.q_star, dr.v_star});
                }
            }
            const double omega =
                f.config.network_omega.value_or(omega0_of(f.scenario.inverters.front().controller));
            const ConsistencyReport r = check_setpoint_consistency(f.scenario.topology, sps, omega, tolerance);
            py::dict d;
            d["status"] = std::string(to_string(r.status));
            d["residual"] = r.residual;
            d["residual_pu"] = r.residual_pu;
            d["angles"] = r.angles;
            return d;
        },
        py::arg("scenario"), py::arg("tolerance") = 1e-6);
}
