#include "jsoq/compensation.hpp"
#include "jsoq/errors.hpp"
#include "jsoq/kernel.hpp"
#include "jsoq/oracle.hpp"
#include "jsoq/simulator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace jsoq;

namespace {

py::dict interval_dict(const Interval& iv) {
    py::dict d;
    d["mean"] = iv.mean;
    d["std_error"] = iv.std_error;
    d["half_width_95"] = iv.half_width;
    return d;
}

struct OracleResult {
    TruncatedSolution solution;
    StationaryField field;
};

}  // namespace

PYBIND11_MODULE(_jsoq, m) {
    m.doc() = "Two-orbit retrial queue with join-the-shortest-orbit routing";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidParameter>(m, "InvalidParameter", base.ptr());
    py::register_exception<Unstable>(m, "Unstable", base.ptr());
    auto domain = py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<NumericalDomainError>(m, "NumericalDomainError", domain.ptr());
    py::register_exception<TruncationError>(m, "TruncationError", base.ptr());
    py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
    py::register_exception<SolverError>(m, "SolverError", base.ptr());
    py::register_exception<DegenerateParameter>(m, "DegenerateParameter", base.ptr());
    py::register_exception<InternalError>(m, "InternalError", base.ptr());

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<double, double, double>(), py::arg("lambda_"), py::arg("mu"), py::arg("alpha"))
        .def_property_readonly("lambda_", &ModelParams::lambda)
        .def_property_readonly("mu", &ModelParams::mu)
        .def_property_readonly("alpha", &ModelParams::alpha)
        .def_property_readonly("rho", &ModelParams::rho)
        .def_property_readonly("stable", &ModelParams::stable)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(lambda_=" + std::to_string(p.lambda()) + ", mu=" + std::to_string(p.mu()) +
                   ", alpha=" + std::to_string(p.alpha()) + ")";
        });

    m.def("kernel_value", &kernel_value, py::arg("params"), py::arg("gamma"), py::arg("delta"));
    m.def("delta_given_gamma", &delta_given_gamma, py::arg("params"), py::arg("gamma"));
    m.def("gamma_given_delta", &gamma_given_delta, py::arg("params"), py::arg("delta"));
    m.def("asymptotic_roots", [](const ModelParams& p) {
        const KernelRoots r = asymptotic_roots(p);
        py::dict d;
        d["w_minus"] = r.w_minus;
        d["w_plus"] = r.w_plus;
        d["s_minus"] = r.s_minus;
        d["s_plus"] = r.s_plus;
        return d;
    });

    py::class_<CompensationSeries>(m, "CompensationSeries")
        .def_readonly("gammas", &CompensationSeries::gammas)
        .def_readonly("deltas", &CompensationSeries::deltas)
        .def_readonly("h", &CompensationSeries::h)
        .def_readonly("c", &CompensationSeries::c)
        .def_readonly("norm_const", &CompensationSeries::norm_const)
        .def_readonly("term_count", &CompensationSeries::term_count)
        .def_readonly("tolerance_achieved", &CompensationSeries::tolerance_achieved)
        .def("probability", &evaluate, py::arg("m"), py::arg("n"), py::arg("k"))
        .def("measures", [](const CompensationSeries& s) {
            const Measures ms = measures(s);
            py::dict d;
            d["total_mass"] = ms.total_mass;
            d["p_busy"] = ms.p_busy;
            d["mean_min"] = ms.mean_min;
            d["mean_diff"] = ms.mean_diff;
            d["mean_total_orbit"] = ms.mean_total_orbit;
            d["q0_row"] = std::vector<double>(ms.q0_row.begin(), ms.q0_row.end());
            return d;
        });

    m.def("build_series", py::overload_cast<const ModelParams&, double, std::size_t>(&build_series),
          py::arg("params"), py::arg("tol") = 1e-10, py::arg("max_terms") = 200);

    m.def(
        "balance_residual",
        [](const CompensationSeries& s, int m_max, int n_max) {
            return balance_residual(compensation_field(s), s.params, m_max, n_max);
        },
        py::arg("series"), py::arg("m_max"), py::arg("n_max"));

    py::class_<OracleResult>(m, "OracleSolution")
        .def_property_readonly("n_trunc", [](const OracleResult& o) { return o.solution.n_trunc; })
        .def_property_readonly("residual", [](const OracleResult& o) { return o.solution.residual; })
        .def_property_readonly("mass_deficit_bound",
                               [](const OracleResult& o) { return o.solution.mass_deficit_bound; })
        .def("raw", [](const OracleResult& o, int i, int j, int k) { return o.solution(i, j, k); },
             py::arg("q1"), py::arg("q2"), py::arg("k"))
        .def("probability", [](const OracleResult& o, int mm, int n, int k) { return o.field(mm, n, k); },
             py::arg("m"), py::arg("n"), py::arg("k"))
        .def("decay", [](const OracleResult& o, int n, int k, int lo, int hi) {
            return estimate_decay(o.field, n, k, lo, hi);
        }, py::arg("n"), py::arg("k"), py::arg("m_lo"), py::arg("m_hi"));

    m.def(
        "oracle",
        [](const ModelParams& p, int n_trunc) {
            if (n_trunc <= 0) n_trunc = default_truncation(p);
            TruncatedSolution sol = solve_stationary(build_generator(p, n_trunc));
            StationaryField f = to_transformed(sol);
            return OracleResult{std::move(sol), std::move(f)};
        },
        py::arg("params"), py::arg("n_trunc") = 0);

    m.def("verify_appendix", [](const ModelParams& p) {
        const AppendixCheck a = verify_appendix(p);
        py::dict d;
        d["v"] = std::vector<double>{a.v[0], a.v[1]};
        d["residual_block0"] = a.residual_block0;
        d["residual_interior"] = a.residual_interior;
        d["residual_interior_alt"] = a.residual_interior_alt;
        d["drift"] = a.drift;
        return d;
    });

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](const ModelParams& p, double horizon, double warmup, int reps, std::uint64_t seed) {
                 return SimConfig{p, horizon, warmup, reps, seed};
             }),
             py::arg("params"), py::arg("horizon") = 1e6, py::arg("warmup") = 1e4, py::arg("replications") = 10,
             py::arg("seed") = 1)
        .def_readwrite("horizon", &SimConfig::horizon)
        .def_readwrite("warmup", &SimConfig::warmup)
        .def_readwrite("replications", &SimConfig::replications)
        .def_readwrite("seed", &SimConfig::seed);

    m.def(
        "simulate",
        [](const SimConfig& cfg, int m_max, int n_max) {
            SimEstimate est;
            {
                py::gil_scoped_release release;
                est = simulate(cfg, m_max, n_max);
            }
            py::dict probs;
            for (int mm = 0; mm <= m_max; ++mm) {
                for (int n = 0; n <= n_max; ++n) {
                    for (int k = 0; k < 2; ++k) probs[py::make_tuple(mm, n, k)] = interval_dict(est.at(mm, n, k));
                }
            }
            py::dict d;
            d["probabilities"] = probs;
            d["p_busy"] = interval_dict(est.p_busy);
            d["mean_total_orbit"] = interval_dict(est.mean_total_orbit);
            d["flow_ratio"] = interval_dict(est.flow_ratio);
            d["p_q1_longer"] = interval_dict(est.p_q1_longer);
            d["p_q2_longer"] = interval_dict(est.p_q2_longer);
            d["mean_final_total_orbit"] = est.mean_final_total_orbit;
            d["events"] = est.events;
            return d;
        },
        py::arg("config"), py::arg("m_max"), py::arg("n_max"));
}
