// pybind11 bindings for the nnmoe core: fitting, prediction, clustering,
// model selection, simulation, and model-file round trips.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nnmoe/analysis.hpp"
#include "nnmoe/io.hpp"
#include "nnmoe/moe.hpp"
#include "nnmoe/simulation.hpp"

namespace py = pybind11;
using namespace nnmoe;

PYBIND11_MODULE(_nnmoe, m) {
    m.doc() = "Non-normal mixtures of experts (C++ core)";

    py::register_exception<DegenerateFitError>(m, "DegenerateFitError",
                                               PyExc_RuntimeError);
    py::register_exception<EvaluationError>(m, "EvaluationError",
                                            PyExc_RuntimeError);
    py::register_exception<io::IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<io::ParseError>(m, "ParseError", PyExc_ValueError);

    py::enum_<Family>(m, "Family")
        .value("Normal", Family::Normal)
        .value("SkewNormal", Family::SkewNormal)
        .value("StudentT", Family::StudentT)
        .value("SkewT", Family::SkewT);
    m.def("family_name", &family_name);
    m.def("family_from_name", &family_from_name);
    m.def("family_has_lambda", &family_has_lambda);
    m.def("family_has_nu", &family_has_nu);

    py::class_<MoESpec>(m, "MoESpec")
        .def(py::init([](Family family, int K, int p, int q) {
                 MoESpec s;
                 s.family = family;
                 s.K = K;
                 s.p = p;
                 s.q = q;
                 s.validate();
                 return s;
             }),
             py::arg("family"), py::arg("K"), py::arg("p") = 1, py::arg("q") = 1)
        .def_readwrite("family", &MoESpec::family)
        .def_readwrite("K", &MoESpec::K)
        .def_readwrite("p", &MoESpec::p)
        .def_readwrite("q", &MoESpec::q);

    py::class_<gating::GatingParams>(m, "GatingParams")
        .def(py::init([](Eigen::MatrixXd alpha) {
                 return gating::GatingParams{std::move(alpha)};
             }),
             py::arg("alpha"))
        .def_static("zeros", &gating::GatingParams::zeros, py::arg("K"),
                    py::arg("q"))
        .def_readwrite("alpha", &gating::GatingParams::alpha)
        .def_property_readonly("K", &gating::GatingParams::K);

    py::class_<ExpertParams>(m, "ExpertParams")
        .def(py::init([](Eigen::VectorXd beta, double sigma2, double lambda,
                         double nu) {
                 ExpertParams e;
                 e.beta = std::move(beta);
                 e.sigma2 = sigma2;
                 e.lambda = lambda;
                 e.nu = nu;
                 return e;
             }),
             py::arg("beta"), py::arg("sigma2") = 1.0, py::arg("lambda_") = 0.0,
             py::arg("nu") = 50.0)
        .def_readwrite("beta", &ExpertParams::beta)
        .def_readwrite("sigma2", &ExpertParams::sigma2)
        .def_readwrite("lambda_", &ExpertParams::lambda)
        .def_readwrite("nu", &ExpertParams::nu)
        .def_property_readonly("sigma", &ExpertParams::sigma)
        .def_property_readonly("delta", &ExpertParams::delta);

    py::class_<MoEParams>(m, "MoEParams")
        .def(py::init<>())
        .def_readwrite("gate", &MoEParams::gate)
        .def_readwrite("experts", &MoEParams::experts)
        .def_property_readonly("K", &MoEParams::K);

    py::class_<Dataset>(m, "Dataset")
        .def_static("build", &Dataset::build, py::arg("x"), py::arg("y"),
                    py::arg("p"), py::arg("q"))
        .def_readonly("x", &Dataset::x)
        .def_readonly("y", &Dataset::y)
        .def_readonly("X", &Dataset::X)
        .def_readonly("R", &Dataset::R)
        .def_property_readonly("n", &Dataset::n);

    py::class_<FitOptions>(m, "FitOptions")
        .def(py::init<>())
        .def_readwrite("n_starts", &FitOptions::n_starts)
        .def_readwrite("tol", &FitOptions::tol)
        .def_readwrite("max_iters", &FitOptions::max_iters)
        .def_readwrite("seed", &FitOptions::seed)
        .def_readwrite("kent_sigma_divisor", &FitOptions::kent_sigma_divisor)
        .def_readwrite("strict_delta_iterate", &FitOptions::strict_delta_iterate)
        .def_readwrite("pin_lambda_zero", &FitOptions::pin_lambda_zero)
        .def_readwrite("pin_nu_infinite", &FitOptions::pin_nu_infinite)
        .def_readwrite("sigma2_floor_scale", &FitOptions::sigma2_floor_scale);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("params", &FitResult::params)
        .def_readonly("loglik_trace", &FitResult::loglik_trace)
        .def_readonly("tau", &FitResult::tau)
        .def_readonly("n_iters", &FitResult::n_iters)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("seed", &FitResult::seed)
        .def_property_readonly("loglik", &FitResult::loglik);

    py::class_<EStepCache>(m, "EStepCache")
        .def_readonly("tau", &EStepCache::tau)
        .def_readonly("loglik", &EStepCache::loglik);

    m.def("fit", &fit, py::arg("spec"), py::arg("data"),
          py::arg("options") = FitOptions{},
          py::call_guard<py::gil_scoped_release>());
    m.def("log_likelihood", &log_likelihood, py::arg("params"), py::arg("spec"),
          py::arg("data"));
    m.def("e_step", &e_step, py::arg("params"), py::arg("family"),
          py::arg("data"));

    py::class_<analysis::PredictionPoint>(m, "PredictionPoint")
        .def_readonly("x", &analysis::PredictionPoint::x)
        .def_readonly("mean", &analysis::PredictionPoint::mean)
        .def_readonly("variance", &analysis::PredictionPoint::variance)
        .def_readonly("per_component_means",
                      &analysis::PredictionPoint::per_component_means)
        .def_readonly("gate_probs", &analysis::PredictionPoint::gate_probs);

    m.def("predict", &analysis::predict, py::arg("params"), py::arg("spec"),
          py::arg("x_new"));
    m.def("map_cluster", &analysis::map_cluster, py::arg("tau"));
    m.def("free_params", &analysis::free_params, py::arg("family"), py::arg("K"),
          py::arg("p"), py::arg("q"));

    py::class_<analysis::SelectionRow>(m, "SelectionRow")
        .def_readonly("K", &analysis::SelectionRow::K)
        .def_readonly("loglik", &analysis::SelectionRow::loglik)
        .def_readonly("eta", &analysis::SelectionRow::eta)
        .def_readonly("bic", &analysis::SelectionRow::bic)
        .def_readonly("aic", &analysis::SelectionRow::aic)
        .def_readonly("icl", &analysis::SelectionRow::icl);

    py::class_<analysis::SelectionTable>(m, "SelectionTable")
        .def_readonly("rows", &analysis::SelectionTable::rows)
        .def_readonly("errors", &analysis::SelectionTable::errors)
        .def_readonly("best_bic", &analysis::SelectionTable::best_bic)
        .def_readonly("best_aic", &analysis::SelectionTable::best_aic)
        .def_readonly("best_icl", &analysis::SelectionTable::best_icl);

    m.def("criteria", &analysis::criteria, py::arg("fit"), py::arg("spec"),
          py::arg("data"));
    m.def("select_K", &analysis::select_K, py::arg("family"), py::arg("data"),
          py::arg("K_range"), py::arg("p"), py::arg("q"), py::arg("options"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<simulation::ScenarioConfig>(m, "ScenarioConfig")
        .def(py::init<>())
        .def_readwrite("family", &simulation::ScenarioConfig::family)
        .def_readwrite("true_params", &simulation::ScenarioConfig::true_params)
        .def_readwrite("n", &simulation::ScenarioConfig::n)
        .def_readwrite("p", &simulation::ScenarioConfig::p)
        .def_readwrite("q", &simulation::ScenarioConfig::q)
        .def_readwrite("x_lo", &simulation::ScenarioConfig::x_lo)
        .def_readwrite("x_hi", &simulation::ScenarioConfig::x_hi)
        .def_readwrite("outlier_rate", &simulation::ScenarioConfig::outlier_rate)
        .def_readwrite("outlier_y", &simulation::ScenarioConfig::outlier_y)
        .def_readwrite("seed", &simulation::ScenarioConfig::seed)
        .def("validate", &simulation::ScenarioConfig::validate);

    py::class_<simulation::GeneratedData>(m, "GeneratedData")
        .def_readonly("data", &simulation::GeneratedData::data)
        .def_readonly("labels", &simulation::GeneratedData::labels);

    m.def("benchmark_scenario", &simulation::benchmark_scenario,
          py::arg("family"), py::arg("n"), py::arg("seed"));
    m.def("generate", &simulation::generate, py::arg("config"));
    m.def("mse_params", &simulation::mse_params, py::arg("truth"),
          py::arg("fitted"), py::arg("spec"));
    m.def("align_labels", &simulation::align_labels, py::arg("truth"),
          py::arg("fitted"));
    m.def("mse_mean_function", &simulation::mse_mean_function, py::arg("truth"),
          py::arg("truth_spec"), py::arg("fitted"), py::arg("fitted_spec"),
          py::arg("data"));

    py::class_<io::XY>(m, "XY")
        .def_readonly("x", &io::XY::x)
        .def_readonly("y", &io::XY::y);
    m.def("read_xy_csv", &io::read_xy_csv, py::arg("path"));

    py::class_<io::ModelFile>(m, "ModelFile")
        .def(py::init<>())
        .def_readwrite("spec", &io::ModelFile::spec)
        .def_readwrite("params", &io::ModelFile::params)
        .def_readwrite("loglik", &io::ModelFile::loglik)
        .def_readwrite("eta", &io::ModelFile::eta)
        .def_readwrite("bic", &io::ModelFile::bic)
        .def_readwrite("aic", &io::ModelFile::aic)
        .def_readwrite("icl", &io::ModelFile::icl)
        .def_readwrite("converged", &io::ModelFile::converged)
        .def_readwrite("n_iters", &io::ModelFile::n_iters)
        .def_readwrite("seed", &io::ModelFile::seed);
    m.def("write_model", &io::write_model, py::arg("model"));
    m.def("parse_model", &io::parse_model, py::arg("text"));
}
