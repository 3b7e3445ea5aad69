// Python bindings for the core operations; arrays cross as numpy float64.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dcprophet/error.hpp"
#include "dcprophet/eval.hpp"
#include "dcprophet/features.hpp"
#include "dcprophet/forest.hpp"
#include "dcprophet/ocsvm.hpp"
#include "dcprophet/pipeline.hpp"
#include "dcprophet/synth.hpp"

namespace py = pybind11;
using namespace dcprophet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  FeatureMatrix m(static_cast<std::size_t>(a.shape(1)));
  m.reserve_rows(static_cast<std::size_t>(a.shape(0)));
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    m.push_row(std::span<const double>(r.data(i, 0), static_cast<std::size_t>(a.shape(1))));
  }
  return m;
}

std::span<const double> to_span(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

std::vector<FailureType> to_labels(const std::vector<int>& y) {
  std::vector<FailureType> out;
  out.reserve(y.size());
  for (const int v : y) out.push_back(failure_type_from_label(v));
  return out;
}

features::LabeledData to_data(const Array& x, const std::vector<int>& y) {
  features::LabeledData d{to_matrix(x), to_labels(y)};
  if (d.x.rows() != d.y.size()) throw DimensionMismatch(d.x.rows(), d.y.size());
  return d;
}

template <typename F>
py::array_t<double> map_rows(const Array& x, F&& f) {
  const auto m = to_matrix(x);
  py::array_t<double> out(static_cast<py::ssize_t>(m.rows()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < m.rows(); ++i) w(static_cast<py::ssize_t>(i)) = f(m.row(i));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-stage failure predictor: one-class SVM filter followed by a random forest";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def("pacf", [](const Array& s, std::size_t max_lag) { return features::pacf(to_span(s), max_lag); },
        py::arg("series"), py::arg("max_lag"));
  m.def("f_beta", py::overload_cast<double, double, double>(&eval::f_beta), py::arg("precision"),
        py::arg("recall"), py::arg("beta") = 3.0);
  m.def("roc_auc", [](const Array& scores, const std::vector<std::uint8_t>& positive) {
        return eval::roc_auc(to_span(scores), positive);
      }, py::arg("scores"), py::arg("positive"));
  m.def("binary_f3", [](const std::vector<int>& predicted, const std::vector<int>& actual) {
        const auto p = to_labels(predicted), a = to_labels(actual);
        return eval::f_beta(eval::binary_precision_recall(eval::confusion(p, a)));
      }, py::arg("predicted"), py::arg("actual"));

  py::class_<ocsvm::OcsvmParams>(m, "OcsvmParams")
      .def(py::init<>())
      .def_readwrite("nu", &ocsvm::OcsvmParams::nu)
      .def_readwrite("gamma", &ocsvm::OcsvmParams::gamma)
      .def_readwrite("tolerance", &ocsvm::OcsvmParams::tolerance)
      .def_readwrite("max_iterations", &ocsvm::OcsvmParams::max_iterations);

  py::class_<ocsvm::OcsvmModel>(m, "OcsvmModel")
      .def_property_readonly("rho", &ocsvm::OcsvmModel::rho)
      .def_property_readonly("support_count", &ocsvm::OcsvmModel::support_count)
      .def_property_readonly("alphas", &ocsvm::OcsvmModel::alphas)
      .def("decision", [](const ocsvm::OcsvmModel& mdl, const Array& x) {
        return map_rows(x, [&](std::span<const double> r) { return ocsvm::decision(mdl, r); });
      })
      .def("dual_objective", &ocsvm::dual_objective);
  m.def("train_ocsvm", [](const Array& x, const ocsvm::OcsvmParams& p) { return ocsvm::train(to_matrix(x), p); },
        py::arg("normals"), py::arg("params") = ocsvm::OcsvmParams{});

  py::class_<forest::ForestParams>(m, "ForestParams")
      .def(py::init<>())
      .def_readwrite("tree_count", &forest::ForestParams::tree_count)
      .def_readwrite("mtry", &forest::ForestParams::mtry)
      .def_readwrite("min_leaf", &forest::ForestParams::min_leaf)
      .def_readwrite("max_depth", &forest::ForestParams::max_depth)
      .def_readwrite("rng_seed", &forest::ForestParams::rng_seed)
      .def_readwrite("bootstrap", &forest::ForestParams::bootstrap)
      .def_readwrite("threads", &forest::ForestParams::threads);

  py::class_<forest::ForestModel>(m, "ForestModel")
      .def_property_readonly("tree_count", &forest::ForestModel::tree_count)
      .def("predict", [](const forest::ForestModel& f, const Array& x) {
        const auto mat = to_matrix(x);
        std::vector<int> out;
        for (std::size_t i = 0; i < mat.rows(); ++i) out.push_back(to_label(forest::predict(f, mat.row(i))));
        return out;
      })
      .def("votes", [](const forest::ForestModel& f, const Array& x) {
        const auto v = forest::predict_votes(f, to_span(x));
        return std::vector<std::uint32_t>(v.begin(), v.end());
      });
  m.def("train_forest", [](const Array& x, const std::vector<int>& y, const forest::ForestParams& p) {
        const auto d = to_data(x, y);
        return forest::train(d.x, d.y, p);
      }, py::arg("x"), py::arg("y"), py::arg("params") = forest::ForestParams{});

  py::class_<pipeline::Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("ocsvm", &pipeline::Hyperparams::ocsvm)
      .def_readwrite("forest", &pipeline::Hyperparams::forest)
      .def_readwrite("forest_keeps_leaked_normals", &pipeline::Hyperparams::forest_keeps_leaked_normals);

  py::class_<pipeline::DcProphetModel>(m, "Model")
      .def_property_readonly("dimension", &pipeline::DcProphetModel::dimension)
      .def_property_readonly("support_vectors", [](const pipeline::DcProphetModel& mdl) {
        return mdl.ocsvm.support_count();
      })
      .def_property_readonly("tree_count", [](const pipeline::DcProphetModel& mdl) {
        return mdl.forest.tree_count();
      })
      .def_property_readonly("manifest", [](const pipeline::DcProphetModel& mdl) {
        return mdl.manifest.to_json().dump();
      })
      .def("predict", [](const pipeline::DcProphetModel& mdl, const Array& x) {
        const auto mat = to_matrix(x);
        std::vector<int> out;
        for (std::size_t i = 0; i < mat.rows(); ++i) out.push_back(to_label(pipeline::predict(mdl, mat.row(i))));
        return out;
      })
      .def("score", [](const pipeline::DcProphetModel& mdl, const Array& x) {
        return map_rows(x, [&](std::span<const double> r) { return pipeline::score(mdl, r); });
      })
      .def("save", [](const pipeline::DcProphetModel& mdl, const std::filesystem::path& dir) {
        pipeline::save_bundle(dir, mdl);
      });
  m.def("train", [](const Array& x, const std::vector<int>& y, const pipeline::Hyperparams& hp, std::size_t lags) {
        return pipeline::train(to_data(x, y), hp, features::FeatureConfig(lags));
      }, py::arg("x"), py::arg("y"), py::arg("hyperparams") = pipeline::Hyperparams{}, py::arg("lags") = 6);
  m.def("load_model", &pipeline::load_model, py::arg("path"));

  m.def("synth", [](std::size_t machines, double days, double signature_strength, std::uint64_t seed) {
        synth::SynthConfig c;
        c.machines = machines;
        c.horizon_days = days;
        c.signature_strength = signature_strength;
        c.rng_seed = seed;
        auto files = synth::generate(c);
        return py::make_tuple(py::bytes(files.machine_events), py::bytes(files.resource_usage),
                              py::bytes(files.truth_labels));
      }, py::arg("machines") = 500, py::arg("days") = 7.0, py::arg("signature_strength") = 0.9,
      py::arg("seed") = 0,
      "Returns (machine_events, resource_usage, truth_labels) CSV bytes.");
}
