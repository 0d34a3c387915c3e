#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "tife/anomaly.hpp"
#include "tife/attention_viz.hpp"
#include "tife/data.hpp"
#include "tife/training.hpp"

namespace py = pybind11;
using tife::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw tife::ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

tife::TimeSeries to_series(const Array& values) {
  tife::TimeSeries s;
  s.values = to_matrix(values);
  for (std::size_t i = 0; i < s.features(); ++i) s.names.push_back("x" + std::to_string(i));
  return s;
}

py::tuple maps_tuple(const tife::AttentionMaps& m) {
  return py::make_tuple(to_array(m.time_map), to_array(m.feature_map));
}

}  // namespace

PYBIND11_MODULE(_tife, m) {
  m.doc() = "TiFe attention autoencoder: attention maps, training and anomaly scoring";

  py::register_exception<tife::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<tife::ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<tife::DataError>(m, "DataError", PyExc_IOError);

  py::class_<tife::ModelDims>(m, "ModelDims")
      .def(py::init<std::size_t, std::size_t, std::size_t, std::size_t>(), py::arg("window"),
           py::arg("features"), py::arg("attention_latent"), py::arg("latent"))
      .def_readwrite("window", &tife::ModelDims::window)
      .def_readwrite("features", &tife::ModelDims::features)
      .def_readwrite("attention_latent", &tife::ModelDims::attention_latent)
      .def_readwrite("latent", &tife::ModelDims::latent)
      .def("__eq__", &tife::ModelDims::operator==)
      .def("__repr__", [](const tife::ModelDims& d) {
        std::ostringstream os;
        os << "ModelDims(T=" << d.window << ", N=" << d.features << ", d_a=" << d.attention_latent
           << ", l=" << d.latent << ")";
        return os.str();
      });

  py::class_<tife::TiFeAEModel>(m, "Model")
      .def_readonly("dims", &tife::TiFeAEModel::dims)
      .def_property_readonly("has_attention", &tife::TiFeAEModel::has_attention)
      .def_property_readonly("parameter_count", [](const tife::TiFeAEModel& x) { return tife::parameter_count(x); })
      .def_property(
          "scale", [](const tife::TiFeAEModel& x) { return py::make_tuple(x.scale.min, x.scale.max); },
          [](tife::TiFeAEModel& x, std::pair<std::vector<double>, std::vector<double>> s) {
            x.scale = {std::move(s.first), std::move(s.second)};
            x.validate();
          })
      .def("parameters",
           [](const tife::TiFeAEModel& x) {
             py::list out;
             for (const auto& p : tife::parameters(x)) out.append(py::make_tuple(p.block, to_array(*p.value)));
             return out;
           },
           "List of (block, array) pairs in training order.")
      .def("forward", [](const tife::TiFeAEModel& x, const Array& w) { return to_array(tife::model_forward(to_matrix(w), x)); },
           py::arg("window"))
      .def("attention_maps",
           [](const tife::TiFeAEModel& x, const Array& w) {
             if (!x.has_attention()) throw tife::ContractError("model has no attention stage");
             return maps_tuple(tife::attention_maps(to_matrix(w), *x.attention));
           },
           py::arg("window"))
      .def("save", [](const tife::TiFeAEModel& x, const std::filesystem::path& p) { tife::save_model(x, p); })
      .def("to_bytes", [](const tife::TiFeAEModel& x) {
        const auto b = tife::serialize_model(x);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("load", [](const std::filesystem::path& p) { return tife::load_model(p); });

  m.def("init_model", &tife::init_params, py::arg("seed"), py::arg("dims"), py::arg("with_attention") = true);

  m.def("time_attention", [](const Array& x) {
    auto a = tife::time_attention(to_matrix(x));
    return py::make_tuple(to_array(a.map), to_array(a.weighted));
  });
  m.def("feature_attention", [](const Array& x) {
    auto a = tife::feature_attention(to_matrix(x));
    return py::make_tuple(to_array(a.map), to_array(a.weighted));
  });

  m.def(
      "train",
      [](const Array& scaled_values, std::size_t window, std::size_t stride, std::size_t attention_latent,
         std::size_t latent, std::size_t batch_size, std::size_t epochs, std::uint64_t seed, double learning_rate,
         bool with_attention) {
        const auto data = tife::make_windows(to_series(scaled_values), window, stride == 0 ? window : stride);
        tife::TrainConfig cfg;
        cfg.window = window;
        cfg.attention_latent = attention_latent;
        cfg.latent = latent;
        cfg.batch_size = batch_size;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.adam.learning_rate = learning_rate;
        py::gil_scoped_release release;
        auto r = tife::train(data, cfg, with_attention);
        return std::make_pair(std::move(r.model), std::move(r.loss_history));
      },
      py::arg("values"), py::arg("window"), py::arg("stride") = 0, py::arg("attention_latent") = 32,
      py::arg("latent") = 16, py::arg("batch_size") = 128, py::arg("epochs") = 200, py::arg("seed") = 0,
      py::arg("learning_rate") = 1e-3, py::arg("with_attention") = true,
      "Trains on an already scaled L x N array. Returns (model, loss_history).");

  m.def(
      "detect",
      [](const tife::TiFeAEModel& model, const Array& scaled_values, std::size_t stride, double k,
         const std::string& aggregate) {
        const auto agg = aggregate == "max" ? tife::Aggregation::max : tife::Aggregation::mean;
        const auto r = tife::detect(model, to_series(scaled_values), stride, k, agg);
        py::list flagged;
        for (const auto& f : r.flagged) flagged.append(py::make_tuple(f.time_index, f.feature));
        py::dict out;
        out["point_errors"] = to_array(r.point_errors);
        out["window_errors"] = r.window_errors;
        out["window_starts"] = r.window_starts;
        out["threshold"] = r.threshold;
        out["flagged"] = flagged;
        return out;
      },
      py::arg("model"), py::arg("values"), py::arg("stride") = 1, py::arg("k") = 3.0, py::arg("aggregate") = "mean");

  m.def("compute_threshold", [](const std::vector<double>& e, double k) { return tife::compute_threshold(e, k); },
        py::arg("errors"), py::arg("k") = 3.0);

  m.def(
      "gradient_check",
      [](const tife::TiFeAEModel& model, const Array& x, double h, double tol) {
        py::dict out;
        for (const auto& b : tife::gradient_check(model, to_matrix(x), h, tol).blocks) out[py::str(b.block)] = b.max_relative_error;
        return out;
      },
      py::arg("model"), py::arg("window"), py::arg("step") = 1e-5, py::arg("tol") = 1e-4,
      "Max relative error per parameter block.");

  m.def("gen_data1", [](std::size_t hours) { return to_array(tife::build_data1(hours).values); },
        py::arg("hours") = 8760);
  m.def("gen_data2",
        [](std::size_t weeks, std::optional<std::size_t> swap_day) { return to_array(tife::gen_data2(weeks, swap_day).values); },
        py::arg("weeks"), py::arg("swap_day") = py::none());
  m.def("load_csv", [](const std::filesystem::path& p) {
    const auto s = tife::ingest_csv(p);
    return py::make_tuple(s.names, to_array(s.values));
  }, "Loads, resamples to hourly and imputes. Returns (names, values).");
  m.def("min_max_scale", [](const Array& values) {
    auto [scaled, p] = tife::min_max_scale(to_series(values));
    return py::make_tuple(to_array(scaled.values), p.min, p.max);
  });
  m.def("to_grayscale", [](const Array& a) { return tife::to_grayscale(to_matrix(a)).pixels; });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "tife");
        std::ostringstream out, err;
        const int code = tife::cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process. Returns (exit_code, stdout, stderr).");
}
