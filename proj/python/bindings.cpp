#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "csipred/errors.hpp"
#include "csipred/experiment.hpp"
#include "csipred/synthchan.hpp"

namespace py = pybind11;
using namespace csipred;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

std::vector<ComplexVector> rows_of(const ComplexArray& a, const char* name) {
  if (a.ndim() != 2) throw ContractError(std::string(name) + " must be a 2-d array (windows x horizon)");
  const auto r = a.unchecked<2>();
  std::vector<ComplexVector> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    out[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(r.shape(1)));
    for (py::ssize_t j = 0; j < r.shape(1); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = r(i, j);
  }
  return out;
}

py::dict metric_dict(const MetricValue& v) {
  py::dict d;
  d["value"] = v.value;
  d["windows"] = v.windows;
  d["excluded"] = v.excluded;
  return d;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["model"] = r.model;
  d["track"] = r.track;
  d["seed"] = r.seed;
  d["scope"] = r.scope;
  d["nmse"] = r.nmse;
  d["nmse_db"] = r.nmse_db;
  d["cosine"] = r.cosine;
  d["windows"] = r.windows;
  d["excluded"] = r.excluded;
  d["config_digest"] = r.config_digest;
  return d;
}

ExperimentConfig config_from(const py::dict& overrides, const std::string& text) {
  ExperimentConfig c = ExperimentConfig::parse(text);
  for (const auto& [k, v] : overrides) c.set(py::str(k), py::str(v));
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_csipred, m) {
  m.doc() = "CSI time-series forecasting: RNN, BiLSTM, NeuralProphet-style and hybrid predictors";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("parse", &ExperimentConfig::parse, py::arg("text"))
      .def("set", &ExperimentConfig::set, py::arg("key"), py::arg("value"))
      .def("get", &ExperimentConfig::get, py::arg("key"))
      .def("validate", &ExperimentConfig::validate)
      .def("to_text", &ExperimentConfig::to_text)
      .def("digest", &ExperimentConfig::digest)
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; })
      .def("__repr__", [](const ExperimentConfig& c) { return "<Config " + c.digest().substr(0, 12) + ">"; });

  m.def("config", &config_from, py::arg("overrides") = py::dict(), py::arg("text") = "",
        "Default config with `key: value` overrides applied, then validated.");

  m.def(
      "generate_fading",
      [](std::size_t samples, std::size_t antennas, std::uint64_t seed, std::size_t paths, double carrier_hz,
         double speed_mps, double sample_interval) {
        FadingConfig c;
        c.samples = samples;
        c.antennas = antennas;
        c.seed = seed;
        c.paths = paths;
        c.carrier_hz = carrier_hz;
        c.speed_mps = speed_mps;
        c.sample_interval = sample_interval;
        const CsiSeries s = generate_fading(c);
        py::array_t<std::complex<double>> out({static_cast<py::ssize_t>(antennas), static_cast<py::ssize_t>(samples)});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t a = 0; a < antennas; ++a)
          for (std::size_t t = 0; t < samples; ++t)
            w(static_cast<py::ssize_t>(a), static_cast<py::ssize_t>(t)) = s.antennas[a][t];
        return out;
      },
      py::arg("samples") = 20000, py::arg("antennas") = 1, py::arg("seed") = 1, py::arg("paths") = 32,
      py::arg("carrier_hz") = 2.18e9, py::arg("speed_mps") = 1.39, py::arg("sample_interval") = 5e-4,
      "Sum-of-sinusoids Rayleigh fading, shape (antennas, samples).");

  m.def(
      "make_windows",
      [](const std::vector<double>& values, std::size_t lags, std::size_t horizon, std::int64_t first_index) {
        FeatureSeries f;
        f.values = values;
        f.first_index = first_index;
        const auto w = make_windows(f, lags, horizon);
        return py::make_tuple(w.times, w.inputs, w.labels);
      },
      py::arg("values"), py::arg("lags"), py::arg("horizon"), py::arg("first_index") = 0,
      "(times, inputs, labels): lags t-d..t-1, labels t+1..t+D.");

  m.def(
      "nmse",
      [](const ComplexArray& predicted, const ComplexArray& truth) {
        return metric_dict(nmse(rows_of(predicted, "predicted"), rows_of(truth, "truth")));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "cosine_similarity",
      [](const ComplexArray& predicted, const ComplexArray& truth) {
        return metric_dict(cosine_similarity(rows_of(predicted, "predicted"), rows_of(truth, "truth")));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def("to_db", &to_db, py::arg("linear"));

  py::class_<PreparedData>(m, "Dataset")
      .def_readonly("track", &PreparedData::track)
      .def_readonly("lags", &PreparedData::lags)
      .def_readonly("horizon", &PreparedData::horizon)
      .def_property_readonly("features", [](const PreparedData& d) { return d.features.size(); })
      .def("windows",
           [](const PreparedData& d, std::size_t feature, const std::string& split) {
             const auto& w = d.features.at(feature).split(parse_split_name(split));
             return py::make_tuple(w.times, w.inputs, w.labels);
           },
           py::arg("feature"), py::arg("split") = "train")
      .def("digest", &PreparedData::digest);

  m.def(
      "prepare",
      [](const ExperimentConfig& c) {
        c.validate();
        CleaningReport report;
        const CsiSeries s = load_dataset(c, &report);
        return prepare(s, c, report);
      },
      py::arg("config"), "Load or synthesize the configured track and build normalized window splits.");

  py::class_<Predictor>(m, "Predictor")
      .def_property_readonly("kind", [](const Predictor& p) { return to_string(p.kind); })
      .def_readonly("seed", &Predictor::seed)
      .def_readonly("lags", &Predictor::lags)
      .def_readonly("horizon", &Predictor::horizon)
      .def("parameter_count", &Predictor::parameter_count)
      .def("digest", &Predictor::digest)
      .def("checkpoint", [](const Predictor& p) { return p.to_checkpoint().serialize(); })
      .def_static("from_checkpoint",
                  [](const std::string& text) { return Predictor::from_checkpoint(Checkpoint::parse(text)); })
      .def("loss_history", [](const Predictor& p) {
        std::vector<std::vector<double>> out;
        for (const auto& fm : p.models) out.push_back(fm.loss_history);
        return out;
      });

  m.def(
      "train",
      [](const std::string& model, const PreparedData& data, const ExperimentConfig& c, std::uint64_t seed) {
        py::gil_scoped_release release;
        return train_predictor(parse_model_kind(model), data, c, seed);
      },
      py::arg("model"), py::arg("data"), py::arg("config"), py::arg("seed") = 1,
      "Train one predictor (np | rnn | bilstm | hybrid), one model per feature series.");

  m.def(
      "forecast",
      [](const Predictor& p, const PreparedData& data, const std::string& split) {
        const auto f = forecast_split(p, data, parse_split_name(split));
        py::list predicted, truth;
        for (std::size_t a = 0; a < f.antenna_ids.size(); ++a) {
          const std::size_t n = f.predicted[a].size();
          const std::size_t h = n ? f.predicted[a][0].size() : 0;
          py::array_t<std::complex<double>> pa({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(h)});
          py::array_t<std::complex<double>> ta({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(h)});
          auto pw = pa.mutable_unchecked<2>();
          auto tw = ta.mutable_unchecked<2>();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < h; ++k) {
              pw(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = f.predicted[a][i][k];
              tw(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = f.truth[a][i][k];
            }
          predicted.append(pa);
          truth.append(ta);
        }
        py::dict d;
        d["antennas"] = f.antenna_ids;
        d["origins"] = f.origins;
        d["predicted"] = predicted;
        d["truth"] = truth;
        return d;
      },
      py::arg("predictor"), py::arg("data"), py::arg("split") = "test",
      "De-normalized complex forecasts per antenna, shape (windows, D).");

  m.def(
      "evaluate",
      [](const Predictor& p, const PreparedData& data, const std::string& split) {
        const auto reports = evaluate_forecast(forecast_split(p, data, parse_split_name(split)), to_string(p.kind),
                                               data.track, p.seed, p.config_digest);
        py::list out;
        for (const auto& r : reports) out.append(report_dict(r));
        return out;
      },
      py::arg("predictor"), py::arg("data"), py::arg("split") = "test",
      "Per-antenna NMSE / cosine reports plus an 'all' row.");

  m.def(
      "compare",
      [](const PreparedData& data, const ExperimentConfig& c) {
        CompareResult r;
        {
          py::gil_scoped_release release;
          r = run_compare(data, c);
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(report_dict(row.report));
        py::list medians;
        for (const auto& [model, n, db, cs] : r.medians) {
          py::dict d;
          d["model"] = model;
          d["median_nmse"] = n;
          d["median_nmse_db"] = db;
          d["median_cosine"] = cs;
          medians.append(d);
        }
        py::dict d;
        d["dataset_digest"] = r.dataset_digest;
        d["rows"] = rows;
        d["medians"] = medians;
        return d;
      },
      py::arg("data"), py::arg("config"), "Train and evaluate all four predictors for every compare seed.");
}
