#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "bayesviews/backtest.hpp"
#include "bayesviews/cli.hpp"
#include "bayesviews/denfis.hpp"
#include "bayesviews/lstm.hpp"

namespace py = pybind11;
using namespace bayesviews;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Python-facing frame handle: loading, preparation and array views.
struct PyFrame {
  std::shared_ptr<marketdata::MarketFrame> frame;

  static PyFrame from_csv_dir(const std::string& data_dir, const std::string& start,
                              const std::string& end) {
    cli::RunConfig cfg;
    cfg.data_dir = data_dir;
    if (!start.empty()) cfg.start = Date::parse_iso(start);
    if (!end.empty()) cfg.end = Date::parse_iso(end);
    return PyFrame{std::make_shared<marketdata::MarketFrame>(cli::prepare_frame(cfg))};
  }

  std::vector<std::string> tickers() const { return frame->universe().tickers(); }
  std::vector<std::string> dates() const {
    std::vector<std::string> out;
    out.reserve(frame->n_days());
    for (const auto& d : frame->dates()) out.push_back(d.to_iso());
    return out;
  }
  MatrixXd prices() const { return frame->price_matrix(); }
  MatrixXd volumes() const { return frame->volume_matrix(); }
  MatrixXd mcaps() const { return frame->mcap_matrix(); }
};

views::ViewSet make_viewset(const MatrixXd& p, const VectorXd& q, const MatrixXd& omega) {
  return views::ViewSet{p, q, omega};
}

py::dict run_backtest(const PyFrame& frame, const std::string& strategy, int timespan,
                      double delta, double tau, const std::string& model, bool sentiment,
                      std::uint64_t seed, double initial_capital, bool narrative,
                      bool sortino) {
  backtest::Strategy s;
  s.kind = backtest::parse_strategy(strategy);
  s.timespan = timespan;
  s.seed = seed;
  s.model.model = model;
  s.model.use_sentiment = sentiment;
  s.model.seed = seed;

  backtest::BacktestConfig cfg;
  cfg.delta = delta;
  cfg.tau = tau;
  cfg.initial_capital = initial_capital;
  cfg.record_narrative = narrative;
  cfg.compute_sortino = sortino;

  const auto report = backtest::run(s, *frame.frame, cfg);

  py::dict metrics;
  metrics["rmse"] = report.metrics.rmse;
  metrics["ar"] = report.metrics.ar;
  metrics["sr"] = report.metrics.sr;
  metrics["mdd"] = report.metrics.mdd;
  if (report.metrics.sortino) metrics["sortino"] = *report.metrics.sortino;

  std::vector<std::string> dates;
  for (const auto& d : report.value_dates) dates.push_back(d.to_iso());
  MatrixXd held(report.daily.size(), frame.frame->n_assets());
  MatrixXd raw(report.daily.size(), frame.frame->n_assets());
  MatrixXd optimal(report.daily.size(), frame.frame->n_assets());
  for (std::size_t k = 0; k < report.daily.size(); ++k) {
    held.row(k) = report.daily[k].weights_held;
    raw.row(k) = report.daily[k].weights_raw;
    optimal.row(k) = report.daily[k].w_star;
  }

  py::dict out;
  out["label"] = report.label;
  out["metrics"] = metrics;
  out["values"] = report.values;
  out["dates"] = dates;
  out["weights_held"] = held;
  out["weights_raw"] = raw;
  out["w_star"] = optimal;
  out["json"] = backtest::report_to_json(report);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian market views: Black-Litterman allocation with learned views";

  py::register_exception<marketdata::DataError>(m, "DataError");
  py::register_exception<views::ViewError>(m, "ViewError");
  py::register_exception<alloc::AllocationError>(m, "AllocationError");
  py::register_exception<learners::LearnerError>(m, "LearnerError");
  py::register_exception<backtest::BacktestError>(m, "BacktestError");

  py::class_<PyFrame>(m, "Frame")
      .def_static("from_csv_dir", &PyFrame::from_csv_dir, py::arg("data_dir"),
                  py::arg("start") = "", py::arg("end") = "",
                  "Load prices/volumes/mcap/sentiment CSVs, apply splits.csv when present, "
                  "fill gaps, and optionally restrict the date range.")
      .def_property_readonly("tickers", &PyFrame::tickers)
      .def_property_readonly("dates", &PyFrame::dates)
      .def_property_readonly("prices", &PyFrame::prices)
      .def_property_readonly("volumes", &PyFrame::volumes)
      .def_property_readonly("mcaps", &PyFrame::mcaps)
      .def("__len__", [](const PyFrame& f) { return f.frame->n_days(); });

  // --- views ---------------------------------------------------------------
  m.def(
      "check_compatibility",
      [](const MatrixXd& p, const VectorXd& q, const MatrixXd& omega, double tol) {
        const auto rep = views::check_compatibility(make_viewset(p, q, omega), tol);
        py::dict out;
        out["compatible"] = rep.compatible;
        out["independent"] = rep.independent;
        out["rank_P"] = rep.rank_P;
        if (rep.witness) out["witness"] = *rep.witness;
        return out;
      },
      py::arg("P"), py::arg("Q"), py::arg("Omega"), py::arg("tol") = 1e-10);

  m.def(
      "diagonalize_confidence",
      [](const MatrixXd& p, const VectorXd& q, const MatrixXd& omega) {
        const auto v = views::diagonalize_confidence(make_viewset(p, q, omega));
        return py::make_tuple(v.P, v.Q, v.Omega);
      },
      py::arg("P"), py::arg("Q"), py::arg("Omega"));

  m.def(
      "to_absolute",
      [](const MatrixXd& p, const VectorXd& q, const MatrixXd& omega, const VectorXd& w) {
        const auto v = views::to_absolute(make_viewset(p, q, omega), w);
        return py::make_tuple(v.P, v.Q, v.Omega);
      },
      py::arg("P"), py::arg("Q"), py::arg("Omega"), py::arg("w"));

  m.def(
      "canonicalize",
      [](const MatrixXd& p, const VectorXd& q, const MatrixXd& omega, const VectorXd& w) {
        const auto v = views::canonicalize(make_viewset(p, q, omega), w);
        return py::make_tuple(v.Q, v.omega);
      },
      py::arg("P"), py::arg("Q"), py::arg("Omega"), py::arg("w"),
      "Identity-loading per-asset form; omega entries of +inf mean no view.");

  // --- allocation ----------------------------------------------------------
  m.def(
      "estimate_covariance",
      [](const PyFrame& f, int t, int timespan) {
        return alloc::estimate_covariance(*f.frame, t, timespan);
      },
      py::arg("frame"), py::arg("t"), py::arg("timespan"));

  m.def(
      "markowitz_weights",
      [](const VectorXd& mu, const MatrixXd& sigma, double delta, double tau) {
        return alloc::markowitz_weights(mu, alloc::RiskModel(sigma, delta, tau));
      },
      py::arg("mu"), py::arg("sigma"), py::arg("delta") = 0.25, py::arg("tau") = 0.05);

  m.def(
      "equilibrium_returns",
      [](const MatrixXd& sigma, const VectorXd& w_cap, double delta, double tau) {
        return alloc::equilibrium_returns(alloc::RiskModel(sigma, delta, tau), w_cap).pi;
      },
      py::arg("sigma"), py::arg("w_cap"), py::arg("delta") = 0.25, py::arg("tau") = 0.05);

  m.def(
      "default_confidence",
      [](const MatrixXd& sigma, double delta, double tau) {
        return alloc::default_confidence(alloc::RiskModel(sigma, delta, tau));
      },
      py::arg("sigma"), py::arg("delta") = 0.25, py::arg("tau") = 0.05);

  m.def(
      "bl_posterior",
      [](const MatrixXd& sigma, const VectorXd& w_cap, const VectorXd& q, const VectorXd& omega,
         double delta, double tau) {
        alloc::RiskModel risk(sigma, delta, tau);
        const auto eq = alloc::equilibrium_returns(risk, w_cap);
        views::CanonicalViews v;
        v.Q = q;
        v.omega = omega;
        const auto post = alloc::bl_posterior(eq, risk, v);
        return py::make_tuple(post.mu, post.sigma);
      },
      py::arg("sigma"), py::arg("w_cap"), py::arg("Q"), py::arg("omega"), py::arg("delta") = 0.25,
      py::arg("tau") = 0.05,
      "Posterior (mu, sigma) from capitalization weights and canonical views.");

  m.def(
      "bl_weights",
      [](const VectorXd& mu_bar, const MatrixXd& sigma_bar, double delta) {
        alloc::BLPosterior post;
        post.mu = mu_bar;
        post.sigma = sigma_bar;
        return alloc::bl_weights(post, alloc::RiskModel(sigma_bar, delta, 0.05));
      },
      py::arg("mu_bar"), py::arg("sigma_bar"), py::arg("delta") = 0.25);

  m.def("optimal_one_hot", &alloc::optimal_one_hot, py::arg("price_t"), py::arg("price_next"));

  m.def(
      "invert_views",
      [](const VectorXd& w_star, const MatrixXd& sigma, const VectorXd& w_cap,
         const VectorXd& omega, double delta, double tau) {
        alloc::RiskModel risk(sigma, delta, tau);
        const auto eq = alloc::equilibrium_returns(risk, w_cap);
        return alloc::invert_views(w_star, eq, risk, omega);
      },
      py::arg("w_star"), py::arg("sigma"), py::arg("w_cap"), py::arg("omega"),
      py::arg("delta") = 0.25, py::arg("tau") = 0.05,
      "View returns whose posterior weights equal w_star.");

  m.def("project_simplex", &alloc::project_simplex, py::arg("w"));

  // --- metrics ---------------------------------------------------------------
  m.def(
      "metric_rmse",
      [](const MatrixXd& realized, const MatrixXd& optimal) {
        std::vector<VectorXd> r, o;
        for (int t = 0; t < realized.rows(); ++t) {
          r.push_back(realized.row(t));
          o.push_back(optimal.row(t));
        }
        return backtest::metric_rmse(r, o);
      },
      py::arg("realized"), py::arg("optimal"));
  m.def(
      "metric_ar",
      [](const std::vector<double>& values, const std::vector<std::string>& dates) {
        std::vector<Date> d;
        d.reserve(dates.size());
        for (const auto& s : dates) d.push_back(Date::parse_iso(s));
        return backtest::metric_ar(values, d);
      },
      py::arg("values"), py::arg("dates"));
  m.def("metric_sr", &backtest::metric_sr, py::arg("portfolio_gross"), py::arg("vw_gross"));
  m.def("metric_mdd", &backtest::metric_mdd, py::arg("values"));
  m.def("metric_sortino", &backtest::metric_sortino, py::arg("portfolio_gross"),
        py::arg("vw_gross"));

  // --- learners --------------------------------------------------------------
  py::class_<learners::LstmModel>(m, "LstmModel")
      .def(py::init([](int input_dim, int output_dim, int units, int num_layers, int dense_units,
                       int bptt_horizon, double learning_rate, std::uint64_t seed,
                       double init_scale) {
             learners::LstmConfig cfg;
             cfg.input_dim = input_dim;
             cfg.output_dim = output_dim;
             cfg.units = units;
             cfg.num_layers = num_layers;
             cfg.dense_units = dense_units;
             cfg.bptt_horizon = bptt_horizon;
             cfg.learning_rate = learning_rate;
             cfg.seed = seed;
             cfg.init_scale = init_scale;
             return std::make_unique<learners::LstmModel>(cfg);
           }),
           py::arg("input_dim"), py::arg("output_dim"), py::arg("units") = 3,
           py::arg("num_layers") = 2, py::arg("dense_units") = 50, py::arg("bptt_horizon") = 30,
           py::arg("learning_rate") = 1e-3, py::arg("seed") = 42, py::arg("init_scale") = 1.0)
      .def("predict", &learners::LstmModel::predict, py::arg("x"))
      .def("update", &learners::LstmModel::update, py::arg("x"), py::arg("target"))
      .def("reset", &learners::LstmModel::reset)
      .def("snapshot", [](const learners::LstmModel& m2) { return py::bytes(m2.snapshot()); })
      .def("restore",
           [](learners::LstmModel& m2, const py::bytes& blob) { m2.restore(std::string(blob)); });

  py::class_<learners::DenfisModel>(m, "DenfisModel")
      .def(py::init([](int input_dim, int output_dim, double d, int m_activate) {
             learners::DenfisConfig cfg;
             cfg.input_dim = input_dim;
             cfg.output_dim = output_dim;
             cfg.d = d;
             cfg.m_activate = m_activate;
             return std::make_unique<learners::DenfisModel>(cfg);
           }),
           py::arg("input_dim"), py::arg("output_dim"), py::arg("d") = 0.21,
           py::arg("m_activate") = 3)
      .def("predict", &learners::DenfisModel::predict, py::arg("x"))
      .def("update", &learners::DenfisModel::update, py::arg("x"), py::arg("target"))
      .def("reset", &learners::DenfisModel::reset)
      .def_property_readonly("rule_count", &learners::DenfisModel::rule_count)
      .def("snapshot", [](const learners::DenfisModel& m2) { return py::bytes(m2.snapshot()); })
      .def("restore", [](learners::DenfisModel& m2, const py::bytes& blob) {
        m2.restore(std::string(blob));
      });

  m.def("weights_from_scores", &learners::weights_from_scores, py::arg("scores"));

  // --- backtest ----------------------------------------------------------------
  m.def("backtest", &run_backtest, py::arg("frame"), py::arg("strategy") = "vw",
        py::arg("timespan") = 90, py::arg("delta") = 0.25, py::arg("tau") = 0.05,
        py::arg("model") = "lstm", py::arg("sentiment") = true, py::arg("seed") = 42,
        py::arg("initial_capital") = 10000.0, py::arg("narrative") = false,
        py::arg("sortino") = false,
        "Run one strategy over a prepared frame and return metrics and series.");

  m.def(
      "validate_data",
      [](const std::string& data_dir) {
        const auto rep = cli::validate_data(data_dir);
        py::dict out;
        out["ok"] = rep.ok;
        out["errors"] = rep.errors;
        out["warnings"] = rep.warnings;
        out["text"] = rep.render();
        return out;
      },
      py::arg("data_dir"));
}
