#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "json.hpp"

#include "bikerisk/betweenness.hpp"
#include "bikerisk/error.hpp"
#include "bikerisk/evaluation.hpp"
#include "bikerisk/ingest.hpp"
#include "bikerisk/json_io.hpp"
#include "bikerisk/locator.hpp"
#include "bikerisk/pipeline.hpp"
#include "bikerisk/provenance.hpp"
#include "bikerisk/risk_model.hpp"
#include "bikerisk/scenario.hpp"
#include "bikerisk/street_graph.hpp"

namespace py = pybind11;
using namespace bikerisk;

namespace {

// JSON documents cross the boundary as Python objects via the json module.
py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::handle& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

graph::SegmentFeatures features_from_dict(const py::dict& d) {
  graph::SegmentFeatures f;
  f.speed_limit_kmh = d["speed_limit_kmh"].cast<double>();
  f.width_m = d["width_m"].cast<double>();
  f.dist_intersect_m = d["dist_intersect_m"].cast<double>();
  f.betweenness = d["betweenness"].cast<double>();
  f.bikelane = d["bikelane"].cast<bool>();
  f.hilliness = d["hilliness"].cast<std::string>() == "hilly" ? graph::Hilliness::Hilly : graph::Hilliness::Flat;
  f.topology = d["topology"].cast<std::string>() == "curved" ? graph::Topology::Curved : graph::Topology::Straight;
  return f;
}

py::dict model_summary(const model::FittedModel& m) {
  py::dict d;
  d["city"] = m.city;
  d["columns"] = m.columns;
  d["coefficients"] = m.coefficients;
  d["standard_errors"] = m.standard_errors;
  d["covariance"] = m.covariance;
  d["n_train"] = m.n_train;
  d["converged"] = m.converged;
  d["log_likelihood"] = m.log_likelihood;
  return d;
}

// Graph plus betweenness plus spatial index, loaded once.
class Region {
 public:
  Region(const std::filesystem::path& graph_json, const std::filesystem::path& betweenness_csv)
      : graph_(graph::read_graph_json(graph_json)),
        betweenness_(graph::read_betweenness_csv(betweenness_csv, graph_.edges().size())),
        locator_(graph_) {}

  std::size_t edge_count() const { return graph_.edges().size(); }

  py::dict nearest(double lat, double lon, double radius) const {
    const auto s = locator_.nearest({lat, lon}, radius);
    py::dict d;
    d["edge_id"] = s.edge;
    d["lat"] = s.point.lat;
    d["lon"] = s.point.lon;
    d["distance_m"] = s.distance_m;
    d["features"] = to_python(json_io::features_json(
        graph::segment_features(graph_, betweenness_, s.edge, s.point)));
    return d;
  }

  py::object scenario(const model::FittedModel& m, const py::object& region, const py::object& edits,
                      double densify_m) const {
    const auto ring = json_io::region_from_json(from_python(region));
    const auto e = json_io::edits_from_json(from_python(edits));
    scenario::CompareOptions opts;
    opts.sampling.densify_m = densify_m;
    return to_python(json_io::scenario_result_json(
        scenario::compare_scenarios(m, graph_, betweenness_, ring, e, opts)));
  }

 private:
  graph::StreetGraph graph_;
  graph::BetweennessResult betweenness_;
  graph::EdgeLocator locator_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bicycle accident severity risk toolkit";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  m.def("version", [] { return std::string(version()); });

  m.def("brier_score", [](std::vector<double> p, std::vector<int> y) { return eval::brier_score(p, y); },
        py::arg("probs"), py::arg("labels"));
  m.def("climatology_brier",
        [](std::vector<int> train, std::vector<int> test) { return eval::climatology_brier(train, test); },
        py::arg("train_labels"), py::arg("test_labels"));
  m.def("brier_skill_score", &eval::brier_skill_score, py::arg("bs"), py::arg("bs_ref"));
  m.def(
      "reliability_curve",
      [](std::vector<double> p, std::vector<int> y) {
        const auto curve = eval::reliability_curve(p, y);
        py::list bins;
        for (const auto& b : curve.bins) {
          py::dict d;
          d["lo"] = b.lo;
          d["hi"] = b.hi;
          d["n"] = b.n;
          d["mean_predicted"] = b.mean_predicted;
          d["observed_fraction"] = b.observed_fraction;
          bins.append(d);
        }
        return bins;
      },
      py::arg("probs"), py::arg("labels"));

  m.def(
      "edge_betweenness",
      [](std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges, int samples,
         std::uint64_t seed) {
        std::vector<graph::WeightedEdge> es;
        for (const auto& [u, v, w] : edges) es.push_back({u, v, w});
        graph::BetweennessOptions opts;
        if (samples != 0) {
          opts.mode = graph::BetweennessOptions::Mode::Sampled;
          opts.samples = samples;
          opts.seed = seed;
        }
        return graph::edge_betweenness(n, es, opts).beta;
      },
      py::arg("node_count"), py::arg("edges"), py::arg("samples") = 0, py::arg("seed") = 0);

  m.def(
      "ingest_file",
      [](const std::filesystem::path& path, const std::string& schema) {
        const auto r = ingest::ingest_file(path, schema);
        std::ostringstream s;
        ingest::write_jsonl(s, r.records);
        py::list records;
        std::istringstream lines(s.str());
        for (std::string line; std::getline(lines, line);) {
          records.append(to_python(nlohmann::ordered_json::parse(line)));
        }
        py::list rejects;
        for (const auto& rej : r.rejects) rejects.append(py::make_tuple(rej.line, rej.reason));
        py::dict d;
        d["records"] = records;
        d["rejects"] = rejects;
        d["rows"] = r.rows;
        return d;
      },
      py::arg("path"), py::arg("schema"));

  m.def(
      "build_graph",
      [](const std::filesystem::path& osm, const std::optional<std::filesystem::path>& elevation) {
        auto g = graph::build_graph(osm);
        if (elevation) graph::load_elevation(g, *elevation);
        graph::impute_missing_attributes(g);
        std::ostringstream s;
        graph::write_graph_json(s, g);
        return to_python(nlohmann::ordered_json::parse(s.str()));
      },
      py::arg("osm"), py::arg("elevation") = py::none());

  m.def(
      "fit_logistic",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge) {
        model::FitOptions opts;
        opts.ridge_lambda = ridge;
        model::FitDiagnostics diag;
        const auto fitted = model::fit_logistic({x, y}, opts, &diag);
        auto d = model_summary(fitted);
        d["status"] = diag.status;
        d["iterations"] = diag.iterations;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("ridge") = 0.0);

  m.def("log_likelihood", &model::log_likelihood, py::arg("x"), py::arg("y"), py::arg("coefficients"));
  m.def("log_likelihood_gradient", &model::log_likelihood_gradient, py::arg("x"), py::arg("y"),
        py::arg("coefficients"));

  py::class_<model::FittedModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return model::read_model_json(p); })
      .def_property_readonly("city", [](const model::FittedModel& fm) { return fm.city; })
      .def_property_readonly("columns", [](const model::FittedModel& fm) { return fm.columns; })
      .def_property_readonly("coefficients", [](const model::FittedModel& fm) { return fm.coefficients; })
      .def("summary", &model_summary)
      .def("predict_risk",
           [](const model::FittedModel& fm, const py::dict& f) {
             return model::predict_risk(fm, features_from_dict(f));
           })
      .def("wald_table", [](const model::FittedModel& fm) {
        py::list rows;
        for (const auto& r : model::wald_table(fm)) {
          rows.append(py::make_tuple(r.column, r.estimate, r.se, r.z, r.p, r.ci_low, r.ci_high));
        }
        return rows;
      });

  m.def(
      "compare_models",
      [](const model::FittedModel& a, const model::FittedModel& b) {
        py::list rows;
        for (const auto& r : model::compare_models(a, b)) {
          rows.append(py::make_tuple(r.column, r.difference, r.z, r.p, std::string(r.verdict())));
        }
        return rows;
      },
      py::arg("a"), py::arg("b"));

  py::class_<Region>(m, "Region")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&>(), py::arg("graph"),
           py::arg("betweenness"))
      .def_property_readonly("edge_count", &Region::edge_count)
      .def("nearest", &Region::nearest, py::arg("lat"), py::arg("lon"),
           py::arg("radius_m") = graph::kDefaultSnapRadiusM)
      .def("scenario", &Region::scenario, py::arg("model"), py::arg("region"), py::arg("edits"),
           py::arg("densify_m") = 0.0);

  m.def("format_percent", &scenario::format_percent, py::arg("relative_change"));
}
