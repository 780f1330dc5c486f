#include "optrec/io.hpp"

#include <cmath>
#include <istream>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace optrec::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("problem document: " + msg);
}

BasisFunction function_from(const json& j, Setting setting, const char* where) {
  if (setting == Setting::cosine) {
    if (!j.is_array()) fail(std::string(where) + ": cosine functions are coefficient arrays");
    CosinePoly p;
    p.coeffs = j.get<std::vector<double>>();
    return BasisFunction{p};
  }
  if (!j.is_object() || !j.contains("anchors") || !j.contains("weights"))
    fail(std::string(where) + ": kernel functions need anchors and weights");
  AnchoredFunction f;
  f.anchors = j.at("anchors").get<std::vector<double>>();
  f.weights = j.at("weights").get<std::vector<double>>();
  if (f.anchors.size() != f.weights.size())
    fail(std::string(where) + ": anchors and weights differ in length");
  return BasisFunction{f};
}

json function_to(const BasisFunction& f) {
  if (const CosinePoly* p = std::get_if<CosinePoly>(&f)) return json(p->coeffs);
  const AnchoredFunction& a = std::get<AnchoredFunction>(f);
  return json{{"anchors", a.anchors}, {"weights", a.weights}};
}

Kernel kernel_from(const json& j) {
  const std::string name = j.at("name").get<std::string>();
  const std::vector<double> params = j.value("params", std::vector<double>{});
  if (name == "min_plus_one") return Kernel::min_plus_one();
  if (name == "polynomial") {
    if (params.size() != 1) fail("polynomial kernel needs one parameter (the degree)");
    return Kernel::polynomial(static_cast<int>(params[0]));
  }
  if (name == "gaussian") {
    if (params.size() != 1) fail("gaussian kernel needs one parameter (the width)");
    return Kernel::gaussian(params[0]);
  }
  fail("unknown kernel '" + name + "'");
}

Eigen::MatrixXd matrix_from(const json& j, const char* where) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) fail(std::string(where) + ": matrix has no rows");
  Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) fail(std::string(where) + ": ragged matrix rows");
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  }
  return m;
}

json vec(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json finite_or_inf(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

}  // namespace

ProblemDocument read_problem(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(std::string("not valid JSON (") + e.what() + ")");
  }
  try {
    ProblemDocument doc;
    RecoveryProblem& p = doc.problem;
    const std::string setting = j.at("setting").get<std::string>();
    if (setting == "rkhs")
      p.setting = Setting::rkhs;
    else if (setting == "cosine")
      p.setting = Setting::cosine;
    else
      fail("setting must be 'rkhs' or 'cosine'");
    p.num_components = j.at("N").get<int>();
    if (j.contains("kernel") && !j.at("kernel").is_null()) p.kernel = kernel_from(j.at("kernel"));
    if (j.contains("domain")) {
      const auto d = j.at("domain").get<std::vector<double>>();
      if (d.size() != 2) fail("domain must be [lo, hi]");
      p.domain = {d[0], d[1]};
    } else if (p.setting == Setting::cosine) {
      p.domain = {0.0, M_PI};
    } else if (p.kernel) {
      p.domain = p.kernel->natural_domain();
    } else {
      fail("rkhs documents need a kernel or an explicit domain");
    }
    p.points.new_point = j.at("new_point").get<double>();
    p.points.old_points = j.at("old_points").get<std::vector<double>>();
    for (const json& ms : j.at("model_sets")) {
      ModelSetSpec spec;
      spec.epsilon = ms.at("epsilon").get<double>();
      spec.nonneg = ms.value("nonneg", false);
      if (ms.contains("basis"))
        for (const json& f : ms.at("basis"))
          spec.basis.push_back(function_from(f, p.setting, "model set basis"));
      p.model_sets.push_back(std::move(spec));
    }
    if (j.contains("dependence") && !j.at("dependence").is_null()) {
      const json& d = j.at("dependence");
      p.dependence.coefficients = matrix_from(d.at("A"), "dependence A");
      for (const json& f : d.at("b"))
        p.dependence.rhs.push_back(function_from(f, p.setting, "dependence rhs"));
      if (p.dependence.coefficients.rows() != static_cast<int>(p.dependence.rhs.size()))
        fail("dependence A and b disagree on the number of rows");
    }
    if (j.contains("observations") && !j.at("observations").is_null())
      doc.observations = matrix_from(j.at("observations"), "observations");
    return doc;
  } catch (const json::exception& e) {
    fail(std::string("malformed field (") + e.what() + ")");
  }
}

std::string problem_document(const ProblemDocument& doc) {
  const RecoveryProblem& p = doc.problem;
  json j;
  j["setting"] = p.setting == Setting::cosine ? "cosine" : "rkhs";
  j["N"] = p.num_components;
  j["domain"] = {p.domain[0], p.domain[1]};
  j["new_point"] = p.points.new_point;
  j["old_points"] = p.points.old_points;
  json sets = json::array();
  for (const ModelSetSpec& ms : p.model_sets) {
    json s{{"epsilon", ms.epsilon}, {"nonneg", ms.nonneg}};
    json basis = json::array();
    for (const BasisFunction& f : ms.basis) basis.push_back(function_to(f));
    s["basis"] = basis;
    sets.push_back(std::move(s));
  }
  j["model_sets"] = sets;
  if (p.dependence.count() > 0) {
    json a = json::array();
    for (int r = 0; r < p.dependence.coefficients.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < p.dependence.coefficients.cols(); ++c)
        row.push_back(p.dependence.coefficients(r, c));
      a.push_back(std::move(row));
    }
    json b = json::array();
    for (const BasisFunction& f : p.dependence.rhs) b.push_back(function_to(f));
    j["dependence"] = json{{"A", a}, {"b", b}};
  }
  if (p.kernel) {
    std::vector<double> params;
    if (p.kernel->family != KernelFamily::min_plus_one) params.push_back(p.kernel->param);
    j["kernel"] = json{{"name", p.kernel->name()}, {"params", params}};
  }
  if (doc.observations) {
    json rows = json::array();
    for (int m = 0; m < doc.observations->rows(); ++m) {
      json row = json::array();
      for (int n = 0; n < doc.observations->cols(); ++n) row.push_back((*doc.observations)(m, n));
      rows.push_back(std::move(row));
    }
    j["observations"] = rows;
  }
  return j.dump(2) + "\n";
}

std::string map_document(const AffineRecoveryMap& map, std::optional<int> level_r,
                         std::optional<int> grid_s,
                         const std::optional<Eigen::VectorXd>& predictions) {
  json coeffs = json::array();
  for (const Eigen::MatrixXd& c : map.coeffs) {
    json comp = json::array();
    for (int m = 0; m < c.rows(); ++m) {
      json row = json::array();
      for (int n = 0; n < c.cols(); ++n) row.push_back(c(m, n));
      comp.push_back(std::move(row));
    }
    coeffs.push_back(std::move(comp));
  }
  json prov = json::object();
  if (level_r) prov["level_r"] = *level_r;
  if (grid_s) prov["grid_s"] = *grid_s;
  json j{{"coeffs", coeffs},
         {"offsets", vec(map.offsets)},
         {"values", vec(map.values)},
         {"provenance", prov}};
  if (predictions) j["predictions"] = vec(*predictions);
  return j.dump(2) + "\n";
}

std::string certificate_document(const Certificate& cert) {
  json per = json::array();
  for (const Certificate::ComponentBounds& c : cert.per_component)
    per.push_back(json{{"e_lb", c.e_lb},
                       {"ub_plus", finite_or_inf(c.ub_plus)},
                       {"ub_minus", finite_or_inf(c.ub_minus)}});
  const json j{{"lb", cert.lower},        {"ub", finite_or_inf(cert.upper)},
               {"ratio", finite_or_inf(cert.ratio)}, {"r", cert.level_r},
               {"s", cert.grid_s},        {"per_j", per}};
  return j.dump(2) + "\n";
}

std::string error_document(int status, const std::string& kind, const std::string& message) {
  const json j{{"error", json{{"status", status}, {"kind", kind}, {"message", message}}}};
  return j.dump(2) + "\n";
}

}  // namespace optrec::io
