#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "k2gof/errors.hpp"
#include "k2gof/expr.hpp"
#include "k2gof/fit.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/model.hpp"
#include "k2gof/rotation.hpp"
#include "k2gof/sim.hpp"

namespace k2gof {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV data files (header "x1,x2" required).
// ---------------------------------------------------------------------------

inline std::vector<Point> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "': empty file, expected header x1,x2");
  // Tolerate a UTF-8 BOM and trailing carriage returns.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  if (line != "x1,x2")
    throw InputError("'" + path + "': expected header 'x1,x2', got '" + line + "'");
  std::vector<Point> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw InputError("'" + path + "': row " + std::to_string(row) + " is not 'x1,x2'");
    try {
      out.push_back({std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      throw InputError("'" + path + "': row " + std::to_string(row) + " has a bad number");
    }
  }
  if (out.empty()) throw InputError("'" + path + "': 0 data rows");
  return out;
}

inline void write_points_csv(const std::string& path, const std::vector<Point>& pts) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "x1,x2\n";
  out.precision(17);
  for (const Point& t : pts) out << t[0] << ',' << t[1] << '\n';
}

/// Node dump for plotting: x1, x2, value.
inline void write_field_csv(const std::string& path, const GridField& field) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "x1,x2,value\n";
  out.precision(17);
  const Grid& g = *field.grid();
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j)
      out << g.x1(i) << ',' << g.x2(j) << ',' << field.at(i, j) << '\n';
}

// ---------------------------------------------------------------------------
// JSON serialization.
// ---------------------------------------------------------------------------

inline json to_json(const ParamVector& pv) {
  json j = json::object();
  j["values"] = pv.values;
  j["labels"] = pv.labels;
  return j;
}

inline json to_json(const FitResult& fit, const std::string& model) {
  json j = json::object();
  j["schema"] = 1;
  j["model"] = model;
  j["params"] = to_json(fit.params);
  j["loglik"] = fit.log_likelihood;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  return j;
}

inline json to_json(const NullDistribution& nd) {
  json meta = json::object();
  meta["stat"] = nd.stat_kind;
  meta["model"] = nd.model;
  meta["params"] = to_json(nd.params_at_build);
  meta["n"] = nd.n;
  meta["replicates"] = nd.replicates;
  meta["seed"] = nd.seed;
  meta["method"] = nd.method;
  json j = json::object();
  j["schema"] = 1;
  j["meta"] = meta;
  j["values"] = nd.values;
  return j;
}

inline NullDistribution null_distribution_from_json(const json& j) {
  NullDistribution nd;
  const json& meta = j.at("meta");
  nd.stat_kind = meta.at("stat").get<std::string>();
  nd.model = meta.at("model").get<std::string>();
  nd.params_at_build.values = meta.at("params").at("values").get<std::vector<double>>();
  nd.params_at_build.labels = meta.at("params").at("labels").get<std::vector<std::string>>();
  nd.n = meta.at("n").get<int>();
  nd.replicates = meta.at("replicates").get<int>();
  nd.seed = meta.at("seed").get<std::uint64_t>();
  nd.method = meta.at("method").get<std::string>();
  nd.values = j.at("values").get<std::vector<double>>();
  return nd;
}

inline json to_json(const RotationAudit& a) {
  json j = json::object();
  j["max_c_mean"] = a.max_c_mean;
  j["max_ctilde_cross"] = a.max_ctilde_cross;
  j["max_chain_map"] = a.max_chain_map;
  j["max_three_way"] = a.max_three_way;
  j["min_l"] = a.min_l;
  j["max_l"] = a.max_l;
  return j;
}

/// Audit summary of a rotation plan: model names, parameters, K constant
/// and the invariant-check residuals.
inline json to_json(const RotationPlan& plan) {
  json j = json::object();
  j["reference"] = plan.q_instance()->spec().name;
  j["candidate"] = plan.f_instance()->spec().name;
  j["theta"] = to_json(plan.q_instance()->params());
  j["beta"] = to_json(plan.f_instance()->params());
  j["k_const"] = plan.k_const();
  j["audit"] = to_json(plan.audit());
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

/// Histogram rows (bin_left, bin_right, count, density) for distribution
/// plots; 60 bins over the value range.
inline void write_histogram_csv(const std::string& path, const std::vector<double>& sorted,
                                int bins = 60) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "bin_left,bin_right,count,density\n";
  if (sorted.empty()) return;
  out.precision(17);
  const double lo = sorted.front();
  double hi = sorted.back();
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  const double total = static_cast<double>(sorted.size());
  std::size_t i = 0;
  for (int b = 0; b < bins; ++b) {
    const double left = lo + b * width;
    const double right = b + 1 == bins ? hi : lo + (b + 1) * width;
    std::size_t count = 0;
    while (i < sorted.size() && (sorted[i] < right || b + 1 == bins)) {
      ++count;
      ++i;
    }
    out << left << ',' << right << ',' << count << ',' << count / (total * width) << '\n';
  }
}

inline void write_power_csv(const std::string& path, const PowerReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "null_model,statistic,alpha,power,se,replicates\n";
  out.precision(17);
  for (const PowerRow& r : report.rows)
    out << r.null_model << ',' << r.statistic << ',' << r.alpha << ',' << r.power << ','
        << r.se << ',' << r.replicates << '\n';
}

// ---------------------------------------------------------------------------
// User model specs from JSON.
// ---------------------------------------------------------------------------

/// Schema: {name, d, support: {lower, upper}, params: [{name, domain}],
/// density: expression in x1..xd and b1..bp}. domain is "real", "positive"
/// or [lo, hi]. An optional "initial" array seeds the optimizer.
inline ModelSpec model_spec_from_json(const json& j) {
  ModelSpec m;
  m.name = j.at("name").get<std::string>();
  const int d = j.at("d").get<int>();
  if (d != 2) throw InputError("user model '" + m.name + "': only d = 2 is supported");
  m.support = SupportRect(j.at("support").at("lower").get<std::vector<double>>(),
                          j.at("support").at("upper").get<std::vector<double>>());
  if (m.support.dim() != 2) throw InputError("user model '" + m.name + "': support must be 2-D");

  const json& params = j.at("params");
  m.p = static_cast<int>(params.size());
  if (m.p < 1) throw InputError("user model '" + m.name + "': needs at least one parameter");
  std::vector<double> initial;
  for (const json& prm : params) {
    m.initial_guess.labels.push_back(prm.at("name").get<std::string>());
    const json& dom = prm.at("domain");
    if (dom.is_string() && dom.get<std::string>() == "real") {
      m.param_domains.push_back(ParamDomain::real());
      initial.push_back(0.0);
    } else if (dom.is_string() && dom.get<std::string>() == "positive") {
      m.param_domains.push_back(ParamDomain::positive());
      initial.push_back(1.0);
    } else if (dom.is_array() && dom.size() == 2) {
      const double lo = dom[0].get<double>(), hi = dom[1].get<double>();
      m.param_domains.push_back(ParamDomain::interval(lo, hi));
      initial.push_back(0.5 * (lo + hi));
    } else {
      throw InputError("user model '" + m.name + "': domain must be \"real\", \"positive\" or [lo, hi]");
    }
  }
  if (j.contains("initial")) {
    initial = j.at("initial").get<std::vector<double>>();
    if (static_cast<int>(initial.size()) != m.p)
      throw InputError("user model '" + m.name + "': initial has wrong length");
  }
  m.initial_guess.values = initial;

  auto expr = std::make_shared<Expr>(Expr::parse(j.at("density").get<std::string>(), d, m.p));
  const int p = m.p;
  m.score_mode = ScoreMode::kFiniteDifference;
  m.log_density_unnormalized = [expr, p](const std::vector<double>& b, const Point& x) {
    double vars[2 + 32];
    std::vector<double> big;
    double* v = vars;
    if (p > 32) {
      big.resize(2 + p);
      v = big.data();
    }
    v[0] = x[0];
    v[1] = x[1];
    for (int k = 0; k < p; ++k) v[2 + k] = b[k];
    return std::log(expr->eval(v));
  };
  return m;
}

// ---------------------------------------------------------------------------
// Stable 64-bit FNV-1a hash for config provenance.
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace k2gof
