#include "pmc/config.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pmc {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path, msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(join(path, it.key()), "unknown field");
  }
}

const json& require(const json& obj, const std::string& path,
                    const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(join(path, key), "missing required field");
  return *it;
}

double get_real(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "must be a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "must be an integer");
  return v.get<int>();
}

std::string get_str(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "must be a string");
  return v.get<std::string>();
}

Expr parse_expr(const std::string& text, int dim, const std::string& path) {
  try {
    return Expr::parse(text, dim);
  } catch (const ParseError& e) {
    std::ostringstream os;
    os << "parse error at offset " << e.offset() << ": " << e.what();
    fail(path, os.str());
  }
}

MetricChart parse_metric(const json& m, int dim, std::string& name) {
  const std::string path = "metric";
  if (!m.is_object()) fail(path, "must be an object");
  const std::string type = get_str(require(m, path, "type"), path + ".type");
  name = type;

  if (type == "euclidean") {
    check_keys(m, path, {"type"});
    return MetricChart::euclidean(dim);
  }

  if (type == "conformal") {
    check_keys(m, path, {"type", "epsilon"});
    const double eps =
        get_real(require(m, path, "epsilon"), path + ".epsilon");
    char buf[96];
    std::snprintf(buf, sizeof buf, "1 + %.17g * (x1^2 + x2^2%s)", eps,
                  dim == 3 ? " + x3^2" : "");
    return MetricChart::conformal(dim, Expr::parse(buf, dim));
  }

  if (type == "diagonal") {
    check_keys(m, path, {"type", "exprs"});
    const json& arr = require(m, path, "exprs");
    if (!arr.is_array() || (int)arr.size() != dim)
      fail(path + ".exprs", "must be an array of dim expression strings");
    std::vector<Expr> diag;
    for (int i = 0; i < dim; ++i) {
      const std::string ep = path + ".exprs[" + std::to_string(i) + "]";
      diag.push_back(parse_expr(get_str(arr[i], ep), dim, ep));
    }
    return MetricChart::diagonal(dim, std::move(diag));
  }

  if (type == "general") {
    check_keys(m, path, {"type", "g"});
    const json& g = require(m, path, "g");
    if (!g.is_array() || (int)g.size() != dim)
      fail(path + ".g", "must be a dim x dim array of expression strings");
    std::vector<Expr> entries;
    for (int i = 0; i < dim; ++i) {
      const json& row = g[i];
      const std::string rp = path + ".g[" + std::to_string(i) + "]";
      if (!row.is_array() || (int)row.size() != dim)
        fail(rp, "must be an array of dim expression strings");
      for (int j = 0; j < dim; ++j) {
        const std::string ep = rp + "[" + std::to_string(j) + "]";
        entries.push_back(parse_expr(get_str(row[j], ep), dim, ep));
      }
    }
    return MetricChart::general(dim, std::move(entries));
  }

  fail(path + ".type",
       "must be one of euclidean, conformal, diagonal, general");
}

RunMode parse_mode(const json& v) {
  const std::string s = get_str(v, "mode");
  if (s == "auto") return RunMode::automatic;
  if (s == "nondegenerate") return RunMode::nondegenerate;
  if (s == "degenerate") return RunMode::degenerate;
  fail("mode", "must be one of auto, nondegenerate, degenerate");
}

ProblemConfig parse_root(const json& root) {
  if (!root.is_object()) fail("config", "top level must be an object");
  check_keys(root, "",
             {"dim", "metric", "f", "chart_radius", "L", "r_grid", "mode",
              "tolerances"});

  ProblemConfig cfg;
  cfg.dim = get_int(require(root, "", "dim"), "dim");
  if (cfg.dim != 2 && cfg.dim != 3) fail("dim", "must be 2 or 3");

  cfg.chart = parse_metric(require(root, "", "metric"), cfg.dim,
                           cfg.metric_name);

  cfg.f = parse_expr(get_str(require(root, "", "f"), "f"), cfg.dim, "f");
  const double origin[3] = {0.0, 0.0, 0.0};
  double f0 = 0.0;
  try {
    f0 = cfg.f.eval(origin);
  } catch (const EvalDomainError& e) {
    fail("f", std::string("cannot evaluate at the origin: ") + e.what());
  }
  if (!(f0 > 0.0)) fail("f", "must be positive at the origin");

  cfg.chart_radius =
      get_real(require(root, "", "chart_radius"), "chart_radius");
  if (!(cfg.chart_radius > 0.0)) fail("chart_radius", "must be positive");

  cfg.L = get_int(require(root, "", "L"), "L");
  if (cfg.L < 1 || cfg.L > 64) fail("L", "must be between 1 and 64");

  {
    const json& rg = require(root, "", "r_grid");
    if (!rg.is_object()) fail("r_grid", "must be an object");
    check_keys(rg, "r_grid", {"min", "max", "count", "spacing"});
    cfg.r_grid.min = get_real(require(rg, "r_grid", "min"), "r_grid.min");
    cfg.r_grid.max = get_real(require(rg, "r_grid", "max"), "r_grid.max");
    cfg.r_grid.count =
        get_int(require(rg, "r_grid", "count"), "r_grid.count");
    const std::string sp =
        get_str(require(rg, "r_grid", "spacing"), "r_grid.spacing");
    if (sp == "log")
      cfg.r_grid.log_spacing = true;
    else if (sp == "linear")
      cfg.r_grid.log_spacing = false;
    else
      fail("r_grid.spacing", "must be log or linear");
    if (!(cfg.r_grid.min > 0.0)) fail("r_grid.min", "must be positive");
    if (!(cfg.r_grid.max > cfg.r_grid.min))
      fail("r_grid.max", "must exceed r_grid.min");
    if (cfg.r_grid.count < 2) fail("r_grid.count", "must be at least 2");
    if (!(cfg.r_grid.max < cfg.chart_radius / 4.0))
      fail("r_grid.max", "must be below chart_radius / 4");
  }

  if (auto it = root.find("mode"); it != root.end())
    cfg.mode = parse_mode(*it);

  cfg.tolerances.rho = cfg.chart_radius / 8.0;
  if (auto it = root.find("tolerances"); it != root.end()) {
    const json& t = *it;
    if (!t.is_object()) fail("tolerances", "must be an object");
    check_keys(t, "tolerances",
               {"inner_tol", "outer_tol", "leaf_tol", "inner_maxit",
                "outer_maxit", "rho"});
    auto real_opt = [&](const char* key, double& dst) {
      if (auto jt = t.find(key); jt != t.end()) {
        dst = get_real(*jt, join("tolerances", key));
        if (!(dst > 0.0)) fail(join("tolerances", key), "must be positive");
      }
    };
    auto int_opt = [&](const char* key, int& dst) {
      if (auto jt = t.find(key); jt != t.end()) {
        dst = get_int(*jt, join("tolerances", key));
        if (dst < 1) fail(join("tolerances", key), "must be at least 1");
      }
    };
    real_opt("inner_tol", cfg.tolerances.inner_tol);
    real_opt("outer_tol", cfg.tolerances.outer_tol);
    real_opt("leaf_tol", cfg.tolerances.leaf_tol);
    real_opt("rho", cfg.tolerances.rho);
    int_opt("inner_maxit", cfg.tolerances.inner_maxit);
    int_opt("outer_maxit", cfg.tolerances.newton_maxit);
  }

  return cfg;
}

} // namespace

std::vector<double> RadiusGrid::radii() const {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = min;
    return out;
  }
  if (log_spacing) {
    const double la = std::log(min), lb = std::log(max);
    for (int i = 0; i < count; ++i)
      out[i] = std::exp(la + (lb - la) * i / (count - 1));
  } else {
    for (int i = 0; i < count; ++i)
      out[i] = min + (max - min) * i / (count - 1);
  }
  out.front() = min;
  out.back() = max;
  return out;
}

ProblemConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("config", std::string("not valid JSON: ") + e.what());
  }
  ProblemConfig cfg = parse_root(root);

  // Vet a curved chart numerically on the working box before any solver
  // touches it.
  if (!cfg.chart.is_euclidean()) {
    double lo[3] = {}, hi[3] = {};
    for (int i = 0; i < cfg.dim; ++i) {
      lo[i] = -cfg.chart_radius / 2.0;
      hi[i] = cfg.chart_radius / 2.0;
    }
    try {
      cfg.chart.validate_spd(lo, hi, 5);
    } catch (const std::exception& e) {
      fail("metric", e.what());
    }
  }
  return cfg;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("config", "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

} // namespace pmc
