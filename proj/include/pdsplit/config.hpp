#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdsplit/builders.hpp"
#include "pdsplit/delay.hpp"
#include "pdsplit/diagnostics.hpp"
#include "pdsplit/errors.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/solvers.hpp"
#include "pdsplit/tuning.hpp"

namespace pdsplit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schema helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double num(const json& obj, const std::string& where,
                  const std::string& key, std::optional<double> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!obj[key].is_number())
    throw ConfigError(where + ": '" + key + "' must be a number");
  return obj[key].get<double>();
}

inline long integer(const json& obj, const std::string& where,
                    const std::string& key, std::optional<long> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!obj[key].is_number_integer())
    throw ConfigError(where + ": '" + key + "' must be an integer");
  return obj[key].get<long>();
}

inline std::string str(const json& obj, const std::string& where,
                       const std::string& key,
                       std::optional<std::string> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!obj[key].is_string())
    throw ConfigError(where + ": '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

inline std::vector<double> num_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// A matrix value is either nested arrays or "@path" naming a
// whitespace-delimited file: first line "rows cols", then the entries.
inline Eigen::MatrixXd matrix_value(const json& v, const std::string& where) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.empty() || s[0] != '@')
      throw ConfigError(where + ": matrix string must be '@<file>'");
    std::ifstream in(s.substr(1));
    if (!in) throw ConfigError(where + ": cannot open matrix file " + s);
    int rows, cols;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1)
      throw ConfigError(where + ": matrix file needs 'rows cols' header");
    Eigen::MatrixXd A(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (!(in >> A(r, c)))
          throw ConfigError(where + ": matrix file too short");
    return A;
  }
  if (!v.is_array() || v.empty())
    throw ConfigError(where + ": expected a matrix");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) throw ConfigError(where + ": expected nested arrays");
  Eigen::MatrixXd A(v.size(), cols);
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != cols)
      throw ConfigError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          v[r][c].get<double>();
  }
  return A;
}

inline Eigen::VectorXd vector_value(const json& v, const std::string& where) {
  std::vector<double> out = num_list(v, where);
  return Eigen::Map<const Eigen::VectorXd>(out.data(),
                                           static_cast<Eigen::Index>(out.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

enum class StepsizeMode { auto_bound, rate, manual };

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::none;
  int B = 0;
  int age = -1;          // fixed schedules; -1 means "use B"
  std::uint64_t seed = 0;
  std::string file;      // custom schedules
  bool monotone = false;
};

struct StepsizeConfig {
  StepsizeMode mode = StepsizeMode::auto_bound;
  std::vector<double> gamma;
  std::vector<double> sigma;
  double margin = 0.99;
};

struct ExperimentConfig {
  json problem;  // validated sub-schema, kept verbatim for building
  Algorithm algorithm = Algorithm::vu_condat_delayed;
  ScheduleConfig schedule;
  StepsizeConfig stepsize;
  std::vector<double> p;  // expanded to one entry per agent at build time
  long iters = 1000;
  std::vector<std::uint64_t> seeds{0};
  double alpha = 1.0;
  std::string reference = "auto";  // auto | none | <point file>
  int kkt_every = 1;
  std::string output = "trace.csv";
};

namespace detail {

inline void validate_problem_json(const json& p) {
  std::string where = "problem";
  std::string type = str(p, where, "type");
  if (type == "formation") {
    require_keys(p, where,
                 {"type", "m", "horizon", "dt", "lambda", "neighbors", "d",
                  "q_scale", "input_box", "state_box", "initial",
                  "polygon_radius"});
  } else if (type == "logistic") {
    require_keys(p, where,
                 {"type", "m", "samples_per_agent", "feature_dim", "lambda",
                  "seed"});
  } else if (type == "elastic_net") {
    require_keys(p, where,
                 {"type", "m", "samples_per_agent", "feature_dim", "lambda1",
                  "lambda2", "seed", "noise"});
  } else if (type == "custom") {
    require_keys(p, where,
                 {"type", "primal_dims", "dual_dims", "L", "g", "h", "f"});
  } else {
    throw ConfigError("problem: unknown type '" + type + "'");
  }
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "vu_condat") return Algorithm::vu_condat_delayed;
  if (s == "ahu") return Algorithm::ahu_delayed;
  if (s == "ahu_randomized") return Algorithm::ahu_randomized;
  if (s == "dual_decomposition") return Algorithm::dual_decomposition;
  throw ConfigError("algorithm: unknown value '" + s + "'");
}

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::vu_condat_delayed: return "vu_condat";
    case Algorithm::ahu_delayed: return "ahu";
    case Algorithm::ahu_randomized: return "ahu_randomized";
    case Algorithm::dual_decomposition: return "dual_decomposition";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "none") return ScheduleKind::none;
  if (s == "fixed") return ScheduleKind::fixed;
  if (s == "uniform_random") return ScheduleKind::uniform_random;
  if (s == "adversarial_max") return ScheduleKind::adversarial_max;
  if (s == "custom") return ScheduleKind::custom;
  throw ConfigError("schedule: unknown kind '" + s + "'");
}

inline std::string schedule_kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::none: return "none";
    case ScheduleKind::fixed: return "fixed";
    case ScheduleKind::uniform_random: return "uniform_random";
    case ScheduleKind::adversarial_max: return "adversarial_max";
    case ScheduleKind::custom: return "custom";
  }
  return "?";
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root) {
  detail::require_keys(root, "config",
                       {"problem", "algorithm", "schedule", "stepsize", "p",
                        "iters", "seeds", "seed", "alpha", "reference",
                        "kkt_every", "output"});
  ExperimentConfig cfg;
  if (!root.contains("problem"))
    throw ConfigError("config: missing 'problem'");
  detail::validate_problem_json(root["problem"]);
  cfg.problem = root["problem"];
  cfg.algorithm =
      detail::parse_algorithm(detail::str(root, "config", "algorithm"));

  if (root.contains("schedule")) {
    const json& s = root["schedule"];
    detail::require_keys(s, "schedule",
                         {"kind", "B", "age", "seed", "file", "monotone"});
    cfg.schedule.kind =
        detail::parse_schedule_kind(detail::str(s, "schedule", "kind"));
    cfg.schedule.B = static_cast<int>(detail::integer(s, "schedule", "B",
                                                      long{0}));
    cfg.schedule.age =
        static_cast<int>(detail::integer(s, "schedule", "age", long{-1}));
    cfg.schedule.seed = static_cast<std::uint64_t>(
        detail::integer(s, "schedule", "seed", long{0}));
    cfg.schedule.file = detail::str(s, "schedule", "file", std::string{});
    if (s.contains("monotone")) {
      if (!s["monotone"].is_boolean())
        throw ConfigError("schedule: 'monotone' must be a boolean");
      cfg.schedule.monotone = s["monotone"].get<bool>();
    }
    if (cfg.schedule.kind == ScheduleKind::none && cfg.schedule.B != 0)
      cfg.schedule.B = 0;  // forced
    if (cfg.schedule.kind == ScheduleKind::custom && cfg.schedule.file.empty())
      throw ConfigError("schedule: custom kind needs 'file'");
  }

  if (root.contains("stepsize")) {
    const json& s = root["stepsize"];
    detail::require_keys(s, "stepsize", {"mode", "gamma", "sigma", "margin"});
    std::string mode = detail::str(s, "stepsize", "mode", std::string{"auto"});
    if (mode == "auto")
      cfg.stepsize.mode = StepsizeMode::auto_bound;
    else if (mode == "rate")
      cfg.stepsize.mode = StepsizeMode::rate;
    else if (mode == "manual")
      cfg.stepsize.mode = StepsizeMode::manual;
    else
      throw ConfigError("stepsize: unknown mode '" + mode + "'");
    cfg.stepsize.margin = detail::num(s, "stepsize", "margin", 0.99);
    if (s.contains("gamma"))
      cfg.stepsize.gamma = detail::num_list(s["gamma"], "stepsize.gamma");
    if (s.contains("sigma"))
      cfg.stepsize.sigma = detail::num_list(s["sigma"], "stepsize.sigma");
    if (cfg.stepsize.mode == StepsizeMode::manual &&
        (cfg.stepsize.gamma.empty() || cfg.stepsize.sigma.empty()))
      throw ConfigError("stepsize: manual mode needs gamma and sigma");
  }

  if (root.contains("p")) {
    if (root["p"].is_number())
      cfg.p.assign(1, root["p"].get<double>());
    else
      cfg.p = detail::num_list(root["p"], "p");
  }
  cfg.iters = detail::integer(root, "config", "iters", long{1000});
  if (cfg.iters < 1) throw ConfigError("config: iters must be >= 1");
  if (root.contains("seeds") && root.contains("seed"))
    throw ConfigError("config: give either 'seed' or 'seeds', not both");
  if (root.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& e : root["seeds"]) {
      if (!e.is_number_integer()) throw ConfigError("config: bad seeds entry");
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  } else if (root.contains("seed")) {
    cfg.seeds.assign(1, static_cast<std::uint64_t>(
                            detail::integer(root, "config", "seed")));
  }
  cfg.alpha = detail::num(root, "config", "alpha", 1.0);
  cfg.reference = detail::str(root, "config", "reference", std::string{"auto"});
  cfg.kkt_every =
      static_cast<int>(detail::integer(root, "config", "kkt_every", long{1}));
  cfg.output = detail::str(root, "config", "output", std::string{"trace.csv"});
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline json to_json(const ExperimentConfig& cfg) {
  json root;
  root["problem"] = cfg.problem;
  root["algorithm"] = detail::algorithm_name(cfg.algorithm);
  json sched;
  sched["kind"] = detail::schedule_kind_name(cfg.schedule.kind);
  sched["B"] = cfg.schedule.B;
  sched["age"] = cfg.schedule.age;
  sched["seed"] = cfg.schedule.seed;
  sched["file"] = cfg.schedule.file;
  sched["monotone"] = cfg.schedule.monotone;
  root["schedule"] = sched;
  json step;
  step["mode"] = cfg.stepsize.mode == StepsizeMode::auto_bound ? "auto"
                 : cfg.stepsize.mode == StepsizeMode::rate     ? "rate"
                                                               : "manual";
  if (!cfg.stepsize.gamma.empty()) step["gamma"] = cfg.stepsize.gamma;
  if (!cfg.stepsize.sigma.empty()) step["sigma"] = cfg.stepsize.sigma;
  step["margin"] = cfg.stepsize.margin;
  root["stepsize"] = step;
  if (!cfg.p.empty()) root["p"] = cfg.p;
  root["iters"] = cfg.iters;
  root["seeds"] = cfg.seeds;
  root["alpha"] = cfg.alpha;
  root["reference"] = cfg.reference;
  root["kkt_every"] = cfg.kkt_every;
  root["output"] = cfg.output;
  return root;
}

// ---------------------------------------------------------------------------
// Problem construction from the validated sub-schema
// ---------------------------------------------------------------------------

struct BuiltProblem {
  ProblemSpec spec;
  std::optional<AffineConstrainedProblem> dd;  // formation only
};

namespace detail {

inline BuiltProblem build_custom(const json& p) {
  std::vector<int> pd, dd;
  for (const auto& e : p.at("primal_dims")) pd.push_back(e.get<int>());
  for (const auto& e : p.at("dual_dims")) dd.push_back(e.get<int>());
  BlockDims dims(pd, dd);
  const int m = dims.agents();

  BuiltProblem out;
  out.spec.dims = dims;
  out.spec.L = BlockLinearMap(dims);
  if (!p.contains("L") || !p["L"].is_array())
    throw ConfigError("custom problem: 'L' must be an array of blocks");
  for (const auto& blk : p["L"]) {
    require_keys(blk, "custom.L[]", {"i", "j", "matrix"});
    int i = static_cast<int>(integer(blk, "custom.L[]", "i"));
    int j = static_cast<int>(integer(blk, "custom.L[]", "j"));
    out.spec.L.set_block(i, j, matrix_value(blk.at("matrix"), "custom.L[]"));
  }

  if (!p.contains("g") || !p["g"].is_array() ||
      static_cast<int>(p["g"].size()) != m)
    throw ConfigError("custom problem: need one 'g' entry per agent");
  for (int i = 0; i < m; ++i) {
    const json& gi = p["g"][static_cast<std::size_t>(i)];
    std::string type = str(gi, "custom.g[]", "type");
    if (type == "quadratic") {
      require_keys(gi, "custom.g[]", {"type", "Q"});
      out.spec.g.push_back(
          make_quadratic_prox(matrix_value(gi.at("Q"), "custom.g[].Q")));
    } else if (type == "quadratic_diag") {
      require_keys(gi, "custom.g[]", {"type", "diag"});
      out.spec.g.push_back(make_diagonal_quadratic_prox(
          vector_value(gi.at("diag"), "custom.g[].diag")));
    } else if (type == "elastic_net") {
      require_keys(gi, "custom.g[]", {"type", "lambda1", "lambda2"});
      out.spec.g.push_back(make_elastic_net_sized(
          num(gi, "custom.g[]", "lambda1"), num(gi, "custom.g[]", "lambda2"),
          dims.primal[static_cast<std::size_t>(i)]));
    } else {
      throw ConfigError("custom.g[]: unknown type '" + type + "'");
    }
  }

  if (!p.contains("h") || !p["h"].is_array() ||
      static_cast<int>(p["h"].size()) != m)
    throw ConfigError("custom problem: need one 'h' entry per agent");
  for (int i = 0; i < m; ++i) {
    const json& hi = p["h"][static_cast<std::size_t>(i)];
    std::string type = str(hi, "custom.h[]", "type");
    if (type == "squared_loss") {
      require_keys(hi, "custom.h[]", {"type", "targets"});
      out.spec.h.push_back(ConjugateProxOracle{
          make_squared_loss(vector_value(hi.at("targets"),
                                         "custom.h[].targets")),
          1.0});
    } else if (type == "point") {
      require_keys(hi, "custom.h[]", {"type", "b"});
      out.spec.h.push_back(ConjugateProxOracle{
          make_point_indicator(vector_value(hi.at("b"), "custom.h[].b")),
          0.0});
    } else if (type == "box") {
      require_keys(hi, "custom.h[]", {"type", "lo", "hi"});
      out.spec.h.push_back(ConjugateProxOracle{
          make_box_indicator(vector_value(hi.at("lo"), "custom.h[].lo"),
                             vector_value(hi.at("hi"), "custom.h[].hi")),
          0.0});
    } else if (type == "logistic") {
      require_keys(hi, "custom.h[]", {"type", "labels"});
      out.spec.h.push_back(ConjugateProxOracle{
          make_logistic_loss(vector_value(hi.at("labels"),
                                          "custom.h[].labels")),
          4.0});
    } else {
      throw ConfigError("custom.h[]: unknown type '" + type + "'");
    }
  }

  if (p.contains("f")) {
    const json& f = p["f"];
    require_keys(f, "custom.f", {"pairs", "C"});
    Eigen::MatrixXd C = matrix_value(f.at("C"), "custom.f.C");
    std::vector<CouplingPair> pairs;
    for (const auto& pr : f.at("pairs")) {
      require_keys(pr, "custom.f.pairs[]", {"i", "j", "lambda", "d"});
      pairs.push_back(CouplingPair{
          static_cast<int>(integer(pr, "custom.f.pairs[]", "i")),
          static_cast<int>(integer(pr, "custom.f.pairs[]", "j")),
          num(pr, "custom.f.pairs[]", "lambda"),
          vector_value(pr.at("d"), "custom.f.pairs[].d")});
    }
    out.spec.f = make_quadratic_coupling(dims.primal, pairs, C);
  } else {
    out.spec.f = zero_smooth(dims.primal);
  }
  out.spec.f_dependency = out.spec.f.depends_on;
  out.spec.validate();
  return out;
}

}  // namespace detail

inline BuiltProblem build_problem(const ExperimentConfig& cfg) {
  const json& p = cfg.problem;
  std::string type = p.at("type").get<std::string>();
  if (type == "formation") {
    FormationConfig fc;
    fc.m = static_cast<int>(detail::integer(p, "formation", "m", long{5}));
    fc.horizon =
        static_cast<int>(detail::integer(p, "formation", "horizon", long{3}));
    fc.dt = detail::num(p, "formation", "dt", 1.0);
    if (p.contains("lambda")) {
      if (p["lambda"].is_number())
        fc.lambda.assign(1, p["lambda"].get<double>());
      else
        fc.lambda = detail::num_list(p["lambda"], "formation.lambda");
    }
    if (p.contains("neighbors")) {
      for (const auto& row : p["neighbors"]) {
        std::vector<int> r;
        for (const auto& e : row) r.push_back(e.get<int>());
        fc.neighbors.push_back(std::move(r));
      }
    }
    if (p.contains("d")) {
      fc.arrow_targets = false;
      for (const auto& e : p["d"]) {
        if (!e.is_array() || e.size() != 4)
          throw ConfigError("formation.d: entries are [i, j, dx, dy]");
        fc.d.push_back({{e[0].get<int>(), e[1].get<int>()},
                        Eigen::Vector2d(e[2].get<double>(),
                                        e[3].get<double>())});
      }
    }
    if (p.contains("q_scale")) {
      double q = detail::num(p, "formation", "q_scale");
      int ni = 6 * fc.horizon;
      fc.Q.assign(static_cast<std::size_t>(fc.m),
                  q * Eigen::MatrixXd::Identity(ni, ni));
    }
    if (p.contains("input_box")) {
      auto b = detail::num_list(p["input_box"], "formation.input_box");
      if (b.size() != 2) throw ConfigError("formation.input_box: [lo, hi]");
      fc.input_lo = b[0];
      fc.input_hi = b[1];
    }
    if (p.contains("state_box")) {
      auto b = detail::num_list(p["state_box"], "formation.state_box");
      if (b.size() != 2) throw ConfigError("formation.state_box: [lo, hi]");
      fc.state_lo = b[0];
      fc.state_hi = b[1];
    }
    fc.polygon_radius = detail::num(p, "formation", "polygon_radius", 5.0);
    if (p.contains("initial")) {
      if (p["initial"].is_string()) {
        if (p["initial"].get<std::string>() != "polygon")
          throw ConfigError("formation.initial: unknown preset '" +
                            p["initial"].get<std::string>() + "'");
      } else {
        for (const auto& e : p["initial"]) {
          auto v = detail::num_list(e, "formation.initial");
          if (v.size() != 4)
            throw ConfigError("formation.initial: entries are [px,py,vx,vy]");
          fc.initial_states.push_back(Eigen::Vector4d(v[0], v[1], v[2], v[3]));
        }
      }
    }
    FormationProblem fp = build_formation(fc);
    BuiltProblem out;
    out.spec = std::move(fp.spec);
    out.dd = std::move(fp.dd);
    return out;
  }
  if (type == "logistic") {
    LogisticConfig lc;
    lc.m = static_cast<int>(detail::integer(p, "logistic", "m", long{3}));
    lc.samples_per_agent = static_cast<int>(
        detail::integer(p, "logistic", "samples_per_agent", long{10}));
    lc.feature_dim = static_cast<int>(
        detail::integer(p, "logistic", "feature_dim", long{6}));
    lc.lambda = detail::num(p, "logistic", "lambda", 0.1);
    lc.seed = static_cast<std::uint64_t>(
        detail::integer(p, "logistic", "seed", long{0}));
    BuiltProblem out;
    out.spec = build_logistic(lc).spec;
    return out;
  }
  if (type == "elastic_net") {
    ElasticNetConfig ec;
    ec.m = static_cast<int>(detail::integer(p, "elastic_net", "m", long{3}));
    ec.samples_per_agent = static_cast<int>(
        detail::integer(p, "elastic_net", "samples_per_agent", long{10}));
    ec.feature_dim = static_cast<int>(
        detail::integer(p, "elastic_net", "feature_dim", long{6}));
    ec.lambda1 = detail::num(p, "elastic_net", "lambda1", 0.1);
    ec.lambda2 = detail::num(p, "elastic_net", "lambda2", 0.5);
    ec.seed = static_cast<std::uint64_t>(
        detail::integer(p, "elastic_net", "seed", long{0}));
    ec.noise = detail::num(p, "elastic_net", "noise", 0.1);
    BuiltProblem out;
    out.spec = build_elastic_net(ec).spec;
    return out;
  }
  return detail::build_custom(p);
}

inline DelaySchedule build_schedule(const ScheduleConfig& sc) {
  DelaySchedule s = DelaySchedule::none();
  switch (sc.kind) {
    case ScheduleKind::none:
      s = DelaySchedule::none();
      break;
    case ScheduleKind::fixed:
      s = DelaySchedule::fixed(sc.age < 0 ? sc.B : sc.age, sc.B);
      break;
    case ScheduleKind::uniform_random:
      s = DelaySchedule::uniform_random(sc.B, sc.seed);
      break;
    case ScheduleKind::adversarial_max:
      s = DelaySchedule::adversarial_max(sc.B);
      break;
    case ScheduleKind::custom: {
      std::ifstream in(sc.file);
      if (!in) throw ConfigError("cannot open schedule file: " + sc.file);
      s = DelaySchedule::load(in, sc.B);
      break;
    }
  }
  return s.with_monotone(sc.monotone);
}

struct PlanWithCertificate {
  StepsizePlan plan;
  std::optional<RateCertificate> certificate;
};

// Resolves the configured stepsize mode against the problem class:
// auto picks the convergence bound matching the algorithm, rate picks
// the linear-rate recipe (with its certificate).
inline PlanWithCertificate resolve_plan(const ExperimentConfig& cfg,
                                        const ProblemSpec& spec,
                                        const ProblemConstants& cst,
                                        const std::vector<double>& p_expanded) {
  PlanWithCertificate out;
  switch (cfg.stepsize.mode) {
    case StepsizeMode::manual: {
      std::vector<double> g = cfg.stepsize.gamma, s = cfg.stepsize.sigma;
      if (g.size() == 1) g.assign(static_cast<std::size_t>(spec.agents()), g[0]);
      if (s.size() == 1) s.assign(static_cast<std::size_t>(spec.agents()), s[0]);
      out.plan = manual_plan(std::move(g), std::move(s));
      return out;
    }
    case StepsizeMode::auto_bound: {
      if (cfg.algorithm == Algorithm::vu_condat_delayed) {
        std::vector<double> sigma = cfg.stepsize.sigma;
        if (sigma.empty()) sigma = default_dual_stepsizes(cst);
        if (sigma.size() == 1)
          sigma.assign(static_cast<std::size_t>(spec.agents()), sigma[0]);
        out.plan = stepsizes_partial(cst, sigma, cfg.schedule.B,
                                     cfg.stepsize.margin);
      } else if (cfg.algorithm == Algorithm::ahu_randomized) {
        out.plan = stepsizes_random(cst, cfg.schedule.B, p_expanded,
                                    cfg.stepsize.margin);
      } else {
        out.plan = stepsizes_total(cst, cfg.schedule.B, cfg.stepsize.margin);
      }
      return out;
    }
    case StepsizeMode::rate: {
      if (cfg.algorithm == Algorithm::vu_condat_delayed)
        throw InapplicabilityError(
            "stepsize: no linear-rate certificate exists for vu_condat; use "
            "mode auto or algorithm ahu");
      if (cfg.algorithm == Algorithm::ahu_randomized) {
        RatePlan rp = rate_constants_random(cst, cfg.schedule.B, p_expanded);
        out.plan = rp.plan;
        out.certificate = rp.certificate;
      } else {
        RatePlan rp = rate_constants_deterministic(cst, cfg.schedule.B,
                                                   cfg.stepsize.margin);
        out.plan = rp.plan;
        out.certificate = rp.certificate;
      }
      return out;
    }
  }
  throw ConfigError("stepsize: unresolved mode");
}

}  // namespace pdsplit
