#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lassodist/distribution.hpp"
#include "lassodist/errors.hpp"
#include "lassodist/geometry.hpp"
#include "lassodist/io.hpp"
#include "lassodist/model.hpp"
#include "lassodist/simulate.hpp"
#include "lassodist/solver.hpp"

namespace lassodist::cli {

using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUsage = 64;

inline const std::vector<std::pair<std::string, std::string>>& subcommands() {
  static const std::vector<std::pair<std::string, std::string>> list = {
      {"solve", "solve the weighted Lasso at --y"},
      {"structural-set", "coordinates that are non-zero for some response"},
      {"selectable", "whether the model --model can be selected"},
      {"check-unique", "uniqueness for every response, with a witness if not"},
      {"general-position", "whether the signed columns are in general position"},
      {"prob-zero", "P(all coefficients are zero)"},
      {"orthant-prob", "probability of an orthant event at --z"},
      {"cdf", "cdf of the estimation error at --z"},
      {"density-grid", "density piece on a grid, as CSV"},
      {"simulate", "Monte-Carlo summary of the estimator"},
      {"shrinkage-map", "Lasso estimate for a least-squares point --z"},
  };
  return list;
}

inline std::string usage() {
  std::string s = "usage: lassodist <subcommand> --input FILE [options]\n\nsubcommands:\n";
  for (const auto& [name, help] : subcommands()) {
    s += "  " + name + std::string(18 - name.size(), ' ') + help + "\n";
  }
  s += "\nrun 'lassodist <subcommand> --help' for options\n";
  return s;
}

/// Values of every flag; each subcommand registers the ones it uses.
struct Flags {
  std::string input;
  std::string y;
  std::string lambda;
  std::string method = "quad";
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  std::string model;
  std::string grid = "-3:3:61";
  std::string z;
  std::string signs;
  std::string event = "estimator";
  std::int64_t reps = 10000;
  std::string report = "json";
  bool conditional = false;
  int workers = 0;
};

namespace detail {

inline json probability_json(const RegionProbability& r) {
  return json{{"estimate", r.estimate},
              {"std_error", r.std_error},
              {"method", method_name(r.method)},
              {"n_samples", r.n_samples},
              {"seed", r.seed},
              {"quad_tol", r.quad_tol}};
}

inline json face_json(const FaceWitness& w) {
  return json{{"model", io::to_json(w.model)}, {"signs", w.signs}, {"z", io::to_json(w.z)}, {"v", io::to_json(w.v)}};
}

struct Context {
  io::ProblemEnvelope env;
  DesignProblem problem;
  std::optional<TuningVector> tuning;

  const TuningVector& lambda() const {
    if (!tuning) throw InputError("lambda is required (envelope key \"lambda\" or --lambda)");
    return *tuning;
  }
  GaussianModel model() const {
    if (!env.beta) throw InputError("beta is required in the envelope");
    if (!env.sigma) throw InputError("sigma is required in the envelope");
    return make_model(problem, *env.beta, *env.sigma);
  }
};

inline Context load(const Flags& f) {
  io::ProblemEnvelope env = io::load_envelope(f.input);
  DesignProblem problem = env.problem();
  std::optional<TuningVector> tuning;
  if (!f.lambda.empty()) {
    VectorXd l = io::parse_vector(f.lambda, "lambda");
    if (l.size() == 1 && problem.p() > 1) l = VectorXd::Constant(problem.p(), l(0));
    if (l.size() != problem.p()) throw InputError("lambda must have length p");
    tuning = TuningVector(l);
  } else if (env.lambda) {
    tuning = TuningVector(*env.lambda);
  }
  return Context{std::move(env), std::move(problem), std::move(tuning)};
}

inline DistributionOptions distribution_options(const Flags& f) {
  DistributionOptions o;
  if (f.method == "quad") o.method = Method::Quadrature;
  else if (f.method == "mc") o.method = Method::MonteCarlo;
  else throw InputError("--method must be quad or mc");
  if (f.samples < 1) throw InputError("--samples must be positive");
  if (!(f.tol > 0.0)) throw InputError("--tol must be positive");
  o.samples = f.samples;
  o.seed = f.seed;
  o.quad_tol = f.tol;
  o.workers = f.workers;
  return o;
}

inline VectorXd vector_flag(const std::string& text, const std::string& name, Eigen::Index len) {
  if (text.empty()) throw InputError("--" + name + " is required");
  const VectorXd v = io::parse_vector(text, name);
  if (v.size() != len) throw InputError("--" + name + " must have " + std::to_string(len) + " entries");
  return v;
}

inline json run_solve(const Flags& f) {
  const Context c = load(f);
  VectorXd y;
  if (!f.y.empty()) y = vector_flag(f.y, "y", c.problem.n());
  else if (c.env.y) y = *c.env.y;
  else throw InputError("a response is required (--y or envelope key \"y\")");
  const SolutionSetDescription s = describe_solution_set(c.problem, y, c.lambda());
  json cls = json::array();
  for (auto e : s.equicorrelation_signs) {
    cls.push_back(e == Equicorrelation::AtUpper ? "upper" : (e == Equicorrelation::AtLower ? "lower" : "inside"));
  }
  return json{{"b", io::to_json(s.anchor.b)},
              {"fit", io::to_json(s.fit)},
              {"objective", s.anchor.objective},
              {"kkt_residual", s.anchor.kkt_residual},
              {"active_model", io::to_json(s.anchor.active_model)},
              {"equicorrelation", cls},
              {"unique_at_y", s.is_unique_at_y}};
}

inline json run_structural_set(const Flags& f) {
  const Context c = load(f);
  const StructuralSet s = structural_set_with_certificates(c.problem, c.lambda());
  json certs = json::array();
  for (const auto& w : s.certificates) certs.push_back(face_json(w));
  return json{{"structural_set", io::to_json(s.indices)}, {"certificates", certs}};
}

inline json run_selectable(const Flags& f) {
  const Context c = load(f);
  const IndexSet m = io::parse_index_list(f.model, c.problem.p());
  const auto w = selecting_face(c.problem, c.lambda(), m);
  return json{{"model", io::to_json(m)}, {"selectable", w.has_value()}, {"certificate", w ? face_json(*w) : json()}};
}

inline json run_check_unique(const Flags& f) {
  const Context c = load(f);
  const UniquenessVerdict v = check_uniqueness(c.problem, c.lambda());
  json out{{"unique", v.unique}, {"rank", c.problem.rank()}};
  if (v.witness) {
    const auto& w = *v.witness;
    const bool ok1 = is_solution(c.problem, w.y, c.lambda(), w.b, 1e-8).ok;
    const bool ok2 = is_solution(c.problem, w.y, c.lambda(), w.b_tilde, 1e-8).ok;
    out["witness"] = json{{"y", io::to_json(w.y)},
                          {"b", io::to_json(w.b)},
                          {"b_tilde", io::to_json(w.b_tilde)},
                          {"verified", ok1 && ok2 && (w.b - w.b_tilde).norm() > 1e-6}};
    out["violating_face"] = face_json(*v.violating_face);
  } else {
    out["witness"] = nullptr;
    out["violating_face"] = nullptr;
  }
  return out;
}

inline json run_general_position(const Flags& f) {
  const Context c = load(f);
  return json{{"general_position", general_position(c.problem)}};
}

inline json run_prob_zero(const Flags& f) {
  const Context c = load(f);
  return probability_json(prob_all_zero(c.problem, c.model(), c.lambda(), distribution_options(f)));
}

inline json run_orthant_prob(const Flags& f) {
  const Context c = load(f);
  const GaussianModel m = c.model();
  const VectorXd z = vector_flag(f.z, "z", c.problem.p());
  OrthantEvent ev;
  if (f.event == "estimator") ev = OrthantEvent::estimator(z);
  else if (f.event == "error") ev = OrthantEvent::error(z, m.beta);
  else throw InputError("--event must be estimator or error");
  if (!f.signs.empty()) ev.d = io::parse_signs(f.signs, c.problem.p());
  json out = probability_json(prob_orthant_event(c.problem, m, c.lambda(), ev, distribution_options(f)));
  out["event"] = f.event;
  out["z"] = io::to_json(z);
  out["signs"] = io::to_json(ev.d);
  return out;
}

inline json run_cdf(const Flags& f) {
  const Context c = load(f);
  const VectorXd z = vector_flag(f.z, "z", c.problem.p());
  json out = probability_json(cdf(c.problem, c.model(), c.lambda(), z, distribution_options(f)));
  out["z"] = io::to_json(z);
  return out;
}

inline std::string run_density_grid(const Flags& f) {
  const Context c = load(f);
  const GaussianModel m = c.model();
  if (f.signs.empty()) throw InputError("--signs is required");
  const SignVector d = io::parse_signs(f.signs, c.problem.p());
  DistributionOptions o = distribution_options(f);
  o.method = Method::Quadrature;
  const std::vector<double> grid = io::parse_grid(f.grid);
  const IndexSet a = d.active();
  std::optional<ConditionalDensity> cond;
  if (f.conditional) cond.emplace(c.problem, m, c.lambda(), d, o);

  std::string out;
  for (int j : a) out += "z" + std::to_string(j + 1) + ",";
  out += "value\n";
  const auto k = static_cast<Eigen::Index>(a.size());
  std::vector<std::size_t> idx(a.size(), 0);
  VectorXd pt(k);
  while (true) {
    for (Eigen::Index i = 0; i < k; ++i) pt(i) = grid[idx[static_cast<std::size_t>(i)]];
    const double v = cond ? (*cond)(pt) : density_piece(c.problem, m, c.lambda(), d, pt, o);
    for (Eigen::Index i = 0; i < k; ++i) out += io::format_double(pt(i)) + ",";
    out += io::format_double(v) + "\n";
    // odometer over the grid, last active coordinate fastest
    Eigen::Index i = k - 1;
    while (i >= 0 && ++idx[static_cast<std::size_t>(i)] == grid.size()) idx[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return out;
}

inline std::string sign_key(const SignVector& d) {
  std::string s;
  for (int v : d.values()) s += v < 0 ? '-' : (v > 0 ? '+' : '0');
  return s;
}

inline std::string run_simulate(const Flags& f) {
  const Context c = load(f);
  SimulationConfig cfg;
  cfg.n_rep = f.reps;
  cfg.seed = f.seed;
  cfg.workers = f.workers;
  const EmpiricalSummary s = run_simulation(c.problem, c.model(), c.lambda(), cfg);
  const auto n = static_cast<double>(s.successes());
  if (f.report == "csv") {
    std::string out = "kind,key,count,frequency\n";
    for (const auto& [d, cnt] : s.sign_pattern_freq) {
      out += "sign_pattern," + sign_key(d) + "," + std::to_string(cnt) + "," + io::format_double(cnt / n) + "\n";
    }
    for (const auto& [m, cnt] : s.support_freq) {
      std::string key = "{";
      for (std::size_t i = 0; i < m.size(); ++i) key += (i ? " " : "") + std::to_string(m[i] + 1);
      key += "}";
      out += "support," + key + "," + std::to_string(cnt) + "," + io::format_double(cnt / n) + "\n";
    }
    out += "nonunique,," + std::to_string(s.nonunique_count) + "," + io::format_double(s.nonunique_count / n) + "\n";
    out += "failures,," + std::to_string(s.failures) + "," + io::format_double(s.failures / static_cast<double>(s.n_rep)) + "\n";
    for (const auto& ax : s.ecdf_grid) {
      for (std::size_t i = 0; i < ax.z.size(); ++i) {
        out += "ecdf_b" + std::to_string(ax.index + 1) + "," + io::format_double(ax.z[i]) + ",," +
               io::format_double(ax.f[i]) + "\n";
      }
    }
    return out;
  }
  if (f.report != "json") throw InputError("--report must be json or csv");
  json patterns = json::array();
  for (const auto& [d, cnt] : s.sign_pattern_freq) {
    patterns.push_back(json{{"signs", io::to_json(d)}, {"count", cnt}, {"frequency", cnt / n}});
  }
  json supports = json::array();
  for (const auto& [m, cnt] : s.support_freq) {
    supports.push_back(json{{"model", io::to_json(m)}, {"count", cnt}, {"frequency", cnt / n}});
  }
  json ecdf = json::array();
  for (const auto& ax : s.ecdf_grid) {
    ecdf.push_back(json{{"index", ax.index + 1}, {"z", ax.z}, {"F", ax.f}});
  }
  return io::to_json_text(json{{"n_rep", s.n_rep},
                               {"seed", s.seed},
                               {"failures", s.failures},
                               {"sign_patterns", patterns},
                               {"supports", supports},
                               {"nonunique_count", s.nonunique_count},
                               {"nonunique", probability_json(RegionProbability::from_counts(s.nonunique_count, s.successes(), s.seed))},
                               {"mean", io::to_json(s.mean)},
                               {"covariance", io::to_json(s.covariance)},
                               {"ecdf", ecdf}});
}

inline json run_shrinkage_map(const Flags& f) {
  const Context c = load(f);
  const VectorXd z = vector_flag(f.z, "z", c.problem.p());
  const LassoSolution sol = map_ls_to_lasso(c.problem, c.lambda(), z);
  json out{{"z_ls", io::to_json(z)}, {"b", io::to_json(sol.b)}, {"active_model", io::to_json(sol.active_model)}};
  const bool all_active = static_cast<int>(sol.active_model.size()) == c.problem.p();
  out["singleton"] = all_active;
  if (all_active) out["ls_point"] = io::to_json(singleton_ls_point(c.problem, c.lambda(), sol.b));
  return out;
}

inline void register_flags(CLI::App& app, Flags& f, const std::string& cmd) {
  app.add_option("--input", f.input, "JSON envelope or CSV design matrix")->required();
  app.add_option("--lambda", f.lambda, "tuning vector, comma separated (one value = uniform)");
  app.add_option("--workers", f.workers, "worker threads for sampling (0 = all cores)");
  const bool prob = cmd == "prob-zero" || cmd == "orthant-prob" || cmd == "cdf" || cmd == "density-grid";
  if (cmd == "solve") app.add_option("--y", f.y, "response vector, comma separated");
  if (cmd == "selectable") app.add_option("--model", f.model, "1-based indices, comma separated")->required();
  if (prob) {
    app.add_option("--method", f.method, "quad or mc");
    app.add_option("--samples", f.samples, "Monte-Carlo sample count");
    app.add_option("--tol", f.tol, "quadrature tolerance");
  }
  if (prob || cmd == "simulate") app.add_option("--seed", f.seed, "random seed");
  if (cmd == "orthant-prob" || cmd == "cdf" || cmd == "shrinkage-map") app.add_option("--z", f.z, "point, comma separated");
  if (cmd == "orthant-prob") {
    app.add_option("--event", f.event, "estimator (signs of z) or error (signs of z + beta)");
    app.add_option("--signs", f.signs, "sign vector; must match the event's signs");
  }
  if (cmd == "density-grid") {
    app.add_option("--signs", f.signs, "sign pattern d")->required();
    app.add_option("--grid", f.grid, "lo:hi:steps, used on every non-zero coordinate");
    app.add_flag("--conditional", f.conditional, "divide by P(sgn(b) = d)");
  }
  if (cmd == "simulate") {
    app.add_option("--reps", f.reps, "replicates");
    app.add_option("--report", f.report, "json or csv");
  }
}

}  // namespace detail

/// Runs one subcommand. Returns the process exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    err << usage();
    return kExitUsage;
  }
  const std::string cmd = argv[1];
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    out << usage();
    return kExitOk;
  }
  bool known = false;
  for (const auto& [name, help] : subcommands()) known = known || name == cmd;
  if (!known) {
    err << "unknown subcommand '" << cmd << "'\n\n" << usage();
    return kExitUsage;
  }
  CLI::App app("lassodist " + cmd, "lassodist " + cmd);
  Flags f;
  detail::register_flags(app, f, cmd);
  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 2; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  try {
    if (cmd == "density-grid") out << detail::run_density_grid(f);
    else if (cmd == "simulate") out << detail::run_simulate(f);
    else {
      json r;
      if (cmd == "solve") r = detail::run_solve(f);
      else if (cmd == "structural-set") r = detail::run_structural_set(f);
      else if (cmd == "selectable") r = detail::run_selectable(f);
      else if (cmd == "check-unique") r = detail::run_check_unique(f);
      else if (cmd == "general-position") r = detail::run_general_position(f);
      else if (cmd == "prob-zero") r = detail::run_prob_zero(f);
      else if (cmd == "orthant-prob") r = detail::run_orthant_prob(f);
      else if (cmd == "cdf") r = detail::run_cdf(f);
      else r = detail::run_shrinkage_map(f);
      out << io::to_json_text(r);
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const LimitError& e) {
    err << "limit exceeded: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace lassodist::cli
