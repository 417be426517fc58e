#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lassodist/errors.hpp"
#include "lassodist/model.hpp"

namespace lassodist::io {

using json = nlohmann::json;

/// Problem description read from a JSON envelope or a CSV design matrix.
/// The envelope may give "gram" instead of "X"; the design is then the upper
/// Cholesky factor, which has the same Gram matrix.
struct ProblemEnvelope {
  MatrixXd x;
  bool from_gram = false;
  std::optional<VectorXd> lambda;
  std::optional<VectorXd> beta;
  std::optional<double> sigma;
  std::optional<VectorXd> y;

  DesignProblem problem() const { return build_problem(x); }
};

namespace detail {

inline double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw InputError(what + " must contain numbers");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InputError(what + " has non-finite entries");
  return d;
}

inline VectorXd vector_from(const json& v, const std::string& what) {
  if (v.is_number()) return VectorXd::Constant(1, number(v, what));
  if (!v.is_array()) throw InputError(what + " must be an array of numbers");
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], what);
  return out;
}

inline MatrixXd matrix_from(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw InputError(what + " must be a non-empty array of rows");
  const bool nested = v[0].is_array();
  if (!nested) {
    // A flat array is read as a single row.
    const VectorXd row = vector_from(v, what);
    return row.transpose();
  }
  const std::size_t cols = v[0].size();
  if (cols == 0) throw InputError(what + " rows must be non-empty");
  MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) throw InputError(what + " rows must all have the same length");
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], what);
    }
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& tok, const std::string& what) {
  if (tok.empty()) throw InputError(what + ": empty field");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw InputError(what + ": cannot parse '" + tok + "' as a number");
  }
  if (used != tok.size()) throw InputError(what + ": cannot parse '" + tok + "' as a number");
  if (!std::isfinite(v)) throw InputError(what + ": non-finite value '" + tok + "'");
  return v;
}

}  // namespace detail

inline ProblemEnvelope parse_envelope(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("JSON parse error: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("envelope must be a JSON object");
  ProblemEnvelope env;
  if (doc.contains("X") == doc.contains("gram")) throw InputError("envelope needs exactly one of \"X\" or \"gram\"");
  if (doc.contains("X")) {
    env.x = detail::matrix_from(doc["X"], "X");
  } else {
    const MatrixXd g = detail::matrix_from(doc["gram"], "gram");
    env.x = design_from_gram(g).x();
    env.from_gram = true;
  }
  const auto p = env.x.cols();
  const auto n = env.x.rows();
  if (doc.contains("lambda")) {
    env.lambda = detail::vector_from(doc["lambda"], "lambda");
    if (env.lambda->size() == 1 && p > 1) env.lambda = VectorXd::Constant(p, (*env.lambda)(0));
    if (env.lambda->size() != p) throw InputError("lambda must have length p");
    if (env.lambda->minCoeff() < 0.0) throw InputError("lambda must be non-negative");
  }
  if (doc.contains("beta")) {
    env.beta = detail::vector_from(doc["beta"], "beta");
    if (env.beta->size() != p) throw InputError("beta must have length p");
  }
  if (doc.contains("sigma")) {
    env.sigma = detail::number(doc["sigma"], "sigma");
    if (!(*env.sigma > 0.0)) throw InputError("sigma must be positive");
  }
  if (doc.contains("y")) {
    if (env.from_gram) throw InputError("y cannot be combined with a gram envelope");
    env.y = detail::vector_from(doc["y"], "y");
    if (env.y->size() != n) throw InputError("y must have length n");
  }
  return env;
}

/// Design matrix from CSV text, one observation per line.
inline MatrixXd parse_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const auto& tok : detail::split(line, ',')) {
      row.push_back(detail::parse_double(tok, "line " + std::to_string(lineno)));
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw InputError("line " + std::to_string(lineno) + ": inconsistent number of columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("CSV matrix is empty");
  MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return x;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ProblemEnvelope load_envelope(const std::string& path) {
  const std::string text = read_file(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    ProblemEnvelope env;
    env.x = parse_matrix_csv(text);
    return env;
  }
  return parse_envelope(text);
}

/// "1.5,-2,3" -> vector
inline VectorXd parse_vector(const std::string& text, const std::string& what = "vector") {
  const auto toks = detail::split(text, ',');
  if (toks.empty()) throw InputError(what + " is empty");
  VectorXd v(static_cast<Eigen::Index>(toks.size()));
  for (std::size_t i = 0; i < toks.size(); ++i) v(static_cast<Eigen::Index>(i)) = detail::parse_double(toks[i], what);
  return v;
}

/// 1-based "1,3" -> sorted 0-based index set.
inline IndexSet parse_index_list(const std::string& text, int p) {
  IndexSet out;
  if (detail::trim(text).empty()) return out;
  for (const auto& tok : detail::split(text, ',')) {
    const double v = detail::parse_double(tok, "index list");
    if (v != std::floor(v) || v < 1 || v > p) throw InputError("index '" + tok + "' is not in 1.." + std::to_string(p));
    out.push_back(static_cast<int>(v) - 1);
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw InputError("index list has duplicates");
  return out;
}

/// "-1,0,1" -> SignVector
inline SignVector parse_signs(const std::string& text, int p) {
  const VectorXd v = parse_vector(text, "sign vector");
  if (v.size() != p) throw InputError("sign vector must have length p");
  std::vector<int> d;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) != -1.0 && v(j) != 0.0 && v(j) != 1.0) throw InputError("sign entries must be -1, 0 or 1");
    d.push_back(static_cast<int>(v(j)));
  }
  return SignVector(d);
}

/// "lo:hi:steps" -> steps equally spaced points from lo to hi.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto toks = detail::split(text, ':');
  if (toks.size() != 3) throw InputError("grid must be lo:hi:steps");
  const double lo = detail::parse_double(toks[0], "grid");
  const double hi = detail::parse_double(toks[1], "grid");
  const double steps = detail::parse_double(toks[2], "grid");
  if (steps != std::floor(steps) || steps < 1 || steps > 100000) throw InputError("grid steps must be an integer in 1..100000");
  if (!(hi >= lo)) throw InputError("grid needs lo <= hi");
  std::vector<double> out;
  const int k = static_cast<int>(steps);
  for (int i = 0; i < k; ++i) out.push_back(k == 1 ? lo : lo + (hi - lo) * i / (k - 1));
  return out;
}

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void emit(const json& v, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (v.type()) {
    case json::value_t::number_float:
      out += format_double(v.get<double>());
      break;
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        emit(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close + "}";
      break;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        break;
      }
      bool scalars = true;
      for (const auto& e : v) scalars = scalars && !e.is_structured();
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          emit(v[i], out, indent, depth + 1);
        }
        out += "]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(v[i], out, indent, depth + 1);
      }
      out += "\n" + close + "]";
      break;
    }
    default:
      out += v.dump();
  }
}

}  // namespace detail

/// JSON text with every floating-point number written to 17 significant
/// digits and non-finite values as null.
inline std::string to_json_text(const json& v, int indent = 2) {
  std::string out;
  detail::emit(v, out, indent, 0);
  out += "\n";
  return out;
}

inline json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(VectorXd(m.row(i).transpose())));
  return a;
}

/// 0-based indices to a 1-based JSON list.
inline json to_json(const IndexSet& s) {
  json a = json::array();
  for (int j : s) a.push_back(j + 1);
  return a;
}

inline json to_json(const SignVector& d) {
  json a = json::array();
  for (int v : d.values()) a.push_back(v);
  return a;
}

}  // namespace lassodist::io
