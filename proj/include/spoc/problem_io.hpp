#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "problem.hpp"

namespace spoc {

namespace detail {

using nlohmann::json;

inline std::string line_context(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') { ++line; col = 1; } else { ++col; }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void parse_fail(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ParseError, field + ": " + what);
}

inline const json& member(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) parse_fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) parse_fail(path, "expected a number");
  return v.get<double>();
}

inline int count(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    parse_fail(path, "expected an integer");
  const double d = v.get<double>();
  if (d < 0 || d > 1e6) parse_fail(path, "out of range");
  return static_cast<int>(d);
}

inline const json& array_of(const json& v, size_t n, const std::string& path) {
  if (!v.is_array()) parse_fail(path, "expected an array");
  if (v.size() != n)
    throw Error(ErrorCode::DimensionMismatch,
                path + ": expected " + std::to_string(n) + " entries, found " + std::to_string(v.size()));
  return v;
}

inline CoeffMatrix parse_coeff(const json& v, const std::string& path) {
  const int rows = count(member(v, "rows", path), path + ".rows");
  const int cols = count(member(v, "cols", path), path + ".cols");
  const int Dt = count(member(v, "Dt", path), path + ".Dt");
  const int De = count(member(v, "De", path), path + ".De");
  CoeffMatrix c(rows, cols, Dt, De);
  const json& data = array_of(member(v, "data", path), static_cast<size_t>(Dt + 1), path + ".data");
  for (int p = 0; p <= Dt; ++p) {
    const std::string pp = path + ".data[" + std::to_string(p) + "]";
    const json& dp = array_of(data[p], static_cast<size_t>(De + 1), pp);
    for (int q = 0; q <= De; ++q) {
      const std::string pq = pp + "[" + std::to_string(q) + "]";
      const json& dq = array_of(dp[q], static_cast<size_t>(rows), pq);
      for (int r = 0; r < rows; ++r) {
        const std::string pr = pq + "[" + std::to_string(r) + "]";
        const json& dr = array_of(dq[r], static_cast<size_t>(cols), pr);
        for (int s = 0; s < cols; ++s) c.coeff(p, q)(r, s) = number(dr[s], pr + "[" + std::to_string(s) + "]");
      }
    }
  }
  return c;
}

/// R may be written as its k x 1 diagonal or as a diagonal k x k matrix.
inline CoeffMatrix diagonal_only(const CoeffMatrix& c, const std::string& path) {
  if (c.cols() == 1) return c;
  if (c.rows() != c.cols())
    throw Error(ErrorCode::DimensionMismatch, path + ": R must be k x 1 or k x k");
  CoeffMatrix out(c.rows(), 1, c.Dt(), c.De());
  for (int p = 0; p <= c.Dt(); ++p)
    for (int q = 0; q <= c.De(); ++q) {
      Eigen::MatrixXd m = c.coeff(p, q);
      out.coeff(p, q) = m.diagonal();
      m.diagonal().setZero();
      if ((m.array() != 0.0).any()) parse_fail(path, "R must be diagonal");
    }
  return out;
}

inline std::string num(double x) { return json(x).dump(); }

inline std::string emit_coeff(const CoeffMatrix& c) {
  std::ostringstream os;
  os << "{\"rows\": " << c.rows() << ", \"cols\": " << c.cols() << ", \"Dt\": " << c.Dt() << ", \"De\": " << c.De()
     << ", \"data\": [";
  for (int p = 0; p <= c.Dt(); ++p) {
    os << (p ? ", [" : "[");
    for (int q = 0; q <= c.De(); ++q) {
      os << (q ? ", [" : "[");
      const Eigen::MatrixXd& m = c.coeff(p, q);
      for (int r = 0; r < c.rows(); ++r) {
        os << (r ? ", [" : "[");
        for (int s = 0; s < c.cols(); ++s) os << (s ? ", " : "") << num(m(r, s));
        os << "]";
      }
      os << "]";
    }
    os << "]";
  }
  os << "]}";
  return os.str();
}

}  // namespace detail

/// Parses a problem file. Throws ParseError (with line or field context) or DimensionMismatch.
inline SpocProblem load_problem(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, detail::line_context(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) detail::parse_fail("<root>", "expected an object");

  SpocProblem p;
  p.m = detail::count(detail::member(j, "m", ""), "m");
  p.n = detail::count(detail::member(j, "n", ""), "n");
  p.k = detail::count(detail::member(j, "k", ""), "k");
  p.T = detail::number(detail::member(j, "T", ""), "T");
  p.eps_star = detail::number(detail::member(j, "eps_star", ""), "eps_star");
  const json& z0 = detail::array_of(detail::member(j, "z0", ""), static_cast<size_t>(p.m + p.n), "z0");
  p.z0.resize(p.m + p.n);
  for (int i = 0; i < p.m + p.n; ++i) p.z0(i) = detail::number(z0[i], "z0[" + std::to_string(i) + "]");

  const json& mats = detail::member(j, "matrices", "");
  auto coeff = [&](const char* key) {
    return detail::parse_coeff(detail::member(mats, key, "matrices"), std::string("matrices.") + key);
  };
  p.A11 = coeff("A11");
  p.A12 = coeff("A12");
  p.A21 = coeff("A21");
  p.A22 = coeff("A22");
  p.b1 = coeff("b1");
  p.b2 = coeff("b2");
  p.Q11 = coeff("Q11");
  p.Q12 = coeff("Q12");
  p.Q21 = coeff("Q21");
  p.Q22 = coeff("Q22");
  p.R = detail::diagonal_only(coeff("R"), "matrices.R");
  p.pi11 = coeff("pi11");
  p.pi22 = coeff("pi22");
  p.alpha = detail::parse_coeff(detail::member(j, "alpha", ""), "alpha");
  p.beta = detail::parse_coeff(detail::member(j, "beta", ""), "beta");
  p.check_dimensions();

  // an empty box is a malformed file rather than a failed assumption
  const int samples = 17;
  for (int i = 0; i < samples; ++i) {
    const double t = p.T * i / (samples - 1);
    const Eigen::VectorXd gap = p.upper(t) - p.lower(t);
    for (int c = 0; c < p.k; ++c)
      if (!(gap(c) >= 0.0))
        detail::parse_fail("alpha/beta", "empty control box in component " + std::to_string(c) + " at t=" +
                                             std::to_string(t));
  }
  return p;
}

/// Deterministic, schema-conformant text; numbers use shortest round-trip decimal form.
inline std::string save_problem(const SpocProblem& p) {
  using detail::emit_coeff;
  using detail::num;
  std::ostringstream os;
  os << "{\n";
  os << "  \"m\": " << p.m << ",\n  \"n\": " << p.n << ",\n  \"k\": " << p.k << ",\n";
  os << "  \"T\": " << num(p.T) << ",\n  \"eps_star\": " << num(p.eps_star) << ",\n";
  os << "  \"z0\": [";
  for (int i = 0; i < p.z0.size(); ++i) os << (i ? ", " : "") << num(p.z0(i));
  os << "],\n  \"matrices\": {\n";
  const std::pair<const char*, const CoeffMatrix*> mats[] = {
      {"A11", &p.A11}, {"A12", &p.A12}, {"A21", &p.A21}, {"A22", &p.A22}, {"b1", &p.b1},
      {"b2", &p.b2},   {"Q11", &p.Q11}, {"Q12", &p.Q12}, {"Q21", &p.Q21}, {"Q22", &p.Q22},
      {"R", &p.R},     {"pi11", &p.pi11}, {"pi22", &p.pi22}};
  bool first = true;
  for (const auto& [key, c] : mats) {
    os << (first ? "" : ",\n") << "    \"" << key << "\": " << emit_coeff(*c);
    first = false;
  }
  os << "\n  },\n";
  os << "  \"alpha\": " << emit_coeff(p.alpha) << ",\n";
  os << "  \"beta\": " << emit_coeff(p.beta) << "\n}\n";
  return os.str();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SpocProblem load_problem_file(const std::string& path) { return load_problem(read_text_file(path)); }

}  // namespace spoc
