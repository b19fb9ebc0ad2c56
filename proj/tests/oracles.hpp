// Independent reference implementations used to cross-check the library.
// Everything here is written from the definitions directly (different
// algorithms or higher-order stencils where possible) so a transcription
// mistake in the library cannot silently agree with its own test.
#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Fourth-order central difference; one order better than the library helper.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-4) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec p = x;
    p[i] = x[i] + 2 * h;
    const double f2p = f(p);
    p[i] = x[i] + h;
    const double f1p = f(p);
    p[i] = x[i] - h;
    const double f1m = f(p);
    p[i] = x[i] - 2 * h;
    const double f2m = f(p);
    g[i] = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
  }
  return g;
}

// --- naive optimizer re-implementations (state carried by the caller) -----

inline int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

inline void naive_sgd(Vec& theta, Vec& v, const Vec& g, double r) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    v[i] = r * g[i];
    theta[i] -= v[i];
  }
}

inline void naive_mom(Vec& theta, Vec& v, const Vec& g, double r, double a) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    v[i] = a * v[i] + r * g[i];
    theta[i] -= v[i];
  }
}

inline void naive_spi(Vec& theta, Vec& v, const Vec& g, double r, double a) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool opposed = sign_of(g[i]) * sign_of(v[i]) == -1;
    v[i] = opposed ? r * g[i] : a * v[i] + r * g[i];
    theta[i] -= v[i];
  }
}

inline void naive_ci(Vec& theta, Vec& v, const Vec& g, double r, double a,
                     double beta) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    v[i] = std::fabs(g[i]) < beta ? a * v[i] + r * g[i] : r * g[i];
    theta[i] -= v[i];
  }
}

inline void naive_pid(Vec& theta, Vec& v, Vec& d, Vec& prev, bool& first,
                      const Vec& g, double r, double a, double kd) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double pg = first ? g[i] : prev[i];
    v[i] = a * v[i] + r * g[i];
    d[i] = a * d[i] + (1.0 - a) * (g[i] - pg);
    theta[i] -= v[i] + kd * d[i];
    prev[i] = g[i];
  }
  first = false;
}

inline void naive_adam(Vec& theta, Vec& m, Vec& s, long& t, const Vec& g,
                       double r, double b1, double b2, double eps) {
  ++t;
  for (std::size_t i = 0; i < g.size(); ++i) {
    m[i] = b1 * m[i] + (1 - b1) * g[i];
    s[i] = b2 * s[i] + (1 - b2) * g[i] * g[i];
    const double mh = m[i] / (1 - std::pow(b1, t));
    const double sh = s[i] / (1 - std::pow(b2, t));
    theta[i] -= r * mh / (std::sqrt(sh) + eps);
  }
}

inline void naive_rmsprop(Vec& theta, Vec& s, const Vec& g, double r, double rho,
                          double eps) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    s[i] = rho * s[i] + (1 - rho) * g[i] * g[i];
    theta[i] -= r * g[i] / (std::sqrt(s[i]) + eps);
  }
}

inline void naive_addsign(Vec& theta, Vec& m, const Vec& g, double r, double a) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    m[i] = a * m[i] + (1 - a) * g[i];
    theta[i] -= r * (1.0 + sign_of(g[i]) * sign_of(m[i])) * g[i];
  }
}

// --- tiny XML well-formedness checker (tags balanced, quotes closed) ------

inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (text[i] != '<') {
      if (text[i] == '>') return false;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    bool in_quote = false;
    while (j < n && (in_quote || text[j] != '>')) {
      if (text[j] == '"') in_quote = !in_quote;
      ++j;
    }
    if (j >= n) return false;
    std::string tag = text.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      if (stack.empty()) return false;
      std::string name = tag.substr(1);
      if (stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    std::size_t sp = tag.find_first_of(" \t\n/");
    std::string name = tag.substr(0, sp);
    if (name.empty()) return false;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty();
}

// --- file + CSV helpers ----------------------------------------------------

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    rows.push_back(row);
  }
  return rows;
}

inline bool bytes_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  return a.empty() ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace oracle
