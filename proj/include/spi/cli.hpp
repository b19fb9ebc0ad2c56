// Experiment runner: structured JSON configs in, CSV tables and static SVG
// plots out.  All file writes happen from the coordinating thread after the
// runs complete, so outputs are deterministic; CSV floats use the shortest
// round-trip decimal form so golden files are platform-stable.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spi/core.hpp"
#include "spi/metrics.hpp"
#include "spi/nn.hpp"
#include "spi/objectives.hpp"
#include "spi/optimizers.hpp"
#include "spi/theory.hpp"
#include "spi/types.hpp"

namespace spi {

// Environment variable that re-roots every output directory when set.
inline constexpr const char* kOutputRootEnv = "SPI_BENCH_OUT";

inline std::filesystem::path resolve_output_dir(const std::string& configured) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0') return configured;
  std::filesystem::path rel = configured;
  if (rel.is_absolute()) rel = rel.relative_path();
  return std::filesystem::path(root) / rel;
}

// Shortest decimal representation that round-trips the exact double.
inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_opt_step(const std::optional<long>& v) {
  return v ? std::to_string(*v) : std::string();
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const std::array<const char*, 10>& palette() {
  static const std::array<const char*, 10> p = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return p;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing output file " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SVG plots
// ---------------------------------------------------------------------------

// Loss curves on a log10 ordinate, one polyline per labelled series.
// Non-positive values are clamped to a tenth of the smallest positive value
// so they stay drawable.
inline std::string render_loss_curves_svg(
    const std::string& title,
    const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  const double W = 880, H = 560;
  const double l = 70, r = 190, t = 46, b = 56;
  const double pw = W - l - r, ph = H - t - b;

  std::size_t max_len = 1;
  double min_pos = std::numeric_limits<double>::infinity();
  for (const auto& [label, ys] : series) {
    max_len = std::max(max_len, ys.size());
    for (double y : ys)
      if (y > 0.0 && std::isfinite(y)) min_pos = std::min(min_pos, y);
  }
  if (!std::isfinite(min_pos)) min_pos = 1e-12;
  const double clamp = min_pos / 10.0;
  double lo = std::log10(clamp), hi = lo + 1.0;
  for (const auto& [label, ys] : series)
    for (double y : ys)
      if (std::isfinite(y)) hi = std::max(hi, std::log10(std::max(y, clamp)));
  if (hi - lo < 1.0) hi = lo + 1.0;

  const auto X = [&](double step) {
    return l + pw * (max_len > 1 ? step / double(max_len - 1) : 0.5);
  };
  const auto Y = [&](double v) {
    const double lv = std::log10(std::max(std::isfinite(v) ? v : clamp, clamp));
    return t + ph * (1.0 - (lv - lo) / (hi - lo));
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << detail::px(l) << "\" y=\"28\" font-family=\"sans-serif\" "
       "font-size=\"17\" font-weight=\"bold\">"
    << detail::xml_escape(title) << "</text>\n";
  // axes
  s << "<line x1=\"" << detail::px(l) << "\" y1=\"" << detail::px(t + ph)
    << "\" x2=\"" << detail::px(l + pw) << "\" y2=\"" << detail::px(t + ph)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << detail::px(l) << "\" y1=\"" << detail::px(t) << "\" x2=\""
    << detail::px(l) << "\" y2=\"" << detail::px(t + ph)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double step = double(max_len - 1) * i / 5.0;
    s << "<line x1=\"" << detail::px(X(step)) << "\" y1=\"" << detail::px(t + ph)
      << "\" x2=\"" << detail::px(X(step)) << "\" y2=\"" << detail::px(t + ph + 5)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << detail::px(X(step)) << "\" y=\"" << detail::px(t + ph + 20)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
      << static_cast<long>(step + 0.5) << "</text>\n";
  }
  const int lo_tick = static_cast<int>(std::ceil(lo));
  const int hi_tick = static_cast<int>(std::floor(hi));
  const int tick_step = std::max(1, (hi_tick - lo_tick) / 8 + 1);
  for (int e = lo_tick; e <= hi_tick; e += tick_step) {
    const double y = Y(std::pow(10.0, e));
    s << "<line x1=\"" << detail::px(l - 5) << "\" y1=\"" << detail::px(y)
      << "\" x2=\"" << detail::px(l) << "\" y2=\"" << detail::px(y)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << detail::px(l - 9) << "\" y=\"" << detail::px(y + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e"
      << e << "</text>\n";
  }
  s << "<text x=\"" << detail::px(l + pw / 2) << "\" y=\"" << detail::px(H - 14)
    << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">step</text>\n";
  s << "<text x=\"20\" y=\"" << detail::px(t + ph / 2)
    << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 20 "
    << detail::px(t + ph / 2) << ")\">loss (log scale)</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& [label, ys] = series[k];
    const char* color = detail::palette()[k % detail::palette().size()];
    if (!ys.empty()) {
      s << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\" points=\"";
      for (std::size_t i = 0; i < ys.size(); ++i)
        s << detail::px(X(double(i))) << "," << detail::px(Y(ys[i])) << " ";
      s << "\"/>\n";
    }
    const double ly = t + 16 + 20.0 * double(k);
    s << "<line x1=\"" << detail::px(l + pw + 14) << "\" y1=\"" << detail::px(ly)
      << "\" x2=\"" << detail::px(l + pw + 40) << "\" y2=\"" << detail::px(ly)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << detail::px(l + pw + 46) << "\" y=\"" << detail::px(ly + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << detail::xml_escape(label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// 2D trajectory over a 30-level contour fill of the objective.  Levels are
// value quantiles of a dense sample grid, so wildly non-uniform surfaces
// (Rosenbrock, Goldstein-Price) still show structure near the valley.
inline std::string render_path_svg(const std::string& title,
                                   const Objective& objective,
                                   const Trajectory& traj,
                                   const char* path_color = "#d62728") {
  const std::array<double, 4> dom =
      objective.plot_domain.value_or(std::array<double, 4>{-5, 5, -5, 5});
  const double W = 760, H = 640;
  const double l = 64, r = 28, t = 46, b = 56;
  const double pw = W - l - r, ph = H - t - b;
  const int nx = 120, ny = 120;
  const int n_levels = 30;

  std::vector<double> vals(std::size_t(nx) * ny);
  ParamVector probe(2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      probe[0] = dom[0] + (dom[1] - dom[0]) * (i + 0.5) / nx;
      probe[1] = dom[2] + (dom[3] - dom[2]) * (j + 0.5) / ny;
      vals[std::size_t(j) * nx + i] = objective.eval(probe).loss;
    }
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> levels(n_levels - 1);
  for (int k = 1; k < n_levels; ++k)
    levels[k - 1] = sorted[std::size_t(double(k) / n_levels * (sorted.size() - 1))];
  const auto band_of = [&](double v) {
    return static_cast<int>(std::upper_bound(levels.begin(), levels.end(), v) -
                            levels.begin());
  };
  const auto band_color = [&](int band) {
    const double f = double(band) / (n_levels - 1);  // 0 = deep valley
    const int rr = static_cast<int>(18 + f * (235 - 18));
    const int gg = static_cast<int>(58 + f * (242 - 58));
    const int bb = static_cast<int>(110 + f * (250 - 110));
    char buf[10];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rr, gg, bb);
    return std::string(buf);
  };

  const auto X = [&](double x) { return l + pw * (x - dom[0]) / (dom[1] - dom[0]); };
  const auto Y = [&](double y) { return t + ph * (1.0 - (y - dom[2]) / (dom[3] - dom[2])); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << detail::px(l) << "\" y=\"28\" font-family=\"sans-serif\" "
       "font-size=\"17\" font-weight=\"bold\">"
    << detail::xml_escape(title) << "</text>\n";
  s << "<clipPath id=\"plot\"><rect x=\"" << detail::px(l) << "\" y=\""
    << detail::px(t) << "\" width=\"" << detail::px(pw) << "\" height=\""
    << detail::px(ph) << "\"/></clipPath>\n";

  // Contour bands, run-length merged per row.
  const double cw = pw / nx, ch = ph / ny;
  s << "<g clip-path=\"url(#plot)\" stroke=\"none\">\n";
  for (int j = 0; j < ny; ++j) {
    int i = 0;
    while (i < nx) {
      const int band = band_of(vals[std::size_t(j) * nx + i]);
      int end = i + 1;
      while (end < nx && band_of(vals[std::size_t(j) * nx + end]) == band) ++end;
      const double x0 = l + cw * i;
      const double y0 = t + ph - ch * (j + 1);
      s << "<rect x=\"" << detail::px(x0) << "\" y=\"" << detail::px(y0)
        << "\" width=\"" << detail::px(cw * (end - i) + 0.35) << "\" height=\""
        << detail::px(ch + 0.35) << "\" fill=\"" << band_color(band) << "\"/>\n";
      i = end;
    }
  }
  s << "</g>\n";

  // Trajectory.
  s << "<g clip-path=\"url(#plot)\">\n<polyline fill=\"none\" stroke=\""
    << path_color << "\" stroke-width=\"1.8\" points=\"";
  for (const TrajectoryPoint& p : traj.points)
    s << detail::px(X(p.theta[0])) << "," << detail::px(Y(p.theta[1])) << " ";
  s << "\"/>\n";
  if (!traj.points.empty()) {
    const auto& start = traj.points.front().theta;
    s << "<circle cx=\"" << detail::px(X(start[0])) << "\" cy=\""
      << detail::px(Y(start[1]))
      << "\" r=\"5\" fill=\"white\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  if (objective.optimum) {
    const double ox = X((*objective.optimum)[0]), oy = Y((*objective.optimum)[1]);
    s << "<line x1=\"" << detail::px(ox - 6) << "\" y1=\"" << detail::px(oy)
      << "\" x2=\"" << detail::px(ox + 6) << "\" y2=\"" << detail::px(oy)
      << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<line x1=\"" << detail::px(ox) << "\" y1=\"" << detail::px(oy - 6)
      << "\" x2=\"" << detail::px(ox) << "\" y2=\"" << detail::px(oy + 6)
      << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  s << "</g>\n";

  // Axes.
  s << "<rect x=\"" << detail::px(l) << "\" y=\"" << detail::px(t)
    << "\" width=\"" << detail::px(pw) << "\" height=\"" << detail::px(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = dom[0] + (dom[1] - dom[0]) * i / 4.0;
    const double y = dom[2] + (dom[3] - dom[2]) * i / 4.0;
    s << "<text x=\"" << detail::px(X(x)) << "\" y=\"" << detail::px(t + ph + 18)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
      << detail::px(x) << "</text>\n";
    s << "<text x=\"" << detail::px(l - 8) << "\" y=\"" << detail::px(Y(y) + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
      << detail::px(y) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Race experiments
// ---------------------------------------------------------------------------

struct MetricSettings {
  double settle_tol = 1e-2;
  double hit_tol = 1e-5;
};

struct OptimizerFragment {
  std::string label;
  OptimizerKind kind = OptimizerKind::SGD;
  std::map<std::string, double> hyper;
};

struct ExperimentConfig {
  std::string name;
  Objective objective;
  ParamVector start;
  long max_steps = 100;
  double divergence_threshold = 1e12;
  MetricSettings metrics;
  std::string csv_dir;
  std::string plot_dir;
  std::vector<OptimizerFragment> optimizers;
};

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity")
      return std::numeric_limits<double>::infinity();
  }
  throw ConfigError(where + ": expected a number (or \"inf\")");
}

inline ParamVector json_vector(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.empty())
    throw ConfigError(where + ": expected a non-empty array of numbers");
  ParamVector out;
  for (const auto& x : v) out.push_back(json_number(x, where));
  return out;
}

inline void require_version(const nlohmann::json& j) {
  if (!j.contains("config_version") || !j["config_version"].is_number_integer() ||
      j["config_version"].get<int>() != 1)
    throw ConfigError("config_version must be present and equal to 1");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  detail::require_version(j);
  ExperimentConfig cfg;
  cfg.name = j.value("name", std::string("experiment"));

  if (!j.contains("objective")) throw ConfigError("missing 'objective'");
  const auto& obj = j["objective"];
  if (obj.is_string()) {
    cfg.objective = objective_by_name(obj.get<std::string>());
  } else if (obj.is_object() && obj.contains("quadratic")) {
    const auto& q = obj["quadratic"];
    QuadraticSpec spec{detail::json_vector(q.at("diag"), "objective.quadratic.diag"),
                       detail::json_vector(q.at("center"), "objective.quadratic.center")};
    cfg.objective = quadratic(spec);
  } else {
    throw ConfigError("'objective' must be a function name or {\"quadratic\": {...}}");
  }

  cfg.start = detail::json_vector(j.at("start"), "start");
  if (cfg.start.size() != cfg.objective.dimension)
    throw ConfigError("'start' dimension does not match the objective");
  cfg.max_steps = j.value("max_steps", 100);
  cfg.divergence_threshold = j.value("divergence_threshold", 1e12);
  if (j.contains("metrics")) {
    cfg.metrics.settle_tol = j["metrics"].value("settle_tol", 1e-2);
    cfg.metrics.hit_tol = j["metrics"].value("hit_tol", 1e-5);
  }
  if (!(cfg.metrics.settle_tol > 0.0) || !(cfg.metrics.hit_tol > 0.0))
    throw ConfigError("metric tolerances must be > 0");
  cfg.csv_dir = j.contains("outputs")
                    ? j["outputs"].value("csv_dir", "out/" + cfg.name + "/csv")
                    : "out/" + cfg.name + "/csv";
  cfg.plot_dir = j.contains("outputs")
                     ? j["outputs"].value("plot_dir", "out/" + cfg.name + "/plots")
                     : "out/" + cfg.name + "/plots";

  if (!j.contains("optimizers") || !j["optimizers"].is_array() ||
      j["optimizers"].empty())
    throw ConfigError("'optimizers' must be a non-empty array");
  for (const auto& o : j["optimizers"]) {
    OptimizerFragment frag;
    frag.kind = parse_kind(o.at("kind").get<std::string>());
    frag.label = o.value("label", std::string(kind_name(frag.kind)));
    if (o.contains("hyper"))
      for (const auto& [key, val] : o["hyper"].items())
        frag.hyper[key] = detail::json_number(val, "hyper." + key);
    for (const auto& other : cfg.optimizers)
      if (other.label == frag.label)
        throw ConfigError("duplicate optimizer label '" + frag.label + "'");
    cfg.optimizers.push_back(std::move(frag));
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream s;
  const std::size_t dim = traj.points.empty() ? 0 : traj.points[0].theta.size();
  s << "step";
  for (std::size_t i = 0; i < dim; ++i) s << ",theta_" << (i + 1);
  s << ",loss,residual_norm,state_delay";
  for (std::size_t i = 0; i < dim; ++i) s << ",gate_" << (i + 1);
  s << "\n";
  for (const TrajectoryPoint& p : traj.points) {
    s << p.step;
    for (double x : p.theta) s << "," << fmt_double(x);
    s << "," << fmt_double(p.loss) << "," << fmt_double(p.residual_norm) << ","
      << fmt_double(p.state_delay);
    for (std::uint8_t g : p.gate_mask) s << "," << int(g);
    s << "\n";
  }
  return s.str();
}

// Races every configured optimizer, then writes one trajectory CSV per
// optimizer, a summary CSV, a combined loss plot, and one 2D path plot per
// optimizer.  Divergence is a recorded result, not an error.
inline void run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path csv_dir = resolve_output_dir(cfg.csv_dir);
  const fs::path plot_dir = resolve_output_dir(cfg.plot_dir);
  fs::create_directories(csv_dir);
  fs::create_directories(plot_dir);

  std::vector<std::pair<std::string, Trajectory>> results;
  for (const OptimizerFragment& frag : cfg.optimizers) {
    RunConfig rc;
    rc.optimizer = frag.kind;
    rc.hyperparams = frag.hyper;
    rc.theta0 = cfg.start;
    rc.max_steps = cfg.max_steps;
    rc.divergence_threshold = cfg.divergence_threshold;
    results.emplace_back(frag.label, run(cfg.objective, rc));
  }

  std::ostringstream summary;
  summary << "optimizer,settling_time,max_overshoot_dim1,max_overshoot_dim2,"
             "first_hit_1e-5,diverged\n";
  for (const auto& [label, traj] : results) {
    detail::write_text_file(csv_dir / (label + ".csv"), trajectory_csv(traj));
    std::string settle, os1, os2, hit;
    if (cfg.objective.optimum) {
      const ParamVector& opt = *cfg.objective.optimum;
      settle = fmt_opt_step(settling_time(traj, opt, cfg.metrics.settle_tol));
      hit = fmt_opt_step(first_hit(traj, opt, cfg.metrics.hit_tol));
      const std::vector<double> os = overshoot(traj, opt);
      if (os.size() >= 1) os1 = fmt_double(os[0]);
      if (os.size() >= 2) os2 = fmt_double(os[1]);
    }
    summary << label << "," << settle << "," << os1 << "," << os2 << "," << hit
            << "," << (traj.diverged ? "true" : "false") << "\n";
  }
  detail::write_text_file(csv_dir / "summary.csv", summary.str());

  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (const auto& [label, traj] : results) {
    std::vector<double> ys;
    for (const TrajectoryPoint& p : traj.points) ys.push_back(p.loss);
    series.emplace_back(label, std::move(ys));
  }
  detail::write_text_file(plot_dir / "loss_curves.svg",
                          render_loss_curves_svg(cfg.name + ": loss", series));
  if (cfg.objective.dimension == 2) {
    std::size_t k = 0;
    for (const auto& [label, traj] : results) {
      const char* color = detail::palette()[k++ % detail::palette().size()];
      detail::write_text_file(
          plot_dir / ("path_" + label + ".svg"),
          render_path_svg(cfg.name + ": " + label, cfg.objective, traj, color));
    }
  }
}

// ---------------------------------------------------------------------------
// Theorem verification suite
// ---------------------------------------------------------------------------

struct TheoremInstanceOverride {
  double mu = 1, L = 1, r = 0.1, alpha = 0.01;
};

// Samples random strongly convex quadratics with (r, alpha) strictly inside
// their admissible regions, checks the exponential bound on each, and writes
// one CSV row per instance.  Returns the number of instances whose bound
// failed (callers map that to a nonzero exit status).
inline int run_theorem_suite(int samples, std::uint64_t seed,
                             const std::string& out_csv,
                             std::optional<TheoremInstanceOverride> fixed =
                                 std::nullopt) {
  if (samples < 1) throw ConfigError("theorem suite requires samples >= 1");
  const std::filesystem::path out = resolve_output_dir(out_csv);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());

  std::ostringstream csv;
  csv << "mu,L,r,alpha,z,bound_holds,worst_margin\n";
  int failures = 0;
  Rng rng(seed);
  const int n = fixed ? 1 : samples;
  for (int i = 0; i < n; ++i) {
    double mu, L, r, alpha;
    Objective obj;
    ParamVector theta0;
    if (fixed) {
      mu = fixed->mu;
      L = fixed->L;
      r = fixed->r;
      alpha = fixed->alpha;
      QuadraticSpec spec;
      spec.diag = {mu / 2.0, L / 2.0};
      spec.center = {0.0, 0.0};
      obj = quadratic(spec);
      theta0 = {1.0, 1.0};
    } else {
      const int dim = 1 + static_cast<int>(rng.uniform() * 4.0);
      QuadraticSpec spec;
      for (int d = 0; d < dim; ++d) {
        spec.diag.push_back(rng.uniform(0.5, 50.0));
        spec.center.push_back(rng.uniform(-2.0, 2.0));
      }
      obj = quadratic(spec);
      mu = *obj.strong_convexity_mu;
      L = *obj.smoothness_L;
      const AdmissibleRegion region = admissible_region(mu, L);
      r = rng.uniform(0.05, 0.95) * region.r_max;
      alpha = rng.uniform(0.05, 0.95) * region.alpha_max(r);
      for (int d = 0; d < dim; ++d)
        theta0.push_back(spec.center[d] + rng.uniform(-3.0, 3.0));
    }
    const TheoremParams tp = theorem_constants(mu, L, r, alpha);
    const BoundCheck bc = check_bound(obj, r, alpha, theta0, 100);
    if (!bc.holds) ++failures;
    csv << fmt_double(mu) << "," << fmt_double(L) << "," << fmt_double(r) << ","
        << fmt_double(alpha) << "," << fmt_double(tp.z) << ","
        << (bc.holds ? "true" : "false") << "," << fmt_double(bc.worst_margin)
        << "\n";
  }
  detail::write_text_file(out, csv.str());
  return failures;
}

// ---------------------------------------------------------------------------
// Neural-network robustness suite
// ---------------------------------------------------------------------------

struct NnDatasetConfig {
  bool synthetic = true;
  // synthetic
  int n_per_class = 64;
  int d = 2;
  double separation = 4.0;
  std::uint64_t seed = 7;
  // idx
  std::string images_path, labels_path;
  std::optional<long> limit;
};

struct NnConfig {
  std::string name;
  NnDatasetConfig dataset;
  int hidden = 8;  // 0 = logistic regression
  std::uint64_t init_seed = 1;
  int epochs = 40;
  int batch_size = 32;
  std::uint64_t shuffle_seed = 1;
  double alpha = 0.9;
  double ci_beta = std::numeric_limits<double>::infinity();
  double kd = 0.0;
  double divergence_threshold = 1e12;
  std::vector<double> r_grid;
  std::vector<OptimizerKind> optimizers;
  std::string csv_dir;
};

inline NnConfig parse_nn_config(const nlohmann::json& j) {
  detail::require_version(j);
  NnConfig cfg;
  cfg.name = j.value("name", std::string("nn"));
  if (!j.contains("dataset")) throw ConfigError("missing 'dataset'");
  const auto& ds = j["dataset"];
  if (ds.contains("synthetic")) {
    const auto& s = ds["synthetic"];
    cfg.dataset.synthetic = true;
    cfg.dataset.n_per_class = s.value("n_per_class", 64);
    cfg.dataset.d = s.value("d", 2);
    cfg.dataset.separation = s.value("separation", 4.0);
    cfg.dataset.seed = s.value("seed", 7);
  } else if (ds.contains("idx")) {
    const auto& s = ds["idx"];
    cfg.dataset.synthetic = false;
    cfg.dataset.images_path = s.at("images").get<std::string>();
    cfg.dataset.labels_path = s.at("labels").get<std::string>();
    if (s.contains("limit")) cfg.dataset.limit = s["limit"].get<long>();
  } else {
    throw ConfigError("'dataset' must contain 'synthetic' or 'idx'");
  }
  if (j.contains("model")) {
    cfg.hidden = j["model"].value("hidden", 8);
    cfg.init_seed = j["model"].value("init_seed", 1);
  }
  if (j.contains("train")) {
    cfg.epochs = j["train"].value("epochs", 40);
    cfg.batch_size = j["train"].value("batch_size", 32);
    cfg.shuffle_seed = j["train"].value("shuffle_seed", 1);
    cfg.alpha = j["train"].value("alpha", 0.9);
    if (j["train"].contains("beta"))
      cfg.ci_beta = detail::json_number(j["train"]["beta"], "train.beta");
    cfg.kd = j["train"].value("kd", 0.0);
    cfg.divergence_threshold = j["train"].value("divergence_threshold", 1e12);
  }
  if (!j.contains("r_grid") || !j["r_grid"].is_array() || j["r_grid"].empty())
    throw ConfigError("'r_grid' must be a non-empty array");
  for (const auto& v : j["r_grid"])
    cfg.r_grid.push_back(detail::json_number(v, "r_grid"));
  if (!j.contains("optimizers") || !j["optimizers"].is_array() ||
      j["optimizers"].empty())
    throw ConfigError("'optimizers' must be a non-empty array");
  for (const auto& v : j["optimizers"])
    cfg.optimizers.push_back(parse_kind(v.get<std::string>()));
  cfg.csv_dir = j.contains("outputs")
                    ? j["outputs"].value("csv_dir", "out/" + cfg.name + "/csv")
                    : "out/" + cfg.name + "/csv";
  return cfg;
}

inline NnConfig load_nn_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_nn_config(j);
}

inline std::map<std::string, double> nn_hyper(const NnConfig& cfg,
                                              OptimizerKind kind, double r) {
  std::map<std::string, double> h{{"r", r}};
  switch (kind) {
    case OptimizerKind::MOM:
    case OptimizerKind::NAG:
    case OptimizerKind::SPI:
      h["alpha"] = cfg.alpha;
      break;
    case OptimizerKind::CI:
      h["alpha"] = cfg.alpha;
      h["beta"] = cfg.ci_beta;
      break;
    case OptimizerKind::PID:
      h["alpha"] = cfg.alpha;
      h["kd"] = cfg.kd;
      break;
    default:
      break;  // sgd/adam/rmsprop/addsign need only r
  }
  return h;
}

// Trains every optimizer at every grid learning rate, writing per-run
// loss/accuracy curves and a robustness table marking diverged runs.
inline void run_nn_suite(const NnConfig& cfg) {
  namespace fs = std::filesystem;
  const Dataset ds =
      cfg.dataset.synthetic
          ? synth_gaussians(cfg.dataset.n_per_class, cfg.dataset.d,
                            cfg.dataset.separation, cfg.dataset.seed)
          : load_idx(cfg.dataset.images_path, cfg.dataset.labels_path,
                     cfg.dataset.limit);
  const fs::path csv_dir = resolve_output_dir(cfg.csv_dir);
  fs::create_directories(csv_dir);

  std::ostringstream table;
  table << "optimizer,r,final_loss,final_accuracy,diverged,diverged_epoch\n";
  std::string rng_info;
  for (const OptimizerKind kind : cfg.optimizers) {
    for (double r : cfg.r_grid) {
      const MlpModel model = make_mlp(static_cast<int>(ds.dim()), cfg.hidden,
                                      ds.num_classes, cfg.init_seed);
      RunConfig rc;
      rc.optimizer = kind;
      rc.hyperparams = nn_hyper(cfg, kind, r);
      rc.divergence_threshold = cfg.divergence_threshold;
      const TrainReport rep =
          train(model, ds, rc, cfg.epochs, cfg.batch_size, cfg.shuffle_seed);
      rng_info = rep.rng_info;

      std::ostringstream curve;
      curve << "epoch,loss,accuracy\n";
      for (std::size_t e = 0; e < rep.loss_curve.size(); ++e)
        curve << e << "," << fmt_double(rep.loss_curve[e]) << ","
              << fmt_double(rep.accuracy_curve[e]) << "\n";
      detail::write_text_file(csv_dir / (std::string("nn_") + kind_name(kind) +
                                         "_r" + fmt_double(r) + ".csv"),
                              curve.str());

      table << kind_name(kind) << "," << fmt_double(r) << ","
            << (rep.loss_curve.empty() ? std::string()
                                       : fmt_double(rep.loss_curve.back()))
            << ","
            << (rep.accuracy_curve.empty() ? std::string()
                                           : fmt_double(rep.accuracy_curve.back()))
            << "," << (rep.diverged ? "true" : "false") << ","
            << (rep.diverged_epoch ? std::to_string(*rep.diverged_epoch)
                                   : std::string())
            << "\n";
    }
  }
  detail::write_text_file(csv_dir / "robustness.csv", table.str());
  detail::write_text_file(csv_dir / "rng_info.txt", rng_info + "\n");
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

// Finite-difference audit of every closed-form gradient and the MLP backprop.
// Prints one row per target; returns true when everything is within
// tolerance.
inline bool run_gradcheck(std::ostream& out) {
  bool all_ok = true;
  Rng rng(12345);
  for (const std::string& name : objective_names()) {
    const Objective& obj = objective_by_name(name);
    const auto dom = *obj.plot_domain;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const ParamVector p{rng.uniform(dom[0], dom[1]), rng.uniform(dom[2], dom[3])};
      const ParamVector ga = obj.eval(p).gradient;
      const ParamVector gf = finite_diff_grad(obj, p, 1e-6);
      ParamVector diff(ga.size());
      for (std::size_t k = 0; k < ga.size(); ++k) diff[k] = ga[k] - gf[k];
      const double mag = norm2(ga);
      // Relative agreement for meaningful gradients, absolute for tiny ones.
      const double err = mag >= 1.0 ? norm2(diff) / mag : norm2(diff) * 1e2;
      worst = std::max(worst, err);
    }
    const bool ok = worst < 1e-6;
    all_ok = all_ok && ok;
    out << name << ": worst rel err " << fmt_double(worst) << " "
        << (ok ? "[OK]" : "[FAIL]") << "\n";
  }
  {
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
      const int d = 2 + static_cast<int>(rng.uniform() * 3.0);
      const int h = (c % 3 == 0) ? 0 : 2 + static_cast<int>(rng.uniform() * 6.0);
      const int cls = 2 + static_cast<int>(rng.uniform() * 2.0);
      MlpModel model = make_mlp(d, h, cls, 100 + c);
      for (double& w : model.params) w += 0.1 * rng.normal();
      Dataset ds;
      ds.num_classes = cls;
      ds.name = "random";
      std::vector<int> batch;
      for (int i = 0; i < 4; ++i) {
        ParamVector x(d);
        for (int k = 0; k < d; ++k) x[k] = rng.normal();
        ds.inputs.push_back(x);
        ds.labels.push_back(static_cast<int>(rng.uniform() * cls) % cls);
        batch.push_back(i);
      }
      const ForwardBackward fb = forward_backward(model, ds, batch);
      const double hstep = 1e-5;
      ParamVector gf(model.params.size());
      for (std::size_t k = 0; k < model.params.size(); ++k) {
        MlpModel probe = model;
        probe.params[k] = model.params[k] + hstep;
        const double fp = forward_backward(probe, ds, batch).loss;
        probe.params[k] = model.params[k] - hstep;
        const double fm = forward_backward(probe, ds, batch).loss;
        gf[k] = (fp - fm) / (2.0 * hstep);
      }
      ParamVector diff(gf.size());
      for (std::size_t k = 0; k < gf.size(); ++k) diff[k] = fb.grads[k] - gf[k];
      worst = std::max(worst, norm2(diff) / std::max(norm2(fb.grads), 1e-12));
    }
    const bool ok = worst < 1e-4;
    all_ok = all_ok && ok;
    out << "mlp backprop: worst rel err " << fmt_double(worst) << " "
        << (ok ? "[OK]" : "[FAIL]") << "\n";
  }
  return all_ok;
}

}  // namespace spi
