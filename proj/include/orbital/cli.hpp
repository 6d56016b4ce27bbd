#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "closedform.hpp"
#include "errors.hpp"
#include "groups.hpp"
#include "heatflow.hpp"
#include "rng.hpp"
#include "rootsys.hpp"
#include "saddle.hpp"

#ifndef ORBITAL_FORGE_VERSION
#define ORBITAL_FORGE_VERSION "0.0.0"
#endif

namespace orbital::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitDegenerate = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUsage = 64;

inline constexpr const char* kSchema = "report_v1";

/// Resolved options for one run. Coordinate lists are kept as given and
/// parsed against the root system of the command.
struct RunConfig {
  std::string command;
  std::string group = "su";
  int size = 2;
  std::string family = "a";
  int rank = 1;
  std::string form_scale = "1";
  std::string h1, h2;
  double t = 1.0;
  std::int64_t samples = 1'000'000;
  std::uint64_t seed = 0;
  int threads = 0;
  double tolerance = -1.0;  // negative: command default
  std::string format = "json";
  std::string output;

  std::string a, b;  // hciz

  std::string weight;  // character, Dynkin labels
  double theta = 0.3;
  std::string direction;
  std::string compare = "kirillov";

  int starts = 0;  // saddle; 0 means 20 |W|
  double step = 1e-4;

  std::string check = "radial";  // heatflow
  std::string steps = "1e-2,5e-3";
  std::string center;
  double half_width = 0.0;
  int points = 0;
  int n_scaling = 1;
  std::string test_fn = "gaussian";
  double width = 1.0;
  std::string t_seq = "1e-1,1e-2,1e-3";
  double s = 0.5;
  std::string grid_csv;
};

struct Outcome {
  int exit_code = kExitPass;
  nlohmann::json result = nlohmann::json::object();
  nlohmann::json timing = nlohmann::json::object();
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const char* label) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (item.empty() || used != item.size()) throw ArgumentError(std::string("cannot parse ") + label + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError(std::string(label) + " is empty");
  return out;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Ambient coordinates; for sum-zero Cartan realizations the mean is removed,
/// with a warning when it exceeds 1e-9.
inline CartanPoint parse_point(const RootData& rd, const std::string& text, const char* label,
                               std::vector<std::string>& warnings) {
  if (text.empty()) throw ArgumentError(std::string("--") + label + " is required");
  Eigen::VectorXd v = to_vector(parse_list(text, label));
  if (v.size() != rd.ambient_dim()) {
    throw ArgumentError(std::string(label) + " has " + std::to_string(v.size()) + " coordinates, expected " +
                        std::to_string(rd.ambient_dim()));
  }
  if (rd.system.sum_zero()) {
    const double sum = v.sum();
    if (std::abs(sum) > 1e-9) {
      std::ostringstream msg;
      msg << label << " projected to the sum-zero subspace (coordinate sum was " << std::setprecision(17) << sum << ")";
      warnings.push_back(msg.str());
    }
    v.array() -= v.mean();
  }
  return CartanPoint(v);
}

inline Rational parse_scale(const std::string& text) {
  Rational q;
  try {
    q = Rational(text);
  } catch (const std::exception&) {
    throw ArgumentError("cannot parse form scale '" + text + "'");
  }
  if (q <= 0) throw ArgumentError("form scale must be positive");
  return q;
}

inline CompactGroupSpec group_spec(const RunConfig& c) {
  const Rational scale = parse_scale(c.form_scale);
  std::string g = c.group;
  std::transform(g.begin(), g.end(), g.begin(), [](unsigned char ch) { return std::tolower(ch); });
  CompactGroupSpec spec;
  if (g.find('(') != std::string::npos) {
    spec = parse_group_spec(g);
    spec = make_group_spec(spec.family, spec.size, scale);
  } else if (g == "su") {
    spec = make_group_spec(GroupFamily::SU, c.size, scale);
  } else if (g == "so") {
    spec = make_group_spec(GroupFamily::SO, c.size, scale);
  } else if (g == "usp" || g == "sp") {
    spec = make_group_spec(GroupFamily::USp, c.size, scale);
  } else {
    throw ArgumentError("unknown group '" + c.group + "'");
  }
  return spec;
}

inline RootData root_data(const RunConfig& c) {
  return make_root_data(parse_family(c.family), c.rank, parse_scale(c.form_scale));
}

inline double tolerance_or(const RunConfig& c, double fallback) { return c.tolerance >= 0.0 ? c.tolerance : fallback; }

/// Pass/fail tolerance used when --tolerance is not given.
inline double default_tolerance(const RunConfig& c) {
  if (c.command == "verify-hc") return 0.01;
  if (c.command == "hciz") return 1e-10;
  if (c.command == "character") return c.compare == "dimension" ? 1e-6 : 1e-10;
  if (c.command == "volume") return 1e-12;
  if (c.command == "saddle") return 1e-4;
  if (c.command == "heatflow") {
    if (c.check == "boundary") return 1e-3;
    if (c.check == "exact") return 1e-12;
    if (c.check == "semigroup") return 1e-6;
  }
  return 0.0;
}

inline double relative(double a, double b) {
  const double m = std::max(std::abs(a), std::abs(b));
  return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

inline double relative(Complex a, Complex b) {
  const double m = std::max(std::abs(a), std::abs(b));
  return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

inline Eigen::VectorXd weyl_vector_d(const RootData& rd) {
  const auto rho = weyl_vector(rd.system);
  Eigen::VectorXd out(rd.ambient_dim());
  for (int i = 0; i < rd.ambient_dim(); ++i) out[i] = static_cast<double>(rho[static_cast<std::size_t>(i)]);
  return out;
}

inline double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

inline Outcome cmd_verify_hc(const RunConfig& c, std::vector<std::string>& warnings) {
  const auto spec = detail::group_spec(c);
  const RootData rd = spec.root_data();
  const CartanPoint h1 = detail::parse_point(rd, c.h1, "h1", warnings);
  const CartanPoint h2 = detail::parse_point(rd, c.h2, "h2", warnings);
  orbital::detail::require_positive_time(c.t);
  const double tol = detail::tolerance_or(c, 0.01);
  // Closed form first: degenerate inputs fail before any sampling.
  const Complex closed = hc_rhs(rd, h1, CartanPoint(h2.coords / c.t));
  const auto est = mc_orbital_integral(spec, h1, h2, c.t, c.samples, c.seed, c.threads);
  const double diff = std::abs(est.mean - closed);
  const double z = est.std_error > 0.0 ? diff / est.std_error : (diff == 0.0 ? 0.0 : INFINITY);
  const double gap = diff / std::abs(closed);
  Outcome o;
  o.result = estimate_json(spec, h1, h2, c.t, est);
  o.result["closed_form"] = complex_json(closed);
  o.result["z_score"] = z;
  o.result["relative_gap"] = gap;
  o.result["z_max"] = 3.0;
  o.result["pass"] = z <= 3.0 && gap <= tol;
  o.timing["monte_carlo_seconds"] = est.elapsed;
  o.exit_code = o.result["pass"].get<bool>() ? kExitPass : kExitTolerance;
  return o;
}

inline Outcome cmd_hciz(const RunConfig& c, std::vector<std::string>&) {
  const Eigen::VectorXd a = detail::to_vector(detail::parse_list(c.a, "a"));
  const Eigen::VectorXd b = detail::to_vector(detail::parse_list(c.b, "b"));
  if (a.size() != b.size()) throw ArgumentError("a and b must have the same length");
  const double tol = detail::tolerance_or(c, 1e-10);
  const double value = hciz(a, b);
  Outcome o;
  o.result["n"] = a.size();
  o.result["value"] = value;
  bool pass = std::isfinite(value);
  if (a.size() >= 2) {
    const RootData rd = make_root_data(Family::A, static_cast<int>(a.size()) - 1);
    const Eigen::VectorXd a0 = a.array() - a.mean();
    const Eigen::VectorXd b0 = b.array() - b.mean();
    const double shift = static_cast<double>(a.size()) * a.mean() * b.mean();
    const double weyl_route = (std::exp(shift) * hc_rhs(rd, CartanPoint(a0), CartanPoint(b0))).real();
    const double r = detail::relative(value, weyl_route);
    o.result["weyl_sum_value"] = weyl_route;
    o.result["relative_difference"] = r;
    pass = pass && r <= tol;
  }
  o.result["pass"] = pass;
  o.exit_code = pass ? kExitPass : kExitTolerance;
  return o;
}

inline Outcome cmd_character(const RunConfig& c, std::vector<std::string>& warnings) {
  const RootData rd = detail::root_data(c);
  if (c.weight.empty()) throw ArgumentError("--weight (Dynkin labels) is required");
  std::vector<int> labels;
  for (double x : detail::parse_list(c.weight, "weight")) {
    if (x != std::floor(x)) throw ArgumentError("Dynkin labels must be integers");
    labels.push_back(static_cast<int>(x));
  }
  const Weight lambda = weight_from_dynkin(rd.system, labels);
  const CartanPoint dir = c.direction.empty() ? CartanPoint(Eigen::VectorXd(2.0 * detail::weyl_vector_d(rd)))
                                              : detail::parse_point(rd, c.direction, "direction", warnings);
  const CartanPoint h(Eigen::VectorXcd(Complex(0.0, c.theta) * dir.coords));
  const Complex chi = weyl_character(rd, lambda, h);
  Outcome o;
  o.result["weight_dynkin"] = labels;
  o.result["theta"] = c.theta;
  o.result["h"] = point_json(h);
  o.result["weyl_character"] = complex_json(chi);
  o.result["dimension"] = format_rational(weyl_dimension(rd.system, lambda));
  bool pass = true;
  if (c.compare == "kirillov") {
    const double tol = detail::tolerance_or(c, 1e-10);
    const Complex kir = kirillov_character(rd, lambda, h);
    const double r = detail::relative(chi, kir);
    o.result["kirillov_character"] = complex_json(kir);
    o.result["relative_difference"] = r;
    pass = r <= tol;
  } else if (c.compare == "dimension") {
    const double tol = detail::tolerance_or(c, 1e-6);
    const double limit = character_dimension_limit(rd, lambda, dir);
    const double dim = static_cast<double>(weyl_dimension(rd.system, lambda));
    o.result["dimension_limit"] = limit;
    o.result["relative_difference"] = detail::relative(limit, dim);
    pass = detail::relative(limit, dim) <= tol;
  } else if (c.compare != "none") {
    throw ArgumentError("--compare must be kirillov, dimension or none");
  }
  o.result["pass"] = pass;
  o.exit_code = pass ? kExitPass : kExitTolerance;
  return o;
}

inline Outcome cmd_volume(const RunConfig& c, std::vector<std::string>& warnings) {
  const RootData rd = detail::root_data(c);
  const CartanPoint h1 = detail::parse_point(rd, c.h1, "h1", warnings);
  const double tol = detail::tolerance_or(c, 1e-12);
  const double vol = coadjoint_volume(rd, h1);
  const double vol2 = coadjoint_volume(rd, CartanPoint(Eigen::VectorXcd(2.0 * h1.coords)));
  const double predicted = std::ldexp(vol, rd.root_count());
  const double r = detail::relative(vol2, predicted);
  Outcome o;
  o.result["h1"] = point_json(h1);
  o.result["volume"] = vol;
  o.result["volume_at_2h1"] = vol2;
  o.result["homogeneity_degree"] = rd.root_count();
  o.result["homogeneity_relative_error"] = r;
  o.result["pass"] = r <= tol;
  o.exit_code = r <= tol ? kExitPass : kExitTolerance;
  return o;
}

inline Outcome cmd_saddle(const RunConfig& c, std::vector<std::string>& warnings) {
  const auto spec = detail::group_spec(c);
  const RootData rd = spec.root_data();
  const CartanPoint h1 = detail::parse_point(rd, c.h1, "h1", warnings);
  const CartanPoint h2 = detail::parse_point(rd, c.h2, "h2", warnings);
  const double tol = detail::tolerance_or(c, 1e-4);
  const int starts = c.starts > 0 ? c.starts : 20 * static_cast<int>(rd.weyl_order());
  const auto start = std::chrono::steady_clock::now();
  const auto search = find_critical_points(spec, h1, h2, starts, c.seed);
  std::vector<HessianCheck> checks;
  bool pass = !search.incomplete_cover && search.spurious == 0;
  nlohmann::json measured = nlohmann::json::array();
  for (const auto& p : search.points) {
    if (!p.matched_weyl) {
      pass = false;
      continue;
    }
    checks.push_back(hessian_determinant_check(spec, p, h1, h2, c.step));
    measured.push_back(checks.back().measured_sign);
    pass = pass && checks.back().rel_error < tol && checks.back().measured_sign == p.matched_sign;
  }
  Outcome o;
  o.result = saddle_report_json(search, checks);
  o.result["measured_signs"] = measured;
  o.result["finite_difference_step"] = c.step;
  o.result["pass"] = pass;
  o.timing["search_seconds"] = detail::elapsed_since(start);
  o.exit_code = pass ? kExitPass : kExitTolerance;
  return o;
}

namespace detail {

inline GridSpec heat_grid(const RootData& rd, const RunConfig& c, const CartanPoint& h1,
                          std::vector<std::string>& warnings, std::vector<double>& scales) {
  const auto steps = parse_list(c.steps, "steps");
  if (steps.size() < 2) throw ArgumentError("--steps needs at least two entries");
  for (double s : steps)
    if (!(s > 0.0)) throw ArgumentError("--steps entries must be positive");
  scales.clear();
  for (double s : steps) scales.push_back(s / steps.front());
  const Eigen::VectorXd x = c.center.empty() ? Eigen::VectorXd(1.5 * h1.coords.real())
                                             : parse_point(rd, c.center, "center", warnings).coords.real();
  const Eigen::VectorXd y = to_cartan_coordinates(rd, x);
  double half = c.half_width;
  if (!(half > 0.0)) {
    // A quarter of the distance from the centre to the nearest wall.
    double dist = INFINITY;
    for (int i = 0; i < rd.root_count(); ++i) {
      const Eigen::VectorXd alpha = rd.roots.row(i).transpose();
      dist = std::min(dist, std::abs(alpha.dot(x)) / std::sqrt(alpha.squaredNorm() / rd.form_scale));
    }
    half = 0.25 * dist / std::sqrt(static_cast<double>(rd.rank()));
  }
  const int points = c.points > 0 ? c.points : (rd.rank() == 1 ? 5 : 3);
  return grid_around(y, half, points, steps.front(), steps.front());
}

inline CartanPoint default_h1(const RootData& rd, const RunConfig& c, std::vector<std::string>& warnings) {
  if (!c.h1.empty()) return parse_point(rd, c.h1, "h1", warnings);
  return CartanPoint(Eigen::VectorXd(2.0 * weyl_vector_d(rd)));
}

inline bool in_window(double ratio) { return ratio >= 3.5 && ratio <= 4.5; }

}  // namespace detail

inline Outcome cmd_heatflow(const RunConfig& c, std::vector<std::string>& warnings) {
  const RootData rd = detail::root_data(c);
  const CartanPoint h1 = detail::default_h1(rd, c, warnings);
  orbital::detail::require_positive_time(c.t);
  Outcome o;
  o.result["check"] = c.check;
  o.result["h1"] = point_json(h1);
  o.result["t"] = c.t;
  bool pass = false;
  if (c.check == "radial" || c.check == "cm") {
    std::vector<double> scales;
    const GridSpec grid = detail::heat_grid(rd, c, h1, warnings, scales);
    nlohmann::json g;
    g["dims"] = grid.dims;
    g["extent"] = grid.extent;
    g["points"] = grid.points;
    g["h_step"] = grid.h_step;
    g["t_step"] = grid.t_step;
    o.result["grid"] = g;
    if (c.check == "radial") {
      const auto r = radial_heat_residual(rd, h1, grid, c.t, scales);
      o.result["residual"] = residual_report_json(r);
      pass = detail::in_window(r.halving_ratio) && r.extra["control_to_v_ratio_finest"].get<double>() >= 10.0;
    } else {
      const auto r = cm_pde_residual(rd, h1, grid, c.t, c.n_scaling, scales);
      o.result["residual"] = residual_report_json(r);
      double diff = 0.0;
      for (double d : r.extra["form_difference_max"]) diff = std::max(diff, d);
      pass = detail::in_window(r.halving_ratio) && diff < 1e-10;
    }
    if (!c.grid_csv.empty()) {
      std::ofstream out(c.grid_csv);
      if (!out) throw ResourceError("cannot write " + c.grid_csv);
      out << v_grid_csv(rd, h1, grid, c.t);
    }
  } else if (c.check == "boundary") {
    const Eigen::VectorXd y1 = to_cartan_coordinates(rd, h1.coords.real());
    TestFunction tf;
    if (c.test_fn == "gaussian") {
      tf = gaussian_bump(y1, c.width);
    } else if (c.test_fn == "compact") {
      tf = compact_bump(y1, c.width);
    } else {
      throw ArgumentError("--test-fn must be gaussian or compact");
    }
    const auto rep = boundary_delta_check(rd, h1, tf, detail::parse_list(c.t_seq, "t-seq"));
    o.result["boundary"] = boundary_report_json(rep);
    pass = rep.levels.back().rel_error <= detail::tolerance_or(c, 1e-3);
  } else if (c.check == "exact") {
    const int n = c.points > 0 ? c.points : 100;
    CounterRng rng(c.seed, 0);
    auto draw = [&]() {
      while (true) {
        Eigen::VectorXd y(rd.rank());
        for (int i = 0; i < rd.rank(); ++i) y[i] = -2.0 + 4.0 * rng.uniform();
        const CartanPoint h = from_cartan_coordinates(rd, y);
        if ((rd.roots * h.coords.real()).cwiseAbs().minCoeff() >= 0.3) return h;
      }
    };
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const CartanPoint a = draw(), b = draw();
      const double t = 0.3 + 2.7 * rng.uniform();
      worst = std::max(worst, detail::relative(v_function(rd, a, b, t), v_function_direct(rd, a, b, t)));
    }
    o.result["points"] = n;
    o.result["max_relative_difference"] = worst;
    pass = worst <= detail::tolerance_or(c, 1e-12);
  } else if (c.check == "semigroup") {
    const CartanPoint h2 = c.h2.empty() ? CartanPoint(Eigen::VectorXcd(0.5 * h1.coords))
                                        : detail::parse_point(rd, c.h2, "h2", warnings);
    const auto sg = heat_semigroup_check(rd, h1, h2, c.s, c.t);
    o.result["s"] = c.s;
    o.result["convolved"] = sg.convolved;
    o.result["direct"] = sg.direct;
    o.result["abs_error"] = sg.abs_error;
    pass = sg.abs_error <= detail::tolerance_or(c, 1e-6);
  } else {
    throw ArgumentError("--check must be radial, cm, boundary, exact or semigroup");
  }
  o.result["pass"] = pass;
  o.exit_code = pass ? kExitPass : kExitTolerance;
  return o;
}

inline Outcome cmd_roots(const RunConfig& c, std::vector<std::string>&) {
  const RootData rd = detail::root_data(c);
  Outcome o;
  o.result = root_data_json(rd.system, rd.weyl_order());
  o.result["normalization"] = format_rational(rd.pi_pi / Rational(static_cast<long long>(rd.weyl_order())));
  o.result["pass"] = true;
  return o;
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["format"] = c.format;
  j["output"] = c.output;
  j["seed"] = c.seed;
  j["tolerance"] = c.tolerance;
  j["form_scale"] = c.form_scale;
  const std::string& cmd = c.command;
  if (cmd == "verify-hc" || cmd == "saddle") {
    j["group"] = c.group;
    j["size"] = c.size;
    j["h1"] = c.h1;
    j["h2"] = c.h2;
  } else if (cmd != "hciz") {
    j["family"] = c.family;
    j["rank"] = c.rank;
  }
  if (cmd == "verify-hc") {
    j["t"] = c.t;
    j["samples"] = c.samples;
    j["threads"] = c.threads;
  } else if (cmd == "hciz") {
    j["a"] = c.a;
    j["b"] = c.b;
  } else if (cmd == "character") {
    j["weight"] = c.weight;
    j["theta"] = c.theta;
    j["direction"] = c.direction;
    j["compare"] = c.compare;
  } else if (cmd == "volume") {
    j["h1"] = c.h1;
  } else if (cmd == "saddle") {
    j["starts"] = c.starts;
    j["step"] = c.step;
  } else if (cmd == "heatflow") {
    j["check"] = c.check;
    j["h1"] = c.h1;
    j["h2"] = c.h2;
    j["t"] = c.t;
    j["steps"] = c.steps;
    j["center"] = c.center;
    j["half_width"] = c.half_width;
    j["points"] = c.points;
    j["n_scaling"] = c.n_scaling;
    j["test_fn"] = c.test_fn;
    j["width"] = c.width;
    j["t_seq"] = c.t_seq;
    j["s"] = c.s;
    j["grid_csv"] = c.grid_csv;
  }
  return j;
}

/// The report without its "timestamp" member, serialized. Identical configs
/// give identical payloads.
inline std::string report_payload(nlohmann::json report) {
  report.erase("timestamp");
  return report.dump();
}

namespace detail {

inline std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline std::string scalar_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline std::string render(const nlohmann::json& report, const std::string& format) {
  if (format == "json") return report.dump(2) + "\n";
  const nlohmann::json flat = report.flatten();
  std::ostringstream out;
  if (format == "csv") {
    out << "key,value\n";
    for (const auto& [k, v] : flat.items()) {
      std::string text = scalar_text(v);
      if (text.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char ch : text) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        text = quoted + "\"";
      }
      out << k << "," << text << "\n";
    }
    return out.str();
  }
  std::size_t width = 0;
  for (const auto& [k, v] : flat.items()) width = std::max(width, k.size());
  for (const auto& [k, v] : flat.items()) out << std::left << std::setw(static_cast<int>(width) + 2) << k << scalar_text(v) << "\n";
  return out.str();
}

inline const char* status_name(int code) {
  switch (code) {
    case kExitPass: return "pass";
    case kExitTolerance: return "tolerance_fail";
    case kExitDegenerate: return "degenerate_input";
    case kExitNumerical: return "numerical_failure";
    default: return "usage_error";
  }
}

}  // namespace detail

/// Runs one command and returns the process exit code. The report goes to
/// `out` (or the --output file); diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Orbital integrals over compact Lie groups: closed forms and numerical cross-checks",
               "orbital_forge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ORBITAL_FORGE_VERSION);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
    sub->add_option("--tolerance", c.tolerance, "Pass/fail tolerance (command default if unset)");
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv", "table"}))->capture_default_str();
    sub->add_option("--output,-o", c.output, "Write the report to this file");
    sub->add_option("--form-scale", c.form_scale, "Invariant form = scale * dot (rational)")->capture_default_str();
  };
  auto group_opts = [&](CLI::App* sub) {
    sub->add_option("--group", c.group, "su, so, usp or e.g. SU(3)")->capture_default_str();
    sub->add_option("--size", c.size, "Matrix size")->capture_default_str();
  };
  auto family_opts = [&](CLI::App* sub) {
    sub->add_option("--family", c.family, "Root system family: a, b, c, d, g2")->capture_default_str();
    sub->add_option("--rank", c.rank, "Rank")->capture_default_str();
  };

  auto* verify = app.add_subcommand("verify-hc", "Monte Carlo orbital integral against the closed form");
  common(verify);
  group_opts(verify);
  verify->add_option("--h1", c.h1, "Ambient coordinates, comma separated")->required();
  verify->add_option("--h2", c.h2, "Ambient coordinates, comma separated")->required();
  verify->add_option("--t", c.t, "Time parameter")->capture_default_str();
  verify->add_option("--samples", c.samples, "Haar samples")->capture_default_str();
  verify->add_option("--threads", c.threads, "Worker cap (0: ORBITAL_FORGE_THREADS or hardware)")->capture_default_str();

  auto* hciz_cmd = app.add_subcommand("hciz", "U(N) determinant formula");
  common(hciz_cmd);
  hciz_cmd->add_option("--a", c.a, "Increasing eigenvalues")->required();
  hciz_cmd->add_option("--b", c.b, "Increasing eigenvalues")->required();

  auto* character = app.add_subcommand("character", "Weyl character, optionally against Kirillov or dimension");
  common(character);
  family_opts(character);
  character->add_option("--weight", c.weight, "Dynkin labels, comma separated")->required();
  character->add_option("--theta", c.theta, "h = i theta direction")->capture_default_str();
  character->add_option("--direction", c.direction, "Ambient direction (default 2 rho)");
  character->add_option("--compare", c.compare, "kirillov, dimension or none")->capture_default_str();

  auto* volume = app.add_subcommand("volume", "Coadjoint orbit volume");
  common(volume);
  family_opts(volume);
  volume->add_option("--h1", c.h1, "Ambient coordinates")->required();

  auto* saddle = app.add_subcommand("saddle", "Critical points and Hessian determinants");
  common(saddle);
  group_opts(saddle);
  saddle->add_option("--h1", c.h1, "Ambient coordinates")->required();
  saddle->add_option("--h2", c.h2, "Ambient coordinates")->required();
  saddle->add_option("--starts", c.starts, "Random starts (0: 20 |W|)")->capture_default_str();
  saddle->add_option("--step", c.step, "Finite-difference step for the Hessian")->capture_default_str();

  auto* heat = app.add_subcommand("heatflow", "Heat-equation residuals and boundary checks");
  common(heat);
  family_opts(heat);
  heat->add_option("--check", c.check, "radial, cm, boundary, exact or semigroup")->capture_default_str();
  heat->add_option("--h1", c.h1, "Ambient coordinates (default 2 rho)");
  heat->add_option("--h2", c.h2, "Evaluation point for the semigroup check");
  heat->add_option("--t", c.t, "Time (t0 for residuals, convolution time for semigroup)")->capture_default_str();
  heat->add_option("--steps", c.steps, "Step levels, comma separated")->capture_default_str();
  heat->add_option("--center", c.center, "Grid centre, ambient coordinates (default 1.5 h1)");
  heat->add_option("--half-width", c.half_width, "Grid half-width (default: quarter of wall distance)");
  heat->add_option("--points", c.points, "Nodes per axis; random pairs for the exact check");
  heat->add_option("--n-scaling", c.n_scaling, "Scaling N of the free-energy equation")->capture_default_str();
  heat->add_option("--test-fn", c.test_fn, "gaussian or compact")->capture_default_str();
  heat->add_option("--width", c.width, "Test function width")->capture_default_str();
  heat->add_option("--t-seq", c.t_seq, "Decreasing times for the boundary check")->capture_default_str();
  heat->add_option("--s", c.s, "Base time for the semigroup check")->capture_default_str();
  heat->add_option("--grid-csv", c.grid_csv, "Write V on the residual grid as CSV");

  auto* roots = app.add_subcommand("roots", "Root system data");
  common(roots);
  family_opts(roots);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }
  c.command = app.get_subcommands().front()->get_name();
  if (c.tolerance < 0.0) c.tolerance = detail::default_tolerance(c);

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> warnings;
  nlohmann::json report;
  report["schema"] = kSchema;
  report["version"] = ORBITAL_FORGE_VERSION;
  report["command"] = c.command;
  report["config"] = config_json(c);
  int code = kExitPass;
  Outcome outcome;
  try {
    if (c.command == "verify-hc") outcome = cmd_verify_hc(c, warnings);
    else if (c.command == "hciz") outcome = cmd_hciz(c, warnings);
    else if (c.command == "character") outcome = cmd_character(c, warnings);
    else if (c.command == "volume") outcome = cmd_volume(c, warnings);
    else if (c.command == "saddle") outcome = cmd_saddle(c, warnings);
    else if (c.command == "heatflow") outcome = cmd_heatflow(c, warnings);
    else outcome = cmd_roots(c, warnings);
    code = outcome.exit_code;
    report["result"] = outcome.result;
  } catch (const DegenerateInputError& e) {
    code = kExitDegenerate;
    report["error"] = {{"kind", "degenerate_input"}, {"message", e.what()}, {"root", e.root()}};
  } catch (const NumericalFailure& e) {
    code = kExitNumerical;
    report["error"] = {{"kind", "numerical_failure"}, {"message", e.what()}};
  } catch (const ResourceError& e) {
    code = kExitNumerical;
    report["error"] = {{"kind", "resource"}, {"message", e.what()}};
  } catch (const ArgumentError& e) {
    code = kExitUsage;
    report["error"] = {{"kind", "usage"}, {"message", e.what()}};
  } catch (const ConfigurationError& e) {
    code = kExitUsage;
    report["error"] = {{"kind", "configuration"}, {"message", e.what()}};
  }
  report["warnings"] = warnings;
  report["exit_code"] = code;
  report["status"] = detail::status_name(code);
  outcome.timing["utc"] = detail::utc_now();
  outcome.timing["elapsed_seconds"] = detail::elapsed_since(start);
  report["timestamp"] = outcome.timing;

  for (const auto& w : warnings) err << "warning: " << w << "\n";
  if (report.contains("error")) err << "error: " << report["error"]["message"].get<std::string>() << "\n";

  const std::string text = detail::render(report, c.format);
  if (c.output.empty()) {
    out << text;
  } else {
    std::ofstream file(c.output);
    if (!file) {
      err << "error: cannot write " << c.output << "\n";
      return kExitUsage;
    }
    file << text;
  }
  return code;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("orbital_forge");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace orbital::cli
