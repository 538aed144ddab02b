#include "pgdenoise/noise_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pgdenoise/errors.hpp"

namespace pgd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(FitMode mode) {
  switch (mode) {
    case FitMode::poisson_gaussian: return "pg";
    case FitMode::gaussian_only: return "gaussian";
    case FitMode::poisson_only: return "poisson";
  }
  return "pg";
}

FitMode fit_mode_from_string(const std::string& s) {
  if (s == "pg" || s == "poisson-gaussian") return FitMode::poisson_gaussian;
  if (s == "gaussian" || s == "gaussian-only") return FitMode::gaussian_only;
  if (s == "poisson" || s == "poisson-only") return FitMode::poisson_only;
  throw ArgumentError("unknown fit mode '" + s + "' (expected pg, gaussian, or poisson)");
}

std::vector<uint8_t> clip_mask(const Image& y, double clip_low_frac, double clip_high_frac) {
  if (clip_low_frac < 0 || clip_high_frac < 0 || clip_low_frac + clip_high_frac >= 1.0)
    throw ArgumentError("clip_mask: fractions must be >= 0 and sum to < 1");
  if (y.size() == 0) throw ArgumentError("clip_mask: empty image");

  const auto [lo_it, hi_it] = std::minmax_element(y.data.begin(), y.data.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  if (range == 0 && (clip_low_frac > 0 || clip_high_frac > 0))
    throw DegenerateMaskError("constant image has no dynamic range to clip");

  const double lo_cut = lo + clip_low_frac * range;
  const double hi_cut = hi - clip_high_frac * range;
  std::vector<uint8_t> mask(y.size());
  size_t included = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    const bool in = y.data[i] >= lo_cut && y.data[i] <= hi_cut;
    mask[i] = in ? 1 : 0;
    included += in;
  }
  if (included == 0) throw DegenerateMaskError("clipping excluded every pixel");
  return mask;
}

double pg_nll(const Image& y, const Image& x, NoiseParams params,
              const std::vector<uint8_t>& mask) {
  if (!y.same_shape(x)) throw ArgumentError("pg_nll: image shapes differ");
  if (mask.size() != y.size()) throw ArgumentError("pg_nll: mask size mismatch");
  double sum = 0.0;
  long n = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!mask[i]) continue;
    const double v = params.a * x.data[i] + params.b;
    if (v <= 0) return kInf;
    const double r = static_cast<double>(y.data[i]) - x.data[i];
    sum += r * r / v + std::log(v);
    ++n;
  }
  if (n == 0) throw DegenerateMaskError("pg_nll: mask includes no pixels");
  return sum / static_cast<double>(n);
}

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> init, double tol, int max_iter) {
  if (init.empty()) throw ArgumentError("nelder_mead: empty initial point");
  if (tol <= 0 || max_iter < 1) throw ArgumentError("nelder_mead: tol > 0 and max_iter >= 1 required");

  const size_t n = init.size();
  std::vector<std::vector<double>> pts(n + 1, init);
  std::vector<double> vals(n + 1);
  for (size_t i = 0; i < n; ++i) {
    // Initial simplex offsets sized to the coordinate magnitudes.
    pts[i + 1][i] += std::max(0.05 * std::fabs(init[i]), 0.005);
  }
  for (size_t i = 0; i <= n; ++i) vals[i] = objective(pts[i]);
  if (!std::isfinite(vals[0]))
    throw ArgumentError("nelder_mead: objective not finite at the initial point");

  std::vector<size_t> order(n + 1);
  int iter = 0;
  bool converged = false;
  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return vals[a] < vals[b]; });
    const size_t best = order[0], second_worst = order[n - 1], worst = order[n];

    // Best vertex stays feasible, so the spread is never inf - inf.
    const double spread = vals[worst] - vals[best];
    if (spread < tol) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (size_t k = 0; k < n; ++k)
      for (size_t i = 0; i < n; ++i) centroid[i] += pts[order[k]][i];
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](const std::vector<double>& from, double coeff) {
      std::vector<double> p(n);
      for (size_t i = 0; i < n; ++i) p[i] = centroid[i] + coeff * (from[i] - centroid[i]);
      return p;
    };

    const auto reflected = blend(pts[worst], -1.0);
    const double f_reflected = objective(reflected);

    if (f_reflected < vals[best]) {
      const auto expanded = blend(pts[worst], -2.0);
      const double f_expanded = objective(expanded);
      if (f_expanded < f_reflected) {
        pts[worst] = expanded;
        vals[worst] = f_expanded;
      } else {
        pts[worst] = reflected;
        vals[worst] = f_reflected;
      }
    } else if (f_reflected < vals[second_worst]) {
      pts[worst] = reflected;
      vals[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < vals[worst];
      const auto contracted = blend(outside ? reflected : pts[worst], 0.5);
      const double f_contracted = objective(contracted);
      if (f_contracted < (outside ? f_reflected : vals[worst])) {
        pts[worst] = contracted;
        vals[worst] = f_contracted;
      } else {
        for (size_t k = 1; k <= n; ++k) {
          auto& p = pts[order[k]];
          for (size_t i = 0; i < n; ++i)
            p[i] = pts[best][i] + 0.5 * (p[i] - pts[best][i]);
          vals[order[k]] = objective(p);
        }
      }
    }
  }

  const size_t best = static_cast<size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], iter, converged};
}

FitResult fit_pg(const Image& y, const Image& x_pseudo, const FitConfig& config) {
  if (!y.same_shape(x_pseudo)) throw ArgumentError("fit_pg: image shapes differ");
  const auto mask = clip_mask(y, config.clip_low_frac, config.clip_high_frac);
  const long included = std::count(mask.begin(), mask.end(), uint8_t{1});

  std::vector<double> init;
  std::function<NoiseParams(const std::vector<double>&)> unpack;
  switch (config.mode) {
    case FitMode::poisson_gaussian:
      init = {config.init.a, config.init.b};
      unpack = [](const std::vector<double>& p) { return NoiseParams{p[0], p[1]}; };
      break;
    case FitMode::gaussian_only:
      // With a pinned to 0 an init of b = 0 would be infeasible; fall back to
      // the same small positive default used for a.
      init = {config.init.b != 0 ? config.init.b : 0.01};
      unpack = [](const std::vector<double>& p) { return NoiseParams{0.0, p[0]}; };
      break;
    case FitMode::poisson_only:
      init = {config.init.a != 0 ? config.init.a : 0.01};
      unpack = [](const std::vector<double>& p) { return NoiseParams{p[0], 0.0}; };
      break;
  }

  auto objective = [&](const std::vector<double>& p) {
    return pg_nll(y, x_pseudo, unpack(p), mask);
  };

  // The default init (a=0.01, b=0) is infeasible when the pseudo-clean image
  // has pixels at or below zero. With b free, raise it just above the
  // feasibility boundary of the included pixels instead of failing outright.
  if (config.mode != FitMode::poisson_only && !std::isfinite(objective(init))) {
    const double a0 = config.mode == FitMode::gaussian_only ? 0.0 : init[0];
    double min_ax = kInf;
    for (size_t i = 0; i < x_pseudo.size(); ++i)
      if (mask[i]) min_ax = std::min(min_ax, a0 * static_cast<double>(x_pseudo.data[i]));
    double& b_init = config.mode == FitMode::gaussian_only ? init[0] : init[1];
    b_init = 1e-6 + std::max(0.0, -min_ax);
  }

  const SimplexResult sr = nelder_mead(objective, init, config.tol, config.max_iter);

  FitResult result;
  result.params = unpack(sr.point);
  result.final_nll = sr.value;
  result.iterations = sr.iterations;
  result.converged = sr.converged;
  result.included_pixels = included;
  return result;
}

nlohmann::ordered_json to_json(const FitResult& result) {
  nlohmann::ordered_json j;
  j["a"] = result.params.a;
  j["b"] = result.params.b;
  j["nll"] = result.final_nll;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["included_pixels"] = result.included_pixels;
  return j;
}

FitResult fit_result_from_json(const nlohmann::json& j) {
  FitResult r;
  r.params.a = j.at("a").get<double>();
  r.params.b = j.at("b").get<double>();
  r.final_nll = j.at("nll").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.included_pixels = j.at("included_pixels").get<long>();
  return r;
}

}  // namespace pgd
