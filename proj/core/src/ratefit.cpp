#include "difflab/ratefit.hpp"

#include <cmath>
#include <stdexcept>

#include "difflab/metrics.hpp"
#include "difflab/oracle.hpp"

namespace difflab {

namespace {

LinearFit ols(const std::vector<std::pair<double, double>>& xy) {
  const auto n = static_cast<double>(xy.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : xy) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: x values must not be constant");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (const auto& [x, y] : xy) {
    const double r = y - (fit.intercept + fit.slope * x);
    ss_res += r * r;
  }
  // guard the flat-data case: zero residuals mean a perfect fit
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res <= 1e-24 ? 1.0 : 0.0);
  return fit;
}

}  // namespace

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_rate requires >= 3 points");
  std::vector<std::pair<double, double>> logs;
  logs.reserve(points.size());
  double prev_t = 0.0;
  for (const auto& [T, err] : points) {
    if (!(T > prev_t)) throw std::invalid_argument("fit_rate requires strictly increasing T");
    if (!(err > 0.0)) throw std::invalid_argument("fit_rate requires positive errors");
    logs.emplace_back(std::log(T), std::log(err));
    prev_t = T;
  }
  const LinearFit lin = ols(logs);
  if (!std::isfinite(lin.slope)) throw std::invalid_argument("fit_rate: slope not finite");
  RateFit fit;
  fit.points = points;
  fit.slope = lin.slope;
  fit.intercept = lin.intercept;
  fit.r2 = lin.r2;
  return fit;
}

LinearFit fit_linear(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("fit_linear requires >= 2 points");
  return ols(points);
}

std::vector<StabilityRow> stability_sweep(const SamplerSpec& spec,
                                          const GaussianMixture& target,
                                          const NoiseSchedule& sched,
                                          const std::vector<double>& magnitudes,
                                          std::uint64_t direction_seed,
                                          BoundaryMode boundary) {
  spec.validate();
  if (target.components.size() != 1 || target.d != 1)
    throw std::invalid_argument("stability_sweep requires a single-Gaussian d=1 target");
  if (magnitudes.empty()) throw std::invalid_argument("stability_sweep: empty magnitude list");
  double prev = -1.0;
  for (double m : magnitudes) {
    if (!(m >= 0.0)) throw std::invalid_argument("stability_sweep: magnitudes must be >= 0");
    if (m < prev)
      throw std::invalid_argument("stability_sweep: magnitudes must be sorted ascending");
    prev = m;
  }
  const Eigen::VectorXd u = perturbation_direction(1, direction_seed);
  const AffineLaw q1 = gaussian_marginal_law(target, sched.abar(1));
  std::vector<StabilityRow> rows;
  rows.reserve(magnitudes.size());
  for (double m : magnitudes) {
    PropagateOptions opts;
    opts.boundary = boundary;
    if (m > 0.0) opts.score_shift = m * u;
    const AffineLaw law = propagate_affine(spec, target, sched, opts);
    rows.push_back({m, tv_gaussian_1d(law, q1)});
  }
  return rows;
}

}  // namespace difflab
