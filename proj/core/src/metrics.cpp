#include "difflab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "difflab/rng.hpp"

namespace difflab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double gauss_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * (z * z / var + std::log(var) + kLog2Pi));
}

// Exact W1 between two 1D empirical distributions via the quantile coupling
// (piecewise-constant quantile functions; handles unequal sample counts).
double w1_1d(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < na && j < nb) {
    const double ua = static_cast<double>(i + 1) / static_cast<double>(na);
    const double ub = static_cast<double>(j + 1) / static_cast<double>(nb);
    const double next = std::min(ua, ub);
    acc += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return acc;
}

}  // namespace

double tv_gaussian_1d(const AffineLaw& a, const AffineLaw& b) {
  if (a.mean.size() != 1 || b.mean.size() != 1)
    throw std::invalid_argument("tv_gaussian_1d requires d = 1 laws");
  const double ma = a.mean[0], mb = b.mean[0];
  const double va = a.cov(0, 0), vb = b.cov(0, 0);
  if (!(va > 0.0) || !(vb > 0.0))
    throw std::domain_error("tv_gaussian_1d requires positive variances");
  const double pooled = std::sqrt((va + vb) / 2.0);
  const double lo = std::min(ma, mb) - 12.0 * pooled;
  const double hi = std::max(ma, mb) + 12.0 * pooled;

  /* |phi_a - phi_b| has a kink wherever the densities cross, which stalls
   * the quadrature's error estimate.  log phi_a = log phi_b is a quadratic
   * A x^2 + B x + C = 0, so cut the interval at its real roots and integrate
   * the smooth pieces. */
  std::vector<double> cuts{lo, hi};
  const double A = 0.5 / vb - 0.5 / va;
  const double B = ma / va - mb / vb;
  const double C = 0.5 * mb * mb / vb - 0.5 * ma * ma / va + 0.5 * std::log(vb / va);
  const auto add_cut = [&](double r) {
    if (r > lo && r < hi) cuts.push_back(r);
  };
  if (A != 0.0) {
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = B >= 0.0 ? -0.5 * (B + sq) : -0.5 * (B - sq);
      if (q != 0.0) {
        add_cut(q / A);
        add_cut(C / q);
      } else {
        add_cut(0.0);
      }
    }
  } else if (B != 0.0) {
    add_cut(-C / B);
  }
  std::sort(cuts.begin(), cuts.end());

  const auto integrand = [&](double x) {
    return std::abs(gauss_pdf(x, ma, va) - gauss_pdf(x, mb, vb));
  };
  double integral = 0.0, error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double piece_error = 0.0;
    integral += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, cuts[i], cuts[i + 1], 15, 1e-12, &piece_error);
    error += piece_error;
  }
  if (error > 1e-10)
    throw std::domain_error("tv_gaussian_1d: quadrature did not reach tolerance");
  return std::clamp(0.5 * integral, 0.0, 1.0);
}

double kl_gaussian(const AffineLaw& a, const AffineLaw& b) {
  if (a.mean.size() != b.mean.size())
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  const int d = static_cast<int>(a.mean.size());
  Eigen::LLT<Eigen::MatrixXd> lltb(b.cov);
  if (lltb.info() != Eigen::Success)
    throw std::domain_error("kl_gaussian requires positive definite b.cov");
  double logdet_b = 0.0;
  for (int i = 0; i < d; ++i) {
    const double Lii = lltb.matrixLLT()(i, i);
    if (!(Lii > 0.0)) throw std::domain_error("kl_gaussian requires positive definite b.cov");
    logdet_b += 2.0 * std::log(Lii);
  }
  Eigen::LLT<Eigen::MatrixXd> llta(a.cov);
  if (llta.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  double logdet_a = 0.0;
  for (int i = 0; i < d; ++i) {
    const double Lii = llta.matrixLLT()(i, i);
    if (!(Lii > 0.0)) return std::numeric_limits<double>::infinity();
    logdet_a += 2.0 * std::log(Lii);
  }
  const Eigen::VectorXd diff = b.mean - a.mean;
  const double trace = lltb.solve(a.cov).trace();
  const double maha = diff.dot(lltb.solve(diff));
  return std::max(0.0, 0.5 * (trace + maha - d + logdet_b - logdet_a));
}

double sliced_w1(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                 int n_directions, std::uint64_t seed) {
  if (samples_a.cols() != samples_b.cols())
    throw std::invalid_argument("sliced_w1: dimension mismatch");
  if (samples_a.rows() < 100 || samples_b.rows() < 100)
    throw std::invalid_argument("sliced_w1 requires >= 100 samples per set");
  const int d = static_cast<int>(samples_a.cols());
  const auto project = [](const Eigen::MatrixXd& m, const Eigen::VectorXd& dir) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    const Eigen::VectorXd proj = m * dir;
    for (Eigen::Index i = 0; i < proj.size(); ++i) out[static_cast<std::size_t>(i)] = proj[i];
    return out;
  };
  if (d == 1) {
    const Eigen::VectorXd dir = Eigen::VectorXd::Ones(1);
    return w1_1d(project(samples_a, dir), project(samples_b, dir));
  }
  if (n_directions < 1) throw std::invalid_argument("sliced_w1 requires n_directions >= 1");
  GaussianStream g(derive_stream(seed, {0x736c696365ULL}));
  double acc = 0.0;
  for (int k = 0; k < n_directions; ++k) {
    Eigen::VectorXd dir(d);
    double norm = 0.0;
    do {
      for (int i = 0; i < d; ++i) dir[i] = g.next();
      norm = dir.norm();
    } while (norm == 0.0);
    dir /= norm;
    acc += w1_1d(project(samples_a, dir), project(samples_b, dir));
  }
  return acc / n_directions;
}

double histogram_tv(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                    int bins) {
  if (samples_a.cols() != samples_b.cols())
    throw std::invalid_argument("histogram_tv: dimension mismatch");
  const int d = static_cast<int>(samples_a.cols());
  if (d < 1 || d > 2) throw std::invalid_argument("histogram_tv requires d <= 2");
  if (bins < 16) throw std::invalid_argument("histogram_tv requires bins >= 16 per axis");
  if (samples_a.rows() < 1 || samples_b.rows() < 1)
    throw std::invalid_argument("histogram_tv requires nonempty sample sets");

  Eigen::VectorXd lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    lo[j] = std::min(samples_a.col(j).minCoeff(), samples_b.col(j).minCoeff());
    hi[j] = std::max(samples_a.col(j).maxCoeff(), samples_b.col(j).maxCoeff());
    if (hi[j] <= lo[j]) hi[j] = lo[j] + 1.0;  // degenerate axis: one occupied bin
  }
  const auto bin_index = [&](const Eigen::MatrixXd& m, Eigen::Index row) {
    int idx = 0;
    for (int j = 0; j < d; ++j) {
      const double u = (m(row, j) - lo[j]) / (hi[j] - lo[j]);
      int cell = static_cast<int>(u * bins);
      cell = std::clamp(cell, 0, bins - 1);  // right edge lands in the last bin
      idx = idx * bins + cell;
    }
    return idx;
  };
  const int n_cells = d == 1 ? bins : bins * bins;
  std::vector<double> pa(static_cast<std::size_t>(n_cells), 0.0);
  std::vector<double> pb(static_cast<std::size_t>(n_cells), 0.0);
  for (Eigen::Index i = 0; i < samples_a.rows(); ++i)
    pa[static_cast<std::size_t>(bin_index(samples_a, i))] += 1.0 / samples_a.rows();
  for (Eigen::Index i = 0; i < samples_b.rows(); ++i)
    pb[static_cast<std::size_t>(bin_index(samples_b, i))] += 1.0 / samples_b.rows();
  double acc = 0.0;
  for (int c = 0; c < n_cells; ++c)
    acc += std::abs(pa[static_cast<std::size_t>(c)] - pb[static_cast<std::size_t>(c)]);
  return 0.5 * acc;
}

}  // namespace difflab
