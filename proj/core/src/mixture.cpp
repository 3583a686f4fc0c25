#include "difflab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "difflab/rng.hpp"
#include "marginal_detail.hpp"

namespace difflab {

namespace detail {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// responsibilities r_k and per-component scores g_k = -Sigma_k^{-1}(x - mu_k)
void responsibilities(const std::vector<PreparedComponent>& comps, const Eigen::VectorXd& x,
                      std::vector<double>& r, std::vector<Eigen::VectorXd>& g) {
  const int k = static_cast<int>(comps.size());
  const int d = static_cast<int>(x.size());
  r.resize(static_cast<std::size_t>(k));
  g.resize(static_cast<std::size_t>(k));
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logp(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& c = comps[static_cast<std::size_t>(i)];
    const Eigen::VectorXd diff = x - c.mean;
    const Eigen::VectorXd solved = c.llt.solve(diff);
    g[static_cast<std::size_t>(i)] = -solved;
    logp[static_cast<std::size_t>(i)] =
        c.log_weight - 0.5 * (d * kLog2Pi + c.log_det + diff.dot(solved));
    max_log = std::max(max_log, logp[static_cast<std::size_t>(i)]);
  }
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    r[static_cast<std::size_t>(i)] = std::exp(logp[static_cast<std::size_t>(i)] - max_log);
    total += r[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < k; ++i) r[static_cast<std::size_t>(i)] /= total;
}

}  // namespace

std::vector<PreparedComponent> prepare(const ForwardMarginal& m) {
  std::vector<PreparedComponent> out;
  out.reserve(m.mix.components.size());
  for (const auto& c : m.mix.components) {
    PreparedComponent p;
    p.log_weight = std::log(c.weight);
    p.mean = c.mean;
    p.llt.compute(c.cov);
    if (p.llt.info() != Eigen::Success)
      throw std::domain_error("degenerate marginal");
    p.log_det = 0.0;
    const auto& L = p.llt.matrixLLT();
    for (int i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0)) throw std::domain_error("degenerate marginal");
      p.log_det += 2.0 * std::log(L(i, i));
    }
    out.push_back(std::move(p));
  }
  return out;
}

double log_density(const std::vector<PreparedComponent>& comps, int d,
                   const Eigen::VectorXd& x) {
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logp;
  logp.reserve(comps.size());
  for (const auto& c : comps) {
    const Eigen::VectorXd diff = x - c.mean;
    logp.push_back(c.log_weight - 0.5 * (d * kLog2Pi + c.log_det + diff.dot(c.llt.solve(diff))));
    max_log = std::max(max_log, logp.back());
  }
  double acc = 0.0;
  for (double lp : logp) acc += std::exp(lp - max_log);
  return max_log + std::log(acc);
}

Eigen::VectorXd score(const std::vector<PreparedComponent>& comps, const Eigen::VectorXd& x) {
  std::vector<double> r;
  std::vector<Eigen::VectorXd> g;
  responsibilities(comps, x, r, g);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * g[i];
  return s;
}

Eigen::MatrixXd score_jacobian(const std::vector<PreparedComponent>& comps,
                               const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  std::vector<double> r;
  std::vector<Eigen::VectorXd> g;
  responsibilities(comps, x, r, g);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * g[i];
  // J = sum_k r_k (g_k g_k^T - Sigma_k^{-1}) - s s^T
  Eigen::MatrixXd J = -s * s.transpose();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < r.size(); ++i) {
    J += r[i] * (g[i] * g[i].transpose() - comps[i].llt.solve(eye));
  }
  return 0.5 * (J + J.transpose());  // symmetrize away solver round-off
}

}  // namespace detail

namespace {

constexpr int kMaxDim = 8;
constexpr int kMaxComponents = 16;

// symmetric PSD square root for sampling (LLT would reject point masses)
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace

void GaussianMixture::validate() const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("mixture dimension must be in [1, 8]");
  if (components.empty() || static_cast<int>(components.size()) > kMaxComponents)
    throw std::invalid_argument("mixture must have 1..16 components");
  double wsum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || c.weight > 1.0)
      throw std::invalid_argument("component weight must be in (0, 1]");
    if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d)
      throw std::invalid_argument("component dimensions must match mixture dimension");
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("component covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("component covariance must be PSD");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("component weights must sum to 1");
}

GaussianMixture preset_mixture(const std::string& name) {
  const auto gauss1d = [](double w, double mean, double var) {
    GaussianMixture::Component c;
    c.weight = w;
    c.mean = Eigen::VectorXd::Constant(1, mean);
    c.cov = Eigen::MatrixXd::Constant(1, 1, var);
    return c;
  };
  GaussianMixture mix;
  if (name == "std_normal") {
    mix.d = 1;
    mix.components = {gauss1d(1.0, 0.0, 1.0)};
  } else if (name == "bimodal_1d") {
    mix.d = 1;
    mix.components = {gauss1d(0.5, -2.0, 0.0625), gauss1d(0.5, 2.0, 0.0625)};
  } else if (name == "shifted_1d") {
    mix.d = 1;
    mix.components = {gauss1d(1.0, 1.5, 0.25)};
  } else if (name == "grid4_2d") {
    mix.d = 2;
    for (double sx : {-1.5, 1.5}) {
      for (double sy : {-1.5, 1.5}) {
        GaussianMixture::Component c;
        c.weight = 0.25;
        c.mean = (Eigen::VectorXd(2) << sx, sy).finished();
        c.cov = 0.25 * Eigen::MatrixXd::Identity(2, 2);
        mix.components.push_back(std::move(c));
      }
    }
  } else {
    throw std::invalid_argument("unknown mixture preset: " + name);
  }
  mix.validate();
  return mix;
}

std::vector<std::string> preset_names() {
  return {"std_normal", "bimodal_1d", "grid4_2d", "shifted_1d"};
}

ForwardMarginal forward_marginal(const GaussianMixture& base, double abar) {
  if (!(abar > 0.0) || abar > 1.0) throw std::domain_error("abar outside (0,1]");
  ForwardMarginal m;
  m.abar = abar;
  m.mix.d = base.d;
  const double root = std::sqrt(abar);
  const Eigen::MatrixXd noise =
      (1.0 - abar) * Eigen::MatrixXd::Identity(base.d, base.d);
  m.mix.components.reserve(base.components.size());
  for (const auto& c : base.components) {
    GaussianMixture::Component t;
    t.weight = c.weight;
    t.mean = root * c.mean;
    t.cov = abar * c.cov + noise;
    m.mix.components.push_back(std::move(t));
  }
  return m;
}

double log_density(const ForwardMarginal& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mix.d) throw std::invalid_argument("dimension mismatch");
  return detail::log_density(detail::prepare(m), m.mix.d, x);
}

Eigen::VectorXd exact_score(const ForwardMarginal& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mix.d) throw std::invalid_argument("dimension mismatch");
  return detail::score(detail::prepare(m), x);
}

Eigen::MatrixXd exact_score_jacobian(const ForwardMarginal& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mix.d) throw std::invalid_argument("dimension mismatch");
  return detail::score_jacobian(detail::prepare(m), x);
}

Eigen::MatrixXd sample_forward(const GaussianMixture& mix, double abar, int n,
                               std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_forward requires n >= 1");
  if (!(abar > 0.0) || abar > 1.0) throw std::domain_error("abar outside (0,1]");
  const int d = mix.d;
  std::vector<double> cum;
  cum.reserve(mix.components.size());
  double acc = 0.0;
  for (const auto& c : mix.components) cum.push_back(acc += c.weight);
  std::vector<Eigen::MatrixXd> roots;
  roots.reserve(mix.components.size());
  for (const auto& c : mix.components) roots.push_back(psd_sqrt(c.cov));

  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  SplitMix64 pick(derive_stream(seed, {0x706f696e74ULL}));
  GaussianStream gauss(derive_stream(seed, {0x6e6f697365ULL}));
  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d), w(d);
  for (int i = 0; i < n; ++i) {
    const double u = pick.uniform01();
    std::size_t k = 0;
    while (k + 1 < cum.size() && u > cum[k]) ++k;
    for (int j = 0; j < d; ++j) z[j] = gauss.next();
    for (int j = 0; j < d; ++j) w[j] = gauss.next();
    const auto& c = mix.components[k];
    out.row(i) = (signal * (c.mean + roots[k] * z) + noise * w).transpose();
  }
  return out;
}

MmseResult mmse_score_check(const GaussianMixture& mix, const NoiseSchedule& sched, int t,
                            const Eigen::VectorXd& x, int n, std::uint64_t seed) {
  if (t < 1 || t > sched.T) throw std::out_of_range("mmse_score_check: t outside 1..T");
  if (n < 1) throw std::invalid_argument("mmse_score_check requires n >= 1");
  const double abar = sched.abar(t);
  const double root = std::sqrt(abar);
  const Eigen::MatrixXd x0 = sample_forward(mix, 1.0, n, seed);

  std::vector<double> logw(static_cast<std::size_t>(n));
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd diff = x - root * x0.row(i).transpose();
    logw[static_cast<std::size_t>(i)] = -diff.squaredNorm() / (2.0 * (1.0 - abar));
    max_log = std::max(max_log, logw[static_cast<std::size_t>(i)]);
  }
  double wsum = 0.0, w2sum = 0.0;
  Eigen::VectorXd cond = Eigen::VectorXd::Zero(mix.d);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<std::size_t>(i)] - max_log);
    wsum += w;
    w2sum += w * w;
    cond += w * (x - root * x0.row(i).transpose());
  }
  cond /= wsum;

  MmseResult res;
  res.mc = -cond / (1.0 - abar);
  res.analytic = exact_score(forward_marginal(mix, abar), x);
  const double denom = res.analytic.norm();
  res.rel_err = denom > 0.0 ? (res.mc - res.analytic).norm() / denom
                            : (res.mc - res.analytic).norm();
  res.ess = wsum * wsum / w2sum;
  res.low_ess_warning = res.ess < 100.0;
  return res;
}

nlohmann::json mixture_to_json(const GaussianMixture& mix) {
  nlohmann::json j;
  j["d"] = mix.d;
  j["components"] = nlohmann::json::array();
  for (const auto& c : mix.components) {
    nlohmann::json cj;
    cj["weight"] = c.weight;
    cj["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> cov(static_cast<std::size_t>(c.cov.rows()));
    for (int r = 0; r < c.cov.rows(); ++r)
      for (int col = 0; col < c.cov.cols(); ++col) cov[static_cast<std::size_t>(r)].push_back(c.cov(r, col));
    cj["cov"] = cov;
    j["components"].push_back(std::move(cj));
  }
  return j;
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  GaussianMixture mix;
  mix.d = j.at("d").get<int>();
  for (const auto& cj : j.at("components")) {
    GaussianMixture::Component c;
    c.weight = cj.at("weight").get<double>();
    const auto mean = cj.at("mean").get<std::vector<double>>();
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto cov = cj.at("cov").get<std::vector<std::vector<double>>>();
    c.cov.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(cov.size()));
    for (std::size_t r = 0; r < cov.size(); ++r) {
      if (cov[r].size() != cov.size())
        throw std::invalid_argument("mixture JSON: cov must be square");
      for (std::size_t col = 0; col < cov[r].size(); ++col)
        c.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = cov[r][col];
    }
    mix.components.push_back(std::move(c));
  }
  mix.validate();
  return mix;
}

}  // namespace difflab
