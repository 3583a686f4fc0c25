#include "difflab/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace difflab {

namespace {

// Affine score of the single-Gaussian forward marginal at step t, written
// as s_t(x) = G x + g (with the optional constant shift folded into g).
struct AffineScore {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
};

AffineScore affine_score(const GaussianMixture& target, const NoiseSchedule& sched, int t,
                         const Eigen::VectorXd& shift) {
  const auto& c = target.components.front();
  const int d = target.d;
  const double abar = sched.abar(t);
  const Eigen::MatrixXd S =
      abar * c.cov + (1.0 - abar) * Eigen::MatrixXd::Identity(d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw std::domain_error("degenerate marginal");
  AffineScore out;
  out.G = -llt.solve(Eigen::MatrixXd::Identity(d, d));
  out.g = -out.G * (std::sqrt(abar) * c.mean);
  if (shift.size() > 0) out.g += shift;
  return out;
}

// eps_t(x) = -sqrt(1-abar_t) s_t(x) as an affine map E x + f.
AffineScore affine_eps(const GaussianMixture& target, const NoiseSchedule& sched, int t,
                       const Eigen::VectorXd& shift) {
  AffineScore s = affine_score(target, sched, t, shift);
  const double scale = -std::sqrt(1.0 - sched.abar(t));
  s.G *= scale;
  s.g *= scale;
  return s;
}

}  // namespace

AffineLaw make_affine_law(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  AffineLaw law;
  law.mean = mean;
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("affine law covariance has a negative eigenvalue");
  const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
  law.cov = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  law.cov = 0.5 * (law.cov + law.cov.transpose());
  return law;
}

AffineLaw gaussian_marginal_law(const GaussianMixture& target, double abar) {
  if (target.components.size() != 1)
    throw std::invalid_argument("propagation requires affine score");
  const auto& c = target.components.front();
  const int d = target.d;
  return make_affine_law(std::sqrt(abar) * c.mean,
                         abar * c.cov + (1.0 - abar) * Eigen::MatrixXd::Identity(d, d));
}

AffineLaw propagate_affine(const SamplerSpec& spec, const GaussianMixture& target,
                           const NoiseSchedule& sched, const PropagateOptions& opts) {
  spec.validate();
  target.validate();
  if (target.components.size() != 1)
    throw std::invalid_argument("propagation requires affine score");
  if (opts.score_shift.size() > 0 && opts.score_shift.size() != target.d)
    throw std::invalid_argument("score_shift dimension mismatch");
  const int d = target.d;
  const int T = sched.T;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  int budget = opts.max_steps < 0 ? T - 1 : opts.max_steps;
  auto take_step = [&budget]() {
    if (budget <= 0) return false;
    --budget;
    return true;
  };

  const bool deterministic = spec.kind == SamplerKind::ddim_simple ||
                             spec.kind == SamplerKind::ddim_eps ||
                             spec.kind == SamplerKind::accel_ode;

  if (deterministic) {
    // Y_t = M Y_T + c throughout; the final law is N(c, M M^T).
    Eigen::MatrixXd M = eye;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    auto apply = [&](const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
      M = A * M;
      c = A * c + b;
    };

    switch (spec.kind) {
      case SamplerKind::ddim_simple:
        for (int t = T; t >= 2 && take_step(); --t) {
          const AffineScore s = affine_score(target, sched, t, opts.score_shift);
          const double alpha = sched.a(t);
          const double h = (1.0 - alpha) / 2.0;
          apply((eye + h * s.G) / std::sqrt(alpha), h * s.g / std::sqrt(alpha));
        }
        break;
      case SamplerKind::ddim_eps:
        for (int t = T; t >= 2 && take_step(); --t) {
          const AffineScore e = affine_eps(target, sched, t, opts.score_shift);
          const double coeff = ddim_eps_coeff(sched, t);
          const double inv_root = 1.0 / std::sqrt(sched.a(t));
          apply(inv_root * eye + coeff * e.G, coeff * e.g);
        }
        break;
      case SamplerKind::accel_ode:
        if (*spec.ode_mode == OdeMode::midpoint) {
          auto midpoint_map = [&](int t) {
            const AffineScore s = affine_score(target, sched, t, opts.score_shift);
            const AffineScore sn = affine_score(target, sched, t + 1, opts.score_shift);
            const double alpha = sched.a(t);
            const double alpha_next = sched.a(t + 1);
            if (!(alpha_next < 1.0))
              throw SamplerError("degenerate momentum denominator at step " + std::to_string(t),
                                 t);
            const double root_next = std::sqrt(alpha_next);
            const double h = (1.0 - alpha) / 2.0;
            const double kappa =
                (1.0 - alpha) * (1.0 - alpha) / (4.0 * (1.0 - alpha_next));
            // y_mid = P y + p, then Psi composed through s_{t+1}
            const Eigen::MatrixXd P = root_next * (eye - ((1.0 - alpha_next) / 2.0) * s.G);
            const Eigen::VectorXd p = root_next * (-((1.0 - alpha_next) / 2.0) * s.g);
            Eigen::MatrixXd A = eye + h * s.G + kappa * (s.G - root_next * (sn.G * P));
            Eigen::VectorXd b = h * s.g + kappa * (s.g - root_next * (sn.G * p + sn.g));
            const double inv_root = 1.0 / std::sqrt(alpha);
            return std::make_pair((inv_root * A).eval(), (inv_root * b).eval());
          };
          if (take_step()) {
            if (opts.boundary == BoundaryMode::alpha_ext) {
              auto [A, b] = midpoint_map(T);
              apply(A, b);
            } else {
              const AffineScore s = affine_score(target, sched, T, opts.score_shift);
              const double alpha = sched.a(T);
              const double h = (1.0 - alpha) / 2.0;
              apply((eye + h * s.G) / std::sqrt(alpha), h * s.g / std::sqrt(alpha));
            }
            for (int t = T - 1; t >= 2 && take_step(); --t) {
              auto [A, b] = midpoint_map(t);
              apply(A, b);
            }
          }
        } else {
          // cache = K Y_T + k tracks eps_{t+1} evaluated at the previous iterate
          Eigen::MatrixXd K;
          Eigen::VectorXd k;
          if (take_step()) {
            const AffineScore e = affine_eps(target, sched, T, opts.score_shift);
            K = e.G * M;
            k = e.G * c + e.g;
            const double coeff = ddim_eps_coeff(sched, T);
            const double inv_root = 1.0 / std::sqrt(sched.a(T));
            apply(inv_root * eye + coeff * e.G, coeff * e.g);
            for (int t = T - 1; t >= 2 && take_step(); --t) {
              const AffineScore e_t = affine_eps(target, sched, t, opts.score_shift);
              const double coeff_t = ddim_eps_coeff(sched, t);
              const double ct = accel_ct(sched, t);
              const double inv_root_t = 1.0 / std::sqrt(sched.a(t));
              const Eigen::MatrixXd Et_M = e_t.G * M;
              const Eigen::VectorXd Et_c = e_t.G * c + e_t.g;
              const Eigen::MatrixXd newM = inv_root_t * M + coeff_t * Et_M + ct * (K - Et_M);
              const Eigen::VectorXd newc = inv_root_t * c + coeff_t * Et_c + ct * (k - Et_c);
              K = Et_M;
              k = Et_c;
              M = newM;
              c = newc;
            }
          }
        }
        break;
      default:
        break;
    }
    return make_affine_law(c, M * M.transpose());
  }

  // stochastic kinds: propagate (mean, cov) directly
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd cov = eye;
  for (int t = T; t >= 2 && take_step(); --t) {
    const AffineScore s = affine_score(target, sched, t, opts.score_shift);
    const double alpha = sched.a(t);
    const Eigen::MatrixXd A = (eye + (1.0 - alpha) * s.G) / std::sqrt(alpha);
    const Eigen::VectorXd b = (1.0 - alpha) * s.g / std::sqrt(alpha);
    if (spec.kind == SamplerKind::ddpm) {
      mean = A * mean + b;
      cov = A * cov * A.transpose() + ((1.0 - alpha) / alpha) * eye;
    } else {  // accel_sde: pre-step diffusion then the ddpm-shaped map
      cov += ((1.0 - alpha) / 2.0) * eye;
      mean = A * mean + b;
      cov = A * cov * A.transpose() + ((1.0 - alpha) / (2.0 * alpha)) * eye;
    }
  }
  return make_affine_law(mean, cov);
}

}  // namespace difflab
