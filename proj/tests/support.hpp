#pragma once

// Shared test scaffolding.  The quadrature oracles here are deliberately
// independent of the closed forms in samplers.cpp: they evaluate the
// defining integrals directly so the tests cross-check derivation, not
// transcription.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <difflab/oracle.hpp>
#include <difflab/schedule.hpp>

namespace testsupport {

// integral_a^b w(gamma) gamma^{-3/2} (1 - gamma)^{-1/2} dgamma, mapped to
// the unit interval so the adaptive error estimate is scale-free.  w == 1
// gives the plain eps weight; w(gamma) = gamma - abar_t the
// accelerated-correction numerator.
template <class W>
double kernel_integral(double a, double b, W w) {
  auto f = [&](double u) {
    const double g = a + (b - a) * u;
    return w(g) * std::pow(g, -1.5) / std::sqrt(1.0 - g) * (b - a);
  };
  double err = 0.0;
  const double val =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 12, 1e-14, &err);
  if (!(err < 1e-12 * std::max(1.0, std::abs(val))))
    throw std::runtime_error("coefficient quadrature did not converge");
  return val;
}

// ddim_eps_coeff(t) from its defining integral.
inline double eps_coeff_quadrature(const difflab::NoiseSchedule& s, int t) {
  const double a = s.abar(t), b = s.abar(t - 1);
  return -0.5 * std::sqrt(b) * kernel_integral(a, b, [](double) { return 1.0; });
}

// accel_ct(t) from its defining integral.
inline double accel_ct_quadrature(const difflab::NoiseSchedule& s, int t) {
  const double a = s.abar(t), b = s.abar(t - 1), an = s.abar(t + 1);
  return 0.5 * std::sqrt(b) / (a - an) *
         kernel_integral(a, b, [a](double g) { return g - a; });
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline std::shared_ptr<difflab::ScoreOracle> zero_oracle(const difflab::NoiseSchedule& s,
                                                         int d) {
  return difflab::callable_oracle(
      s, d, [d](int, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(d).eval(); });
}

// Oracle whose eps_t(x) is the constant vector e, i.e. the score is
// -e / sqrt(1 - abar_t).
inline std::shared_ptr<difflab::ScoreOracle> constant_eps_oracle(const difflab::NoiseSchedule& s,
                                                                 int d, const Eigen::VectorXd& e) {
  return difflab::callable_oracle(s, d, [&s, e](int t, const Eigen::VectorXd&) {
    return (-e / std::sqrt(1.0 - s.abar(t))).eval();
  });
}

class TempFile {
 public:
  explicit TempFile(const std::string& suffix = "") {
    static std::atomic<int> counter{0};
    std::ostringstream ss;
    ss << "/tmp/difflab_test_" << ::getpid() << "_" << counter.fetch_add(1) << suffix;
    path_ = ss.str();
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() { std::remove(path_.c_str()); }

  const std::string& path() const { return path_; }

  void write(const std::string& contents) const {
    std::ofstream out(path_, std::ios::binary);
    out << contents;
  }

  std::string read() const {
    std::ifstream in(path_, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  std::string path_;
};

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the installed-tree CLI (path from DIFFLAB_CLI) with the given
// argument string; captures exit code, stdout, stderr.
inline CliResult run_cli(const std::string& args) {
  const char* cli = std::getenv("DIFFLAB_CLI");
  if (!cli) throw std::runtime_error("DIFFLAB_CLI not set");
  TempFile out_file(".out"), err_file(".err");
  const std::string cmd =
      std::string(cli) + " " + args + " >" + out_file.path() + " 2>" + err_file.path();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = out_file.read();
  r.err = err_file.read();
  return r;
}

}  // namespace testsupport
