#include "stouf/network.hpp"

#include <charconv>
#include <cmath>

namespace stouf {

Eigen::Index Architecture::param_count() const {
  Eigen::Index d = 0;
  int prev = input_dim;
  for (int w : hidden) {
    d += static_cast<Eigen::Index>(prev) * w + w;  // weights + bias
    prev = w;
  }
  d += prev;  // output layer 1 x n_l, no bias
  return d;
}

std::string Architecture::to_string() const {
  return std::to_string(hidden.empty() ? 0 : hidden.front()) + "^" +
         std::to_string(hidden.size());
}

void Architecture::validate() const {
  if (input_dim < 1) throw ConfigError("network input dimension must be >= 1");
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden width must be >= 1");
}

Architecture Architecture::parse(const std::string& s, int input_dim) {
  auto caret = s.find('^');
  if (caret == std::string::npos) throw ConfigError("bad architecture (want \"w^l\"): " + s);
  int w = 0, l = 0;
  auto r1 = std::from_chars(s.data(), s.data() + caret, w);
  auto r2 = std::from_chars(s.data() + caret + 1, s.data() + s.size(), l);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != s.data() + caret ||
      r2.ptr != s.data() + s.size() || w < 1 || l < 1)
    throw ConfigError("bad architecture (want \"w^l\"): " + s);
  Architecture arch;
  arch.input_dim = input_dim;
  arch.hidden.assign(static_cast<std::size_t>(l), w);
  arch.validate();
  return arch;
}

UnpackedParams unpack(const Architecture& arch, const Eigen::VectorXd& theta) {
  if (theta.size() != arch.param_count())
    throw ConfigError("parameter vector length does not match architecture");
  UnpackedParams p;
  Eigen::Index off = 0;
  int prev = arch.input_dim;
  for (int w : arch.hidden) {
    Eigen::MatrixXd W(w, prev);
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < prev; ++c) W(r, c) = theta(off++);
    p.W.push_back(std::move(W));
    p.b.push_back(theta.segment(off, w));
    off += w;
    prev = w;
  }
  Eigen::MatrixXd Wout(1, prev);
  for (int c = 0; c < prev; ++c) Wout(0, c) = theta(off++);
  p.W.push_back(std::move(Wout));
  return p;
}

Eigen::VectorXd pack(const Architecture& arch, const UnpackedParams& p) {
  Eigen::VectorXd theta(arch.param_count());
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    const auto& W = p.W[i];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) theta(off++) = W(r, c);
    if (i < p.b.size()) {
      theta.segment(off, p.b[i].size()) = p.b[i];
      off += p.b[i].size();
    }
  }
  return theta;
}

double forward(const Architecture& arch, const Eigen::VectorXd& theta,
               const Eigen::VectorXd& x) {
  if (x.size() != arch.input_dim) throw ConfigError("input vector length mismatch");
  const auto p = unpack(arch, theta);
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i + 1 < p.W.size(); ++i)
    h = (p.W[i] * h + p.b[i]).cwiseMax(0.0);
  return (p.W.back() * h)(0);
}

Eigen::VectorXd backward(const Architecture& arch, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double y, double epsilon) {
  if (x.size() != arch.input_dim) throw ConfigError("input vector length mismatch");
  const auto p = unpack(arch, theta);
  const std::size_t L = p.W.size();

  std::vector<Eigen::VectorXd> act(L);  // act[i] = input to layer i
  act[0] = x;
  std::vector<Eigen::VectorXd> pre(L - 1);
  for (std::size_t i = 0; i + 1 < L; ++i) {
    pre[i] = p.W[i] * act[i] + p.b[i];
    act[i + 1] = pre[i].cwiseMax(0.0);
  }
  const double out = (p.W.back() * act[L - 1])(0);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  const double diff = out - y;
  // Subgradient 0 at both kinks of min(|diff|, epsilon).
  if (diff == 0.0 || std::abs(diff) >= epsilon) return grad;
  const double g_out = diff > 0.0 ? 1.0 : -1.0;

  UnpackedParams gp;
  gp.W.resize(L);
  gp.b.resize(L - 1);
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, g_out);
  gp.W[L - 1] = delta * act[L - 1].transpose();
  for (std::size_t i = L - 1; i-- > 0;) {
    Eigen::VectorXd back = p.W[i + 1].transpose() * delta;
    delta = back.cwiseProduct((pre[i].array() > 0.0).cast<double>().matrix());
    gp.W[i] = delta * act[i].transpose();
    gp.b[i] = delta;
  }
  return pack(arch, gp);
}

double spectral_norm(const Eigen::MatrixXd& m, double tol, int max_iter) {
  if (m.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.cols()).normalized();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd u = m * v;
    const double n = u.norm();
    if (n == 0.0) return 0.0;
    v = m.transpose() * (u / n);
    const double s = v.norm();
    if (s == 0.0) return 0.0;
    v /= s;
    if (std::abs(s - sigma) <= tol * std::max(1.0, s)) return s;
    sigma = s;
  }
  return sigma;
}

double lipschitz_bound(const Architecture& arch, const Eigen::VectorXd& theta) {
  const auto p = unpack(arch, theta);
  double prod = 1.0;
  for (const auto& W : p.W) prod *= spectral_norm(W);
  return prod;
}

Eigen::VectorXd GaussianPosterior::kappa() const {
  return raw_kappa.unaryExpr([](double r) {
    const double sp = softplus(r);
    return sp * sp;
  });
}

GaussianPosterior GaussianPosterior::initial(Eigen::Index d) {
  GaussianPosterior rho;
  rho.mu = Eigen::VectorXd::Zero(d);
  rho.raw_kappa = Eigen::VectorXd::Constant(d, softplus_inv(0.5));  // kappa = 1/4
  return rho;
}

double kl(const GaussianPosterior& rho, const ReferenceDistribution& pi) {
  if (!(pi.s > 0.0)) throw ConfigError("reference variance s must be positive");
  const Eigen::ArrayXd k = rho.kappa().array();
  return 0.5 * ((pi.s / k).log() - 1.0 + k / pi.s +
                rho.mu.array().square() / pi.s)
                   .sum();
}

ThetaDraw sample_theta(const GaussianPosterior& rho, RandomStream& rng) {
  ThetaDraw d;
  d.eps.resize(rho.mu.size());
  for (Eigen::Index i = 0; i < d.eps.size(); ++i) d.eps(i) = rng.gaussian();
  d.theta = rho.mu.array() + rho.kappa().array().sqrt() * d.eps.array();
  return d;
}

double mc_lip_reference(const Architecture& arch, const ReferenceDistribution& pi, int n,
                        RandomStream& rng) {
  if (n < 1) throw ConfigError("mc_lip draws must be >= 1");
  const Eigen::Index d = arch.param_count();
  const double sd = std::sqrt(pi.s);
  double sum = 0.0;
  Eigen::VectorXd theta(d);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) theta(j) = sd * rng.gaussian();
    sum += lipschitz_bound(arch, theta);
  }
  return sum / n;
}

}  // namespace stouf
