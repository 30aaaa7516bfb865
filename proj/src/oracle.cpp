#include "dpir/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "dpir/rng.hpp"

namespace dpir {

namespace {

// Gaussian conditioning of x0 on z = C x0 + noise, noise ~ N(0, R).
// Solves through the innovation factorization instead of forming inverses.
GaussianDist condition_on(const LinearGaussianWorld& w,
                          const Eigen::MatrixXd& C, const Eigen::MatrixXd& R,
                          const Eigen::VectorXd& z) {
  if (C.cols() != w.signal_dim() || z.size() != C.rows())
    throw std::invalid_argument("condition_on: dimension mismatch");
  const Eigen::MatrixXd CS = C * w.Sigma0;           // m x n
  Eigen::MatrixXd innov = CS * C.transpose() + R;    // m x m
  innov = 0.5 * (innov + innov.transpose().eval());
  Eigen::LLT<Eigen::MatrixXd> llt(innov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("condition_on: innovation matrix not SPD");
  GaussianDist d;
  d.mean = w.mu0 + CS.transpose() * llt.solve(z - C * w.mu0);
  d.cov = w.Sigma0 - CS.transpose() * llt.solve(CS);
  d.cov = 0.5 * (d.cov + d.cov.transpose().eval());
  return d;
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

LinearGaussianWorld make_validated_world(Eigen::VectorXd mu0,
                                         Eigen::MatrixXd Sigma0,
                                         Eigen::MatrixXd A, double sigma_y,
                                         bool allow_out_of_range,
                                         std::uint64_t seed) {
  const Eigen::Index N = mu0.size();
  if (Sigma0.rows() != N || Sigma0.cols() != N)
    throw std::invalid_argument("world: Sigma0 must be N x N");
  if (A.cols() != N)
    throw std::invalid_argument("world: A must have N columns");
  if ((Sigma0 - Sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("world: Sigma0 not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma0);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("world: Sigma0 not positive definite");
  if (!(sigma_y > 0.0))
    throw std::invalid_argument("world: sigma_y must be positive");
  if (!allow_out_of_range) {
    if (sigma_y > 1.0)
      throw std::invalid_argument(
          "world: sigma_y > 1 requires the out-of-range override");
    if (spectral_norm(A) > 1.0 + 1e-12)
      throw std::invalid_argument(
          "world: spectral norm of A exceeds 1; use the override to allow");
  }
  LinearGaussianWorld w;
  w.mu0 = std::move(mu0);
  w.Sigma0 = std::move(Sigma0);
  w.A = std::move(A);
  w.sigma_y = sigma_y;
  w.seed = seed;
  return w;
}

LinearGaussianWorld make_world(int N, int M, std::uint64_t seed,
                               double spectral_cap, bool allow_out_of_range) {
  if (N < 1 || M < 1)
    throw std::invalid_argument("make_world: N, M must be >= 1");
  if (spectral_cap > 1.0 && !allow_out_of_range)
    throw std::invalid_argument(
        "make_world: spectral_cap > 1 requires the out-of-range override");

  NormalStream gauss(seed, 0);
  Eigen::MatrixXd A(M, N);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < N; ++j) A(i, j) = gauss.next();
  A *= spectral_cap / spectral_norm(A);

  Eigen::MatrixXd G(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) G(i, j) = gauss.next();
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  Eigen::VectorXd evals(N);
  for (Eigen::Index i = 0; i < N; ++i) evals[i] = gauss.uniform(0.1, 2.0);
  Eigen::MatrixXd Sigma0 = Q * evals.asDiagonal() * Q.transpose();
  Sigma0 = 0.5 * (Sigma0 + Sigma0.transpose().eval());

  Eigen::VectorXd mu0 = gauss.vector(N);
  // sigma_y uniform in (0.05, 1]; stays inside the validated regime.
  const double sigma_y = 0.05 + 0.95 * gauss.uniform();
  return make_validated_world(std::move(mu0), std::move(Sigma0), std::move(A),
                              sigma_y, allow_out_of_range, seed);
}

GaussianDist cond_x0_given_y(const LinearGaussianWorld& w,
                             const Eigen::VectorXd& y) {
  const Eigen::Index M = w.obs_dim();
  const Eigen::MatrixXd R =
      w.sigma_y * w.sigma_y * Eigen::MatrixXd::Identity(M, M);
  return condition_on(w, w.A, R, y);
}

GaussianDist cond_x0_given_xtilde(const LinearGaussianWorld& w,
                                  const Eigen::VectorXd& x_tilde,
                                  double sigma_tilde) {
  if (sigma_tilde < 0.0)
    throw std::invalid_argument("cond_x0_given_xtilde: negative sigma");
  if (x_tilde.size() != w.signal_dim())
    throw std::invalid_argument("cond_x0_given_xtilde: dimension mismatch");
  const Eigen::Index N = w.signal_dim();
  if (sigma_tilde == 0.0) {
    // Noiseless conditioning collapses onto the observation.
    return {x_tilde, Eigen::MatrixXd::Zero(N, N)};
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  return condition_on(w, I, sigma_tilde * sigma_tilde * I, x_tilde);
}

GaussianDist cond_x0_given_xt(const LinearGaussianWorld& w,
                              const NoiseSchedule& s,
                              const Eigen::VectorXd& xt, int t) {
  const Eigen::Index N = w.signal_dim();
  const double ab = s.alpha_bar(t);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  return condition_on(w, std::sqrt(ab) * I, (1.0 - ab) * I, xt);
}

GaussianDist cond_x0_given_y_xt(const LinearGaussianWorld& w,
                                const NoiseSchedule& s,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& xt, int t) {
  const Eigen::Index N = w.signal_dim();
  const Eigen::Index M = w.obs_dim();
  const double ab = s.alpha_bar(t);

  Eigen::MatrixXd C(M + N, N);
  C.topRows(M) = w.A;
  C.bottomRows(N) = std::sqrt(ab) * Eigen::MatrixXd::Identity(N, N);

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(M + N, M + N);
  R.topLeftCorner(M, M) =
      w.sigma_y * w.sigma_y * Eigen::MatrixXd::Identity(M, M);
  R.bottomRightCorner(N, N) = (1.0 - ab) * Eigen::MatrixXd::Identity(N, N);

  Eigen::VectorXd z(M + N);
  z.head(M) = y;
  z.tail(N) = xt;
  return condition_on(w, C, R, z);
}

Eigen::VectorXd analytic_score_xt_given_y(const LinearGaussianWorld& w,
                                          const NoiseSchedule& s,
                                          const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& xt, int t) {
  const GaussianDist post = cond_x0_given_y(w, y);
  const double ab = s.alpha_bar(t);
  const Eigen::Index N = w.signal_dim();
  Eigen::MatrixXd cov =
      ab * post.cov + (1.0 - ab) * Eigen::MatrixXd::Identity(N, N);
  cov = 0.5 * (cov + cov.transpose().eval());
  const Eigen::VectorXd resid = xt - std::sqrt(ab) * post.mean;
  return -Eigen::LLT<Eigen::MatrixXd>(cov).solve(resid);
}

double backprojection_mse(const LinearGaussianWorld& w,
                          const Eigen::VectorXd& x0) {
  if (x0.size() != w.signal_dim())
    throw std::invalid_argument("backprojection_mse: dimension mismatch");
  const Eigen::VectorXd resid = x0 - w.A.transpose() * (w.A * x0);
  return resid.squaredNorm() + w.sigma_y * w.sigma_y * w.A.squaredNorm();
}

double convex_estimate_mse(const LinearGaussianWorld& w, const NoiseSchedule& s,
                           const Eigen::VectorXd& x0, double weight, int t) {
  if (!(weight > 0.0 && weight < 1.0))
    throw std::invalid_argument("convex_estimate_mse: weight must be in (0,1)");
  const double n = static_cast<double>(w.signal_dim());
  return weight * weight * backprojection_mse(w, x0) +
         (1.0 - weight) * (1.0 - weight) * s.tilde_sigma2(t) * n;
}

std::optional<int> find_activation_tau(const LinearGaussianWorld& w,
                                       const NoiseSchedule& s,
                                       const Eigen::VectorXd& x0,
                                       double weight) {
  if (!(weight > 0.0 && weight < 1.0))
    throw std::invalid_argument("find_activation_tau: weight must be in (0,1)");
  const double lhs = backprojection_mse(w, x0);
  const double n = static_cast<double>(w.signal_dim());
  // lhs <= w^2 lhs + (1-w)^2 sigma~^2 n  <=>  sigma~^2 >= threshold.
  const double threshold =
      (1.0 - weight * weight) * lhs / ((1.0 - weight) * (1.0 - weight) * n);
  if (s.tilde_sigma2(s.steps()) < threshold) return std::nullopt;
  int lo = 1, hi = s.steps();  // first t with tilde_sigma2(t) >= threshold
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (s.tilde_sigma2(mid) >= threshold)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo - 1;
}

double trace_quadratic(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& B) {
  if (B.rows() != sigma.size() || B.cols() != sigma.size())
    throw std::invalid_argument("trace_quadratic: dimension mismatch");
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("trace_quadratic: sigma must be positive");
  return (sigma.array().square() * B.diagonal().array()).sum();
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj)
      m(i, jj) = j[i][jj].get<double>();
  return m;
}

}  // namespace

std::string world_to_json(const LinearGaussianWorld& w) {
  nlohmann::json j;
  j["N"] = w.signal_dim();
  j["M"] = w.obs_dim();
  j["mu0"] = std::vector<double>(w.mu0.begin(), w.mu0.end());
  j["Sigma0"] = matrix_to_json(w.Sigma0);
  j["A"] = matrix_to_json(w.A);
  j["sigma_y"] = w.sigma_y;
  j["seed"] = w.seed;
  return j.dump(2);
}

LinearGaussianWorld world_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const auto N = j.at("N").get<Eigen::Index>();
  const auto M = j.at("M").get<Eigen::Index>();
  const auto mu = j.at("mu0").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(mu.size()) != N)
    throw std::invalid_argument("world json: mu0 length != N");
  Eigen::VectorXd mu0 = Eigen::Map<const Eigen::VectorXd>(mu.data(), N);
  Eigen::MatrixXd Sigma0 = matrix_from_json(j.at("Sigma0"));
  Eigen::MatrixXd A = matrix_from_json(j.at("A"));
  if (A.rows() != M)
    throw std::invalid_argument("world json: A rows != M");
  return make_validated_world(std::move(mu0), std::move(Sigma0), std::move(A),
                              j.at("sigma_y").get<double>(),
                              /*allow_out_of_range=*/true,
                              j.value("seed", std::uint64_t{0}));
}

}  // namespace dpir
