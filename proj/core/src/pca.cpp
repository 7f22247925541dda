#include <iholo/error.hpp>
#include <iholo/retrieval.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace iholo::retrieval {
namespace {

constexpr Eigen::Index kDirectLimit = 256;

Eigenpairs direct_eigenpairs(const Eigen::MatrixXd &gamma, Eigen::Index count) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  if (es.info() != Eigen::Success) throw numeric_error("eigen decomposition failed");
  const Eigen::Index n = gamma.rows();
  Eigenpairs out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (Eigen::Index j = 0; j < count; ++j) {
    out.values[j] = es.eigenvalues()[n - 1 - j];
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  return out;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd &m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

} // namespace

Eigenpairs leading_eigenpairs(const Eigen::MatrixXd &gamma, std::size_t count, std::size_t subspace,
                              int max_iterations, double tolerance) {
  const Eigen::Index n = gamma.rows();
  if (gamma.cols() != n || n == 0) throw config_error("eigenpairs need a non-empty square matrix");
  auto want = static_cast<Eigen::Index>(count);
  if (want < 1 || want > n) throw config_error("requested more eigenpairs than the matrix has");
  auto k = std::max(want, std::min<Eigen::Index>(static_cast<Eigen::Index>(subspace), n));
  if (n <= kDirectLimit || k >= n) return direct_eigenpairs(gamma, want);

  std::mt19937_64 rng(0x1f2e3d4c5b6a7988ULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd Q(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) Q(i, j) = normal(rng);
  Q = orthonormalize(Q);

  Eigenpairs out;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd Y = gamma * Q;
    Eigen::MatrixXd T = Q.transpose() * Y;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (T + T.transpose()));
    // Descending Ritz pairs.
    Eigen::MatrixXd S = es.eigenvectors().rowwise().reverse();
    Eigen::VectorXd theta = es.eigenvalues().reverse();
    Eigen::MatrixXd V = Q * S;
    Eigen::MatrixXd GV = Y * S;
    double scale = std::max(std::abs(theta[0]), 1e-300);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < want; ++j)
      worst = std::max(worst, (GV.col(j) - theta[j] * V.col(j)).norm() / scale);
    out.values = theta.head(want);
    out.vectors = V.leftCols(want);
    out.iterations = it;
    if (worst <= tolerance) return out;
    Q = orthonormalize(GV);
  }
  return out;
}

Holograms tensor_cross_sections(const corr::CorrelationTensor &tensor, std::uint64_t min_count) {
  const std::size_t P = tensor.grid.size();
  std::vector<std::uint64_t> column(P, 0);
  for (const auto &[k, n] : tensor.counts) column[k % P] += n;
  Holograms h;
  std::vector<Eigen::Index> slot(P, -1);
  for (std::size_t r2 = 0; r2 < P; ++r2)
    if (column[r2] > 0 && column[r2] >= min_count) {
      slot[r2] = static_cast<Eigen::Index>(h.right_pixels.size());
      h.right_pixels.push_back(r2);
    }
  h.columns = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P),
                                    static_cast<Eigen::Index>(h.right_pixels.size()));
  for (const auto &[k, n] : tensor.counts)
    if (slot[k % P] >= 0) h.columns(static_cast<Eigen::Index>(k / P), slot[k % P]) += static_cast<double>(n);
  return h;
}

RetrievalResult pca_retrieve_2d(const PixelGrid &grid, const Eigen::MatrixXd &holograms,
                                const PcaOptions &options) {
  const auto P = static_cast<Eigen::Index>(grid.size());
  if (holograms.rows() != P) throw config_error("hologram rows must match the grid pixel count");
  if (holograms.cols() < 3 || P < 3)
    throw Error(ErrorKind::no_data, "principal-component retrieval needs at least 3 holograms");
  if (!holograms.allFinite()) throw config_error("holograms contain non-finite values");

  const Eigen::MatrixXd gamma = holograms * holograms.transpose();
  const std::size_t keep = std::min<std::size_t>(std::max<std::size_t>(options.subspace, 3),
                                                 static_cast<std::size_t>(P));
  Eigenpairs eig = leading_eigenpairs(gamma, keep, options.subspace, options.max_iterations,
                                      options.tolerance);
  const Eigen::VectorXd &s = eig.values;
  if (!(s[0] > 0.0)) throw Error(ErrorKind::no_data, "holograms are all zero");
  if (!(s[1] > options.diversity_tolerance * s[0]))
    throw numeric_error("no phase diversity: the holograms span a single component");

  Eigen::VectorXd u1 = eig.vectors.col(0);
  if (u1.sum() < 0) u1 = -u1;
  const Eigen::VectorXd u2 = eig.vectors.col(1), u3 = eig.vectors.col(2);

  RetrievalResult r;
  r.grid = grid;
  r.phase.resize(static_cast<std::size_t>(P));
  r.amplitude.resize(static_cast<std::size_t>(P));
  r.valid.resize(static_cast<std::size_t>(P));
  Eigen::Index bright = 0;
  for (Eigen::Index i = 0; i < P; ++i) {
    r.phase[i] = std::atan2(u2[i], u3[i]);
    r.amplitude[i] = std::hypot(u2[i], u3[i]);
    if (r.amplitude[i] > r.amplitude[bright]) bright = i;
  }
  // Gauge: the brightest pixel's phase lies in [0, pi).
  int sign = r.phase[bright] < 0.0 ? -1 : 1;
  const double peak = r.amplitude[bright];
  for (Eigen::Index i = 0; i < P; ++i) {
    r.phase[i] = wrap_phase(sign * r.phase[i]);
    r.valid[i] = r.amplitude[i] >= options.amplitude_floor * peak;
  }
  r.gauge = {sign, 0.0};
  r.singular_values.assign(s.data(), s.data() + s.size());
  const double negative = (u1.array() < -1e-9 * u1.cwiseAbs().maxCoeff()).cast<double>().sum();
  r.diagnostics = {{"method", "pca"},
                   {"holograms", holograms.cols()},
                   {"iterations", eig.iterations},
                   {"reference_pixel", bright},
                   {"amplitude_floor", options.amplitude_floor},
                   {"quadrature_ratio", s[2] / s[1]},
                   {"leading_negative_pixels", negative}};
  return r;
}

RetrievalResult pca_retrieve_2d(const corr::CorrelationTensor &tensor, const PcaOptions &options) {
  if (tensor.total == 0) throw Error(ErrorKind::no_data, "no coincidences");
  Holograms h = tensor_cross_sections(tensor, options.min_count);
  RetrievalResult r = pca_retrieve_2d(tensor.grid, h.columns, options);
  r.diagnostics["min_count"] = options.min_count;
  r.diagnostics["cross_sections_used"] = h.right_pixels.size();
  return r;
}

} // namespace iholo::retrieval
