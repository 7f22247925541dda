#pragma once

#include <iholo/correlator.hpp>
#include <iholo/field.hpp>
#include <iholo/grid.hpp>
#include <iholo/phase_mask.hpp>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

/// Phase and amplitude reconstruction from intensity-correlation data.
namespace iholo::retrieval {

/// Retrieved phase relates to the true one as phi_true = sign * phi + offset.
struct Gauge {
  int sign{1};
  double offset{0.0};
};

struct RetrievalResult {
  PixelGrid grid{1, 1};
  std::vector<double> phase;     ///< canonical (-pi, pi]
  std::vector<double> amplitude;
  std::vector<std::uint8_t> valid; ///< 0 where amplitude is below the floor
  Gauge gauge{};
  std::vector<double> singular_values;
  nlohmann::json diagnostics = nlohmann::json::object();

  PhaseMask phase_mask() const { return {grid, phase}; }
};

struct FourierOptions {
  double k0{0.62};
  std::optional<double> window_sigma; ///< rad/px; default k0 / 4
  /// Upper bound on carrier refinements: after each pass the carrier is
  /// replaced by a weighted quadratic fit of the recovered phase, which removes
  /// the curvature bias of a fixed Gaussian window on chirped fringes. Stops
  /// early once the carrier's local frequency changes by less than
  /// refine_tolerance (rad/px) everywhere. 0 gives the plain fixed-carrier filter.
  int refinements{100};
  double refine_tolerance{1e-6};
  double amplitude_floor{0.05}; ///< fraction of the peak amplitude
};

/// Off-axis filtering of the x-marginal G(x1, x2) (rows x1). NaN entries are
/// treated as zero. The returned phase has k0 x removed; grid is width x 1.
RetrievalResult fourier_retrieve_1d(const Eigen::MatrixXd &gx, const FourierOptions &options);

/// Removes 2 pi jumps between neighbours.
std::vector<double> unwrap(std::span<const double> phase);

struct QuadraticFit {
  double a{0.0};
  double b{0.0};
  double c{0.0};
  double a_stderr{0.0};
  std::size_t points{0};
  double rms_residual{0.0};
};

/// Weighted least squares of a x^2 + b x + c on the unwrapped phase. Points
/// with zero weight or non-finite phase are skipped; x is taken relative to
/// `center` (so c is the phase there).
QuadraticFit fit_quadratic(std::span<const double> phase, std::span<const double> weights,
                           double center = 0.0);

struct PcaOptions {
  std::uint64_t min_count{10}; ///< cross-sections with fewer counts are dropped
  std::size_t subspace{8};     ///< Ritz vectors carried by the eigensolver
  int max_iterations{500};
  double tolerance{1e-13};
  double amplitude_floor{0.05};
  /// sigma_2 / sigma_1 below which the data show no phase diversity.
  double diversity_tolerance{1e-9};
};

/// Principal-component retrieval from holograms stored as columns of
/// `holograms` (rows are pixels of `grid`). Builds
/// Gamma = sum_n I_n I_n^T, drops its leading component and reads
/// phi = atan2(u_2, u_3). Gauge convention: sign chosen so that the phase of
/// the brightest pixel lies in [0, pi); offset 0.
RetrievalResult pca_retrieve_2d(const PixelGrid &grid, const Eigen::MatrixXd &holograms,
                                const PcaOptions &options = {});

/// Cross-sections C(., r2) for every right pixel with at least min_count.
RetrievalResult pca_retrieve_2d(const corr::CorrelationTensor &tensor,
                                const PcaOptions &options = {});

struct Holograms {
  Eigen::MatrixXd columns;
  std::vector<std::size_t> right_pixels;
};

Holograms tensor_cross_sections(const corr::CorrelationTensor &tensor, std::uint64_t min_count);

struct Eigenpairs {
  Eigen::VectorXd values;  ///< descending
  Eigen::MatrixXd vectors; ///< columns
  int iterations{0};
};

/// Leading `count` eigenpairs of a symmetric positive semidefinite matrix.
/// Dense solver up to 256 rows, block subspace iteration with Rayleigh-Ritz
/// projection above that.
Eigenpairs leading_eigenpairs(const Eigen::MatrixXd &gamma, std::size_t count,
                              std::size_t subspace, int max_iterations, double tolerance);

struct AlignedPhase {
  Gauge gauge{};
  std::vector<double> phase; ///< sign * estimate + offset, canonical
  double rmse{0.0};          ///< circular residual over the used pixels
};

/// Best sign and offset mapping `estimate` onto `truth`, over pixels where
/// `mask` is nonzero (all when empty).
AlignedPhase align_gauge(std::span<const double> estimate, std::span<const double> truth,
                         std::span<const std::uint8_t> mask = {});

struct VisibilityFit {
  double V{0.0};
  double V_stderr{0.0};
  double A_fit{0.0}; ///< 4 c0
  double c0{0.0};
  double c1{0.0};
  double k0_fit{0.0};
  double curvature{0.0}; ///< q in q[(x1 - xc)^2 - (x2 - xc)^2]
  double phase_offset{0.0};
  double center{0.0};
  double reduced_chi2{0.0};
  int iterations{0};
  bool converged{false};
};

struct VisibilityFitOptions {
  double k0_hint{0.62};
  double curvature_hint{0.0};
  bool fit_curvature{true};
  std::optional<double> center; ///< default (W - 1) / 2
};

/// Fits c0 - c1 cos[k (x1 - x2) + q((x1 - xc)^2 - (x2 - xc)^2) + p] to a
/// normalized x-marginal; V = c1 / c0. NaN entries are skipped; `weights`
/// (same shape, e.g. raw counts) default to uniform.
VisibilityFit fit_visibility(const Eigen::MatrixXd &gtilde_x, const VisibilityFitOptions &options,
                             const Eigen::MatrixXd *weights = nullptr);

/// sqrt(-2 ln R), R the mean resultant length.
double circular_std(std::span<const double> phases);

/// Pixel index lists of the squares of a checkerboard layout, row-major by tile.
std::vector<std::vector<std::size_t>> checkerboard_regions(const PixelGrid &grid, int square);
/// The `count` tiles whose centres are closest to the grid centre.
std::vector<std::size_t> central_regions(const PixelGrid &grid, int square,
                                         std::size_t count = 4);

struct PhasePrecision {
  std::vector<double> per_region; ///< NaN for regions without valid pixels
  double mean_central{0.0};
};

PhasePrecision phase_precision(const RetrievalResult &result,
                               std::span<const std::vector<std::size_t>> regions,
                               std::span<const std::size_t> central);

/// |<psi_1|psi_2>|^2 / (<psi_1|psi_1> <psi_2|psi_2>).
double mode_fidelity(const ComplexField &a, const ComplexField &b);

struct PowerLawFit {
  double exponent{0.0};
  double prefactor{0.0};
  double exponent_stderr{0.0};
};

/// y = prefactor * x^exponent by least squares in log-log space.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

nlohmann::json to_json(const VisibilityFit &fit);

} // namespace iholo::retrieval
