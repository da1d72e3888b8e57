#pragma once

#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "lhtes/exec.hpp"
#include "lhtes/mesh.hpp"
#include "lhtes/vae.hpp"

namespace lhtes {

inline constexpr double kLatentBound = 3.0;

/// Optimization variables: per-element pseudo-density (1 = PCM, 0 = HCM)
/// and one latent coordinate per material class.
struct DesignState {
  std::vector<double> gamma;
  Vec2 z_hcm{0.0, 0.0};
  Vec2 z_pcm{0.0, 0.0};

  std::size_t variable_count() const { return gamma.size() + 2 * kLatentDim; }
  /// Projects onto gamma in [0,1], z in [-3,3]^2.
  void clamp_to_bounds();
};

/// Linear hat-kernel density filter on element centroid distances,
/// row-normalized.
class FilterOperator {
 public:
  FilterOperator() = default;
  FilterOperator(const QuadMesh& mesh, double radius);

  std::vector<double> apply(std::span<const double> x,
                            Exec exec = Exec::serial) const;
  /// W^T y, used to pull gradients back through the filter.
  std::vector<double> apply_transpose(std::span<const double> y,
                                      Exec exec = Exec::serial) const;

  double radius() const { return radius_; }
  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights() const {
    return w_;
  }

 private:
  double radius_ = 0.0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> w_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> wt_;
};

/// Threshold projection
///   H(x) = (tanh(b*eta) + tanh(b*(x - eta))) / (tanh(b*eta) + tanh(b*(1 - eta)))
/// which degenerates to the identity as b -> 0.
double project(double x, double beta, double eta = 0.5);
double project_derivative(double x, double beta, double eta = 0.5);
std::vector<double> project(std::span<const double> x, double beta,
                            double eta = 0.5);

struct HcmProperties {
  double k = 0.0, c_p = 0.0, rho = 0.0, cost = 0.0;
  static HcmProperties from_attributes(std::span<const double> a);
};

struct PcmProperties {
  double k = 0.0, c_p = 0.0, rho = 0.0, latent = 0.0, melt_temp = 0.0;
  static PcmProperties from_attributes(std::span<const double> a);
};

/// Element-wise effective properties plus the global phase-change data.
struct EffectiveProperties {
  std::vector<double> k, c, rho, latent;
  double melt_temp = 0.0;

  std::size_t size() const { return k.size(); }
};

/// SIMP on conductivity, linear on c, rho; latent heat gamma * L_PCM; the
/// melting temperature is the PCM's.
EffectiveProperties interpolate(std::span<const double> gamma,
                                const HcmProperties& hcm,
                                const PcmProperties& pcm, double penal);

/// Sensitivities of a scalar with respect to the element-wise effective
/// properties (and the global melting temperature).
struct PropertyGradient {
  std::vector<double> k, c, rho, latent;
  double melt_temp = 0.0;

  explicit PropertyGradient(std::size_t n = 0)
      : k(n, 0.0), c(n, 0.0), rho(n, 0.0), latent(n, 0.0) {}
  PropertyGradient& operator+=(const PropertyGradient& o);
};

struct InterpolationPullback {
  std::vector<double> gamma;
  std::array<double, 4> hcm{};  // k, c_p, rho, cost
  std::array<double, 5> pcm{};  // k, c_p, rho, L, T_m
};

/// Reverse-mode pass through `interpolate`.
InterpolationPullback interpolation_pullback(std::span<const double> gamma,
                                             const HcmProperties& hcm,
                                             const PcmProperties& pcm,
                                             double penal,
                                             const PropertyGradient& grad);

}  // namespace lhtes
