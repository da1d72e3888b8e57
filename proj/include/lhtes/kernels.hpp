#pragma once

#include <array>

#include <Eigen/Dense>

#include "lhtes/mesh.hpp"
#include "lhtes/phase.hpp"

namespace lhtes {

using Vec4 = Eigen::Vector4d;

/// Effective properties of one element.
struct ElementCoeffs {
  double k = 0.0, rho = 0.0, c = 0.0, latent = 0.0;
};

struct KernelParams {
  PhaseModel phase;
  double dt = 1.0;
  bool ggls = true;
};

/// Geometric data of one element shared by all kernels.
struct ElementGeometry {
  const std::array<GaussPoint, 4>* quad = nullptr;
  const Mat4* stiffness = nullptr;  // int grad(N)^T grad(N)
  double area = 0.0;
};

/// Gradient-least-squares weight xi(a) for the element number
/// a = m h^2 / (6 k dt): xi -> 1/2 for a -> 0 and xi -> 1 for a -> inf.
/// At xi = 1 the stabilized consistent mass equals the lumped mass in 1D.
double ggls_xi(double a);
double ggls_xi_slope(double a);

struct GglsWeight {
  double b = 0.0, db_dm = 0.0, db_dk = 0.0;
};
/// b = m (h^2 / 6) xi(a) and its partials.
GglsWeight ggls_weight(double m, double k, double h2, double dt);

/// Element contributions to the backward-Euler step residual
///   r(T) = sum_q w N rho [c (T_q - Tp_q) + L (f(T_q) - f(Tp_q))]
///        + sum_q w b_q grad(N)^T grad(N) (T - T_prev) + dt k K T,
/// f the melt fraction, b_q the stabilization weight at the capacity
/// m(Tp_q) = rho (c + L / width * Pi(Tp_q)) of the previous state. The
/// capacity term is an enthalpy difference, so latent heat is released in
/// full even when a step jumps across the melting range.
///
/// J is dr/dT: sum_q w [m(T_q) N N^T + b_q grad(N)^T grad(N)] + dt k K,
/// symmetric positive definite. `load` is sum_q w m(Tp_q) Tp_q N, the scale
/// used by the convergence test.
void element_step(const ElementGeometry& g, const ElementCoeffs& c,
                  const KernelParams& p, const Vec4& T, const Vec4& T_prev,
                  Mat4& J, Vec4& r, Vec4& load);

/// -(dr/dT_prev)^T lambda, the right-hand side handed from one adjoint step
/// to the previous one.
Vec4 element_previous_coupling(const ElementGeometry& g, const ElementCoeffs& c,
                               const KernelParams& p, const Vec4& T,
                               const Vec4& T_prev, const Vec4& lambda);

/// lambda^T dr/d(property) for one element.
struct ElementSensitivity {
  double k = 0.0, rho = 0.0, c = 0.0, latent = 0.0, melt_temp = 0.0;
};
ElementSensitivity element_sensitivity(const ElementGeometry& g,
                                       const ElementCoeffs& c,
                                       const KernelParams& p, const Vec4& T,
                                       const Vec4& T_prev, const Vec4& lambda);

}  // namespace lhtes
