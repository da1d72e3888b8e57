#include "lhtes/kernels.hpp"

#include <cmath>

namespace lhtes {

namespace {

constexpr double kSeriesBelow = 0.05;

struct QuadState {
  double Tq = 0.0, Tpq = 0.0;
  double gx = 0.0, gy = 0.0;  // gradient of T - T_prev
  double m = 0.0;             // capacity at T_q
  double pi_p = 0.0, dpi_p = 0.0, mp = 0.0, dmp = 0.0;  // at Tp_q
  GglsWeight b;
};

QuadState quad_state(const GaussPoint& gp, const ElementGeometry& g,
                     const ElementCoeffs& c, const KernelParams& p,
                     const Vec4& T, const Vec4& T_prev) {
  QuadState s;
  for (int a = 0; a < 4; ++a) {
    const double d = T[a] - T_prev[a];
    s.Tq += gp.N[a] * T[a];
    s.Tpq += gp.N[a] * T_prev[a];
    s.gx += gp.dNdx[a] * d;
    s.gy += gp.dNdy[a] * d;
  }
  const double lw = c.latent / p.phase.mushy_width;
  s.m = c.rho * (c.c + lw * pulse(s.Tq, p.phase));
  s.pi_p = pulse(s.Tpq, p.phase);
  s.dpi_p = pulse_slope(s.Tpq, p.phase);
  s.mp = c.rho * (c.c + lw * s.pi_p);
  s.dmp = c.rho * lw * s.dpi_p;
  if (p.ggls) s.b = ggls_weight(s.mp, c.k, g.area, p.dt);
  return s;
}

}  // namespace

double ggls_xi(double a) {
  if (a < kSeriesBelow) {
    return 0.5 + a * (3.0 / 20 + a * (-1.0 / 28 + a * (3.0 / 400 + a * (-9.0 / 6160 + a * (691.0 / 2548000 + a * (-3.0 / 61600))))));
  }
  const double h = 0.5 * std::sqrt(6.0 * a);
  const double sh = h > 30.0 ? 0.0 : 1.0 / std::sinh(h);
  return 1.0 + 1.5 * sh * sh - 1.0 / a;
}

double ggls_xi_slope(double a) {
  if (a < kSeriesBelow) {
    return 3.0 / 20 + a * (-2.0 / 28 + a * (9.0 / 400 + a * (-36.0 / 6160 + a * (5 * 691.0 / 2548000 + a * (-18.0 / 61600)))));
  }
  const double h = 0.5 * std::sqrt(6.0 * a);
  double term = 0.0;
  if (h <= 30.0) {
    const double sh = std::sinh(h);
    term = -9.0 / (4.0 * h) * std::cosh(h) / (sh * sh * sh);
  }
  return term + 1.0 / (a * a);
}

GglsWeight ggls_weight(double m, double k, double h2, double dt) {
  const double a = m * h2 / (6.0 * k * dt);
  const double xi = ggls_xi(a);
  const double dxi = ggls_xi_slope(a);
  const double scale = h2 / 6.0;
  return {m * scale * xi, scale * (xi + a * dxi), -m * scale * dxi * a / k};
}

void element_step(const ElementGeometry& g, const ElementCoeffs& c,
                  const KernelParams& p, const Vec4& T, const Vec4& T_prev,
                  Mat4& J, Vec4& r, Vec4& load) {
  J = (p.dt * c.k) * (*g.stiffness);
  r = J * T;
  load.setZero();
  for (const auto& gp : *g.quad) {
    const QuadState s = quad_state(gp, g, c, p, T, T_prev);
    const double h = c.rho * (c.c * (s.Tq - s.Tpq) +
                              c.latent * (melt_fraction(s.Tq, p.phase) -
                                          melt_fraction(s.Tpq, p.phase)));
    const double wm = gp.weight * s.m, wb = gp.weight * s.b.b;
    for (int a = 0; a < 4; ++a) {
      r[a] += gp.weight * h * gp.N[a] + wb * (gp.dNdx[a] * s.gx + gp.dNdy[a] * s.gy);
      load[a] += gp.weight * s.mp * s.Tpq * gp.N[a];
      for (int b = 0; b < 4; ++b)
        J(a, b) += wm * gp.N[a] * gp.N[b] +
                   wb * (gp.dNdx[a] * gp.dNdx[b] + gp.dNdy[a] * gp.dNdy[b]);
    }
  }
}

Vec4 element_previous_coupling(const ElementGeometry& g, const ElementCoeffs& c,
                               const KernelParams& p, const Vec4& T,
                               const Vec4& T_prev, const Vec4& lambda) {
  Vec4 out = Vec4::Zero();
  for (const auto& gp : *g.quad) {
    const QuadState s = quad_state(gp, g, c, p, T, T_prev);
    double lq = 0.0, lx = 0.0, ly = 0.0;
    for (int a = 0; a < 4; ++a) {
      lq += gp.N[a] * lambda[a];
      lx += gp.dNdx[a] * lambda[a];
      ly += gp.dNdy[a] * lambda[a];
    }
    const double wm = gp.weight * s.mp * lq, wb = gp.weight * s.b.b;
    // b_q depends on Tp_q through m(Tp_q)
    const double wdb = gp.weight * s.b.db_dm * s.dmp * (lx * s.gx + ly * s.gy);
    for (int a = 0; a < 4; ++a)
      out[a] += (wm - wdb) * gp.N[a] + wb * (gp.dNdx[a] * lx + gp.dNdy[a] * ly);
  }
  return out;
}

ElementSensitivity element_sensitivity(const ElementGeometry& g,
                                       const ElementCoeffs& c,
                                       const KernelParams& p, const Vec4& T,
                                       const Vec4& T_prev,
                                       const Vec4& lambda) {
  ElementSensitivity out;
  out.k = p.dt * lambda.dot((*g.stiffness) * T);
  const double width = p.phase.mushy_width;
  for (const auto& gp : *g.quad) {
    const QuadState s = quad_state(gp, g, c, p, T, T_prev);
    double lq = 0.0, lx = 0.0, ly = 0.0;
    for (int a = 0; a < 4; ++a) {
      lq += gp.N[a] * lambda[a];
      lx += gp.dNdx[a] * lambda[a];
      ly += gp.dNdy[a] * lambda[a];
    }
    const double du = s.Tq - s.Tpq;
    const double df = melt_fraction(s.Tq, p.phase) - melt_fraction(s.Tpq, p.phase);
    const double wl = gp.weight * lq;
    // lambda^T dr/db at this point, chained through b(m(Tp_q), k)
    const double rb = gp.weight * (lx * s.gx + ly * s.gy);
    const double rm = rb * s.b.db_dm;
    out.k += rb * s.b.db_dk;
    out.rho += wl * (c.c * du + c.latent * df) + rm * (c.c + c.latent / width * s.pi_p);
    out.c += wl * c.rho * du + rm * c.rho;
    out.latent += wl * c.rho * df + rm * c.rho * s.pi_p / width;
    out.melt_temp += wl * c.rho * c.latent *
                         (pulse(s.Tpq, p.phase) - pulse(s.Tq, p.phase)) / width -
                     rm * c.rho * c.latent / width * s.dpi_p;
  }
  return out;
}

}  // namespace lhtes
