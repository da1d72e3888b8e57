#pragma once

namespace lhtes {

/// Apparent-heat-capacity phase model. The latent heat release is spread
/// over [T_m, T_m + width] by a pair of smooth steps with transition
/// half-width alpha * width.
struct PhaseModel {
  double melt_temp = 298.15;
  double mushy_width = 10.0;
  double alpha = 0.25;

  void validate() const;
};

/// 0.5 * (1 + tanh((T - T_c) / (alpha * width)))
double smooth_step(double T, double T_c, double alpha, double width);
/// d/dT of smooth_step.
double smooth_step_slope(double T, double T_c, double alpha, double width);

/// Pi(T) = Psi(T; T_m) - Psi(T; T_m + width), in [0, 1).
double pulse(double T, const PhaseModel& phase);
/// dPi/dT. Note dPi/dT_m = -dPi/dT.
double pulse_slope(double T, const PhaseModel& phase);

/// Liquid fraction: the antiderivative of Pi / width, rising from 0 to 1.
/// Its slope is pulse(T) / width.
double melt_fraction(double T, const PhaseModel& phase);

/// c_p + (L / width) * Pi(T).
double apparent_capacity(double T, const PhaseModel& phase, double c_p,
                         double latent);

}  // namespace lhtes
