#include "lhtes/phase.hpp"

#include <cmath>
#include <stdexcept>

namespace lhtes {

void PhaseModel::validate() const {
  if (!(mushy_width > 0.0))
    throw std::invalid_argument("mushy-zone width must be positive");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("transition fraction alpha must be in (0, 1]");
}

double smooth_step(double T, double T_c, double alpha, double width) {
  return 0.5 * (1.0 + std::tanh((T - T_c) / (alpha * width)));
}

double smooth_step_slope(double T, double T_c, double alpha, double width) {
  const double s = alpha * width;
  const double t = std::tanh((T - T_c) / s);
  return 0.5 * (1.0 - t * t) / s;
}

double pulse(double T, const PhaseModel& p) {
  // difference of tanh written to avoid cancellation far from the window
  const double s = p.alpha * p.mushy_width;
  const double a = std::tanh((T - p.melt_temp) / s);
  const double b = std::tanh((T - p.melt_temp - p.mushy_width) / s);
  return 0.5 * (a - b);
}

double pulse_slope(double T, const PhaseModel& p) {
  return smooth_step_slope(T, p.melt_temp, p.alpha, p.mushy_width) -
         smooth_step_slope(T, p.melt_temp + p.mushy_width, p.alpha,
                           p.mushy_width);
}

namespace {

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

double melt_fraction(double T, const PhaseModel& p) {
  const double s = p.alpha * p.mushy_width;
  const double x = (T - p.melt_temp) / s;
  const double y = (T - p.melt_temp - p.mushy_width) / s;
  return 0.5 + 0.5 * s / p.mushy_width * (log_cosh(x) - log_cosh(y));
}

double apparent_capacity(double T, const PhaseModel& phase, double c_p,
                         double latent) {
  return c_p + latent / phase.mushy_width * pulse(T, phase);
}

}  // namespace lhtes
