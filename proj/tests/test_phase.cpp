#include <cmath>
#include <initializer_list>

#include "doctest.h"
#include "lhtes/phase.hpp"

using namespace lhtes;

namespace {

PhaseModel model(double tm = 300.0, double width = 10.0, double alpha = 0.25) {
  PhaseModel p;
  p.melt_temp = tm;
  p.mushy_width = width;
  p.alpha = alpha;
  return p;
}

template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("smooth step is a centred tanh ramp") {
  CHECK(smooth_step(300.0, 300.0, 0.25, 10.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(smooth_step(200.0, 300.0, 0.25, 10.0) < 1e-15);
  CHECK(smooth_step(400.0, 300.0, 0.25, 10.0) > 1.0 - 1e-15);
  for (double T : {290.0, 297.3, 300.0, 301.9, 310.0}) {
    const double h = 1e-5;
    const double fd = (smooth_step(T + h, 300.0, 0.25, 10.0) -
                       smooth_step(T - h, 300.0, 0.25, 10.0)) / (2 * h);
    CHECK(smooth_step_slope(T, 300.0, 0.25, 10.0) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("pulse is the difference of two steps and peaks inside the mushy zone") {
  const PhaseModel p = model();
  for (double T : {280.0, 300.0, 305.0, 312.0}) {
    CHECK(pulse(T, p) == doctest::Approx(smooth_step(T, 300.0, 0.25, 10.0) -
                                         smooth_step(T, 310.0, 0.25, 10.0)));
    const double h = 1e-5;
    const double fd = (pulse(T + h, p) - pulse(T - h, p)) / (2 * h);
    CHECK(pulse_slope(T, p) == doctest::Approx(fd).epsilon(1e-6).scale(1e-4));
  }
  for (double T = 280.0; T <= 330.0; T += 0.5) CHECK(pulse(T, p) <= pulse(305.0, p) + 1e-15);
  CHECK(pulse(250.0, p) < 1e-12);
}

TEST_CASE("melt fraction integrates pulse over width") {
  const PhaseModel p = model(320.0, 8.0, 0.25);
  const double lo = 320.0 - 80.0;
  CHECK(melt_fraction(lo, p) < 1e-12);
  CHECK(melt_fraction(420.0, p) == doctest::Approx(1.0).epsilon(1e-12));
  for (double T : {315.0, 320.0, 323.1, 328.0, 335.0}) {
    const double q = simpson([&](double s) { return pulse(s, p) / p.mushy_width; }, lo, T);
    CHECK(melt_fraction(T, p) == doctest::Approx(q).epsilon(1e-9));
    const double h = 1e-4;
    const double fd = (melt_fraction(T + h, p) - melt_fraction(T - h, p)) / (2 * h);
    CHECK(fd == doctest::Approx(pulse(T, p) / p.mushy_width).epsilon(1e-6));
  }
}

TEST_CASE("melt fraction stays finite far from the melting point") {
  const PhaseModel p = model(300.0, 1.0, 0.05);
  CHECK(std::isfinite(melt_fraction(1e5, p)));
  CHECK(std::isfinite(melt_fraction(-1e5, p)));
  CHECK(melt_fraction(1e5, p) == doctest::Approx(1.0));
}

TEST_CASE("apparent capacity adds the latent heat over the mushy zone") {
  for (double alpha : {0.1, 0.25, 0.5}) {
    const PhaseModel p = model(300.0, 10.0, alpha);
    const double c_p = 1500.0, L = 2e5;
    const double extra = simpson(
        [&](double T) { return apparent_capacity(T, p, c_p, L) - c_p; }, 250.0, 360.0);
    CHECK(extra == doctest::Approx(L).epsilon(1e-3));
  }
}

TEST_CASE("phase model validation") {
  CHECK_NOTHROW(model().validate());
  CHECK_THROWS(model(300.0, 0.0).validate());
  CHECK_THROWS(model(300.0, 10.0, -1.0).validate());
}
