#include "lhtes/design_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lhtes {

void DesignState::clamp_to_bounds() {
  for (auto& g : gamma) g = std::clamp(g, 0.0, 1.0);
  for (auto* z : {&z_hcm, &z_pcm})
    for (auto& c : *z) c = std::clamp(c, -kLatentBound, kLatentBound);
}

FilterOperator::FilterOperator(const QuadMesh& mesh, double radius)
    : radius_(radius) {
  if (!(radius > 0.0))
    throw std::invalid_argument("filter radius must be positive");
  const auto n = static_cast<Eigen::Index>(mesh.num_elements());
  std::vector<Eigen::Triplet<double>> trips;
  // Bucket centroids on a uniform grid with cell size = radius.
  double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
  for (const auto& c : mesh.centroids) {
    xmin = std::min(xmin, c[0]);
    ymin = std::min(ymin, c[1]);
    xmax = std::max(xmax, c[0]);
    ymax = std::max(ymax, c[1]);
  }
  const int nbx = std::max(1, static_cast<int>((xmax - xmin) / radius) + 1);
  const int nby = std::max(1, static_cast<int>((ymax - ymin) / radius) + 1);
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nbx) * nby);
  auto bx = [&](double x) { return std::min(nbx - 1, static_cast<int>((x - xmin) / radius)); };
  auto by = [&](double y) { return std::min(nby - 1, static_cast<int>((y - ymin) / radius)); };
  for (Eigen::Index e = 0; e < n; ++e)
    buckets[by(mesh.centroids[e][1]) * nbx + bx(mesh.centroids[e][0])].push_back(
        static_cast<int>(e));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ci = mesh.centroids[i];
    const int ix = bx(ci[0]), iy = by(ci[1]);
    std::vector<std::pair<int, double>> row;
    for (int jy = std::max(0, iy - 1); jy <= std::min(nby - 1, iy + 1); ++jy)
      for (int jx = std::max(0, ix - 1); jx <= std::min(nbx - 1, ix + 1); ++jx)
        for (int j : buckets[jy * nbx + jx]) {
          const double d = std::hypot(ci[0] - mesh.centroids[j][0],
                                      ci[1] - mesh.centroids[j][1]);
          const double w = radius - d;
          if (w > 0.0) row.emplace_back(j, w);
        }
    std::sort(row.begin(), row.end());
    double sum = 0.0;
    for (const auto& [j, w] : row) sum += w;
    for (const auto& [j, w] : row) trips.emplace_back(i, j, w / sum);
  }
  w_.resize(n, n);
  w_.setFromTriplets(trips.begin(), trips.end());
  wt_ = w_.transpose();
}

namespace {

std::vector<double> spmv(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                         std::span<const double> x, Exec exec) {
  if (static_cast<Eigen::Index>(x.size()) != m.cols())
    throw std::invalid_argument("filter: vector length mismatch");
  std::vector<double> y(m.rows(), 0.0);
  const auto* outer = m.outerIndexPtr();
  const auto* inner = m.innerIndexPtr();
  const auto* vals = m.valuePtr();
  const auto rows = m.rows();
  auto row_kernel = [&](Eigen::Index r) {
    double s = 0.0;
    for (auto p = outer[r]; p < outer[r + 1]; ++p) s += vals[p] * x[inner[p]];
    y[r] = s;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index r = 0; r < rows; ++r) row_kernel(r);
  } else {
    for (Eigen::Index r = 0; r < rows; ++r) row_kernel(r);
  }
  return y;
}

}  // namespace

std::vector<double> FilterOperator::apply(std::span<const double> x,
                                          Exec exec) const {
  return spmv(w_, x, exec);
}

std::vector<double> FilterOperator::apply_transpose(std::span<const double> y,
                                                    Exec exec) const {
  return spmv(wt_, y, exec);
}

double project(double x, double beta, double eta) {
  if (beta < 1e-8) return x;
  const double a = std::tanh(beta * eta);
  return (a + std::tanh(beta * (x - eta))) / (a + std::tanh(beta * (1.0 - eta)));
}

double project_derivative(double x, double beta, double eta) {
  if (beta < 1e-8) return 1.0;
  const double a = std::tanh(beta * eta);
  const double t = std::tanh(beta * (x - eta));
  return beta * (1.0 - t * t) / (a + std::tanh(beta * (1.0 - eta)));
}

std::vector<double> project(std::span<const double> x, double beta, double eta) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [&](double v) { return project(v, beta, eta); });
  return out;
}

HcmProperties HcmProperties::from_attributes(std::span<const double> a) {
  if (a.size() != 4) throw std::invalid_argument("HCM attribute count != 4");
  return {a[0], a[1], a[2], a[3]};
}

PcmProperties PcmProperties::from_attributes(std::span<const double> a) {
  if (a.size() != 5) throw std::invalid_argument("PCM attribute count != 5");
  return {a[0], a[1], a[2], a[3], a[4]};
}

EffectiveProperties interpolate(std::span<const double> gamma,
                                const HcmProperties& hcm,
                                const PcmProperties& pcm, double penal) {
  if (penal < 1.0) throw std::invalid_argument("SIMP exponent must be >= 1");
  const std::size_t n = gamma.size();
  EffectiveProperties p;
  p.k.resize(n);
  p.c.resize(n);
  p.rho.resize(n);
  p.latent.resize(n);
  p.melt_temp = pcm.melt_temp;
  for (std::size_t e = 0; e < n; ++e) {
    const double g = gamma[e];
    p.k[e] = hcm.k + (pcm.k - hcm.k) * std::pow(g, penal);
    p.c[e] = hcm.c_p + (pcm.c_p - hcm.c_p) * g;
    p.rho[e] = hcm.rho + (pcm.rho - hcm.rho) * g;
    p.latent[e] = g * pcm.latent;
  }
  return p;
}

PropertyGradient& PropertyGradient::operator+=(const PropertyGradient& o) {
  for (std::size_t e = 0; e < k.size(); ++e) {
    k[e] += o.k[e];
    c[e] += o.c[e];
    rho[e] += o.rho[e];
    latent[e] += o.latent[e];
  }
  melt_temp += o.melt_temp;
  return *this;
}

InterpolationPullback interpolation_pullback(std::span<const double> gamma,
                                             const HcmProperties& hcm,
                                             const PcmProperties& pcm,
                                             double penal,
                                             const PropertyGradient& grad) {
  InterpolationPullback out;
  out.gamma.resize(gamma.size());
  for (std::size_t e = 0; e < gamma.size(); ++e) {
    const double g = gamma[e];
    const double gp = std::pow(g, penal);
    const double dgp = g > 0.0 ? penal * std::pow(g, penal - 1.0)
                               : (penal == 1.0 ? 1.0 : 0.0);
    out.gamma[e] = grad.k[e] * (pcm.k - hcm.k) * dgp +
                   grad.c[e] * (pcm.c_p - hcm.c_p) +
                   grad.rho[e] * (pcm.rho - hcm.rho) +
                   grad.latent[e] * pcm.latent;
    out.hcm[0] += grad.k[e] * (1.0 - gp);
    out.hcm[1] += grad.c[e] * (1.0 - g);
    out.hcm[2] += grad.rho[e] * (1.0 - g);
    out.pcm[0] += grad.k[e] * gp;
    out.pcm[1] += grad.c[e] * g;
    out.pcm[2] += grad.rho[e] * g;
    out.pcm[3] += grad.latent[e] * g;
  }
  out.pcm[4] += grad.melt_temp;
  return out;
}

}  // namespace lhtes
