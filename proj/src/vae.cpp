#include "lhtes/vae.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace lhtes {

namespace {

constexpr char kMagic[8] = {'L', 'H', 'V', 'A', 'E', '0', '0', '1'};

Eigen::MatrixXd relu(const Eigen::MatrixXd& a) { return a.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& a) {
  return (a.array() > 0.0).cast<double>().matrix();
}

DenseLayer init_layer(int out, int in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer l;
  l.W.resize(out, in);
  l.b.resize(out);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < in; ++j) l.W(i, j) = dist(rng);
  for (int i = 0; i < out; ++i) l.b(i) = dist(rng);
  return l;
}

Eigen::MatrixXd affine(const DenseLayer& l, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = l.W * x;
  y.colwise() += l.b;
  return y;
}

struct AdamSlot {
  Eigen::MatrixXd m, v;
  void init(const Eigen::MatrixXd& like) {
    m = Eigen::MatrixXd::Zero(like.rows(), like.cols());
    v = m;
  }
  void step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr,
            double bc1, double bc2) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
};

struct LayerAdam {
  AdamSlot w, b;
  void init(const DenseLayer& l) {
    w.init(l.W);
    b.init(l.b);
  }
  void step(DenseLayer& l, const Eigen::MatrixXd& gw, const Eigen::VectorXd& gb,
            double lr, double bc1, double bc2) {
    w.step(l.W, gw, lr, bc1, bc2);
    Eigen::MatrixXd bm = l.b;
    b.step(bm, gb, lr, bc1, bc2);
    l.b = bm;
  }
};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("model file truncated");
  return v;
}

void write_layer(std::ostream& out, const DenseLayer& l) {
  for (Eigen::Index i = 0; i < l.W.rows(); ++i)
    for (Eigen::Index j = 0; j < l.W.cols(); ++j) write_pod(out, l.W(i, j));
  for (Eigen::Index i = 0; i < l.b.size(); ++i) write_pod(out, l.b(i));
}

DenseLayer read_layer(std::istream& in, int rows, int cols) {
  DenseLayer l;
  l.W.resize(rows, cols);
  l.b.resize(rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) l.W(i, j) = read_pod<double>(in);
  for (int i = 0; i < rows; ++i) l.b(i) = read_pod<double>(in);
  return l;
}

}  // namespace

VaeModel train_vae(const Eigen::MatrixXd& data, const NormalizationParams& norm,
                   MaterialKind kind, const TrainOptions& options,
                   TrainReport* report) {
  if (data.rows() == 0) throw std::invalid_argument("train_vae: empty data");
  if (options.epochs < 1) throw std::invalid_argument("train_vae: epochs < 1");
  const int d = static_cast<int>(data.cols());
  const int h = options.hidden;
  const double n = static_cast<double>(data.rows());
  const double beta = options.beta;

  std::mt19937_64 rng(options.seed);
  VaeModel model;
  model.kind = kind;
  model.normalization = norm;
  model.beta = beta;
  model.enc_hidden = init_layer(h, d, rng);
  model.enc_mean = init_layer(kLatentDim, h, rng);
  model.enc_logvar = init_layer(kLatentDim, h, rng);
  model.dec_hidden = init_layer(h, kLatentDim, rng);
  model.dec_out = init_layer(d, h, rng);

  LayerAdam a_eh, a_em, a_ev, a_dh, a_do;
  a_eh.init(model.enc_hidden);
  a_em.init(model.enc_mean);
  a_ev.init(model.enc_logvar);
  a_dh.init(model.dec_hidden);
  a_do.init(model.dec_out);

  const Eigen::MatrixXd X = data.transpose();  // d x n
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd eps(kLatentDim, data.rows());

  if (report) {
    report->loss.clear();
    report->loss.reserve(options.epochs);
  }
  double bc1 = 1.0, bc2 = 1.0;
  int last_finite = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = normal(rng);

    // forward
    const Eigen::MatrixXd A1 = affine(model.enc_hidden, X);
    const Eigen::MatrixXd H1 = relu(A1);
    const Eigen::MatrixXd MU = affine(model.enc_mean, H1);
    const Eigen::MatrixXd LV = affine(model.enc_logvar, H1);
    const Eigen::MatrixXd S = (0.5 * LV.array()).exp().matrix();
    const Eigen::MatrixXd Z = MU + S.cwiseProduct(eps);
    const Eigen::MatrixXd A2 = affine(model.dec_hidden, Z);
    const Eigen::MatrixXd H2 = relu(A2);
    const Eigen::MatrixXd Y = affine(model.dec_out, H2);

    const Eigen::MatrixXd diff = Y - X;
    const double rec = diff.squaredNorm() / n;
    const double kl =
        -0.5 *
        (1.0 + LV.array() - MU.array().square() - LV.array().exp()).sum() / n;
    const double loss = rec + beta * kl;
    if (!std::isfinite(loss)) {
      throw TrainingDiverged("VAE training diverged at epoch " +
                                 std::to_string(epoch) +
                                 " (last finite epoch " +
                                 std::to_string(last_finite) + ")",
                             last_finite);
    }
    last_finite = epoch;
    if (report) report->loss.push_back(loss);

    // backward
    const Eigen::MatrixXd dY = (2.0 / n) * diff;
    const Eigen::MatrixXd gWo = dY * H2.transpose();
    const Eigen::VectorXd gbo = dY.rowwise().sum();
    const Eigen::MatrixXd dA2 =
        (model.dec_out.W.transpose() * dY).cwiseProduct(relu_mask(A2));
    const Eigen::MatrixXd gWdh = dA2 * Z.transpose();
    const Eigen::VectorXd gbdh = dA2.rowwise().sum();
    const Eigen::MatrixXd dZ = model.dec_hidden.W.transpose() * dA2;
    const Eigen::MatrixXd dMU = dZ + (beta / n) * MU;
    const Eigen::MatrixXd dLV =
        (dZ.array() * eps.array() * 0.5 * S.array() +
         (beta / n) * 0.5 * (LV.array().exp() - 1.0))
            .matrix();
    const Eigen::MatrixXd gWm = dMU * H1.transpose();
    const Eigen::VectorXd gbm = dMU.rowwise().sum();
    const Eigen::MatrixXd gWv = dLV * H1.transpose();
    const Eigen::VectorXd gbv = dLV.rowwise().sum();
    const Eigen::MatrixXd dA1 = (model.enc_mean.W.transpose() * dMU +
                                 model.enc_logvar.W.transpose() * dLV)
                                    .cwiseProduct(relu_mask(A1));
    const Eigen::MatrixXd gWeh = dA1 * X.transpose();
    const Eigen::VectorXd gbeh = dA1.rowwise().sum();

    bc1 *= 0.9;
    bc2 *= 0.999;
    const double c1 = 1.0 - bc1, c2 = 1.0 - bc2;
    const double lr = options.learning_rate;
    a_do.step(model.dec_out, gWo, gbo, lr, c1, c2);
    a_dh.step(model.dec_hidden, gWdh, gbdh, lr, c1, c2);
    a_em.step(model.enc_mean, gWm, gbm, lr, c1, c2);
    a_ev.step(model.enc_logvar, gWv, gbv, lr, c1, c2);
    a_eh.step(model.enc_hidden, gWeh, gbeh, lr, c1, c2);
  }
  if (report) {
    report->initial_loss = report->loss.front();
    report->final_loss = report->loss.back();
  }
  return model;
}

Eigen::MatrixXd encode_mean(const VaeModel& model, const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd H1 = relu(affine(model.enc_hidden, data.transpose()));
  return affine(model.enc_mean, H1).transpose();
}

VaeLoss evaluate_loss(const VaeModel& model, const Eigen::MatrixXd& data) {
  const double n = static_cast<double>(data.rows());
  const Eigen::MatrixXd X = data.transpose();
  const Eigen::MatrixXd H1 = relu(affine(model.enc_hidden, X));
  const Eigen::MatrixXd MU = affine(model.enc_mean, H1);
  const Eigen::MatrixXd LV = affine(model.enc_logvar, H1);
  const Eigen::MatrixXd Y =
      affine(model.dec_out, relu(affine(model.dec_hidden, MU)));
  VaeLoss out;
  out.reconstruction = (Y - X).squaredNorm() / n;
  out.kl = -0.5 *
           (1.0 + LV.array() - MU.array().square() - LV.array().exp()).sum() /
           n;
  return out;
}

DecoderModel::DecoderModel(const VaeModel& model)
    : DecoderModel(model.kind, model.normalization, model.dec_hidden,
                   model.dec_out) {}

DecoderModel::DecoderModel(MaterialKind kind, NormalizationParams norm,
                           DenseLayer hidden, DenseLayer out)
    : kind_(kind),
      norm_(std::move(norm)),
      hidden_(std::move(hidden)),
      out_(std::move(out)) {
  if (hidden_.W.cols() != kLatentDim)
    throw std::invalid_argument("decoder input width must be 2");
  if (static_cast<std::size_t>(out_.W.rows()) != norm_.size())
    throw std::invalid_argument("decoder output width != attribute count");
}

Eigen::VectorXd DecoderModel::decode_normalized(const Vec2& z) const {
  const Eigen::Vector2d zv(z[0], z[1]);
  const Eigen::VectorXd a = hidden_.W * zv + hidden_.b;
  return out_.W * a.cwiseMax(0.0) + out_.b;
}

std::vector<double> DecoderModel::decode(const Vec2& z) const {
  const Eigen::VectorXd y = decode_normalized(z);
  return denormalize(std::span<const double>(y.data(), y.size()), norm_);
}

Eigen::MatrixXd DecoderModel::decode_jacobian(const Vec2& z) const {
  const Eigen::Vector2d zv(z[0], z[1]);
  const Eigen::VectorXd a = hidden_.W * zv + hidden_.b;
  const Eigen::VectorXd y = out_.W * a.cwiseMax(0.0) + out_.b;
  const auto scale =
      denormalize_derivative(std::span<const double>(y.data(), y.size()), norm_);
  Eigen::MatrixXd masked = hidden_.W;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!(a(i) > 0.0)) masked.row(i).setZero();
  Eigen::MatrixXd jac = out_.W * masked;  // normalized output x 2
  for (Eigen::Index r = 0; r < jac.rows(); ++r) jac.row(r) *= scale[r];
  return jac;
}

std::size_t LatentAtlas::nearest(const Vec2& z) const {
  if (coords.empty()) throw std::logic_error("empty latent atlas");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const double d = std::hypot(coords[j][0] - z[0], coords[j][1] - z[1]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

double LatentAtlas::distance_to_nearest(const Vec2& z) const {
  const auto& c = coords[nearest(z)];
  return std::hypot(c[0] - z[0], c[1] - z[1]);
}

LatentAtlas build_atlas(const VaeModel& model, const Eigen::MatrixXd& data,
                        const std::vector<std::string>& names) {
  if (names.size() != static_cast<std::size_t>(data.rows()))
    throw std::invalid_argument("build_atlas: names/data size mismatch");
  const Eigen::MatrixXd mu = encode_mean(model, data);
  LatentAtlas atlas;
  atlas.names = names;
  for (Eigen::Index i = 0; i < mu.rows(); ++i)
    atlas.coords.push_back({mu(i, 0), mu(i, 1)});
  return atlas;
}

std::vector<double> reconstruction_errors(const VaeModel& model,
                                          const MaterialDatabase& db) {
  const auto norm = normalize(db.records);
  const DecoderModel dec(model);
  const Eigen::MatrixXd mu = encode_mean(model, norm.values);
  const std::size_t n_attr = attribute_count(db.kind);
  std::vector<double> err(n_attr, 0.0);
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto truth = db.records[i].attributes();
    const auto got = dec.decode({mu(i, 0), mu(i, 1)});
    for (std::size_t a = 0; a < n_attr; ++a)
      err[a] += std::abs(got[a] - truth[a]) / truth[a];
  }
  for (auto& e : err) e /= static_cast<double>(db.size());
  return err;
}

void save_model(const VaeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, model.kind == MaterialKind::hcm ? 0u : 1u);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden_dim()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(kLatentDim));
  write_pod<double>(out, model.beta);
  for (const auto& s : model.normalization.attributes) {
    write_pod<double>(out, s.log_applied ? 1.0 : 0.0);
    write_pod<double>(out, s.min);
    write_pod<double>(out, s.max);
  }
  write_layer(out, model.enc_hidden);
  write_layer(out, model.enc_mean);
  write_layer(out, model.enc_logvar);
  write_layer(out, model.dec_hidden);
  write_layer(out, model.dec_out);
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

VaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + " is not an LHVAE001 model file");
  VaeModel m;
  const auto kind = read_pod<std::uint32_t>(in);
  if (kind > 1) throw std::runtime_error("model file: bad material kind");
  m.kind = kind == 0 ? MaterialKind::hcm : MaterialKind::pcm;
  const int d = static_cast<int>(read_pod<std::uint32_t>(in));
  const int h = static_cast<int>(read_pod<std::uint32_t>(in));
  const int l = static_cast<int>(read_pod<std::uint32_t>(in));
  if (l != kLatentDim || d != static_cast<int>(attribute_count(m.kind)) || h < 1)
    throw std::runtime_error("model file: unexpected layer dimensions");
  m.beta = read_pod<double>(in);
  m.normalization.attributes.resize(d);
  for (auto& s : m.normalization.attributes) {
    s.log_applied = read_pod<double>(in) != 0.0;
    s.min = read_pod<double>(in);
    s.max = read_pod<double>(in);
  }
  m.enc_hidden = read_layer(in, h, d);
  m.enc_mean = read_layer(in, l, h);
  m.enc_logvar = read_layer(in, l, h);
  m.dec_hidden = read_layer(in, h, l);
  m.dec_out = read_layer(in, d, h);
  return m;
}

void save_atlas(const LatentAtlas& atlas, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write atlas " + path.string());
  out.precision(17);
  out << "name,z1,z2\n";
  for (std::size_t j = 0; j < atlas.size(); ++j)
    out << atlas.names[j] << ',' << atlas.coords[j][0] << ','
        << atlas.coords[j][1] << '\n';
}

LatentAtlas load_atlas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open atlas " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("name,z1,z2", 0) != 0)
    throw std::runtime_error("atlas file has unexpected header");
  LatentAtlas atlas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto p2 = line.rfind(',');
    auto p1 = line.rfind(',', p2 - 1);
    if (p1 == std::string::npos || p2 == std::string::npos)
      throw std::runtime_error("malformed atlas line: " + line);
    atlas.names.push_back(line.substr(0, p1));
    atlas.coords.push_back({std::stod(line.substr(p1 + 1, p2 - p1 - 1)),
                            std::stod(line.substr(p2 + 1))});
  }
  return atlas;
}

}  // namespace lhtes
