#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lhtes/material_db.hpp"

namespace lhtes {

using Vec2 = std::array<double, 2>;

inline constexpr int kLatentDim = 2;

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

/// Encoder: input -> hidden (ReLU) -> {mean, log-variance}.
/// Decoder: latent -> hidden (ReLU) -> linear output.
struct VaeModel {
  MaterialKind kind = MaterialKind::hcm;
  NormalizationParams normalization;
  double beta = 1e-7;
  DenseLayer enc_hidden;
  DenseLayer enc_mean;
  DenseLayer enc_logvar;
  DenseLayer dec_hidden;
  DenseLayer dec_out;

  int input_dim() const { return static_cast<int>(enc_hidden.W.cols()); }
  int hidden_dim() const { return static_cast<int>(enc_hidden.W.rows()); }
};

struct TrainOptions {
  std::uint64_t seed = 0;
  int epochs = 50000;
  double learning_rate = 2e-3;
  double beta = 1e-7;
  int hidden = 250;
};

struct TrainReport {
  std::vector<double> loss;  // one entry per epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int last_finite_epoch)
      : std::runtime_error(what), last_finite_epoch(last_finite_epoch) {}
  int last_finite_epoch;
};

/// Full-batch ADAM on the reconstruction + beta * KL loss. `data` has one
/// normalized record per row. Single threaded; bitwise reproducible per seed.
VaeModel train_vae(const Eigen::MatrixXd& data, const NormalizationParams& norm,
                   MaterialKind kind, const TrainOptions& options,
                   TrainReport* report = nullptr);

/// Loss terms evaluated without sampling noise (z = encoder mean).
struct VaeLoss {
  double reconstruction = 0.0;
  double kl = 0.0;
};
VaeLoss evaluate_loss(const VaeModel& model, const Eigen::MatrixXd& data);

/// Encoder means, one row per input record.
Eigen::MatrixXd encode_mean(const VaeModel& model, const Eigen::MatrixXd& data);

/// The retained half of a trained VAE: latent 2-vector -> physical
/// material properties.
class DecoderModel {
 public:
  DecoderModel() = default;
  explicit DecoderModel(const VaeModel& model);
  DecoderModel(MaterialKind kind, NormalizationParams norm, DenseLayer hidden,
               DenseLayer out);

  MaterialKind kind() const { return kind_; }
  const NormalizationParams& normalization() const { return norm_; }
  int output_dim() const { return static_cast<int>(out_.W.rows()); }

  /// Raw network output (normalized, not clamped).
  Eigen::VectorXd decode_normalized(const Vec2& z) const;
  /// Clamped and denormalized properties in attribute order.
  std::vector<double> decode(const Vec2& z) const;
  /// d(properties)/dz, attributes x 2. ReLU subgradient at 0 is 0; clamped
  /// outputs give zero rows.
  Eigen::MatrixXd decode_jacobian(const Vec2& z) const;

 private:
  MaterialKind kind_ = MaterialKind::hcm;
  NormalizationParams norm_;
  DenseLayer hidden_;
  DenseLayer out_;
};

struct LatentAtlas {
  std::vector<std::string> names;
  std::vector<Vec2> coords;

  std::size_t size() const { return coords.size(); }
  /// Index of the closest atlas point (Euclidean).
  std::size_t nearest(const Vec2& z) const;
  double distance_to_nearest(const Vec2& z) const;
};

LatentAtlas build_atlas(const VaeModel& model, const Eigen::MatrixXd& data,
                        const std::vector<std::string>& names);

/// Per-attribute mean relative error |decoded - true| / true over a
/// database, decoding each record at its atlas coordinate.
std::vector<double> reconstruction_errors(const VaeModel& model,
                                          const MaterialDatabase& db);

void save_model(const VaeModel& model, const std::filesystem::path& path);
VaeModel load_model(const std::filesystem::path& path);

void save_atlas(const LatentAtlas& atlas, const std::filesystem::path& path);
LatentAtlas load_atlas(const std::filesystem::path& path);

}  // namespace lhtes
