#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <numeric>

#include "doctest.h"
#include "lhtes/vae.hpp"

using namespace lhtes;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Eigen::MatrixXd pcm_data(NormalizationParams* norm = nullptr) {
  const auto db = load_database(fs::path(LHTES_DATA_DIR) / "pcm.csv", MaterialKind::pcm);
  auto nd = normalize(db.records);
  if (norm) *norm = nd.params;
  return nd.values;
}

}  // namespace

TEST_CASE("database parsing rejects malformed input") {
  const auto ok = parse_database("name,k,c_p,rho,cost\nA,1,2,3,4\nB,2,3,4,5\n", MaterialKind::hcm);
  CHECK(ok.size() == 2);
  CHECK(ok.at("B").cost.value() == 5.0);
  CHECK_THROWS_AS(ok.at("C"), DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho\nA,1,2,3\n", MaterialKind::hcm), DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho,cost\nA,1,2,x,4\n", MaterialKind::hcm), DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho,cost\nA,1,2,-3,4\n", MaterialKind::hcm), DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho,cost\nA,1,2,3,4\nA,1,2,3,4\n", MaterialKind::hcm),
                  DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho,cost\nA,1,2,3\n", MaterialKind::hcm), DatabaseError);
  CHECK_THROWS_AS(parse_database("", MaterialKind::pcm), DatabaseError);
  CHECK_THROWS_AS(parse_database("name,k,c_p,rho,cost\nA,1,2,3,4\n", MaterialKind::pcm), DatabaseError);
}

TEST_CASE("normalization round trip") {
  const auto db = load_database(fs::path(LHTES_DATA_DIR) / "pcm.csv", MaterialKind::pcm);
  const auto nd = normalize(db.records);
  CHECK(nd.values.rows() == static_cast<Eigen::Index>(db.size()));
  CHECK(nd.values.cols() == 5);
  CHECK(nd.values.minCoeff() >= 0.0);
  CHECK(nd.values.maxCoeff() <= 1.0);
  for (std::size_t r = 0; r < db.size(); r += 3) {
    std::vector<double> norm_row(5);
    for (int a = 0; a < 5; ++a) norm_row[a] = nd.values(r, a);
    const auto phys = denormalize(norm_row, nd.params);
    const auto truth = db.records[r].attributes();
    for (int a = 0; a < 5; ++a) CHECK(phys[a] == doctest::Approx(truth[a]).epsilon(1e-12));
    const auto back = normalize_row(phys, nd.params);
    for (int a = 0; a < 5; ++a) CHECK(back[a] == doctest::Approx(norm_row[a]).scale(1.0).epsilon(1e-12));
    const auto der = denormalize_derivative(norm_row, nd.params);
    for (int a = 0; a < 5; ++a) {
      auto up = norm_row, dn = norm_row;
      up[a] = std::min(1.0, up[a] + 1e-7);
      dn[a] = std::max(0.0, dn[a] - 1e-7);
      if (up[a] - dn[a] < 1.5e-7) continue;
      const double fd = (denormalize(up, nd.params)[a] - denormalize(dn, nd.params)[a]) / (up[a] - dn[a]);
      CHECK(der[a] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  CHECK(denormalize(std::vector<double>{1.4, 0, 0, 0, 0}, nd.params)[0] ==
        doctest::Approx(denormalize(std::vector<double>{1.0, 0, 0, 0, 0}, nd.params)[0]));
}

TEST_CASE("VAE training is reproducible and its loss decreases") {
  NormalizationParams norm;
  const auto data = pcm_data(&norm);
  TrainOptions opt;
  opt.seed = 11;
  opt.epochs = 3000;
  opt.hidden = 32;
  TrainReport ra, rb;
  const VaeModel a = train_vae(data, norm, MaterialKind::pcm, opt, &ra);
  const VaeModel b = train_vae(data, norm, MaterialKind::pcm, opt, &rb);
  CHECK(ra.loss == rb.loss);
  const fs::path dir = fs::path(LHTES_TEST_TMP) / "vae";
  fs::create_directories(dir);
  save_model(a, dir / "a.vae");
  save_model(b, dir / "b.vae");
  CHECK(slurp(dir / "a.vae") == slurp(dir / "b.vae"));
  double prev = INFINITY;
  for (int w = 0; w < 3; ++w) {
    const double mean =
        std::accumulate(ra.loss.begin() + 1000 * w, ra.loss.begin() + 1000 * (w + 1), 0.0) / 1000.0;
    CHECK(mean <= prev);
    prev = mean;
  }
  CHECK(ra.final_loss < ra.initial_loss);

  opt.seed = 12;
  TrainReport rc;
  train_vae(data, norm, MaterialKind::pcm, opt, &rc);
  CHECK(rc.loss != ra.loss);
}

TEST_CASE("bundled decoders: Jacobian, persistence and atlas") {
  const fs::path dir = LHTES_DATA_DIR;
  const VaeModel m = load_model(dir / "pcm.vae");
  const DecoderModel dec(m);
  CHECK(dec.output_dim() == 5);
  const Vec2 z{0.31, -0.47};
  const Eigen::MatrixXd J = dec.decode_jacobian(z);
  REQUIRE(J.rows() == 5);
  REQUIRE(J.cols() == 2);
  for (int i = 0; i < 2; ++i) {
    Vec2 a = z, b = z;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const auto pa = dec.decode(a), pb = dec.decode(b);
    for (int r = 0; r < 5; ++r)
      CHECK(J(r, i) == doctest::Approx((pa[r] - pb[r]) / 2e-6).epsilon(1e-4).scale(1e-6 * std::abs(pa[r])));
  }
  const fs::path tmp = fs::path(LHTES_TEST_TMP) / "vae";
  fs::create_directories(tmp);
  save_model(m, tmp / "copy.vae");
  const VaeModel back = load_model(tmp / "copy.vae");
  CHECK(DecoderModel(back).decode(z) == dec.decode(z));
  CHECK_THROWS(load_model(tmp / "missing.vae"));

  const LatentAtlas atlas = load_atlas(dir / "pcm_atlas.csv");
  const auto db = load_database(dir / "pcm.csv", MaterialKind::pcm);
  CHECK(atlas.size() == db.size());
  for (const auto& c : atlas.coords) {
    CHECK(std::abs(c[0]) <= 3.0);
    CHECK(std::abs(c[1]) <= 3.0);
  }
  CHECK(atlas.distance_to_nearest(atlas.coords[4]) == 0.0);
  CHECK(atlas.nearest(atlas.coords[4]) == 4);

  const auto err = reconstruction_errors(m, db);
  CHECK(err.size() == 5);
}
