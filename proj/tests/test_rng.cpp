#include <doctest.h>

#include <cmath>

#include "dsqa/rng.hpp"
#include "dsqa/util.hpp"

using namespace dsqa;

TEST_SUITE("rng") {

TEST_CASE("two generators with the same seed produce identical streams") {
  SeededRng a(42);
  SeededRng b(42);
  for (int i = 0; i < 256; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rademacher values are exactly +/-1") {
  for (std::uint64_t seed : {0ull, 1ull, 987654321ull}) {
    SeededRng rng(seed);
    const Eigen::VectorXd v = sample_rademacher(rng, 4);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK(v[i] * v[i] == 1.0);
      CHECK(v[i] != 0.0);
    }
  }
}

TEST_CASE("rademacher is deterministic per seed") {
  SeededRng a(0);
  SeededRng b(0);
  CHECK(sample_rademacher(a, 8) == sample_rademacher(b, 8));
}

TEST_CASE("rademacher rejects n = 0") {
  SeededRng rng(0);
  CHECK_THROWS_AS(sample_rademacher(rng, 0), std::invalid_argument);
}

TEST_CASE("rademacher components are unbiased") {
  // Empirical mean per component over many draws; se = 1/sqrt(8192) ~ 0.011.
  SeededRng rng(123);
  const Eigen::Index n = 8;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(n);
  const int draws = 8192;
  for (int d = 0; d < draws; ++d) sums += sample_rademacher(rng, n);
  CHECK((sums / draws).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("gaussian with sigma 0 returns zeros") {
  SeededRng rng(7);
  const Eigen::VectorXd v = sample_gaussian(rng, 3, 0.0);
  CHECK(v == Eigen::VectorXd::Zero(3));
}

TEST_CASE("gaussian rejects negative sigma") {
  SeededRng rng(7);
  CHECK_THROWS_AS(sample_gaussian(rng, 3, -1.0), std::invalid_argument);
}

TEST_CASE("gaussian is reproducible per seed") {
  SeededRng a(55);
  SeededRng b(55);
  CHECK(sample_gaussian(a, 9, 2.5) == sample_gaussian(b, 9, 2.5));
}

TEST_CASE("gaussian sample mean of 1e6 draws is near zero") {
  SeededRng rng(2024);
  const Eigen::VectorXd v = sample_gaussian(rng, 1000000, 1.0);
  CHECK(std::abs(v.mean()) <= 0.01);
  const auto [mean, std_dev] = mean_std(v);
  CHECK(std_dev == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("mean_std on known inputs") {
  Eigen::VectorXd constant(3);
  constant << 1, 1, 1;
  CHECK(mean_std(constant) == std::pair{1.0, 0.0});

  Eigen::VectorXd pair(2);
  pair << 0, 2;
  CHECK(mean_std(pair) == std::pair{1.0, 1.0});

  Eigen::VectorXd run(4);
  run << 1, 2, 3, 4;
  const auto [mean, std_dev] = mean_std(run);
  CHECK(mean == 2.5);
  CHECK(std_dev == doctest::Approx(1.118033988749895).epsilon(1e-12));
}

TEST_CASE("mean_std rejects empty input") {
  CHECK_THROWS_AS(mean_std(Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
  CHECK(derive_seed(0, 0) != derive_seed(1, 0));
  CHECK(derive_seed(13, 5) == derive_seed(13, 5));
}

TEST_CASE("row-major flatten/unflatten round-trips") {
  SeededRng rng(3);
  for (Eigen::Index rows : {1, 2, 5, 7}) {
    for (Eigen::Index cols : {1, 3, 4, 6}) {
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.next_unit();
      const Eigen::VectorXd flat = flatten_row_major(m);
      CHECK(unflatten_row_major(flat, rows, cols) == m);
      CHECK(flatten_row_major(unflatten_row_major(flat, rows, cols)) == flat);
      // row-major order: element (r, c) lands at r*cols + c
      CHECK(flat[1 * cols - 1] == m(0, cols - 1));
    }
  }
  CHECK_THROWS_AS(unflatten_row_major(Eigen::VectorXd::Zero(5), 2, 3), std::invalid_argument);
}

}  // TEST_SUITE
