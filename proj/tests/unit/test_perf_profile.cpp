#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hvscale/error.hpp"
#include "hvscale/perf_profile.hpp"

using namespace hvscale;

namespace {

ModelProfile example() { return {"example", 10.0, 40.0, 2.0, 5.0, 16, 16}; }

// Direct evaluation of the model, kept apart from the library code.
double model(double g, double e, double d, double h, int b, int c) {
  return g * b / c + e / c + d * b + h;
}

std::vector<ProfileSample> grid_samples(double g, double e, double d, double h) {
  std::vector<ProfileSample> out;
  for (int b : {1, 2, 4, 8}) {
    for (int c : {1, 2, 4}) out.push_back({b, c, model(g, e, d, h, b, c)});
  }
  return out;
}

}  // namespace

TEST_CASE("latency matches the closed form") {
  const auto p = example();
  CHECK(latency(p, 1, 1) == doctest::Approx(57.0).epsilon(1e-12));
  CHECK(latency(p, 4, 2) == doctest::Approx(53.0).epsilon(1e-12));
  CHECK(latency(p, 2, 2) == doctest::Approx(39.0).epsilon(1e-12));
  CHECK(latency(p, 16, 1) == doctest::Approx(237.0).epsilon(1e-12));
}

TEST_CASE("throughput is batch per processing interval") {
  const auto p = example();
  CHECK(throughput(p, 1, 1) == doctest::Approx(1000.0 / 57.0));
  CHECK(throughput(p, 4, 2) == doctest::Approx(4000.0 / 53.0));
  CHECK(throughput(p, 2, 2) == doctest::Approx(2000.0 / 39.0));
  CHECK(throughput(p, 1, 1) == doctest::Approx(17.54).epsilon(1e-3));
}

TEST_CASE("latency rejects out-of-range batch and cores") {
  const auto p = example();
  CHECK_THROWS_AS(latency(p, 0, 1), OutOfRange);
  CHECK_THROWS_AS(latency(p, 17, 1), OutOfRange);
  CHECK_THROWS_AS(latency(p, 1, 0), OutOfRange);
  CHECK_THROWS_AS(latency(p, 1, 17), OutOfRange);
  CHECK_THROWS_AS(throughput(p, 1, 17), OutOfRange);
}

TEST_CASE("validate rejects negative or non-finite coefficients") {
  auto p = example();
  p.delta = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = example();
  p.gamma = NAN;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = example();
  p.c_max = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = ModelProfile{"zero", 0, 0, 0, 0, 4, 4};
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  CHECK_NOTHROW(example().validate());
}

TEST_CASE("latency is monotone over the full grid for random nonnegative profiles") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(0.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    ModelProfile p{"r", coef(rng), coef(rng), coef(rng), coef(rng) + 0.1, 16, 16};
    for (int b = 1; b <= 16; ++b) {
      for (int c = 1; c <= 16; ++c) {
        if (b > 1) CHECK(latency(p, b, c) >= latency(p, b - 1, c));
        if (c > 1) {
          CHECK(latency(p, b, c) <= latency(p, b, c - 1));
          CHECK(throughput(p, b, c) >= throughput(p, b, c - 1));
        }
      }
    }
  }
}

TEST_CASE("noiseless fit recovers the generating coefficients") {
  const auto samples = grid_samples(10, 40, 2, 5);
  const auto p = fit_profile(samples, 16, 16, "rt");
  CHECK(p.gamma == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(p.epsilon == doctest::Approx(40.0).epsilon(1e-6));
  CHECK(p.delta == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(p.eta == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(p.name == "rt");
  CHECK(p.b_max == 16);
  for (const auto& s : samples) {
    CHECK(std::abs(latency(p, s.batch, s.cores) - s.latency_ms) <= 1e-6 * s.latency_ms);
  }
  CHECK(residual_sum_of_squares(p, samples) < 1e-12);
}

TEST_CASE("fit keeps zero coefficients at zero") {
  const auto p = fit_profile(grid_samples(0, 30, 4, 0));
  CHECK(p.gamma == doctest::Approx(0.0));
  CHECK(p.epsilon == doctest::Approx(30.0));
  CHECK(p.delta == doctest::Approx(4.0));
  CHECK(p.eta == doctest::Approx(0.0));
}

TEST_CASE("fit clamps to nonnegative coefficients") {
  // A true serial term of -3 cannot be represented; the fit must stay >= 0.
  auto samples = grid_samples(10, 40, 2, 0);
  for (auto& s : samples) s.latency_ms -= 3.0;
  const auto p = fit_profile(samples);
  CHECK(p.gamma >= 0.0);
  CHECK(p.epsilon >= 0.0);
  CHECK(p.delta >= 0.0);
  CHECK(p.eta >= 0.0);
  CHECK(p.eta == 0.0);
}

TEST_CASE("fit is within 10% under gaussian noise over 20+ seeds") {
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<ProfileSample> samples;
    for (int rep = 0; rep < 10; ++rep) {
      for (auto s : grid_samples(10, 40, 2, 5)) {
        s.latency_ms += noise(rng);
        samples.push_back(s);
      }
    }
    const auto p = fit_profile(samples);
    CAPTURE(seed);
    CHECK(std::abs(p.gamma - 10.0) <= 1.0);
    CHECK(std::abs(p.epsilon - 40.0) <= 4.0);
    CHECK(std::abs(p.delta - 2.0) <= 0.2);
    CHECK(std::abs(p.eta - 5.0) <= 0.5);
  }
}

TEST_CASE("rank-deficient samples are rejected") {
  std::vector<ProfileSample> same_point(10, ProfileSample{2, 2, 30.0});
  CHECK_THROWS_AS(fit_profile(same_point), DegenerateSamples);
  // Constant latency on a single batch size cannot separate the terms.
  std::vector<ProfileSample> one_batch;
  for (int c = 1; c <= 4; ++c) one_batch.push_back({4, c, 42.0});
  CHECK_THROWS_AS(fit_profile(one_batch), DegenerateSamples);
  CHECK_THROWS_AS(fit_profile(std::vector<ProfileSample>{}), DegenerateSamples);
}

TEST_CASE("fit rejects invalid samples and limits") {
  auto samples = grid_samples(10, 40, 2, 5);
  CHECK_THROWS_AS(fit_profile(samples, 0, 16), InvalidArgument);
  CHECK_THROWS_AS(fit_profile(samples, 16, kMaxProfileLimit + 1), InvalidArgument);
  samples[0].cores = 0;
  CHECK_THROWS_AS(fit_profile(samples), InvalidArgument);
}
