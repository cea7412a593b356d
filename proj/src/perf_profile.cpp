#include "hvscale/perf_profile.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "hvscale/error.hpp"

namespace hvscale {
namespace {

constexpr int kBasisSize = 4;

// Basis of the latency model in coefficient order (gamma, epsilon, delta, eta).
std::array<double, kBasisSize> basis(double b, double c) { return {b / c, 1.0 / c, b, 1.0}; }

double evaluate(const ModelProfile& p, double b, double c) {
  return p.gamma * b / c + p.epsilon / c + p.delta * b + p.eta;
}

}  // namespace

void ModelProfile::validate() const {
  for (double v : {gamma, epsilon, delta, eta}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("profile '" + name + "': coefficients must be finite and nonnegative");
    }
  }
  if (b_max < 1 || c_max < 1 || b_max > kMaxProfileLimit || c_max > kMaxProfileLimit) {
    throw InvalidArgument("profile '" + name + "': b_max and c_max must lie in [1, " +
                          std::to_string(kMaxProfileLimit) + "]");
  }
  if (!(evaluate(*this, 1, c_max) > 0.0)) {
    throw InvalidArgument("profile '" + name + "': latency must be positive");
  }
}

double latency(const ModelProfile& profile, int batch, int cores) {
  if (batch < 1 || batch > profile.b_max || cores < 1 || cores > profile.c_max) {
    throw OutOfRange("(b=" + std::to_string(batch) + ", c=" + std::to_string(cores) +
                     ") outside profile '" + profile.name + "' limits (" +
                     std::to_string(profile.b_max) + ", " + std::to_string(profile.c_max) + ")");
  }
  return evaluate(profile, batch, cores);
}

double throughput(const ModelProfile& profile, int batch, int cores) {
  return 1000.0 * batch / latency(profile, batch, cores);
}

double residual_sum_of_squares(const ModelProfile& profile,
                               std::span<const ProfileSample> samples) {
  double ssr = 0.0;
  for (const auto& s : samples) {
    const double r = evaluate(profile, s.batch, s.cores) - s.latency_ms;
    ssr += r * r;
  }
  return ssr;
}

ModelProfile fit_profile(std::span<const ProfileSample> samples, int b_max, int c_max,
                         std::string name) {
  if (b_max < 1 || c_max < 1 || b_max > kMaxProfileLimit || c_max > kMaxProfileLimit) {
    throw InvalidArgument("b_max and c_max must lie in [1, " + std::to_string(kMaxProfileLimit) + "]");
  }
  std::set<int> batches;
  std::set<int> cores;
  for (const auto& s : samples) {
    if (s.batch < 1 || s.cores < 1 || !(s.latency_ms > 0.0) || !std::isfinite(s.latency_ms)) {
      throw InvalidArgument("profile sample needs batch >= 1, cores >= 1, latency_ms > 0");
    }
    batches.insert(s.batch);
    cores.insert(s.cores);
  }
  if (samples.size() < kBasisSize || batches.size() < 2 || cores.size() < 2) {
    throw DegenerateSamples("need >= 4 samples over >= 2 batch sizes and >= 2 core counts");
  }

  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(rows, kBasisSize);
  Eigen::VectorXd observed(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto row = basis(s.batch, s.cores);
    for (int j = 0; j < kBasisSize; ++j) design(i, j) = row[j];
    observed(i) = s.latency_ms;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(design);
  full.setThreshold(1e-10);
  if (full.rank() < kBasisSize) {
    throw DegenerateSamples("design matrix over {b/c, 1/c, b, 1} has rank " +
                            std::to_string(full.rank()) + " < 4");
  }

  // Exact NNLS for four unknowns: the optimum is the unconstrained
  // least-squares solution on some subset of the columns (the active set
  // pinned at zero), so try every subset and keep the best nonnegative one.
  std::array<double, kBasisSize> best{};
  double best_ssr = observed.squaredNorm();
  for (unsigned mask = 1; mask < (1u << kBasisSize); ++mask) {
    std::array<int, kBasisSize> columns{};
    int width = 0;
    for (int j = 0; j < kBasisSize; ++j) {
      if (mask & (1u << j)) columns[width++] = j;
    }
    Eigen::MatrixXd sub(rows, width);
    for (int k = 0; k < width; ++k) sub.col(k) = design.col(columns[k]);
    const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(observed);
    if ((coef.array() < 0.0).any()) continue;
    const double ssr = (sub * coef - observed).squaredNorm();
    if (ssr < best_ssr) {
      best_ssr = ssr;
      best = {};
      for (int k = 0; k < width; ++k) best[columns[k]] = coef(k);
    }
  }

  ModelProfile profile{std::move(name), best[0], best[1], best[2], best[3], b_max, c_max};
  try {
    profile.validate();
  } catch (const InvalidArgument& e) {
    throw DegenerateSamples(std::string("fitted profile is unusable: ") + e.what());
  }
  return profile;
}

}  // namespace hvscale
