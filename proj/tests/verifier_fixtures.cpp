#include "verifier_fixtures.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "segraph/providers.hpp"

namespace segraph::testing {

std::vector<VerifierSample> separable_corpus(int n, int d, int length, std::uint64_t seed,
                                             Eigen::VectorXd* direction) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd u(d);
  for (int i = 0; i < d; ++i) u[i] = g(rng);
  u.normalize();
  if (direction) *direction = u;

  const auto noise = [&](int rows) {
    Eigen::MatrixXd m(rows, d);
    if (d == kEncoderDim) {
      std::string text;
      for (int t = 0; t < rows; ++t) text += fmt::format("w{} ", rng() % 5000);
      m = stub_embed(text, seed).rows.cast<double>();
    } else {
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = g(rng);
        m.row(i).normalize();
      }
    }
    return m;
  };
  std::vector<VerifierSample> out;
  for (int s = 0; s < n; ++s) {
    VerifierSample sample;
    sample.label = s % 2;
    const double sign = sample.label == 1 ? 1.0 : -1.0;
    for (auto* m : {&sample.h1, &sample.h2}) {
      *m = noise(length);
      for (int i = 0; i < m->rows(); ++i) {
        m->row(i) += sign * 0.5 * u.transpose();
        m->row(i).normalize();
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

GradientCheck gradient_check(const VerifierParams& params, std::mt19937_64& rng) {
  const int d = params.dims().d;
  std::normal_distribution<double> g;
  const auto rows = [&](int n) {
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) m(i, j) = g(rng);
      m.row(i).normalize();
    }
    return m;
  };
  const ClassWeights weights{1.7, 0.6};
  GradientCheck result;
  for (int label : {1, 0}) {
    const VerifierSample sample{rows(5), rows(4), label};
    const DropoutStream mask_seed{static_cast<std::uint64_t>(40 + label)};
    auto work = params;
    std::vector<Eigen::MatrixXd> analytic;
    auto stream = mask_seed;
    loss_and_gradient(work, sample, weights, Mode::kTrain, &stream, &analytic);
    auto blocks = work.blocks();
    constexpr double eps = 1e-4;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (Eigen::Index i = 0; i < blocks[b]->size(); ++i) {
        double& w = blocks[b]->data()[i];
        const double saved = w;
        w = saved + eps;
        stream = mask_seed;
        const double up = loss_and_gradient(work, sample, weights, Mode::kTrain, &stream, nullptr);
        w = saved - eps;
        stream = mask_seed;
        const double down = loss_and_gradient(work, sample, weights, Mode::kTrain, &stream, nullptr);
        w = saved;
        const double numeric = (up - down) / (2 * eps);
        const double a = analytic[b].data()[i];
        const double diff = std::abs(a - numeric);
        result.max_absolute = std::max(result.max_absolute, diff);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (scale > 1e-8) result.max_relative = std::max(result.max_relative, diff / scale);
        ++result.entries;
      }
    }
  }
  return result;
}

double max_gradient_error(const VerifierParams& params, std::mt19937_64& rng) {
  return gradient_check(params, rng).max_relative;
}

}  // namespace segraph::testing
