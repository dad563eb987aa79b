// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels on SAE- and ridge-sized inputs.
// Run with --benchmark_filter=... ; thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "tsae/kernels.hpp"
#include "tsae/sae.hpp"

namespace {

using tsae::Matrix;
using tsae::Vector;
namespace k = tsae::kernels;

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (auto& v : m.reshaped()) v = g(rng);
  return m;
}

tsae::Tensor3 gaussian_tensor(std::size_t n, std::size_t t, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  tsae::Tensor3 x(n, t, d);
  for (auto& v : x.data()) v = g(rng);
  return x;
}

template <bool Parallel>
void BM_AffineRows(benchmark::State& state) {
  const auto rows = state.range(0);
  const Matrix x = gaussian(rows, 320, 1), w = gaussian(160, 320, 2);
  const Vector b = Vector::Zero(160);
  for (auto _ : state) {
    Matrix out = Parallel ? k::parallel::affine_rows(x, w, b) : k::serial::affine_rows(x, w, b);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

template <bool Parallel>
void BM_CrossRows(benchmark::State& state) {
  const auto rows = state.range(0);
  const Matrix a = gaussian(rows, 160, 3), b = gaussian(rows, 320, 4);
  for (auto _ : state) {
    Matrix out = Parallel ? k::parallel::cross_rows(a, b) : k::serial::cross_rows(a, b);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

template <bool Parallel>
void BM_CenteredMoments(benchmark::State& state) {
  const auto rows = state.range(0);
  const Matrix x = gaussian(rows, 64, 5), y = gaussian(rows, 64, 6);
  for (auto _ : state) {
    auto m = Parallel ? k::parallel::centered_moments(x, y) : k::serial::centered_moments(x, y);
    benchmark::DoNotOptimize(m.sxx.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

template <bool Parallel>
void BM_ErrorSums(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto a = gaussian_tensor(rows, 5, 64, 7), r = gaussian_tensor(rows, 5, 64, 8);
  for (auto _ : state) {
    auto s = Parallel ? k::parallel::error_sums(a, r) : k::serial::error_sums(a, r);
    benchmark::DoNotOptimize(s.sst_global);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

void BM_TrainStep(benchmark::State& state) {
  const Matrix x = gaussian(256, 320, 9);
  tsae::SaeModel model = tsae::init_model(320, 160, 16, 1);
  const std::vector<bool> dead(160, false);
  for (auto _ : state) {
    auto res = tsae::loss_and_grads(model, x, {}, dead);
    benchmark::DoNotOptimize(res.loss);
  }
}

}  // namespace

BENCHMARK(BM_AffineRows<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_AffineRows<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_CrossRows<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_CrossRows<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_CenteredMoments<false>)->Arg(8192)->Arg(65536);
BENCHMARK(BM_CenteredMoments<true>)->Arg(8192)->Arg(65536);
BENCHMARK(BM_ErrorSums<false>)->Arg(8192)->Arg(65536);
BENCHMARK(BM_ErrorSums<true>)->Arg(8192)->Arg(65536);
BENCHMARK(BM_TrainStep);

BENCHMARK_MAIN();
