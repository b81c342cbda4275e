// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sfa/errors.hpp"
#include "sfa/merge.hpp"

using sfa::FisherDiagonal;
using sfa::MergeWeights;
using sfa::ParamVector;
using sfa::TaskVector;

namespace {

ParamVector pv(std::vector<double> v) { return ParamVector(std::move(v)); }
TaskVector tv(std::vector<double> v) { return TaskVector{pv(std::move(v))}; }
MergeWeights mw(std::vector<double> w) { return MergeWeights{std::move(w)}; }

double max_abs_diff(const ParamVector& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Every assignment of `alphabet` values to `count` slots.
std::vector<std::vector<double>> enumerate(const std::vector<double>& alphabet, std::size_t count) {
  std::vector<std::vector<double>> out{{}};
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double a : alphabet) {
        auto v = prefix;
        v.push_back(a);
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("task_vector examples") {
  CHECK(sfa::task_vector(pv({1, 1}), pv({3, 0})).delta == pv({2, -1}));
  CHECK(sfa::task_vector(pv({5, 6}), pv({5, 6})).delta == pv({0, 0}));
  CHECK_THROWS_AS(sfa::task_vector(pv({1}), pv({1, 2})), sfa::DimensionError);

  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto base = sfa::testing::random_vector(gen, 9);
    const auto ft = sfa::testing::random_vector(gen, 9);
    const auto back = sfa::task_arithmetic(base, {sfa::task_vector(base, ft)}, mw({1.0}));
    CHECK(max_abs_diff(back, std::vector<double>(ft.values().begin(), ft.values().end())) <= 1e-15);
  }
}

TEST_CASE("task_arithmetic examples") {
  CHECK(sfa::task_arithmetic(pv({0, 0}), {tv({2, 0}), tv({0, 4})}, mw({0.5, 0.5})) == pv({1, 2}));
  CHECK(sfa::task_arithmetic(pv({3, -1}), {tv({2, 0}), tv({0, 4})}, mw({0, 0})) == pv({3, -1}));
  CHECK(sfa::task_arithmetic(pv({1, 1}), {tv({2, -1})}, mw({1})) == pv({3, 0}));
  CHECK_THROWS_AS(sfa::task_arithmetic(pv({0, 0}), {tv({1, 1})}, mw({1, 1})), sfa::DimensionError);
  CHECK_THROWS_AS(sfa::task_arithmetic(pv({0, 0}), {tv({1})}, mw({1})), sfa::DimensionError);
}

TEST_CASE("task_arithmetic with convex weights equals averaging the fine-tuned models") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial % 4);
    const auto base = sfa::testing::random_vector(gen, 16, 3.0);
    std::vector<ParamVector> ft;
    std::vector<TaskVector> deltas;
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& x : w) total += (x = unit(gen) + 0.01);
    for (auto& x : w) x /= total;
    for (std::size_t i = 0; i < k; ++i) {
      ft.push_back(sfa::testing::random_vector(gen, 16, 3.0));
      deltas.push_back(sfa::task_vector(base, ft.back()));
    }
    std::vector<double> direct(16, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < 16; ++j) direct[j] += w[i] * ft[i][j];
    CHECK(max_abs_diff(sfa::task_arithmetic(base, deltas, mw(w)), direct) <= 1e-12);
  }
}

TEST_CASE("wise_ft aliases weighted_average") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = sfa::testing::random_vector(gen, 7);
    const auto f = sfa::testing::random_vector(gen, 7);
    const double beta = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    CHECK(sfa::wise_ft(b, f, beta) == sfa::weighted_average(b, f, beta));
  }
  CHECK(sfa::wise_ft(pv({1, 2}), pv({5, 6}), 1.0) == pv({1, 2}));
  CHECK(sfa::wise_ft(pv({1, 2}), pv({5, 6}), 0.0) == pv({5, 6}));
  CHECK_THROWS_AS(sfa::wise_ft(pv({1}), pv({2}), 1.5), sfa::DomainError);
}

TEST_CASE("ties examples") {
  SUBCASE("single vector at density 1 is task arithmetic") {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 50; ++trial) {
      const auto base = sfa::testing::random_vector(gen, 12);
      const TaskVector t{sfa::testing::random_vector(gen, 12)};
      const auto plain = sfa::task_arithmetic(base, {t}, mw({1.0}));
      CHECK(sfa::ties_merge(base, {t}, 1.0, mw({1.0})) == plain);
      // any positive weight cancels in the disjoint mean, up to rounding
      const double w = std::uniform_real_distribution<double>(0.1, 2.0)(gen);
      const auto scaled = sfa::ties_merge(base, {t}, 1.0, mw({w}));
      CHECK(max_abs_diff(scaled, std::vector<double>(plain.values().begin(), plain.values().end())) <= 1e-14);
    }
  }
  SUBCASE("sign election with agreeing vectors") {
    const auto out = sfa::ties_merge(pv({0, 0}), {tv({2, -1}), tv({2, 3})}, 1.0, mw({0.5, 0.5}));
    CHECK(out == pv({2, 3}));
    const auto shifted = sfa::ties_merge(pv({1, 1}), {tv({2, -1}), tv({2, 3})}, 1.0, mw({0.5, 0.5}));
    CHECK(shifted == pv({3, 4}));
  }
  SUBCASE("trim before electing") {
    CHECK(sfa::ties_trim(pv({4, 0.1}), 0.5) == pv({4, 0}));
    CHECK(sfa::ties_merge(pv({0, 0}), {tv({4, 0.1})}, 0.5, mw({1})) == pv({4, 0}));
  }
  SUBCASE("equal magnitudes keep the lower index") {
    CHECK(sfa::ties_trim(pv({1, -1, 1}), 0.3) == pv({1, 0, 0}));
    CHECK(sfa::ties_trim(pv({-2, 1, 2, -1}), 0.5) == pv({-2, 0, 2, 0}));
  }
  SUBCASE("zero vote elects positive; no contributor gives 0") {
    CHECK(sfa::ties_merge(pv({0}), {tv({1}), tv({-1})}, 1.0, mw({1, 1})) == pv({1}));
    CHECK(sfa::ties_merge(pv({0}), {tv({0}), tv({0})}, 1.0, mw({1, 1})) == pv({0}));
  }
  SUBCASE("density outside (0, 1]") {
    CHECK_THROWS_AS(sfa::ties_merge(pv({0}), {tv({1})}, 0.0, mw({1})), sfa::DomainError);
    CHECK_THROWS_AS(sfa::ties_merge(pv({0}), {tv({1})}, 1.5, mw({1})), sfa::DomainError);
  }
}

TEST_CASE("ties matches the brute-force oracle on enumerated small fixtures") {
  const std::vector<double> alphabet{-2, -1, 0, 1, 2};
  const std::vector<double> densities{0.3, 0.5, 0.7, 1.0};
  const std::vector<std::vector<double>> weightings2{{1, 1}, {0.3, 0.7}, {2, 0.5}};
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  const auto run = [&](std::size_t dim, std::size_t k, const std::vector<std::vector<double>>& weightings) {
    const std::vector<double> base(dim, 0.25);
    for (const auto& flat : enumerate(alphabet, dim * k)) {
      std::vector<std::vector<double>> deltas(k);
      std::vector<TaskVector> tvs;
      for (std::size_t v = 0; v < k; ++v) {
        deltas[v].assign(flat.begin() + static_cast<long>(v * dim), flat.begin() + static_cast<long>((v + 1) * dim));
        tvs.push_back(tv(deltas[v]));
      }
      for (double density : densities) {
        for (const auto& w : weightings) {
          const auto got = sfa::ties_merge(pv(base), tvs, density, mw(w));
          const auto want = sfa::oracle::ties_merge(base, deltas, density, w);
          ++cases;
          if (max_abs_diff(got, want) > 1e-12) ++mismatches;
        }
      }
    }
  };
  run(2, 2, weightings2);
  run(3, 2, weightings2);
  run(2, 3, {{1, 1, 1}, {0.2, 0.3, 0.5}});
  CHECK(cases > 100000);
  CHECK(mismatches == 0);
}

TEST_CASE("fisher_merge examples") {
  using Fishers = std::vector<FisherDiagonal>;
  CHECK(sfa::fisher_merge({pv({0}), pv({4})}, Fishers{FisherDiagonal({1}), FisherDiagonal({3})}, mw({1, 1})) ==
        pv({3}));

  // F = (2, 0) and (1, 1), lambda = (1, 3): coordinate 0 = (2*1 + 3*5) / (2 + 3) = 17/5,
  // coordinate 1 = (0 + 3*1*6) / 3 = 6
  const auto two = sfa::fisher_merge({pv({1, 2}), pv({5, 6})},
                                     Fishers{FisherDiagonal({2, 0}), FisherDiagonal({1, 1})}, mw({1, 3}));
  CHECK(two[0] == doctest::Approx(3.4).epsilon(1e-15));
  CHECK(two[1] == 6.0);

  SUBCASE("equal uniform Fishers give the plain average") {
    const auto out = sfa::fisher_merge({pv({1, 3}), pv({3, 7})},
                                       Fishers{FisherDiagonal({2, 2}), FisherDiagonal({2, 2})}, mw({1, 1}));
    CHECK(out == pv({2, 5}));
  }
  SUBCASE("one all-zero Fisher defers to the other model") {
    const auto out = sfa::fisher_merge({pv({1, 3}), pv({9, 7})},
                                       Fishers{FisherDiagonal({0, 0}), FisherDiagonal({0.5, 4})}, mw({1, 1}));
    CHECK(out == pv({9, 7}));
  }
  SUBCASE("zero denominator falls back to the unweighted mean") {
    const auto out = sfa::fisher_merge({pv({1, 3}), pv({9, 7})},
                                       Fishers{FisherDiagonal({0, 1}), FisherDiagonal({0, 0})}, mw({1, 1}));
    CHECK(out == pv({5, 3}));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(FisherDiagonal({-1.0}), sfa::DomainError);
    CHECK_THROWS_AS(sfa::fisher_merge({pv({1}), pv({2})}, Fishers{FisherDiagonal({1})}, mw({1, 1})),
                    sfa::DimensionError);
    CHECK_THROWS_AS(sfa::fisher_merge({pv({1}), pv({2})}, Fishers{FisherDiagonal({1}), FisherDiagonal({1})},
                                      mw({1, -1})),
                    sfa::DomainError);
  }
}

TEST_CASE("fisher_merge agrees with the oracle and reduces to lambda-weighted averaging") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
    std::vector<ParamVector> models;
    std::vector<std::vector<double>> raw_models;
    std::vector<FisherDiagonal> fishers;
    std::vector<std::vector<double>> raw_fishers;
    std::vector<double> lambdas(k);
    for (auto& l : lambdas) l = unit(gen) + 0.05;
    const auto shared = sfa::testing::random_values(gen, 10);
    for (std::size_t i = 0; i < k; ++i) {
      raw_models.push_back(sfa::testing::random_values(gen, 10, 4.0));
      models.push_back(pv(raw_models.back()));
      auto f = sfa::testing::random_values(gen, 10);
      for (auto& x : f) x = x < -0.8 ? 0.0 : std::abs(x);
      raw_fishers.push_back(f);
      fishers.emplace_back(f);
    }
    const auto merged = sfa::fisher_merge(models, fishers, mw(lambdas));
    CHECK(max_abs_diff(merged, sfa::oracle::fisher_merge(raw_models, raw_fishers, lambdas)) <= 1e-12);

    std::vector<double> same(10);
    for (std::size_t j = 0; j < 10; ++j) same[j] = std::abs(shared[j]) + 0.1;
    const auto equal = sfa::fisher_merge(models, std::vector<FisherDiagonal>(k, FisherDiagonal(same)), mw(lambdas));
    double lsum = 0.0;
    for (double l : lambdas) lsum += l;
    std::vector<double> avg(10, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < 10; ++j) avg[j] += lambdas[i] / lsum * raw_models[i][j];
    CHECK(max_abs_diff(equal, avg) <= 1e-12);
  }
}

TEST_CASE("ewc_merge_step") {
  CHECK(sfa::ewc_merge_step(pv({5}), pv({0}), FisherDiagonal({2}), 0.1)[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(sfa::ewc_merge_step(pv({5, -2}), pv({1, 1}), FisherDiagonal({0, 0}), 0.3) == pv({5, -2}));
  CHECK(sfa::ewc_merge_step(pv({5, -2}), pv({1, 7}), FisherDiagonal({4, 4}), 0.25) == pv({1, 7}));
  CHECK_THROWS_AS(sfa::ewc_merge_step(pv({5}), pv({0}), FisherDiagonal({2}), 0.6), sfa::DomainError);
  CHECK_THROWS_AS(sfa::ewc_merge_step(pv({5}), pv({0, 1}), FisherDiagonal({2}), 0.1), sfa::DimensionError);

  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto star = sfa::testing::random_vector(gen, 11);
    const auto anchor = sfa::testing::random_vector(gen, 11);
    const double c = 3.0 * unit(gen);
    const double eta = unit(gen) / 3.0;
    const auto got = sfa::ewc_merge_step(star, anchor, FisherDiagonal(std::vector<double>(11, c)), eta);
    CHECK(got == sfa::weighted_average(anchor, star, eta * c));
  }
}

TEST_CASE("merge weights validation") {
  CHECK_NOTHROW(MergeWeights::uniform(3).validate_convex());
  CHECK_NOTHROW(mw({0.25, 0.75}).validate_convex());
  CHECK_THROWS_AS(mw({0.5, 0.6}).validate_convex(), sfa::DomainError);
  CHECK_THROWS_AS(mw({-0.5, 1.5}).validate_convex(), sfa::DomainError);
  CHECK_THROWS_AS(mw({std::nan("")}).validate(), sfa::NumericError);
}
