// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "astroseq/errors.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/rng.hpp"
#include "gradcheck.hpp"
#include "primitive_cases.hpp"

using namespace astroseq;
using testing::gradcheck;

namespace {

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("every primitive passes finite differences") {
  for (std::uint64_t seed : {0, 1, 2}) {
    for (const auto& c : testing::primitive_cases(seed)) {
      CAPTURE(c.name);
      CAPTURE(seed);
      CHECK(gradcheck(c.f, c.inputs, seed) < kTol);
    }
  }
}

TEST_CASE("reciprocal domain rules") {
  Tape tape;
  CHECK_THROWS_AS(ad::reciprocal(tape.leaf(Matrix{{0.0}}, true)), DomainError);
  CHECK_THROWS_AS(ad::reciprocal(tape.leaf(Matrix{{-1.0}}, true)), DomainError);
  Var tiny = tape.leaf(Matrix{{1e-9}}, true);
  Var r = ad::reciprocal(tiny);
  CHECK(r.value()(0, 0) == doctest::Approx(1e6));
  tape.backward(r, Matrix{{1.0}});
  CHECK(tiny.grad()(0, 0) == 0.0);
}

TEST_CASE("power rejects non-positive bases") {
  Tape tape;
  CHECK_THROWS_AS(ad::power(tape.leaf(Matrix{{0.0}}, true), 0.5), DomainError);
}

TEST_CASE("elu_plus_one is positive and continuous at zero") {
  Tape tape;
  const Var y = ad::elu_plus_one(tape.leaf(Matrix{{-30.0, 0.0, 2.0}}, false));
  CHECK(y.value()(0, 0) > 0.0);
  CHECK(y.value()(0, 1) == 1.0);
  CHECK(y.value()(0, 2) == 3.0);
}

TEST_CASE("cross entropy of uniform logits is log of the class count") {
  Tape tape;
  const std::vector<int> labels{1};
  const Var l = ad::cross_entropy(tape.leaf(Matrix(1, 4, 0.0), false), labels);
  CHECK(l.value()(0, 0) == doctest::Approx(std::log(4.0)));
}
