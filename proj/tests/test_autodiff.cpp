#include <doctest.h>

#include <cmath>

#include "kbdial/autodiff.hpp"
#include "checks.hpp"
#include "support.hpp"

using namespace kbdial;
using kbdial::testing::op_gradient_error;
using kbdial::testing::random_tensor;

namespace {
constexpr double kGradTol = 1e-4;
std::mt19937_64 rng_for(std::uint64_t s) { return std::mt19937_64(s); }
}  // namespace

TEST_CASE("matmul forward matches hand product") {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = g.constant(Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12}));
  const Tensor c = ad::matmul(a, b).value();
  CHECK(c == Tensor::matrix(2, 2, {58, 64, 139, 154}));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(ad::matmul(a, b), DimensionError);
}

TEST_CASE("softmax of equal logits is uniform and columns sum to one") {
  Graph g;
  auto rng = rng_for(1);
  const Tensor s0 = ad::softmax(g.constant(Tensor({4, 1}, 2.5)), 0).value();
  for (double v : s0.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  const Tensor s = ad::softmax(g.constant(random_tensor({5, 3}, rng, -30, 30)), 0).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double total = 0;
    for (std::size_t r = 0; r < 5; ++r) total += s.at(r, c);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax stays finite for large logits") {
  Graph g;
  const Tensor s = ad::softmax(g.constant(Tensor::matrix(1, 3, {1000, 999, -1000})), 1).value();
  CHECK(s.all_finite());
  CHECK(s.at(0, 0) > s.at(0, 1));
}

TEST_CASE("backward on a non-scalar loss is a contract error") {
  Graph g;
  Var a = g.input(Tensor({2, 1}, 1.0));
  CHECK_THROWS_AS(g.backward(a), ContractError);
}

TEST_CASE("dropout rate outside [0,1) is rejected") {
  Graph g;
  auto rng = rng_for(2);
  Var a = g.input(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(ad::dropout(a, 1.0, true, rng), ContractError);
  CHECK_THROWS_AS(ad::dropout(a, -0.1, true, rng), ContractError);
  CHECK(ad::dropout(a, 0.5, false, rng).value() == a.value());
}

TEST_CASE("inverted dropout keeps the expected value") {
  Graph g = Graph::inference();
  auto rng = rng_for(3);
  Var a = g.constant(Tensor({200, 200}, 1.0));
  const Tensor d = ad::dropout(a, 0.75, true, rng).value();
  double mean = 0;
  for (double v : d.values()) {
    CHECK((v == 0.0 || std::abs(v - 4.0) < 1e-12));
    mean += v;
  }
  mean /= static_cast<double>(d.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("parameter gradients accumulate into the sink") {
  ParameterSet params;
  params.add("w", Tensor::matrix(1, 2, {2.0, -1.0}));
  Gradients grads(params);
  Graph g(&grads);
  Var w = g.param(params[0]);
  Var x = g.constant(Tensor::matrix(2, 1, {3.0, 4.0}));
  g.backward(ad::matmul(w, x));
  CHECK(grads[0] == Tensor::matrix(1, 2, {3.0, 4.0}));
}

TEST_CASE("gradient checks for every op") {
  for (const auto& m : checks::op_gradient_errors()) {
    CAPTURE(m.name);
    CHECK(m.value < kGradTol);
  }
}
