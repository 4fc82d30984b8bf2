#include <cmath>

#include "doctest.h"
#include "protodep/errors.hpp"
#include "protodep/numkit.hpp"
#include "support.hpp"

using namespace protodep;
using namespace protodep::numkit;
using testsupport::random_matrix;

TEST_CASE("matmul examples") {
  const Matrix b = Matrix::from_rows({{3, 4}, {5, 6}});
  CHECK(matmul(Matrix::identity(2), b) == b);
  CHECK(matmul(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{3}, {4}})) == Matrix::from_rows({{11}}));
  const Matrix a = random_matrix(3, 4, 1);
  CHECK(matmul(a, Matrix(4, 5)) == Matrix(3, 5));
}

TEST_CASE("matmul shape error names both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x3", msg.find("2x3") + 1) != std::string::npos);
  }
}

TEST_CASE("matmul agrees with a naive triple loop") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(7), n = 1 + rng.below(7);
    const Matrix a = random_matrix(m, k, seed * 3 + 1), b = random_matrix(k, n, seed * 3 + 2);
    CHECK(max_abs_diff(matmul(a, b), testsupport::naive_matmul(a, b)) < 1e-12);
    CHECK(max_abs_diff(matmul_nt(a, transpose(b)), testsupport::naive_matmul(a, b)) < 1e-12);
    CHECK(max_abs_diff(matmul_tn(transpose(a), b), testsupport::naive_matmul(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul is associative and distributive") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = random_matrix(3, 4, seed + 100), b = random_matrix(4, 5, seed + 200),
                 c = random_matrix(5, 2, seed + 300), d = random_matrix(4, 5, seed + 400);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
    CHECK(max_abs_diff(matmul(a, add(b, d)), add(matmul(a, b), matmul(a, d))) < 1e-9);
  }
}

TEST_CASE("softmax examples") {
  const Matrix u = softmax_rows(Matrix(1, 4, 0.0));
  for (double x : u.data()) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
  const Matrix s = softmax_rows(Matrix::from_rows({{0.7071, 0.0}}));
  CHECK(std::abs(s(0, 0) - 0.6698) < 1e-3);
  CHECK(std::abs(s(0, 1) - 0.3302) < 1e-3);
  const Matrix base = random_matrix(4, 6, 7);
  Matrix shifted = base;
  for (double& x : shifted.data()) x += 123.25;
  CHECK(max_abs_diff(softmax_rows(base), softmax_rows(shifted)) < 1e-12);
}

TEST_CASE("softmax rows sum to one and match the extended-precision oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double scale = seed % 2 ? 1e4 : 3.0;
    const Matrix m = random_matrix(3, 1 + seed % 9, seed, scale);
    const Matrix s = softmax_rows(m);
    REQUIRE(all_finite(s));
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (double x : s.row(r)) {
        CHECK(x >= 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
      const auto oracle = testsupport::naive_softmax({m.row(r).begin(), m.row(r).end()});
      for (std::size_t c = 0; c < oracle.size(); ++c) CHECK(std::abs(oracle[c] - s(r, c)) < 1e-12);
    }
  }
}

TEST_CASE("linear examples") {
  const Matrix w = random_matrix(2, 3, 5);
  const Matrix b = Matrix::from_rows({{1, 2, 3}});
  const Matrix z = linear(Matrix(4, 2), w, b);
  for (std::size_t r = 0; r < 4; ++r) CHECK(Matrix::row_vector(z.row(r)) == b);
  const Matrix x = random_matrix(3, 2, 6);
  CHECK(linear(x, Matrix::identity(2), Matrix(1, 2)) == x);
  CHECK(linear(Matrix::from_rows({{1, 1}}), Matrix::from_rows({{1, 0}, {0, 2}}), Matrix::from_rows({{1, 1}})) ==
        Matrix::from_rows({{2, 3}}));
  CHECK_THROWS_AS(linear(x, Matrix::identity(2), Matrix(1, 3)), ShapeError);
}

TEST_CASE("seeded_init is deterministic and bounded") {
  CHECK(seeded_init(5, 4, InitScheme::uniform_scaled, 9) == seeded_init(5, 4, InitScheme::uniform_scaled, 9));
  CHECK(seeded_init(5, 4, InitScheme::uniform_scaled, 9) != seeded_init(5, 4, InitScheme::uniform_scaled, 10));
  CHECK(seeded_init(3, 3, InitScheme::zeros, 1) == Matrix(3, 3));
  const Matrix m = seeded_init(16, 64, InitScheme::uniform_scaled, 3);
  double lo = 0.0, hi = 0.0;
  for (double x : m.data()) {
    CHECK(std::abs(x) <= 0.25);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  // 1024 draws should approach both ends of the interval.
  CHECK(lo < -0.2);
  CHECK(hi > 0.2);
}

TEST_CASE("Rng below is within range and shuffle is a permutation") {
  Rng rng(4);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 700; ++i) ++seen.at(rng.below(7));
  for (int c : seen) CHECK(c > 50);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("grad_check examples") {
  Matrix w = Matrix::from_rows({{3.0}});
  Matrix* ps[] = {&w};
  const double err = grad_check([&](Tape& t) { Var v = t.param(w); return sum_all(matmul(v, v)); }, ps);
  CHECK(err < 1e-6);
  Tape t;
  Var v = t.param(w);
  t.backward(sum_all(matmul(v, v)));
  CHECK(t.grad_of(w)(0, 0) == doctest::Approx(6.0));
  const double const_err = grad_check([&](Tape& tp) { return tp.constant(Matrix(1, 1, 2.0)); }, ps);
  CHECK(const_err < 1e-8);
  CHECK(w(0, 0) == 3.0);
}

TEST_CASE("grad_check rejects bad eps and non-finite objectives") {
  Matrix w = Matrix::from_rows({{1.0}});
  Matrix* ps[] = {&w};
  auto f = [&](Tape& t) { return sum_all(t.param(w)); };
  CHECK_THROWS_AS(grad_check(f, ps, {.eps = 0.0}), ConfigError);
  CHECK_THROWS_AS(grad_check(f, ps, {.eps = 0.1}), ConfigError);
  Matrix big = Matrix::from_rows({{1e300}});
  Matrix* bs[] = {&big};
  CHECK_THROWS_AS(grad_check([&](Tape& t) { Var v = t.param(big); return sum_all(matmul(v, v)); }, bs),
                  NumericError);
}

TEST_CASE("unused parameters get exactly zero gradient") {
  Matrix used = random_matrix(2, 2, 1), unused = random_matrix(2, 2, 2);
  Tape t;
  t.param(unused);
  t.backward(sum_all(t.param(used)));
  CHECK(t.grad_of(unused) == Matrix(2, 2));
  CHECK(t.grad_of(used) == Matrix(2, 2, 1.0));
}

TEST_CASE("every differentiable op passes grad_check on random shapes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 1000);
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
    Matrix a = random_matrix(m, k, seed * 11 + 1), b = random_matrix(k, n, seed * 11 + 2);
    Matrix c = random_matrix(m, k, seed * 11 + 3), row = random_matrix(1, k, seed * 11 + 4);
    Matrix bias = random_matrix(1, n, seed * 11 + 5), sq = random_matrix(m, m, seed * 11 + 6);
    Matrix gain = random_matrix(1, k, seed * 11 + 7);
    Matrix mask = random_matrix(m, k, seed * 11 + 8);
    Matrix weights = random_matrix(m, n, seed * 11 + 9);
    Matrix weights_k = random_matrix(m, k, seed * 11 + 10);
    const Matrix weights_mm = random_matrix(m, m, seed * 11 + 11), weights_1k = random_matrix(1, k, seed * 11 + 12);
    Matrix* all[] = {&a, &b, &c, &row, &bias, &sq, &gain};
    // A weighted sum keeps every output coordinate in play.
    auto reduce = [](Var v, const Matrix& w) { return sum_all(mul_const(v, w)); };
    const std::uint32_t ids[] = {0, static_cast<std::uint32_t>(m - 1), 0};
    const std::vector<std::pair<const char*, ScalarFn>> cases = {
        {"matmul", [&](Tape& t) { return reduce(matmul(t.param(a), t.param(b)), weights); }},
        {"matmul_nt", [&](Tape& t) { return reduce(matmul_nt(t.param(a), t.param(c)), weights_mm); }},
        {"add", [&](Tape& t) { return reduce(add(t.param(a), t.param(c)), weights_k); }},
        {"add_row", [&](Tape& t) { return reduce(add_row(t.param(a), t.param(row)), weights_k); }},
        {"scale", [&](Tape& t) { return reduce(scale(t.param(a), -1.7), weights_k); }},
        {"mul_const", [&](Tape& t) { return reduce(mul_const(t.param(a), mask), weights_k); }},
        {"softmax", [&](Tape& t) { return reduce(softmax_rows(t.param(sq)), weights_mm); }},
        {"softmax causal", [&](Tape& t) { return reduce(softmax_rows(t.param(sq), true), weights_mm); }},
        {"linear", [&](Tape& t) { return reduce(linear(t.param(a), t.param(b), t.param(bias)), weights); }},
        {"gelu", [&](Tape& t) { return reduce(gelu(t.param(a)), weights_k); }},
        {"sigmoid", [&](Tape& t) { return reduce(sigmoid(t.param(a)), weights_k); }},
        {"layer_norm",
         [&](Tape& t) { return reduce(layer_norm(t.param(a), t.param(gain), t.param(row)), weights_k); }},
        {"gather", [&](Tape& t) { return sum_all(mul_const(gather_rows(t.param(sq), ids), random_matrix(3, m, 5))); }},
        {"slice", [&](Tape& t) { return sum_all(slice_rows(t.param(a), 0, m)); }},
        {"concat_rows",
         [&](Tape& t) {
           const Var parts[] = {t.param(a), t.param(c)};
           return sum_all(mul_const(concat_rows(parts), random_matrix(2 * m, k, 6)));
         }},
        {"concat_cols",
         [&](Tape& t) {
           const Var parts[] = {t.param(a), t.param(c)};
           return sum_all(mul_const(concat_cols(parts), random_matrix(m, 2 * k, 7)));
         }},
        {"mean_rows", [&](Tape& t) { return reduce(mean_rows(t.param(a)), weights_1k); }},
        {"column_max", [&](Tape& t) { return reduce(column_max(t.param(a)), weights_1k); }},
    };
    for (const auto& [name, fn] : cases) {
      INFO(std::string(name) << " seed " << seed);
      CHECK(grad_check(fn, all, {.eps = 1e-4}) < 1e-4);
    }
  }
}

TEST_CASE("column_max picks the lowest row on ties") {
  Tape t;
  std::vector<std::size_t> arg;
  Var v = column_max(t.constant(Matrix::from_rows({{1, 5}, {3, 5}, {3, 2}})), &arg);
  CHECK(v.value() == Matrix::from_rows({{3, 5}}));
  CHECK(arg == std::vector<std::size_t>{1, 0});
}

TEST_CASE("tape rejects non-finite values") {
  Tape t;
  CHECK_THROWS_AS(matmul(t.constant(Matrix(1, 1, 1e200)), t.constant(Matrix(1, 1, 1e200))), NumericError);
}
