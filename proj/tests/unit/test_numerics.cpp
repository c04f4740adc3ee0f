#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <doctest.h>

#include "prefopt/errors.hpp"
#include "prefopt/numerics.hpp"

using namespace prefopt;

TEST_SUITE("numerics") {

TEST_CASE("softplus and log_sigmoid stay finite at extreme arguments") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(-800.0) < 1e-300);
  CHECK(log_sigmoid(-1000.0) == doctest::Approx(-1000.0));
  CHECK(log_sigmoid(1000.0) == 0.0);
  for (double x : {-30.0, -3.0, -0.5, 0.0, 0.5, 3.0, 30.0}) {
    CHECK(log_sigmoid(x) == doctest::Approx(-std::log1p(std::exp(-x))).epsilon(1e-14));
  }
}

TEST_CASE("sigmoid is symmetric and logit inverts it") {
  for (double x = -20.0; x <= 20.0; x += 0.37) {
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-15);
    const double p = sigmoid(x);
    CHECK(std::abs(logit(p) - x) < 4e-16 / (p * (1 - p)) + 1e-14);
  }
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("logsumexp uses max subtraction") {
  const std::vector<double> big = {1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small = {-1000.0, -1001.0};
  CHECK(std::isfinite(logsumexp(small)));
  const std::vector<double> plain = {0.1, -0.4, 2.0};
  double direct = 0.0;
  for (double v : plain) direct += std::exp(v);
  CHECK(logsumexp(plain) == doctest::Approx(std::log(direct)).epsilon(1e-14));
}

TEST_CASE("rng streams are reproducible and well-formed") {
  Rng a(42), b(42), c(43);
  std::vector<double> xa, xb, xc;
  for (int i = 0; i < 100; ++i) {
    xa.push_back(a.uniform01());
    xb.push_back(b.uniform01());
    xc.push_back(c.uniform01());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(std::all_of(xa.begin(), xa.end(), [](double u) { return u >= 0.0 && u < 1.0; }));

  Rng r(7);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.uniform_index(5);
    REQUIRE(k < 5);
    ++counts[k];
  }
  const double p = 0.2, se = std::sqrt(p * (1 - p) / n);
  for (int c5 : counts) CHECK(std::abs(c5 / double(n) - p) < 4 * se);

  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle permutes without loss") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng r(3);
  auto w = v;
  r.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("counter_uniform is a pure function of seed and index") {
  CHECK(counter_uniform(5, 17) == counter_uniform(5, 17));
  CHECK(counter_uniform(5, 17) != counter_uniform(5, 18));
  CHECK(counter_uniform(5, 17) != counter_uniform(6, 17));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  std::set<double> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = counter_uniform(9, i);
    CHECK((u >= 0.0 && u < 1.0));
    seen.insert(u);
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("error codes have names") {
  const Error e(ErrorCode::kInvalidNoise, "gamma too large");
  CHECK(e.code() == ErrorCode::kInvalidNoise);
  CHECK(std::string(e.what()) == "gamma too large");
  CHECK(!to_string(ErrorCode::kDiverged).empty());
}

}
