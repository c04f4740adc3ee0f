#include <cmath>
#include <vector>

#include <doctest.h>

#include "fixtures.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/eval.hpp"
#include "prefopt/noise.hpp"

using namespace prefopt;

namespace {

Dataset random_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.vocab_size = 8;
  for (std::size_t i = 0; i < n; ++i) d.pairs.push_back(random_pair(rng, {}));
  return d;
}

double mean_winner_score(const Dataset& d) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& p : d.pairs) {
    for (const auto& s : p.winner.segments) {
      total += *s.score;
      ++count;
    }
  }
  return total / count;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("noise") {

TEST_CASE("noise kind names") {
  for (NoiseKind k : {NoiseKind::kNone, NoiseKind::kPreferenceFlip, NoiseKind::kSegmentPerturb}) {
    CHECK(parse_noise_kind(to_string(k)) == k);
  }
  CHECK(code_of([] { parse_noise_kind("gaussian"); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("preference flips") {
  const Dataset d = random_dataset(10000, 1);

  SUBCASE("flip rate is close to gamma") {
    const auto mask = flip_mask(d.pairs.size(), 0.3, 5);
    std::size_t flipped = 0;
    for (bool b : mask) flipped += b;
    const double rate = flipped / double(mask.size());
    CHECK(std::abs(rate - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / mask.size()));

    const Dataset noisy = apply_flip_mask(d, mask);
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      if (mask[i]) {
        CHECK(noisy.pairs[i] == d.pairs[i].swapped());
      } else {
        CHECK(noisy.pairs[i] == d.pairs[i]);
      }
    }
  }
  SUBCASE("the same mask twice is the identity") {
    const auto mask = flip_mask(d.pairs.size(), 0.45, 9);
    CHECK(apply_flip_mask(apply_flip_mask(d, mask), mask).pairs == d.pairs);
  }
  SUBCASE("gamma zero changes nothing") {
    CHECK(flip_preferences(d, 0.0, 3).pairs == d.pairs);
  }
  SUBCASE("deterministic under the seed") {
    CHECK(flip_mask(500, 0.2, 11) == flip_mask(500, 0.2, 11));
    CHECK(flip_mask(500, 0.2, 11) != flip_mask(500, 0.2, 12));
  }
  SUBCASE("invalid rates and lengths") {
    CHECK(code_of([&] { flip_mask(10, 0.5, 1); }) == ErrorCode::kInvalidNoise);
    CHECK(code_of([&] { flip_mask(10, -0.01, 1); }) == ErrorCode::kInvalidNoise);
    CHECK(code_of([&] { apply_flip_mask(d, std::vector<bool>(3)); }) == ErrorCode::kInvalidInput);
  }
}

TEST_CASE("segment perturbation") {
  SUBCASE("worked example") {
    const auto p = fixtures::pair({1}, fixtures::response({2, 3, 4}, {2, 1}, {4.0, 3.0}),
                                  fixtures::response({5, 6}, {2}, {1.0}));
    const auto q = perturb_scores(p, 0.5);
    CHECK(q.winner.scores() == std::vector<double>{3.5, 2.5});
    CHECK(q.loser.scores() == std::vector<double>{1.5});
    CHECK(q.winner.tokens == p.winner.tokens);
    CHECK(q.prompt == p.prompt);
  }
  SUBCASE("paired sums are invariant") {
    const Dataset d = random_dataset(200, 2);
    const Dataset noisy = perturb_dataset(d, 8);
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      const auto& a = d.pairs[i];
      const auto& b = noisy.pairs[i];
      for (std::size_t k = 0; k < a.winner.segments.size(); ++k) {
        CHECK(std::abs((*b.winner.segments[k].score + *b.loser.segments[k].score) -
                       (*a.winner.segments[k].score + *a.loser.segments[k].score)) < 1e-12);
      }
    }
  }
  SUBCASE("deltas are uniform on the unit interval") {
    const auto deltas = draw_deltas(10000, 4);
    double sum = 0.0;
    for (double v : deltas) {
      CHECK((v >= 0.0 && v < 1.0));
      sum += v;
    }
    CHECK(std::abs(sum / deltas.size() - 0.5) < 3.0 * (1.0 / std::sqrt(12.0)) / 100.0);
    CHECK(draw_deltas(100, 4) == std::vector<double>(deltas.begin(), deltas.begin() + 100));
  }
  SUBCASE("mean winner score drops by the mean delta") {
    InstanceShape shape;
    shape.single_segment = true;
    Rng rng(6);
    Dataset d;
    for (int i = 0; i < 2000; ++i) d.pairs.push_back(random_pair(rng, shape));
    const auto deltas = draw_deltas(d.pairs.size(), 21);
    double mean_delta = 0.0;
    for (double v : deltas) mean_delta += v / deltas.size();
    const Dataset noisy = perturb_dataset(d, 21);
    CHECK(mean_winner_score(d) - mean_winner_score(noisy) == doctest::Approx(mean_delta).epsilon(1e-10));
  }
  SUBCASE("errors") {
    const auto p = fixtures::pair({1}, fixtures::response({2}, {1}, {4.0}), fixtures::response({5}, {1}, {1.0}));
    CHECK(code_of([&] { perturb_scores(p, 1.2); }) == ErrorCode::kInvalidNoise);
    CHECK(code_of([&] { perturb_scores(p, -0.2); }) == ErrorCode::kInvalidNoise);
    const auto unscored = fixtures::pair({1}, fixtures::response({2}, {1}, {}), fixtures::response({5}, {1}, {}));
    CHECK(code_of([&] { perturb_scores(unscored, 0.2); }) == ErrorCode::kMissingScores);
    Dataset d;
    d.pairs = {unscored};
    CHECK(code_of([&] { perturb_dataset(d, 1); }) == ErrorCode::kMissingScores);
  }
}

TEST_CASE("apply_noise dispatches on the kind") {
  const Dataset d = random_dataset(300, 3);
  CHECK(apply_noise(d, {NoiseKind::kNone, 0.0, 1}).pairs == d.pairs);
  CHECK(apply_noise(d, {NoiseKind::kPreferenceFlip, 0.2, 4}).pairs == flip_preferences(d, 0.2, 4).pairs);
  CHECK(apply_noise(d, {NoiseKind::kSegmentPerturb, 0.0, 4}).pairs == perturb_dataset(d, 4).pairs);
  CHECK(code_of([&] { apply_noise(d, {NoiseKind::kPreferenceFlip, 0.7, 4}); }) == ErrorCode::kInvalidNoise);
}

}
