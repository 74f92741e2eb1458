#include <algorithm>

#include "common.hpp"
#include "doctest.h"
#include "ruinsim/stats.hpp"

using namespace ruinsim;
using namespace testutil;

TEST_CASE("shift makes the increment mean equal to -1") {
  const auto model = canonical_model();
  CHECK(model.shift()[0] == doctest::Approx(-1.0 - 2.5 / 1.5));
  CHECK(model.shift()[1] == doctest::Approx(-1.0));
  Rng rng(1);
  const std::size_t n = 1'000'000;
  double s0 = 0, s1 = 0, q0 = 0;
  Vec x(2);
  for (std::size_t i = 0; i < n; ++i) {
    model.sample(rng, x);
    s0 += x[0];
    s1 += x[1];
    q0 += x[0] * x[0];
  }
  const double m0 = s0 / n, sd0 = std::sqrt(q0 / n - m0 * m0);
  CHECK(std::abs(m0 + 1.0) < 5.0 * sd0 / std::sqrt(double(n)));
  CHECK(s1 / n == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("single-atom draws lie on the ray r theta + c, r >= xm") {
  const auto model = canonical_model();
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const Vec x = model.sample(rng);
    CHECK(x[1] == model.shift()[1]);
    CHECK(x[0] - model.shift()[0] >= 1.0);
  }
}

TEST_CASE("P(X1 > 10) matches the Pareto closed form") {
  const auto model = canonical_model();
  const double exact = std::pow(1.0 / (10.0 + 8.0 / 3.0), 2.5);
  CHECK(exact == doctest::Approx(1.75e-3).epsilon(0.01));
  Rng rng(3);
  const std::size_t n = 10'000'000;
  std::size_t hits = 0;
  Vec x(2);
  for (std::size_t i = 0; i < n; ++i) {
    model.sample(rng, x);
    hits += x[0] > 10.0;
  }
  const double freq = double(hits) / n;
  CHECK(std::abs(freq - exact) < 3.0 * binom_se(exact, n));
}

TEST_CASE("spectral measure validation") {
  CHECK_THROWS_AS(SpectralMeasure({}), ValidationError);
  CHECK_THROWS_AS(SpectralMeasure({{{0.0, 0.0}, 1.0}}), ValidationError);
  CHECK_THROWS_AS(SpectralMeasure({{{1.0, 0.0}, -1.0}}), ValidationError);
  const SpectralMeasure s({{{3.0, 4.0}, 2.0}, {{0.0, 2.0}, 2.0}});
  CHECK(norm2(s.atom(0).dir) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.atom(0).weight + s.atom(1).weight == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(IncrementModel(1.0, 1.0, s), ValidationError);
}

TEST_CASE("tail_union_prob closed form and edge cases") {
  const auto model = canonical_model();
  const HalfSpaceProjection proj(model, {{1.0, 0.0}});
  // rho <= xm: sure event.
  CHECK(proj.tail_union_prob(Vec{model.shift()[0] + 0.5}) == 1.0);
  CHECK(proj.tail_union_prob(Vec{HUGE_VAL}) == 0.0);
  const double u = 7.0;
  CHECK(proj.tail_union_prob(Vec{u}) == doctest::Approx(std::pow(u - model.shift()[0], -2.5)));
  CHECK_THROWS(proj.tail_union_prob(Vec{std::nan("")}));
  // Monotone in the threshold.
  double prev = 1.0;
  for (double t = -5; t < 50; t += 0.5) {
    const double p = proj.tail_union_prob(Vec{t});
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("tail_union_prob agrees with brute force for two atoms") {
  const auto model = two_atom_model();
  const std::vector<Vec> normals{{1.0, 0.0}, {0.3, 0.7}};
  const HalfSpaceProjection proj(model, normals);
  const Vec u{4.0, 2.5};
  const double exact = proj.tail_union_prob(u);
  Rng rng(4);
  const std::size_t n = 10'000'000;
  std::size_t hits = 0;
  Vec x(2);
  for (std::size_t i = 0; i < n; ++i) {
    model.sample(rng, x);
    hits += dot(x, normals[0]) > u[0] || dot(x, normals[1]) > u[1];
  }
  CHECK(std::abs(double(hits) / n - exact) < 4.0 * binom_se(exact, n));
}

TEST_CASE("conditional jump: support, truncated Pareto radius, atom frequencies") {
  const auto model = canonical_model();
  const HalfSpaceProjection proj(model, {{1.0, 0.0}});
  const Vec u{20.0};
  const double rho = u[0] - model.shift()[0];
  Rng rng(5);
  std::vector<double> radii;
  Vec x(2);
  for (int i = 0; i < 100000; ++i) {
    proj.sample_conditional(u, rng, x);
    REQUIRE(x[0] > u[0]);
    radii.push_back(x[0] - model.shift()[0]);
  }
  const double ks = stats::ks_one_sample(radii, [&](double r) {
    return r <= rho ? 0.0 : 1.0 - std::pow(rho / r, 2.5);
  });
  CHECK(ks < 0.01);

  // Equal truncation radii: atoms drawn in proportion to their weights.
  const auto two = two_atom_model();
  const HalfSpaceProjection p2(two, {{1.0, 0.0}, {0.0, 1.0}});
  const Vec u2{10.0 + two.shift()[0], 10.0 + two.shift()[1]};
  std::size_t first = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    p2.sample_conditional(u2, rng, x);
    REQUIRE((x[0] > u2[0] || x[1] > u2[1]));
    first += x[0] - two.shift()[0] > 1e-9 && std::abs(x[1] - two.shift()[1]) < 1e-9;
  }
  CHECK(std::abs(double(first) / n - 0.6) < 3.0 * binom_se(0.6, n));

  const HalfSpaceProjection none(model, {{0.0, 1.0}});
  CHECK_THROWS_AS(none.sample_conditional(Vec{5.0}, rng, x), ZeroMassRegion);
}

TEST_CASE("body-noise conditional sampler lands in the event") {
  const IncrementModel model(2.5, 1.0, SpectralMeasure({{{1.0, 0.0}, 0.5}, {{0.6, 0.8}, 0.5}}),
                             0.5);
  const HalfSpaceProjection proj(model, {{1.0, 0.0}, {0.0, 1.0}});
  const Vec u{6.0, 6.0};
  Rng rng(6);
  Vec x(2);
  for (int i = 0; i < 20000; ++i) {
    proj.sample_conditional(u, rng, x);
    REQUIRE((x[0] > u[0] || x[1] > u[1]));
  }
  // The quadrature probability agrees with brute force.
  const double p = proj.tail_union_prob(u);
  std::size_t hits = 0;
  const std::size_t n = 2'000'000;
  for (std::size_t i = 0; i < n; ++i) {
    model.sample(rng, x);
    hits += x[0] > u[0] || x[1] > u[1];
  }
  CHECK(std::abs(double(hits) / n - p) < 4.0 * binom_se(p, n) + 1e-3 * p);
}

TEST_CASE("kappa_polar single-term reduction and monotonicity") {
  const auto model = canonical_model();
  const std::vector<Vec> normals{{1.0, 0.0}};
  const Vec offs{1.0}, z0{0.0, 0.0};
  for (double t : {0.0, 0.5, 1.0, 3.0, 10.0})
    CHECK(kappa_polar(model, normals, offs, t, z0) == doctest::Approx(std::pow(1.0 + t, -2.5)));
  const Vec z{0.3, -2.0};
  CHECK(kappa_polar(model, normals, offs, 1.0, z) == doctest::Approx(std::pow(1.7, -2.5)));
  double prev = HUGE_VAL;
  for (double t = 0; t < 100; t += 1.0) {
    const double k = kappa_polar(model, normals, offs, t, z0);
    CHECK(k < prev);
    prev = k;
  }
  CHECK_THROWS_AS(kappa_polar(model, normals, offs, 0.0, Vec{2.0, 0.0}), DomainViolation);
}
