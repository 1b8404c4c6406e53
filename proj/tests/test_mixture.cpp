#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stablecf/errors.hpp"
#include "stablecf/mixture.hpp"
#include "stablecf/stable.hpp"

#include <cmath>
#include <complex>
#include <filesystem>

using namespace stablecf;

namespace {
StableParams make(double a, double b, double m, double s) {
  return StableParams{a, b, m, s, Form::Zolotarev};
}
}  // namespace

TEST_CASE("mixture model validity and closed-form CF") {
  MixtureModel one{{1.0}, {0.0}, {1.0}};
  CHECK(one.valid());
  CHECK(std::abs(mixture_cf(one, 1.0) - std::exp(-0.5)) < 1e-15);
  CHECK(std::abs(mixture_cf(one, 0.0) - 1.0) < 1e-15);

  MixtureModel two{{0.3, 0.7}, {-1.0, 2.0}, {0.5, 1.5}};
  CHECK(two.valid());
  for (double tau : {-3.0, -0.4, 0.2, 1.0, 7.0})
    CHECK(std::abs(mixture_cf(two, tau)) <= 1.0 + 1e-14);

  MixtureModel bad{{0.5, 0.4}, {0.0, 1.0}, {1.0, 1.0}};  // weights sum 0.9
  CHECK_FALSE(bad.valid());
  MixtureModel negsd{{1.0}, {0.0}, {-1.0}};
  CHECK_FALSE(negsd.valid());

  MixtureModel unsorted{{0.2, 0.8}, {3.0, -1.0}, {1.0, 2.0}};
  unsorted.canonicalize();
  CHECK(unsorted.means[0] == -1.0);
  CHECK(unsorted.weights[0] == 0.8);
}

TEST_CASE("mixture CF matches a simulation oracle") {
  MixtureModel two{{0.4, 0.6}, {-0.8, 1.1}, {0.7, 2.0}};
  Rng r(99);
  const std::size_t n = 1000000;
  const double tau = 0.7;
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = two.sample(r);
    acc += std::complex<double>(std::cos(tau * x), std::sin(tau * x));
  }
  acc /= static_cast<double>(n);
  CHECK(std::abs(acc - mixture_cf(two, tau)) < 3e-3);
}

TEST_CASE("a normal target is recovered exactly by one component") {
  auto fit = fit_mixture_kl(make(2, 0, 0, 1), 1);
  CHECK(fit.model.size() == 1);
  CHECK(fit.model.weights[0] == 1.0);
  CHECK(std::abs(fit.model.means[0]) < 1e-6);
  CHECK(std::abs(fit.model.sds[0] - std::sqrt(2.0)) < 1e-6);
  CHECK(fit.objective >= 0.0);
  CHECK(fit.objective < 1e-8);
}

TEST_CASE("kl projection improves with more components") {
  StableParams p = make(1.4, 0, 0, 1);
  std::vector<double> kls;
  MixtureFit fit4, fit5;
  for (int m = 2; m <= 5; ++m) {
    auto fit = fit_mixture_kl(p, m);
    kls.push_back(fit.objective);
    if (m == 4) fit4 = fit;
    if (m == 5) fit5 = fit;
  }
  for (std::size_t i = 1; i < kls.size(); ++i)
    CHECK(kls[i] <= kls[i - 1] + 1e-9);
  // at four components the density error is graphically negligible
  // (about one percent of the mode height)
  StableDist dist(p, 16, 1e-3);
  double sup = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.01)
    sup = std::max(sup, std::abs(dist.pdf(x) - fit4.model.pdf(x)));
  CHECK(sup < 3e-3);
  CHECK(fit5.objective < 1e-5);
}

TEST_CASE("five components track a skewed stable density") {
  StableParams p = make(1.5, -0.5, 0, 1);
  auto fit = fit_mixture_kl(p, 5);
  StableDist dist(p, 16, 1e-3);
  double sup = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.01)
    sup = std::max(sup, std::abs(dist.pdf(x) - fit.model.pdf(x)));
  CHECK(sup < 3e-3);
}

TEST_CASE("CF matching recovers a gaussian from its mixture form") {
  MixtureModel mix{{1.0}, {0.0}, {std::sqrt(2.0)}};
  std::vector<double> taus(12);
  for (int i = 0; i < 12; ++i) taus[i] = 0.15 * (i + 1);
  auto res = mixture_to_stable(mix, taus);
  CHECK(res.objective < 1e-10);
  CHECK_FALSE(res.flagged);
  CHECK(res.params.alpha > 1.98);
  CHECK(std::abs(res.params.sigma - 1.0) < 1e-3);
  CHECK(std::abs(res.params.mu) < 1e-3);
  CHECK_THROWS_AS(mixture_to_stable(mix, {0.3, 0.6}), DataError);
}

TEST_CASE("round trip stable -> mixture -> stable") {
  StableParams p = make(1.4, 0, 0, 1);
  auto fit = fit_mixture_kl(p, 5);
  std::vector<double> taus(12);
  for (int i = 0; i < 12; ++i) taus[i] = 0.15 * (i + 1);
  auto back = mixture_draws_to_stable({fit.model}, taus);
  REQUIRE(back.size() == 1);
  CHECK(std::abs(back[0].params.alpha - 1.4) < 0.03);
  CHECK(std::abs(back[0].params.beta) < 0.05);
  CHECK(std::abs(back[0].params.sigma - 1.0) < 0.02);
  CHECK_FALSE(back[0].flagged);
}

TEST_CASE("log-squared mixture reproduces the distributed two-component fit") {
  Rng r(7);
  auto fit = fit_logsq_mixture(1.5, 0.25, 2, r, 30000);
  CHECK(fit.objective < 1e-3);
  REQUIRE(fit.model.size() == 2);
  // components in canonical (ascending-mean) order; compare label-free
  CHECK(std::abs(fit.model.means[0] - (-2.01)) < 0.3);
  CHECK(std::abs(fit.model.sds[0] - 3.63) < 0.3);
  CHECK(std::abs(fit.model.weights[0] - 0.229) < 0.3);
  CHECK(std::abs(fit.model.means[1] - 0.153) < 0.3);
  CHECK(std::abs(fit.model.sds[1] - 1.69) < 0.3);
  CHECK(std::abs(fit.model.weights[1] - 0.771) < 0.3);
  // the mixture mean matches the analytic mean of log(eps^2)
  CHECK(std::abs(fit.model.mean() - 2.0 * stable_log_abs_mean(1.5, 0.25)) <
        0.08);
}

TEST_CASE("log-squared fit quality for a light-tailed skewed case") {
  Rng r(8);
  auto fit = fit_logsq_mixture(1.9, 0.9, 2, r, 30000);
  CHECK(fit.objective < 1e-3);
}

TEST_CASE("log-squared fit at the gaussian boundary") {
  Rng r(9);
  auto fit = fit_logsq_mixture(2.0, 0.0, 3, r, 30000);
  // E log eps^2 for eps ~ N(0, 2): psi(1/2) + log 2 + log 2 = -gamma
  CHECK(std::abs(fit.model.mean() - (-0.57721566490153286)) < 0.1);
  CHECK(std::abs(fit.model.mean() - 2.0 * stable_log_abs_mean(2.0, 0.0)) <
        0.1);
  Rng r2(10);
  CHECK_THROWS_AS(fit_logsq_mixture(1.5, 0.0, 2, r2, 5000), DataError);
  CHECK_THROWS_AS(fit_logsq_mixture(1.5, 0.0, 0, r2), DataError);
}

TEST_CASE("mixture tables persist exactly and interpolate") {
  std::vector<double> alphas{1.3, 1.4, 1.5};
  std::vector<double> betas{-0.3, 0.0, 0.3};
  auto table = build_mixture_table(alphas, betas, 3);
  const std::string path = "mixtable_tmp.csv";
  std::filesystem::remove(path);
  table.write(path);
  auto loaded = MixtureTable::read(path);
  for (std::size_t i = 0; i < alphas.size(); ++i)
    for (std::size_t j = 0; j < betas.size(); ++j) {
      const auto& a = table.at(i, j);
      const auto& b = loaded.at(i, j);
      for (std::size_t c = 0; c < a.size(); ++c) {
        CHECK(a.weights[c] == b.weights[c]);
        CHECK(a.means[c] == b.means[c]);
        CHECK(a.sds[c] == b.sds[c]);
      }
    }
  std::filesystem::remove(path);
  // interpolation at a node returns the node
  auto node = table.interpolate(1.4, 0.0);
  const auto& direct = table.at(1, 1);
  for (std::size_t c = 0; c < node.size(); ++c) {
    CHECK(node.weights[c] == doctest::Approx(direct.weights[c]).epsilon(1e-12));
    CHECK(node.means[c] == doctest::Approx(direct.means[c]).epsilon(1e-12));
    CHECK(node.sds[c] == doctest::Approx(direct.sds[c]).epsilon(1e-12));
  }
  // at production node spacing, interpolating between nodes is close to a
  // direct refit at the query point
  std::vector<double> fa{1.440, 1.454};
  std::vector<double> fb{0.108, 0.144};
  auto fine = build_mixture_table(fa, fb, 3);
  auto mid = fine.interpolate(1.447, 0.126);
  double wsum = 0.0;
  for (double w : mid.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  auto refit = fit_mixture_kl(make(1.447, 0.126, 0, 1), 3).model;
  double sup = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.02)
    sup = std::max(sup, std::abs(refit.pdf(x) - mid.pdf(x)));
  CHECK(sup < 2e-3);
  // clamping outside the rectangle
  auto clamped = table.interpolate(1.0, -2.0);
  const auto& corner = table.at(0, 0);
  CHECK(clamped.means[0] == doctest::Approx(corner.means[0]).epsilon(1e-12));
}

TEST_CASE("input validation for the kl projection") {
  CHECK_THROWS_AS(fit_mixture_kl(make(1.5, 0, 0, 1), 0), DataError);
  CHECK_THROWS_AS(fit_mixture_kl(make(1.5, 0, 0, 1), 16), DataError);
  CHECK_THROWS_AS(fit_mixture_kl(make(-1.0, 0, 0, 1), 3), DataError);
}
