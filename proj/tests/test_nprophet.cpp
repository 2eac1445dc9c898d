#include <cmath>
#include <random>

#include "csipred/errors.hpp"
#include "csipred/nprophet.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "recovery.hpp"

using namespace csipred;

namespace {

std::vector<double> normals(std::size_t n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

NpConfig small_config() {
  NpConfig c;
  c.lags = 4;
  c.horizon = 2;
  c.changepoints = 3;
  c.seasonalities = {{5.0, 2}, {1.5, 1}};
  c.samples_per_day = 4.0;
  c.ar_layers = 2;
  c.ar_hidden = 3;
  c.regressor = true;
  return c;
}

void randomize(NpModel& m, Rng& rng) {
  for (auto& v : m.params().values()) v = std::normal_distribution<double>(0.0, 0.5)(rng);
}

}  // namespace

TEST_CASE("changepoint indicator") {
  CHECK(changepoint_indicator(5, 5) == 1);
  CHECK(changepoint_indicator(4, 5) == 0);
  CHECK(changepoint_indicator(1e6, 0) == 1);
}

TEST_CASE("trend evaluation") {
  TrendParams p;
  p.base_growth = 2;
  p.base_offset = 1;
  CHECK(trend_eval(3, p) == 7.0);
  TrendParams q;
  q.changepoints = {10};
  q.growth_adjust = {1};
  q.offset_adjust = {0};
  CHECK(trend_eval(9, q) == 0.0);
  CHECK(trend_eval(10, q) == 10.0);
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    TrendParams r;
    r.base_growth = normals(1, rng)[0];
    r.base_offset = normals(1, rng)[0];
    r.changepoints = {-3.0, 7.5};
    r.growth_adjust = normals(2, rng);
    r.offset_adjust = normals(2, rng);
    for (int i = 0; i < 100; ++i) {
      const double t = std::uniform_real_distribution<double>(-10, 20)(rng);
      CHECK(std::fabs(trend_eval(t, r) - oracle::trend(t, r.base_growth, r.base_offset,
                                                       r.growth_adjust, r.offset_adjust,
                                                       r.changepoints)) <= 1e-12);
    }
  }
}

TEST_CASE("seasonality evaluation") {
  CHECK(seasonality_eval(3.3, 7.0, std::vector<double>{0, 0}, std::vector<double>{0, 0}) == 0.0);
  CHECK(seasonality_eval(7.0, 7.0, std::vector<double>{1}, std::vector<double>{0}) ==
        doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const double p = 3.0 + trial;
    const auto a = normals(3, rng), b = normals(3, rng);
    for (int t = 0; t <= 2 * static_cast<int>(p); ++t) {
      CHECK(std::fabs(seasonality_eval(t, p, a, b) - oracle::seasonality(t, p, a, b)) <= 1e-12);
      CHECK(std::fabs(seasonality_eval(t, p, a, b) - seasonality_eval(t + p, p, a, b)) <= 1e-9);
    }
  }
  CHECK_THROWS_AS(seasonality_eval(1, 0.0, std::vector<double>{1}, std::vector<double>{1}),
                  ContractError);
}

TEST_CASE("classic AR") {
  CHECK(classic_ar_eval(std::vector<double>{3.5}, {0.0, {1.0}}) == 3.5);
  // Chronological lags: z_{t-2} = 4, z_{t-1} = 2.
  CHECK(classic_ar_eval(std::vector<double>{4.0, 2.0}, {1.0, {0.5, 0.5}}) == 4.0);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto theta = normals(5, rng);
    const double q = normals(1, rng)[0];
    const auto series = normals(9, rng);
    const std::vector<double> lags(series.begin() + 3, series.begin() + 8);
    CHECK(std::fabs(classic_ar_eval(lags, {q, theta}) - oracle::ar_at(series, 8, q, theta)) <= 1e-12);
  }
  CHECK_THROWS_AS(classic_ar_eval(std::vector<double>{1.0}, {0.0, {1.0, 2.0}}), ContractError);
}

TEST_CASE("AR-Net forward") {
  const auto z = ArNetParams::zeros(4, 2, 2, 3);
  CHECK(ar_net_forward(std::vector<double>{1, 2, 3, 4}, z) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(ar_net_forward(std::vector<double>{1, 2}, z), ContractError);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ArNetParams p = ArNetParams::zeros(5, 3, 2, 4);
    for (auto& w : p.weights) w = gradcheck::random_matrix(w.rows(), w.cols(), rng, 1.0);
    for (auto& b : p.biases) {
      for (auto& x : b) x = normals(1, rng)[0];
    }
    const auto lags = normals(5, rng);
    oracle::Vec h = lags;
    for (std::size_t layer = 0; layer < 2; ++layer) {
      oracle::Vec next(4);
      for (std::size_t j = 0; j < 4; ++j) {
        double s = p.biases[layer](static_cast<Eigen::Index>(j));
        for (std::size_t k = 0; k < h.size(); ++k) {
          s += p.weights[layer](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * h[k];
        }
        next[j] = s > 0 ? s : 0.0;
      }
      h = next;
    }
    const auto got = ar_net_forward(lags, p);
    for (std::size_t o = 0; o < 3; ++o) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        s += p.weights[2](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k)) * h[k];
      }
      CHECK(std::fabs(got[o] - s) <= 1e-12);
    }
  }
}

TEST_CASE("AR-Net in passthrough configuration equals classic AR with q = 0") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 5;
    const auto theta = normals(d, rng);
    ArNetParams p = ArNetParams::zeros(d, 1, 1, d);
    p.weights[0] = DenseMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t e = 1; e <= d; ++e) p.weights[1](0, static_cast<Eigen::Index>(d - e)) = theta[e - 1];
    std::vector<double> lags(d);
    for (auto& v : lags) v = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    CHECK(std::fabs(ar_net_forward(lags, p)[0] - classic_ar_eval(lags, {0.0, theta})) <= 1e-12);
    p.activation = ArActivation::linear;
    for (auto& v : lags) v -= 1.5;
    CHECK(std::fabs(ar_net_forward(lags, p)[0] - classic_ar_eval(lags, {0.0, theta})) <= 1e-12);
  }
}

TEST_CASE("fresh model: zero-initialized components forecast zero") {
  NpConfig c = small_config();
  c.autoregression = false;
  NpModel m(c, 1);
  CHECK(m.forecast(10, std::vector<double>{1, 2, 3, 4}, std::vector<double>{5, 6}) ==
        std::vector<double>{0, 0});
  CHECK(m.regressor_weights() == DenseMatrix::Zero(2, 2));
}

TEST_CASE("trend-only forecast follows the line") {
  NpConfig c = small_config();
  c.changepoints = 0;
  c.seasonality = false;
  c.autoregression = false;
  c.regressor = false;
  NpModel m(c, 1);
  m.set_time_frame(0.0, 1.0);
  m.set_trend(2.0, 1.0, {}, {});
  CHECK(m.forecast(3, std::vector<double>{0, 0, 0, 0}) == std::vector<double>{9.0, 11.0});
}

TEST_CASE("forecast is the sum of independently evaluated components") {
  Rng rng(6);
  for (TrendMode mode : {TrendMode::discontinuous, TrendMode::continuous}) {
    NpConfig c = small_config();
    c.trend_mode = mode;
    NpModel m(c, 2);
    randomize(m, rng);
    m.set_time_frame(3.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = static_cast<std::int64_t>(rng() % 60);
      const auto lags = normals(4, rng);
      const auto reg = normals(2, rng);
      const auto total = m.forecast(t, lags, reg);
      const auto tr = m.trend_component(t);
      const auto se = m.seasonality_component(t);
      const auto ar = m.ar_component(lags);
      const auto rg = m.regressor_component(reg);
      // Independent oracles for trend and seasonality.
      const TrendParams tp = m.trend();
      const SeasonalityParams sp = m.seasonality();
      for (std::size_t h = 0; h < 2; ++h) {
        const double time = static_cast<double>(t + 1 + static_cast<std::int64_t>(h));
        const double tau = (time - 3.0) / 50.0;
        CHECK(std::fabs(tr[h] - oracle::trend(tau, tp.base_growth, tp.base_offset, tp.growth_adjust,
                                              tp.offset_adjust, tp.changepoints)) <= 1e-12);
        double season = 0.0;
        for (std::size_t s = 0; s < sp.terms.size(); ++s) {
          season += oracle::seasonality(time / 4.0, sp.terms[s].period, sp.cos_coeffs[s], sp.sin_coeffs[s]);
        }
        CHECK(std::fabs(se[h] - season) <= 1e-12);
        CHECK(std::fabs(total[h] - (tr[h] + se[h] + ar[h] + rg[h])) <= 1e-12);
      }
    }
  }
}

TEST_CASE("zeroing one component removes exactly its contribution") {
  Rng rng(7);
  NpConfig c = small_config();
  NpModel m(c, 3);
  randomize(m, rng);
  m.set_time_frame(0.0, 30.0);
  const auto lags = normals(4, rng);
  const auto reg = normals(2, rng);
  const auto full = m.forecast(12, lags, reg);
  const auto ar = m.ar_component(lags);
  NpModel no_ar = m;
  ArNetParams z = m.ar_net();
  for (auto& w : z.weights) w.setZero();
  for (auto& b : z.biases) b.setZero();
  no_ar.set_ar_net(z);
  const auto without = no_ar.forecast(12, lags, reg);
  for (std::size_t h = 0; h < 2; ++h) CHECK(std::fabs(full[h] - ar[h] - without[h]) <= 1e-12);
}

TEST_CASE("continuous trend mode has no jumps at changepoints") {
  Rng rng(8);
  TrendParams cont;
  {
    NpConfig c = small_config();
    c.trend_mode = TrendMode::continuous;
    c.changepoints = 5;
    NpModel m(c, 1);
    randomize(m, rng);
    cont = m.trend();
  }
  for (std::size_t j = 0; j < cont.changepoints.size(); ++j) {
    const double n = cont.changepoints[j];
    const double left = trend_eval(std::nextafter(n, -1e9), cont);
    const double right = trend_eval(n, cont);
    CHECK(std::fabs(left - right) <= 1e-12);
  }
  // With free offsets the same points jump.
  TrendParams disc = cont;
  disc.offset_adjust.assign(disc.changepoints.size(), 0.25);
  const double n0 = disc.changepoints[0];
  CHECK(std::fabs(trend_eval(n0, disc) - trend_eval(std::nextafter(n0, -1e9), disc)) > 0.1);
}

TEST_CASE("changepoints span the configured range of the training time frame") {
  NpConfig c = small_config();
  c.changepoints = 30;
  c.changepoint_range = 0.9;
  NpModel m(c, 1);
  const auto cps = m.trend().changepoints;
  REQUIRE(cps.size() == 30);
  for (std::size_t j = 1; j < cps.size(); ++j) CHECK(cps[j] > cps[j - 1]);
  CHECK(cps.back() == doctest::Approx(0.9));
  CHECK(cps.front() > 0.0);
}

TEST_CASE("default configuration: d = 2D") {
  const NpConfig c;
  CHECK(c.lags == 2 * c.horizon);
  CHECK(c.changepoints == 30);
  CHECK(c.ar_hidden == 32);
  CHECK(c.learning_rate == 0.01);
}

TEST_CASE("regressor contracts") {
  NpModel m(small_config(), 1);
  CHECK_THROWS_AS(m.forecast(0, std::vector<double>{1, 2, 3, 4}), ContractError);
  NpConfig c = small_config();
  c.regressor = false;
  NpModel n(c, 1);
  CHECK_THROWS_AS(n.forecast(0, std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2}),
                  ContractError);
  CHECK_THROWS_AS(n.forecast(0, std::vector<double>{1, 2, 3}), ContractError);
}

TEST_CASE("np gradients (all components, both trend modes)") {
  const auto r = gradcheck::np_model(30, 31);
  CHECK(r.instances == 30);
  CHECK_MESSAGE(r.failures == 0, r.first_failure);
}

TEST_CASE("AR-Net gradients") {
  const auto r = gradcheck::np_model(25, 77, true);
  CHECK_MESSAGE(r.failures == 0, r.first_failure);
}

TEST_CASE("training contracts and divergence") {
  NpConfig c = small_config();
  c.regressor = false;
  NpModel m(c, 1);
  SupervisedWindowSet w = make_windows(as_feature(std::vector<double>(40, 0.1)), 4, 2);
  SupervisedWindowSet no_times = w;
  no_times.times.clear();
  CHECK_THROWS_AS(np_train(m, no_times, nullptr, 1), ContractError);
  w.labels(0, 0) = NAN;
  CHECK_THROWS_AS(np_train(m, w, nullptr, 1), DivergenceError);
}

TEST_CASE("recovery: noise-free AR(3)") {
  const auto r = recovery::ar3(5);
  CHECK(r.windows > 500);
  CHECK(r.nmse_vs_oracle < 1e-3);
}

TEST_CASE("recovery: trend-only line y = 2t + 1") {
  const auto r = recovery::line(5);
  CHECK(std::fabs(r.slope - 2.0) <= 0.1);
}

TEST_CASE("recovery: seasonality-only sinusoid") { CHECK(recovery::sinusoid(5) < 1e-3); }

TEST_CASE("training is deterministic and checkpoints round-trip") {
  NpConfig c = small_config();
  c.regressor = false;
  c.epochs = 3;
  const auto w = make_windows(as_feature(generate_deterministic({}, 80)), 4, 2);
  NpModel a(c, 4), b(c, 4);
  CHECK(np_train(a, w, nullptr, 4).loss_history == np_train(b, w, nullptr, 4).loss_history);
  CHECK(a.digest() == b.digest());
  Checkpoint cp;
  cp.sections.push_back(a.to_section());
  const NpModel back = NpModel::from_section(Checkpoint::parse(cp.serialize()).find("np"));
  CHECK(back.digest() == a.digest());
  CHECK(back.predict_batch(w) == a.predict_batch(w));
}
