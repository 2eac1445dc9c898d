#include <cmath>
#include <random>

#include "csipred/errors.hpp"
#include "csipred/hybrid.hpp"
#include "csipred/synthchan.hpp"
#include "doctest.h"
#include "recovery.hpp"

using namespace csipred;

namespace {

WindowSplits make_splits(std::size_t n, std::size_t lags, std::size_t horizon, std::uint64_t seed) {
  ArProcess p;
  p.theta = {1.2, -0.5};
  p.noise_sigma = 0.2;
  p.burn_in = 50;
  auto v = generate_ar(p, n, seed);
  for (std::size_t t = 0; t < n; ++t) v[t] += 0.5 * std::sin(2.0 * 3.141592653589793 * t / 40.0);
  const auto split = split_chronological(as_feature(v), {}, lags + horizon + 1);
  const auto norm = normalize(split);
  return {make_windows(norm.split.train, lags, horizon), make_windows(norm.split.validation, lags, horizon),
          make_windows(norm.split.test, lags, horizon)};
}

RecurrentConfig small_rnn(std::size_t lags, std::size_t horizon) {
  RecurrentConfig c;
  c.lags = lags;
  c.horizon = horizon;
  c.hidden = 6;
  c.layers = 1;
  c.dropout = 0.0;
  c.training.epochs = 3;
  c.training.learning_rate = 0.01;
  return c;
}

NpConfig small_np(std::size_t lags, std::size_t horizon) {
  NpConfig c;
  c.lags = lags;
  c.horizon = horizon;
  c.changepoints = 3;
  c.seasonalities = {{40.0, 2}};
  c.samples_per_day = 1.0;
  c.ar_layers = 1;
  c.ar_hidden = 8;
  c.epochs = 4;
  return c;
}

DenseMatrix noise_like(const DenseMatrix& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  DenseMatrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = n(rng);
  return out;
}

}  // namespace

TEST_CASE("oracle regressor: NP learns the identity map") {
  const auto s = make_splits(3000, 8, 4, 11);
  NpConfig c = small_np(8, 4);
  c.regressor = true;
  c.epochs = 40;
  NpModel np(c, 3);
  np_train(np, s.train, &s.train.labels, 3);
  const auto pred = np.predict_batch(s.test, &s.test.labels);
  CHECK(recovery::real_nmse(pred, s.test.labels) < 1e-3);
}

TEST_CASE("noise regressor costs at most 10% against standalone NP") {
  const auto s = make_splits(3000, 8, 4, 12);
  NpConfig c = small_np(8, 4);
  c.trend = false;
  c.epochs = 30;
  c.learning_rate = 0.003;
  NpModel plain(c, 5);
  np_train(plain, s.train, nullptr, 5);
  const double base = recovery::real_nmse(plain.predict_batch(s.test), s.test.labels);

  c.regressor = true;
  NpModel noisy(c, 5);
  const auto rtrain = noise_like(s.train.labels, 99);
  const auto rtest = noise_like(s.test.labels, 100);
  np_train(noisy, s.train, &rtrain, 5);
  const double with_noise = recovery::real_nmse(noisy.predict_batch(s.test, &rtest), s.test.labels);
  MESSAGE("standalone " << base << " noise-regressor " << with_noise);
  CHECK(with_noise <= 1.1 * base);
}

TEST_CASE("passthrough configuration reproduces the RNN exactly") {
  RecurrentModel rnn(small_rnn(6, 3), 7);
  rnn.mark_trained();
  NpConfig c = small_np(6, 3);
  c.regressor = true;
  NpModel np(c, 8);
  np.set_time_frame(0.0, 100.0);
  const std::vector<double> zeros_m(c.changepoints, 0.0);
  np.set_trend(0.0, 0.0, zeros_m, zeros_m);
  const std::vector<double> z2(2, 0.0);
  np.set_seasonality(0, z2, z2);
  np.set_ar_net(ArNetParams::zeros(6, 3, 1, 8));
  np.set_regressor_weights(DenseMatrix::Identity(3, 3));
  np.mark_trained();
  HybridModel h{rnn, np, {}};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> lags(6);
    for (auto& x : lags) x = n(rng);
    const auto t = static_cast<std::int64_t>(trial * 3 + 10);
    CHECK(hybrid_predict(h, lags, t) == predict_horizon(rnn, lags));
  }
}

TEST_CASE("hybrid_predict equals the manual composition") {
  RecurrentModel rnn(small_rnn(6, 3), 17);
  rnn.mark_trained();
  NpConfig c = small_np(6, 3);
  c.regressor = true;
  NpModel np(c, 18);
  np.set_time_frame(5.0, 200.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.5);
  DenseMatrix w(3, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  np.set_regressor_weights(w);
  const std::vector<double> cs{n(rng), n(rng)}, sn{n(rng), n(rng)};
  np.set_seasonality(0, cs, sn);
  np.mark_trained();
  HybridModel h{rnn, np, {}};
  SupervisedWindowSet ws;
  ws.lags = 6;
  ws.horizon = 3;
  ws.inputs.resize(20, 6);
  ws.labels = DenseMatrix::Zero(20, 3);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 6; ++j) ws.inputs(i, j) = n(rng);
    ws.times.push_back(20 + 7 * i);
    ws.features.push_back(0);
  }
  const auto batch = hybrid_predict_batch(h, ws);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> lags(6);
    for (int j = 0; j < 6; ++j) lags[j] = ws.inputs(i, j);
    const auto r = rnn.predict(lags);
    const auto expect = np.forecast(ws.times[i], lags, r);
    const auto got = hybrid_predict(h, lags, ws.times[i]);
    CHECK(got == expect);
    for (int k = 0; k < 3; ++k) CHECK(batch(i, k) == doctest::Approx(expect[k]).epsilon(1e-12));
  }
  const std::vector<double> wrong(5, 0.0);
  CHECK_THROWS_AS(hybrid_predict(h, wrong, 20), ContractError);
}

TEST_CASE("build_hybrid: stage isolation, determinism, checkpoint") {
  const auto s = make_splits(800, 6, 3, 21);
  const auto rc = small_rnn(6, 3);
  const auto nc = small_np(6, 3);

  RecurrentModel pre(rc, 4);
  train_recurrent(pre, s.train, 4);
  const auto before = pre.digest();
  const auto b1 = build_hybrid(s, rc, nc, 4, &pre);
  CHECK(pre.digest() == before);
  CHECK(b1.model.rnn.digest() == before);
  CHECK(b1.model.provenance.rnn_digest == before);
  CHECK(b1.rnn_history.loss_history.empty());
  CHECK(b1.model.np.config().regressor);
  CHECK(b1.model.np.regressor_weights().rows() == 3);

  const auto fresh1 = build_hybrid(s, rc, nc, 9);
  const auto fresh2 = build_hybrid(s, rc, nc, 9);
  CHECK(fresh1.model.provenance.hash() == fresh2.model.provenance.hash());
  CHECK(fresh1.model.to_checkpoint().serialize() == fresh2.model.to_checkpoint().serialize());
  CHECK(fresh1.model.provenance.rnn_digest == fresh1.model.rnn.digest());
  CHECK_FALSE(fresh1.rnn_history.loss_history.empty());
  // Stage-2 regressors are the final RNN's forecasts.
  CHECK(fresh1.test_regressors.isApprox(fresh1.model.rnn.predict_batch(s.test.inputs), 0.0));

  const auto other = build_hybrid(s, rc, nc, 10);
  CHECK(other.model.provenance.hash() != fresh1.model.provenance.hash());

  const auto cp = fresh1.model.to_checkpoint();
  CHECK(cp.find_all("recurrent").size() == 1);
  CHECK(cp.find_all("np").size() == 1);
  const auto back = HybridModel::from_checkpoint(Checkpoint::parse(cp.serialize()));
  CHECK(hybrid_predict_batch(back, s.test) == hybrid_predict_batch(fresh1.model, s.test));
  CHECK(back.provenance.hash() == fresh1.model.provenance.hash());

  auto tampered = cp;
  for (auto& sec : tampered.sections)
    if (sec.kind() == "hybrid") sec.set("dataset_digest", std::string("x"));
  CHECK_THROWS_AS(HybridModel::from_checkpoint(tampered), DataError);

  NpConfig mismatched = nc;
  mismatched.horizon = 4;
  CHECK_THROWS_AS(build_hybrid(s, rc, mismatched, 1), ContractError);
  RecurrentModel untrained(rc, 1);
  CHECK_THROWS_AS(build_hybrid(s, rc, nc, 1, &untrained), ContractError);
}
