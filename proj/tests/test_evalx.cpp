#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "csipred/errors.hpp"
#include "csipred/evalx.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace csipred;
using C = std::complex<double>;

namespace {

std::vector<ComplexVector> random_vectors(std::mt19937_64& rng, std::size_t count, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ComplexVector> out(count, ComplexVector(dim));
  for (auto& v : out)
    for (auto& x : v) x = C(n(rng), n(rng));
  return out;
}

}  // namespace

TEST_CASE("nmse identities") {
  std::mt19937_64 rng(1);
  const auto h = random_vectors(rng, 30, 24);
  CHECK(nmse(h, h).value == 0.0);
  std::vector<ComplexVector> zero(h.size(), ComplexVector(24, 0.0));
  CHECK(nmse(zero, h).value == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<ComplexVector> p{{C(0.5, 0)}}, t{{C(1, 0)}};
  CHECK(nmse(p, t).value == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("nmse matches the per-window oracle and is scale covariant") {
  std::mt19937_64 rng(2);
  const auto h = random_vectors(rng, 40, 6);
  const auto g = random_vectors(rng, 40, 6);
  double expect = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) expect += oracle::nmse_window(g[i], h[i]);
  expect /= static_cast<double>(h.size());
  const auto m = nmse(g, h);
  CHECK(m.value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(m.windows == 40);
  for (double k : {-3.0, 1e-3, 250.0}) {
    auto gs = g, hs = h;
    for (auto& v : gs)
      for (auto& x : v) x *= k;
    for (auto& v : hs)
      for (auto& x : v) x *= k;
    CHECK(std::fabs(nmse(gs, hs).value - m.value) <= 1e-12);
  }
}

TEST_CASE("cosine similarity identities") {
  std::mt19937_64 rng(3);
  const auto h = random_vectors(rng, 25, 12);
  CHECK(cosine_similarity(h, h).value == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<ComplexVector> a{{C(1, 0), C(0, 0)}}, b{{C(0, 0), C(1, 0)}};
  CHECK(cosine_similarity(a, b).value == 0.0);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    C c(u(rng), u(rng));
    if (std::abs(c) < 1e-3) c = C(1.0, 1.0);
    auto scaled = h;
    for (auto& v : scaled)
      for (auto& x : v) x *= c;
    CHECK(std::fabs(cosine_similarity(scaled, h).value - 1.0) <= 1e-12);
    CHECK(std::fabs(cosine_similarity(h, scaled).value - 1.0) <= 1e-12);
  }
  const auto g = random_vectors(rng, 25, 12);
  double expect = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) expect += oracle::cosine_window(g[i], h[i]);
  const auto cs = cosine_similarity(g, h);
  CHECK(cs.value == doctest::Approx(expect / 25.0).epsilon(1e-12));
  CHECK(cs.value >= 0.0);
  CHECK(cs.value <= 1.0);
}

TEST_CASE("zero-norm windows are excluded and counted") {
  const std::vector<ComplexVector> t{{C(1, 0)}, {C(0, 0)}, {C(2, 0)}};
  const std::vector<ComplexVector> p{{C(1, 0)}, {C(1, 0)}, {C(1, 0)}};
  const auto m = nmse(p, t);
  CHECK(m.windows == 2);
  CHECK(m.excluded == 1);
  CHECK(m.value == doctest::Approx(0.125));
  const std::vector<ComplexVector> pz{{C(0, 0)}, {C(1, 0)}, {C(1, 0)}};
  CHECK(cosine_similarity(pz, t).excluded == 2);
  const std::vector<ComplexVector> short_p{{C(1, 0)}};
  CHECK_THROWS_AS(nmse(short_p, t), ContractError);
}

TEST_CASE("pooled metric equals the union over disjoint window sets") {
  std::mt19937_64 rng(4);
  const auto h = random_vectors(rng, 37, 5);
  const auto g = random_vectors(rng, 37, 5);
  const std::size_t cut1 = 10, cut2 = 29;
  auto part = [&](std::size_t lo, std::size_t hi) {
    std::vector<ComplexVector> a(g.begin() + lo, g.begin() + hi), b(h.begin() + lo, h.begin() + hi);
    return nmse(a, b);
  };
  const std::vector<MetricValue> parts{part(0, cut1), part(cut1, cut2), part(cut2, 37)};
  const auto p = pooled(parts);
  CHECK(p.windows == 37);
  CHECK(std::fabs(p.value - nmse(g, h).value) <= 1e-12);
}

TEST_CASE("dB column is 10 log10 of the linear value") {
  for (double v : {1.0, 0.25, 1e-6, 0.0733}) {
    const auto r = make_report("np", "t", 1, "all", MetricValue{v, 3, 0}, MetricValue{0.9, 3, 0}, "d");
    CHECK(std::fabs(r.nmse_db - 10.0 * std::log10(v)) <= 1e-9);
  }
  CHECK(to_db(0.1) == doctest::Approx(-10.0));
  const std::vector<MetricReport> rs{make_report("rnn", "synthetic", 2, "all", MetricValue{0.5, 4, 0},
                                                 MetricValue{0.7, 4, 0}, "abc")};
  const auto csv = reports_to_csv(rs);
  CHECK(csv.rfind("model,track,seed,scope,nmse,nmse_db,cosine,windows,excluded,config_digest\n", 0) == 0);
  CHECK(csv.find("rnn,synthetic,2,all,") != std::string::npos);
  CHECK(reports_to_json(rs).find("\"nmse_db\"") != std::string::npos);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("grid search: single cell") {
  ParamGrid g;
  g.axes = {{"rnn.hidden", {"8"}}};
  const auto r = grid_search(g, [](const GridCell&) { return TrialOutcome{0.3, 10}; });
  CHECK(r.best == GridCell{{"rnn.hidden", "8"}});
  CHECK(r.trials.size() == 1);
  CHECK(r.trials[0].ok);
}

TEST_CASE("grid search prefers the config that can fit a line") {
  // Trial: fit y = a*t + b by least squares with the given number of free
  // parameters (0: predict zero, 2: full line), score on held-out points.
  ParamGrid g;
  g.axes = {{"capacity", {"0", "2"}}};
  auto run = [](const GridCell& cell) {
    const int cap = std::stoi(cell.at("capacity"));
    std::vector<double> tt, yy;
    for (int t = 0; t < 50; ++t) {
      tt.push_back(t);
      yy.push_back(3.0 * t + 2.0);
    }
    double a = 0.0, b = 0.0;
    if (cap == 2) {
      double st = 0, sy = 0, stt = 0, sty = 0;
      for (int i = 0; i < 40; ++i) {
        st += tt[i];
        sy += yy[i];
        stt += tt[i] * tt[i];
        sty += tt[i] * yy[i];
      }
      a = (40 * sty - st * sy) / (40 * stt - st * st);
      b = (sy - a * st) / 40;
    }
    std::vector<ComplexVector> p, h;
    for (int i = 40; i < 50; ++i) {
      p.push_back({C(a * tt[i] + b, 0)});
      h.push_back({C(yy[i], 0)});
    }
    return TrialOutcome{nmse(p, h).value, static_cast<std::size_t>(cap)};
  };
  const auto r = grid_search(g, run);
  CHECK(r.best.at("capacity") == "2");
  CHECK(r.best_outcome.validation_nmse < 1e-12);
}

TEST_CASE("grid search ties and axis order") {
  ParamGrid g1;
  g1.axes = {{"a", {"1", "2", "3"}}, {"b", {"x", "y"}}};
  ParamGrid g2;
  g2.axes = {{"b", {"y", "x"}}, {"a", {"3", "1", "2"}}};
  // Ties on nmse for several cells, broken by parameter count then cell order.
  auto run = [](const GridCell& c) {
    const int a = std::stoi(c.at("a"));
    const double v = (a == 1) ? 0.5 : 0.2;
    const std::size_t params = c.at("b") == "x" ? 5 : 5 + static_cast<std::size_t>(a);
    return TrialOutcome{v, params};
  };
  const auto r1 = grid_search(g1, run), r2 = grid_search(g2, run);
  CHECK(r1.best == r2.best);
  CHECK(r1.best == GridCell{{"a", "2"}, {"b", "x"}});
  CHECK(r1.trials.size() == 6);
  CHECK(trials_to_csv(r1) == trials_to_csv(r2));
}

TEST_CASE("grid search records failures") {
  ParamGrid g;
  g.axes = {{"k", {"bad", "good"}}};
  const auto r = grid_search(g, [](const GridCell& c) {
    if (c.at("k") == "bad") throw std::runtime_error("boom");
    return TrialOutcome{0.1, 1};
  });
  CHECK(r.best.at("k") == "good");
  REQUIRE(r.trials.size() == 2);
  CHECK_FALSE(r.trials[0].ok);
  CHECK(r.trials[0].error == "boom");
  CHECK(trials_to_csv(r).find("failed") != std::string::npos);
  CHECK_THROWS_AS(grid_search(g, [](const GridCell&) -> TrialOutcome { throw std::runtime_error("x"); }),
                  std::runtime_error);
}

TEST_CASE("parse_grid") {
  const auto g = parse_grid("# comment\nrnn.hidden = 8, 16\n\nwindow.lags=4\n");
  REQUIRE(g.axes.size() == 2);
  CHECK(g.axes[0].first == "rnn.hidden");
  CHECK(g.axes[0].second == std::vector<std::string>{"8", "16"});
  CHECK(g.cells().size() == 2);
  CHECK_THROWS_AS(parse_grid(""), ConfigError);
  CHECK_THROWS_AS(parse_grid("novalue\n"), ConfigError);
  CHECK_THROWS_AS(parse_grid("a = 1\na = 2\n"), ConfigError);
}
