#include <algorithm>
#include <cmath>
#include <random>

#include "csipred/datapipe.hpp"
#include "csipred/errors.hpp"
#include "csipred/synthchan.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace csipred;

namespace {

FeatureSeries ramp(std::size_t n, std::int64_t first = 0) {
  FeatureSeries f;
  f.first_index = first;
  for (std::size_t i = 0; i < n; ++i) f.values.push_back(static_cast<double>(i + 1));
  return f;
}

}  // namespace

TEST_CASE("csv parse and format round-trip") {
  const std::string text =
      "t,antenna,re,im\n0,0,1.5,-2\n0,1,0.25,0\n1,0,3,4\n1,1,5,6\n";
  const CsiSeries s = to_series(parse_csi_records(text));
  CHECK(s.length() == 2);
  CHECK(s.antenna_ids == std::vector<int>{0, 1});
  CHECK(s.antennas[0][1] == Complex(3, 4));
  CHECK(format_csi(s) == text);
  CHECK(to_series(parse_csi_records(format_csi(s))) == s);
}

TEST_CASE("csv errors") {
  CHECK_THROWS_AS(parse_csi_records("time,antenna,re,im\n"), ParseError);
  try {
    parse_csi_records("t,antenna,re,im\n0,0,1,2\n1,0,nan,2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("re") != std::string::npos);
  }
  CHECK_THROWS_AS(to_series(parse_csi_records("t,antenna,re,im\n0,0,1,1\n2,0,1,1\n")), DataError);
}

TEST_CASE("cleaning repairs duplicates, gaps and corruption") {
  RawCsi raw;
  for (std::int64_t t = 0; t < 20; ++t) {
    if (t == 5 || t == 6) continue;  // gap of two
    raw.records.push_back({t, 0, Complex(static_cast<double>(t), 0.0)});
  }
  raw.records.push_back({3, 0, Complex(99.0, 0.0)});  // duplicate, dropped
  raw.records.push_back({9, 0, Complex(NAN, 0.0)});   // duplicate of a good row, dropped first
  std::stable_sort(raw.records.begin(), raw.records.end(),
                   [](const CsiRecord& a, const CsiRecord& b) { return a.t < b.t; });
  const CleanResult r = clean(raw);
  CHECK(r.report.duplicates_collapsed == 2);
  CHECK(r.report.samples_interpolated == 2);
  CHECK(r.series.length() == 20);
  CHECK(r.series.antennas[0][5].real() == doctest::Approx(5.0));
  CHECK(r.series.antennas[0][6].real() == doctest::Approx(6.0));
  CHECK(r.series.antennas[0][3].real() == 3.0);

  RawCsi bad;
  bad.records.push_back({0, 0, Complex(1, 1)});
  bad.records.push_back({1, 0, Complex(INFINITY, 1)});
  bad.records.push_back({2, 0, Complex(3, 1)});
  const CleanResult c = clean(bad);
  CHECK(c.report.corrupted_replaced == 1);
  CHECK(c.series.antennas[0][1] == Complex(2, 1));

  RawCsi gap;
  gap.records.push_back({0, 0, Complex(1, 1)});
  gap.records.push_back({50, 0, Complex(1, 1)});
  CHECK_THROWS_AS(clean(gap), DataError);

  const CsiSeries clean_series = r.series;
  const CleanResult id = clean(clean_series);
  CHECK(id.series == clean_series);
  CHECK(id.report.empty());
}

TEST_CASE("feature split and reassembly") {
  FadingConfig fc;
  fc.samples = 64;
  fc.antennas = 3;
  const CsiSeries s = generate_fading(fc);
  const auto f = complex_to_features(s);
  REQUIRE(f.size() == 6);
  CHECK(f[3].feature == 3);
  CHECK(f[3].component == Component::imag);
  CHECK(f[3].antenna == 1);
  CHECK(features_to_complex(f, s.sample_interval, s.track) == s);
}

TEST_CASE("scaler maps the training range onto [-1, 1]") {
  const Scaler sc = Scaler::fit({-4.0, 0.0, 4.0});
  CHECK(sc.apply(-4.0) == -1.0);
  CHECK(sc.apply(4.0) == 1.0);
  CHECK(sc.apply(0.0) == 0.0);
  CHECK_THROWS_AS(Scaler::fit({2.0, 2.0, 2.0}), DataError);
  CHECK(Scaler::from_text(sc.to_text()) == sc);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3.0, 10.0);
  std::vector<double> xs(500);
  for (auto& x : xs) x = n(rng);
  const Scaler fit = Scaler::fit(xs);
  for (double x : xs) CHECK(std::fabs(fit.invert(fit.apply(x)) - x) <= 1e-12);
}

TEST_CASE("split sizes and partition") {
  const FeatureSeries f = ramp(100, 7);
  const auto sp = split_chronological(f);
  CHECK(sp.train.values.size() == 80);
  CHECK(sp.validation.values.size() == 10);
  CHECK(sp.test.values.size() == 10);
  CHECK(sp.validation.first_index == 87);
  CHECK(sp.test.first_index == 97);
  std::vector<double> joined = sp.train.values;
  joined.insert(joined.end(), sp.validation.values.begin(), sp.validation.values.end());
  joined.insert(joined.end(), sp.test.values.begin(), sp.test.values.end());
  CHECK(joined == f.values);
  CHECK_THROWS_AS(split_chronological(f, {0.5, 0.3, 0.3}), ContractError);
  CHECK_THROWS_AS(split_chronological(ramp(12), {}, 5), DataError);
}

TEST_CASE("split partition property over many lengths and fractions") {
  for (std::size_t n = 40; n < 300; n += 7) {
    for (double v : {0.05, 0.1, 0.2}) {
      const FeatureSeries f = ramp(n);
      const auto sp = split_chronological(f, {1.0 - 2 * v, v, v});
      CHECK(sp.train.values.size() + sp.validation.values.size() + sp.test.values.size() == n);
      CHECK(sp.validation.first_index ==
            sp.train.first_index + static_cast<std::int64_t>(sp.train.values.size()));
      CHECK(sp.test.first_index ==
            sp.validation.first_index + static_cast<std::int64_t>(sp.validation.values.size()));
    }
  }
}

TEST_CASE("normalization uses training statistics only") {
  FeatureSeries f = ramp(100);
  f.values[95] = 1000.0;  // extreme value in the test segment
  const NormalizedSplit ns = normalize(split_chronological(f));
  CHECK(ns.scaler == Scaler::fit(split_chronological(f).train.values));
  const auto& tr = ns.split.train.values;
  CHECK(*std::min_element(tr.begin(), tr.end()) == -1.0);
  CHECK(*std::max_element(tr.begin(), tr.end()) == 1.0);
  CHECK(ns.split.test.values[5] > 1.0);
}

TEST_CASE("window layout") {
  FeatureSeries f;
  f.values = {1, 2, 3};
  const auto w = make_windows(f, 1, 1);
  REQUIRE(w.size() == 1);
  CHECK(w.inputs(0, 0) == 1.0);
  CHECK(w.labels(0, 0) == 3.0);
  CHECK(w.times[0] == 1);
  CHECK(window_count(10, 3, 2) == 5);
  CHECK(make_windows(ramp(10), 3, 2).size() == 5);
  CHECK_THROWS_AS(make_windows(ramp(5), 3, 2), ContractError);
}

TEST_CASE("window count and contents agree with brute-force enumeration") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + rng() % 6;
    const std::size_t horizon = 1 + rng() % 5;
    const std::size_t n = d + horizon + 1 + rng() % 30;
    const std::int64_t first = static_cast<std::int64_t>(rng() % 100);
    FeatureSeries f = ramp(n, first);
    for (auto& v : f.values) v = std::sin(v * 1.3);
    const auto w = make_windows(f, d, horizon);
    const auto ref = oracle::windows(f.values, first, d, horizon);
    REQUIRE(w.size() == ref.size());
    CHECK(window_count(n, d, horizon) == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(w.times[i] == ref[i].t);
      for (std::size_t k = 0; k < d; ++k) {
        CHECK(w.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) == ref[i].lags[k]);
      }
      for (std::size_t k = 0; k < horizon; ++k) {
        CHECK(w.labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) ==
              ref[i].labels[k]);
      }
    }
  }
}

TEST_CASE("no leakage: windows of each split stay inside that split") {
  const FeatureSeries f = ramp(500, 1000);
  const auto ns = normalize(split_chronological(f));
  const std::size_t d = 12, horizon = 6;
  for (const FeatureSeries* seg : {&ns.split.train, &ns.split.validation, &ns.split.test}) {
    const auto w = make_windows(*seg, d, horizon);
    const std::int64_t lo = seg->first_index;
    const std::int64_t hi = lo + static_cast<std::int64_t>(seg->values.size()) - 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w.times[i] - static_cast<std::int64_t>(d) >= lo);
      CHECK(w.times[i] + static_cast<std::int64_t>(horizon) <= hi);
    }
  }
  // Every training label precedes every test lag.
  const auto tr = make_windows(ns.split.train, d, horizon);
  const auto te = make_windows(ns.split.test, d, horizon);
  CHECK(tr.times.back() + static_cast<std::int64_t>(horizon) <
        te.times.front() - static_cast<std::int64_t>(d));
}

TEST_CASE("strided subsets and digests") {
  const auto w = make_windows(ramp(50), 4, 2);
  const auto s = w.strided(3);
  CHECK(s.size() == (w.size() + 2) / 3);
  CHECK(s.times[1] == w.times[3]);
  CHECK(w.digest() == make_windows(ramp(50), 4, 2).digest());
  CHECK(w.digest() != s.digest());
  CHECK_THROWS_AS(w.strided(0), ContractError);
}
