#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "csipred/checkpoint.hpp"
#include "csipred/errors.hpp"
#include "doctest.h"

using namespace csipred;

TEST_CASE("doubles round-trip exactly") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  for (double x : {0.0, -0.0, 1e-310, std::numeric_limits<double>::max(), 0.1}) {
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK_THROWS_AS(parse_double("1.5x"), DataError);
  CHECK_THROWS_AS(parse_double(""), DataError);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("checkpoint serialize/parse round-trip") {
  Checkpoint cp;
  auto& s = cp.add("demo");
  s.set("name", std::string("x y"));
  s.set("rate", 0.001);
  s.set("count", 42LL);
  DenseMatrix m(2, 3);
  m << 1.0 / 3.0, -2.5, 1e-300, 4, 5, 6;
  s.add_tensor("w", m);
  cp.add("other").set("k", std::string("v"));

  const std::string text = cp.serialize();
  const Checkpoint back = Checkpoint::parse(text);
  CHECK(back.serialize() == text);
  const auto& d = back.find("demo");
  CHECK(d.get("name") == "x y");
  CHECK(d.get_double("rate") == 0.001);
  CHECK(d.get_int("count") == 42);
  CHECK(d.tensor("w") == m);
  CHECK(back.find_all("other").size() == 1);
  CHECK_THROWS_AS(back.find("missing"), DataError);
}

TEST_CASE("checkpoint parse errors carry line numbers") {
  CHECK_THROWS_AS(Checkpoint::parse("not a checkpoint\n"), ParseError);
  try {
    Checkpoint::parse("csipred-checkpoint 1\nsection a\ntensor w 1 2\n1.0\nend\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("params round-trip through a section") {
  ParamStore ps;
  ps.add("a", 2, 2);
  ps.add("b", 1, 3);
  for (std::size_t i = 0; i < ps.size(); ++i) ps.values()[i] = std::sin(static_cast<double>(i));
  CheckpointSection s("p");
  s.add_params(ps);
  ParamStore other = ps.zeros_like();
  s.read_params(other);
  CHECK(other == ps);
  ParamStore wrong;
  wrong.add("a", 2, 3);
  CHECK_THROWS_AS(s.read_params(wrong), DataError);
  ParamStore missing;
  missing.add("c", 1, 1);
  CHECK_THROWS(s.read_params(missing));
}

TEST_CASE("file save/load and digest") {
  const auto dir = std::filesystem::temp_directory_path() / "csipred_ckpt_test";
  std::filesystem::create_directories(dir);
  Checkpoint cp;
  cp.add("s").set("v", 1.5);
  cp.save(dir / "a.ckpt");
  cp.save(dir / "b.ckpt");
  CHECK(file_digest(dir / "a.ckpt") == file_digest(dir / "b.ckpt"));
  CHECK(Checkpoint::load(dir / "a.ckpt").serialize() == cp.serialize());
  CHECK_THROWS_AS(Checkpoint::load(dir / "missing.ckpt"), DataError);
  CHECK_THROWS_AS(write_file("/nonexistent-dir/x/y", "z"), DataError);
  std::filesystem::remove_all(dir);
}
