#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgame/config.hpp"

using namespace dgame;

TEST_CASE("parse, typed getters, vectors") {
  auto cfg = Config::parse(
      "top = 1\n"
      "[game]\n"
      "case = intersection  # trailing comment\n"
      "horizon = 3.0\n"
      "[game.domain]\n"
      "lo = 15, 18\n");
  CHECK(cfg.get_int("top") == 1);
  CHECK(cfg.get_string("game.case") == "intersection");
  CHECK(cfg.get_double("game.horizon") == 3.0);
  Vec lo = cfg.get_vec("game.domain.lo");
  REQUIRE(lo.size() == 2);
  CHECK(lo[0] == 15.0);
  CHECK(lo[1] == 18.0);
  CHECK(cfg.get_double("missing", 7.5) == 7.5);
  CHECK_THROWS(cfg.get_double("game.case"));
}

TEST_CASE("serialization is canonical and hash-stable") {
  auto a = Config::parse("[b]\nk = 1\n[a]\nz = 2\ny = 3\n");
  auto b = Config::parse("[a]\ny = 3\nz = 2\n[b]\nk = 1\n");
  CHECK(a.serialize() == b.serialize());
  CHECK(a.hash() == b.hash());
  auto c = Config::parse(a.serialize());
  CHECK(c.hash() == a.hash());
}

TEST_CASE("merge overrides") {
  auto a = Config::parse("x = 1\ny = 2\n");
  auto b = Config::parse("y = 9\nz = 3\n");
  a.merge(b);
  CHECK(a.get_int("x") == 1);
  CHECK(a.get_int("y") == 9);
  CHECK(a.get_int("z") == 3);
}

TEST_CASE("doubles round trip exactly") {
  Config c;
  double v = 0.1 + 0.2;
  c.set_double("v", v);
  auto c2 = Config::parse(c.serialize());
  CHECK(c2.get_double("v") == v);
}
