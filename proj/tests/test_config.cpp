#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "looplab/config.hpp"
#include "looplab/errors.hpp"

using namespace looplab;

TEST_CASE("config round trip") {
  const std::string text =
      "# run\nsubcommand = doublecup\ndelta = 1.4142135623730951\n\n[doublecup]\n t_plus = 0.005 \norder=3\n"
      "[mc]\nsweeps = 200000\nt = -0.02\n";
  auto c = RunConfig::parse_text(text);
  CHECK(c.subcommand == "doublecup");
  CHECK(c.get("t_plus") == "0.005");
  CHECK(c.get_long("order", 0) == 3);
  CHECK(c.get_double("delta", 0) == 1.4142135623730951);
  CHECK(c.get("sweeps").empty());
  auto again = RunConfig::parse_text(c.to_text());
  CHECK(again == c);
  CHECK(again.to_text() == c.to_text());
  c.subcommand = "mc";
  CHECK(c.get_long("sweeps", 0) == 200000);
  CHECK(c.get_doubles("t") == std::vector<double>{-0.02});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(RunConfig::parse_text("[open\n"), ParseError);
  CHECK_THROWS_AS(RunConfig::parse_text("novalue\n"), ParseError);
  CHECK_THROWS_AS(RunConfig::parse_text("x = abc\n").get_double("x", 0), ParseError);
  CHECK_THROWS_AS(RunConfig::parse_text("x = 3.5\n").get_long("x", 0), ParseError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/looplab.conf"), ParseError);
}

TEST_CASE("format_double keeps 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
