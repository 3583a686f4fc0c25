#include <doctest.h>

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

#include <difflab/io.hpp>

#include "support.hpp"

using namespace difflab;

TEST_SUITE("io") {

TEST_CASE("format_g17 round-trips doubles through text") {
  for (double v : {0.1, 1.0 / 3.0, 1e300, 5.5801585456319448e-05, -2.5, 0.0,
                   0.38292492254802624}) {
    CHECK(std::stod(format_g17(v)) == v);
  }
  CHECK(format_g17(0.5) == "0.5");
  CHECK(format_g17(-0.0).find(',') == std::string::npos);
}

TEST_CASE("fnv1a64 reference digests") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("file io round trip and missing-file error") {
  testsupport::TempFile f(".txt");
  const std::string payload = "line1\nline2\n# not a comment\n";
  write_file(f.path(), payload);
  CHECK(read_file(f.path()) == payload);
  CHECK_THROWS_AS(read_file("/nonexistent/difflab/file"), std::invalid_argument);
}

TEST_CASE("csv emission is byte-stable with sorted metadata") {
  std::ostringstream out;
  write_csv(out, {{"seed", "42"}, {"config_hash", "00ff"}}, {"T", "value"},
            {{"16", "0.5"}, {"32", "0.25"}});
  CHECK(out.str() ==
        "# config_hash=00ff\n"
        "# seed=42\n"
        "T,value\n"
        "16,0.5\n"
        "32,0.25\n");

  std::ostringstream bad;
  CHECK_THROWS_AS(write_csv(bad, {}, {"a", "b"}, {{"only one"}}), std::invalid_argument);
}

}  // TEST_SUITE
