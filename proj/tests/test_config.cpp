#include <doctest.h>

#include "pfl/config.hpp"

using namespace pfl;

TEST_CASE("parse sections, comments, lists") {
    const Config cfg = Config::parse_string(
        "# experiment\n"
        "[problem]\n"
        "d = 100   # dimension\n"
        "interpolation = true\n"
        "\n"
        "[tune]\n"
        "gamma_grid = 0.05, 0.007\n"
        "seeds = 1,2,3\n"
        "label = case three\n");
    CHECK(cfg.get_i64("problem.d") == 100);
    CHECK(cfg.get_bool("problem.interpolation", false));
    CHECK(cfg.get_f64_list("tune.gamma_grid") == std::vector<double>{0.05, 0.007});
    CHECK(cfg.get_u64_list("tune.seeds") == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cfg.get_str("tune.label") == "case three");
    CHECK(cfg.get_i64("problem.n", 10) == 10);  // fallback
}

TEST_CASE("malformed input is rejected with ConfigError") {
    CHECK_THROWS_AS(Config::parse_string("[problem\nd=1\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("just a line\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("= 3\n"), ConfigError);
    const Config cfg = Config::parse_string("[a]\nx = abc\nl = 1, two\n");
    CHECK_THROWS_AS(cfg.get_i64("a.x"), ConfigError);
    CHECK_THROWS_AS(cfg.get_f64("a.x"), ConfigError);
    CHECK_THROWS_AS(cfg.get_i64_list("a.l"), ConfigError);
    CHECK_THROWS_AS(cfg.get_str("a.missing"), ConfigError);
}

TEST_CASE("serialize emits a parseable equivalent") {
    const Config cfg = Config::parse_string("[run]\ngamma = 0.1\n[problem]\nd = 7\n");
    const Config back = Config::parse_string(cfg.serialize());
    CHECK(back.get_f64("run.gamma") == 0.1);
    CHECK(back.get_i64("problem.d") == 7);
}
