#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coco/config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

using coco::Config;

TEST_CASE("key=value lines parse with trimming and full-line comments") {
    Config cfg = Config::from_string(
        "# a comment\n"
        "  method = coco-modified  \n"
        "scenario.kind=case5\n"
        "\n"
        "optim.eta = 0.1\n");
    CHECK(cfg.get_string("method", "") == "coco-modified");
    CHECK(cfg.get_string("scenario.kind", "") == "case5");
    CHECK(cfg.get_double("optim.eta", 0.0) == 0.1);
    CHECK(cfg.has("method"));
    CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("later assignments win") {
    Config cfg = Config::from_string("n=1\nn=2\n");
    CHECK(cfg.get_long("n", 0) == 2);
}

TEST_CASE("values may contain equals signs") {
    Config cfg = Config::from_string("expr=a=b\n");
    CHECK(cfg.get_string("expr", "") == "a=b");
}

TEST_CASE("malformed lines report their line number") {
    try {
        Config::from_string("ok=1\nnot a pair\n");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("typed getters parse fully or throw naming the key") {
    Config cfg = Config::from_string(
        "d=2.5\nl=-7\nu=18446744073709551615\nb1=true\nb2=off\nbad=12x\n");
    CHECK(cfg.get_double("d", 0) == 2.5);
    CHECK(cfg.get_long("l", 0) == -7);
    CHECK(cfg.get_u64("u", 0) == 18446744073709551615ull);
    CHECK(cfg.get_bool("b1", false));
    CHECK_FALSE(cfg.get_bool("b2", true));
    CHECK(cfg.get_double("absent", 1.25) == 1.25);
    try {
        cfg.get_long("bad", 0);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
    CHECK_THROWS_AS(cfg.get_bool("bad", false), std::invalid_argument);
}

TEST_CASE("boolean spellings") {
    Config cfg = Config::from_string(
        "a=true\nb=1\nc=yes\nd=on\ne=false\nf=0\ng=no\nh=off\n");
    for (const char* k : {"a", "b", "c", "d"}) CHECK(cfg.get_bool(k, false));
    for (const char* k : {"e", "f", "g", "h"}) CHECK_FALSE(cfg.get_bool(k, true));
}

TEST_CASE("comma lists split and trim; empty value gives empty list") {
    Config cfg = Config::from_string("xs= 0.5, 2 ,3.5\nnames=a, b\nnil=\n");
    auto xs = cfg.get_doubles("xs", {});
    REQUIRE(xs.size() == 3);
    CHECK(xs[0] == 0.5);
    CHECK(xs[1] == 2.0);
    CHECK(xs[2] == 3.5);
    auto names = cfg.get_strings("names", {});
    REQUIRE(names.size() == 2);
    CHECK(names[1] == "b");
    CHECK(cfg.get_doubles("nil", {1.0}).empty());
    CHECK(cfg.get_doubles("absent", {1.0}) == std::vector<double>{1.0});
}

TEST_CASE("require_string throws on absent keys") {
    Config cfg = Config::from_string("present=x\n");
    CHECK(cfg.require_string("present") == "x");
    CHECK_THROWS_AS(cfg.require_string("absent"), std::invalid_argument);
}

TEST_CASE("set and apply_override update or add keys") {
    Config cfg = Config::from_string("a=1\n");
    cfg.set("a", "2");
    cfg.apply_override("b.sub=3");
    CHECK(cfg.get_long("a", 0) == 2);
    CHECK(cfg.get_long("b.sub", 0) == 3);
    CHECK_THROWS_AS(cfg.apply_override("no_equals"), std::invalid_argument);
    CHECK_THROWS_AS(cfg.apply_override("=valueonly"), std::invalid_argument);
}

TEST_CASE("from_file reads a file and rejects missing paths") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "coco_config_test.cfg";
    {
        std::ofstream out(p);
        out << "seed=9\n# tail comment\n";
    }
    Config cfg = Config::from_file(p.string());
    CHECK(cfg.get_u64("seed", 0) == 9);
    CHECK_THROWS(Config::from_file((p / "nope").string()));
    fs::remove(p);
}

TEST_CASE("keys lists everything stored") {
    Config cfg = Config::from_string("b=2\na=1\n");
    auto ks = cfg.keys();
    CHECK(ks.size() == 2);
}
