#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coco/csv.hpp"
#include "coco/dataset.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using coco::EnvironmentDataset;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "coco_csv_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    fs::path p = temp_dir() / name;
    std::ofstream out(p, std::ios::binary);
    out << text;
    return p.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EnvironmentDataset small_env() {
    EnvironmentDataset env;
    env.env_id = "envA";
    env.X = Eigen::MatrixXd(3, 2);
    env.X << 1.0, -2.5, 0.125, 3.75, 1e-17, 12345.678901234567;
    env.y = Eigen::VectorXd(3);
    env.y << 0.1, -0.2, 0.3;
    env.covariate_names = {"x1", "z"};
    return env;
}

} // namespace

TEST_CASE("save then load reproduces values exactly and env_id is the stem") {
    EnvironmentDataset env = small_env();
    std::string path = (temp_dir() / "roundtrip.csv").string();
    coco::save_csv(env, path);

    coco::MultiEnvData multi = coco::load_csv({path});
    REQUIRE(multi.environments.size() == 1);
    const auto& got = multi.environments[0];
    CHECK(got.env_id == "roundtrip");
    CHECK(got.covariate_names == env.covariate_names);
    REQUIRE(got.n() == 3);
    REQUIRE(got.p() == 2);
    // Doubles are written with round-trip precision; equality is exact.
    CHECK((got.X - env.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((got.y - env.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two files with matching headers load as two environments") {
    std::string a = write_file("envA.csv", "y,x1,z\r\n1,2,3\r\n4,5,6\r\n");
    std::string b = write_file("envB.csv", "y,x1,z\r\n7,8,9\r\n");
    coco::MultiEnvData multi = coco::load_csv({a, b}, {0});
    REQUIRE(multi.environments.size() == 2);
    CHECK(multi.environments[0].env_id == "envA");
    CHECK(multi.environments[1].env_id == "envB");
    CHECK(multi.environments[0].p() == 2);
    CHECK(multi.environments[1].n() == 1);
    CHECK(multi.known_nondescendants == std::vector<Eigen::Index>{0});
    CHECK(multi.environments[1].X(0, 1) == 9.0);
}

TEST_CASE("header mismatch across files is rejected") {
    std::string a = write_file("h1.csv", "y,x1\n1,2\n");
    std::string b = write_file("h2.csv", "y,x2\n1,2\n");
    CHECK_THROWS(coco::load_csv({a, b}));
}

TEST_CASE("first column must be y") {
    std::string a = write_file("noy.csv", "x1,x2\n1,2\n");
    CHECK_THROWS(coco::load_csv({a}));
}

TEST_CASE("non-numeric and non-finite cells are rejected") {
    std::string nan_file = write_file("nan.csv", "y,x1\n1,NaN\n");
    CHECK_THROWS(coco::load_csv({nan_file}));
    std::string inf_file = write_file("inf.csv", "y,x1\ninf,2\n");
    CHECK_THROWS(coco::load_csv({inf_file}));
    std::string word = write_file("word.csv", "y,x1\n1,apple\n");
    CHECK_THROWS(coco::load_csv({word}));
}

TEST_CASE("empty and header-only files are rejected") {
    std::string empty = write_file("empty.csv", "");
    CHECK_THROWS(coco::load_csv({empty}));
    std::string only_header = write_file("header.csv", "y,x1\n");
    CHECK_THROWS(coco::load_csv({only_header}));
}

TEST_CASE("missing file is rejected") {
    CHECK_THROWS(coco::load_csv({(temp_dir() / "missing.csv").string()}));
}

TEST_CASE("ragged rows are rejected") {
    std::string ragged = write_file("ragged.csv", "y,x1,z\n1,2\n");
    CHECK_THROWS(coco::load_csv({ragged}));
}

TEST_CASE("quoted fields with commas and escaped quotes split per RFC 4180") {
    auto fields = coco::csv_split_line("a,\"b,c\",\"d\"\"e\",f");
    REQUIRE(fields.size() == 4);
    CHECK(fields[0] == "a");
    CHECK(fields[1] == "b,c");
    CHECK(fields[2] == "d\"e");
    CHECK(fields[3] == "f");

    CHECK(coco::csv_quote("plain") == "plain");
    CHECK(coco::csv_quote("with,comma") == "\"with,comma\"");
    CHECK(coco::csv_quote("with\"quote") == "\"with\"\"quote\"");

    // Quoting then splitting is the identity on awkward content.
    std::string nasty = "a\"b,c\"\"d";
    auto back = coco::csv_split_line(coco::csv_quote(nasty) + "," +
                                     coco::csv_quote("x"));
    REQUIRE(back.size() == 2);
    CHECK(back[0] == nasty);
}

TEST_CASE("header names survive a save with quoted covariate names") {
    EnvironmentDataset env = small_env();
    env.covariate_names = {"odd,name", "z"};
    std::string path = (temp_dir() / "quoted.csv").string();
    coco::save_csv(env, path);
    coco::MultiEnvData multi = coco::load_csv({path});
    CHECK(multi.environments[0].covariate_names[0] == "odd,name");
}

TEST_CASE("saved file ends each row with CRLF") {
    EnvironmentDataset env = small_env();
    std::string path = (temp_dir() / "crlf.csv").string();
    coco::save_csv(env, path);
    std::string text = read_file(path);
    CHECK(text.find("\r\n") != std::string::npos);
    CHECK(text.substr(text.size() - 2) == "\r\n");
}

TEST_CASE("save is byte-identical across repeated writes") {
    EnvironmentDataset env = small_env();
    std::string p1 = (temp_dir() / "det1.csv").string();
    std::string p2 = (temp_dir() / "det2.csv").string();
    coco::save_csv(env, p1);
    coco::save_csv(env, p2);
    CHECK(read_file(p1) == read_file(p2));
}
