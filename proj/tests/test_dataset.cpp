#include <doctest.h>

#include <sstream>

#include "medtest/dataset.hpp"
#include "medtest/error.hpp"

using namespace medtest;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_csv(text, "data.csv");
    } catch (const data_error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("csv parsing reads header and numbers") {
    const auto t = parse_csv("a, b ,\"c\"\n1,2.5,-3e2\n\n+4,5,6\n");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.values.rows() == 2);
    CHECK(t.values(0, 1) == 2.5);
    CHECK(t.values(0, 2) == -300.0);
    CHECK(t.values(1, 0) == 4.0);
    CHECK(t.column("c") == 2);
    CHECK_THROWS_AS(t.column("zz"), data_error);
}

TEST_CASE("csv errors name line and column") {
    CHECK(error_of("a,b\n1,NA\n") == "data.csv:2, column 'b': missing value");
    CHECK(error_of("a,b\n1,2\n3,\n") == "data.csv:3, column 'b': missing value");
    CHECK(error_of("a,b\n1,x\n").find("data.csv:2, column 'b': not a number") == 0);
    CHECK(error_of("a,b\n1,2,3\n") == "data.csv:2: expected 2 fields, found 3");
    CHECK(error_of("a,a\n1,2\n") == "data.csv: duplicate column 'a'");
    CHECK(error_of("") == "data.csv: missing header line");
    CHECK(error_of("a\n.\n").find("missing value") != std::string::npos);
    CHECK(error_of("a\nnan\n").find("missing value") != std::string::npos);
    CHECK(error_of("a\ninf\n").find("non-finite") != std::string::npos);
}

TEST_CASE("column ranges expand") {
    CHECK(expand_columns("x1..x3, age") == std::vector<std::string>{"x1", "x2", "x3", "age"});
    CHECK(expand_columns("w08..w10") == std::vector<std::string>{"w8", "w9", "w10"});
    CHECK(expand_columns("").empty());
    CHECK_THROWS_AS(expand_columns("x1..y3"), data_error);
    CHECK_THROWS_AS(expand_columns("x3..x1"), data_error);
    CHECK_THROWS_AS(expand_columns("x..x2"), data_error);
}

TEST_CASE("write and read back a dataset") {
    Dataset d;
    d.y = Eigen::Vector3d(0.1, -2.0, 1.0 / 3.0);
    d.d = Eigen::Vector3d(1, 0, 1);
    d.m = Eigen::Vector3d(0.5, 0.25, 3);
    d.z1 = Eigen::MatrixXd::Random(3, 2);
    d.z2 = Eigen::MatrixXd::Random(3, 1);
    d.x = Eigen::MatrixXd::Random(3, 4);
    d.w = Eigen::MatrixXd::Random(3, 1);
    std::ostringstream out;
    write_csv(out, d);
    CHECK(out.str().rfind("y,d,m,z1_1,z1_2,z2,x1,x2,x3,x4,w1\n", 0) == 0);
    const auto table = parse_csv(out.str());
    const auto map = default_columns(table);
    CHECK(map.z1 == std::vector<std::string>{"z1_1", "z1_2"});
    CHECK(map.x.size() == 4);
    const Dataset back = dataset_from_table(table, map);
    // Shortest round-trip formatting reproduces every double exactly.
    CHECK(back.y == d.y);
    CHECK(back.z1 == d.z1);
    CHECK(back.x == d.x);
    CHECK(back.w == d.w);
}

TEST_CASE("dataset validation and subsets") {
    Dataset d;
    d.y = Eigen::VectorXd::LinSpaced(4, 0, 3);
    d.d = Eigen::VectorXd::Zero(4);
    d.m = Eigen::VectorXd::Zero(4);
    d.z1 = Eigen::MatrixXd::Zero(4, 1);
    d.z2 = Eigen::MatrixXd::Zero(4, 1);
    d.x = Eigen::MatrixXd::Zero(4, 0);
    CHECK_NOTHROW(d.validate());
    const Dataset s = d.subset({3, 1});
    CHECK(s.n() == 2);
    CHECK(s.y(0) == 3.0);
    CHECK_FALSE(s.has_w());
    d.m = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(d.validate(), data_error);
    d.m = Eigen::VectorXd::Zero(4);
    d.z2 = Eigen::MatrixXd::Zero(4, 0);
    CHECK_THROWS_AS(d.validate(), data_error);
}

TEST_CASE("variant names") {
    for (Variant v : {Variant::baseline, Variant::z2linked, Variant::posttreatment}) {
        CHECK(parse_variant(variant_name(v)) == v);
    }
    CHECK_FALSE(parse_variant("other").has_value());
}
