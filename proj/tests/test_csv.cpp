#include <gtest/gtest.h>

#include <sstream>

#include "gplc/csv.hpp"

using namespace gplc;

namespace {

csv::Parsed parse(const std::string& text) {
    std::istringstream in(text);
    return csv::parse(in);
}

} // namespace

TEST(Csv, FormatRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        EXPECT_EQ(std::stod(csv::format(v)), v);
    }
}

TEST(Csv, TableWritesHeaderAndRows) {
    csv::Table t({"a", "b"});
    t.add_row(std::vector<double>{1.0, 0.5});
    t.add_row(std::vector<std::string>{"x", "y"});
    EXPECT_EQ(t.str(), "a,b\n1,0.5\nx,y\n");
    EXPECT_THROW(t.add_row(std::vector<double>{1.0}), DimensionError);
}

TEST(Csv, ParseSkipsBlankLinesAndTrimsCells) {
    const csv::Parsed p = parse("x_1, z\n\n 0.5 ,1e-3\r\n0.25,2\n");
    EXPECT_EQ(p.header, (std::vector<std::string>{"x_1", "z"}));
    ASSERT_EQ(p.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(p.rows[0][1], 1e-3);
    EXPECT_DOUBLE_EQ(p.rows[1][0], 0.25);
}

TEST(Csv, ParseErrors) {
    EXPECT_THROW(parse(""), InvalidInput);
    EXPECT_THROW(parse("a,b\n1\n"), InvalidInput);
    EXPECT_THROW(parse("a,b\n1,abc\n"), InvalidInput);
    EXPECT_THROW(parse("a,b\n1,2x\n"), InvalidInput);
    EXPECT_THROW(parse("a,b\n1,\n"), InvalidInput);
    EXPECT_THROW(csv::parse_file("/nonexistent/design.csv"), InvalidInput);
}

TEST(Csv, DesignWithMeans) {
    const csv::DesignData d = csv::load_design(parse("x_1,x_2,z,s,sigma_eps2\n0.1,0.2,1.5,4,0.02\n0.7,0.9,1.1,2,0.01\n"));
    EXPECT_EQ(d.points.rows(), 2);
    EXPECT_EQ(d.points.cols(), 2);
    EXPECT_DOUBLE_EQ(d.points(1, 1), 0.9);
    EXPECT_DOUBLE_EQ(d.observations.values[0], 1.5);
    EXPECT_DOUBLE_EQ(d.observations.noise[0], 0.005);
    EXPECT_EQ(d.observations.counts[1], 2);
    EXPECT_DOUBLE_EQ(d.observations.sigma_eps2[1], 0.01);
}

TEST(Csv, DesignWithReplicates) {
    const csv::DesignData d = csv::load_design(parse("x_1,z_1,z_2\n0.3,1,3\n0.6,2,2\n"));
    EXPECT_EQ(d.points.cols(), 1);
    EXPECT_DOUBLE_EQ(d.observations.values[0], 2.0);
    EXPECT_DOUBLE_EQ(d.observations.sigma_eps2[0], 2.0);
    EXPECT_DOUBLE_EQ(d.observations.noise[0], 1.0);
    EXPECT_DOUBLE_EQ(d.observations.sigma_eps2[1], 0.0);
}

TEST(Csv, DesignErrors) {
    EXPECT_THROW(csv::load_design(parse("y,z\n1,2\n")), InvalidInput);
    EXPECT_THROW(csv::load_design(parse("x_1,z\n")), InvalidInput);
    EXPECT_THROW(csv::load_design(parse("x_1\n0.5\n")), InvalidInput);
    EXPECT_THROW(csv::load_design(parse("x_1,z,s\n0.5,1,2\n")), InvalidInput);
    EXPECT_THROW(csv::load_design(parse("x_1,z,s,sigma_eps2\n0.5,1,2.5,0.1\n")), InvalidInput);
    EXPECT_THROW(csv::load_design(parse("x_1,z_1,z_3\n0.5,1,2\n")), InvalidInput);
}
