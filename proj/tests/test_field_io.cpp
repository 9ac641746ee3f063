#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "phaseopt/errors.hpp"
#include "phaseopt/field_io.hpp"
#include "phaseopt/grid.hpp"

namespace {

using namespace phaseopt;
namespace fs = std::filesystem;

TEST(FieldCsv, RoundTripIsBitExact) {
  const Grid g = make_grid(2, {3, 4}, {1.0, 0.7});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Field v(g.cells());
  for (int i = 0; i < g.cells(); ++i) v[i] = d(rng) * 1e-3 / 3.0;
  const Field back = parse_field_csv(g, format_field_csv(g, v));
  for (int i = 0; i < g.cells(); ++i) EXPECT_EQ(back[i], v[i]);
}

TEST(FieldCsv, HeaderAndOrdering) {
  const Grid g = make_grid(2, {2, 2}, {1.0, 1.0});
  const std::string text = format_field_csv(g, Field{{1.0, 2.0, 3.0, 4.0}});
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,y,value");
  // x slowest: second row is (0.25, 0.75).
  EXPECT_NE(text.find("0.25,0.75,2\n"), std::string::npos);

  const Grid g1 = make_grid(1, {2}, {1.0});
  EXPECT_EQ(format_field_csv(g1, Field{{5.0, 6.0}}), "x,value\n0.25,5\n0.75,6\n");
}

TEST(FieldCsv, RejectsMalformedInput) {
  const Grid g = make_grid(1, {2}, {1.0});
  EXPECT_THROW(parse_field_csv(g, "x,value\n0.25,1\n"), ParseError);
  EXPECT_THROW(parse_field_csv(g, "x,value\n0.25,1\n0.75,abc\n"), ParseError);
  EXPECT_THROW(parse_field_csv(g, "x,value\n0.25,1\n0.5,2\n"), ParseError);
  EXPECT_THROW(parse_field_csv(g, "value\n1\n2\n"), ParseError);
  EXPECT_THROW(parse_field_csv(g, "x,value\n0.25,1\n0.75,nan\n"), ParseError);
}

TEST(FieldCsv, FileRoundTripAndAtomicWrite) {
  const fs::path dir = fs::temp_directory_path() / "phaseopt_field_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Grid g = make_grid(1, {5}, {2.0});
  const Field v = Field::LinSpaced(5, 0.1, 0.9);
  write_field_csv(dir / "rho.csv", g, v);
  EXPECT_FALSE(fs::exists(dir / "rho.csv.tmp"));
  const Field back = read_field_csv(dir / "rho.csv", g);
  EXPECT_EQ(back, v);
  EXPECT_THROW(read_field_csv(dir / "missing.csv", g), ParseError);
  fs::remove_all(dir);
}

}  // namespace
