#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "gmfkit/errors.hpp"
#include "gmfkit/io.hpp"

using namespace gmfkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gmfkit_test_io";
  fs::create_directories(dir);
  return dir / name;
}

Matrix awkward_values(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix v(5, 4);
  for (Index j = 0; j < 4; ++j)
    for (Index i = 0; i < 5; ++i) v(i, j) = unif(rng) * std::pow(10.0, 3 * i - 6);
  v(0, 0) = 0.1;
  v(1, 1) = 1.0 / 3.0;
  v(2, 2) = std::numeric_limits<double>::denorm_min();
  v(3, 3) = -0.0;
  return v;
}

}  // namespace

TEST(Csv, WriteReadIsExact) {
  const Matrix v = awkward_values(1);
  const fs::path path = scratch("exact.csv");
  write_csv(path, v, {"a", "b", "c", "d", "e"}, {"w", "x", "y", "z"});
  const LabeledMatrix back = read_csv(path);
  EXPECT_EQ(back.values, v);
  EXPECT_TRUE(back.mask.all());
  EXPECT_EQ(back.row_names[4], "e");
  EXPECT_EQ(back.col_names[0], "w");
}

TEST(Csv, MissingCells) {
  const LabeledMatrix lm = parse_csv("id,a,b,c\nr1,1,NA,3\nr2,,5,NaN\n");
  ASSERT_EQ(lm.values.rows(), 2);
  ASSERT_EQ(lm.values.cols(), 3);
  EXPECT_FALSE(lm.mask(0, 1));
  EXPECT_FALSE(lm.mask(1, 0));
  EXPECT_FALSE(lm.mask(1, 2));
  EXPECT_TRUE(lm.mask(1, 1));
  EXPECT_EQ(lm.values(1, 1), 5.0);
}

TEST(Csv, MaskedEntriesWrittenAsNa) {
  Mask mask = Mask::Constant(2, 2, true);
  mask(0, 1) = false;
  const std::string text = to_csv(Matrix::Ones(2, 2), {}, {}, &mask);
  EXPECT_NE(text.find("NA"), std::string::npos);
  const LabeledMatrix back = parse_csv(text);
  EXPECT_FALSE(back.mask(0, 1));
  EXPECT_EQ(back.row_names[0], "r1");
}

TEST(Csv, ZeroColumns) {
  const LabeledMatrix lm = parse_csv("id\nr1\nr2\n");
  EXPECT_EQ(lm.values.rows(), 2);
  EXPECT_EQ(lm.values.cols(), 0);
}

TEST(Csv, MalformedInputReportsLine) {
  try {
    parse_csv("id,a,b\nr1,1,2\nr2,3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_csv("id,a\nr1,abc\n"), ParseError);
}

TEST(MatrixMarket, WriteReadIsExact) {
  Matrix v = Matrix::Zero(6, 3);
  v(0, 0) = 1.0 / 7.0;
  v(5, 2) = 12345.0;
  v(2, 1) = -2.5e-12;
  const fs::path path = scratch("m.mtx");
  write_matrix_market(path, v);
  EXPECT_EQ(read_matrix_market(path), v);
}

TEST(MatrixMarket, ParsesIntegerCoordinate) {
  const Matrix v = parse_matrix_market(
      "%%MatrixMarket matrix coordinate integer general\n% comment\n3 2 2\n1 1 4\n3 2 7\n");
  EXPECT_EQ(v.rows(), 3);
  EXPECT_EQ(v(0, 0), 4.0);
  EXPECT_EQ(v(2, 1), 7.0);
  EXPECT_EQ(v(1, 0), 0.0);
  EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"),
               ParseError);
}

TEST(MaskFile, RoundTrip) {
  Mask mask = Mask::Constant(4, 3, true);
  mask(0, 2) = false;
  mask(3, 0) = false;
  const fs::path path = scratch("mask.txt");
  write_mask(path, mask);
  EXPECT_TRUE((read_mask(path, 4, 3) == mask).all());
  EXPECT_TRUE((parse_mask("# holes\n1 3\n\n4 1\n", 4, 3) == mask).all());
  EXPECT_THROW(parse_mask("5 1\n", 4, 3), ParseError);
}

TEST(ReadResponse, AppliesMaskFile) {
  const fs::path data = scratch("resp.csv");
  const fs::path mask = scratch("resp_mask.txt");
  write_csv(data, Matrix::Constant(3, 2, 2.0));
  write_text(mask, "2 2\n");
  const LabeledMatrix lm = read_response(data, mask);
  EXPECT_FALSE(lm.mask(1, 1));
  EXPECT_EQ(lm.values(1, 1), 0.0);
  EXPECT_EQ(lm.mask.count(), 5);
}

TEST(ReadResponse, EmptyMatrixRejected) {
  const fs::path data = scratch("empty.csv");
  write_text(data, "id\nr1\n");
  EXPECT_THROW(read_response(data), ParseError);
}

TEST(FormatDouble, SeventeenDigits) {
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "NaN");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-Inf");
}
