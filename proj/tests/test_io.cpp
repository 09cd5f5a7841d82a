#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fraclap/error.hpp"
#include "fraclap/io.hpp"

using namespace fraclap;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fraclap_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

using FieldIo = TempDir;
using StencilIo = TempDir;

TEST_F(FieldIo, RoundTripIsBitwise) {
  const GridSpec g = GridSpec::cube(3, 0, 1, 5);
  Field u = sample(g, [](std::array<double, 3> x) { return std::exp(x[0]) / 3.0 - x[1] * x[2]; });
  u.values[3] = -0.0;
  u.values[7] = 1e-310;
  write_field(dir_ / "u.frlp", u);
  const Field v = read_field(dir_ / "u.frlp");
  EXPECT_TRUE(v.grid.same_shape(g));
  EXPECT_EQ(v.grid.h, g.h);
  ASSERT_EQ(v.values.size(), u.values.size());
  EXPECT_EQ(std::memcmp(v.values.data(), u.values.data(), u.values.size() * sizeof(double)), 0);
}

TEST_F(FieldIo, LayoutHeader) {
  const GridSpec g = GridSpec::cube(2, -1, 1, 4);
  write_field(dir_ / "u.frlp", Field(g, 2.0));
  const std::string bytes = slurp(dir_ / "u.frlp");
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 4), "FRLP");
  std::uint32_t version = 0, hlen = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&hlen, bytes.data() + 8, 4);
  EXPECT_EQ(version, kFormatVersion);
  const std::string header = bytes.substr(12, hlen);
  EXPECT_NE(header.find("\"x-fastest\""), std::string::npos);
  EXPECT_EQ(bytes.size(), 12u + hlen + 9 * sizeof(double));
}

TEST_F(FieldIo, CorruptionIsDetected) {
  const GridSpec g = GridSpec::cube(2, -1, 1, 4);
  write_field(dir_ / "u.frlp", Field(g, 1.0));
  std::string bytes = slurp(dir_ / "u.frlp");

  std::string bad = bytes;
  bad[0] = 'X';
  spit(dir_ / "magic.frlp", bad);
  EXPECT_THROW(read_field(dir_ / "magic.frlp"), BadMagic);

  spit(dir_ / "short.frlp", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_field(dir_ / "short.frlp"), FormatError);

  spit(dir_ / "long.frlp", bytes + "zz");
  EXPECT_THROW(read_field(dir_ / "long.frlp"), FormatError);

  EXPECT_THROW(read_field(dir_ / "missing.frlp"), Error);

  write_stencil(dir_ / "s.frst", build_stencil(FracParams{2, 1.0, 2.0}, 4, 0.5));
  EXPECT_THROW(read_field(dir_ / "s.frst"), BadMagic);
}

TEST_F(StencilIo, RoundTripIsBitwise) {
  for (int d : {2, 3}) {
    const Stencil st = build_stencil(FracParams{d, 0.9, 2.0}, 6, 1.0 / 3);
    write_stencil(dir_ / "s.frst", st);
    const Stencil back = read_stencil(dir_ / "s.frst");
    EXPECT_EQ(back.coeffs, st.coeffs);
    EXPECT_EQ(back.params.alpha, st.params.alpha);
    EXPECT_EQ(back.params.d, d);
    EXPECT_EQ(back.N, st.N);
    EXPECT_EQ(back.h, st.h);
    EXPECT_EQ(back.tail, st.tail);
    EXPECT_EQ(back.c_norm, st.c_norm);
    EXPECT_EQ(slurp(dir_ / "s.frst").substr(0, 4), "FRST");
  }
}

TEST_F(StencilIo, CacheHitsOnExactKey) {
  const FracParams p{2, 1.3, 2.0};
  bool hit = true;
  const Stencil a = cached_stencil(dir_, p, 8, 0.25, {}, 1, &hit);
  EXPECT_FALSE(hit);
  EXPECT_TRUE(fs::exists(dir_ / stencil_cache_name(p, 8, 0.25, QuadConfig{}.rel_tol)));
  const Stencil b = cached_stencil(dir_, p, 8, 0.25, {}, 1, &hit);
  EXPECT_TRUE(hit);
  EXPECT_EQ(a.coeffs, b.coeffs);
  cached_stencil(dir_, p, 8, 0.125, {}, 1, &hit);
  EXPECT_FALSE(hit);
  cached_stencil(std::nullopt, p, 8, 0.25, {}, 1, &hit);
  EXPECT_FALSE(hit);
}

TEST(StencilCacheName, DependsOnEveryKeyField) {
  const FracParams p{2, 1.3, 2.0};
  const std::string base = stencil_cache_name(p, 8, 0.25, 1e-12);
  EXPECT_EQ(base, stencil_cache_name(p, 8, 0.25, 1e-12));
  EXPECT_NE(base, stencil_cache_name(FracParams{2, 1.3000000000000003, 2.0}, 8, 0.25, 1e-12));
  EXPECT_NE(base, stencil_cache_name(FracParams{2, 1.3, 1.9}, 8, 0.25, 1e-12));
  EXPECT_NE(base, stencil_cache_name(p, 16, 0.25, 1e-12));
  EXPECT_NE(base, stencil_cache_name(p, 8, 0.25, 1e-10));
  EXPECT_EQ(base.substr(base.size() - 5), ".frst");
}
