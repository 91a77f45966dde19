#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "csbp/errors.hpp"
#include "csbp/io.hpp"
#include "csbp/parallel.hpp"
#include "csbp/rng.hpp"
#include "csbp/stats.hpp"

using namespace csbp;

TEST(Philox, KnownAnswers) {
  // Published Philox4x32-10 test vectors.
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}),
            (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                              K{0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                              K{0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, DiscardMatchesStepping) {
  Philox4x32 a(9, 3), b(9, 3);
  for (int i = 0; i < 13; ++i) a();
  b.discard(13);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(Philox, StreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 1000; ++s) firsts.insert(Philox4x32(1, s)());
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(substream_id(1, 0), substream_id(2, 0));
  EXPECT_NE(substream_id(1, 0), substream_id(1, 1));
}

TEST(Rng, DistributionMoments) {
  Rng rng(7, 7);
  const int n = 200000;
  std::vector<double> u(n), e(n), g(n), p(n), z(n);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform();
    ASSERT_GT(u[i], 0.0);
    ASSERT_LT(u[i], 1.0);
    e[i] = rng.exponential(2.0);
    g[i] = rng.gamma(3.0, 2.0);
    p[i] = static_cast<double>(rng.poisson(4.5));
    z[i] = rng.normal();
  }
  auto near = [](const std::vector<double>& v, double mean) {
    const auto s = mean_se(v);
    return std::abs(s.mean - mean) <= 4 * s.se;
  };
  EXPECT_TRUE(near(u, 0.5));
  EXPECT_TRUE(near(e, 0.5));
  EXPECT_TRUE(near(g, 1.5));
  EXPECT_TRUE(near(p, 4.5));
  EXPECT_TRUE(near(z, 0.0));
  EXPECT_EQ(rng.poisson(0.0), 0);
}

TEST(Stats, NeumaierAndMeanSe) {
  NeumaierSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1.0);
  const auto m = mean_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.var, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.se, std::sqrt(5.0 / 12.0));
  const auto d = paired_difference({1.0, 2.0, 4.0}, {0.0, 1.0, 2.0});
  EXPECT_DOUBLE_EQ(d.mean, 4.0 / 3.0);
}

TEST(Parallel, EveryIndexOnceAndErrorsPropagate) {
  std::vector<int> hits(5000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(1000, 3,
                            [](std::size_t i) {
                              if (i == 777) throw std::runtime_error("x");
                            }),
               std::runtime_error);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 2.718281828459045, 1e22, -0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Io, CsvWriterChecksColumns) {
  std::ostringstream os;
  CsvWriter w(os, {"a", "b"});
  w << 1 << "x";
  w.end_row();
  EXPECT_EQ(os.str(), "a,b\n1,x\n");
  w << 1.5;
  EXPECT_THROW(w.end_row(), Error);
}
