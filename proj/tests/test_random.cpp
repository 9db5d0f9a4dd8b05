#include "qlasso/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using qlasso::Stream;

TEST(Stream, SameKeySameSequence) {
    Stream a{42}, b{42};
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(a(), b());
}

TEST(Stream, SubstreamsDependOnPathAndAreDistinct) {
    const Stream root = qlasso::master_stream(7);
    std::set<std::uint64_t> keys;
    for (std::uint64_t m : {200, 400, 700})
        for (std::uint64_t t = 0; t < 50; ++t)
            keys.insert(root.substream({m, t}).key());
    EXPECT_EQ(keys.size(), 150u);
    EXPECT_EQ(root.substream({3, 4}).key(), root.substream(3).substream(4).key());
    EXPECT_NE(root.substream({3, 4}).key(), root.substream({4, 3}).key());
}

TEST(Stream, SubstreamIgnoresParentPosition) {
    Stream a = qlasso::master_stream(1);
    const auto before = a.substream(9).key();
    for (int i = 0; i < 10; ++i)
        a();
    EXPECT_EQ(a.substream(9).key(), before);
}

TEST(Stream, UniformMomentsAndRange) {
    Stream s{3};
    const int N = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < N; ++i) {
        const double u = s.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sum2 += u * u;
    }
    EXPECT_NEAR(sum / N, 0.5, 5 * std::sqrt(1.0 / 12 / N));
    EXPECT_NEAR(sum2 / N, 1.0 / 3.0, 0.005);
}

TEST(Stream, SignIsBalanced) {
    Stream s{11};
    const int N = 100000;
    double sum = 0;
    for (int i = 0; i < N; ++i) {
        const double v = s.sign();
        ASSERT_TRUE(v == 1.0 || v == -1.0);
        sum += v;
    }
    EXPECT_LT(std::abs(sum / N), 5.0 / std::sqrt(N));
}
