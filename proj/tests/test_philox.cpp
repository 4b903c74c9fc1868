#include <gtest/gtest.h>

#include <cmath>

#include "fiberbell/philox.hpp"

using namespace fiberbell::rng;

// Known-answer vectors published with the Random123 library.
TEST(Philox, KnownAnswerZero)
{
    const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto r = Philox4x32::generate({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
    EXPECT_EQ(r, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi)
{
    const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UnitIsOpenInterval)
{
    EXPECT_GT(to_unit(0u), 0.0);
    EXPECT_LT(to_unit(~0u), 1.0);
}

TEST(Stream, ReproducibleAndIndependent)
{
    Stream a(42, 7, 3);
    Stream b(42, 7, 3);
    Stream c(42, 8, 3);
    Stream d(43, 7, 3);
    for (int k = 0; k < 100; ++k) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_NE(x, c.uniform());
        EXPECT_NE(x, d.uniform());
    }
}

TEST(Stream, SeekReplaysBlock)
{
    Stream a(1, 2, 3);
    a.seek(5);
    const double x = a.uniform();
    Stream b(1, 2, 3);
    for (int k = 0; k < 20; ++k) b.uniform();
    b.seek(5);
    EXPECT_EQ(x, b.uniform());
    EXPECT_EQ(to_unit(a.block(5)[0]), x);
}

TEST(Stream, MomentsLookRight)
{
    Stream s(9, 0, 0);
    const int n = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0;
    for (int k = 0; k < n; ++k) {
        const double u = s.uniform();
        su += u;
        su2 += u * u;
        const double g = s.normal();
        sn += g;
        sn2 += g * g;
    }
    EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(su2 / n - (su / n) * (su / n), 1.0 / 12.0, 2e-3);
    EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(double(n)));
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}
