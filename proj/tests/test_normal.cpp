#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "addis/normal.hpp"

using namespace addis;

namespace {
const boost::math::normal_distribution<double> std_normal;
}

TEST(Normal, CdfMatchesReference) {
    for (double x = -12.0; x <= 12.0; x += 0.01) {
        const double ref = boost::math::cdf(std_normal, x);
        EXPECT_NEAR(normal_cdf(x), ref, 1e-15) << x;
        if (ref > 1e-300) {
            EXPECT_NEAR(normal_cdf(x) / ref, 1.0, 1e-13) << x;
        }
        const double sref = boost::math::cdf(boost::math::complement(std_normal, x));
        EXPECT_NEAR(normal_sf(x), sref, 1e-15) << x;
    }
}

TEST(Normal, QuantileMatchesReference) {
    double worst = 0.0;
    for (int k = 1; k < 100000; ++k) {
        const double p = k / 100000.0;
        worst = std::max(worst, std::fabs(normal_quantile(p) - boost::math::quantile(std_normal, p)));
    }
    EXPECT_LE(worst, 1e-12);
    for (double p : {1e-300, 1e-100, 1e-20, 1e-10, 1e-5, 1 - 1e-10, 1 - 1e-5}) {
        const double ref = boost::math::quantile(std_normal, p);
        EXPECT_NEAR(normal_quantile(p), ref, 1e-12 * std::max(1.0, std::fabs(ref))) << p;
    }
}

TEST(Normal, QuantileEdges) {
    EXPECT_EQ(normal_quantile(0.0), -INFINITY);
    EXPECT_EQ(normal_quantile(1.0), INFINITY);
    EXPECT_EQ(normal_quantile(0.5), 0.0);
    EXPECT_THROW(normal_quantile(-0.1), Error);
    EXPECT_THROW(normal_quantile(NAN), Error);
    EXPECT_NEAR(normal_upper_quantile(0.05), 1.6448536269514722, 1e-14);
}

TEST(Normal, RoundTrip) {
    for (double x = -8.0; x <= 0.0; x += 0.25) EXPECT_NEAR(normal_quantile(normal_cdf(x)), x, 1e-12 * std::max(1.0, std::fabs(x)));
    for (double x = 0.0; x <= 8.0; x += 0.25) EXPECT_NEAR(normal_upper_quantile(normal_sf(x)), x, 1e-12 * std::max(1.0, x));
}
