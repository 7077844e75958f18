// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/gaussian_cloud.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>

namespace binosplat {
namespace {

Vec4 random_quat(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec4(n(rng), n(rng), n(rng), n(rng));
}

GaussianCloud random_float_cloud(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    GaussianCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.push_back(Vec3(u(rng), u(rng), u(rng)), random_quat(rng), Vec3(u(rng), u(rng), u(rng)), u(rng),
                    Vec3(u(rng), u(rng), u(rng)));
    return quantize_to_float(c);
}

TEST(BuildCovariance, IdentityQuaternionUnitScale) {
    EXPECT_TRUE(build_covariance(Vec4(1, 0, 0, 0), Vec3::Zero()).isApprox(Mat3::Identity(), 1e-15));
}

TEST(BuildCovariance, QuarterTurnSwapsAxes) {
    const double h = std::sqrt(0.5);
    const Mat3 s = build_covariance(Vec4(h, 0, 0, h), Vec3(std::log(2.0), 0, 0));
    const Mat3 R = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
    const Mat3 expected = R * Vec3(4, 1, 1).asDiagonal() * R.transpose();
    EXPECT_LT((s - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s - Mat3(Vec3(1, 4, 1).asDiagonal())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildCovariance, EigenvaluesAreSquaredScales) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 ls(u(rng), u(rng), u(rng));
        const Mat3 s = build_covariance(random_quat(rng), ls);
        EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> es(s);
        std::array<double, 3> got{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
        std::array<double, 3> want{std::exp(2 * ls(0)), std::exp(2 * ls(1)), std::exp(2 * ls(2))};
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-9 * want[k]);
    }
}

TEST(BuildCovariance, InvariantToQuaternionScaleAndSign) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec4 q = random_quat(rng);
        const Vec3 ls(0.3, -0.2, 0.1);
        const Mat3 base = build_covariance(q, ls);
        for (double k : {-1.0, 0.01, 37.0, -5.5})
            EXPECT_LT((build_covariance(k * q, ls) - base).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(ProjectCovariance, IsotropicExamples) {
    Mat23 J;
    J << 50, 0, 0, 0, 50, 0;
    Mat2 expected;
    expected << 2500.3, 0, 0, 2500.3;
    EXPECT_LT((project_covariance(Mat3::Identity(), Mat3::Identity(), J) - expected).cwiseAbs().maxCoeff(), 1e-9);
    const Mat3 W = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()).toRotationMatrix();
    EXPECT_LT((project_covariance(Mat3::Identity(), W, J) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ProjectCovariance, MatchesExplicitProduct) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 sigma = build_covariance(random_quat(rng), Vec3(u(rng), u(rng), u(rng)));
        const Mat3 W = quaternion_to_rotation(random_quat(rng));
        Mat23 J;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) J(r, c) = 40 * u(rng);
        // Element-wise oracle: sum_{a,b,c,d} J_ra W_ab S_bc W_dc J_sd
        Mat2 oracle = Mat2::Zero();
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b)
                        for (int c = 0; c < 3; ++c)
                            for (int d = 0; d < 3; ++d)
                                oracle(r, s) += J(r, a) * W(a, b) * sigma(b, c) * W(d, c) * J(s, d);
        const Mat2 got = project_covariance(sigma, W, J, 0.0);
        EXPECT_LT((got - oracle).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
    }
}

TEST(Activated, Conventions) {
    GaussianCloud c;
    c.push_back(Vec3(1, 2, 3), Vec4(2, 0, 0, 0), Vec3(0, std::log(2.0), 0), 0.0, Vec3::Zero());
    const Vec3 f(0.5 / kShC0, -0.5 / kShC0, -0.5 / kShC0);
    c.push_back(Vec3::Zero(), Vec4(1, 0, 0, 0), Vec3::Zero(), 2.0, f);
    const ActivatedGaussian a = activated(c, 0);
    EXPECT_EQ(a.opacity, 0.5);
    EXPECT_EQ(a.rgb, Vec3(0.5, 0.5, 0.5));
    EXPECT_TRUE(a.rotation.isApprox(Mat3::Identity()));
    EXPECT_NEAR(a.scale(1), 2.0, 1e-15);
    const ActivatedGaussian b = activated(c, 1);
    EXPECT_NEAR(b.rgb(0), 1.0, 1e-15);
    EXPECT_NEAR(b.rgb(1), 0.0, 1e-15);
    EXPECT_NEAR(b.rgb(2), 0.0, 1e-15);
    EXPECT_NEAR(b.opacity, 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_EQ(sh_to_rgb(Vec3(-10, 0, 0))(0), 0.0);
}

TEST(Ply, RoundTripIsBitExact) {
    Rng rng(1);
    const GaussianCloud c = random_float_cloud(3, rng);
    const GaussianCloud back = load_ply(save_ply(c));
    EXPECT_EQ(back, c);
}

TEST(Ply, EmptyCloudRoundTrips) {
    const std::string bytes = save_ply(GaussianCloud{});
    EXPECT_NE(bytes.find("element vertex 0"), std::string::npos);
    EXPECT_TRUE(load_ply(bytes).empty());
}

TEST(Ply, HeaderLayout) {
    Rng rng(2);
    const std::string bytes = save_ply(random_float_cloud(2, rng));
    const std::string header = bytes.substr(0, bytes.find("end_header"));
    EXPECT_EQ(header.rfind("ply\nformat binary_little_endian 1.0\n", 0), 0u);
    const char* props[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                           "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
    std::size_t pos = 0;
    for (const char* p : props) {
        const std::size_t at = header.find(std::string("property float ") + p + "\n", pos);
        ASSERT_NE(at, std::string::npos) << p;
        pos = at + 1;
    }
    EXPECT_EQ(bytes.size() - (bytes.find("end_header\n") + 11), 2u * 17u * 4u);
}

TEST(Ply, TruncatedPayloadIsRejected) {
    Rng rng(3);
    std::string bytes = save_ply(random_float_cloud(10, rng));
    bytes.resize(bytes.size() - 5 * 17 * 4);
    try {
        load_ply(bytes);
        FAIL() << "expected truncation error";
    } catch (const PlyError& e) {
        EXPECT_EQ(e.kind(), PlyError::Kind::Truncated);
    }
}

TEST(Ply, MalformedHeaderIsRejected) {
    try {
        load_ply("plx\nformat binary_little_endian 1.0\nend_header\n");
        FAIL();
    } catch (const PlyError& e) {
        EXPECT_EQ(e.kind(), PlyError::Kind::Header);
    }
    try {
        load_ply("ply\nformat binary_little_endian 1.0\nelement vertex 0\n");
        FAIL();
    } catch (const PlyError& e) {
        EXPECT_EQ(e.kind(), PlyError::Kind::Header);
    }
}

TEST(Ply, WrongPropertySetIsRejected) {
    const std::string bytes =
        "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n";
    try {
        load_ply(bytes);
        FAIL();
    } catch (const PlyError& e) {
        EXPECT_EQ(e.kind(), PlyError::Kind::Properties);
    }
}

TEST(Ply, AsciiVertexTable) {
    const std::string bytes =
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nend_header\n1 2 3 255\n-1 0.5 4 0\n";
    const PlyVertexTable t = parse_ply_vertices(bytes);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][t.column("y")], 0.5);
    EXPECT_EQ(t.rows[0][t.column("red")], 255.0);
    EXPECT_EQ(t.column("green"), -1);
}

TEST(Cloud, ValidateCatchesMismatchedArrays) {
    GaussianCloud c;
    c.push_back(Vec3::Zero(), Vec4(1, 0, 0, 0), Vec3::Zero(), 0.0, Vec3::Zero());
    EXPECT_NO_THROW(c.validate());
    c.colors.pop_back();
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace binosplat
