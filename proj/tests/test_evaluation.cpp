#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "poselift/errors.hpp"
#include "poselift/evaluation.hpp"
#include "support.hpp"

using namespace poselift;

namespace {

Pose3D random_pose(std::size_t joints, std::mt19937_64& gen, double spread = 300.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Pose3D p(joints);
    for (auto& v : p.coords) v = u(gen);
    return p;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(gen), n(gen), n(gen), n(gen));
    return q.normalized().toRotationMatrix();
}

Pose3D transform(const Pose3D& p, double s, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Pose3D out(p.joints);
    for (std::size_t j = 0; j < p.joints; ++j) {
        Eigen::Vector3d v(p.at(j, 0), p.at(j, 1), p.at(j, 2));
        Eigen::Vector3d w = s * r * v + t;
        for (int a = 0; a < 3; ++a) out.at(j, a) = w[a];
    }
    return out;
}

double rms(const Pose3D& a, const Pose3D& b) {
    double sse = 0.0;
    for (std::size_t k = 0; k < a.coords.size(); ++k) sse += (a.coords[k] - b.coords[k]) * (a.coords[k] - b.coords[k]);
    return std::sqrt(sse / static_cast<double>(a.joints));
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("mpjpe hand cases") {
    Pose3D gt(2), pred(2, {3, 4, 0, 0, 0, 0});
    CHECK(mpjpe(gt, gt) == 0.0);
    CHECK(std::abs(mpjpe(pred, gt) - 2.5) <= 1e-12);
    Pose3D a(3, {1, 2, 2, 0, 0, 0, 0, 0, 0}), b(3);
    CHECK(std::abs(mpjpe(a, b) - 1.0) <= 1e-12);
    CHECK(std::abs(mpjpe(std::vector{pred, a}, std::vector{gt, b}) - (2.5 * 2 + 3.0) / 5.0) <= 1e-12);
    CHECK_THROWS_AS(mpjpe(pred, b), DataError);
    CHECK_THROWS_AS(mpjpe(std::vector{pred}, std::vector{gt, gt}), DataError);
}

TEST_CASE("procrustes recovers identity") {
    std::mt19937_64 gen(1);
    auto p = random_pose(17, gen);
    auto r = procrustes_align(p, p);
    CHECK(std::abs(r.transform.scale - 1.0) <= 1e-12);
    CHECK((r.transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.transform.translation.cwiseAbs().maxCoeff() <= 1e-12 * 300);
    CHECK_FALSE(r.transform.reflection_corrected);
}

TEST_CASE("procrustes undoes exact similarity transforms") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> su(0.2, 5.0), tu(-1000, 1000);
    for (int trial = 0; trial < 200; ++trial) {
        auto gt = random_pose(17, gen);
        const double s = su(gen);
        const auto rot = random_rotation(gen);
        auto pred = transform(gt, s, rot, {tu(gen), tu(gen), tu(gen)});
        CHECK(p_mpjpe(pred, gt) <= 1e-9);
    }
}

TEST_CASE("procrustes matches rotation grid search") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 3; ++trial) {
        auto gt = random_pose(4, gen, 25.0);
        auto pred = random_pose(4, gen, 25.0);
        const auto aligned = procrustes_align(pred, gt).aligned;
        const double svd_residual = rms(aligned, gt);
        const double grid_residual = oracle::procrustes_grid_residual(pred, gt);
        CHECK(svd_residual <= grid_residual + 1e-9);
        CHECK(std::abs(svd_residual - grid_residual) <= 1e-2);
    }
}

TEST_CASE("procrustes corrects reflections and flags degenerate input") {
    std::mt19937_64 gen(4);
    auto gt = random_pose(6, gen);
    Pose3D mirrored = gt;
    for (std::size_t j = 0; j < 6; ++j) mirrored.at(j, 0) = -mirrored.at(j, 0);
    auto r = procrustes_align(mirrored, gt);
    CHECK(r.transform.reflection_corrected);
    CHECK(r.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));

    Pose3D line(4, {0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0});
    auto d = procrustes_align(line, line);
    CHECK(d.transform.degenerate);
    CHECK(mpjpe(d.aligned, line) <= 1e-9);

    CHECK_THROWS_AS(procrustes_align(Pose3D(2), Pose3D(2)), ConfigError);
}

TEST_CASE("aligned error never exceeds raw error") {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<std::size_t> jd(3, 20);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto j = jd(gen);
        auto gt = random_pose(j, gen);
        auto pred = random_pose(j, gen);
        CHECK(p_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-12);
    }
}

TEST_CASE("procrustes residual ignores similarity pre-transforms of the prediction") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 100; ++trial) {
        auto gt = random_pose(17, gen);
        auto pred = random_pose(17, gen);
        auto moved = transform(pred, 2.5, random_rotation(gen), {40, -70, 900});
        CHECK(std::abs(p_mpjpe(moved, gt) - p_mpjpe(pred, gt)) <= 1e-9);
    }
}

TEST_CASE("movement range hand cases") {
    PoseSequence2D still(5, 2, std::vector<double>(20, 0.3));
    CHECK(movement_range(still) == 0.0);
    // T=3, J=1, center (0,0): only the last frame moves, by 0.5.
    PoseSequence2D three(3, 1, {0.0, 0.0, 0.0, 0.0, 0.3, 0.4});
    CHECK(std::abs(movement_range(three) - 0.5 / 3.0) <= 1e-12);
    PoseSequence2D two_joints(3, 2, {0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.6, 0.8});
    CHECK(std::abs(movement_range(two_joints) - 1.0 / 6.0) <= 1e-12);
}

TEST_CASE("movement range is shift invariant and zero only when static") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> off(-0.2, 0.2);
    for (int trial = 0; trial < 500; ++trial) {
        auto w = support::dyadic_window(9, 17, gen, 0.7);
        const double mr = movement_range(w);
        CHECK(mr > 0.0);
        const double dx = off(gen), dy = off(gen);
        CHECK(std::abs(movement_range(w.shifted(dx, dy)) - mr) <= 1e-12);
    }
}

TEST_CASE("movement-range subsets") {
    std::mt19937_64 gen(8);
    for (std::size_t n : {10u, 11u, 19u, 37u, 100u}) {
        std::vector<double> mr(n);
        std::uniform_real_distribution<double> u(0, 1);
        for (auto& m : mr) m = u(gen);
        std::vector<Pose3D> pred, gt;
        for (std::size_t i = 0; i < n; ++i) {
            pred.push_back(random_pose(3, gen));
            gt.push_back(random_pose(3, gen));
        }
        auto subsets = mr_stratify(mr, pred, gt, 10);
        REQUIRE(subsets.size() == 10);
        std::set<std::size_t> seen;
        std::size_t lo = n, hi = 0;
        for (std::size_t b = 0; b < 10; ++b) {
            const auto& s = subsets[b];
            CHECK(s.id == b);
            lo = std::min(lo, s.members.size());
            hi = std::max(hi, s.members.size());
            for (auto m : s.members) {
                CHECK(seen.insert(m).second);
                CHECK(mr[m] >= s.mr_min);
                CHECK(mr[m] <= s.mr_max);
            }
            if (b > 0) CHECK(subsets[b - 1].mr_max <= s.mr_min);
            std::vector<Pose3D> p, g;
            for (auto m : s.members) {
                p.push_back(pred[m]);
                g.push_back(gt[m]);
            }
            CHECK(s.mpjpe == mpjpe(p, g));
        }
        CHECK(seen.size() == n);
        CHECK(hi - lo <= 1);
        CHECK(subsets.back().members.size() == hi);
    }
}

TEST_CASE("constant movement range lands in the first subset") {
    std::vector<double> mr(25, 0.0);
    std::vector<Pose3D> p(25, Pose3D(3)), g(25, Pose3D(3));
    auto subsets = mr_stratify(mr, p, g, 10);
    CHECK(subsets[0].members.size() == 25);
    for (std::size_t b = 1; b < 10; ++b) CHECK(subsets[b].members.empty());
    CHECK(subsets[0].mr_max == 0.0);
    CHECK_THROWS_AS(mr_stratify(std::vector<double>(9, 0.0), std::vector<Pose3D>(9, Pose3D(3)),
                                std::vector<Pose3D>(9, Pose3D(3)), 10),
                    DataError);
}

TEST_CASE("offset sampling") {
    auto a = sample_offsets(1000, 0.2, 11);
    auto b = sample_offsets(1000, 0.2, 11);
    REQUIRE(a.size() == 1000);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].dx == b[k].dx);
        CHECK(std::abs(a[k].dx) < 0.2);
        CHECK(std::abs(a[k].dy) < 0.2);
        CHECK(std::ldexp(a[k].dx, 30) == std::round(std::ldexp(a[k].dx, 30)));
        CHECK(a[k].magnitude() == doctest::Approx(std::hypot(a[k].dx, a[k].dy)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(sample_offsets(3, 0.0, 1), ConfigError);
}

TEST_CASE("shift experiment control row and skipping") {
    auto cfg = support::narrow_config(9);
    FeatureFusionNetwork net(cfg, 4);
    std::mt19937_64 gen(9);
    std::vector<Window> windows;
    for (int k = 0; k < 12; ++k) {
        Window w;
        w.input = support::dyadic_window(9, 17, gen, k < 4 ? 0.95 : 0.5);
        w.target = random_pose(17, gen);
        for (int a = 0; a < 3; ++a) w.target.at(0, a) = 0.0;
        windows.push_back(w);
    }
    auto rows = shift_experiment(net, windows, {{0.0, 0.0}, {0.25, 0.0}, {2.0, 2.0}});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].consistency == 0.0);
    CHECK(rows[0].skipped == 0);
    CHECK(rows[0].error_vs_gt == rows[0].original_error);
    CHECK(rows[1].evaluated + rows[1].skipped == 12);
    CHECK(rows[1].consistency > 0.0);
    CHECK(rows[2].evaluated == 0);
    CHECK(std::isnan(rows[2].consistency));
}

}
