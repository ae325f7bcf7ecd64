#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "poselift/encoding.hpp"
#include "poselift/errors.hpp"

using namespace poselift;

namespace {

// Coordinates on a 2^-20 grid inside (-0.6, 0.6): sums with grid offsets are exact.
PoseSequence2D dyadic_sequence(std::size_t frames, std::size_t joints, std::mt19937_64& gen) {
    std::uniform_int_distribution<long> dist(-(6L << 20) / 10, (6L << 20) / 10);
    std::vector<double> c(frames * joints * 2);
    for (auto& v : c) v = std::ldexp(static_cast<double>(dist(gen)), -20);
    return PoseSequence2D(frames, joints, c);
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_SUITE("encoding") {

TEST_CASE("pose window validation") {
    CHECK_THROWS_AS(PoseSequence2D(4, 1, std::vector<double>(8)), ConfigError);
    CHECK_THROWS_AS(PoseSequence2D(3, 2, std::vector<double>(12), 2), ConfigError);
    CHECK_THROWS_AS(PoseSequence2D(3, 2, std::vector<double>(10)), ConfigError);
    PoseSequence2D seq(9, 1, std::vector<double>(18, 0.0));
    CHECK(seq.center_index() == 4);
    CHECK(seq.inside_unit_box());
}

TEST_CASE("positional encoding subtracts the root") {
    PoseSequence2D seq(1, 2, {0.1, 0.1, 0.4, -0.3});
    auto p = positional_encode(seq);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.0);
    CHECK(p[2] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p[3] == doctest::Approx(-0.4).epsilon(1e-15));

    auto shifted = positional_encode(seq.shifted(0.15, 0.07));
    CHECK(bit_identical(p, shifted));
}

TEST_CASE("positional encoding root is zero in every frame") {
    std::mt19937_64 gen(3);
    auto seq = dyadic_sequence(9, 5, gen);
    PoseSequence2D rooted(9, 5, {seq.coords().begin(), seq.coords().end()}, 3);
    auto p = positional_encode(rooted);
    for (std::size_t t = 0; t < 9; ++t) {
        CHECK(p[(t * 5 + 3) * 2] == 0.0);
        CHECK(p[(t * 5 + 3) * 2 + 1] == 0.0);
    }
}

TEST_CASE("positional encoding is bit-exactly shift invariant") {
    std::mt19937_64 gen(17);
    std::uniform_int_distribution<long> off(-(2L << 20) / 10, (2L << 20) / 10);
    for (int trial = 0; trial < 200; ++trial) {
        auto seq = dyadic_sequence(27, 17, gen);
        const double dx = std::ldexp(static_cast<double>(off(gen)), -20);
        const double dy = std::ldexp(static_cast<double>(off(gen)), -20);
        REQUIRE(bit_identical(positional_encode(seq), positional_encode(seq.shifted(dx, dy))));
    }
}

TEST_CASE("temporal operators on hand cases") {
    // frame 0 holds k_t, frame 1 is the center k_c, frame 2 is unused
    auto pair = [](double tx, double ty, double cx, double cy) {
        return PoseSequence2D(3, 1, {tx, ty, cx, cy, 0.0, 0.0});
    };
    auto sub = temporal_encode(pair(0.5, 0.2, 0.1, 0.2), TemporalOperator{TemporalKind::Sub});
    CHECK(sub[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(sub[1] == 0.0);
    CHECK(sub[2] == 0.0);
    CHECK(sub[3] == 0.0);

    CHECK(temporal_encode(pair(1, 0, 0, 1), {TemporalKind::InnerProduct})[0] == 0.0);
    CHECK(temporal_encode(pair(1, 0, 0, 1), {TemporalKind::CrossProduct})[0] == 1.0);
    CHECK(temporal_encode(pair(2, 0, 1, 0), {TemporalKind::Cosine})[0] == 1.0);
    CHECK(temporal_encode(pair(0, 0, 1, 0), {TemporalKind::Cosine})[0] == 0.0);
    CHECK(temporal_encode(pair(1, 1, 1e-13, 0), {TemporalKind::Cosine})[0] == 0.0);

    auto sq = temporal_encode(pair(0.5, -0.25, 0.0, 0.25), {TemporalKind::SubPlusSquare});
    CHECK(sq[0] == 0.5);
    CHECK(sq[1] == -0.5);
    CHECK(sq[2] == 0.25);
    CHECK(sq[3] == 0.25);
}

TEST_CASE("center-frame nullity and window zeroing") {
    std::mt19937_64 gen(5);
    auto seq = dyadic_sequence(27, 17, gen);
    auto sub = temporal_encode(seq, {TemporalKind::Sub});
    for (std::size_t j = 0; j < 17; ++j) {
        CHECK(sub[(13 * 17 + j) * 2] == 0.0);
        CHECK(sub[(13 * 17 + j) * 2 + 1] == 0.0);
    }
    auto win = temporal_encode(seq, TemporalOperator::parse("SUB(9f)"));
    for (std::size_t t = 0; t < 27; ++t)
        for (std::size_t j = 0; j < 17; ++j)
            for (std::size_t c = 0; c < 2; ++c) {
                const std::size_t i = (t * 17 + j) * 2 + c;
                if (t < 9 || t > 17) CHECK(win[i] == 0.0);
                else CHECK(win[i] == sub[i]);
            }
    CHECK_THROWS_AS(temporal_encode(seq, TemporalOperator{TemporalKind::SubWindowed, 29}), ConfigError);
}

TEST_CASE("cross product antisymmetry and cosine range") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double a = u(gen), b = u(gen), c = u(gen), d = u(gen);
        const double fwd = temporal_encode(PoseSequence2D(3, 1, {a, b, c, d, 0, 0}), {TemporalKind::CrossProduct})[0];
        const double rev = temporal_encode(PoseSequence2D(3, 1, {c, d, a, b, 0, 0}), {TemporalKind::CrossProduct})[0];
        CHECK(fwd == -rev);
        const double cs = temporal_encode(PoseSequence2D(3, 1, {a, b, c, d, 0, 0}), {TemporalKind::Cosine})[0];
        CHECK(cs >= -1.0);
        CHECK(cs <= 1.0);
        const double self = temporal_encode(PoseSequence2D(3, 1, {a, b, a, b, 0, 0}), {TemporalKind::Cosine})[0];
        CHECK(self == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("operator parsing and names") {
    for (const char* name : {"SUB", "IP", "CP", "CS", "SUB+SUB_S", "SUB(81f)"}) {
        CHECK(TemporalOperator::parse(name).name() == name);
    }
    CHECK(TemporalOperator::parse("SUB").channels() == 2);
    CHECK(TemporalOperator::parse("IP").channels() == 1);
    CHECK(TemporalOperator::parse("CP").channels() == 1);
    CHECK(TemporalOperator::parse("CS").channels() == 1);
    CHECK(TemporalOperator::parse("SUB+SUB_S").channels() == 4);
    CHECK(TemporalOperator::parse("SUB(81f)").window == 81);
    CHECK_THROWS_AS(TemporalOperator::parse("SUB(80f)"), ConfigError);
    CHECK_THROWS_AS(TemporalOperator::parse("DIV"), ConfigError);
}

TEST_CASE("assemble_input channel count over every combination") {
    std::mt19937_64 gen(21);
    auto seq = dyadic_sequence(9, 4, gen);
    const std::vector<TemporalOperator> ops{{TemporalKind::Sub},          {TemporalKind::InnerProduct},
                                            {TemporalKind::CrossProduct}, {TemporalKind::Cosine},
                                            {TemporalKind::SubPlusSquare}, {TemporalKind::SubWindowed, 5}};
    for (int mask = 0; mask < 8; ++mask) {
        InputFlags flags{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
        for (const auto& op : ops) {
            if (mask == 0) {
                CHECK_THROWS_AS(assemble_input(seq, flags, op), ConfigError);
                continue;
            }
            auto in = assemble_input(seq, flags, op);
            const std::size_t expect = 2 * flags.absolute + 2 * flags.positional + op.channels() * flags.temporal;
            CHECK(in.channels == expect);
            CHECK(channel_count(flags, op) == expect);
            CHECK(in.values.size() == 9 * 4 * expect);

            // blocks appear in (abs, P, T) order
            auto pos = positional_encode(seq);
            auto tmp = temporal_encode(seq, op);
            for (std::size_t t = 0; t < 9; ++t)
                for (std::size_t j = 0; j < 4; ++j) {
                    std::size_t c = 0;
                    if (flags.absolute) {
                        CHECK(in.at(t, j, c++) == seq.x(t, j));
                        CHECK(in.at(t, j, c++) == seq.y(t, j));
                    }
                    if (flags.positional) {
                        CHECK(in.at(t, j, c++) == pos[(t * 4 + j) * 2]);
                        CHECK(in.at(t, j, c++) == pos[(t * 4 + j) * 2 + 1]);
                    }
                    if (flags.temporal)
                        for (std::size_t k = 0; k < op.channels(); ++k)
                            CHECK(in.at(t, j, c++) == tmp[(t * 4 + j) * op.channels() + k]);
                }
        }
    }
}

TEST_CASE("assemble_input examples") {
    std::mt19937_64 gen(2);
    auto seq = dyadic_sequence(9, 3, gen);
    auto abs_only = assemble_input(seq, {true, false, false}, {});
    CHECK(abs_only.channels == 2);
    CHECK(std::equal(abs_only.values.begin(), abs_only.values.end(), seq.coords().begin()));
    CHECK(assemble_input(seq, {true, true, true}, {TemporalKind::Sub}).channels == 6);

    auto p_only = assemble_input(seq, {false, true, false}, {});
    CHECK(p_only.channels == 2);
    auto p_shift = assemble_input(seq.shifted(0.25, -0.125), {false, true, false}, {});
    CHECK(bit_identical(p_only.values, p_shift.values));
    // root joint of the P block at the center frame
    CHECK(p_only.at(4, 0, 0) == 0.0);
    CHECK(p_only.at(4, 0, 1) == 0.0);
}

TEST_CASE("coordinate normalization") {
    auto c = normalize_coords({512, 384}, 1024, 768);
    CHECK(c.x == 0.0);
    CHECK(c.y == 0.0);
    auto corner = normalize_coords({0, 0}, 500, 500);
    CHECK(corner.x == -1.0);
    CHECK(corner.y == -1.0);
    auto wide = normalize_coords({1000, 1000}, 1000, 500);
    CHECK(wide.x == 1.0);
    CHECK(wide.y == 1.5);

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    for (int i = 0; i < 1000; ++i) {
        Point2 p{u(gen), u(gen)};
        auto back = denormalize_coords(normalize_coords(p, 1000, 1002), 1000, 1002);
        CHECK(std::abs(back.x - p.x) <= 1e-12 * 1000);
        CHECK(std::abs(back.y - p.y) <= 1e-12 * 1000);
    }
    CHECK_THROWS_AS(normalize_coords({0, 0}, 0, 10), ConfigError);
}

}
