#include <cmath>
#include <random>

#include "apufsim/core.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace apufsim;

namespace {

ApufInstance from_quads(const std::vector<oracle::Quad> &quads, double sigma = 0.0)
{
    std::vector<StageDelays> stages;
    for (const auto &q : quads)
        stages.push_back({{q.t13, 0, 0}, {q.t14, 0, 0}, {q.t23, 0, 0}, {q.t24, 0, 0}});
    return ApufInstance(stages, {}, sigma);
}

std::vector<oracle::Quad> random_quads(std::size_t k, Rng &rng)
{
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::vector<oracle::Quad> q(k);
    for (auto &s : q)
        s = {u(rng), u(rng), u(rng), u(rng)};
    return q;
}

}  // namespace

TEST_CASE("k = 1 straight and cross paths")
{
    const auto apuf = from_quads({{1.0, 5.0, 7.0, 2.0}});
    const auto straight = path_delays(apuf, Challenge({1}), apuf.nominal());
    CHECK(straight.top == 1.0);
    CHECK(straight.bottom == 2.0);
    const auto cross = path_delays(apuf, Challenge({0}), apuf.nominal());
    CHECK(cross.top == 7.0);
    CHECK(cross.bottom == 5.0);
    CHECK(delay_difference(apuf, Challenge({1}), apuf.nominal()) == -1.0);
}

TEST_CASE("path delays match the brute-force tracer on every challenge for k <= 6")
{
    Rng rng(11);
    for (std::size_t k = 1; k <= 6; ++k) {
        const auto quads = random_quads(k, rng);
        const auto apuf = from_quads(quads);
        for (std::size_t n = 0; n < (std::size_t{1} << k); ++n) {
            const auto bits = oracle::enumerate(n, k);
            const auto [top, bottom] = oracle::trace(quads, bits);
            const auto p = path_delays(apuf, Challenge(bits), apuf.nominal());
            CHECK(p.top == doctest::Approx(top).epsilon(1e-12));
            CHECK(p.bottom == doctest::Approx(bottom).epsilon(1e-12));
            CHECK(delay_difference(apuf, Challenge(bits), apuf.nominal()) ==
                  doctest::Approx(top - bottom).epsilon(1e-12));
            Rng unused(0);
            CHECK(to_int(evaluate(apuf, Challenge(bits), apuf.nominal(), unused)) == oracle::response(quads, bits));
        }
    }
}

TEST_CASE("flipping one bit only changes the routing at that stage")
{
    Rng rng(5);
    const std::size_t k = 4;
    const auto quads = random_quads(k, rng);
    const auto apuf = from_quads(quads);
    for (std::size_t n = 0; n < 16; ++n) {
        auto bits = oracle::enumerate(n, k);
        for (std::size_t i = 0; i < k; ++i) {
            auto flipped = bits;
            flipped[i] ^= 1u;
            const auto expect = oracle::trace(quads, flipped);
            const auto got = path_delays(apuf, Challenge(flipped), apuf.nominal());
            CHECK(got.top == doctest::Approx(expect.first));
            CHECK(got.bottom == doctest::Approx(expect.second));
        }
    }
}

TEST_CASE("symmetric delays give zero difference")
{
    Rng rng(3);
    std::vector<oracle::Quad> quads;
    for (int i = 0; i < 8; ++i) {
        const double a = 1.0 + 0.1 * i, b = 0.7 + 0.05 * i;
        quads.push_back({a, b, b, a});
    }
    const auto apuf = from_quads(quads);
    for (int i = 0; i < 50; ++i)
        CHECK(delay_difference(apuf, random_challenge(8, rng), apuf.nominal()) == doctest::Approx(0.0));
}

TEST_CASE("effective delays follow the linear environmental model")
{
    const StageDelays s{{1.0, 0.01, 0.0}, {2.0, -0.002, 0.5}, {3.0, 0.003, -0.25}, {4.0, 0.0, -1.0}};
    const OperatingCondition nom{};
    const auto same = effective_stage_delays(s, nom, nom);
    CHECK(same.t13 == 1.0);
    CHECK(same.t14 == 2.0);
    CHECK(same.t23 == 3.0);
    CHECK(same.t24 == 4.0);

    const auto warm = effective_stage_delays(s, {1.20, 35.0}, nom);
    CHECK(warm.t13 == doctest::Approx(1.1));

    // By hand at dV = +0.12, dT = +20.
    const auto e = effective_stage_delays(s, {1.32, 45.0}, nom);
    CHECK(e.t13 == doctest::Approx(1.0 + 0.2));
    CHECK(e.t14 == doctest::Approx(2.0 - 0.04 + 0.06));
    CHECK(e.t23 == doctest::Approx(3.0 + 0.06 - 0.03));
    CHECK(e.t24 == doctest::Approx(4.0 - 0.12));
}

TEST_CASE("conditions outside the envelope are rejected")
{
    const auto apuf = from_quads({{1, 1, 1, 1}});
    CHECK_THROWS_AS(path_delays(apuf, Challenge({1}), {0.90, 25.0}), EnvelopeError);
    CHECK_THROWS_AS(path_delays(apuf, Challenge({1}), {1.20, 70.0}), EnvelopeError);
    CHECK_NOTHROW(path_delays(apuf, Challenge({1}), {1.44, 65.0}));
}

TEST_CASE("length mismatch is a dimension error")
{
    const auto apuf = from_quads({{1, 1, 1, 1}, {1, 1, 1, 1}});
    CHECK_THROWS_AS(path_delays(apuf, Challenge({1}), apuf.nominal()), DimensionError);
    CHECK_THROWS_AS(delay_difference(apuf, Challenge({1, 0, 1}), apuf.nominal()), DimensionError);
}

TEST_CASE("noiseless arbiter and tie convention")
{
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(noisy_arbiter(3.0, 0.0, rng) == ResponseBit::Zero);
        CHECK(noisy_arbiter(-3.0, 0.0, rng) == ResponseBit::One);
    }
    CHECK(arbiter(0.0) == ResponseBit::One);
}

TEST_CASE("zero difference with noise is a fair coin")
{
    Rng rng(2024);
    int ones = 0;
    for (int i = 0; i < 10'000; ++i)
        ones += to_int(noisy_arbiter(0.0, 0.05, rng));
    CHECK(ones / 10'000.0 >= 0.47);
    CHECK(ones / 10'000.0 <= 0.53);
}

TEST_CASE("random challenges are uniform")
{
    Rng rng(77);
    CHECK(random_challenge(64, rng).size() == 64);
    std::vector<int> counts(64, 0);
    for (int i = 0; i < 100'000; ++i) {
        const auto c = random_challenge(64, rng);
        for (std::size_t j = 0; j < 64; ++j)
            counts[j] += c[j];
    }
    for (int n : counts) {
        CHECK(n / 1e5 >= 0.49);
        CHECK(n / 1e5 <= 0.51);
    }
    Rng a(1), b(2);
    CHECK(random_challenge(64, a) != random_challenge(64, b));
}

TEST_CASE("scaling every delay preserves responses")
{
    Rng rng(9);
    const auto apuf = random_instance(32, {}, rng);
    std::vector<StageDelays> scaled = apuf.stages();
    const double lambda = 2.5;
    for (auto &s : scaled)
        for (Segment *seg : {&s.t13, &s.t14, &s.t23, &s.t24})
            *seg = {seg->base * lambda, seg->temp_coeff * lambda, seg->volt_coeff * lambda};
    const ApufInstance big(scaled, apuf.nominal(), 0.0);
    for (int i = 0; i < 200; ++i) {
        const auto c = random_challenge(32, rng);
        const OperatingCondition cond{1.08, 45.0};
        CHECK(delay_difference(big, c, cond) == doctest::Approx(lambda * delay_difference(apuf, c, cond)));
        CHECK(arbiter(delay_difference(big, c, cond)) == arbiter(delay_difference(apuf, c, cond)));
    }
}

TEST_CASE("nominal BER is non-decreasing in noise sigma")
{
    Rng rng(4);
    const auto apuf = random_instance(64, {}, rng);
    std::vector<Challenge> cs;
    for (int i = 0; i < 2000; ++i)
        cs.push_back(random_challenge(64, rng));
    double prev = -1.0;
    for (double sigma : {0.0, 0.02, 0.05, 0.1, 0.2}) {
        const auto noisy = apuf.with_noise_sigma(sigma);
        Rng eval_rng(99);
        int flips = 0;
        for (const auto &c : cs)
            for (int r = 0; r < 5; ++r)
                flips += evaluate(noisy, c, noisy.nominal(), eval_rng) != arbiter(delay_difference(noisy, c, noisy.nominal()));
        const double ber = flips / (5.0 * cs.size());
        CHECK(ber >= prev);
        prev = ber;
    }
}

TEST_CASE("hex encoding puts c_1 first")
{
    const Challenge c({1, 0, 0, 0, 0, 0, 0, 1});
    CHECK(c.to_hex() == "81");
    CHECK(Challenge::from_hex("81", 8) == c);
    const Challenge odd({1, 1, 0, 1, 0, 1});
    CHECK(odd.to_hex() == "35");
    CHECK(Challenge::from_hex(odd.to_hex(), 6) == odd);
    CHECK_THROWS_AS(Challenge::from_hex("ff", 6), DimensionError);
    CHECK_THROWS(Challenge::from_hex("zz", 8));
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto r = random_challenge(64, rng);
        CHECK(Challenge::from_hex(r.to_hex(), 64) == r);
    }
}

TEST_CASE("instance JSON round-trips exactly")
{
    Rng rng(12);
    const auto apuf = random_instance(16, {.noise_sigma = 0.0123}, rng);
    const auto back = instance_from_json(to_json(apuf));
    CHECK(back == apuf);
    CHECK(to_json(back).dump() == to_json(apuf).dump());
    auto doc = to_json(apuf);
    doc["format"] = "something-else";
    CHECK_THROWS_AS(instance_from_json(doc), SchemaError);
}

TEST_CASE("invalid instances are rejected")
{
    CHECK_THROWS(ApufInstance({}, {}, 0.0));
    CHECK_THROWS(ApufInstance({{{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}}}, {}, -1.0));
    CHECK_THROWS(ApufInstance({{{-1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}}}, {}, 0.0));
    CHECK_THROWS_AS(ApufInstance({{{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}}}, {2.0, 25.0}, 0.0), EnvelopeError);
}
