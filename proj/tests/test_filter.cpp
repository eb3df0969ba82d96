#include <cmath>
#include <filesystem>
#include <set>

#include "apufsim/filter.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace apufsim;

namespace {

DelayModel unit_model(std::size_t k, std::uint64_t seed)
{
    Rng rng(seed);
    const auto apuf = random_instance(k, {}, rng);
    return normalize(DelayModel(weights_from_delays(ConditionedApuf(apuf, apuf.nominal()))), 100'000, rng);
}

}  // namespace

TEST_CASE("select on a given difference")
{
    CHECK(is_selected(select_tdif(0.3, 0.0)));
    CHECK(is_selected(select_tdif(-0.3, 0.0)));
    CHECK(!is_selected(select_tdif(0.0, 0.0)));

    const auto pos = select_tdif(2.0, 1.5);
    REQUIRE(is_selected(pos));
    CHECK(std::get<Selected>(pos).predicted == ResponseBit::Zero);
    const auto neg = select_tdif(-2.0, 1.5);
    REQUIRE(is_selected(neg));
    CHECK(std::get<Selected>(neg).predicted == ResponseBit::One);
    CHECK(!is_selected(select_tdif(-1.0, 1.5)));
    CHECK(!is_selected(select_tdif(1.5, 1.5)));
    CHECK(!is_selected(select_tdif(-1.5, 1.5)));
    CHECK_THROWS(select_tdif(1.0, -0.1));
}

TEST_CASE("filter decisions match the traced oracle for every challenge at k <= 6")
{
    for (std::size_t k = 1; k <= 6; ++k) {
        Rng rng(500 + k);
        const auto apuf = random_instance(k, {}, rng);
        const auto quads = oracle::nominal_quads(apuf);
        const DelayModel m(weights_from_delays(ConditionedApuf(apuf, apuf.nominal())));
        for (double dt : {0.0, 0.02, 0.05, 0.1, 0.3}) {
            for (std::size_t n = 0; n < (std::size_t{1} << k); ++n) {
                const auto bits = oracle::enumerate(n, k);
                const auto [top, bottom] = oracle::trace(quads, bits);
                const double t = top - bottom;
                const auto d = select(Challenge(bits), m, dt);
                // Skip values within rounding distance of the boundary.
                if (std::abs(std::abs(t) - dt) < 1e-12)
                    continue;
                CHECK(is_selected(d) == (std::abs(t) > dt));
                if (is_selected(d))
                    CHECK(to_int(std::get<Selected>(d).predicted) == oracle::response(quads, bits));
            }
        }
    }
}

TEST_CASE("noiselessly trained model filters exactly like the delays at k <= 6")
{
    TrainConfig cfg;
    cfg.heldout_fraction = 0.0;
    cfg.max_epochs = 20'000;
    cfg.tolerance = 0.0;
    for (std::size_t k = 3; k <= 6; ++k) {
        Rng rng(900 + k);
        const auto apuf = random_instance(k, {}, rng);
        const auto quads = oracle::nominal_quads(apuf);
        CrpDataset d{k, "nominal", {}};
        for (std::size_t n = 0; n < (std::size_t{1} << k); ++n) {
            const auto bits = oracle::enumerate(n, k);
            d.records.push_back({Challenge(bits), apuf.nominal(), {ResponseBit(oracle::response(quads, bits))}});
        }
        const auto m = normalize(train(d, cfg), 10'000, rng);

        // Generated batches cover the whole space at delta_t = 0 with enough draws.
        const auto batch = generate_reliable(m, 0.0, 4096, rng);
        std::set<std::string> seen;
        for (const auto &e : batch.entries) {
            CHECK(to_int(e.predicted) == oracle::response(quads, {e.challenge.bits().begin(), e.challenge.bits().end()}));
            seen.insert(e.challenge.to_hex());
        }
        CHECK(seen.size() == (std::size_t{1} << k));
    }
}

TEST_CASE("selection is monotone in delta_t")
{
    const auto m = unit_model(64, 3);
    Rng rng(4);
    const std::vector<double> grid{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
    for (int i = 0; i < 2000; ++i) {
        const auto c = random_challenge(64, rng);
        for (std::size_t a = 1; a < grid.size(); ++a) {
            const auto hi = select(c, m, grid[a]);
            if (!is_selected(hi))
                continue;
            const auto lo = select(c, m, grid[a - 1]);
            REQUIRE(is_selected(lo));
            CHECK(std::get<Selected>(lo).predicted == std::get<Selected>(hi).predicted);
            CHECK(std::get<Selected>(hi).predicted == predict_response(m, c));
        }
    }
}

TEST_CASE("candidate stream is reproducible by chunk")
{
    const CandidateStream s(64, 77);
    const auto a = s.chunk(3);
    const auto b = s.chunk(3);
    CHECK(a.size() == CandidateStream::chunk_size);
    CHECK(a == b);
    CHECK(a != s.chunk(4));
}

TEST_CASE("generate_reliable budget and counts")
{
    const auto m = unit_model(64, 5);
    Rng rng(6);
    const auto all = generate_reliable(m, 0.0, 100, rng);
    CHECK(all.entries.size() == 100);
    CHECK(all.candidates_examined >= 100);
    CHECK(all.candidates_examined <= 101);

    Rng r2(7);
    const double dt94 = loss_to_delta(m, 0.94, 200'000, r2);
    const auto batch = generate_reliable(m, dt94, 600, r2);
    CHECK(batch.entries.size() == 600);
    CHECK(batch.candidates_examined > 8'000);
    CHECK(batch.candidates_examined < 12'000);
    CHECK(verify_batch(batch, m));
    for (const auto &e : batch.entries)
        CHECK(e.predicted == predict_response(m, e.challenge));

    Rng r3(8);
    try {
        generate_reliable(m, 1e9, 5, r3, {.max_candidates = 10});
        FAIL("expected a partial batch");
    } catch (const PartialBatchError &e) {
        CHECK(e.batch().entries.empty());
        CHECK(e.batch().candidates_examined == 10);
    }
}

TEST_CASE("generate_reliable does not depend on the thread count")
{
    const auto m = unit_model(64, 9);
    Rng a(10), b(10);
    const auto one = generate_reliable(m, 1.0, 3000, a, {.threads = 1});
    const auto four = generate_reliable(m, 1.0, 3000, b, {.threads = 4});
    CHECK(one.candidates_examined == four.candidates_examined);
    REQUIRE(one.entries.size() == four.entries.size());
    for (std::size_t i = 0; i < one.entries.size(); ++i)
        CHECK(one.entries[i].challenge == four.entries[i].challenge);
}

TEST_CASE("CRP loss and its inverse")
{
    const auto m = unit_model(64, 11);
    Rng rng(12);
    CHECK(crp_loss(m, 0.0, 10'000, rng) < 1e-3);
    CHECK(loss_to_delta(m, 0.0, 10'000, rng) == 0.0);

    // Two-sided Gaussian tail: P(|Z| <= 1.8808) = 0.94.
    const double loss = crp_loss(m, 1.88, 200'000, rng);
    CHECK(loss == doctest::Approx(0.94).epsilon(0.01));
    const double dt = loss_to_delta(m, 0.94, 200'000, rng);
    CHECK(dt == doctest::Approx(1.8808).epsilon(0.03));

    for (double q : {0.5, 0.9, 0.94, 0.99}) {
        const double d = loss_to_delta(m, q, 200'000, rng);
        CHECK(std::abs(crp_loss(m, d, 200'000, rng) - q) <= 0.01);
    }

    double prev = -1.0;
    for (double d = 0.0; d <= 3.0; d += 0.25) {
        Rng same(13);
        const double l = crp_loss(m, d, 20'000, same);
        CHECK(l >= prev);
        prev = l;
    }
    CHECK_THROWS(crp_loss(m, 1.0, 999, rng));
}

TEST_CASE("batch survives a file round-trip and re-verifies")
{
    const auto m = unit_model(64, 14);
    Rng rng(15);
    const auto batch = generate_reliable(m, 1.2, 500, rng);
    const auto dir = std::filesystem::temp_directory_path() / "apufsim_filter_test";
    std::filesystem::create_directories(dir);
    write_batch(batch, 64, dir / "b.csv", dir / "b.json", {{"note", "test"}});
    const auto back = read_batch(dir / "b.csv", dir / "b.json");
    CHECK(back.delta_t == batch.delta_t);
    CHECK(back.model_fingerprint == fingerprint(m));
    CHECK(back.seed == batch.seed);
    CHECK(back.candidates_examined == batch.candidates_examined);
    REQUIRE(back.entries.size() == batch.entries.size());
    for (std::size_t i = 0; i < back.entries.size(); ++i) {
        CHECK(back.entries[i].challenge == batch.entries[i].challenge);
        CHECK(back.entries[i].predicted == batch.entries[i].predicted);
        CHECK(back.entries[i].tdif == batch.entries[i].tdif);
    }
    CHECK(verify_batch(back, m));
    CHECK(!verify_batch(back, m.with_scale(m.scale() * 10)));
    std::filesystem::remove_all(dir);
}
