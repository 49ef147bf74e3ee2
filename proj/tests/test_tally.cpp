#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mdiqkd/bsm.hpp"
#include "mdiqkd/tally.hpp"

using namespace mdiqkd;

namespace {

PulsePairOutcome make_outcome(Basis ba, Basis bb, int bit_a, int bit_b,
                              std::array<bool, 4> clicks, int k = 3, int l = 3) {
    PulsePairOutcome o;
    o.intensity_index_alice = static_cast<std::uint8_t>(k);
    o.intensity_index_bob = static_cast<std::uint8_t>(l);
    o.basis_alice = ba;
    o.basis_bob = bb;
    o.bit_alice = static_cast<std::uint8_t>(bit_a);
    o.bit_bob = static_cast<std::uint8_t>(bit_b);
    o.clicks = clicks;
    return o;
}

}  // namespace

TEST_CASE("sift accepts exactly the two cross-detector cross-bin coincidences") {
    // click order: (D1,t0), (D1,t1), (D2,t0), (D2,t1)
    const std::array<bool, 4> d1t0_d2t1{true, false, false, true};
    const std::array<bool, 4> d1t1_d2t0{false, true, true, false};

    CHECK(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, d1t0_d2t1)).accepted);
    CHECK(sift(make_outcome(Basis::X, Basis::X, 0, 1, d1t1_d2t0)).accepted);

    // basis mismatch is never accepted, regardless of clicks
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::X, 0, 1, d1t0_d2t1)).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::X, Basis::Z, 0, 1, d1t1_d2t0)).accepted);

    // everything else is rejected: none, singles, same detector, same bin,
    // triples, quads
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {false, false, false, false})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, false, false, false})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {false, false, false, true})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, true, false, false})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {false, false, true, true})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, false, true, false})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {false, true, false, true})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, true, true, false})).accepted);
    CHECK_FALSE(sift(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, true, true, true})).accepted);
}

TEST_CASE("sifted error means the raw bits agree (Bob flips on singlet)") {
    const std::array<bool, 4> acc{true, false, false, true};
    for (Basis basis : {Basis::Z, Basis::X}) {
        CHECK_FALSE(sift(make_outcome(basis, basis, 0, 1, acc)).error);
        CHECK_FALSE(sift(make_outcome(basis, basis, 1, 0, acc)).error);
        CHECK(sift(make_outcome(basis, basis, 0, 0, acc)).error);
        CHECK(sift(make_outcome(basis, basis, 1, 1, acc)).error);
    }
}

TEST_CASE("record tracks sent/accepted/errors and the round balance invariant") {
    TallyTable t;
    t.record(make_outcome(Basis::Z, Basis::Z, 0, 0, {true, false, false, true}, 1, 2));
    t.record(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, false, false, true}, 1, 2));
    t.record(make_outcome(Basis::Z, Basis::Z, 0, 1, {false, false, false, false}, 1, 2));
    t.record(make_outcome(Basis::Z, Basis::X, 0, 1, {true, false, false, true}, 1, 2));

    const TallyCell& c = t.cell(1, 2, Basis::Z);
    CHECK(c.sent == 3);
    CHECK(c.accepted == 2);
    CHECK(c.errors == 1);
    CHECK(t.total_rounds() == 4);
    CHECK(t.basis_mismatched() == 1);
    CHECK(t.matched_rounds() == 3);

    std::uint64_t sum_sent = 0;
    for (int k = 0; k < kNumIntensities; ++k)
        for (int l = 0; l < kNumIntensities; ++l)
            for (Basis basis : {Basis::Z, Basis::X}) sum_sent += t.cell(k, l, basis).sent;
    CHECK(sum_sent + t.basis_mismatched() == t.total_rounds());
}

TEST_CASE("merge is commutative and equals recording the union") {
    ExperimentConfig cfg = preset_config("paper-50km");
    cfg.pulse_pairs = 5000;
    const RoundSimulator sim(cfg);

    TallyTable whole, part1, part2, part2_then_1;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        const auto o = sim.simulate(i);
        whole.record(o);
        (i < 1700 ? part1 : part2).record(o);
    }
    TallyTable merged = part1;
    merged.merge(part2);
    part2_then_1 = part2;
    part2_then_1.merge(part1);

    CHECK(merged == whole);
    CHECK(part2_then_1 == whole);
    CHECK(merged.total_rounds() == 5000);
}

TEST_CASE("rates turn counts into gains with binomial deviations") {
    std::array<TallyCell, 32> cells{};
    // Z-basis cell (0,0): the first entry in cell order
    cells[0] = {1000000, 1000, 10};
    const TallyTable t = tally_from_counts(cells, 1000000);
    const RatesTable r = rates(t, Basis::Z);
    const CellRate& c = r.at(0, 0);
    CHECK(c.q == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(c.e == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(c.sigma_q == doctest::Approx(3.160696125855822e-5).epsilon(1e-12));
    CHECK(c.sigma_e == doctest::Approx(std::sqrt(0.01 * 0.99 / 1000.0)).epsilon(1e-12));
    CHECK_FALSE(c.empty);
    CHECK_FALSE(c.e_undefined);

    // untouched cell: empty and undefined flags
    const CellRate& u = r.at(2, 3);
    CHECK(u.empty);
    CHECK(u.e_undefined);
    CHECK(u.q == 0.0);
    CHECK(u.e == 0.0);

    // accepted but error-free cell is defined with zero rate
    std::array<TallyCell, 32> cells2{};
    cells2[5 * 2] = {100, 0, 0};  // (1,1,Z): sent only
    const TallyTable t2 = tally_from_counts(cells2, 100);
    const CellRate& v = rates(t2, Basis::Z).at(1, 1);
    CHECK_FALSE(v.empty);
    CHECK(v.e_undefined);
}

TEST_CASE("CSV round-trips byte-identically") {
    ExperimentConfig cfg = preset_config("paper-50km");
    cfg.pulse_pairs = 20000;
    const RoundSimulator sim(cfg);
    TallyTable t;
    for (std::uint64_t i = 0; i < 20000; ++i) t.record(sim.simulate(i));

    const std::string csv = tally_to_csv(t);
    const TallyTable back = tally_from_csv(csv);
    CHECK(back == t);
    CHECK(tally_to_csv(back) == csv);

    const auto path = std::filesystem::temp_directory_path() / "tally_roundtrip.csv";
    write_tally_csv(t, path.string());
    const TallyTable loaded = load_tally_csv(path.string());
    CHECK(loaded == t);
    std::filesystem::remove(path);
}

TEST_CASE("CSV parser reports malformed input precisely") {
    TallyTable t;
    t.record(make_outcome(Basis::Z, Basis::Z, 0, 1, {true, false, false, true}, 0, 0));
    const std::string good = tally_to_csv(t);

    // missing total_rounds comment with no fallback
    std::string no_comment = good.substr(good.find('\n') + 1);
    CHECK_THROWS_WITH_AS(tally_from_csv(no_comment), doctest::Contains("total_rounds"),
                         std::runtime_error);
    CHECK(tally_from_csv(no_comment, 1).total_rounds() == 1);

    // a duplicated cell row
    const std::string header_and_first = good;
    std::string dup = good;
    const auto last_line_start = dup.rfind('\n', dup.size() - 2);
    dup += dup.substr(last_line_start + 1);
    CHECK_THROWS_WITH_AS(tally_from_csv(dup), doctest::Contains("duplicate"), std::runtime_error);

    // a dropped row
    std::string missing = good;
    missing.erase(last_line_start + 1);
    CHECK_THROWS_WITH_AS(tally_from_csv(missing), doctest::Contains("missing"), std::runtime_error);

    // accepted > sent is inconsistent
    std::string inconsistent = good;
    const auto pos = inconsistent.find("1,1,0");  // sent=1,accepted=1,errors=0 of cell (0,0,Z)
    REQUIRE(pos != std::string::npos);
    inconsistent.replace(pos, 5, "1,2,0");
    CHECK_THROWS(tally_from_csv(inconsistent));

    // garbage value in a numeric column
    std::string garbage = good;
    garbage.replace(garbage.find("1,1,0"), 5, "1,x,0");
    CHECK_THROWS(tally_from_csv(garbage));

    CHECK_THROWS(tally_from_csv(""));
}

TEST_CASE("dark counts alone produce the expected accidental coincidences") {
    // with vacuum inputs every click is dark: P(accept) = 2 p_d^2 (1-p_d)^2
    ExperimentConfig cfg = preset_config("paper-50km");
    cfg.intensities_alice = {0.0, 0.0, 0.0, 0.0};
    cfg.intensities_bob = {0.0, 0.0, 0.0, 0.0};
    cfg.pulse_pairs = 1000000;
    cfg.seed = 31337;

    auto coincidence_pattern = [](const PulsePairOutcome& o) {
        return (o.clicks[0] && o.clicks[3] && !o.clicks[1] && !o.clicks[2]) ||
               (o.clicks[1] && o.clicks[2] && !o.clicks[0] && !o.clicks[3]);
    };

    SUBCASE("low dark rate p_d = 5e-4") {
        cfg.dark_count_prob_per_gate = 5e-4;
        const double p_acc = 4.99500125e-7;  // 2 p_d^2 (1-p_d)^2
        const RoundSimulator sim(cfg);
        std::uint64_t patterns = 0;
        for (std::uint64_t i = 0; i < cfg.pulse_pairs; ++i)
            patterns += coincidence_pattern(sim.simulate(i)) ? 1 : 0;
        // Poisson with mean ~0.5: more than 5 events would be a 1e-5 fluke
        const double mean = p_acc * double(cfg.pulse_pairs);
        CHECK(mean == doctest::Approx(0.499500125).epsilon(1e-12));
        CHECK(patterns <= 5);
    }
    SUBCASE("stronger dark rate p_d = 0.01 resolves the rate sharply") {
        cfg.dark_count_prob_per_gate = 0.01;
        const double p_pattern = 2.0 * 0.01 * 0.01 * 0.99 * 0.99;
        const RoundSimulator sim(cfg);
        TallyTable t;
        std::uint64_t patterns = 0;
        for (std::uint64_t i = 0; i < cfg.pulse_pairs; ++i) {
            const auto o = sim.simulate(i);
            t.record(o);
            patterns += coincidence_pattern(o) ? 1 : 0;
        }
        const double mean = p_pattern * double(cfg.pulse_pairs);
        CHECK(std::abs(double(patterns) - mean) <= 3.0 * std::sqrt(mean));

        // the sift keeps only the basis-matched half of those coincidences
        std::uint64_t accepted = 0, errors = 0;
        for (int k = 0; k < 4; ++k)
            for (int l = 0; l < 4; ++l)
                for (Basis basis : {Basis::Z, Basis::X}) {
                    accepted += t.cell(k, l, basis).accepted;
                    errors += t.cell(k, l, basis).errors;
                }
        CHECK(std::abs(double(accepted) - 0.5 * mean) <= 3.0 * std::sqrt(0.5 * mean));
        // dark-count errors are uninformative: raw bits agree half the time
        CHECK(std::abs(double(errors) - 0.5 * double(accepted)) <=
              3.0 * std::sqrt(0.25 * double(accepted)));
    }
}

TEST_CASE("gain decreases with fiber length at fixed intensity") {
    ExperimentConfig cfg = preset_config("paper-50km");
    cfg.intensities_alice = {0.0, 0.5, 0.7, 1.0};
    cfg.intensities_bob = {0.0, 0.5, 0.7, 1.0};
    cfg.basis_prob_z = 1.0;
    cfg.dark_count_prob_per_gate = 0.0;
    cfg.misalignment = 0.0;
    cfg.pulse_pairs = 10000000;
    cfg.seed = 99;

    auto total_gain = [](const ExperimentConfig& c) {
        const RoundSimulator sim(c);
        std::uint64_t matched = 0, accepted = 0;
        for (std::uint64_t i = 0; i < c.pulse_pairs; ++i) {
            const auto o = sim.simulate(i);
            if (o.basis_alice != o.basis_bob) continue;
            ++matched;
            if (sift(o).accepted) ++accepted;
        }
        return std::pair{accepted, matched};
    };

    ExperimentConfig near_cfg = cfg;
    near_cfg.fiber_length_km_alice = near_cfg.fiber_length_km_bob = 25;
    ExperimentConfig far_cfg = cfg;
    far_cfg.fiber_length_km_alice = far_cfg.fiber_length_km_bob = 35;

    const auto [acc_near, n_near] = total_gain(near_cfg);
    const auto [acc_far, n_far] = total_gain(far_cfg);
    const double q_near = double(acc_near) / double(n_near);
    const double q_far = double(acc_far) / double(n_far);
    const double sigma = std::sqrt(q_near * (1 - q_near) / double(n_near) +
                                   q_far * (1 - q_far) / double(n_far));
    CHECK(q_near - q_far > 5.0 * sigma);
}
