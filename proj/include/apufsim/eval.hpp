#pragma once

// Reliability evaluation: BER against a nominal reference, noise calibration,
// BER@delta_t over condition grids, CRP loss and response randomness.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apufsim/filter.hpp"

namespace apufsim {

class CalibrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ConditionGrid {
    std::vector<OperatingCondition> conditions;
    std::size_t nominal_index = 0;

    const OperatingCondition &nominal() const { return conditions.at(nominal_index); }
    /// Throws when the nominal index is invalid or a condition leaves the envelope.
    void validate(const ApufInstance &apuf) const;

    /// 0.96-1.44 V at 25 C and 25-65 C at 1.20 V (+-20% voltage, 40 C span).
    static ConditionGrid wide();
    /// 1.08-1.32 V at 25 C and 25-65 C at 1.20 V (+-10% voltage).
    static ConditionGrid narrow();
    static ConditionGrid nominal_only(const OperatingCondition &nominal = {});
    static ConditionGrid voltage_sweep();
    static ConditionGrid temperature_sweep();
};

struct BerCount {
    std::size_t errors = 0;
    std::size_t trials = 0;
    std::size_t challenges = 0;

    double rate() const noexcept { return trials ? static_cast<double>(errors) / static_cast<double>(trials) : 0.0; }
    BerCount &operator+=(const BerCount &o) noexcept
    {
        errors += o.errors;
        trials += o.trials;
        challenges += o.challenges;
        return *this;
    }
};

struct Interval {
    double lower;
    double upper;
};

/// Two-sided 95% Clopper-Pearson interval.
Interval clopper_pearson_95(std::size_t errors, std::size_t trials);
/// One-sided 95% upper confidence bound on the error rate.
double upper_bound_95(std::size_t errors, std::size_t trials);

/// Reference = majority of `repeats` evaluations at ref; each of `repeats`
/// evaluations at test is one trial.
BerCount measure_ber(const ApufInstance &apuf, std::span<const Challenge> challenges,
                     const OperatingCondition &ref, const OperatingCondition &test, std::size_t repeats, Rng &rng);

struct CalibrationConfig {
    std::size_t challenges = 20'000;
    std::size_t repeats = 11;
    std::size_t max_iterations = 60;
};

/// Bisection on noise_sigma until the nominal BER is within `tolerance` of the target.
ApufInstance calibrate_noise(const ApufInstance &apuf, double target_nominal_ber, double tolerance, Rng &rng,
                             const CalibrationConfig &cfg = {});

struct BerAtDt {
    double delta_t = 0.0;
    std::vector<BerCount> per_condition;
    std::size_t selected = 0;
    std::size_t candidates_examined = 0;
    double ones_fraction = 0.0;
    /// Selected challenges whose nominal reference disagrees with the predicted bit.
    std::size_t prediction_mismatches = 0;

    BerCount pooled() const;
    std::size_t worst_index() const;
    const BerCount &worst() const { return per_condition.at(worst_index()); }
};

BerAtDt ber_at_dt(const ApufInstance &apuf, const DelayModel &m, double delta_t, const ConditionGrid &grid,
                  std::size_t n_selected, std::size_t repeats, Rng &rng, std::size_t threads = 1);

/// Fraction of ones.
double randomness(std::span<const ResponseBit> bits);

/// Threshold levels {0, 0.25, ..., 2.0}, each mapped to model units by `delta_at_anchor / 1.5`
/// so that level 1.5 sits at the 94% CRP-loss quantile.
std::vector<double> anchored_delta_grid(double delta_at_anchor);
std::vector<double> paper_levels();

struct ReportConfig {
    std::size_t default_challenges = 20'000;  // BER@Default per condition
    std::size_t candidates = 100'000;         // nested threshold sweep
    std::size_t repeats = 11;
    std::size_t threads = 1;
};

nlohmann::json to_json(const ReportConfig &cfg);

struct SweepLevel {
    double delta_t = 0.0;
    double label = 0.0;  // the un-mapped level, when the grid came from anchored_delta_grid
    double crp_loss = 0.0;
    std::size_t selected = 0;
    std::vector<BerCount> per_condition;
    double ones_fraction = 0.0;
    std::size_t prediction_mismatches = 0;

    BerCount pooled() const;
    std::size_t worst_index() const;
    const BerCount &worst() const { return per_condition.at(worst_index()); }
};

struct EvalReport {
    std::string instance_label;
    ConditionGrid grid;
    std::vector<BerCount> ber_default;  // per condition, unfiltered random challenges
    std::vector<SweepLevel> sweep;      // nested: level j's challenges contain level j+1's
    double model_accuracy = 0.0;        // predicted bit vs nominal reference, all candidates
    std::size_t candidates = 0;
    std::uint64_t seed = 0;
    ReportConfig config;
    double noise_sigma = 0.0;

    std::size_t worst_default_index() const;
};

EvalReport full_report(const ApufInstance &apuf, const DelayModel &m, const std::vector<double> &delta_grid,
                       const ConditionGrid &grid, const ReportConfig &cfg, Rng &rng,
                       const std::vector<double> &labels = {});

nlohmann::json to_json(const EvalReport &report);
EvalReport report_from_json(const nlohmann::json &doc);

/// One row per report, worst-case BER@Default then worst-case BER per sweep level.
std::string table_csv(std::span<const EvalReport> reports);
/// Per-condition BER@Default and per-level BER for one report.
std::string condition_csv(const EvalReport &report);
/// Whitespace-separated curve dumps (gnuplot-friendly).
std::string ber_by_condition_dat(std::span<const EvalReport> reports);
std::string crp_loss_dat(std::span<const EvalReport> reports);
std::string randomness_dat(std::span<const EvalReport> reports);

}  // namespace apufsim
