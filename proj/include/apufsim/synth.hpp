#pragma once

// Synthetic APUFs from ring-oscillator frequency measurements: four ROs per
// stage, segment delay = 1/f, per-condition means give the environmental slopes.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "apufsim/core.hpp"

namespace apufsim {

/// Frequencies (MHz) of `ro_count` ROs, each measured repeatedly at every condition.
class RoMeasurementSet {
  public:
    /// `cells[ro * conditions.size() + j]` holds the samples of RO `ro` at condition j.
    RoMeasurementSet(std::size_t ro_count, std::vector<OperatingCondition> conditions,
                     std::vector<std::vector<double>> cells);

    std::size_t ro_count() const noexcept { return ro_count_; }
    const std::vector<OperatingCondition> &conditions() const noexcept { return conditions_; }
    const std::vector<double> &samples(std::size_t ro, std::size_t condition) const
    {
        return cells_.at(ro * conditions_.size() + condition);
    }
    /// Index of `cond` in conditions(), or npos.
    std::size_t find_condition(const OperatingCondition &cond) const noexcept;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    bool operator==(const RoMeasurementSet &) const = default;

  private:
    std::size_t ro_count_;
    std::vector<OperatingCondition> conditions_;
    std::vector<std::vector<double>> cells_;
};

/// Per stage, RO indices for (t13, t24, t14, t23).
struct StageAssignment {
    std::vector<std::array<std::size_t, 4>> stages;

    std::size_t k() const noexcept { return stages.size(); }
    /// Throws std::invalid_argument on repeated or out-of-range indices.
    void validate(std::size_t ro_count) const;

    bool operator==(const StageAssignment &) const = default;
};

nlohmann::json to_json(const StageAssignment &assign);
StageAssignment assignment_from_json(const nlohmann::json &doc);

/// CSV with header `ro_id,voltage_V,temperature_C,sample_idx,frequency_MHz`.
RoMeasurementSet parse_ro_dataset(const std::filesystem::path &path);
RoMeasurementSet parse_ro_dataset(std::istream &in);
void write_ro_dataset(const RoMeasurementSet &ro, const std::filesystem::path &path);
void write_ro_dataset(const RoMeasurementSet &ro, std::ostream &out);

/// Five voltages at 25 C and four further temperatures at 1.20 V.
std::vector<OperatingCondition> sweep_conditions();

struct SynthOptions {
    OperatingCondition nominal{1.20, 25.0};
};

ApufInstance build_synthetic_apuf(const RoMeasurementSet &ro, std::size_t k, const StageAssignment &assign,
                                  const SynthOptions &opts = {});

StageAssignment default_assignment(std::size_t ro_count, std::size_t k, Rng &rng);

/// Dispersion of the generated fixture. Drift is linear in the delay (1/f) domain.
struct FixtureParams {
    double freq_mean = 200.0;             // MHz
    double freq_sd = 1.0;                 // MHz, across ROs
    double jitter_sd = 0.1;               // MHz, per measurement
    std::size_t samples = 100;            // per (RO, condition)
    double delay_volt_coeff_mean = -1.5;  // ns/V
    double delay_volt_coeff_sd = 0.040;   // ns/V, across ROs
    double delay_temp_coeff_mean = 2e-3;  // ns/C
    double delay_temp_coeff_sd = 7.5e-5;  // ns/C, across ROs
    OperatingCondition nominal{1.20, 25.0};
};

RoMeasurementSet generate_ro_fixture(std::size_t ro_count, const std::vector<OperatingCondition> &conditions,
                                     Rng &rng, const FixtureParams &params = {});

}  // namespace apufsim
