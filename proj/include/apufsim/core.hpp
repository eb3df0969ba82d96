#pragma once

// Ground-truth arbiter PUF simulation: per-stage delay quadruples with linear
// voltage/temperature dependence, deterministic path accumulation, and a noisy
// arbiter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apufsim/errors.hpp"
#include "apufsim/rng.hpp"
#include "json.hpp"

namespace apufsim {

enum class ResponseBit : std::uint8_t { Zero = 0, One = 1 };

inline int to_int(ResponseBit r) noexcept { return static_cast<int>(r); }

/// k selection bits c_1..c_k, each 0 (cross) or 1 (straight).
class Challenge {
  public:
    Challenge() = default;
    explicit Challenge(std::vector<std::uint8_t> bits);

    std::size_t size() const noexcept { return bits_.size(); }
    std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    /// c_1 is the most significant bit; zero-padded to ceil(k/4) hex digits.
    std::string to_hex() const;
    static Challenge from_hex(std::string_view hex, std::size_t k);

    bool operator==(const Challenge &) const = default;

  private:
    std::vector<std::uint8_t> bits_;
};

struct OperatingCondition {
    double voltage = 1.20;      // V
    double temperature = 25.0;  // degrees C

    bool operator==(const OperatingCondition &) const = default;
};

std::string to_string(const OperatingCondition &cond);

struct Envelope {
    double voltage_min = 0.96;
    double voltage_max = 1.44;
    double temperature_min = 25.0;
    double temperature_max = 65.0;

    bool contains(const OperatingCondition &cond) const noexcept;
    bool operator==(const Envelope &) const = default;
};

/// One delay segment: base delay at the nominal condition plus linear coefficients.
struct Segment {
    double base = 1.0;          // ns
    double temp_coeff = 0.0;    // ns per degree C
    double volt_coeff = 0.0;    // ns per V

    double at(double dv, double dt) const noexcept { return base + temp_coeff * dt + volt_coeff * dv; }
    bool operator==(const Segment &) const = default;
};

/// Segment tXY is the delay from input X to output Y of one stage.
/// Straight (c = 1): 1->3 and 2->4. Cross (c = 0): 1->4 and 2->3.
struct StageDelays {
    Segment t13, t14, t23, t24;

    bool operator==(const StageDelays &) const = default;
};

struct EffectiveDelays {
    double t13, t14, t23, t24;
};

struct PathDelays {
    double top;
    double bottom;
};

/// Immutable simulated device. Construction validates positivity of every
/// segment over the whole envelope.
class ApufInstance {
  public:
    ApufInstance(std::vector<StageDelays> stages, OperatingCondition nominal, double noise_sigma,
                 Envelope envelope = {});

    std::size_t k() const noexcept { return stages_.size(); }
    const std::vector<StageDelays> &stages() const noexcept { return stages_; }
    const OperatingCondition &nominal() const noexcept { return nominal_; }
    double noise_sigma() const noexcept { return noise_sigma_; }
    const Envelope &envelope() const noexcept { return envelope_; }

    ApufInstance with_noise_sigma(double sigma) const;

    /// Throws EnvelopeError when `cond` is outside the envelope.
    void check_condition(const OperatingCondition &cond) const;

    bool operator==(const ApufInstance &) const = default;

  private:
    std::vector<StageDelays> stages_;
    OperatingCondition nominal_;
    double noise_sigma_;
    Envelope envelope_;
};

EffectiveDelays effective_stage_delays(const StageDelays &stage, const OperatingCondition &cond,
                                       const OperatingCondition &nominal);

/// Same, with the envelope check of `envelope`.
EffectiveDelays effective_stage_delays(const StageDelays &stage, const OperatingCondition &cond,
                                       const OperatingCondition &nominal, const Envelope &envelope);

/// Effective delays of every stage of one instance, frozen at one condition.
/// Cheap to query repeatedly; the hot path of every simulation loop.
class ConditionedApuf {
  public:
    ConditionedApuf(const ApufInstance &apuf, const OperatingCondition &cond);

    std::size_t k() const noexcept { return delays_.size(); }
    double noise_sigma() const noexcept { return noise_sigma_; }
    const OperatingCondition &condition() const noexcept { return cond_; }
    const std::vector<EffectiveDelays> &delays() const noexcept { return delays_; }

    PathDelays path_delays(const Challenge &c) const;
    double delay_difference(const Challenge &c) const;
    ResponseBit evaluate(const Challenge &c, Rng &rng) const;

  private:
    std::vector<EffectiveDelays> delays_;
    OperatingCondition cond_;
    double noise_sigma_;
};

PathDelays path_delays(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond);
double delay_difference(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond);
ResponseBit evaluate(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond, Rng &rng);

/// Arbiter decision: 0 iff t_dif > 0, ties resolve to 1.
inline ResponseBit arbiter(double tdif) noexcept { return tdif > 0.0 ? ResponseBit::Zero : ResponseBit::One; }

/// Arbiter decision after Gaussian jitter N(0, sigma^2) on each path total.
ResponseBit noisy_arbiter(double tdif, double sigma, Rng &rng);

Challenge random_challenge(std::size_t k, Rng &rng);

/// Fabrication-variation parameters for instances not built from RO data.
struct RandomInstanceParams {
    double delay_mean = 1.0;        // ns
    double delay_sd = 0.05;         // ns
    double temp_coeff_mean = 1e-3;  // ns/C
    double temp_coeff_sd = 1.5e-4;  // ns/C
    double volt_coeff_mean = -0.3;  // ns/V
    double volt_coeff_sd = 0.07;    // ns/V
    double noise_sigma = 0.0;       // ns
    OperatingCondition nominal{};
    Envelope envelope{};
};

ApufInstance random_instance(std::size_t k, const RandomInstanceParams &params, Rng &rng);

// JSON document "apufsim.instance", version 1.
nlohmann::json to_json(const ApufInstance &apuf);
ApufInstance instance_from_json(const nlohmann::json &doc);
nlohmann::json to_json(const OperatingCondition &cond);
OperatingCondition condition_from_json(const nlohmann::json &doc);

void save_instance(const ApufInstance &apuf, const std::filesystem::path &path);
ApufInstance load_instance(const std::filesystem::path &path);

/// Reads a whole JSON file; SchemaError on syntax errors, std::runtime_error on I/O.
nlohmann::json read_json_file(const std::filesystem::path &path);
/// Writes `doc` pretty-printed with a trailing newline.
void write_json_file(const nlohmann::json &doc, const std::filesystem::path &path);

}  // namespace apufsim
