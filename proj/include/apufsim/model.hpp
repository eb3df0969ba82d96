#pragma once

// Statistical delay model learned from nominal-condition CRPs.
//
// t_dif is linear in the parity features phi_i = prod_{j>=i} (1 - 2 c_j), so
// the model is a weight vector over phi plus a bias, fitted by logistic
// regression on majority-voted responses (response 0 <=> predicted t_dif > 0).
// Per-stage segment probabilities (P13, P24, P14, P23) are read back from the
// fitted weights through the logistic link.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apufsim/core.hpp"

namespace apufsim {

class NormalizationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CrpRecord {
    Challenge challenge;
    OperatingCondition condition;
    std::vector<ResponseBit> responses;

    /// Most frequent response; ties resolve to 1.
    ResponseBit majority() const;
};

struct CrpDataset {
    std::size_t k = 0;
    std::string source;  // condition label
    std::vector<CrpRecord> records;
};

CrpDataset collect_crps(const ApufInstance &apuf, std::size_t n, const OperatingCondition &cond,
                        std::size_t repeats, Rng &rng);

/// k parity features followed by the constant 1.
std::vector<double> feature_transform(const Challenge &c);
void feature_transform(const Challenge &c, std::span<double> out);

/// Exact model weights of a device at one condition (the delay-difference recurrence).
std::vector<double> weights_from_delays(const ConditionedApuf &apuf);

struct TrainConfig {
    double learning_rate = 4.0;
    std::size_t max_epochs = 2000;
    double tolerance = 1e-7;        // stop when the loss improves by less than this
    double heldout_fraction = 0.1;  // taken from the end of the dataset
    double min_accuracy = 0.95;     // below this on heldout, a warning is recorded
};

nlohmann::json to_json(const TrainConfig &cfg);
TrainConfig train_config_from_json(const nlohmann::json &doc, TrainConfig defaults = {});

/// (P13, P24, P14, P23) of one stage.
struct StageProbabilities {
    double p13, p24, p14, p23;
};

struct TrainingInfo {
    std::size_t iterations = 0;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    double heldout_accuracy = 0.0;
    std::size_t train_size = 0;
    std::size_t heldout_size = 0;
    bool converged = false;
    std::string warning;
    double wall_time_s = 0.0;  // not serialized; model files stay reproducible
};

class DelayModel {
  public:
    explicit DelayModel(std::vector<double> weights, double scale = 1.0, TrainingInfo info = {});

    std::size_t k() const noexcept { return weights_.size() - 1; }
    const std::vector<double> &weights() const noexcept { return weights_; }
    double scale() const noexcept { return scale_; }
    const TrainingInfo &training() const noexcept { return info_; }
    const std::vector<StageProbabilities> &stage_probs() const noexcept { return stage_probs_; }

    DelayModel with_scale(double scale) const;

    /// <weights, phi(c)> before scaling.
    double raw_tdif(const Challenge &c) const;

  private:
    std::vector<double> weights_;
    double scale_;
    TrainingInfo info_;
    std::vector<StageProbabilities> stage_probs_;
};

/// Mean logistic loss and its gradient over the given records.
struct LossAndGradient {
    double loss;
    std::vector<double> gradient;
};
LossAndGradient logistic_loss(std::span<const double> weights, std::span<const CrpRecord> records);

DelayModel train(const CrpDataset &data, const TrainConfig &cfg = {});

double predict_tdif(const DelayModel &m, const Challenge &c);
ResponseBit predict_response(const DelayModel &m, const Challenge &c);

/// Sets the scale so predicted t_dif over uniform challenges has unit standard deviation.
DelayModel normalize(const DelayModel &m, std::size_t sample_size, Rng &rng);

double accuracy(const DelayModel &m, const CrpDataset &data);

/// SHA-256 (hex) of the canonical serialization of weights and scale.
std::string fingerprint(const DelayModel &m);

// JSON document "apufsim.model", version 1.
nlohmann::json to_json(const DelayModel &m);
DelayModel model_from_json(const nlohmann::json &doc);
void save_model(const DelayModel &m, const std::filesystem::path &path);
DelayModel load_model(const std::filesystem::path &path);

}  // namespace apufsim
