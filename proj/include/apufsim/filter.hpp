#pragma once

// Reliable-challenge selection: keep a challenge only when the model's
// predicted |t_dif| exceeds a threshold, and answer it with the predicted bit.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "apufsim/model.hpp"

namespace apufsim {

struct Selected {
    ResponseBit predicted;
    double tdif;
};

struct Discarded {
    double tdif;
};

using FilterDecision = std::variant<Selected, Discarded>;

inline bool is_selected(const FilterDecision &d) noexcept { return std::holds_alternative<Selected>(d); }

/// Decision for a precomputed t_dif. Boundary |t_dif| == delta_t is discarded.
FilterDecision select_tdif(double tdif, double delta_t);
FilterDecision select(const Challenge &c, const DelayModel &m, double delta_t);

/// Uniform random challenges in fixed-size chunks, chunk j drawn from substream(seed, j).
/// Candidate i is the same challenge no matter how the chunks are scheduled.
class CandidateStream {
  public:
    static constexpr std::size_t chunk_size = 4096;

    CandidateStream(std::size_t k, std::uint64_t seed) : k_(k), seed_(seed) {}

    std::size_t k() const noexcept { return k_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::vector<Challenge> chunk(std::size_t j) const;

  private:
    std::size_t k_;
    std::uint64_t seed_;
};

struct ReliableEntry {
    Challenge challenge;
    ResponseBit predicted;
    double tdif;
};

struct ReliableBatch {
    std::vector<ReliableEntry> entries;
    double delta_t = 0.0;
    std::string model_fingerprint;
    std::uint64_t seed = 0;
    std::size_t candidates_examined = 0;
    std::size_t requested = 0;
};

/// Thrown when the candidate budget runs out; carries what was found.
class PartialBatchError : public std::runtime_error {
  public:
    PartialBatchError(const std::string &what, ReliableBatch batch)
        : std::runtime_error(what), batch_(std::move(batch))
    {
    }
    const ReliableBatch &batch() const noexcept { return batch_; }

  private:
    ReliableBatch batch_;
};

struct GenerateOptions {
    /// 0 selects 1000 * count / (1 - estimated loss).
    std::size_t max_candidates = 0;
    std::size_t threads = 1;
};

ReliableBatch generate_reliable(const DelayModel &m, double delta_t, std::size_t count, Rng &rng,
                                const GenerateOptions &opts = {});

double crp_loss(const DelayModel &m, double delta_t, std::size_t sample_size, Rng &rng);

/// Empirical |t_dif| quantile: the threshold whose CRP loss is `target_loss`.
double loss_to_delta(const DelayModel &m, double target_loss, std::size_t sample_size, Rng &rng);

/// True when every member still satisfies |predict_tdif| > delta_t with the recorded bit.
bool verify_batch(const ReliableBatch &batch, const DelayModel &m);

/// CSV `challenge_hex,predicted_bit,tdif` plus a JSON sidecar. `extra` lands under "config".
void write_batch(const ReliableBatch &batch, std::size_t k, const std::filesystem::path &csv,
                 const std::filesystem::path &sidecar, const nlohmann::json &extra = nlohmann::json::object());
ReliableBatch read_batch(const std::filesystem::path &csv, const std::filesystem::path &sidecar);

}  // namespace apufsim
