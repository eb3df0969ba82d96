#pragma once

// Command-line front end: synth, enroll, filter, eval, report.
//
// Exit codes: 0 success, 2 input/schema error, 3 budget or calibration failure
// (partial output written where possible), 4 internal invariant violation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace apufsim::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kBudgetError = 3, kInternalError = 4 };

struct GlobalConfig {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string out;
};

struct SynthConfig {
    bool fixture = false;
    bool random = false;
    std::string ro_csv;
    std::size_t k = 64;
    std::size_t ro_count = 512;
    std::string fixture_csv;     // optional dump of the generated fixture
    std::string assignment;      // optional input
    std::string assignment_out;  // optional output
    std::optional<double> noise_sigma;
    std::optional<double> calibrate_ber;
    double calibrate_tolerance = 0.001;
    std::size_t ber_challenges = 5'000;
};

struct EnrollConfig {
    std::string instance;
    std::size_t n_crps = 10'000;
    std::size_t repeats = 11;
    double learning_rate = 4.0;
    std::size_t epochs = 2'000;
    double tolerance = 1e-7;
    double heldout = 0.1;
    double min_accuracy = 0.95;
    std::size_t normalize_samples = 100'000;
    std::string train_config;  // optional JSON TrainConfig
};

struct FilterConfig {
    std::string model;
    std::optional<double> delta_t;
    std::optional<double> target_loss;
    std::size_t count = 1'000;
    std::size_t max_candidates = 0;
    std::size_t loss_samples = 100'000;
};

struct EvalConfig {
    std::string instance;
    std::string model;
    std::string conditions = "wide";
    std::vector<double> delta_t;
    std::vector<double> target_loss;
    std::size_t candidates = 100'000;
    std::size_t default_challenges = 20'000;
    std::size_t repeats = 11;
    std::size_t loss_samples = 200'000;
    std::string label;
};

struct ReportCommandConfig {
    std::vector<std::string> reports;
};

nlohmann::json to_json(const GlobalConfig &g);
nlohmann::json to_json(const SynthConfig &c);
nlohmann::json to_json(const EnrollConfig &c);
nlohmann::json to_json(const FilterConfig &c);
nlohmann::json to_json(const EvalConfig &c);

int cmd_synth(const GlobalConfig &g, const SynthConfig &c, std::ostream &out, std::ostream &err);
int cmd_enroll(const GlobalConfig &g, const EnrollConfig &c, std::ostream &out, std::ostream &err);
int cmd_filter(const GlobalConfig &g, const FilterConfig &c, std::ostream &out, std::ostream &err);
int cmd_eval(const GlobalConfig &g, const EvalConfig &c, std::ostream &out, std::ostream &err);
int cmd_report(const GlobalConfig &g, const ReportCommandConfig &c, std::ostream &out, std::ostream &err);

/// Parses argv, dispatches, and maps exceptions to exit codes.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace apufsim::cli
