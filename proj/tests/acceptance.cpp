// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "apufsim/eval.hpp"
#include "apufsim/synth.hpp"
#include "oracle.hpp"

using namespace apufsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char *f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<Challenge> draw(std::size_t n, Rng &rng)
{
    std::vector<Challenge> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(random_challenge(64, rng));
    return out;
}

ApufInstance primary_board()
{
    Rng rng(1);
    const auto ro = generate_ro_fixture(512, sweep_conditions(), rng);
    return build_synthetic_apuf(ro, 64, default_assignment(512, 64, rng));
}

const CalibrationConfig kCalibration{.challenges = 50'000, .repeats = 11, .max_iterations = 60};

struct Shared {
    ApufInstance apuf;
    DelayModel model;
};

// Calibrated board and its enrolled model, shared by AC1-AC4, AC6 and AC7.
std::optional<Shared> shared;
double ac1_seconds = 0.0;
double ac2_seconds = 0.0;

Outcome ac1()
{
    Rng rng(101);
    const auto t0 = std::chrono::steady_clock::now();
    const auto apuf = calibrate_noise(primary_board(), 0.022, 0.001, rng, kCalibration);
    ac1_seconds = seconds_since(t0);
    Rng verify(102);
    const auto cs = draw(20'000, verify);
    const auto ber = measure_ber(apuf, cs, apuf.nominal(), apuf.nominal(), 11, verify);
    shared.emplace(Shared{apuf, DelayModel(std::vector<double>(65, 1.0))});
    const bool ok = ber.trials >= 100'000 && ber.rate() >= 0.020 && ber.rate() <= 0.024 && ac1_seconds < 60.0;
    return {ok, fmt("nominal BER %.4f%% over %zu trials on fresh challenges (sigma %.5f ns); calibration %.2f s",
                    100 * ber.rate(), ber.trials, apuf.noise_sigma(), ac1_seconds)};
}

Outcome ac2()
{
    Rng rng(201);
    const auto &apuf = shared->apuf;
    const auto data = collect_crps(apuf, 10'000, apuf.nominal(), 11, rng);
    const auto t0 = std::chrono::steady_clock::now();
    const auto raw = train(data);
    ac2_seconds = seconds_since(t0);
    shared->model = normalize(raw, 100'000, rng);
    const double acc = raw.training().heldout_accuracy;
    return {acc >= 0.95 && ac2_seconds < 15.0,
            fmt("heldout accuracy %.2f%% (%zu records), training %.2f s", 100 * acc, raw.training().heldout_size,
                ac2_seconds)};
}

Outcome ac3()
{
    Rng rng(301);
    const auto &[apuf, m] = *shared;
    const double dt = loss_to_delta(m, 0.94, 200'000, rng);
    const auto r = ber_at_dt(apuf, m, dt, ConditionGrid::wide(), 10'000, 11, rng, 4);
    const auto pooled = r.pooled();
    const auto &worst = r.worst();
    const double ub_condition = upper_bound_95(worst.errors, worst.trials);
    const double ub_pooled = upper_bound_95(pooled.errors, pooled.trials);
    const bool ok = r.selected == 10'000 && pooled.errors == 0 && ub_condition <= 3e-5;
    return {ok, fmt("delta_t %.4f: %zu mismatches in %zu re-evaluations over 9 conditions; 95%% upper bound %.2e "
                    "per condition, %.2e pooled",
                    dt, pooled.errors, pooled.trials, ub_condition, ub_pooled)};
}

EvalReport sweep_report(const ApufInstance &apuf, const DelayModel &m, std::uint64_t seed)
{
    Rng rng(seed);
    const double d94 = loss_to_delta(m, 0.94, 200'000, rng);
    ReportConfig cfg;
    cfg.default_challenges = 100'000;
    cfg.candidates = 100'000;
    cfg.repeats = 11;
    cfg.threads = 4;
    return full_report(apuf, m, anchored_delta_grid(d94), ConditionGrid::wide(), cfg, rng, paper_levels());
}

Outcome ac4()
{
    const auto rep = sweep_report(shared->apuf, shared->model, 401);
    bool monotone = true;
    std::string curve;
    for (std::size_t l = 0; l < rep.sweep.size(); ++l) {
        const double w = rep.sweep[l].worst().rate();
        if (l > 0 && w > rep.sweep[l - 1].worst().rate())
            monotone = false;
        curve += fmt("%s%.4g%%", l ? " " : "", 100 * w);
    }
    // Compare like with like: the same condition in both designs.
    const std::size_t j = rep.worst_default_index();
    const auto &d = rep.ber_default[j];
    const auto &z = rep.sweep.front().per_condition[j];
    const double p = d.rate();
    const double sd = std::sqrt(p * (1 - p) / static_cast<double>(d.challenges)) +
                      std::sqrt(p * (1 - p) / static_cast<double>(z.challenges));
    const double gap = std::abs(z.rate() - p);
    return {monotone && gap <= 3 * sd,
            fmt("worst-case BER by level [%s]; level 0 %.4f%% vs BER@Default %.4f%% (gap %.2f sd)", curve.c_str(),
                100 * z.rate(), 100 * p, gap / sd)};
}

Outcome ac5()
{
    Rng rng(501);
    const auto apuf = calibrate_noise(primary_board(), 0.0499, 0.002, rng, kCalibration);
    Rng verify(502);
    const auto cs = draw(20'000, verify);
    const double nominal = measure_ber(apuf, cs, apuf.nominal(), apuf.nominal(), 11, verify).rate();
    const auto m = normalize(train(collect_crps(apuf, 10'000, apuf.nominal(), 11, rng)), 100'000, rng);
    const auto rep = sweep_report(apuf, m, 503);
    const double worst_default = rep.ber_default[rep.worst_default_index()].rate();
    double zero_at = -1.0;
    for (const auto &lvl : rep.sweep)
        if (lvl.selected > 0 && lvl.pooled().errors == 0) {
            zero_at = lvl.label;
            break;
        }
    const bool ok = std::abs(nominal - 0.0499) <= 0.004 && worst_default >= 0.10 && worst_default <= 0.17 &&
                    zero_at >= 0.0;
    return {ok, fmt("nominal BER %.3f%%, worst BER@Default %.2f%%, heldout accuracy %.2f%%, first zero-error level "
                    "%.2f",
                    100 * nominal, 100 * worst_default, 100 * m.training().heldout_accuracy, zero_at)};
}

Outcome ac6()
{
    Rng rng(601);
    bool ok = true;
    std::string parts;
    for (double q : {0.5, 0.9, 0.94, 0.99}) {
        const double dt = loss_to_delta(shared->model, q, 200'000, rng);
        const double back = crp_loss(shared->model, dt, 200'000, rng);
        ok = ok && std::abs(back - q) <= 0.01;
        parts += fmt("%s%.2f->%.3f->%.4f", parts.empty() ? "" : ", ", q, dt, back);
    }
    return {ok, parts};
}

Outcome ac7()
{
    Rng rng(701);
    const auto &m = shared->model;
    const auto grid = anchored_delta_grid(loss_to_delta(m, 0.94, 200'000, rng));
    const auto levels = paper_levels();
    bool ok = true;
    std::string parts;
    for (std::size_t l = 0; l < grid.size(); ++l) {
        const auto batch = generate_reliable(m, grid[l], 100'000, rng, {.threads = 4});
        std::vector<ResponseBit> bits;
        bits.reserve(batch.entries.size());
        for (const auto &e : batch.entries)
            bits.push_back(e.predicted);
        const double ones = randomness(bits);
        ok = ok && ones >= 0.48 && ones <= 0.52;
        parts += fmt("%s%.2f:%.4f", parts.empty() ? "" : " ", levels[l], ones);
    }
    return {ok, "fraction of ones per level, 100000 selected each [" + parts + "]"};
}

Outcome ac8()
{
    std::size_t checked = 0, mismatched = 0;
    for (std::size_t k = 1; k <= 6; ++k) {
        Rng rng(800 + k);
        const auto apuf = random_instance(k, {}, rng);
        const auto quads = oracle::nominal_quads(apuf);
        const DelayModel m(weights_from_delays(ConditionedApuf(apuf, apuf.nominal())));
        for (std::size_t n = 0; n < (std::size_t{1} << k); ++n) {
            const auto bits = oracle::enumerate(n, k);
            const Challenge c(bits);
            const auto [top, bottom] = oracle::trace(quads, bits);
            const auto p = path_delays(apuf, c, apuf.nominal());
            const double t = top - bottom;
            const double tol = 1e-12 * (1.0 + std::abs(top) + std::abs(bottom));
            bool ok = std::abs(p.top - top) <= tol && std::abs(p.bottom - bottom) <= tol &&
                      std::abs(delay_difference(apuf, c, apuf.nominal()) - t) <= tol &&
                      std::abs(predict_tdif(m, c) - t) <= tol &&
                      to_int(predict_response(m, c)) == oracle::response(quads, bits);
            for (double dt : {0.0, 0.05, 0.2}) {
                if (std::abs(std::abs(t) - dt) <= tol)
                    continue;
                const auto d = select(c, m, dt);
                ok = ok && is_selected(d) == (std::abs(t) > dt);
                if (is_selected(d))
                    ok = ok && to_int(std::get<Selected>(d).predicted) == oracle::response(quads, bits);
            }
            ++checked;
            mismatched += !ok;
        }
    }

    double worst_rel = 0.0;
    Rng rng(809);
    std::normal_distribution<double> g(0.0, 0.7);
    for (std::size_t k : {2, 4, 6, 8}) {
        std::vector<CrpRecord> recs;
        for (int i = 0; i < 64; ++i)
            recs.push_back({random_challenge(k, rng), {}, {rng() & 1 ? ResponseBit::One : ResponseBit::Zero}});
        std::vector<double> w(k + 1);
        for (auto &x : w)
            x = g(rng);
        const auto grad = logistic_loss(w, recs).gradient;
        for (std::size_t j = 0; j <= k; ++j) {
            const double h = 1e-5;
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            const double num = (logistic_loss(wp, recs).loss - logistic_loss(wm, recs).loss) / (2 * h);
            worst_rel = std::max(worst_rel, std::abs(grad[j] - num) / std::max(std::abs(num), 1e-8));
        }
    }
    return {mismatched == 0 && worst_rel < 1e-5,
            fmt("%zu of %zu challenges (k = 1..6) disagree with the traced oracle; worst gradient relative error "
                "%.2e",
                mismatched, checked, worst_rel)};
}

int shell(const std::string &dir, const std::string &args)
{
    const std::string cmd = "cd '" + dir + "' && '" + APUFSIM_CLI_PATH + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome ac9()
{
    const fs::path root = fs::temp_directory_path() / "apufsim_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> steps{
        "--seed 7 --threads 2 --out inst.json synth --fixture --k 64 --calibrate-ber 0.022",
        "--seed 8 --threads 2 --out model.json enroll --instance inst.json",
        "--seed 9 --threads 2 --out batch filter --model model.json --target-loss 0.94 --count 1000",
        "--seed 10 --threads 2 --out rep eval --instance inst.json --model model.json --candidates 20000 "
        "--default-challenges 5000",
        "--out summary report rep.json",
    };
    for (const char *run : {"a", "b"}) {
        const auto dir = root / run;
        fs::create_directories(dir);
        for (const auto &s : steps)
            if (const int code = shell(dir.string(), s); code != 0)
                return {false, fmt("run %s: '%s' exited with %d", run, s.c_str(), code)};
    }
    std::size_t files = 0;
    std::string diff;
    for (const auto &entry : fs::directory_iterator(root / "a")) {
        const auto name = entry.path().filename().string();
        if (name == "stdout.txt" || name == "stderr.txt")
            continue;
        ++files;
        if (slurp(entry.path()) != slurp(root / "b" / name))
            diff += " " + name;
    }
    fs::remove_all(root);
    return {files > 0 && diff.empty(),
            diff.empty() ? fmt("%zu output files byte-identical across two runs of all five subcommands", files)
                         : "differing files:" + diff};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
        {"AC1 nominal-noise calibration", ac1},   {"AC2 model accuracy", ac2},
        {"AC3 error-free at 94% loss", ac3},      {"AC4 monotone BER@dt", ac4},
        {"AC5 worst-corner tolerance", ac5},      {"AC6 loss/quantile round-trip", ac6},
        {"AC7 randomness preservation", ac7},     {"AC8 oracle equivalence", ac8},
        {"AC9 CLI determinism", ac9},
    };
    int failures = 0;
    for (const auto &[name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (failures ? "FAILED " : "ALL PASSED ") << (9 - failures) << "/9" << std::endl;
    return failures ? 1 : 0;
}
