#include "apufsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "parallel.hpp"

namespace apufsim {

using nlohmann::json;

namespace {

constexpr std::size_t kEvalChunk = 1024;
constexpr const char *kReportFormat = "apufsim.report";
constexpr int kReportVersion = 1;

/// Reference bit and per-condition error counts of one challenge.
struct ChallengeOutcome {
    ResponseBit reference = ResponseBit::One;
    std::vector<std::uint32_t> errors;
};

ResponseBit majority_of(double tdif, double sigma, std::size_t repeats, Rng &rng)
{
    std::size_t ones = 0;
    for (std::size_t r = 0; r < repeats; ++r)
        ones += noisy_arbiter(tdif, sigma, rng) == ResponseBit::One;
    return 2 * ones >= repeats ? ResponseBit::One : ResponseBit::Zero;
}

std::uint32_t count_mismatches(double tdif, double sigma, std::size_t repeats, ResponseBit reference, Rng &rng)
{
    std::uint32_t errors = 0;
    for (std::size_t r = 0; r < repeats; ++r)
        errors += noisy_arbiter(tdif, sigma, rng) != reference;
    return errors;
}

ChallengeOutcome evaluate_outcome(const ConditionedApuf &ref, std::span<const ConditionedApuf> tests,
                                  const Challenge &c, std::size_t repeats, Rng &rng)
{
    ChallengeOutcome out;
    out.reference = majority_of(ref.delay_difference(c), ref.noise_sigma(), repeats, rng);
    out.errors.reserve(tests.size());
    for (const auto &dev : tests)
        out.errors.push_back(count_mismatches(dev.delay_difference(c), dev.noise_sigma(), repeats, out.reference, rng));
    return out;
}

std::vector<ConditionedApuf> condition_devices(const ApufInstance &apuf, const ConditionGrid &grid)
{
    std::vector<ConditionedApuf> out;
    out.reserve(grid.conditions.size());
    for (const auto &cond : grid.conditions)
        out.emplace_back(apuf, cond);
    return out;
}

/// Outcomes for every challenge; chunk j of kEvalChunk challenges draws noise from substream(seed, j).
std::vector<ChallengeOutcome> evaluate_all(const ApufInstance &apuf, const ConditionGrid &grid,
                                           std::span<const Challenge> challenges, std::size_t repeats,
                                           std::uint64_t seed, std::size_t threads)
{
    const ConditionedApuf ref(apuf, grid.nominal());
    const auto devices = condition_devices(apuf, grid);
    std::vector<ChallengeOutcome> out(challenges.size());
    const std::size_t chunks = (challenges.size() + kEvalChunk - 1) / kEvalChunk;
    detail::parallel_for(chunks, threads, [&](std::size_t j) {
        Rng rng = substream(seed, j);
        const std::size_t end = std::min(challenges.size(), (j + 1) * kEvalChunk);
        for (std::size_t i = j * kEvalChunk; i < end; ++i)
            out[i] = evaluate_outcome(ref, devices, challenges[i], repeats, rng);
    });
    return out;
}

template <typename Level>
std::size_t worst_of(const Level &level)
{
    if (level.per_condition.empty())
        throw std::logic_error("no conditions evaluated");
    std::size_t best = 0;
    for (std::size_t j = 1; j < level.per_condition.size(); ++j)
        if (level.per_condition[j].rate() > level.per_condition[best].rate())
            best = j;
    return best;
}

template <typename Level>
BerCount pooled_of(const Level &level)
{
    BerCount total;
    for (const auto &b : level.per_condition) {
        total.errors += b.errors;
        total.trials += b.trials;
    }
    total.challenges = level.per_condition.empty() ? 0 : level.per_condition.front().challenges;
    return total;
}

json to_json(const BerCount &b)
{
    const auto ci = clopper_pearson_95(b.errors, b.trials);
    return json{{"errors", b.errors},
                {"trials", b.trials},
                {"challenges", b.challenges},
                {"rate", b.rate()},
                {"ci95", {ci.lower, ci.upper}},
                {"upper95", upper_bound_95(b.errors, b.trials)}};
}

BerCount ber_from_json(const json &doc)
{
    return {doc.at("errors").get<std::size_t>(), doc.at("trials").get<std::size_t>(),
            doc.at("challenges").get<std::size_t>()};
}

json counts_to_json(const std::vector<BerCount> &counts)
{
    json out = json::array();
    for (const auto &b : counts)
        out.push_back(to_json(b));
    return out;
}

std::vector<BerCount> counts_from_json(const json &doc)
{
    std::vector<BerCount> out;
    for (const auto &b : doc)
        out.push_back(ber_from_json(b));
    return out;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string label_of(const EvalReport &r, std::size_t index)
{
    return r.instance_label.empty() ? "instance" + std::to_string(index + 1) : r.instance_label;
}

}  // namespace

void ConditionGrid::validate(const ApufInstance &apuf) const
{
    if (conditions.empty() || nominal_index >= conditions.size())
        throw std::invalid_argument("condition grid has no nominal entry");
    for (const auto &c : conditions)
        apuf.check_condition(c);
}

ConditionGrid ConditionGrid::wide()
{
    return {{{1.20, 25.0}, {0.96, 25.0}, {1.08, 25.0}, {1.32, 25.0}, {1.44, 25.0},
             {1.20, 35.0}, {1.20, 45.0}, {1.20, 55.0}, {1.20, 65.0}},
            0};
}

ConditionGrid ConditionGrid::narrow()
{
    return {{{1.20, 25.0}, {1.08, 25.0}, {1.32, 25.0}, {1.20, 35.0}, {1.20, 45.0}, {1.20, 55.0}, {1.20, 65.0}}, 0};
}

ConditionGrid ConditionGrid::nominal_only(const OperatingCondition &nominal) { return {{nominal}, 0}; }

ConditionGrid ConditionGrid::voltage_sweep()
{
    return {{{1.20, 25.0}, {0.96, 25.0}, {1.08, 25.0}, {1.32, 25.0}, {1.44, 25.0}}, 0};
}

ConditionGrid ConditionGrid::temperature_sweep()
{
    return {{{1.20, 25.0}, {1.20, 35.0}, {1.20, 45.0}, {1.20, 55.0}, {1.20, 65.0}}, 0};
}

Interval clopper_pearson_95(std::size_t errors, std::size_t trials)
{
    if (trials == 0)
        return {0.0, 1.0};
    const double x = static_cast<double>(errors);
    const double n = static_cast<double>(trials);
    const double lower = errors == 0 ? 0.0 : boost::math::ibeta_inv(x, n - x + 1.0, 0.025);
    const double upper = errors == trials ? 1.0 : boost::math::ibeta_inv(x + 1.0, n - x, 0.975);
    return {lower, upper};
}

double upper_bound_95(std::size_t errors, std::size_t trials)
{
    if (trials == 0)
        return 1.0;
    if (errors == trials)
        return 1.0;
    const double x = static_cast<double>(errors);
    const double n = static_cast<double>(trials);
    return boost::math::ibeta_inv(x + 1.0, n - x, 0.95);
}

BerCount measure_ber(const ApufInstance &apuf, std::span<const Challenge> challenges,
                     const OperatingCondition &ref, const OperatingCondition &test, std::size_t repeats, Rng &rng)
{
    if (repeats == 0)
        throw std::invalid_argument("repeats must be >= 1");
    const ConditionedApuf ref_dev(apuf, ref);
    const ConditionedApuf test_dev(apuf, test);
    BerCount out;
    for (const auto &c : challenges) {
        const auto reference = majority_of(ref_dev.delay_difference(c), ref_dev.noise_sigma(), repeats, rng);
        out.errors += count_mismatches(test_dev.delay_difference(c), test_dev.noise_sigma(), repeats, reference, rng);
        out.trials += repeats;
        ++out.challenges;
    }
    return out;
}

ApufInstance calibrate_noise(const ApufInstance &apuf, double target, double tolerance, Rng &rng,
                             const CalibrationConfig &cfg)
{
    if (target == 0.0)
        return apuf.with_noise_sigma(0.0);
    if (!(target > 0.0 && target < 0.5))
        throw std::invalid_argument("calibration target must lie in (0, 0.5)");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("calibration tolerance must be > 0");
    if (cfg.challenges == 0 || cfg.repeats == 0)
        throw std::invalid_argument("calibration needs challenges and repeats");

    const ConditionedApuf nominal(apuf, apuf.nominal());
    std::vector<double> tdifs(cfg.challenges);
    for (auto &t : tdifs)
        t = nominal.delay_difference(random_challenge(apuf.k(), rng));
    const std::uint64_t seed = draw_seed(rng);

    // Common random numbers: every sigma sees the same challenges and the same unit jitter.
    auto ber = [&](double sigma) {
        Rng noise = substream(seed, 0);
        std::size_t errors = 0;
        for (double t : tdifs) {
            const auto reference = majority_of(t, sigma, cfg.repeats, noise);
            errors += count_mismatches(t, sigma, cfg.repeats, reference, noise);
        }
        return static_cast<double>(errors) / static_cast<double>(tdifs.size() * cfg.repeats);
    };

    double spread = 0.0;
    for (double t : tdifs)
        spread += t * t;
    spread = std::sqrt(spread / static_cast<double>(tdifs.size()));
    if (!(spread > 0.0))
        throw CalibrationError("instance has no delay spread; BER cannot be tuned");

    double lo = 0.0;
    double hi = 0.05 * spread;
    double hi_ber = ber(hi);
    for (int i = 0; hi_ber < target; ++i) {
        if (i == 40)
            throw CalibrationError("could not bracket the target BER");
        lo = hi;
        hi *= 2.0;
        hi_ber = ber(hi);
    }
    if (std::abs(hi_ber - target) <= tolerance)
        return apuf.with_noise_sigma(hi);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double b = ber(mid);
        if (std::abs(b - target) <= tolerance)
            return apuf.with_noise_sigma(mid);
        (b < target ? lo : hi) = mid;
    }
    throw CalibrationError("bisection did not reach the target BER within tolerance");
}

BerCount BerAtDt::pooled() const { return pooled_of(*this); }
std::size_t BerAtDt::worst_index() const { return worst_of(*this); }
BerCount SweepLevel::pooled() const { return pooled_of(*this); }
std::size_t SweepLevel::worst_index() const { return worst_of(*this); }

BerAtDt ber_at_dt(const ApufInstance &apuf, const DelayModel &m, double delta_t, const ConditionGrid &grid,
                  std::size_t n_selected, std::size_t repeats, Rng &rng, std::size_t threads)
{
    if (n_selected == 0 || repeats == 0)
        throw std::invalid_argument("ber_at_dt needs n_selected >= 1 and repeats >= 1");
    if (m.k() != apuf.k())
        throw DimensionError("model and instance stage counts differ");
    grid.validate(apuf);

    const auto batch = generate_reliable(m, delta_t, n_selected, rng, {.max_candidates = 0, .threads = threads});
    const std::uint64_t noise_seed = draw_seed(rng);
    std::vector<Challenge> challenges;
    std::vector<ResponseBit> predicted;
    challenges.reserve(batch.entries.size());
    for (const auto &e : batch.entries) {
        challenges.push_back(e.challenge);
        predicted.push_back(e.predicted);
    }
    const auto outcomes = evaluate_all(apuf, grid, challenges, repeats, noise_seed, threads);

    BerAtDt out;
    out.delta_t = delta_t;
    out.selected = challenges.size();
    out.candidates_examined = batch.candidates_examined;
    out.per_condition.assign(grid.conditions.size(), BerCount{});
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        for (std::size_t j = 0; j < grid.conditions.size(); ++j) {
            out.per_condition[j].errors += outcomes[i].errors[j];
            out.per_condition[j].trials += repeats;
            ++out.per_condition[j].challenges;
        }
        out.prediction_mismatches += outcomes[i].reference != predicted[i];
    }
    out.ones_fraction = randomness(predicted);
    return out;
}

double randomness(std::span<const ResponseBit> bits)
{
    if (bits.empty())
        throw std::invalid_argument("randomness of an empty bit sequence");
    const auto ones = std::count(bits.begin(), bits.end(), ResponseBit::One);
    return static_cast<double>(ones) / static_cast<double>(bits.size());
}

std::vector<double> paper_levels() { return {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}; }

std::vector<double> anchored_delta_grid(double delta_at_anchor)
{
    if (!(delta_at_anchor > 0.0))
        throw std::invalid_argument("anchor threshold must be > 0");
    std::vector<double> out;
    for (double level : paper_levels())
        out.push_back(level * delta_at_anchor / 1.5);
    return out;
}

json to_json(const ReportConfig &cfg)
{
    return json{{"default_challenges", cfg.default_challenges},
                {"candidates", cfg.candidates},
                {"repeats", cfg.repeats}};
}

std::size_t EvalReport::worst_default_index() const
{
    struct View {
        const std::vector<BerCount> &per_condition;
    } view{ber_default};
    return worst_of(view);
}

EvalReport full_report(const ApufInstance &apuf, const DelayModel &m, const std::vector<double> &delta_grid,
                       const ConditionGrid &grid, const ReportConfig &cfg, Rng &rng,
                       const std::vector<double> &labels)
{
    if (m.k() != apuf.k())
        throw DimensionError("model and instance stage counts differ");
    if (delta_grid.empty())
        throw std::invalid_argument("empty threshold grid");
    if (!labels.empty() && labels.size() != delta_grid.size())
        throw std::invalid_argument("threshold labels must match the grid");
    if (cfg.repeats == 0 || cfg.candidates == 0 || cfg.default_challenges == 0)
        throw std::invalid_argument("report sample sizes must be >= 1");
    for (double dt : delta_grid)
        if (!(dt >= 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("thresholds must be finite and >= 0");
    grid.validate(apuf);

    EvalReport report;
    report.grid = grid;
    report.config = cfg;
    report.candidates = cfg.candidates;
    report.noise_sigma = apuf.noise_sigma();
    report.seed = draw_seed(rng);
    Rng local(report.seed);
    const std::uint64_t default_seed = draw_seed(local);
    const std::uint64_t stream_seed = draw_seed(local);
    const std::uint64_t noise_seed = draw_seed(local);

    // Unfiltered BER per condition.
    {
        Rng crng = substream(default_seed, 0);
        std::vector<Challenge> challenges;
        challenges.reserve(cfg.default_challenges);
        for (std::size_t i = 0; i < cfg.default_challenges; ++i)
            challenges.push_back(random_challenge(apuf.k(), crng));
        const auto outcomes = evaluate_all(apuf, grid, challenges, cfg.repeats, substream(default_seed, 1)(),
                                           cfg.threads);
        report.ber_default.assign(grid.conditions.size(), BerCount{});
        for (const auto &o : outcomes)
            for (std::size_t j = 0; j < grid.conditions.size(); ++j) {
                report.ber_default[j].errors += o.errors[j];
                report.ber_default[j].trials += cfg.repeats;
                ++report.ber_default[j].challenges;
            }
    }

    // Nested sweep: one candidate stream, each candidate evaluated once; level j
    // counts the candidates with |t_dif| > delta_j.
    const CandidateStream stream(apuf.k(), stream_seed);
    const std::size_t chunks = (cfg.candidates + CandidateStream::chunk_size - 1) / CandidateStream::chunk_size;
    struct Chunk {
        std::vector<double> tdif;
        std::vector<ChallengeOutcome> outcomes;
    };
    std::vector<Chunk> results(chunks);
    const ConditionedApuf ref(apuf, grid.nominal());
    const auto devices = condition_devices(apuf, grid);
    detail::parallel_for(chunks, cfg.threads, [&](std::size_t j) {
        auto challenges = stream.chunk(j);
        const std::size_t take = std::min(CandidateStream::chunk_size, cfg.candidates - j * CandidateStream::chunk_size);
        challenges.resize(take);
        Rng noise = substream(noise_seed, j);
        auto &res = results[j];
        res.tdif.reserve(take);
        res.outcomes.reserve(take);
        for (const auto &c : challenges) {
            res.tdif.push_back(predict_tdif(m, c));
            res.outcomes.push_back(evaluate_outcome(ref, devices, c, cfg.repeats, noise));
        }
    });

    std::size_t agree = 0;
    for (const auto &res : results)
        for (std::size_t i = 0; i < res.tdif.size(); ++i)
            agree += arbiter(res.tdif[i]) == res.outcomes[i].reference;
    report.model_accuracy = static_cast<double>(agree) / static_cast<double>(cfg.candidates);

    for (std::size_t l = 0; l < delta_grid.size(); ++l) {
        SweepLevel level;
        level.delta_t = delta_grid[l];
        level.label = labels.empty() ? delta_grid[l] : labels[l];
        level.per_condition.assign(grid.conditions.size(), BerCount{});
        std::size_t ones = 0;
        for (const auto &res : results)
            for (std::size_t i = 0; i < res.tdif.size(); ++i) {
                const auto d = select_tdif(res.tdif[i], level.delta_t);
                const auto *s = std::get_if<Selected>(&d);
                if (!s)
                    continue;
                ++level.selected;
                ones += s->predicted == ResponseBit::One;
                level.prediction_mismatches += s->predicted != res.outcomes[i].reference;
                for (std::size_t j = 0; j < grid.conditions.size(); ++j) {
                    level.per_condition[j].errors += res.outcomes[i].errors[j];
                    level.per_condition[j].trials += cfg.repeats;
                    ++level.per_condition[j].challenges;
                }
            }
        level.crp_loss = 1.0 - static_cast<double>(level.selected) / static_cast<double>(cfg.candidates);
        level.ones_fraction = level.selected ? static_cast<double>(ones) / static_cast<double>(level.selected) : 0.0;
        report.sweep.push_back(std::move(level));
    }
    return report;
}

json to_json(const EvalReport &report)
{
    json conds = json::array();
    for (const auto &c : report.grid.conditions)
        conds.push_back(to_json(c));
    json sweep = json::array();
    for (const auto &level : report.sweep) {
        json jl{{"delta_t", level.delta_t},
                {"label", level.label},
                {"crp_loss", level.crp_loss},
                {"selected", level.selected},
                {"ones_fraction", level.ones_fraction},
                {"prediction_mismatches", level.prediction_mismatches},
                {"per_condition", counts_to_json(level.per_condition)}};
        if (level.selected > 0) {
            jl["worst_index"] = level.worst_index();
            jl["worst"] = to_json(level.worst());
            jl["pooled"] = to_json(level.pooled());
        }
        sweep.push_back(std::move(jl));
    }
    json out{{"format", kReportFormat},
             {"version", kReportVersion},
             {"instance", report.instance_label},
             {"seed", report.seed},
             {"noise_sigma_ns", report.noise_sigma},
             {"config", to_json(report.config)},
             {"conditions", std::move(conds)},
             {"nominal_index", report.grid.nominal_index},
             {"ber_default", counts_to_json(report.ber_default)},
             {"model_accuracy", report.model_accuracy},
             {"candidates", report.candidates},
             {"sweep", std::move(sweep)}};
    if (!report.ber_default.empty()) {
        out["worst_default_index"] = report.worst_default_index();
        out["worst_default"] = to_json(report.ber_default[report.worst_default_index()]);
    }
    return out;
}

EvalReport report_from_json(const json &doc)
{
    try {
        if (doc.at("format").get<std::string>() != kReportFormat || doc.at("version").get<int>() != kReportVersion)
            throw SchemaError("not a version 1 evaluation report");
        EvalReport r;
        r.instance_label = doc.at("instance").get<std::string>();
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.noise_sigma = doc.at("noise_sigma_ns").get<double>();
        const auto &cfg = doc.at("config");
        r.config.default_challenges = cfg.at("default_challenges").get<std::size_t>();
        r.config.candidates = cfg.at("candidates").get<std::size_t>();
        r.config.repeats = cfg.at("repeats").get<std::size_t>();
        for (const auto &c : doc.at("conditions"))
            r.grid.conditions.push_back(condition_from_json(c));
        r.grid.nominal_index = doc.at("nominal_index").get<std::size_t>();
        r.ber_default = counts_from_json(doc.at("ber_default"));
        r.model_accuracy = doc.at("model_accuracy").get<double>();
        r.candidates = doc.at("candidates").get<std::size_t>();
        for (const auto &jl : doc.at("sweep")) {
            SweepLevel level;
            level.delta_t = jl.at("delta_t").get<double>();
            level.label = jl.at("label").get<double>();
            level.crp_loss = jl.at("crp_loss").get<double>();
            level.selected = jl.at("selected").get<std::size_t>();
            level.ones_fraction = jl.at("ones_fraction").get<double>();
            level.prediction_mismatches = jl.at("prediction_mismatches").get<std::size_t>();
            level.per_condition = counts_from_json(jl.at("per_condition"));
            r.sweep.push_back(std::move(level));
        }
        return r;
    } catch (const json::exception &e) {
        throw SchemaError(std::string("report document: ") + e.what());
    }
}

std::string table_csv(std::span<const EvalReport> reports)
{
    if (reports.empty())
        throw std::invalid_argument("no reports to tabulate");
    std::ostringstream os;
    os << "instance,ber_default";
    for (const auto &level : reports.front().sweep)
        os << ",ber_at_" << fmt(level.label);
    os << '\n';
    for (std::size_t r = 0; r < reports.size(); ++r) {
        const auto &rep = reports[r];
        if (rep.sweep.size() != reports.front().sweep.size())
            throw std::invalid_argument("reports have different threshold grids");
        os << label_of(rep, r) << ',' << fmt(rep.ber_default.at(rep.worst_default_index()).rate());
        for (const auto &level : rep.sweep)
            os << ',' << (level.selected ? fmt(level.worst().rate()) : std::string("nan"));
        os << '\n';
    }
    return os.str();
}

std::string condition_csv(const EvalReport &report)
{
    std::ostringstream os;
    os << "voltage_V,temperature_C,ber_default,ber_default_upper95";
    for (const auto &level : report.sweep)
        os << ",ber_at_" << fmt(level.label) << ",errors_at_" << fmt(level.label) << ",trials_at_"
           << fmt(level.label);
    os << '\n';
    for (std::size_t j = 0; j < report.grid.conditions.size(); ++j) {
        const auto &c = report.grid.conditions[j];
        const auto &d = report.ber_default.at(j);
        os << fmt(c.voltage) << ',' << fmt(c.temperature) << ',' << fmt(d.rate()) << ','
           << fmt(upper_bound_95(d.errors, d.trials));
        for (const auto &level : report.sweep) {
            const auto &b = level.per_condition.at(j);
            os << ',' << fmt(b.rate()) << ',' << b.errors << ',' << b.trials;
        }
        os << '\n';
    }
    return os.str();
}

std::string ber_by_condition_dat(std::span<const EvalReport> reports)
{
    std::ostringstream os;
    os << "# instance voltage_V temperature_C ber_default\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
        const auto &rep = reports[r];
        for (std::size_t j = 0; j < rep.grid.conditions.size(); ++j)
            os << label_of(rep, r) << ' ' << fmt(rep.grid.conditions[j].voltage) << ' '
               << fmt(rep.grid.conditions[j].temperature) << ' ' << fmt(rep.ber_default.at(j).rate()) << '\n';
        os << "\n\n";
    }
    return os.str();
}

std::string crp_loss_dat(std::span<const EvalReport> reports)
{
    std::ostringstream os;
    os << "# instance level delta_t crp_loss\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
        for (const auto &level : reports[r].sweep)
            os << label_of(reports[r], r) << ' ' << fmt(level.label) << ' ' << fmt(level.delta_t) << ' '
               << fmt(level.crp_loss) << '\n';
        os << "\n\n";
    }
    return os.str();
}

std::string randomness_dat(std::span<const EvalReport> reports)
{
    std::ostringstream os;
    os << "# instance level delta_t ones_fraction selected\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
        for (const auto &level : reports[r].sweep)
            os << label_of(reports[r], r) << ' ' << fmt(level.label) << ' ' << fmt(level.delta_t) << ' '
               << fmt(level.ones_fraction) << ' ' << level.selected << '\n';
        os << "\n\n";
    }
    return os.str();
}

}  // namespace apufsim
