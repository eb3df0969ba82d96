#include "apufsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "apufsim/eval.hpp"
#include "apufsim/synth.hpp"

namespace apufsim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// A named input file is missing or unreadable.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Reads `--config` JSON: top-level keys are global flags, nested objects are per subcommand.
class JsonConfig : public CLI::Config {
  public:
    std::string to_config(const CLI::App *, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream &input) const override
    {
        json doc;
        try {
            doc = json::parse(input);
        } catch (const json::parse_error &e) {
            throw CLI::ConversionError(std::string("config file: ") + e.what());
        }
        if (!doc.is_object())
            throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        flatten(doc, {}, items);
        return items;
    }

  private:
    static std::string scalar(const json &v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

    static void flatten(const json &obj, const std::vector<std::string> &parents, std::vector<CLI::ConfigItem> &out)
    {
        for (const auto &[key, value] : obj.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto &v : value)
                    item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            out.push_back(std::move(item));
        }
    }
};

void require_file(const std::string &path, const char *what)
{
    if (path.empty())
        throw InputError(std::string("missing ") + what + " path");
    if (!fs::is_regular_file(path))
        throw InputError(std::string(what) + " file not found: " + path);
}

std::uint64_t require_seed(const GlobalConfig &g)
{
    if (!g.seed)
        throw InputError("--seed is required for this subcommand");
    return *g.seed;
}

std::string out_or(const GlobalConfig &g, const char *fallback) { return g.out.empty() ? fallback : g.out; }

template <typename Fn>
int guarded(std::ostream &err, Fn &&fn)
{
    try {
        return fn();
    } catch (const InputError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const PartialBatchError &e) {
        err << "error: " << e.what() << '\n';
        return kBudgetError;
    } catch (const CalibrationError &e) {
        err << "error: " << e.what() << '\n';
        return kBudgetError;
    } catch (const SchemaError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const FitError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const NormalizationError &e) {
        err << "error: " << e.what() << '\n';
        return kBudgetError;
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::domain_error &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::logic_error &e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    } catch (const std::runtime_error &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

void write_text(const fs::path &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

json run_record(const char *command, const GlobalConfig &g, json config)
{
    return json{{"command", command}, {"global", to_json(g)}, {"config", std::move(config)}};
}

ConditionGrid grid_by_name(const std::string &name, const OperatingCondition &nominal)
{
    if (name == "wide")
        return ConditionGrid::wide();
    if (name == "narrow")
        return ConditionGrid::narrow();
    if (name == "nominal-only")
        return ConditionGrid::nominal_only(nominal);
    if (name == "voltage")
        return ConditionGrid::voltage_sweep();
    if (name == "temperature")
        return ConditionGrid::temperature_sweep();
    throw std::invalid_argument("unknown condition grid '" + name + "'");
}

std::string percent(double rate)
{
    std::ostringstream os;
    os << std::setprecision(4) << rate * 100.0 << '%';
    return os.str();
}

}  // namespace

json to_json(const GlobalConfig &g)
{
    return json{{"seed", g.seed ? json(*g.seed) : json(nullptr)}, {"out", g.out}};
}

json to_json(const SynthConfig &c)
{
    return json{{"fixture", c.fixture},
                {"random", c.random},
                {"ro_csv", c.ro_csv},
                {"k", c.k},
                {"ro_count", c.ro_count},
                {"fixture_csv", c.fixture_csv},
                {"assignment", c.assignment},
                {"assignment_out", c.assignment_out},
                {"noise_sigma", c.noise_sigma ? json(*c.noise_sigma) : json(nullptr)},
                {"calibrate_ber", c.calibrate_ber ? json(*c.calibrate_ber) : json(nullptr)},
                {"calibrate_tolerance", c.calibrate_tolerance},
                {"ber_challenges", c.ber_challenges}};
}

json to_json(const EnrollConfig &c)
{
    return json{{"instance", c.instance},
                {"n_crps", c.n_crps},
                {"repeats", c.repeats},
                {"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"tolerance", c.tolerance},
                {"heldout", c.heldout},
                {"min_accuracy", c.min_accuracy},
                {"normalize_samples", c.normalize_samples},
                {"train_config", c.train_config}};
}

json to_json(const FilterConfig &c)
{
    return json{{"model", c.model},
                {"delta_t", c.delta_t ? json(*c.delta_t) : json(nullptr)},
                {"target_loss", c.target_loss ? json(*c.target_loss) : json(nullptr)},
                {"count", c.count},
                {"max_candidates", c.max_candidates},
                {"loss_samples", c.loss_samples}};
}

json to_json(const EvalConfig &c)
{
    return json{{"instance", c.instance},
                {"model", c.model},
                {"conditions", c.conditions},
                {"delta_t", c.delta_t},
                {"target_loss", c.target_loss},
                {"candidates", c.candidates},
                {"default_challenges", c.default_challenges},
                {"repeats", c.repeats},
                {"loss_samples", c.loss_samples},
                {"label", c.label}};
}

int cmd_synth(const GlobalConfig &g, const SynthConfig &c, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        const int sources = int(c.fixture) + int(c.random) + int(!c.ro_csv.empty());
        if (sources != 1)
            throw InputError("synth needs exactly one of --fixture, --random or --ro-csv");
        if (!c.assignment.empty())
            require_file(c.assignment, "assignment");
        if (!c.ro_csv.empty())
            require_file(c.ro_csv, "RO dataset");
        Rng rng(require_seed(g));
        const fs::path path = out_or(g, "instance.json");

        std::optional<ApufInstance> apuf;
        if (c.random) {
            apuf = random_instance(c.k, RandomInstanceParams{}, rng);
        } else {
            const auto ro = c.fixture ? generate_ro_fixture(c.ro_count, sweep_conditions(), rng)
                                      : parse_ro_dataset(fs::path(c.ro_csv));
            if (c.fixture && !c.fixture_csv.empty())
                write_ro_dataset(ro, fs::path(c.fixture_csv));
            const auto assign = c.assignment.empty() ? default_assignment(ro.ro_count(), c.k, rng)
                                                     : assignment_from_json(read_json_file(c.assignment));
            if (!c.assignment_out.empty())
                write_json_file(to_json(assign), c.assignment_out);
            apuf = build_synthetic_apuf(ro, c.k, assign);
            out << "ROs: " << ro.ro_count() << " (" << ro.conditions().size() << " conditions)\n";
        }
        if (c.noise_sigma)
            apuf = apuf->with_noise_sigma(*c.noise_sigma);
        if (c.calibrate_ber)
            apuf = calibrate_noise(*apuf, *c.calibrate_ber, c.calibrate_tolerance, rng);

        std::vector<Challenge> challenges;
        for (std::size_t i = 0; i < c.ber_challenges; ++i)
            challenges.push_back(random_challenge(apuf->k(), rng));
        const auto ber = measure_ber(*apuf, challenges, apuf->nominal(), apuf->nominal(), 11, rng);

        save_instance(*apuf, path);
        auto record = run_record("synth", g, to_json(c));
        record["nominal_ber_estimate"] = ber.rate();
        write_json_file(record, path.string() + ".run.json");
        out << "stages: " << apuf->k() << '\n'
            << "noise_sigma_ns: " << apuf->noise_sigma() << '\n'
            << "nominal BER estimate: " << percent(ber.rate()) << " (" << ber.trials << " trials)\n"
            << "wrote " << path.string() << '\n';
        return int(kOk);
    });
}

int cmd_enroll(const GlobalConfig &g, const EnrollConfig &c, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        require_file(c.instance, "instance");
        Rng rng(require_seed(g));
        const auto apuf = load_instance(c.instance);
        TrainConfig cfg;
        cfg.learning_rate = c.learning_rate;
        cfg.max_epochs = c.epochs;
        cfg.tolerance = c.tolerance;
        cfg.heldout_fraction = c.heldout;
        cfg.min_accuracy = c.min_accuracy;

        const auto data = collect_crps(apuf, c.n_crps, apuf.nominal(), c.repeats, rng);
        const auto raw = train(data, cfg);
        const auto model = normalize(raw, c.normalize_samples, rng);
        const fs::path path = out_or(g, "model.json");
        save_model(model, path);
        auto record = run_record("enroll", g, to_json(c));
        record["train_config"] = to_json(cfg);
        write_json_file(record, path.string() + ".run.json");

        const auto &t = model.training();
        out << "CRPs: " << c.n_crps << " x " << c.repeats << " repeats\n"
            << "heldout accuracy: " << percent(t.heldout_accuracy) << '\n'
            << "training time: " << std::fixed << std::setprecision(2) << t.wall_time_s << " s ("
            << t.iterations << " epochs)\n"
            << std::defaultfloat << "wrote " << path.string() << '\n';
        if (!t.warning.empty())
            err << "warning: " << t.warning << '\n';
        return int(kOk);
    });
}

int cmd_filter(const GlobalConfig &g, const FilterConfig &c, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        if (c.delta_t.has_value() == c.target_loss.has_value())
            throw InputError("filter needs exactly one of --delta-t or --target-loss");
        require_file(c.model, "model");
        Rng rng(require_seed(g));
        const auto model = load_model(c.model);
        const double dt = c.delta_t ? *c.delta_t : loss_to_delta(model, *c.target_loss, c.loss_samples, rng);

        const std::string prefix = out_or(g, "batch");
        auto extra = run_record("filter", g, to_json(c));
        extra["resolved_delta_t"] = dt;
        auto emit = [&](const ReliableBatch &batch) {
            write_batch(batch, model.k(), prefix + ".csv", prefix + ".json", extra);
            out << "delta_t: " << dt << '\n'
                << "selected: " << batch.entries.size() << " of " << batch.requested << '\n'
                << "candidates examined: " << batch.candidates_examined << '\n'
                << "wrote " << prefix << ".csv\n";
        };
        try {
            emit(generate_reliable(model, dt, c.count, rng,
                                   {.max_candidates = c.max_candidates, .threads = g.threads}));
        } catch (const PartialBatchError &e) {
            emit(e.batch());
            throw;
        }
        return int(kOk);
    });
}

int cmd_eval(const GlobalConfig &g, const EvalConfig &c, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        require_file(c.instance, "instance");
        require_file(c.model, "model");
        if (!c.delta_t.empty() && !c.target_loss.empty())
            throw InputError("eval takes --delta-t or --target-loss, not both");
        Rng rng(require_seed(g));
        const auto apuf = load_instance(c.instance);
        const auto model = load_model(c.model);
        const auto grid = grid_by_name(c.conditions, apuf.nominal());

        std::vector<double> thresholds;
        std::vector<double> labels;
        if (!c.delta_t.empty()) {
            thresholds = c.delta_t;
        } else if (!c.target_loss.empty()) {
            for (double q : c.target_loss)
                thresholds.push_back(loss_to_delta(model, q, c.loss_samples, rng));
            labels = c.target_loss;
        } else {
            thresholds = anchored_delta_grid(loss_to_delta(model, 0.94, c.loss_samples, rng));
            labels = paper_levels();
        }

        ReportConfig cfg;
        cfg.candidates = c.candidates;
        cfg.default_challenges = c.default_challenges;
        cfg.repeats = c.repeats;
        cfg.threads = g.threads;
        auto report = full_report(apuf, model, thresholds, grid, cfg, rng, labels);
        report.instance_label = c.label.empty() ? fs::path(c.instance).stem().string() : c.label;

        const std::string prefix = out_or(g, "report");
        auto doc = to_json(report);
        doc["run"] = run_record("eval", g, to_json(c));
        write_json_file(doc, prefix + ".json");
        const std::vector<EvalReport> one{report};
        write_text(prefix + ".csv", table_csv(one));
        write_text(prefix + "_conditions.csv", condition_csv(report));

        out << "model accuracy vs nominal reference: " << percent(report.model_accuracy) << '\n'
            << "worst-case BER@Default: " << percent(report.ber_default[report.worst_default_index()].rate()) << " at "
            << to_string(grid.conditions[report.worst_default_index()]) << '\n';
        for (const auto &level : report.sweep) {
            out << "  level " << level.label << "  delta_t " << level.delta_t << "  loss " << percent(level.crp_loss)
                << "  selected " << level.selected;
            if (level.selected)
                out << "  worst BER " << percent(level.worst().rate()) << " (" << level.worst().errors << "/"
                    << level.worst().trials << ", upper95 " << upper_bound_95(level.worst().errors, level.worst().trials)
                    << ")  ones " << level.ones_fraction;
            out << '\n';
        }
        out << "wrote " << prefix << ".json\n";
        return int(kOk);
    });
}

int cmd_report(const GlobalConfig &g, const ReportCommandConfig &c, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        if (c.reports.empty())
            throw InputError("report needs at least one evaluation report");
        std::vector<EvalReport> reports;
        for (const auto &path : c.reports) {
            require_file(path, "report");
            reports.push_back(report_from_json(read_json_file(path)));
        }
        const std::string prefix = out_or(g, "summary");
        const auto table = table_csv(reports);
        write_text(prefix + "_table.csv", table);
        write_text(prefix + "_ber_conditions.dat", ber_by_condition_dat(reports));
        write_text(prefix + "_crp_loss.dat", crp_loss_dat(reports));
        write_text(prefix + "_randomness.dat", randomness_dat(reports));
        out << table << "wrote " << prefix << "_table.csv\n";
        return int(kOk);
    });
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Arbiter PUF simulation, model-based reliable challenge selection and BER evaluation", "apufsim"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file (CLI flags take precedence)");
    app.require_subcommand(1);
    app.fallthrough();

    GlobalConfig g;
    std::uint64_t seed = 0;
    auto *seed_opt = app.add_option("--seed", seed, "Master seed (required by stochastic subcommands)");
    app.add_option("--threads", g.threads, "Worker cap; results do not depend on it")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output path or prefix");

    SynthConfig sc;
    auto *synth = app.add_subcommand("synth", "Build an APUF instance (RO dataset, generated fixture or random)");
    synth->add_flag("--fixture", sc.fixture, "Use a generated RO fixture");
    synth->add_flag("--random", sc.random, "Draw stage delays directly");
    synth->add_option("--ro-csv", sc.ro_csv, "RO frequency CSV");
    synth->add_option("--k", sc.k, "Stage count")->check(CLI::PositiveNumber);
    synth->add_option("--ro-count", sc.ro_count, "ROs in the generated fixture")->check(CLI::Range(4, 1 << 20));
    synth->add_option("--fixture-csv", sc.fixture_csv, "Also write the generated fixture as CSV");
    synth->add_option("--assignment", sc.assignment, "Stage assignment JSON");
    synth->add_option("--assignment-out", sc.assignment_out, "Write the stage assignment used");
    synth->add_option("--noise-sigma", sc.noise_sigma, "Override noise sigma (ns)")->check(CLI::NonNegativeNumber);
    synth->add_option("--calibrate-ber", sc.calibrate_ber, "Calibrate noise to this nominal BER")
        ->check(CLI::Range(0.0, 0.5));
    synth->add_option("--calibrate-tolerance", sc.calibrate_tolerance, "Calibration tolerance")
        ->check(CLI::PositiveNumber);
    synth->add_option("--ber-challenges", sc.ber_challenges, "Challenges for the nominal BER estimate")
        ->check(CLI::PositiveNumber);

    EnrollConfig ec;
    std::string train_config;
    auto *enroll = app.add_subcommand("enroll", "Collect CRPs, train and normalize a delay model");
    enroll->add_option("--instance", ec.instance, "Instance JSON")->required();
    auto *o_ncrps = enroll->add_option("--n-crps", ec.n_crps, "CRPs to collect")->check(CLI::PositiveNumber);
    auto *o_repeats = enroll->add_option("--repeats", ec.repeats, "Evaluations per CRP")->check(CLI::PositiveNumber);
    auto *o_lr = enroll->add_option("--learning-rate", ec.learning_rate, "Gradient step")->check(CLI::PositiveNumber);
    auto *o_epochs = enroll->add_option("--epochs", ec.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    auto *o_tol = enroll->add_option("--tolerance", ec.tolerance, "Loss plateau tolerance");
    auto *o_held = enroll->add_option("--heldout", ec.heldout, "Heldout fraction")->check(CLI::Range(0.0, 0.99));
    auto *o_minacc = enroll->add_option("--min-accuracy", ec.min_accuracy, "Warn below this heldout accuracy");
    enroll->add_option("--normalize-samples", ec.normalize_samples, "Challenges used by normalize")
        ->check(CLI::Range(1000, 100'000'000));
    enroll->add_option("--train-config", train_config, "TrainConfig JSON (flags take precedence)");
    (void)o_ncrps;
    (void)o_repeats;

    FilterConfig fc;
    auto *filter = app.add_subcommand("filter", "Generate a batch of reliable challenges");
    filter->add_option("--model", fc.model, "Model JSON")->required();
    auto *o_dt = filter->add_option("--delta-t", fc.delta_t, "Threshold in normalized units")
                     ->check(CLI::NonNegativeNumber);
    auto *o_tl = filter->add_option("--target-loss", fc.target_loss, "Resolve the threshold from a CRP-loss quantile")
                     ->check(CLI::Range(0.0, 0.999999));
    o_dt->excludes(o_tl);
    filter->add_option("--count", fc.count, "Reliable challenges wanted")->check(CLI::PositiveNumber);
    filter->add_option("--max-candidates", fc.max_candidates, "Candidate budget (0 = automatic)");
    filter->add_option("--loss-samples", fc.loss_samples, "Samples for the loss quantile")
        ->check(CLI::Range(1000, 100'000'000));

    EvalConfig vc;
    auto *eval = app.add_subcommand("eval", "BER@Default, BER@delta_t sweep, CRP loss and randomness");
    eval->add_option("--instance", vc.instance, "Instance JSON")->required();
    eval->add_option("--model", vc.model, "Model JSON")->required();
    eval->add_option("--conditions", vc.conditions, "Grid: wide, narrow, nominal-only, voltage, temperature")
        ->check(CLI::IsMember({"wide", "narrow", "nominal-only", "voltage", "temperature"}));
    auto *o_edt = eval->add_option("--delta-t", vc.delta_t, "Threshold list (normalized units)");
    auto *o_etl = eval->add_option("--target-loss", vc.target_loss, "Threshold list as CRP-loss quantiles");
    o_edt->excludes(o_etl);
    eval->add_option("--candidates", vc.candidates, "Candidate stream length")->check(CLI::PositiveNumber);
    eval->add_option("--default-challenges", vc.default_challenges, "Challenges for BER@Default")
        ->check(CLI::PositiveNumber);
    eval->add_option("--repeats", vc.repeats, "Evaluations per challenge and condition")->check(CLI::PositiveNumber);
    eval->add_option("--loss-samples", vc.loss_samples, "Samples for loss quantiles")
        ->check(CLI::Range(1000, 100'000'000));
    eval->add_option("--label", vc.label, "Instance label in tables");

    ReportCommandConfig rc;
    auto *report = app.add_subcommand("report", "Tabulate evaluation reports (rows = instances)");
    report->add_option("reports", rc.reports, "Report JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::FileError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    if (seed_opt->count() > 0)
        g.seed = seed;

    if (*synth)
        return cmd_synth(g, sc, out, err);
    if (*enroll) {
        ec.train_config = train_config;
        if (!train_config.empty()) {
            const int rc_code = guarded(err, [&] {
                require_file(train_config, "train config");
                const auto tc = train_config_from_json(read_json_file(train_config));
                if (o_lr->count() == 0)
                    ec.learning_rate = tc.learning_rate;
                if (o_epochs->count() == 0)
                    ec.epochs = tc.max_epochs;
                if (o_tol->count() == 0)
                    ec.tolerance = tc.tolerance;
                if (o_held->count() == 0)
                    ec.heldout = tc.heldout_fraction;
                if (o_minacc->count() == 0)
                    ec.min_accuracy = tc.min_accuracy;
                return int(kOk);
            });
            if (rc_code != kOk)
                return rc_code;
        }
        return cmd_enroll(g, ec, out, err);
    }
    if (*filter)
        return cmd_filter(g, fc, out, err);
    if (*eval)
        return cmd_eval(g, vc, out, err);
    return cmd_report(g, rc, out, err);
}

}  // namespace apufsim::cli
