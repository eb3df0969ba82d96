#include "apufsim/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>
#include <tuple>

namespace apufsim {

using nlohmann::json;

namespace {

constexpr double kConditionTol = 1e-9;
constexpr std::array<std::string_view, 5> kColumns{"ro_id", "voltage_V", "temperature_C", "sample_idx",
                                                   "frequency_MHz"};

bool same_condition(const OperatingCondition &a, const OperatingCondition &b)
{
    return std::abs(a.voltage - b.voltage) < kConditionTol && std::abs(a.temperature - b.temperature) < kConditionTol;
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    for (auto &f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t'))
            f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
            f.remove_suffix(1);
    }
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view field)
{
    T value{};
    const auto *end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty())
        return std::nullopt;
    return value;
}

void append_number(std::string &out, double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

double mean_delay_ns(const std::vector<double> &freqs_mhz)
{
    double sum = 0.0;
    for (double f : freqs_mhz)
        sum += 1000.0 / f;
    return sum / static_cast<double>(freqs_mhz.size());
}

double delay_variance(const std::vector<double> &freqs_mhz)
{
    if (freqs_mhz.size() < 2)
        return 0.0;
    const double m = mean_delay_ns(freqs_mhz);
    double ss = 0.0;
    for (double f : freqs_mhz) {
        const double d = 1000.0 / f - m;
        ss += d * d;
    }
    return ss / static_cast<double>(freqs_mhz.size() - 1);
}

/// Least-squares slope of a line constrained through (x0, y0).
double anchored_slope(double x0, double y0, const std::vector<std::pair<double, double>> &points)
{
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto &[x, y] : points) {
        sxy += (x - x0) * (y - y0);
        sxx += (x - x0) * (x - x0);
    }
    return sxy / sxx;
}

}  // namespace

RoMeasurementSet::RoMeasurementSet(std::size_t ro_count, std::vector<OperatingCondition> conditions,
                                   std::vector<std::vector<double>> cells)
    : ro_count_(ro_count), conditions_(std::move(conditions)), cells_(std::move(cells))
{
    if (ro_count_ == 0 || conditions_.empty())
        throw SchemaError("RO dataset must contain at least one RO and one condition");
    if (cells_.size() != ro_count_ * conditions_.size())
        throw SchemaError("RO dataset cell count does not match ro_count x conditions");
    for (std::size_t ro = 0; ro < ro_count_; ++ro)
        for (std::size_t j = 0; j < conditions_.size(); ++j) {
            const auto &cell = cells_[ro * conditions_.size() + j];
            if (cell.empty())
                throw SchemaError("RO " + std::to_string(ro) + " has no samples at " + to_string(conditions_[j]));
            for (double f : cell)
                if (!(f > 0.0) || !std::isfinite(f))
                    throw SchemaError("RO " + std::to_string(ro) + " has a non-positive frequency at " +
                                      to_string(conditions_[j]));
        }
}

std::size_t RoMeasurementSet::find_condition(const OperatingCondition &cond) const noexcept
{
    for (std::size_t j = 0; j < conditions_.size(); ++j)
        if (same_condition(conditions_[j], cond))
            return j;
    return npos;
}

void StageAssignment::validate(std::size_t ro_count) const
{
    if (stages.empty())
        throw std::invalid_argument("stage assignment is empty");
    if (stages.size() * 4 > ro_count)
        throw std::invalid_argument(std::to_string(stages.size()) + " stages need " +
                                    std::to_string(stages.size() * 4) + " ROs, only " + std::to_string(ro_count) +
                                    " available");
    std::set<std::size_t> seen;
    for (const auto &quad : stages)
        for (auto idx : quad) {
            if (idx >= ro_count)
                throw std::invalid_argument("RO index " + std::to_string(idx) + " out of range");
            if (!seen.insert(idx).second)
                throw std::invalid_argument("RO index " + std::to_string(idx) + " assigned twice");
        }
}

json to_json(const StageAssignment &assign)
{
    json out = json::array();
    for (const auto &quad : assign.stages)
        out.push_back(quad);
    return out;
}

StageAssignment assignment_from_json(const json &doc)
{
    try {
        StageAssignment a;
        for (const auto &quad : doc)
            a.stages.push_back(quad.get<std::array<std::size_t, 4>>());
        return a;
    } catch (const json::exception &e) {
        throw SchemaError(std::string("stage assignment: ") + e.what());
    }
}

RoMeasurementSet parse_ro_dataset(std::istream &in)
{
    std::string line;
    std::size_t lineno = 0;
    std::array<std::size_t, kColumns.size()> column{};
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto fields = split_commas(line);
        for (std::size_t c = 0; c < kColumns.size(); ++c) {
            const auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
            if (it == fields.end())
                throw SchemaError("RO dataset header lacks column '" + std::string(kColumns[c]) + "'");
            column[c] = static_cast<std::size_t>(it - fields.begin());
        }
        have_header = true;
    }
    if (!have_header)
        throw SchemaError("RO dataset is empty");
    const std::size_t width = *std::max_element(column.begin(), column.end()) + 1;

    using Key = std::tuple<std::size_t, double, double>;  // ro, temperature, voltage
    std::map<Key, std::map<std::size_t, double>> cells;
    std::size_t max_ro = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto fields = split_commas(line);
        if (fields.size() < width)
            throw ParseError(lineno, "expected " + std::to_string(width) + " fields, found " +
                                         std::to_string(fields.size()));
        const auto ro = parse_number<std::size_t>(fields[column[0]]);
        const auto volt = parse_number<double>(fields[column[1]]);
        const auto temp = parse_number<double>(fields[column[2]]);
        const auto sample = parse_number<std::size_t>(fields[column[3]]);
        const auto freq = parse_number<double>(fields[column[4]]);
        if (!ro || !volt || !temp || !sample || !freq)
            throw ParseError(lineno, "malformed number in '" + line + "'");
        if (!std::isfinite(*volt) || !std::isfinite(*temp))
            throw ParseError(lineno, "non-finite operating condition");
        if (!(*freq > 0.0) || !std::isfinite(*freq))
            throw ParseError(lineno, "frequency of RO " + std::to_string(*ro) + " at " +
                                         to_string({*volt, *temp}) + " sample " + std::to_string(*sample) +
                                         " must be positive and finite");
        auto &cell = cells[Key{*ro, *temp, *volt}];
        if (!cell.emplace(*sample, *freq).second)
            throw ParseError(lineno, "duplicate sample " + std::to_string(*sample) + " for RO " +
                                         std::to_string(*ro) + " at " + to_string({*volt, *temp}));
        max_ro = std::max(max_ro, *ro);
    }
    if (cells.empty())
        throw SchemaError("RO dataset has a header but no measurements");

    std::set<std::pair<double, double>> cond_set;  // (temperature, voltage)
    for (const auto &[key, _] : cells)
        cond_set.emplace(std::get<1>(key), std::get<2>(key));
    std::vector<OperatingCondition> conditions;
    for (const auto &[t, v] : cond_set)
        conditions.push_back({v, t});

    const std::size_t ro_count = max_ro + 1;
    std::vector<std::vector<double>> flat(ro_count * conditions.size());
    for (std::size_t ro = 0; ro < ro_count; ++ro)
        for (std::size_t j = 0; j < conditions.size(); ++j) {
            const auto it = cells.find(Key{ro, conditions[j].temperature, conditions[j].voltage});
            if (it == cells.end())
                throw SchemaError("RO " + std::to_string(ro) + " has no samples at " + to_string(conditions[j]));
            auto &dst = flat[ro * conditions.size() + j];
            for (const auto &[_, f] : it->second)
                dst.push_back(f);
        }
    return RoMeasurementSet(ro_count, std::move(conditions), std::move(flat));
}

RoMeasurementSet parse_ro_dataset(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open RO dataset " + path.string());
    return parse_ro_dataset(in);
}

void write_ro_dataset(const RoMeasurementSet &ro, std::ostream &out)
{
    std::string buf = "ro_id,voltage_V,temperature_C,sample_idx,frequency_MHz\n";
    for (std::size_t r = 0; r < ro.ro_count(); ++r)
        for (std::size_t j = 0; j < ro.conditions().size(); ++j) {
            const auto &cond = ro.conditions()[j];
            const auto &cell = ro.samples(r, j);
            for (std::size_t s = 0; s < cell.size(); ++s) {
                buf += std::to_string(r);
                buf += ',';
                append_number(buf, cond.voltage);
                buf += ',';
                append_number(buf, cond.temperature);
                buf += ',';
                buf += std::to_string(s);
                buf += ',';
                append_number(buf, cell[s]);
                buf += '\n';
            }
        }
    out << buf;
}

void write_ro_dataset(const RoMeasurementSet &ro, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    write_ro_dataset(ro, out);
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

std::vector<OperatingCondition> sweep_conditions()
{
    return {{0.96, 25.0}, {1.08, 25.0}, {1.20, 25.0}, {1.32, 25.0}, {1.44, 25.0},
            {1.20, 35.0}, {1.20, 45.0}, {1.20, 55.0}, {1.20, 65.0}};
}

ApufInstance build_synthetic_apuf(const RoMeasurementSet &ro, std::size_t k, const StageAssignment &assign,
                                  const SynthOptions &opts)
{
    if (assign.k() != k)
        throw std::invalid_argument("assignment covers " + std::to_string(assign.k()) + " stages, expected " +
                                    std::to_string(k));
    assign.validate(ro.ro_count());

    const auto &conds = ro.conditions();
    const std::size_t nominal = ro.find_condition(opts.nominal);
    if (nominal == RoMeasurementSet::npos)
        throw SchemaError("RO dataset has no measurements at the nominal condition " + to_string(opts.nominal));

    std::vector<std::size_t> volt_sweep;
    std::vector<std::size_t> temp_sweep;
    for (std::size_t j = 0; j < conds.size(); ++j) {
        if (j == nominal)
            continue;
        if (std::abs(conds[j].temperature - opts.nominal.temperature) < kConditionTol)
            volt_sweep.push_back(j);
        else if (std::abs(conds[j].voltage - opts.nominal.voltage) < kConditionTol)
            temp_sweep.push_back(j);
    }
    if (volt_sweep.empty())
        throw FitError("voltage sweep has fewer than 2 points");
    if (temp_sweep.empty())
        throw FitError("temperature sweep has fewer than 2 points");

    auto fit_segment = [&](std::size_t idx) {
        const double base = mean_delay_ns(ro.samples(idx, nominal));
        std::vector<std::pair<double, double>> vpts;
        std::vector<std::pair<double, double>> tpts;
        for (auto j : volt_sweep)
            vpts.emplace_back(conds[j].voltage, mean_delay_ns(ro.samples(idx, j)));
        for (auto j : temp_sweep)
            tpts.emplace_back(conds[j].temperature, mean_delay_ns(ro.samples(idx, j)));
        return Segment{base, anchored_slope(opts.nominal.temperature, base, tpts),
                       anchored_slope(opts.nominal.voltage, base, vpts)};
    };

    std::vector<StageDelays> stages;
    stages.reserve(k);
    double var_sum = 0.0;
    for (const auto &q : assign.stages) {
        // Assignment order is (t13, t24, t14, t23).
        stages.push_back({.t13 = fit_segment(q[0]), .t14 = fit_segment(q[2]), .t23 = fit_segment(q[3]),
                          .t24 = fit_segment(q[1])});
        for (auto idx : q)
            var_sum += delay_variance(ro.samples(idx, nominal));
    }
    const double rms_sd = std::sqrt(var_sum / static_cast<double>(4 * k));
    const double noise_sigma = rms_sd * std::sqrt(static_cast<double>(k) / 2.0);

    Envelope env{conds.front().voltage, conds.front().voltage, conds.front().temperature, conds.front().temperature};
    for (const auto &c : conds) {
        env.voltage_min = std::min(env.voltage_min, c.voltage);
        env.voltage_max = std::max(env.voltage_max, c.voltage);
        env.temperature_min = std::min(env.temperature_min, c.temperature);
        env.temperature_max = std::max(env.temperature_max, c.temperature);
    }
    return ApufInstance(std::move(stages), opts.nominal, noise_sigma, env);
}

StageAssignment default_assignment(std::size_t ro_count, std::size_t k, Rng &rng)
{
    if (k == 0)
        throw std::invalid_argument("stage count must be >= 1");
    if (4 * k > ro_count)
        throw std::invalid_argument(std::to_string(k) + " stages need " + std::to_string(4 * k) + " ROs, only " +
                                    std::to_string(ro_count) + " available");
    std::vector<std::size_t> perm(ro_count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    StageAssignment a;
    a.stages.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        a.stages[i] = {perm[4 * i], perm[4 * i + 1], perm[4 * i + 2], perm[4 * i + 3]};
    return a;
}

RoMeasurementSet generate_ro_fixture(std::size_t ro_count, const std::vector<OperatingCondition> &conditions,
                                     Rng &rng, const FixtureParams &params)
{
    if (ro_count < 4)
        throw std::invalid_argument("a fixture needs at least 4 ROs");
    if (conditions.empty() || params.samples == 0)
        throw std::invalid_argument("a fixture needs at least one condition and one sample");
    std::normal_distribution<double> freq(params.freq_mean, params.freq_sd);
    std::normal_distribution<double> vc(params.delay_volt_coeff_mean, params.delay_volt_coeff_sd);
    std::normal_distribution<double> tc(params.delay_temp_coeff_mean, params.delay_temp_coeff_sd);
    std::normal_distribution<double> jitter(0.0, 1.0);

    std::vector<std::vector<double>> cells(ro_count * conditions.size());
    for (std::size_t r = 0; r < ro_count; ++r) {
        double f0 = 0.0;
        do {
            f0 = freq(rng);
        } while (!(f0 > 0.0));
        const double base = 1000.0 / f0;
        const double volt_coeff = vc(rng);
        const double temp_coeff = tc(rng);
        for (std::size_t j = 0; j < conditions.size(); ++j) {
            const double delay = base + volt_coeff * (conditions[j].voltage - params.nominal.voltage) +
                                 temp_coeff * (conditions[j].temperature - params.nominal.temperature);
            if (!(delay > 0.0))
                throw std::invalid_argument("fixture drift makes an RO delay non-positive");
            const double f_mean = 1000.0 / delay;
            auto &cell = cells[r * conditions.size() + j];
            cell.reserve(params.samples);
            for (std::size_t s = 0; s < params.samples; ++s) {
                double f = 0.0;
                do {
                    f = f_mean + params.jitter_sd * jitter(rng);
                } while (!(f > 0.0));
                cell.push_back(f);
            }
        }
    }
    // Keep the conditions ordered the way the parser returns them.
    std::vector<std::size_t> order(conditions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(conditions[a].temperature, conditions[a].voltage) <
               std::pair(conditions[b].temperature, conditions[b].voltage);
    });
    std::vector<OperatingCondition> sorted;
    std::vector<std::vector<double>> sorted_cells(cells.size());
    for (auto j : order)
        sorted.push_back(conditions[j]);
    for (std::size_t r = 0; r < ro_count; ++r)
        for (std::size_t jj = 0; jj < order.size(); ++jj)
            sorted_cells[r * order.size() + jj] = std::move(cells[r * conditions.size() + order[jj]]);
    return RoMeasurementSet(ro_count, std::move(sorted), std::move(sorted_cells));
}

}  // namespace apufsim
