#include "apufsim/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace apufsim {

using nlohmann::json;

namespace {

constexpr int kInstanceVersion = 1;
constexpr const char *kInstanceFormat = "apufsim.instance";

int hex_value(char ch)
{
    if (ch >= '0' && ch <= '9')
        return ch - '0';
    if (ch >= 'a' && ch <= 'f')
        return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F')
        return ch - 'A' + 10;
    return -1;
}

void require_same_length(std::size_t k, const Challenge &c)
{
    if (c.size() != k)
        throw DimensionError("challenge has " + std::to_string(c.size()) + " bits, APUF has " +
                             std::to_string(k) + " stages");
}

}  // namespace

Challenge::Challenge(std::vector<std::uint8_t> bits) : bits_(std::move(bits))
{
    for (auto b : bits_)
        if (b > 1)
            throw std::invalid_argument("challenge bits must be 0 or 1");
}

std::string Challenge::to_hex() const
{
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t ndigits = (bits_.size() + 3) / 4;
    const std::size_t pad = ndigits * 4 - bits_.size();
    std::string out(ndigits, '0');
    for (std::size_t d = 0; d < ndigits; ++d) {
        int v = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t pos = d * 4 + j;
            const int bit = pos < pad ? 0 : bits_[pos - pad];
            v = (v << 1) | bit;
        }
        out[d] = digits[v];
    }
    return out;
}

Challenge Challenge::from_hex(std::string_view hex, std::size_t k)
{
    const std::size_t ndigits = (k + 3) / 4;
    if (hex.size() != ndigits)
        throw DimensionError("hex challenge '" + std::string(hex) + "' does not encode " + std::to_string(k) +
                             " bits");
    const std::size_t pad = ndigits * 4 - k;
    std::vector<std::uint8_t> bits(k);
    for (std::size_t d = 0; d < ndigits; ++d) {
        const int v = hex_value(hex[d]);
        if (v < 0)
            throw std::invalid_argument("invalid hex digit in challenge '" + std::string(hex) + "'");
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t pos = d * 4 + j;
            const auto bit = static_cast<std::uint8_t>((v >> (3 - j)) & 1);
            if (pos < pad) {
                if (bit)
                    throw DimensionError("hex challenge '" + std::string(hex) + "' has bits beyond k");
            } else {
                bits[pos - pad] = bit;
            }
        }
    }
    return Challenge(std::move(bits));
}

std::string to_string(const OperatingCondition &cond)
{
    std::ostringstream os;
    os << cond.voltage << "V/" << cond.temperature << "C";
    return os.str();
}

bool Envelope::contains(const OperatingCondition &cond) const noexcept
{
    return cond.voltage >= voltage_min && cond.voltage <= voltage_max && cond.temperature >= temperature_min &&
           cond.temperature <= temperature_max;
}

ApufInstance::ApufInstance(std::vector<StageDelays> stages, OperatingCondition nominal, double noise_sigma,
                           Envelope envelope)
    : stages_(std::move(stages)), nominal_(nominal), noise_sigma_(noise_sigma), envelope_(envelope)
{
    if (stages_.empty())
        throw std::invalid_argument("an APUF needs at least one stage");
    if (!(noise_sigma_ >= 0.0) || !std::isfinite(noise_sigma_))
        throw std::invalid_argument("noise_sigma must be finite and >= 0");
    if (envelope_.voltage_min > envelope_.voltage_max || envelope_.temperature_min > envelope_.temperature_max)
        throw std::invalid_argument("empty operating envelope");
    if (!envelope_.contains(nominal_))
        throw EnvelopeError("nominal condition " + to_string(nominal_) + " outside the envelope");

    // Effective delays are affine in (V, T), so positivity at the four corners covers the box.
    const std::array<double, 2> dvs{envelope_.voltage_min - nominal_.voltage,
                                    envelope_.voltage_max - nominal_.voltage};
    const std::array<double, 2> dts{envelope_.temperature_min - nominal_.temperature,
                                    envelope_.temperature_max - nominal_.temperature};
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const auto &s = stages_[i];
        for (const Segment *seg : {&s.t13, &s.t14, &s.t23, &s.t24}) {
            if (!(seg->base > 0.0) || !std::isfinite(seg->base) || !std::isfinite(seg->temp_coeff) ||
                !std::isfinite(seg->volt_coeff))
                throw std::invalid_argument("stage " + std::to_string(i) + ": base delays must be finite and > 0");
            for (double dv : dvs)
                for (double dt : dts)
                    if (!(seg->at(dv, dt) > 0.0))
                        throw std::invalid_argument("stage " + std::to_string(i) +
                                                    ": effective delay not positive over the envelope");
        }
    }
}

ApufInstance ApufInstance::with_noise_sigma(double sigma) const
{
    return ApufInstance(stages_, nominal_, sigma, envelope_);
}

void ApufInstance::check_condition(const OperatingCondition &cond) const
{
    if (!envelope_.contains(cond))
        throw EnvelopeError("operating condition " + to_string(cond) + " outside the envelope");
}

EffectiveDelays effective_stage_delays(const StageDelays &stage, const OperatingCondition &cond,
                                       const OperatingCondition &nominal)
{
    const double dv = cond.voltage - nominal.voltage;
    const double dt = cond.temperature - nominal.temperature;
    return {stage.t13.at(dv, dt), stage.t14.at(dv, dt), stage.t23.at(dv, dt), stage.t24.at(dv, dt)};
}

EffectiveDelays effective_stage_delays(const StageDelays &stage, const OperatingCondition &cond,
                                       const OperatingCondition &nominal, const Envelope &envelope)
{
    if (!envelope.contains(cond))
        throw EnvelopeError("operating condition " + to_string(cond) + " outside the envelope");
    return effective_stage_delays(stage, cond, nominal);
}

ConditionedApuf::ConditionedApuf(const ApufInstance &apuf, const OperatingCondition &cond)
    : cond_(cond), noise_sigma_(apuf.noise_sigma())
{
    apuf.check_condition(cond);
    delays_.reserve(apuf.k());
    for (const auto &stage : apuf.stages())
        delays_.push_back(effective_stage_delays(stage, cond, apuf.nominal()));
}

PathDelays ConditionedApuf::path_delays(const Challenge &c) const
{
    require_same_length(k(), c);
    double top = 0.0;
    double bottom = 0.0;
    for (std::size_t i = 0; i < delays_.size(); ++i) {
        const auto &d = delays_[i];
        if (c[i]) {
            top += d.t13;
            bottom += d.t24;
        } else {
            const double new_top = bottom + d.t23;
            bottom = top + d.t14;
            top = new_top;
        }
    }
    return {top, bottom};
}

double ConditionedApuf::delay_difference(const Challenge &c) const
{
    const auto p = path_delays(c);
    return p.top - p.bottom;
}

ResponseBit ConditionedApuf::evaluate(const Challenge &c, Rng &rng) const
{
    return noisy_arbiter(delay_difference(c), noise_sigma_, rng);
}

PathDelays path_delays(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond)
{
    require_same_length(apuf.k(), c);
    return ConditionedApuf(apuf, cond).path_delays(c);
}

double delay_difference(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond)
{
    const auto p = path_delays(apuf, c, cond);
    return p.top - p.bottom;
}

ResponseBit evaluate(const ApufInstance &apuf, const Challenge &c, const OperatingCondition &cond, Rng &rng)
{
    return noisy_arbiter(delay_difference(apuf, c, cond), apuf.noise_sigma(), rng);
}

ResponseBit noisy_arbiter(double tdif, double sigma, Rng &rng)
{
    if (sigma > 0.0) {
        std::normal_distribution<double> jitter(0.0, sigma);
        const double top = jitter(rng);
        const double bottom = jitter(rng);
        tdif += top - bottom;
    }
    return arbiter(tdif);
}

Challenge random_challenge(std::size_t k, Rng &rng)
{
    if (k == 0)
        throw std::invalid_argument("stage count must be >= 1");
    std::vector<std::uint8_t> bits(k);
    std::size_t i = 0;
    while (i < k) {
        auto word = rng();
        for (int b = 0; b < 64 && i < k; ++b, ++i) {
            bits[i] = static_cast<std::uint8_t>(word & 1u);
            word >>= 1;
        }
    }
    return Challenge(std::move(bits));
}

ApufInstance random_instance(std::size_t k, const RandomInstanceParams &params, Rng &rng)
{
    if (k == 0)
        throw std::invalid_argument("stage count must be >= 1");
    std::normal_distribution<double> delay(params.delay_mean, params.delay_sd);
    std::normal_distribution<double> tc(params.temp_coeff_mean, params.temp_coeff_sd);
    std::normal_distribution<double> vc(params.volt_coeff_mean, params.volt_coeff_sd);
    auto draw_segment = [&] {
        Segment s;
        do {
            s.base = delay(rng);
        } while (!(s.base > 0.0));
        s.temp_coeff = tc(rng);
        s.volt_coeff = vc(rng);
        return s;
    };
    std::vector<StageDelays> stages(k);
    for (auto &st : stages) {
        st.t13 = draw_segment();
        st.t14 = draw_segment();
        st.t23 = draw_segment();
        st.t24 = draw_segment();
    }
    return ApufInstance(std::move(stages), params.nominal, params.noise_sigma, params.envelope);
}

json to_json(const OperatingCondition &cond)
{
    return json{{"voltage_V", cond.voltage}, {"temperature_C", cond.temperature}};
}

OperatingCondition condition_from_json(const json &doc)
{
    try {
        return {doc.at("voltage_V").get<double>(), doc.at("temperature_C").get<double>()};
    } catch (const json::exception &e) {
        throw SchemaError(std::string("operating condition: ") + e.what());
    }
}

json to_json(const ApufInstance &apuf)
{
    json stages = json::array();
    for (const auto &s : apuf.stages()) {
        json js;
        auto put = [&js](const char *name, const Segment &seg) {
            const std::string n(name);
            js["t" + n] = seg.base;
            js["tc" + n] = seg.temp_coeff;
            js["vc" + n] = seg.volt_coeff;
        };
        put("13", s.t13);
        put("14", s.t14);
        put("23", s.t23);
        put("24", s.t24);
        stages.push_back(std::move(js));
    }
    const auto &env = apuf.envelope();
    return json{{"format", kInstanceFormat},
                {"version", kInstanceVersion},
                {"k", apuf.k()},
                {"nominal", to_json(apuf.nominal())},
                {"envelope",
                 {{"voltage_V", {env.voltage_min, env.voltage_max}},
                  {"temperature_C", {env.temperature_min, env.temperature_max}}}},
                {"noise_sigma_ns", apuf.noise_sigma()},
                {"stages", std::move(stages)}};
}

ApufInstance instance_from_json(const json &doc)
{
    try {
        if (doc.at("format").get<std::string>() != kInstanceFormat)
            throw SchemaError("not an APUF instance document");
        if (doc.at("version").get<int>() != kInstanceVersion)
            throw SchemaError("unsupported instance version " + doc.at("version").dump());
        std::vector<StageDelays> stages;
        for (const auto &js : doc.at("stages")) {
            auto get = [&js](const char *name) {
                const std::string n(name);
                return Segment{js.at("t" + n).get<double>(), js.at("tc" + n).get<double>(),
                               js.at("vc" + n).get<double>()};
            };
            stages.push_back({get("13"), get("14"), get("23"), get("24")});
        }
        if (doc.at("k").get<std::size_t>() != stages.size())
            throw SchemaError("instance k disagrees with the stage array length");
        const auto &env = doc.at("envelope");
        Envelope envelope{env.at("voltage_V").at(0).get<double>(), env.at("voltage_V").at(1).get<double>(),
                          env.at("temperature_C").at(0).get<double>(), env.at("temperature_C").at(1).get<double>()};
        return ApufInstance(std::move(stages), condition_from_json(doc.at("nominal")),
                            doc.at("noise_sigma_ns").get<double>(), envelope);
    } catch (const json::exception &e) {
        throw SchemaError(std::string("instance document: ") + e.what());
    }
}

json read_json_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_json_file(const json &doc, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

void save_instance(const ApufInstance &apuf, const std::filesystem::path &path)
{
    write_json_file(to_json(apuf), path);
}

ApufInstance load_instance(const std::filesystem::path &path) { return instance_from_json(read_json_file(path)); }

}  // namespace apufsim
