#include "apufsim/filter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "parallel.hpp"

namespace apufsim {

using nlohmann::json;

namespace {

constexpr const char *kBatchFormat = "apufsim.batch";
constexpr int kBatchVersion = 1;
constexpr std::uint64_t kLossEstimateStream = 0xffff'ffff'ffff'0001ULL;

void require_threshold(double delta_t)
{
    if (!(delta_t >= 0.0) || !std::isfinite(delta_t))
        throw std::invalid_argument("delta_t must be finite and >= 0");
}

std::vector<double> sample_abs_tdif(const DelayModel &m, std::size_t sample_size, Rng &rng)
{
    if (sample_size < 1000)
        throw std::invalid_argument("CRP-loss estimates need sample_size >= 1000");
    std::vector<double> out(sample_size);
    for (auto &v : out)
        v = std::abs(predict_tdif(m, random_challenge(m.k(), rng)));
    return out;
}

}  // namespace

FilterDecision select_tdif(double tdif, double delta_t)
{
    require_threshold(delta_t);
    if (tdif > delta_t)
        return Selected{ResponseBit::Zero, tdif};
    if (tdif < -delta_t)
        return Selected{ResponseBit::One, tdif};
    return Discarded{tdif};
}

FilterDecision select(const Challenge &c, const DelayModel &m, double delta_t)
{
    require_threshold(delta_t);
    return select_tdif(predict_tdif(m, c), delta_t);
}

std::vector<Challenge> CandidateStream::chunk(std::size_t j) const
{
    Rng rng = substream(seed_, j);
    std::vector<Challenge> out;
    out.reserve(chunk_size);
    for (std::size_t i = 0; i < chunk_size; ++i)
        out.push_back(random_challenge(k_, rng));
    return out;
}

ReliableBatch generate_reliable(const DelayModel &m, double delta_t, std::size_t count, Rng &rng,
                                const GenerateOptions &opts)
{
    require_threshold(delta_t);
    if (count == 0)
        throw std::invalid_argument("count must be >= 1");

    ReliableBatch batch;
    batch.delta_t = delta_t;
    batch.model_fingerprint = fingerprint(m);
    batch.seed = draw_seed(rng);
    batch.requested = count;

    std::size_t budget = opts.max_candidates;
    if (budget == 0) {
        Rng est = substream(batch.seed, kLossEstimateStream);
        constexpr std::size_t sample = 10'000;
        const double loss = crp_loss(m, delta_t, sample, est);
        // An unobserved keep rate counts as half a hit in the estimate sample.
        const double keep = std::max(1.0 - loss, 0.5 / static_cast<double>(sample));
        const double limit = 1000.0 * static_cast<double>(count) / keep;
        budget = limit >= 1e15 ? static_cast<std::size_t>(1e15) : static_cast<std::size_t>(limit);
    }

    const CandidateStream stream(m.k(), batch.seed);
    const std::size_t workers = std::max<std::size_t>(opts.threads, 1);
    const std::size_t chunks_needed = (budget + CandidateStream::chunk_size - 1) / CandidateStream::chunk_size;

    struct Hit {
        std::size_t index;
        ReliableEntry entry;
    };
    std::size_t next_chunk = 0;
    while (next_chunk < chunks_needed) {
        const std::size_t round = std::min(workers, chunks_needed - next_chunk);
        std::vector<std::vector<Hit>> hits(round);
        detail::parallel_for(round, workers, [&](std::size_t r) {
            const std::size_t j = next_chunk + r;
            auto challenges = stream.chunk(j);
            for (std::size_t i = 0; i < challenges.size(); ++i) {
                const std::size_t index = j * CandidateStream::chunk_size + i;
                if (index >= budget)
                    break;
                const double tdif = predict_tdif(m, challenges[i]);
                if (const auto d = select_tdif(tdif, delta_t); const auto *s = std::get_if<Selected>(&d))
                    hits[r].push_back({index, {std::move(challenges[i]), s->predicted, tdif}});
            }
        });
        for (auto &chunk_hits : hits)
            for (auto &h : chunk_hits) {
                batch.entries.push_back(std::move(h.entry));
                if (batch.entries.size() == count) {
                    batch.candidates_examined = h.index + 1;
                    return batch;
                }
            }
        next_chunk += round;
    }
    batch.candidates_examined = budget;
    throw PartialBatchError("candidate budget of " + std::to_string(budget) + " exhausted with " +
                                std::to_string(batch.entries.size()) + " of " + std::to_string(count) +
                                " reliable challenges",
                            std::move(batch));
}

double crp_loss(const DelayModel &m, double delta_t, std::size_t sample_size, Rng &rng)
{
    require_threshold(delta_t);
    const auto values = sample_abs_tdif(m, sample_size, rng);
    const auto discarded = std::count_if(values.begin(), values.end(), [&](double v) { return v <= delta_t; });
    return static_cast<double>(discarded) / static_cast<double>(values.size());
}

double loss_to_delta(const DelayModel &m, double target_loss, std::size_t sample_size, Rng &rng)
{
    if (!(target_loss >= 0.0 && target_loss < 1.0))
        throw std::invalid_argument("target_loss must lie in [0, 1)");
    if (target_loss == 0.0)
        return 0.0;
    auto values = sample_abs_tdif(m, sample_size, rng);
    // Smallest threshold v with fraction(|t_dif| <= v) >= target.
    const auto rank = static_cast<std::size_t>(std::ceil(target_loss * static_cast<double>(values.size())));
    const auto nth = values.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

bool verify_batch(const ReliableBatch &batch, const DelayModel &m)
{
    if (batch.model_fingerprint != fingerprint(m))
        return false;
    for (const auto &e : batch.entries) {
        if (e.challenge.size() != m.k())
            return false;
        const auto d = select(e.challenge, m, batch.delta_t);
        const auto *s = std::get_if<Selected>(&d);
        if (!s || s->predicted != e.predicted)
            return false;
    }
    return true;
}

void write_batch(const ReliableBatch &batch, std::size_t k, const std::filesystem::path &csv,
                 const std::filesystem::path &sidecar, const json &extra)
{
    std::ofstream out(csv, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + csv.string());
    std::string buf = "challenge_hex,predicted_bit,tdif\n";
    char num[64];
    for (const auto &e : batch.entries) {
        buf += e.challenge.to_hex();
        buf += ',';
        buf += static_cast<char>('0' + to_int(e.predicted));
        buf += ',';
        const auto [ptr, ec] = std::to_chars(num, num + sizeof num, e.tdif);
        buf.append(num, ptr);
        buf += '\n';
    }
    out << buf;
    if (!out)
        throw std::runtime_error("write failed: " + csv.string());

    write_json_file(json{{"format", kBatchFormat},
                         {"version", kBatchVersion},
                         {"k", k},
                         {"delta_t", batch.delta_t},
                         {"model_fingerprint", batch.model_fingerprint},
                         {"seed", batch.seed},
                         {"candidates_examined", batch.candidates_examined},
                         {"requested", batch.requested},
                         {"selected", batch.entries.size()},
                         {"config", extra}},
                    sidecar);
}

ReliableBatch read_batch(const std::filesystem::path &csv, const std::filesystem::path &sidecar)
{
    const json meta = read_json_file(sidecar);
    ReliableBatch batch;
    std::size_t k = 0;
    try {
        if (meta.at("format").get<std::string>() != kBatchFormat || meta.at("version").get<int>() != kBatchVersion)
            throw SchemaError("not a version 1 reliable-batch sidecar");
        k = meta.at("k").get<std::size_t>();
        batch.delta_t = meta.at("delta_t").get<double>();
        batch.model_fingerprint = meta.at("model_fingerprint").get<std::string>();
        batch.seed = meta.at("seed").get<std::uint64_t>();
        batch.candidates_examined = meta.at("candidates_examined").get<std::size_t>();
        batch.requested = meta.at("requested").get<std::size_t>();
    } catch (const json::exception &e) {
        throw SchemaError(std::string("batch sidecar: ") + e.what());
    }

    std::ifstream in(csv);
    if (!in)
        throw std::runtime_error("cannot open " + csv.string());
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || line.rfind("challenge_hex,predicted_bit,tdif", 0) != 0)
        throw SchemaError(csv.string() + ": missing batch header");
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw ParseError(lineno, "expected three fields");
        const std::string bit = line.substr(c1 + 1, c2 - c1 - 1);
        if (bit != "0" && bit != "1")
            throw ParseError(lineno, "predicted_bit must be 0 or 1");
        double tdif = 0.0;
        const char *first = line.data() + c2 + 1;
        const char *last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, tdif);
        if (ec != std::errc() || ptr != last)
            throw ParseError(lineno, "malformed tdif");
        try {
            batch.entries.push_back({Challenge::from_hex(std::string_view(line).substr(0, c1), k),
                                     bit == "1" ? ResponseBit::One : ResponseBit::Zero, tdif});
        } catch (const std::invalid_argument &e) {
            throw ParseError(lineno, e.what());
        }
    }
    return batch;
}

}  // namespace apufsim
