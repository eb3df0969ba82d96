#include "apufsim/model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <openssl/evp.h>

namespace apufsim {

using nlohmann::json;

namespace {

constexpr int kModelVersion = 1;
constexpr const char *kModelFormat = "apufsim.model";

double sigmoid(double z) noexcept
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double label(ResponseBit r) noexcept { return r == ResponseBit::Zero ? 1.0 : -1.0; }

/// Probability pair (p, 1 - p) for log-odds `z`, strictly inside (0, 1) and summing to exactly 1.
std::pair<double, double> probability_pair(double z)
{
    constexpr double floor = std::numeric_limits<double>::epsilon();
    const double small = std::max(sigmoid(-std::abs(z)), floor);
    const double large = 1.0 - small;
    return z >= 0.0 ? std::pair{large, small} : std::pair{small, large};
}

std::vector<StageProbabilities> derive_stage_probs(const std::vector<double> &w)
{
    // Rewrite the weights in the straight/cross sign basis psi_i = prod_{j>=i} (2c_j - 1),
    // where t_dif = sum_i psi_i d_i + psi_{i+1} s_i with d = (a - b)/2, s = (a + b)/2,
    // a = t13 - t24 and b = t23 - t14. The k - 1 interior weights each mix d_i with
    // s_{i-1}; the minimum-norm split assigns half to each.
    const std::size_t k = w.size() - 1;
    std::vector<double> psi(k + 1);
    for (std::size_t i = 0; i < k; ++i)
        psi[i] = ((k - i) % 2 == 0) ? w[i] : -w[i];
    psi[k] = w[k];

    std::vector<double> d(k);
    std::vector<double> s(k);
    d[0] = psi[0];
    for (std::size_t i = 1; i < k; ++i) {
        d[i] = psi[i] / 2.0;
        s[i - 1] = psi[i] / 2.0;
    }
    s[k - 1] = psi[k];

    std::vector<StageProbabilities> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double a = s[i] + d[i];
        const double b = s[i] - d[i];
        const auto [p13, p24] = probability_pair(a);
        const auto [p14, p23] = probability_pair(-b);
        out[i] = {p13, p24, p14, p23};
    }
    return out;
}

void append_double(std::string &out, double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace

ResponseBit CrpRecord::majority() const
{
    if (responses.empty())
        throw std::logic_error("CRP record without responses");
    std::size_t ones = 0;
    for (auto r : responses)
        ones += r == ResponseBit::One;
    return 2 * ones >= responses.size() ? ResponseBit::One : ResponseBit::Zero;
}

CrpDataset collect_crps(const ApufInstance &apuf, std::size_t n, const OperatingCondition &cond,
                        std::size_t repeats, Rng &rng)
{
    if (n == 0 || repeats == 0)
        throw std::invalid_argument("collect_crps needs n >= 1 and repeats >= 1");
    const ConditionedApuf device(apuf, cond);
    CrpDataset data;
    data.k = apuf.k();
    data.source = to_string(cond);
    data.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CrpRecord rec{random_challenge(apuf.k(), rng), cond, {}};
        const double tdif = device.delay_difference(rec.challenge);
        rec.responses.reserve(repeats);
        for (std::size_t r = 0; r < repeats; ++r)
            rec.responses.push_back(noisy_arbiter(tdif, device.noise_sigma(), rng));
        data.records.push_back(std::move(rec));
    }
    return data;
}

void feature_transform(const Challenge &c, std::span<double> out)
{
    const std::size_t k = c.size();
    if (out.size() != k + 1)
        throw DimensionError("feature buffer must hold k + 1 values");
    double prod = 1.0;
    for (std::size_t i = k; i-- > 0;) {
        prod *= c[i] ? -1.0 : 1.0;
        out[i] = prod;
    }
    out[k] = 1.0;
}

std::vector<double> feature_transform(const Challenge &c)
{
    std::vector<double> phi(c.size() + 1);
    feature_transform(c, phi);
    return phi;
}

std::vector<double> weights_from_delays(const ConditionedApuf &apuf)
{
    const auto &delays = apuf.delays();
    const std::size_t k = delays.size();
    std::vector<double> psi(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double a = delays[i].t13 - delays[i].t24;
        const double b = delays[i].t23 - delays[i].t14;
        psi[i] += (a - b) / 2.0;
        psi[i + 1] += (a + b) / 2.0;
    }
    std::vector<double> w(k + 1);
    for (std::size_t i = 0; i < k; ++i)
        w[i] = ((k - i) % 2 == 0) ? psi[i] : -psi[i];
    w[k] = psi[k];
    return w;
}

json to_json(const TrainConfig &cfg)
{
    return json{{"learning_rate", cfg.learning_rate},
                {"max_epochs", cfg.max_epochs},
                {"tolerance", cfg.tolerance},
                {"heldout_fraction", cfg.heldout_fraction},
                {"min_accuracy", cfg.min_accuracy}};
}

TrainConfig train_config_from_json(const json &doc, TrainConfig cfg)
{
    try {
        cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
        cfg.max_epochs = doc.value("max_epochs", cfg.max_epochs);
        cfg.tolerance = doc.value("tolerance", cfg.tolerance);
        cfg.heldout_fraction = doc.value("heldout_fraction", cfg.heldout_fraction);
        cfg.min_accuracy = doc.value("min_accuracy", cfg.min_accuracy);
    } catch (const json::exception &e) {
        throw SchemaError(std::string("training config: ") + e.what());
    }
    return cfg;
}

DelayModel::DelayModel(std::vector<double> weights, double scale, TrainingInfo info)
    : weights_(std::move(weights)), scale_(scale), info_(std::move(info))
{
    if (weights_.size() < 2)
        throw std::invalid_argument("a delay model needs k >= 1 stage weights plus a bias");
    for (double w : weights_)
        if (!std::isfinite(w))
            throw std::invalid_argument("model weights must be finite");
    if (!(scale_ > 0.0) || !std::isfinite(scale_))
        throw std::invalid_argument("model scale must be finite and > 0");
    stage_probs_ = derive_stage_probs(weights_);
}

DelayModel DelayModel::with_scale(double scale) const { return DelayModel(weights_, scale, info_); }

double DelayModel::raw_tdif(const Challenge &c) const
{
    const std::size_t k = this->k();
    if (c.size() != k)
        throw DimensionError("challenge has " + std::to_string(c.size()) + " bits, model has " + std::to_string(k) +
                             " stages");
    double prod = 1.0;
    double acc = weights_[k];
    for (std::size_t i = k; i-- > 0;) {
        prod *= c[i] ? -1.0 : 1.0;
        acc += weights_[i] * prod;
    }
    return acc;
}

LossAndGradient logistic_loss(std::span<const double> weights, std::span<const CrpRecord> records)
{
    if (records.empty())
        throw std::invalid_argument("logistic_loss needs at least one record");
    const std::size_t dim = weights.size();
    std::vector<double> phi(dim);
    std::vector<double> grad(dim, 0.0);
    double loss = 0.0;
    for (const auto &rec : records) {
        if (rec.challenge.size() + 1 != dim)
            throw DimensionError("record length does not match the weight vector");
        feature_transform(rec.challenge, phi);
        double z = 0.0;
        for (std::size_t j = 0; j < dim; ++j)
            z += weights[j] * phi[j];
        const double y = label(rec.majority());
        loss += softplus(-y * z);
        const double coeff = -y * sigmoid(-y * z);
        for (std::size_t j = 0; j < dim; ++j)
            grad[j] += coeff * phi[j];
    }
    const double n = static_cast<double>(records.size());
    for (auto &g : grad)
        g /= n;
    return {loss / n, std::move(grad)};
}

DelayModel train(const CrpDataset &data, const TrainConfig &cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = data.records.size();
    if (data.k == 0 || n < 2)
        throw std::invalid_argument("training needs at least two records");
    if (!(cfg.heldout_fraction >= 0.0 && cfg.heldout_fraction < 1.0))
        throw std::invalid_argument("heldout_fraction must lie in [0, 1)");
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("learning_rate must be > 0");

    const std::size_t dim = data.k + 1;
    const auto heldout = static_cast<std::size_t>(std::floor(cfg.heldout_fraction * static_cast<double>(n)));
    const std::size_t ntrain = n - heldout;
    if (ntrain == 0)
        throw std::invalid_argument("no records left for training");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::vector<double> phi(dim);
    bool has_zero = false;
    bool has_one = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &rec = data.records[i];
        if (rec.challenge.size() != data.k)
            throw DimensionError("record " + std::to_string(i) + " has the wrong challenge length");
        feature_transform(rec.challenge, phi);
        for (std::size_t j = 0; j < dim; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = phi[j];
        const auto m = rec.majority();
        y(static_cast<Eigen::Index>(i)) = label(m);
        (m == ResponseBit::Zero ? has_zero : has_one) = true;
    }
    if (!has_zero || !has_one)
        throw std::invalid_argument("training data needs both response values");

    const auto xt = x.topRows(static_cast<Eigen::Index>(ntrain));
    const auto yt = y.head(static_cast<Eigen::Index>(ntrain));
    const double inv_n = 1.0 / static_cast<double>(ntrain);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd margin(static_cast<Eigen::Index>(ntrain));
    Eigen::VectorXd coeff(static_cast<Eigen::Index>(ntrain));
    TrainingInfo info;
    double prev_loss = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        margin.noalias() = (xt * w).cwiseProduct(yt);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < margin.size(); ++i) {
            loss += softplus(-margin(i));
            coeff(i) = -yt(i) * sigmoid(-margin(i));
        }
        loss *= inv_n;
        info.iterations = epoch + 1;
        info.final_loss = loss;
        if (std::abs(prev_loss - loss) < cfg.tolerance) {
            info.converged = true;
            break;
        }
        prev_loss = loss;
        w.noalias() -= (cfg.learning_rate * inv_n) * (xt.transpose() * coeff);
    }

    auto count_correct = [&](Eigen::Index from, Eigen::Index count) {
        const Eigen::VectorXd z = x.middleRows(from, count) * w;
        std::size_t ok = 0;
        for (Eigen::Index i = 0; i < count; ++i)
            ok += (z(i) > 0.0 ? 1.0 : -1.0) == y(from + i);
        return ok;
    };
    info.train_size = ntrain;
    info.heldout_size = heldout;
    info.train_accuracy =
        static_cast<double>(count_correct(0, static_cast<Eigen::Index>(ntrain))) / static_cast<double>(ntrain);
    const std::size_t eval_from = heldout > 0 ? ntrain : 0;
    const std::size_t eval_count = heldout > 0 ? heldout : ntrain;
    info.heldout_accuracy =
        static_cast<double>(count_correct(static_cast<Eigen::Index>(eval_from), static_cast<Eigen::Index>(eval_count))) /
        static_cast<double>(eval_count);
    if (info.heldout_accuracy < cfg.min_accuracy)
        info.warning = "heldout accuracy " + std::to_string(info.heldout_accuracy) + " below min_accuracy " +
                       std::to_string(cfg.min_accuracy);
    info.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    return DelayModel(std::vector<double>(w.data(), w.data() + w.size()), 1.0, std::move(info));
}

double predict_tdif(const DelayModel &m, const Challenge &c) { return m.raw_tdif(c) / m.scale(); }

ResponseBit predict_response(const DelayModel &m, const Challenge &c) { return arbiter(predict_tdif(m, c)); }

DelayModel normalize(const DelayModel &m, std::size_t sample_size, Rng &rng)
{
    if (sample_size < 1000)
        throw std::invalid_argument("normalize needs sample_size >= 1000");
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < sample_size; ++i) {
        const double v = m.raw_tdif(random_challenge(m.k(), rng));
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double sd = std::sqrt(m2 / static_cast<double>(sample_size - 1));
    if (!(sd > 0.0) || !std::isfinite(sd))
        throw NormalizationError("degenerate model: predicted t_dif has zero spread");
    return m.with_scale(sd);
}

double accuracy(const DelayModel &m, const CrpDataset &data)
{
    if (data.records.empty())
        throw std::invalid_argument("accuracy needs a nonempty dataset");
    if (data.k != m.k())
        throw DimensionError("dataset k = " + std::to_string(data.k) + " but model k = " + std::to_string(m.k()));
    std::size_t ok = 0;
    for (const auto &rec : data.records)
        ok += predict_response(m, rec.challenge) == rec.majority();
    return static_cast<double>(ok) / static_cast<double>(data.records.size());
}

std::string fingerprint(const DelayModel &m)
{
    std::string canon = "apufsim.model/1;k=" + std::to_string(m.k()) + ";w=";
    for (double w : m.weights()) {
        append_double(canon, w);
        canon += ',';
    }
    canon += ";scale=";
    append_double(canon, m.scale());

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canon.data(), canon.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

json to_json(const DelayModel &m)
{
    json probs = json::array();
    for (const auto &p : m.stage_probs())
        probs.push_back({p.p13, p.p24, p.p14, p.p23});
    const auto &t = m.training();
    return json{{"format", kModelFormat},
                {"version", kModelVersion},
                {"k", m.k()},
                {"weights", m.weights()},
                {"scale", m.scale()},
                {"stage_probs", std::move(probs)},
                {"training",
                 {{"iterations", t.iterations},
                  {"final_loss", t.final_loss},
                  {"train_accuracy", t.train_accuracy},
                  {"heldout_accuracy", t.heldout_accuracy},
                  {"train_size", t.train_size},
                  {"heldout_size", t.heldout_size},
                  {"converged", t.converged},
                  {"warning", t.warning}}},
                {"fingerprint", fingerprint(m)}};
}

DelayModel model_from_json(const json &doc)
{
    try {
        if (doc.at("format").get<std::string>() != kModelFormat)
            throw SchemaError("not a delay model document");
        if (doc.at("version").get<int>() != kModelVersion)
            throw SchemaError("unsupported model version " + doc.at("version").dump());
        auto weights = doc.at("weights").get<std::vector<double>>();
        if (doc.at("k").get<std::size_t>() + 1 != weights.size())
            throw SchemaError("model k disagrees with the weight vector length");
        TrainingInfo info;
        if (doc.contains("training")) {
            const auto &t = doc.at("training");
            info.iterations = t.value("iterations", std::size_t{0});
            info.final_loss = t.value("final_loss", 0.0);
            info.train_accuracy = t.value("train_accuracy", 0.0);
            info.heldout_accuracy = t.value("heldout_accuracy", 0.0);
            info.train_size = t.value("train_size", std::size_t{0});
            info.heldout_size = t.value("heldout_size", std::size_t{0});
            info.converged = t.value("converged", false);
            info.warning = t.value("warning", std::string{});
        }
        return DelayModel(std::move(weights), doc.at("scale").get<double>(), std::move(info));
    } catch (const json::exception &e) {
        throw SchemaError(std::string("model document: ") + e.what());
    }
}

void save_model(const DelayModel &m, const std::filesystem::path &path) { write_json_file(to_json(m), path); }

DelayModel load_model(const std::filesystem::path &path) { return model_from_json(read_json_file(path)); }

}  // namespace apufsim
