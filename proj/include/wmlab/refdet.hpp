#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "wmlab/error.hpp"
#include "wmlab/mix.hpp"
#include "wmlab/perturb.hpp"
#include "wmlab/text.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

// Hashed character n-gram (n = 1..4) and token-id features, with values
// normalized by text length in characters and an attribution of every
// occurrence to exactly one token position.
struct FeatureVector {
    std::map<std::uint32_t, double> values;
    std::vector<std::vector<std::uint32_t>> token_attribution;
    std::size_t occurrences = 0;
};

class Featurizer {
public:
    static constexpr std::uint32_t kDim = 1u << 18;

    explicit Featurizer(const Vocab* vocab) : vocab_(vocab) {}

    const Vocab* vocab() const { return vocab_; }

    FeatureVector extract(const std::string& text) const {
        FeatureVector fv;
        if (text.empty()) return fv;
        const TokenSeq seq = vocab_->encode(text);
        const auto cps = to_codepoints(text);
        const std::size_t len = cps.size();
        const double unit = 1.0 / static_cast<double>(len);
        fv.token_attribution.resize(seq.size());

        std::vector<std::uint32_t> char_to_token(len, 0);
        for (std::size_t t = 0; t < seq.size(); ++t)
            for (std::uint32_t c = seq.spans[t].begin; c < seq.spans[t].end; ++c)
                char_to_token[c] = static_cast<std::uint32_t>(t);

        std::string buf;
        for (std::size_t n = 1; n <= 4; ++n) {
            for (std::size_t i = 0; i + n <= len; ++i) {
                buf.clear();
                buf.push_back('C');
                buf.push_back(static_cast<char>(n));
                for (std::size_t k = 0; k < n; ++k) utf8_append(buf, cps[i + k]);
                const auto fid = static_cast<std::uint32_t>(fnv1a64(buf) & (kDim - 1));
                fv.values[fid] += unit;
                fv.token_attribution[char_to_token[i]].push_back(fid);
                ++fv.occurrences;
            }
        }
        for (std::size_t t = 0; t < seq.size(); ++t) {
            buf.clear();
            buf.push_back('T');
            const TokenId id = seq.ids[t];
            for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((id >> s) & 0xFF));
            const auto fid = static_cast<std::uint32_t>(fnv1a64(buf) & (kDim - 1));
            fv.values[fid] += unit;
            fv.token_attribution[t].push_back(fid);
            ++fv.occurrences;
        }
        return fv;
    }

private:
    const Vocab* vocab_;
};

struct TrainConfig {
    std::size_t epochs = 12;
    double learning_rate = 0.5;
    double l2_penalty = 1e-6;
    std::uint32_t aug_variants_per_sample = 9;  // 0, 5, or 9 for the named presets
    double aug_edit_rate = 0.15;
    std::uint64_t seed = 1;
};

struct RefTrainSample {
    std::string id;
    std::string text;
    double s_w = 0.0;
    bool watermarked = false;
};

// Linear regressor over hashed features predicting the normalized global
// watermark score.
class RefModel {
public:
    static constexpr std::uint32_t kMagic = 0x57524546;  // "WREF"
    static constexpr std::uint32_t kFormatVersion = 1;

    RefModel() : weights_(Featurizer::kDim, 0.0) {}

    double s_min = 0.0;
    double s_w_max = 1.0;
    std::uint32_t aug_level = 0;

    double normalize(double s_w) const {
        const double t = (s_w - s_min) / (s_w_max - s_min);
        return std::clamp(t, 0.0, 1.0);
    }

    double raw_score(const FeatureVector& fv) const {
        double s = bias_;
        for (const auto& [fid, v] : fv.values) s += weights_[fid] * v;
        return s;
    }

    double predict_features(const FeatureVector& fv) const {
        return std::clamp(raw_score(fv), 0.0, 1.0);
    }

    double predict(const Featurizer& feat, const std::string& text) const {
        return predict_features(feat.extract(text));
    }

    // Per-token gradient magnitudes: the L2 norm of the weights over each
    // token's attributed feature occurrences, plus their mean and
    // standard deviation over the text.
    struct TokenGradients {
        std::vector<double> magnitude;
        double mean = 0.0;
        double stddev = 0.0;
    };

    TokenGradients token_gradients(const Featurizer& feat, const std::string& text) const {
        const FeatureVector fv = feat.extract(text);
        TokenGradients g;
        g.magnitude.reserve(fv.token_attribution.size());
        for (const auto& fids : fv.token_attribution) {
            double sq = 0.0;
            for (std::uint32_t fid : fids) sq += weights_[fid] * weights_[fid];
            g.magnitude.push_back(std::sqrt(sq));
        }
        const auto n = static_cast<double>(g.magnitude.size());
        if (n > 0) {
            g.mean = std::accumulate(g.magnitude.begin(), g.magnitude.end(), 0.0) / n;
            double var = 0.0;
            for (double v : g.magnitude) var += (v - g.mean) * (v - g.mean);
            g.stddev = std::sqrt(var / n);
        }
        return g;
    }

    double& weight(std::uint32_t fid) { return weights_[fid]; }
    double weight(std::uint32_t fid) const { return weights_[fid]; }
    double& bias() { return bias_; }
    double bias() const { return bias_; }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
        auto put32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
        auto putd = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
        put32(kMagic);
        put32(kFormatVersion);
        put32(Featurizer::kDim);
        put32(aug_level);
        putd(bias_);
        putd(s_min);
        putd(s_w_max);
        f.write(reinterpret_cast<const char*>(weights_.data()),
                static_cast<std::streamsize>(weights_.size() * sizeof(double)));
    }

    static RefModel load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) raise(Errc::MissingArtifact, "cannot read ref model " + path);
        auto get32 = [&] {
            std::uint32_t v = 0;
            f.read(reinterpret_cast<char*>(&v), 4);
            return v;
        };
        auto getd = [&] {
            double v = 0;
            f.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        if (get32() != kMagic) raise(Errc::ConfigError, "not a ref model file: " + path);
        if (get32() != kFormatVersion) raise(Errc::ConfigError, "unsupported ref model version");
        if (get32() != Featurizer::kDim) raise(Errc::ConfigError, "ref model dimension mismatch");
        RefModel m;
        m.aug_level = get32();
        m.bias_ = getd();
        m.s_min = getd();
        m.s_w_max = getd();
        f.read(reinterpret_cast<char*>(m.weights_.data()),
               static_cast<std::streamsize>(m.weights_.size() * sizeof(double)));
        if (!f) raise(Errc::ConfigError, "truncated ref model file");
        return m;
    }

private:
    std::vector<double> weights_;
    double bias_ = 0.0;
};

// Labels augmented variants by querying the original detector; the
// callable is expected to charge the caller's query ledger.
using OriScoreFn = std::function<double(const std::string& input_id, const std::string& text)>;

// Squared-error SGD over the hashed features. Augmented variants are
// produced for watermarked samples only, matching the per-sample query
// accounting of 1 + aug_variants_per_sample.
inline RefModel train_ref(const std::vector<RefTrainSample>& dataset, const TrainConfig& cfg,
                          const Featurizer& feat, const SynonymLexicon* lexicon,
                          const OriScoreFn& query_ori) {
    std::size_t n_wm = 0, n_plain = 0;
    for (const auto& s : dataset) (s.watermarked ? n_wm : n_plain)++;
    if (n_wm < 500 || n_plain < 500)
        raise(Errc::InsufficientData, "need >= 500 watermarked and 500 non-watermarked samples");

    RefModel model;
    model.aug_level = cfg.aug_variants_per_sample;
    model.s_w_max = -1e300;
    model.s_min = 1e300;
    for (const auto& s : dataset) {
        if (s.watermarked) model.s_w_max = std::max(model.s_w_max, s.s_w);
        else model.s_min = std::min(model.s_min, s.s_w);
    }
    if (!(model.s_w_max > model.s_min))
        raise(Errc::InsufficientData, "degenerate score range in training data");

    SeededStream stream(mix64(cfg.seed ^ 0x5EFDE7u));
    struct Row {
        FeatureVector fv;
        double target;
    };
    std::vector<Row> rows;
    rows.reserve(dataset.size() * (1 + cfg.aug_variants_per_sample));
    for (const auto& s : dataset) {
        double label = s.s_w;
        if (s.watermarked) label = query_ori(s.id, s.text);  // one budgeted query
        rows.push_back({feat.extract(s.text), model.normalize(label)});
        if (!s.watermarked) continue;
        const TokenSeq seq = feat.vocab()->encode(s.text);
        for (std::uint32_t v = 0; v < cfg.aug_variants_per_sample; ++v) {
            SeededStream vs = stream.fork(fnv1a64(s.id) ^ v);
            const PerturbKind kind =
                (vs.next() & 1) ? PerturbKind::Homoglyph : PerturbKind::SynonymReplace;
            const auto plan = sample_random_plan(seq, cfg.aug_edit_rate, kind, vs, lexicon);
            const std::string perturbed = apply_plan(seq, plan, lexicon);
            const double y = query_ori(s.id, perturbed);
            rows.push_back({feat.extract(perturbed), model.normalize(y)});
        }
    }

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const std::size_t j = i + stream.next_below(order.size() - i);
            std::swap(order[i], order[j]);
        }
        const double lr = cfg.learning_rate / (1.0 + static_cast<double>(epoch));
        for (const std::size_t idx : order) {
            const Row& row = rows[idx];
            const double err = row.target - model.raw_score(row.fv);
            model.bias() += lr * err;
            for (const auto& [fid, v] : row.fv.values) {
                double& w = model.weight(fid);
                w += lr * (err * v - cfg.l2_penalty * w);
            }
        }
    }
    return model;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n == 0 || n != b.size()) raise(Errc::InsufficientSamples, "pearson needs matched data");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

}  // namespace wmlab
