#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wmlab/error.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/tokenizer.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

struct DetectionResult {
    double global_score = 0.0;
    std::vector<double> token_scores;
    double threshold = 0.0;
    bool verdict = false;
    std::uint32_t green_count = 0;  // GreenList only
};

struct DatasetStats {
    double s_w_max = 0.0;  // max watermark score over the watermarked set
    double s_min = 0.0;    // min watermark score over the non-watermarked set
};

// One-sided z-test on green-list membership. Keys are recomputed from
// the received tokens only; no generation-time state is consulted.
inline DetectionResult detect_greenlist(const TokenSeq& text, const SchemeConfig& cfg) {
    const std::size_t m = text.size();
    if (m < 2) raise(Errc::TextTooShort, "need at least 2 tokens");
    DetectionResult r;
    r.token_scores.reserve(m);
    std::uint32_t green = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const WatermarkKey key = key_at(cfg, text.ids, t);
        const bool g = is_green(key, text.ids[t], cfg.gamma);
        green += g ? 1 : 0;
        r.token_scores.push_back(g ? 1.0 : 0.0);
    }
    const double dm = static_cast<double>(m);
    r.green_count = green;
    r.global_score =
        (green - cfg.gamma * dm) / std::sqrt(cfg.gamma * (1.0 - cfg.gamma) * dm);
    r.threshold = cfg.tau_d;
    r.verdict = r.global_score > r.threshold;
    return r;
}

// Log-likelihood ratio between the key-conditioned reweighted model and
// the base model, summed over tokens. The base model lives on the
// provider side, so this detector takes it explicitly.
inline DetectionResult detect_reweight(const TokenSeq& text, const SchemeConfig& cfg,
                                       const NgramModel& base_model) {
    const std::size_t m = text.size();
    if (m < 1) raise(Errc::TextTooShort, "empty text");
    constexpr double kFloor = 1e-12;
    DetectionResult r;
    r.token_scores.reserve(m);
    std::vector<TokenId> prefix;
    double sum = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        const auto dist = base_model.next_dist(prefix);
        const WatermarkKey key = key_at(cfg, text.ids, t);
        const auto rw = reweight_dist(dist, key, cfg.gamma, cfg.beta);
        const TokenId x = text.ids[t];
        const double p_base = x < dist.size() ? dist[x] : 0.0;
        const double p_wm = x < rw.size() ? rw[x] : 0.0;
        const double s = std::log((p_wm + kFloor) / (p_base + kFloor));
        r.token_scores.push_back(s);
        sum += s;
        prefix.push_back(x);
    }
    r.global_score = sum;
    r.threshold = cfg.tau_d;
    r.verdict = r.global_score > r.threshold;
    return r;
}

// Recovered pseudorandom scores, centered and variance-normalized so the
// threshold is stable in text length.
inline DetectionResult detect_scoresampling(const TokenSeq& text, const SchemeConfig& cfg) {
    const std::size_t m = text.size();
    if (m < 2) raise(Errc::TextTooShort, "need at least 2 tokens");
    DetectionResult r;
    r.token_scores.reserve(m);
    double sum = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        const WatermarkKey key = key_at(cfg, text.ids, t);
        const double s = g_value(key, text.ids[t]) - 0.5;
        r.token_scores.push_back(s);
        sum += s;
    }
    r.global_score = sum / std::sqrt(static_cast<double>(m));
    r.threshold = cfg.tau_d;
    r.verdict = r.global_score > r.threshold;
    return r;
}

inline DetectionResult detect(const TokenSeq& text, const SchemeConfig& cfg,
                              const NgramModel* base_model = nullptr) {
    switch (cfg.family) {
        case Family::GreenList: return detect_greenlist(text, cfg);
        case Family::Reweight:
            if (base_model == nullptr)
                raise(Errc::MissingArtifact, "reweight detection needs the base model");
            return detect_reweight(text, cfg, *base_model);
        case Family::ScoreSampling: return detect_scoresampling(text, cfg);
    }
    raise(Errc::ConfigError, "bad family");
}

// Empirical (1 - target_fpr) quantile of non-watermarked scores, by
// nearest rank (ties to the upper value).
inline double calibrate_threshold(std::vector<double> scores_nonwm, double target_fpr) {
    if (scores_nonwm.size() < 100)
        raise(Errc::InsufficientSamples, "need >= 100 non-watermarked scores, have " +
                                             std::to_string(scores_nonwm.size()));
    if (!(target_fpr > 0.0 && target_fpr <= 1.0))
        raise(Errc::ConfigError, "target_fpr must be in (0,1]");
    std::sort(scores_nonwm.begin(), scores_nonwm.end());
    const auto n = scores_nonwm.size();
    auto idx = static_cast<std::size_t>(std::floor((1.0 - target_fpr) * static_cast<double>(n)));
    if (idx >= n) idx = n - 1;
    return scores_nonwm[idx];
}

}  // namespace wmlab
