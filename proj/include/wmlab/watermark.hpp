#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/mix.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

enum class Family { GreenList, Reweight, ScoreSampling };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::GreenList: return "greenlist";
        case Family::Reweight: return "reweight";
        case Family::ScoreSampling: return "scoresampling";
    }
    return "?";
}

// Watermark family plus parameters, shared verbatim by the injector and
// the detector.
struct SchemeConfig {
    std::string name = "kgw";
    Family family = Family::GreenList;
    std::uint32_t h = 1;        // context length for key derivation
    double gamma = 0.5;         // green-list ratio / cumulative mass threshold
    double delta = 2.0;         // logit bias (GreenList)
    double beta = 3.0;          // probability boost (Reweight)
    std::uint32_t K = 4;        // tournament size (ScoreSampling)
    std::uint64_t secret = 0x5EC12E7Bu;
    double tau_d = 0.0;         // detection threshold, set by calibration

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ConfigError, "gamma must be in (0,1)");
        if (delta < 0.0) raise(Errc::ConfigError, "delta must be nonnegative");
        if (family == Family::ScoreSampling && K < 2)
            raise(Errc::ConfigError, "K must be >= 2 for score sampling");
        if (beta <= 0.0) raise(Errc::ConfigError, "beta must be positive");
    }

    nlohmann::json to_json() const {
        return {{"name", name},     {"family", family_name(family)},
                {"h", h},           {"gamma", gamma},
                {"delta", delta},   {"beta", beta},
                {"K", K},           {"secret", secret},
                {"tau_d", tau_d}};
    }

    static SchemeConfig from_json(const nlohmann::json& j) {
        SchemeConfig c;
        c.name = j.value("name", "custom");
        const std::string fam = j.at("family").get<std::string>();
        if (fam == "greenlist") c.family = Family::GreenList;
        else if (fam == "reweight") c.family = Family::Reweight;
        else if (fam == "scoresampling") c.family = Family::ScoreSampling;
        else raise(Errc::ConfigError, "unknown watermark family " + fam);
        c.h = j.value("h", 1u);
        c.gamma = j.value("gamma", 0.5);
        c.delta = j.value("delta", 2.0);
        c.beta = j.value("beta", 3.0);
        c.K = j.value("K", 4u);
        c.secret = j.value("secret", static_cast<std::uint64_t>(0x5EC12E7Bu));
        c.tau_d = j.value("tau_d", 0.0);
        c.validate();
        return c;
    }
};

// Named presets, one per injection family ("kgw" and "unigram" share the
// green-list family with h=1 and h=0).
inline SchemeConfig scheme_preset(const std::string& name) {
    SchemeConfig c;
    c.name = name;
    if (name == "kgw") {
        c.family = Family::GreenList;
        c.h = 1;
    } else if (name == "unigram") {
        c.family = Family::GreenList;
        c.h = 0;
    } else if (name == "reweight") {
        c.family = Family::Reweight;
        c.h = 1;
    } else if (name == "scoresample") {
        c.family = Family::ScoreSampling;
        c.h = 1;
        // A 2-way tournament keeps AUC near 1.0 at this corpus entropy
        // while leaving budgeted attacks enough headroom to register.
        c.K = 2;
    } else {
        raise(Errc::ConfigError, "unknown scheme preset " + name);
    }
    c.validate();
    return c;
}

struct WatermarkKey {
    std::uint64_t value = 0;
};

// Key for one position from the last h token ids. Shorter contexts are
// left-padded with the reserved pad id; h=0 gives a context-free key.
inline WatermarkKey derive_key(const SchemeConfig& cfg, const std::vector<TokenId>& context) {
    std::uint64_t k = mix64(cfg.secret);
    const std::size_t h = cfg.h;
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t want = h - i;  // positions counted from the end
        TokenId id = kPadTokenId;
        if (context.size() >= want) id = context[context.size() - want];
        k = mix64(k ^ mix64(id));
    }
    return WatermarkKey{k};
}

// Key at position t of a token sequence, recomputed from the received
// tokens only.
inline WatermarkKey key_at(const SchemeConfig& cfg, const std::vector<TokenId>& ids,
                           std::size_t t) {
    std::uint64_t k = mix64(cfg.secret);
    for (std::size_t i = cfg.h; i >= 1; --i) {
        const TokenId id = (t >= i) ? ids[t - i] : kPadTokenId;
        k = mix64(k ^ mix64(id));
    }
    return WatermarkKey{k};
}

inline double g_value(WatermarkKey key, TokenId v) { return to_unit(prf(key.value, v)); }

inline bool is_green(WatermarkKey key, TokenId v, double gamma) {
    return g_value(key, v) < gamma;
}

// Adds delta to the logits of green-list tokens; red logits unchanged.
inline std::vector<double> greenlist_bias(const std::vector<double>& logits, WatermarkKey key,
                                          double gamma, double delta) {
    std::vector<double> out(logits);
    for (std::size_t v = 0; v < out.size(); ++v)
        if (is_green(key, static_cast<TokenId>(v), gamma)) out[v] += delta;
    return out;
}

// Boosts the prefix of the key-ordered vocabulary whose cumulative
// original mass first reaches gamma, then renormalizes.
inline std::vector<double> reweight_dist(const std::vector<double>& dist, WatermarkKey key,
                                         double gamma, double beta) {
    if (beta == 1.0) return dist;
    std::vector<std::uint32_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::uint64_t> rank(dist.size());
    for (std::size_t v = 0; v < dist.size(); ++v) rank[v] = prf(key.value, v);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return rank[a] < rank[b]; });
    std::vector<double> out(dist);
    double cum = 0.0;
    for (std::uint32_t v : order) {
        if (cum >= gamma) break;
        cum += dist[v];
        out[v] = dist[v] * beta;
    }
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (total <= 0.0) raise(Errc::DegenerateDistribution, "no probability mass to reweight");
    for (double& p : out) p /= total;
    return out;
}

// Boosted-token predicate matching reweight_dist, used by the detector.
inline std::vector<bool> reweight_selected(const std::vector<double>& dist, WatermarkKey key,
                                           double gamma) {
    std::vector<std::uint32_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::uint64_t> rank(dist.size());
    for (std::size_t v = 0; v < dist.size(); ++v) rank[v] = prf(key.value, v);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return rank[a] < rank[b]; });
    std::vector<bool> sel(dist.size(), false);
    double cum = 0.0;
    for (std::uint32_t v : order) {
        if (cum >= gamma) break;
        cum += dist[v];
        sel[v] = true;
    }
    return sel;
}

// Inverse-CDF draw; iteration order is fixed, so results are bit-stable.
inline TokenId sample_from(const std::vector<double>& dist, double u) {
    double acc = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v) {
        acc += dist[v];
        if (u < acc) return static_cast<TokenId>(v);
    }
    // Rounding pushed the total slightly under u: take the last token
    // with nonzero mass.
    for (std::size_t v = dist.size(); v-- > 0;)
        if (dist[v] > 0.0) return static_cast<TokenId>(v);
    return 0;
}

// Tournament sampling: K candidates drawn i.i.d. from dist, the one with
// the highest g-value wins; ties go to the smaller token id.
inline TokenId score_sample(const std::vector<double>& dist, WatermarkKey key, std::uint32_t K,
                            SeededStream& stream) {
    TokenId best = sample_from(dist, stream.next_unit());
    double best_g = g_value(key, best);
    for (std::uint32_t i = 1; i < K; ++i) {
        const TokenId cand = sample_from(dist, stream.next_unit());
        const double g = g_value(key, cand);
        if (g > best_g || (g == best_g && cand < best)) {
            best = cand;
            best_g = g;
        }
    }
    return best;
}

}  // namespace wmlab
