#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/mix.hpp"
#include "wmlab/tokenizer.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

struct GenParams {
    std::uint64_t seed = 1;
    std::size_t max_len = 100;
    std::vector<TokenId> prompt;
    double temperature = 1.0;
};

// Add-k smoothed n-gram model standing in for the victim LLM. `order` is
// the context length in tokens; unseen contexts back off to the uniform
// distribution over the vocabulary.
class NgramModel {
public:
    static constexpr int kFormatVersion = 1;

    static NgramModel train(const std::vector<TokenId>& corpus, std::uint32_t order,
                            double smoothing, std::uint32_t vocab_size,
                            std::string vocab_ref = {}) {
        if (order < 1) raise(Errc::ConfigError, "order must be >= 1");
        if (smoothing < 0.0) raise(Errc::ConfigError, "smoothing must be nonnegative");
        if (corpus.size() <= order)
            raise(Errc::CorpusTooSmall, "corpus has " + std::to_string(corpus.size()) +
                                            " tokens, need > " + std::to_string(order));
        NgramModel m;
        m.order_ = order;
        m.smoothing_ = smoothing;
        m.vocab_size_ = vocab_size;
        m.vocab_ref_ = std::move(vocab_ref);
        std::unordered_map<std::string, std::unordered_map<TokenId, std::uint32_t>> acc;
        std::vector<TokenId> ctx(order, kPadTokenId);
        for (std::size_t t = 0; t < corpus.size(); ++t) {
            for (std::uint32_t i = 0; i < order; ++i)
                ctx[i] = (t >= order - i) ? corpus[t - order + i] : kPadTokenId;
            acc[pack(ctx)][corpus[t]]++;
        }
        m.counts_.reserve(acc.size());
        for (auto& [key, tokens] : acc) {
            Entry e;
            e.total = 0;
            e.items.assign(tokens.begin(), tokens.end());
            std::sort(e.items.begin(), e.items.end());
            for (const auto& [tok, c] : e.items) e.total += c;
            m.counts_.emplace(key, std::move(e));
        }
        return m;
    }

    std::uint32_t order() const { return order_; }
    double smoothing() const { return smoothing_; }
    std::uint32_t vocab_size() const { return vocab_size_; }
    const std::string& vocab_ref() const { return vocab_ref_; }

    // Distribution over the vocabulary given the last `order` tokens of
    // `context` (left-padded when shorter).
    std::vector<double> next_dist(const std::vector<TokenId>& context) const {
        std::vector<TokenId> ctx(order_, kPadTokenId);
        for (std::uint32_t i = 0; i < order_; ++i) {
            const std::size_t want = order_ - i;
            if (context.size() >= want) ctx[i] = context[context.size() - want];
        }
        std::vector<double> dist(vocab_size_, 0.0);
        const auto it = counts_.find(pack(ctx));
        if (it == counts_.end()) {
            const double u = 1.0 / static_cast<double>(vocab_size_);
            for (double& p : dist) p = u;
            return dist;
        }
        const Entry& e = it->second;
        const double denom = static_cast<double>(e.total) + smoothing_ * vocab_size_;
        const double base = smoothing_ / denom;
        for (double& p : dist) p = base;
        for (const auto& [tok, c] : e.items) dist[tok] = (c + smoothing_) / denom;
        return dist;
    }

    // Autoregressive sampling; with a scheme the watermark transform is
    // applied at its family's stage. All randomness comes from the seeded
    // stream, so (model, params, scheme) fully determine the output.
    std::vector<TokenId> generate(const GenParams& params,
                                  const SchemeConfig* scheme = nullptr) const {
        if (params.max_len < 1) raise(Errc::ConfigError, "max_len must be >= 1");
        if (params.temperature <= 0.0) raise(Errc::ConfigError, "temperature must be positive");
        SeededStream stream(mix64(params.seed ^ 0x9E4E12A7u));
        std::vector<TokenId> all(params.prompt);
        std::vector<TokenId> out;
        out.reserve(params.max_len);
        for (std::size_t step = 0; step < params.max_len; ++step) {
            std::vector<double> dist = next_dist(all);
            if (params.temperature != 1.0) apply_temperature(dist, params.temperature);
            TokenId next = 0;
            if (scheme == nullptr) {
                next = sample_from(dist, stream.next_unit());
            } else {
                std::vector<TokenId> ctx_tail;
                const std::size_t h = scheme->h;
                for (std::size_t i = (all.size() > h ? all.size() - h : 0); i < all.size(); ++i)
                    ctx_tail.push_back(all[i]);
                const WatermarkKey key = derive_key(*scheme, ctx_tail);
                switch (scheme->family) {
                    case Family::GreenList: {
                        // Equivalent to adding delta to green logits
                        // before the softmax.
                        const double boost = std::exp(scheme->delta);
                        double total = 0.0;
                        for (std::size_t v = 0; v < dist.size(); ++v) {
                            if (is_green(key, static_cast<TokenId>(v), scheme->gamma))
                                dist[v] *= boost;
                            total += dist[v];
                        }
                        for (double& p : dist) p /= total;
                        next = sample_from(dist, stream.next_unit());
                        break;
                    }
                    case Family::Reweight: {
                        const auto rw = reweight_dist(dist, key, scheme->gamma, scheme->beta);
                        next = sample_from(rw, stream.next_unit());
                        break;
                    }
                    case Family::ScoreSampling:
                        next = score_sample(dist, key, scheme->K, stream);
                        break;
                }
            }
            all.push_back(next);
            out.push_back(next);
        }
        return out;
    }

    double perplexity(const std::vector<TokenId>& text) const {
        if (text.empty()) raise(Errc::EmptyText, "perplexity of empty text");
        double nll = 0.0;
        std::vector<TokenId> prefix;
        for (const TokenId tok : text) {
            const auto dist = next_dist(prefix);
            nll -= std::log(std::max(dist[tok], 1e-300));
            prefix.push_back(tok);
        }
        return std::exp(nll / static_cast<double>(text.size()));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = kFormatVersion;
        j["order"] = order_;
        j["smoothing"] = smoothing_;
        j["vocab_size"] = vocab_size_;
        j["vocab_ref"] = vocab_ref_;
        // Contexts emitted in sorted order for reproducible files.
        std::map<std::string, const Entry*> sorted;
        for (const auto& [key, e] : counts_) sorted.emplace(key, &e);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& [key, e] : sorted) {
            nlohmann::json row;
            row["ctx"] = unpack(key);
            nlohmann::json items = nlohmann::json::array();
            for (const auto& [tok, c] : e->items) items.push_back({tok, c});
            row["counts"] = items;
            rows.push_back(row);
        }
        j["table"] = rows;
        return j;
    }

    static NgramModel from_json(const nlohmann::json& j) {
        if (!j.contains("version") || j["version"].get<int>() != kFormatVersion)
            raise(Errc::ConfigError, "unsupported lm file version");
        NgramModel m;
        m.order_ = j.at("order").get<std::uint32_t>();
        m.smoothing_ = j.at("smoothing").get<double>();
        m.vocab_size_ = j.at("vocab_size").get<std::uint32_t>();
        m.vocab_ref_ = j.value("vocab_ref", std::string());
        for (const auto& row : j.at("table")) {
            std::vector<TokenId> ctx = row.at("ctx").get<std::vector<TokenId>>();
            Entry e;
            e.total = 0;
            for (const auto& item : row.at("counts")) {
                e.items.emplace_back(item.at(0).get<TokenId>(), item.at(1).get<std::uint32_t>());
                e.total += e.items.back().second;
            }
            m.counts_.emplace(pack(ctx), std::move(e));
        }
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
        f << to_json().dump() << "\n";
    }

    static NgramModel load(const std::string& path) {
        std::ifstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot read lm file " + path);
        nlohmann::json j;
        f >> j;
        return from_json(j);
    }

private:
    struct Entry {
        std::uint64_t total = 0;
        std::vector<std::pair<TokenId, std::uint32_t>> items;
    };

    static std::string pack(const std::vector<TokenId>& ctx) {
        std::string key;
        key.reserve(ctx.size() * 4);
        for (TokenId id : ctx)
            for (int s = 0; s < 32; s += 8) key.push_back(static_cast<char>((id >> s) & 0xFF));
        return key;
    }

    static std::vector<TokenId> unpack(const std::string& key) {
        std::vector<TokenId> ctx(key.size() / 4, 0);
        for (std::size_t i = 0; i < ctx.size(); ++i)
            for (int s = 0; s < 4; ++s)
                ctx[i] |= static_cast<TokenId>(static_cast<unsigned char>(key[i * 4 + s]))
                          << (8 * s);
        return ctx;
    }

    static void apply_temperature(std::vector<double>& dist, double t) {
        double total = 0.0;
        for (double& p : dist) {
            p = (p > 0.0) ? std::pow(p, 1.0 / t) : 0.0;
            total += p;
        }
        if (total <= 0.0) raise(Errc::DegenerateDistribution, "temperature flattened all mass");
        for (double& p : dist) p /= total;
    }

    std::uint32_t order_ = 3;
    double smoothing_ = 0.01;
    std::uint32_t vocab_size_ = 0;
    std::string vocab_ref_;
    std::unordered_map<std::string, Entry> counts_;
};

}  // namespace wmlab
