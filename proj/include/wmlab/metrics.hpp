#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wmlab/detector.hpp"
#include "wmlab/error.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/text.hpp"

namespace wmlab {

// Levenshtein distance over any comparable sequence.
template <class T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Character edit distance; multi-byte characters count as one symbol.
inline std::size_t edit_distance_chars(const std::string& a, const std::string& b) {
    return levenshtein(to_codepoints(a), to_codepoints(b));
}

inline std::size_t edit_distance_tokens(const std::vector<TokenId>& a,
                                        const std::vector<TokenId>& b) {
    return levenshtein(a, b);
}

// Watermark score dropping rate, normalized by the dataset score span.
inline double wdr(double score_before, double score_after, const DatasetStats& stats) {
    if (!(stats.s_w_max > stats.s_min))
        raise(Errc::ConfigError, "dataset stats span must be positive");
    return (score_before - score_after) / (stats.s_w_max - stats.s_min);
}

// Fraction of initially-watermarked inputs no longer detected.
inline double asr(const std::vector<bool>& verdict_after) {
    if (verdict_after.empty()) return 0.0;
    std::size_t evaded = 0;
    for (bool v : verdict_after) evaded += v ? 0 : 1;
    return static_cast<double>(evaded) / static_cast<double>(verdict_after.size());
}

// AUC as the Mann-Whitney statistic: P(pos > neg) + 0.5 P(pos == neg).
inline double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        raise(Errc::InsufficientSamples, "auc needs both positive and negative scores");
    struct Item {
        double s;
        bool pos;
    };
    std::vector<Item> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.push_back({s, true});
    for (double s : neg_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.s < b.s; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].s == all[i].s) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].pos) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(pos_scores.size());
    const double nn = static_cast<double>(neg_scores.size());
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

// Second route: trapezoidal integration of the ROC curve obtained by
// sliding the threshold. Kept independent of the rank route so the two
// can be cross-checked.
inline double auc_roc(std::vector<double> pos, std::vector<double> neg) {
    if (pos.empty() || neg.empty())
        raise(Errc::InsufficientSamples, "auc needs both positive and negative scores");
    std::sort(pos.begin(), pos.end(), std::greater<double>());
    std::sort(neg.begin(), neg.end(), std::greater<double>());
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    std::size_t ip = 0, in = 0;
    double tpr = 0.0, fpr = 0.0, area = 0.0;
    while (ip < pos.size() || in < neg.size()) {
        double thr;
        if (ip < pos.size() && in < neg.size())
            thr = std::max(pos[ip], neg[in]);
        else if (ip < pos.size())
            thr = pos[ip];
        else
            thr = neg[in];
        std::size_t dp = 0, dn = 0;
        while (ip < pos.size() && pos[ip] == thr) {
            ++ip;
            ++dp;
        }
        while (in < neg.size() && neg[in] == thr) {
            ++in;
            ++dn;
        }
        const double new_tpr = tpr + static_cast<double>(dp) / np;
        const double new_fpr = fpr + static_cast<double>(dn) / nn;
        area += (new_fpr - fpr) * (tpr + new_tpr) / 2.0;
        tpr = new_tpr;
        fpr = new_fpr;
    }
    return area;
}

namespace detail {

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string w;
    while (iss >> w) out.push_back(w);
    return out;
}

}  // namespace detail

// BLEU-4 with uniform weights and brevity penalty over whitespace
// tokens; a zero n-gram precision zeroes the score.
inline double bleu(const std::string& ref, const std::string& hyp) {
    const auto r = detail::whitespace_tokens(ref);
    const auto h = detail::whitespace_tokens(hyp);
    if (h.empty() || r.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<std::string>, std::size_t> ref_ngrams;
        for (std::size_t i = 0; i + n <= r.size(); ++i)
            ref_ngrams[std::vector<std::string>(r.begin() + i, r.begin() + i + n)]++;
        std::size_t match = 0, total = 0;
        std::map<std::vector<std::string>, std::size_t> used;
        for (std::size_t i = 0; i + n <= h.size(); ++i) {
            std::vector<std::string> g(h.begin() + i, h.begin() + i + n);
            ++total;
            auto it = ref_ngrams.find(g);
            if (it != ref_ngrams.end() && used[g] < it->second) {
                ++used[g];
                ++match;
            }
        }
        if (total == 0 || match == 0) return 0.0;
        log_sum += 0.25 * std::log(static_cast<double>(match) / static_cast<double>(total));
    }
    double bp = 1.0;
    if (h.size() < r.size())
        bp = std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(h.size()));
    return bp * std::exp(log_sum);
}

// ROUGE-1 F1 on whitespace tokens with clipped counts.
inline double rouge1_f1(const std::string& ref, const std::string& hyp) {
    const auto r = detail::whitespace_tokens(ref);
    const auto h = detail::whitespace_tokens(hyp);
    if (r.empty() || h.empty()) return 0.0;
    std::map<std::string, std::size_t> rc;
    for (const auto& w : r) rc[w]++;
    std::size_t overlap = 0;
    std::map<std::string, std::size_t> used;
    for (const auto& w : h) {
        auto it = rc.find(w);
        if (it != rc.end() && used[w] < it->second) {
            ++used[w];
            ++overlap;
        }
    }
    const double p = static_cast<double>(overlap) / static_cast<double>(h.size());
    const double rr = static_cast<double>(overlap) / static_cast<double>(r.size());
    if (p + rr == 0.0) return 0.0;
    return 2.0 * p * rr / (p + rr);
}

// Relative perplexity change under the victim model; negative when the
// perturbed text is more fluent.
inline double ppl_rate(const NgramModel& model, const std::vector<TokenId>& original,
                       const std::vector<TokenId>& perturbed) {
    const double before = model.perplexity(original);
    const double after = model.perplexity(perturbed);
    return (after - before) / before;
}

}  // namespace wmlab
