#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wmlab/detector.hpp"
#include "wmlab/error.hpp"
#include "wmlab/perturb.hpp"
#include "wmlab/text.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

enum class DefenseKind { Identity, UN, DE, SC };

inline const char* defense_name(DefenseKind d) {
    switch (d) {
        case DefenseKind::Identity: return "none";
        case DefenseKind::UN: return "un";
        case DefenseKind::DE: return "de";
        case DefenseKind::SC: return "sc";
    }
    return "?";
}

inline DefenseKind defense_from(const std::string& s) {
    if (s == "none" || s.empty()) return DefenseKind::Identity;
    if (s == "un") return DefenseKind::UN;
    if (s == "de") return DefenseKind::DE;
    if (s == "sc") return DefenseKind::SC;
    raise(Errc::ConfigError, "unknown defense " + s);
}

// Wordlist with corpus frequencies backing the spell-correction defense.
struct Dictionary {
    std::map<std::string, std::uint64_t> freq;

    static Dictionary from_corpus(const std::string& corpus) {
        Dictionary d;
        std::string word;
        auto flush = [&] {
            if (!word.empty()) {
                d.freq[word]++;
                word.clear();
            }
        };
        for (char c : corpus) {
            if (c >= 'a' && c <= 'z') word.push_back(c);
            else if (c >= 'A' && c <= 'Z') word.push_back(static_cast<char>(c - 'A' + 'a'));
            else flush();
        }
        flush();
        return d;
    }

    bool contains(const std::string& w) const { return freq.count(w) > 0; }
};

// Folds confusable characters back to their canonical form; identity on
// plain ASCII and idempotent by construction.
inline std::string normalize_unicode(const std::string& text,
                                     const CharTables& tables = default_char_tables()) {
    auto cps = to_codepoints(text);
    for (auto& cp : cps) {
        const auto it = tables.normalization_map.find(cp);
        if (it != tables.normalization_map.end()) cp = it->second;
    }
    return utf8_encode(cps);
}

// Drops zero-width characters and anything outside the tokenizer
// alphabet (whitespace is kept).
inline std::string delete_anomalous(const std::string& text, const Vocab& vocab,
                                    const CharTables& tables = default_char_tables()) {
    const auto cps = to_codepoints(text);
    std::vector<char32_t> kept;
    kept.reserve(cps.size());
    for (char32_t cp : cps) {
        if (cp == tables.zero_width) continue;
        if (is_ascii_space(cp) || vocab.char_in_alphabet(cp)) kept.push_back(cp);
    }
    return utf8_encode(kept);
}

namespace detail {

// All dictionary words within Damerau-Levenshtein distance 1, collected
// by enumerating the edit neighborhood.
inline std::vector<std::string> dl1_dictionary_candidates(const std::string& lower_word,
                                                          const Dictionary& dict) {
    std::vector<std::string> found;
    auto consider = [&](const std::string& cand) {
        if (dict.contains(cand) &&
            std::find(found.begin(), found.end(), cand) == found.end())
            found.push_back(cand);
    };
    const auto cps = to_codepoints(lower_word);
    const std::size_t n = cps.size();
    for (std::size_t i = 0; i < n; ++i) {  // deletions
        std::vector<char32_t> c(cps);
        c.erase(c.begin() + static_cast<std::ptrdiff_t>(i));
        consider(utf8_encode(c));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {  // transpositions
        std::vector<char32_t> c(cps);
        std::swap(c[i], c[i + 1]);
        consider(utf8_encode(c));
    }
    for (std::size_t i = 0; i < n; ++i) {  // substitutions
        std::vector<char32_t> c(cps);
        for (char32_t r = 'a'; r <= 'z'; ++r) {
            if (r == cps[i]) continue;
            c[i] = r;
            consider(utf8_encode(c));
        }
    }
    for (std::size_t i = 0; i <= n; ++i) {  // insertions
        for (char32_t r = 'a'; r <= 'z'; ++r) {
            std::vector<char32_t> c(cps);
            c.insert(c.begin() + static_cast<std::ptrdiff_t>(i), r);
            consider(utf8_encode(c));
        }
    }
    return found;
}

}  // namespace detail

// Replaces each out-of-dictionary word by the unique most-frequent
// dictionary word within Damerau-Levenshtein distance 1; ambiguous or
// distant words stay as they are.
inline std::string spell_correct(const std::string& text, const Dictionary& dict) {
    std::string out;
    out.reserve(text.size());
    const auto cps = to_codepoints(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        if (is_ascii_space(cps[i])) {
            utf8_append(out, cps[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < cps.size() && !is_ascii_space(cps[j])) ++j;
        std::string word, lower;
        for (std::size_t k = i; k < j; ++k) {
            utf8_append(word, cps[k]);
            utf8_append(lower, to_lower_ascii(cps[k]));
        }
        std::string repl = word;
        if (!dict.contains(lower)) {
            const auto cands = detail::dl1_dictionary_candidates(lower, dict);
            std::string best;
            std::uint64_t best_freq = 0;
            bool tie = false;
            for (const auto& c : cands) {
                const std::uint64_t f = dict.freq.at(c);
                if (f > best_freq) {
                    best = c;
                    best_freq = f;
                    tie = false;
                } else if (f == best_freq && f > 0) {
                    tie = true;
                }
            }
            if (!best.empty() && !tie) {
                repl = best;
                if (!word.empty() && word[0] >= 'A' && word[0] <= 'Z')
                    repl[0] = static_cast<char>(repl[0] - 'a' + 'A');
            }
        }
        out += repl;
        i = j;
    }
    return out;
}

struct DefenseContext {
    const CharTables* tables = &default_char_tables();
    const Vocab* vocab = nullptr;       // DE needs the alphabet
    const Dictionary* dict = nullptr;   // SC needs the wordlist
};

inline std::string apply_defense(const std::string& text, DefenseKind kind,
                                 const DefenseContext& ctx) {
    switch (kind) {
        case DefenseKind::Identity: return text;
        case DefenseKind::UN: return normalize_unicode(text, *ctx.tables);
        case DefenseKind::DE:
            if (ctx.vocab == nullptr) raise(Errc::MissingArtifact, "DE defense needs a vocab");
            return delete_anomalous(text, *ctx.vocab, *ctx.tables);
        case DefenseKind::SC:
            if (ctx.dict == nullptr) raise(Errc::MissingArtifact, "SC defense needs a dictionary");
            return spell_correct(text, *ctx.dict);
    }
    raise(Errc::ConfigError, "bad defense kind");
}

// Detection behind a preprocessing defense; the defense runs on the
// provider side and consumes no attacker queries.
inline DetectionResult defended_detect(const std::string& text, const SchemeConfig& scheme,
                                       DefenseKind kind, const DefenseContext& ctx,
                                       const Vocab& vocab,
                                       const NgramModel* base_model = nullptr) {
    const std::string cleaned = apply_defense(text, kind, ctx);
    return detect(vocab.encode(cleaned), scheme, base_model);
}

}  // namespace wmlab
