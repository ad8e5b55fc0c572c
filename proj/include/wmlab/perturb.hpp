#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/mix.hpp"
#include "wmlab/text.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

enum class PerturbKind {
    Typo,
    Delete,
    Swap,
    InsertZeroWidth,
    InsertSpace,
    Homoglyph,
    SynonymReplace,
    Compound,
};

inline const char* perturb_kind_name(PerturbKind k) {
    switch (k) {
        case PerturbKind::Typo: return "typo";
        case PerturbKind::Delete: return "delete";
        case PerturbKind::Swap: return "swap";
        case PerturbKind::InsertZeroWidth: return "zwsp";
        case PerturbKind::InsertSpace: return "space";
        case PerturbKind::Homoglyph: return "homoglyph";
        case PerturbKind::SynonymReplace: return "synonym";
        case PerturbKind::Compound: return "compound";
    }
    return "?";
}

inline PerturbKind perturb_kind_from(const std::string& s) {
    if (s == "typo") return PerturbKind::Typo;
    if (s == "delete") return PerturbKind::Delete;
    if (s == "swap") return PerturbKind::Swap;
    if (s == "zwsp") return PerturbKind::InsertZeroWidth;
    if (s == "space") return PerturbKind::InsertSpace;
    if (s == "homoglyph") return PerturbKind::Homoglyph;
    if (s == "synonym") return PerturbKind::SynonymReplace;
    if (s == "compound") return PerturbKind::Compound;
    raise(Errc::ConfigError, "unknown perturbation kind " + s);
}

struct PerturbOp {
    PerturbKind kind = PerturbKind::Homoglyph;
    std::vector<PerturbKind> sub_ops;  // Compound only
    int char_index = -1;               // -1 selects the mid-character index
    std::string replacement;           // SynonymReplace with a pre-chosen word
};

// Confusable, keyboard-adjacency, and normalization tables. The
// homoglyph images are Latin-Extended code points, guaranteed outside
// the ASCII training alphabet, and the normalization map inverts them
// exactly.
struct CharTables {
    std::map<char32_t, char32_t> homoglyph_map;
    std::map<char32_t, std::vector<char32_t>> keyboard_map;
    char32_t zero_width = kZeroWidthSpace;
    std::map<char32_t, char32_t> normalization_map;

    std::uint64_t checksum() const {
        std::string canon;
        for (const auto& [k, v] : homoglyph_map) {
            utf8_append(canon, k);
            canon += ">";
            utf8_append(canon, v);
            canon += ";";
        }
        canon += "|";
        for (const auto& [k, vs] : keyboard_map) {
            utf8_append(canon, k);
            canon += ">";
            for (char32_t v : vs) utf8_append(canon, v);
            canon += ";";
        }
        canon += "|";
        for (const auto& [k, v] : normalization_map) {
            utf8_append(canon, k);
            canon += ">";
            utf8_append(canon, v);
            canon += ";";
        }
        return fnv1a64(canon);
    }

    nlohmann::json to_json() const {
        auto enc = [](char32_t c) {
            std::string s;
            utf8_append(s, c);
            return s;
        };
        nlohmann::json j;
        j["version"] = 1;
        nlohmann::json hm = nlohmann::json::object();
        for (const auto& [k, v] : homoglyph_map) hm[enc(k)] = enc(v);
        j["homoglyph_map"] = hm;
        nlohmann::json km = nlohmann::json::object();
        for (const auto& [k, vs] : keyboard_map) {
            std::string joined;
            for (char32_t v : vs) utf8_append(joined, v);
            km[enc(k)] = joined;
        }
        j["keyboard_map"] = km;
        j["zero_width"] = static_cast<std::uint32_t>(zero_width);
        nlohmann::json nm = nlohmann::json::object();
        for (const auto& [k, v] : normalization_map) nm[enc(k)] = enc(v);
        j["normalization_map"] = nm;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(checksum()));
        j["checksum"] = buf;
        return j;
    }

    static CharTables from_json(const nlohmann::json& j) {
        CharTables t;
        auto dec = [](const std::string& s) { return to_codepoints(s).at(0); };
        for (const auto& [k, v] : j.at("homoglyph_map").items())
            t.homoglyph_map[dec(k)] = dec(v.get<std::string>());
        for (const auto& [k, v] : j.at("keyboard_map").items())
            t.keyboard_map[dec(k)] = to_codepoints(v.get<std::string>());
        t.zero_width = static_cast<char32_t>(j.at("zero_width").get<std::uint32_t>());
        for (const auto& [k, v] : j.at("normalization_map").items())
            t.normalization_map[dec(k)] = dec(v.get<std::string>());
        if (j.contains("checksum")) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(t.checksum()));
            if (j["checksum"].get<std::string>() != buf)
                raise(Errc::ConfigError, "char table checksum mismatch");
        }
        return t;
    }

    static CharTables load(const std::string& path) {
        std::ifstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot read char tables " + path);
        nlohmann::json j;
        f >> j;
        return from_json(j);
    }
};

// One confusable per lowercase letter plus QWERTY same-row neighbors.
// The normalization map inverts the homoglyphs and folds a few common
// accented forms.
inline const CharTables& default_char_tables() {
    static const CharTables t = [] {
        CharTables t;
        const std::pair<char, char32_t> homoglyphs[] = {
            {'a', 0x0101}, {'b', 0x1E05}, {'c', 0x010B}, {'d', 0x1E0B}, {'e', 0x0117},
            {'f', 0x1E1F}, {'g', 0x0121}, {'h', 0x1E23}, {'i', 0x012B}, {'j', 0x0135},
            {'k', 0x1E33}, {'l', 0x1E37}, {'m', 0x1E41}, {'n', 0x1E45}, {'o', 0x014D},
            {'p', 0x1E57}, {'q', 0x024B}, {'r', 0x1E59}, {'s', 0x1E61}, {'t', 0x1E6B},
            {'u', 0x016B}, {'v', 0x1E7F}, {'w', 0x1E87}, {'x', 0x1E8B}, {'y', 0x1E8F},
            {'z', 0x017C},
        };
        for (const auto& [k, v] : homoglyphs) {
            t.homoglyph_map[static_cast<char32_t>(k)] = v;
            t.normalization_map[v] = static_cast<char32_t>(k);
        }
        const std::pair<char, const char*> rows[] = {
            {'a', "sq"}, {'b', "vn"}, {'c', "xv"}, {'d', "sf"}, {'e', "wr"}, {'f', "dg"},
            {'g', "fh"}, {'h', "gj"}, {'i', "uo"}, {'j', "hk"}, {'k', "jl"}, {'l', "k"},
            {'m', "n"},  {'n', "bm"}, {'o', "ip"}, {'p', "o"},  {'q', "wa"}, {'r', "et"},
            {'s', "ad"}, {'t', "ry"}, {'u', "yi"}, {'v', "cb"}, {'w', "qe"}, {'x', "zc"},
            {'y', "tu"}, {'z', "x"},
        };
        for (const auto& [k, vs] : rows) {
            std::vector<char32_t> neighbors;
            for (const char* p = vs; *p; ++p) neighbors.push_back(static_cast<char32_t>(*p));
            t.keyboard_map[static_cast<char32_t>(k)] = neighbors;
        }
        // Extra confusable folds beyond our own homoglyph images.
        const std::pair<char32_t, char> folds[] = {
            {0x0161, 's'}, {0x011F, 'g'}, {0x0165, 't'}, {0x00E0, 'a'}, {0x00E1, 'a'},
            {0x00E2, 'a'}, {0x00E4, 'a'}, {0x00E8, 'e'}, {0x00E9, 'e'}, {0x00EA, 'e'},
            {0x00EB, 'e'}, {0x00EC, 'i'}, {0x00ED, 'i'}, {0x00EE, 'i'}, {0x00EF, 'i'},
            {0x00F2, 'o'}, {0x00F3, 'o'}, {0x00F4, 'o'}, {0x00F6, 'o'}, {0x00F9, 'u'},
            {0x00FA, 'u'}, {0x00FB, 'u'}, {0x00FC, 'u'}, {0x00F1, 'n'}, {0x00E7, 'c'},
        };
        for (const auto& [k, v] : folds) t.normalization_map[k] = static_cast<char32_t>(v);
        return t;
    }();
    return t;
}

// Index of the character edited in "mid-character" mode; guarantees a
// nonempty prefix and suffix.
inline std::size_t mid_char_index(const std::string& token_surface) {
    const auto len = char_count(token_surface);
    if (len < 3) raise(Errc::TokenTooShort, "mid-character edit needs length >= 3");
    return len / 2;
}

namespace detail {

inline std::size_t min_len_for(PerturbKind k) {
    switch (k) {
        case PerturbKind::Typo:
        case PerturbKind::Delete:
        case PerturbKind::Homoglyph: return 3;
        case PerturbKind::Swap: return 2;
        case PerturbKind::InsertZeroWidth:
        case PerturbKind::InsertSpace: return 1;
        default: return 1;
    }
}

}  // namespace detail

// True when `kind` can act on the mid character of this surface; used by
// attack planners to resample unusable positions.
inline bool can_apply_char_op(const std::string& surface, PerturbKind kind,
                              const CharTables& tables) {
    const auto cps = to_codepoints(surface);
    if (cps.size() < 3) return false;  // attacks edit mid-token only
    const std::size_t i = cps.size() / 2;
    switch (kind) {
        case PerturbKind::Homoglyph: return tables.homoglyph_map.count(cps[i]) > 0;
        case PerturbKind::Typo: return tables.keyboard_map.count(to_lower_ascii(cps[i])) > 0;
        case PerturbKind::Swap: return i + 1 < cps.size();
        case PerturbKind::Delete:
        case PerturbKind::InsertZeroWidth:
        case PerturbKind::InsertSpace: return true;
        default: return false;
    }
}

// Applies exactly one character-level edit. Homoglyph preserves the
// character count, Delete shrinks it by one, the insert ops grow it by
// one, Swap permutes two adjacent characters.
inline std::string char_perturb_token(const std::string& token_surface, const PerturbOp& op) {
    auto cps = to_codepoints(token_surface);
    const std::size_t len = cps.size();
    if (len < detail::min_len_for(op.kind))
        raise(Errc::TokenTooShort, std::string(perturb_kind_name(op.kind)) + " on \"" +
                                       token_surface + "\"");
    std::size_t i;
    if (op.char_index >= 0) {
        i = static_cast<std::size_t>(op.char_index);
        if (i >= len) raise(Errc::PlanOutOfRange, "char index past end of token");
    } else {
        i = (len >= 3) ? len / 2 : 0;
    }
    const CharTables& tables = default_char_tables();
    switch (op.kind) {
        case PerturbKind::Typo: {
            const char32_t lower = to_lower_ascii(cps[i]);
            auto it = tables.keyboard_map.find(lower);
            if (it == tables.keyboard_map.end() || it->second.empty())
                raise(Errc::ConfigError, "no keyboard neighbor for this character");
            char32_t repl = it->second.front();
            if (cps[i] != lower) repl = repl - 'a' + 'A';
            cps[i] = repl;
            break;
        }
        case PerturbKind::Delete:
            cps.erase(cps.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        case PerturbKind::Swap:
            if (i + 1 >= len) raise(Errc::PlanOutOfRange, "swap needs a right neighbor");
            std::swap(cps[i], cps[i + 1]);
            break;
        case PerturbKind::InsertZeroWidth:
            cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(i), tables.zero_width);
            break;
        case PerturbKind::InsertSpace:
            cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(i), U' ');
            break;
        case PerturbKind::Homoglyph: {
            auto it = tables.homoglyph_map.find(cps[i]);
            if (it == tables.homoglyph_map.end())
                raise(Errc::ConfigError, "no homoglyph for this character");
            cps[i] = it->second;
            break;
        }
        default:
            raise(Errc::ConfigError, "not a character-level op");
    }
    return utf8_encode(cps);
}

// Sub-ops applied in order, each at the mid index recomputed after the
// previous edit.
inline std::string compound_perturb_token(const std::string& token_surface,
                                          const PerturbOp& compound) {
    if (compound.kind != PerturbKind::Compound)
        raise(Errc::ConfigError, "compound_perturb_token needs a Compound op");
    if (compound.sub_ops.empty() || compound.sub_ops.size() > 3)
        raise(Errc::ConfigError, "compound takes 1 to 3 sub ops");
    if (char_count(token_surface) < 3)
        raise(Errc::TokenTooShort, "compound on \"" + token_surface + "\"");
    std::string cur = token_surface;
    for (PerturbKind k : compound.sub_ops) {
        PerturbOp sub;
        sub.kind = k;
        sub.char_index = -1;
        cur = char_perturb_token(cur, sub);
    }
    return cur;
}

// Static synonym table; lookups are case-preserving and NoSynonym is
// signalled by an empty optional.
struct SynonymLexicon {
    std::map<std::string, std::vector<std::string>> entries;

    std::uint64_t checksum() const {
        std::string canon;
        for (const auto& [k, vs] : entries) {
            canon += k;
            canon += ">";
            for (const auto& v : vs) {
                canon += v;
                canon += ",";
            }
            canon += ";";
        }
        return fnv1a64(canon);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = 1;
        nlohmann::json e = nlohmann::json::object();
        for (const auto& [k, vs] : entries) e[k] = vs;
        j["entries"] = e;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(checksum()));
        j["checksum"] = buf;
        return j;
    }

    static SynonymLexicon from_json(const nlohmann::json& j) {
        SynonymLexicon lex;
        for (const auto& [k, v] : j.at("entries").items())
            lex.entries[k] = v.get<std::vector<std::string>>();
        if (j.contains("checksum")) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(lex.checksum()));
            if (j["checksum"].get<std::string>() != buf)
                raise(Errc::ConfigError, "synonym lexicon checksum mismatch");
        }
        return lex;
    }

    static SynonymLexicon load(const std::string& path) {
        std::ifstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot read synonym lexicon " + path);
        nlohmann::json j;
        f >> j;
        return from_json(j);
    }
};

// Case-preserving synonym replacement; leading whitespace of the token
// surface is kept. Returns nullopt when the word has no entry.
inline std::optional<std::string> synonym_replace(const std::string& token_surface,
                                                  const SynonymLexicon& lexicon,
                                                  std::uint64_t seed) {
    auto cps = to_codepoints(token_surface);
    std::size_t start = 0;
    while (start < cps.size() && is_ascii_space(cps[start])) ++start;
    if (start == cps.size()) return std::nullopt;
    std::string word, lower;
    for (std::size_t i = start; i < cps.size(); ++i) {
        utf8_append(word, cps[i]);
        utf8_append(lower, to_lower_ascii(cps[i]));
    }
    const auto it = lexicon.entries.find(lower);
    if (it == lexicon.entries.end() || it->second.empty()) return std::nullopt;
    const auto& options = it->second;
    const std::size_t pick = mix64(seed ^ fnv1a64(lower)) % options.size();
    std::string repl = options[pick];
    if (!word.empty() && word[0] >= 'A' && word[0] <= 'Z' && !repl.empty() &&
        repl[0] >= 'a' && repl[0] <= 'z')
        repl[0] = static_cast<char>(repl[0] - 'a' + 'A');
    std::string out;
    for (std::size_t i = 0; i < start; ++i) utf8_append(out, cps[i]);
    return out + repl;
}

// Ordered set of edits against one tokenization of the source text.
// Positions index the original tokens.
struct PerturbationPlan {
    std::vector<std::size_t> positions;
    std::map<std::size_t, PerturbOp> ops;
    double budget_eps = 1.0;
    std::uint64_t seed = 0;  // drives synonym choice
};

inline std::size_t budget_tokens(double eps, std::size_t m) {
    return static_cast<std::size_t>(std::ceil(eps * static_cast<double>(m)));
}

// Positions usable by an attack in the given mode; tokens too short for
// a mid-character edit (or without a synonym) are excluded, which is the
// "skip and resample" rule.
inline std::vector<std::size_t> eligible_positions(const TokenSeq& seq, PerturbKind kind,
                                                   const SynonymLexicon* lexicon,
                                                   const CharTables& tables =
                                                       default_char_tables()) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const std::string s = seq.surface(p);
        if (kind == PerturbKind::SynonymReplace) {
            if (lexicon != nullptr && synonym_replace(s, *lexicon, 0).has_value())
                out.push_back(p);
        } else if (kind == PerturbKind::Compound) {
            if (char_count(s) >= 3) out.push_back(p);
        } else {
            if (can_apply_char_op(s, kind, tables)) out.push_back(p);
        }
    }
    return out;
}

// Draws k distinct entries from `pool` with a partial Fisher-Yates
// shuffle; the draw order is the stream's.
inline std::vector<std::size_t> sample_positions(std::vector<std::size_t> pool, std::size_t k,
                                                 SeededStream& stream) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + stream.next_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

// Budgeted uniform plan: one mid-character edit (or synonym swap) at
// each sampled position.
inline PerturbationPlan sample_random_plan(const TokenSeq& seq, double eps, PerturbKind kind,
                                           SeededStream& stream,
                                           const SynonymLexicon* lexicon = nullptr) {
    PerturbationPlan plan;
    plan.budget_eps = eps;
    plan.seed = stream.next();
    const auto pool = eligible_positions(seq, kind, lexicon);
    const std::size_t k = budget_tokens(eps, seq.size());
    plan.positions = sample_positions(pool, k, stream);
    std::sort(plan.positions.begin(), plan.positions.end());
    for (std::size_t p : plan.positions) {
        PerturbOp op;
        op.kind = kind;
        op.char_index = -1;
        plan.ops[p] = op;
    }
    return plan;
}

struct AppliedPlan {
    std::string text;
    std::size_t changed_positions = 0;  // positions whose surface differs
};

// Applies the plan right to left by span so earlier offsets stay valid.
// Regions not covered by a perturbed token are byte-identical to the
// source.
inline AppliedPlan apply_plan_counted(const TokenSeq& seq, const PerturbationPlan& plan,
                                      const SynonymLexicon* lexicon = nullptr) {
    for (std::size_t p : plan.positions)
        if (p >= seq.size()) raise(Errc::PlanOutOfRange, "position " + std::to_string(p));
    std::vector<std::size_t> order(plan.positions);
    std::sort(order.begin(), order.end(), std::greater<std::size_t>());
    AppliedPlan result;
    result.text = seq.source;
    for (std::size_t p : order) {
        const auto it = plan.ops.find(p);
        if (it == plan.ops.end()) continue;
        const PerturbOp& op = it->second;
        const std::string surface = seq.surface(p);
        std::string replacement;
        if (op.kind == PerturbKind::SynonymReplace) {
            if (!op.replacement.empty()) {
                replacement = op.replacement;
            } else {
                if (lexicon == nullptr) raise(Errc::ConfigError, "plan needs a synonym lexicon");
                const auto r = synonym_replace(surface, *lexicon, plan.seed ^ (p * 0x9E37u + 1));
                replacement = r.value_or(surface);
            }
        } else if (op.kind == PerturbKind::Compound) {
            replacement = compound_perturb_token(surface, op);
        } else {
            replacement = char_perturb_token(surface, op);
        }
        if (replacement != surface) ++result.changed_positions;
        const auto& b = seq.byte_spans[p];
        result.text.replace(b.begin, b.end - b.begin, replacement);
    }
    return result;
}

inline std::string apply_plan(const TokenSeq& seq, const PerturbationPlan& plan,
                              const SynonymLexicon* lexicon = nullptr) {
    return apply_plan_counted(seq, plan, lexicon).text;
}

}  // namespace wmlab
