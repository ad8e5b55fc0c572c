#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmlab/error.hpp"
#include "wmlab/text.hpp"

namespace wmlab {

using TokenId = std::uint32_t;

// Sentinel used to left-pad watermark key contexts. It is the base token
// for byte 0x00, which never occurs in text corpora.
inline constexpr TokenId kPadTokenId = 0;

// Characters outside the training alphabet encode as one standalone
// token each, with ids offset by this base; they can never participate
// in merges, which is what forces the token splits char-level attacks
// rely on.
inline constexpr TokenId kFallbackBase = 1u << 20;

inline bool is_fallback_id(TokenId id) {
    return id >= kFallbackBase && id < kFallbackBase + 0x110000u;
}

struct TokenSpan {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
};

// Tokenized text with span-to-character bookkeeping. Spans are measured
// in characters (multi-byte characters count as one). When byte fallback
// splits one character across several tokens, the first fragment carries
// the character and the continuation fragments get empty spans, so spans
// stay contiguous, non-overlapping, and covering.
struct TokenSeq {
    std::vector<TokenId> ids;
    std::vector<TokenSpan> spans;       // character spans
    std::vector<TokenSpan> byte_spans;  // byte spans into `source`
    std::string source;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }

    std::string surface(std::size_t i) const {
        const auto& b = byte_spans[i];
        return source.substr(b.begin, b.end - b.begin);
    }
};

namespace detail {

// GPT-2 style pre-tokenization over code points: a chunk is an optional
// single leading space followed by a maximal run of letters, digits, or
// "other" characters; whitespace runs are kept apart. Merges never cross
// chunk boundaries.
enum class CharClass { Space, OtherWs, Letter, Digit, Other };

inline CharClass char_class(char32_t cp) {
    if (cp == ' ') return CharClass::Space;
    if (is_ascii_space(cp)) return CharClass::OtherWs;
    if (is_ascii_letter(cp)) return CharClass::Letter;
    if (is_ascii_digit(cp)) return CharClass::Digit;
    return CharClass::Other;
}

struct ByteRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
};

inline std::vector<ByteRange> pretokenize(const std::vector<Utf8Char>& chars,
                                          std::uint32_t total_bytes) {
    std::vector<ByteRange> chunks;
    const std::size_t n = chars.size();
    std::size_t i = 0;
    auto byte_at = [&](std::size_t idx) {
        return idx < n ? chars[idx].offset : total_bytes;
    };
    while (i < n) {
        const CharClass c0 = char_class(chars[i].cp);
        std::size_t start = i;
        if (c0 == CharClass::Space && i + 1 < n) {
            const CharClass c1 = char_class(chars[i + 1].cp);
            if (c1 == CharClass::Letter || c1 == CharClass::Digit || c1 == CharClass::Other) {
                std::size_t j = i + 1;
                while (j < n && char_class(chars[j].cp) == c1) ++j;
                chunks.push_back({static_cast<std::uint32_t>(byte_at(start)),
                                  static_cast<std::uint32_t>(byte_at(j))});
                i = j;
                continue;
            }
        }
        if (c0 == CharClass::Space || c0 == CharClass::OtherWs) {
            std::size_t j = i;
            while (j < n && (char_class(chars[j].cp) == CharClass::Space ||
                             char_class(chars[j].cp) == CharClass::OtherWs))
                ++j;
            // Leave a trailing plain space to attach to the next word.
            if (j < n && j - i >= 2 && chars[j - 1].cp == ' ') {
                const CharClass cn = char_class(chars[j].cp);
                if (cn == CharClass::Letter || cn == CharClass::Digit || cn == CharClass::Other)
                    --j;
            }
            chunks.push_back({static_cast<std::uint32_t>(byte_at(start)),
                              static_cast<std::uint32_t>(byte_at(j))});
            i = j;
            continue;
        }
        std::size_t j = i;
        while (j < n && char_class(chars[j].cp) == c0) ++j;
        chunks.push_back({static_cast<std::uint32_t>(byte_at(start)),
                          static_cast<std::uint32_t>(byte_at(j))});
        i = j;
    }
    return chunks;
}

struct PairHash {
    std::size_t operator()(const std::pair<TokenId, TokenId>& p) const {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32) | p.second);
    }
};

}  // namespace detail

class Vocab {
public:
    static constexpr int kFormatVersion = 1;

    // Trains byte-pair merges over the corpus. Merging stops when the
    // vocabulary is full or no adjacent pair occurs at least twice.
    static Vocab train(const std::string& corpus, std::size_t vocab_size) {
        if (corpus.empty()) raise(Errc::EmptyCorpus, "training corpus is empty");
        Vocab v;
        v.init_base();
        for (unsigned char b : corpus) v.alphabet_.insert(b);
        const std::size_t min_size = 256 + v.alphabet_.size();
        if (vocab_size < min_size)
            raise(Errc::VocabTooSmall, "vocab_size " + std::to_string(vocab_size) +
                                           " < 256 + distinct corpus bytes (" +
                                           std::to_string(min_size) + ")");

        // Distinct chunks with multiplicities.
        const auto chars = utf8_decode(corpus);
        const auto ranges = detail::pretokenize(chars, static_cast<std::uint32_t>(corpus.size()));
        std::map<std::string, std::uint64_t> chunk_count;
        for (const auto& r : ranges) chunk_count[corpus.substr(r.begin, r.end - r.begin)]++;

        struct Work {
            std::vector<TokenId> syms;
            std::uint64_t count;
        };
        std::vector<Work> work;
        work.reserve(chunk_count.size());
        for (const auto& [chunk, count] : chunk_count) {
            Work w;
            w.count = count;
            w.syms.reserve(chunk.size());
            for (unsigned char b : chunk) w.syms.push_back(b);
            work.push_back(std::move(w));
        }

        while (v.pieces_.size() < vocab_size) {
            std::map<std::pair<std::string, std::string>, std::uint64_t> pair_count;
            std::map<std::pair<std::string, std::string>, std::pair<TokenId, TokenId>> pair_ids;
            for (const auto& w : work) {
                for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
                    auto key = std::make_pair(v.pieces_[w.syms[i]], v.pieces_[w.syms[i + 1]]);
                    pair_count[key] += w.count;
                    pair_ids.emplace(key, std::make_pair(w.syms[i], w.syms[i + 1]));
                }
            }
            std::uint64_t best_count = 0;
            std::pair<std::string, std::string> best_key;
            for (const auto& [key, count] : pair_count) {
                // Ties go to the lexicographically smaller pair; the map
                // is ordered, so the first maximum wins.
                if (count > best_count) {
                    best_count = count;
                    best_key = key;
                }
            }
            if (best_count < 2) break;
            const auto [left, right] = pair_ids.at(best_key);
            const TokenId merged = v.add_merge(left, right);
            for (auto& w : work) {
                std::vector<TokenId> out;
                out.reserve(w.syms.size());
                std::size_t i = 0;
                while (i < w.syms.size()) {
                    if (i + 1 < w.syms.size() && w.syms[i] == left && w.syms[i + 1] == right) {
                        out.push_back(merged);
                        i += 2;
                    } else {
                        out.push_back(w.syms[i]);
                        ++i;
                    }
                }
                w.syms = std::move(out);
            }
        }

        // Freeze an encode cache for the chunks seen in training.
        for (const auto& [chunk, count] : chunk_count)
            v.encode_cache_.emplace(chunk, v.merge_run(chunk));
        return v;
    }

    std::size_t size() const { return pieces_.size(); }
    const std::string& piece(TokenId id) const { return pieces_.at(id); }
    const std::vector<std::pair<TokenId, TokenId>>& merges() const { return merges_; }

    bool in_alphabet(unsigned char b) const { return alphabet_.count(b) > 0; }

    // True when every byte of the character is in the training alphabet.
    bool char_in_alphabet(char32_t cp) const {
        std::string tmp;
        utf8_append(tmp, cp);
        for (unsigned char b : tmp)
            if (!in_alphabet(b)) return false;
        return true;
    }

    TokenSeq encode(const std::string& text) const {
        TokenSeq seq;
        seq.source = text;
        if (text.empty()) return seq;
        const auto chars = utf8_decode(text);
        const auto ranges = detail::pretokenize(chars, static_cast<std::uint32_t>(text.size()));

        // Character index of every byte position.
        std::vector<std::uint32_t> char_of_byte(text.size() + 1, 0);
        std::vector<std::uint8_t> is_char_begin(text.size() + 1, 0);
        for (std::size_t ci = 0; ci < chars.size(); ++ci) {
            for (std::uint32_t k = 0; k < chars[ci].size; ++k)
                char_of_byte[chars[ci].offset + k] = static_cast<std::uint32_t>(ci);
            is_char_begin[chars[ci].offset] = 1;
        }
        char_of_byte[text.size()] = static_cast<std::uint32_t>(chars.size());
        is_char_begin[text.size()] = 1;

        auto push_token = (
            [&](TokenId id, std::uint32_t byte_begin, std::uint32_t byte_len) {
                TokenSpan bs{byte_begin, byte_begin + byte_len};
                TokenSpan cs;
                cs.begin = is_char_begin[bs.begin] ? char_of_byte[bs.begin]
                                                   : char_of_byte[bs.begin] + 1;
                cs.end = is_char_begin[bs.end] ? char_of_byte[bs.end]
                                               : char_of_byte[bs.end] + 1;
                seq.ids.push_back(id);
                seq.spans.push_back(cs);
                seq.byte_spans.push_back(bs);
            });
        auto emit_run = [&](std::uint32_t begin, std::uint32_t end) {
            if (begin >= end) return;
            const std::string run = text.substr(begin, end - begin);
            const auto it = encode_cache_.find(run);
            const std::vector<TokenId> toks =
                it != encode_cache_.end() ? it->second : merge_run(run);
            std::uint32_t pos = begin;
            for (TokenId id : toks) {
                push_token(id, pos, static_cast<std::uint32_t>(pieces_[id].size()));
                pos += static_cast<std::uint32_t>(pieces_[id].size());
            }
        };

        // Within a chunk, contiguous in-alphabet bytes are merged by BPE;
        // every out-of-alphabet character becomes one fallback token.
        std::size_t ci = 0;
        for (const auto& r : ranges) {
            while (ci < chars.size() && chars[ci].offset < r.begin) ++ci;
            std::uint32_t run_begin = r.begin;
            while (ci < chars.size() && chars[ci].offset < r.end) {
                const auto& ch = chars[ci];
                bool in_alpha = true;
                for (std::uint32_t k = 0; k < ch.size; ++k)
                    if (!in_alphabet(static_cast<unsigned char>(text[ch.offset + k]))) {
                        in_alpha = false;
                        break;
                    }
                if (!in_alpha) {
                    emit_run(run_begin, ch.offset);
                    // Single bytes (including malformed UTF-8) fall back
                    // to their base byte token so decoding stays exact;
                    // valid multi-byte characters get one per-character
                    // fallback id.
                    const TokenId id = ch.size == 1
                                           ? static_cast<TokenId>(ch.cp & 0xFF)
                                           : kFallbackBase + static_cast<TokenId>(ch.cp);
                    push_token(id, ch.offset, ch.size);
                    run_begin = ch.offset + ch.size;
                }
                ++ci;
            }
            emit_run(run_begin, r.end);
        }
        return seq;
    }

    std::string decode(const std::vector<TokenId>& ids) const {
        std::string out;
        for (TokenId id : ids) {
            if (id < pieces_.size()) {
                out += pieces_[id];
            } else if (is_fallback_id(id)) {
                utf8_append(out, static_cast<char32_t>(id - kFallbackBase));
            } else {
                raise(Errc::UnknownTokenId, "token id " + std::to_string(id));
            }
        }
        return out;
    }

    std::string decode(const TokenSeq& seq) const { return decode(seq.ids); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = kFormatVersion;
        j["alphabet"] = std::vector<int>(alphabet_.begin(), alphabet_.end());
        nlohmann::json merges = nlohmann::json::array();
        for (const auto& [l, r] : merges_) merges.push_back({l, r});
        j["merges"] = merges;
        nlohmann::json pieces = nlohmann::json::array();
        for (std::size_t id = 256; id < pieces_.size(); ++id) {
            std::vector<int> bytes;
            for (unsigned char b : pieces_[id]) bytes.push_back(b);
            pieces.push_back(bytes);
        }
        j["pieces"] = pieces;
        return j;
    }

    static Vocab from_json(const nlohmann::json& j) {
        if (!j.contains("version") || j["version"].get<int>() != kFormatVersion)
            raise(Errc::ConfigError, "unsupported vocab file version");
        Vocab v;
        v.init_base();
        for (int b : j.at("alphabet")) v.alphabet_.insert(static_cast<unsigned char>(b));
        for (const auto& m : j.at("merges"))
            v.add_merge(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
        // Sanity: stored pieces must match the merge reconstruction.
        const auto& pieces = j.at("pieces");
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            std::string p;
            for (int b : pieces[i]) p.push_back(static_cast<char>(b));
            if (p != v.pieces_[256 + i])
                raise(Errc::ConfigError, "vocab pieces inconsistent with merges");
        }
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
        f << to_json().dump(2) << "\n";
    }

    static Vocab load(const std::string& path) {
        std::ifstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot read vocab file " + path);
        nlohmann::json j;
        f >> j;
        return from_json(j);
    }

private:
    void init_base() {
        pieces_.resize(256);
        for (int b = 0; b < 256; ++b) pieces_[b] = std::string(1, static_cast<char>(b));
    }

    TokenId add_merge(TokenId left, TokenId right) {
        const auto id = static_cast<TokenId>(pieces_.size());
        pieces_.push_back(pieces_.at(left) + pieces_.at(right));
        merges_.emplace_back(left, right);
        rank_.emplace(std::make_pair(left, right), static_cast<std::uint32_t>(merges_.size() - 1));
        return id;
    }

    // Applies merges to one in-alphabet byte run, lowest rank first.
    std::vector<TokenId> merge_run(const std::string& chunk) const {
        std::vector<TokenId> syms;
        syms.reserve(chunk.size());
        for (unsigned char b : chunk) syms.push_back(b);
        while (syms.size() >= 2) {
            std::uint32_t best_rank = UINT32_MAX;
            std::size_t best_at = 0;
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                auto it = rank_.find({syms[i], syms[i + 1]});
                if (it != rank_.end() && it->second < best_rank) {
                    best_rank = it->second;
                    best_at = i;
                }
            }
            if (best_rank == UINT32_MAX) break;
            const TokenId merged = 256 + best_rank;
            syms[best_at] = merged;
            syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
        }
        return syms;
    }

    std::vector<std::string> pieces_;
    std::vector<std::pair<TokenId, TokenId>> merges_;
    std::unordered_map<std::pair<TokenId, TokenId>, std::uint32_t, detail::PairHash> rank_;
    std::set<unsigned char> alphabet_;
    std::unordered_map<std::string, std::vector<TokenId>> encode_cache_;
};

}  // namespace wmlab
