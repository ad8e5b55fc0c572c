#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wmlab/mix.hpp"

namespace wmlab {

// Deterministic synthetic-corpus generator: a seeded template grammar
// over small word banks. Bank sizes and slot layout are balanced so that
// an order-3 model trained on the output sees every reachable context
// often enough to avoid the uniform backoff during generation, while
// sampled positions still carry a few bits of entropy each.

namespace grammar {

// Banks are built from synonym pairs so the shipped lexicon can swap any
// content word for another in-corpus word; replacements then stay single
// trained tokens instead of splintering into subword pieces.
inline const std::vector<std::string>& persons() {
    static const std::vector<std::string> v = {
        "teacher", "tutor",    "doctor",  "medic",   "farmer",  "rancher",
        "writer",  "scribe",   "sailor",  "mariner", "merchant", "trader",
        "student", "pupil",    "keeper",  "warden"};
    return v;
}

inline const std::vector<std::string>& things() {
    static const std::vector<std::string> v = {
        "house",  "home",     "boat",    "vessel",  "letter", "note",
        "garden", "yard",     "bridge",  "crossing", "wagon",  "cart",
        "basket", "hamper",   "lantern", "lamp"};
    return v;
}

inline const std::vector<std::string>& places() {
    static const std::vector<std::string> v = {
        "harbor",  "port",    "valley",  "hollow",  "meadow", "pasture",
        "island",  "isle",    "castle",  "fortress", "village", "hamlet",
        "library", "archive", "kitchen", "pantry"};
    return v;
}

inline const std::vector<std::string>& adjectives() {
    static const std::vector<std::string> v = {
        "large", "huge",  "small",  "tiny", "ancient", "old",
        "quiet", "calm",  "bright", "shiny", "narrow", "slim",
        "heavy", "hefty", "gentle", "mild"};
    return v;
}

inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {
        "carried", "hauled",   "painted", "decorated", "watched", "observed",
        "repaired", "mended",  "visited", "toured",    "crossed", "traversed",
        "opened",  "unlocked", "cleaned", "scrubbed"};
    return v;
}

inline const std::vector<std::string>& adverbs() {
    static const std::vector<std::string> v = {
        "quickly", "swiftly", "slowly", "steadily", "quietly", "softly",
        "carefully", "cautiously", "rarely", "seldom", "gladly", "happily"};
    return v;
}

inline const std::vector<std::string>& preps() {
    static const std::vector<std::string> v = {"near", "beside", "behind", "beyond",
                                               "under", "beneath", "along", "across"};
    return v;
}

inline const std::vector<std::string>& times() {
    static const std::vector<std::string> v = {"morning", "dawn", "evening", "dusk",
                                               "winter", "midwinter", "summer", "midsummer"};
    return v;
}

inline const std::vector<std::string>& links() {
    static const std::vector<std::string> v = {"then", "next", "often", "frequently",
                                               "still", "yet",  "once", "formerly"};
    return v;
}

// Two-way glue slots keep a little entropy on the function words
// without blowing up the context space of the n-gram model.
inline const std::vector<std::string>& dets() {
    static const std::vector<std::string> v = {"the", "a"};
    return v;
}

inline const std::vector<std::string>& auxs() {
    static const std::vector<std::string> v = {"had", "once"};
    return v;
}

inline const std::vector<std::string>& modals() {
    static const std::vector<std::string> v = {"would", "could"};
    return v;
}

inline const std::vector<std::string>& copulas() {
    static const std::vector<std::string> v = {"was", "seemed"};
    return v;
}

inline const std::map<std::string, const std::vector<std::string>*>& slots() {
    static const std::map<std::string, const std::vector<std::string>*> m = {
        {"person", &persons()},   {"thing", &things()},   {"place", &places()},
        {"adj", &adjectives()},   {"verb", &verbs()},     {"adv", &adverbs()},
        {"prep", &preps()},       {"time", &times()},     {"link", &links()},
        {"det", &dets()},         {"aux", &auxs()},       {"modal", &modals()},
        {"cop", &copulas()},
    };
    return m;
}

// Patterns keep at most two slots adjacent between fixed glue words so
// every 3-token window stays within a few hundred variants; longer slot
// runs would starve the n-gram counts and push generation into the
// uniform backoff.
inline const std::vector<std::string>& patterns() {
    static const std::vector<std::string> v = {
        "{det} {adj} {person} {aux} {link} {verb} {det} {adj} {thing} down {prep} the {place} .",
        "{det} {adj} {person} went {adv} along and {verb} the {thing} near {det} {place} .",
        "in the {time} {det} {person} {modal} {link} {verb} a {thing} out {prep} the {place} .",
        "{det} {person} from the {place} {aux} {adv} {verb} {det} {adj} {thing} .",
        "every {time} a {person} {modal} {link} {verb} the {thing} kept {prep} {det} {place} .",
        "{det} {adj} {thing} set {prep} the {place} {cop} {adv} {verb} by a {person} .",
        "one {time} {det} {adj} {person} then {adv} {verb} {det} {adj} {thing} .",
        "a {person} and a {person} {aux} {link} {verb} the {thing} held {prep} the {place} .",
        "{det} {thing} in the {place} {cop} {adj} and the {person} just {adv} {verb} it .",
        "no {person} ever {verb} such a {adj} {thing} out {prep} {det} {place} .",
        "when the {time} came {det} {person} {aux} {adv} {verb} the {adj} {thing} .",
        "{det} {person} {prep} the {place} {modal} {link} {verb} a {adj} {thing} .",
    };
    return v;
}

}  // namespace grammar

inline std::string generate_sentence(SeededStream& stream) {
    const auto& pats = grammar::patterns();
    const auto& slot_map = grammar::slots();
    const std::size_t pattern_idx = stream.next_below(pats.size());
    const std::string& pat = pats[pattern_idx];
    std::string out;
    std::size_t i = 0;
    std::size_t slot_occurrence = 0;
    while (i < pat.size()) {
        if (pat[i] == '{') {
            const auto close = pat.find('}', i);
            std::string name = pat.substr(i + 1, close - i - 1);
            auto it = slot_map.find(name);
            if (it == slot_map.end()) {
                // Unknown slot names fall back to the thing bank; keeps
                // pattern typos harmless.
                it = slot_map.find("thing");
            }
            const auto& bank = *it->second;
            const std::size_t n = bank.size();
            // Alternate narrow and open slots: narrow ones draw from a
            // fixed 4-word subset of the bank (dense n-gram counts,
            // moderate per-step entropy), open ones from the whole bank
            // (keeps a global green list useful). The parity alternation
            // means adjacent slots never pair two open draws in one
            // 3-token window.
            const bool open_slot = (slot_occurrence % 2) == 1;
            if (n <= 4 || open_slot) {
                out += bank[stream.next_below(n)];
            } else {
                const std::size_t stride = (n % 5 != 0) ? 5 : 3;
                const std::size_t base = pattern_idx * 7 + slot_occurrence * 3;
                const std::size_t draw = stream.next_below(4);
                out += bank[(base + draw * stride) % n];
            }
            ++slot_occurrence;
            i = close + 1;
        } else {
            out.push_back(pat[i]);
            ++i;
        }
    }
    return out;
}

// Generates `sentences` space-joined template sentences, newline every
// few sentences so the corpus looks like ordinary text lines.
inline std::string generate_corpus(std::uint64_t seed, std::size_t sentences) {
    SeededStream stream(mix64(seed ^ 0xC09F05u));
    std::string out;
    out.reserve(sentences * 72);
    for (std::size_t i = 0; i < sentences; ++i) {
        if (i > 0) out.push_back(i % 8 == 7 ? '\n' : ' ');
        out += generate_sentence(stream);
    }
    out.push_back('\n');
    return out;
}

}  // namespace wmlab
