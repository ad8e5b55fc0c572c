#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "wmlab/defense.hpp"
#include "wmlab/error.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/mix.hpp"
#include "wmlab/perturb.hpp"
#include "wmlab/refdet.hpp"
#include "wmlab/tokenizer.hpp"

namespace wmlab {

// Black-box score oracle; the callable is expected to do its own query
// accounting (ledger charge or ref counter) before returning.
using ScoreOracle = std::function<double(const std::string&)>;

struct GAConfig {
    std::size_t iterations = 15;       // n
    std::size_t population = 100;      // p
    std::size_t parent_size = 20;      // p_s
    double loss_threshold = 0.5;       // tau_l, normalized detector threshold
    double convergence_threshold = 1e-3;  // delta_l
    double edit_weight = 1.0;          // lambda
    double max_edit_rate = 0.1;        // epsilon
    double grad_filter_alpha = 3.0;    // alpha
    double mutation_rate = 0.05;
    std::size_t elitism_count = 2;
    std::uint64_t seed = 1;

    void validate() const {
        if (iterations < 1) raise(Errc::ConfigError, "GA needs iterations >= 1");
        if (parent_size > population) raise(Errc::ConfigError, "parent_size must be <= population");
        if (parent_size < 1) raise(Errc::ConfigError, "parent_size must be >= 1");
        if (!(max_edit_rate > 0.0 && max_edit_rate <= 1.0))
            raise(Errc::ConfigError, "max_edit_rate must be in (0,1]");
    }
};

struct AttackOutcome {
    std::string perturbed_text;
    double er_token = 0.0;
    double ed_char = 0.0;
    double score_before = 0.0;   // filled by the evaluation harness
    double score_after = 0.0;    // filled by the evaluation harness
    bool verdict_after = true;   // filled by the evaluation harness
    long long queries_ref = 0;
    long long queries_ori = 0;
    std::vector<double> best_loss_trace;  // GA runs only
};

inline double asr(const std::vector<AttackOutcome>& outcomes) {
    std::vector<bool> verdicts;
    verdicts.reserve(outcomes.size());
    for (const auto& o : outcomes) verdicts.push_back(o.verdict_after);
    return asr(verdicts);
}

// Token frequencies in watermarked vs non-watermarked corpora.
struct FreqTable {
    std::map<TokenId, std::pair<std::uint64_t, std::uint64_t>> counts;  // (fq_w, fq_n)

    bool empty() const { return counts.empty(); }

    void add(TokenId id, bool watermarked) {
        auto& c = counts[id];
        (watermarked ? c.first : c.second)++;
    }

    double ratio(TokenId id) const {
        const auto it = counts.find(id);
        const double w = it == counts.end() ? 0.0 : static_cast<double>(it->second.first);
        const double n = it == counts.end() ? 0.0 : static_cast<double>(it->second.second);
        return (w + 1.0) / (n + 1.0);
    }
};

namespace detail {

inline void finish_outcome(AttackOutcome& o, const TokenSeq& seq, const std::string& perturbed,
                           std::size_t changed_positions) {
    o.perturbed_text = perturbed;
    o.er_token = seq.empty() ? 0.0
                             : static_cast<double>(changed_positions) /
                                   static_cast<double>(seq.size());
    o.ed_char = static_cast<double>(edit_distance_chars(seq.source, perturbed));
}

inline PerturbationPlan plan_from_positions(const std::vector<std::size_t>& positions,
                                            PerturbKind kind, std::uint64_t seed) {
    PerturbationPlan plan;
    plan.seed = seed;
    plan.positions = positions;
    std::sort(plan.positions.begin(), plan.positions.end());
    for (std::size_t p : plan.positions) {
        PerturbOp op;
        op.kind = kind;
        op.char_index = -1;
        plan.ops[p] = op;
    }
    return plan;
}

struct GaProblem {
    const TokenSeq* seq = nullptr;
    std::vector<std::size_t> pool;
    std::size_t budget = 0;
    std::function<PerturbationPlan(const std::vector<std::size_t>&)> make_plan;
    ScoreOracle score;
    const SynonymLexicon* lexicon = nullptr;
    bool two_stage = false;
    bool stall_rule = false;
};

struct GaResult {
    std::string best_text;
    std::vector<std::size_t> best_positions;
    std::size_t best_changed = 0;
    double best_loss = 0.0;
    std::vector<double> trace;
    long long evals = 0;
};

// Position-subset GA: bitmask individuals over the candidate pool,
// uniform crossover, flip mutation with budget repair, elitism, and
// optional two-stage loss and stall rule.
inline GaResult run_ga(const GaProblem& prob, const GAConfig& cfg) {
    cfg.validate();
    const std::size_t m = prob.seq->size();
    const std::size_t bits = prob.pool.size();
    SeededStream stream(mix64(cfg.seed ^ 0x6A5EEDu));

    using Mask = std::vector<std::uint8_t>;
    auto mask_positions = [&](const Mask& mask) {
        std::vector<std::size_t> out;
        for (std::size_t b = 0; b < bits; ++b)
            if (mask[b]) out.push_back(prob.pool[b]);
        return out;
    };
    auto sample_individual = [&] {
        Mask mask(bits, 0);
        std::vector<std::size_t> idx(bits);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t chosen : sample_positions(idx, prob.budget, stream)) mask[chosen] = 1;
        return mask;
    };

    GaResult result;
    result.best_loss = 1e300;
    struct Eval {
        double loss;
        std::string text;
        std::size_t changed;
    };
    auto evaluate = [&](const Mask& mask) {
        const auto positions = mask_positions(mask);
        const PerturbationPlan plan = prob.make_plan(positions);
        const AppliedPlan applied = apply_plan_counted(*prob.seq, plan, prob.lexicon);
        const double w = prob.score(applied.text);
        ++result.evals;
        const double e = static_cast<double>(positions.size()) / static_cast<double>(m);
        double loss;
        if (prob.two_stage)
            loss = (w > cfg.loss_threshold)
                       ? w
                       : w - cfg.edit_weight * (cfg.max_edit_rate - e);
        else
            loss = w + cfg.edit_weight * e;
        return Eval{loss, applied.text, applied.changed_positions};
    };

    std::vector<Mask> population;
    population.reserve(cfg.population);
    for (std::size_t q = 0; q < cfg.population; ++q) population.push_back(sample_individual());

    std::vector<Mask> prev_parents;
    double prev_iter_best = 0.0;
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<Eval> evals;
        evals.reserve(population.size());
        for (const Mask& mask : population) evals.push_back(evaluate(mask));
        std::vector<std::size_t> order(population.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return evals[a].loss < evals[b].loss;
        });
        const double iter_best = evals[order[0]].loss;
        if (iter_best < result.best_loss) {
            result.best_loss = iter_best;
            result.best_text = evals[order[0]].text;
            result.best_positions = mask_positions(population[order[0]]);
            result.best_changed = evals[order[0]].changed;
        }
        result.trace.push_back(result.best_loss);
        if (iter + 1 == cfg.iterations) break;

        std::vector<Mask> parents;
        parents.reserve(cfg.parent_size);
        for (std::size_t s = 0; s < cfg.parent_size; ++s) parents.push_back(population[order[s]]);
        if (prob.stall_rule && iter > 0 &&
            std::abs(iter_best - prev_iter_best) < cfg.convergence_threshold && !prev_parents.empty())
            parents = prev_parents;
        prev_iter_best = iter_best;
        prev_parents = parents;

        std::vector<Mask> next;
        next.reserve(cfg.population);
        for (std::size_t e = 0; e < cfg.elitism_count && e < population.size(); ++e)
            next.push_back(population[order[e]]);
        while (next.size() < cfg.population) {
            const Mask& a = parents[stream.next_below(parents.size())];
            const Mask& b = parents[stream.next_below(parents.size())];
            Mask child(bits, 0);
            std::size_t count = 0;
            for (std::size_t bit = 0; bit < bits; ++bit) {
                child[bit] = (stream.next() & 1) ? a[bit] : b[bit];
                if (cfg.mutation_rate > 0.0 && stream.next_unit() < cfg.mutation_rate)
                    child[bit] ^= 1;
                count += child[bit];
            }
            while (count > prob.budget) {
                std::size_t drop = stream.next_below(count);
                for (std::size_t bit = 0; bit < bits; ++bit) {
                    if (!child[bit]) continue;
                    if (drop == 0) {
                        child[bit] = 0;
                        --count;
                        break;
                    }
                    --drop;
                }
            }
            next.push_back(std::move(child));
        }
        population = std::move(next);
    }
    return result;
}

}  // namespace detail

// Uniformly random budgeted perturbation; the AC1 baseline. Consumes no
// detector queries.
inline AttackOutcome random_attack(const Vocab& vocab, const std::string& text, double eps,
                                   PerturbKind op_kind, std::uint64_t seed,
                                   const SynonymLexicon* lexicon = nullptr) {
    const TokenSeq seq = vocab.encode(text);
    SeededStream stream(mix64(seed ^ 0xA77AC4u));
    const PerturbationPlan plan = sample_random_plan(seq, eps, op_kind, stream, lexicon);
    const AppliedPlan applied = apply_plan_counted(seq, plan, lexicon);
    AttackOutcome o;
    detail::finish_outcome(o, seq, applied.text, applied.changed_positions);
    return o;
}

// Zero-feedback attack ranking tokens by their watermarked-to-plain
// frequency ratio; token mode substitutes the lowest-ratio synonym.
inline AttackOutcome frequency_attack(const Vocab& vocab, const std::string& text, double eps,
                                      const FreqTable& table, PerturbKind op_kind,
                                      const SynonymLexicon* lexicon = nullptr) {
    if (table.empty()) raise(Errc::MissingFrequencyTable, "frequency table is empty");
    const TokenSeq seq = vocab.encode(text);
    auto pool = eligible_positions(seq, op_kind, lexicon);
    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        return table.ratio(seq.ids[a]) > table.ratio(seq.ids[b]);
    });
    const std::size_t k = std::min(budget_tokens(eps, seq.size()), pool.size());
    PerturbationPlan plan;
    plan.budget_eps = eps;
    plan.positions.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(plan.positions.begin(), plan.positions.end());
    for (std::size_t p : plan.positions) {
        PerturbOp op;
        op.kind = op_kind;
        op.char_index = -1;
        if (op_kind == PerturbKind::SynonymReplace) {
            // Pick the synonym whose encoding has the smallest mean ratio.
            const std::string surface = seq.surface(p);
            auto cps = to_codepoints(surface);
            std::size_t start = 0;
            std::string prefix;
            while (start < cps.size() && is_ascii_space(cps[start])) {
                utf8_append(prefix, cps[start]);
                ++start;
            }
            std::string lower;
            for (std::size_t i = start; i < cps.size(); ++i)
                utf8_append(lower, to_lower_ascii(cps[i]));
            const auto it = lexicon->entries.find(lower);
            if (it != lexicon->entries.end() && !it->second.empty()) {
                double best = 1e300;
                std::string pick;
                for (const auto& option : it->second) {
                    const TokenSeq enc = vocab.encode(prefix + option);
                    double sum = 0.0;
                    for (TokenId id : enc.ids) sum += table.ratio(id);
                    const double mean = enc.ids.empty() ? 1e300
                                                        : sum / static_cast<double>(enc.ids.size());
                    if (mean < best) {
                        best = mean;
                        pick = option;
                    }
                }
                op.replacement = prefix + pick;
            }
        }
        plan.ops[p] = op;
    }
    const AppliedPlan applied = apply_plan_counted(seq, plan, lexicon);
    AttackOutcome o;
    detail::finish_outcome(o, seq, applied.text, applied.changed_positions);
    return o;
}

// One-shot random search: N budgeted candidates, lowest oracle score
// wins, ties to the earliest candidate.
inline AttackOutcome best_of_n(const Vocab& vocab, const std::string& text, double eps,
                               std::size_t N, PerturbKind op_kind, const ScoreOracle& scorer,
                               std::uint64_t seed, const SynonymLexicon* lexicon = nullptr,
                               bool scorer_is_original = false) {
    if (N < 1) raise(Errc::ConfigError, "best_of_n needs N >= 1");
    const TokenSeq seq = vocab.encode(text);
    const auto pool = eligible_positions(seq, op_kind, lexicon);
    const std::size_t k = std::min(budget_tokens(eps, seq.size()), pool.size());
    SeededStream stream(mix64(seed ^ 0x6A5EEDu));
    AttackOutcome o;
    double best_score = 1e300;
    std::string best_text = text;
    std::size_t best_changed = 0;
    for (std::size_t q = 0; q < N; ++q) {
        const auto positions = sample_positions(pool, k, stream);
        const PerturbationPlan plan = detail::plan_from_positions(positions, op_kind, seed);
        const AppliedPlan applied = apply_plan_counted(seq, plan, lexicon);
        const double s = scorer(applied.text);
        if (scorer_is_original) ++o.queries_ori;
        else ++o.queries_ref;
        if (s < best_score) {
            best_score = s;
            best_text = applied.text;
            best_changed = applied.changed_positions;
        }
    }
    detail::finish_outcome(o, seq, best_text, best_changed);
    return o;
}

// Algorithm: GA guided by the reference detector. High-gradient tokens
// are excluded from the search pool, the loss switches to joint
// score/edit-rate optimization once the score clears tau_l, and parents
// are frozen across near-stationary iterations.
inline AttackOutcome ga_ref_attack(const Featurizer& feat, const RefModel& model,
                                   const std::string& text, const GAConfig& cfg,
                                   PerturbKind op_kind, const SynonymLexicon* lexicon,
                                   const ScoreOracle& ref_scorer) {
    const TokenSeq seq = feat.vocab()->encode(text);
    if (seq.size() < 10) raise(Errc::TextTooShort, "GA attack needs >= 10 tokens");
    const auto grads = model.token_gradients(feat, text);
    const double cut = grads.mean + cfg.grad_filter_alpha * grads.stddev;
    detail::GaProblem prob;
    prob.seq = &seq;
    for (std::size_t p : eligible_positions(seq, op_kind, lexicon))
        if (grads.magnitude[p] <= cut) prob.pool.push_back(p);
    if (prob.pool.empty())
        raise(Errc::AllTokensFiltered, "gradient filter removed every candidate position");
    prob.budget = budget_tokens(cfg.max_edit_rate, seq.size());
    if (prob.pool.size() < prob.budget) {
        std::cerr << "[wmlab] warning: candidate pool (" << prob.pool.size()
                  << ") smaller than edit budget (" << prob.budget
                  << "); shrinking budget\n";
        prob.budget = prob.pool.size();
    }
    prob.make_plan = [&](const std::vector<std::size_t>& positions) {
        return detail::plan_from_positions(positions, op_kind, cfg.seed);
    };
    prob.score = ref_scorer;
    prob.lexicon = lexicon;
    prob.two_stage = true;
    prob.stall_rule = true;
    const auto res = detail::run_ga(prob, cfg);
    AttackOutcome o;
    o.queries_ref = res.evals;
    o.best_loss_trace = res.trace;
    detail::finish_outcome(o, seq, res.best_text, res.best_changed);
    return o;
}

// GA against the original detector itself: single-stage loss, no
// gradient filter, no stall rule; every evaluation costs one ledger
// query.
inline AttackOutcome ga_ori_attack(const Vocab& vocab, const std::string& text,
                                   const GAConfig& cfg, PerturbKind op_kind,
                                   const SynonymLexicon* lexicon, const ScoreOracle& ori_scorer) {
    const TokenSeq seq = vocab.encode(text);
    if (seq.size() < 2) raise(Errc::TextTooShort, "GA attack needs at least 2 tokens");
    detail::GaProblem prob;
    prob.seq = &seq;
    prob.pool = eligible_positions(seq, op_kind, lexicon);
    if (prob.pool.empty()) raise(Errc::AllTokensFiltered, "no usable positions");
    prob.budget = std::min(budget_tokens(cfg.max_edit_rate, seq.size()), prob.pool.size());
    prob.make_plan = [&](const std::vector<std::size_t>& positions) {
        return detail::plan_from_positions(positions, op_kind, cfg.seed);
    };
    prob.score = ori_scorer;
    prob.lexicon = lexicon;
    prob.two_stage = false;
    prob.stall_rule = false;
    const auto res = detail::run_ga(prob, cfg);
    AttackOutcome o;
    o.queries_ori = res.evals;
    o.best_loss_trace = res.trace;
    detail::finish_outcome(o, seq, res.best_text, res.best_changed);
    return o;
}

// Incremental baseline: propose one new position per round, keep the
// edit only when the predicted score strictly decreases.
inline AttackOutcome sand_attack(const Vocab& vocab, const std::string& text, double eps,
                                 std::size_t rounds, PerturbKind op_kind, std::uint64_t seed,
                                 const SynonymLexicon* lexicon, const ScoreOracle& ref_scorer) {
    const TokenSeq seq = vocab.encode(text);
    const auto pool = eligible_positions(seq, op_kind, lexicon);
    const std::size_t budget = budget_tokens(eps, seq.size());
    SeededStream stream(mix64(seed ^ 0x5A4Du));
    AttackOutcome o;
    double cur_score = ref_scorer(text);
    ++o.queries_ref;
    std::vector<std::size_t> accepted;
    std::string cur_text = text;
    std::size_t cur_changed = 0;
    std::vector<std::size_t> unused(pool);
    for (std::size_t round = 0; round < rounds; ++round) {
        if (accepted.size() >= budget || unused.empty()) break;
        const std::size_t at = stream.next_below(unused.size());
        const std::size_t pos = unused[at];
        unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(at));
        auto candidate = accepted;
        candidate.push_back(pos);
        const PerturbationPlan plan = detail::plan_from_positions(candidate, op_kind, seed);
        const AppliedPlan applied = apply_plan_counted(seq, plan, lexicon);
        const double s = ref_scorer(applied.text);
        ++o.queries_ref;
        if (s < cur_score) {
            cur_score = s;
            accepted = std::move(candidate);
            cur_text = applied.text;
            cur_changed = applied.changed_positions;
        }
    }
    detail::finish_outcome(o, seq, cur_text, cur_changed);
    return o;
}

// Transfer attack ranking tokens by surrogate gradient magnitude and
// perturbing greedily until the predicted score clears the normalized
// threshold or the budget is spent.
inline AttackOutcome gradient_rank_attack(const Featurizer& feat, const RefModel& model,
                                          const std::string& text, double eps, double tau_norm,
                                          PerturbKind op_kind, const SynonymLexicon* lexicon,
                                          const ScoreOracle& ref_scorer) {
    const TokenSeq seq = feat.vocab()->encode(text);
    const auto grads = model.token_gradients(feat, text);
    std::vector<std::size_t> order(seq.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grads.magnitude[a] > grads.magnitude[b];
    });
    const std::size_t budget = budget_tokens(eps, seq.size());
    AttackOutcome o;
    std::vector<std::size_t> chosen;
    std::map<std::size_t, PerturbOp> ops;
    std::string cur_text = text;
    std::size_t cur_changed = 0;
    const CharTables& tables = default_char_tables();
    for (std::size_t t : order) {
        if (chosen.size() >= budget) break;
        PerturbOp op;
        op.char_index = -1;
        const std::string surface = seq.surface(t);
        if (op_kind != PerturbKind::SynonymReplace && can_apply_char_op(surface, op_kind, tables)) {
            op.kind = op_kind;
        } else if (lexicon != nullptr && synonym_replace(surface, *lexicon, 0).has_value()) {
            op.kind = PerturbKind::SynonymReplace;
        } else {
            continue;
        }
        chosen.push_back(t);
        ops[t] = op;
        PerturbationPlan plan;
        plan.positions = chosen;
        std::sort(plan.positions.begin(), plan.positions.end());
        plan.ops = ops;
        plan.seed = mix64(0x6EAD1EULL ^ fnv1a64(text));
        const AppliedPlan applied = apply_plan_counted(seq, plan, lexicon);
        const double s = ref_scorer(applied.text);
        ++o.queries_ref;
        cur_text = applied.text;
        cur_changed = applied.changed_positions;
        if (s < tau_norm) break;
    }
    detail::finish_outcome(o, seq, cur_text, cur_changed);
    return o;
}

// Compound menu: the enumerated pairs plus one homoglyph-free pair so
// spell-correction can also be sidestepped.
inline std::vector<PerturbOp> default_compound_menu() {
    auto compound = [](std::initializer_list<PerturbKind> kinds) {
        PerturbOp op;
        op.kind = PerturbKind::Compound;
        op.sub_ops = kinds;
        return op;
    };
    return {
        compound({PerturbKind::Swap, PerturbKind::Homoglyph}),
        compound({PerturbKind::Typo, PerturbKind::Homoglyph}),
        compound({PerturbKind::InsertZeroWidth, PerturbKind::Homoglyph}),
        compound({PerturbKind::Swap, PerturbKind::Typo}),
        compound({PerturbKind::Delete, PerturbKind::Typo}),
    };
}

// Two-level adaptive attack: per position, the compound whose defended
// form stays closest to the perturbed form (hardest to revert); over
// positions, the Alg-1 style GA scored on the defended text.
inline AttackOutcome adaptive_compound_ga(const Featurizer& feat, const RefModel& model,
                                          const std::string& text, DefenseKind defense,
                                          const DefenseContext& ctx, const GAConfig& cfg,
                                          const std::vector<PerturbOp>& compound_menu,
                                          const ScoreOracle& ref_scorer) {
    if (compound_menu.empty()) raise(Errc::ConfigError, "compound menu is empty");
    const TokenSeq seq = feat.vocab()->encode(text);
    if (seq.size() < 10) raise(Errc::TextTooShort, "GA attack needs >= 10 tokens");

    // Inner optimization, once per position: minimize ED_C between the
    // perturbed surface and its defended image; ties by menu order.
    std::map<std::size_t, PerturbOp> chosen_op;
    std::vector<std::size_t> feasible;
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const std::string surface = seq.surface(p);
        if (char_count(surface) < 3) continue;
        bool found = false;
        std::size_t best_ed = SIZE_MAX;
        PerturbOp best_op;
        for (const PerturbOp& op : compound_menu) {
            std::string perturbed;
            try {
                perturbed = compound_perturb_token(surface, op);
            } catch (const Error&) {
                continue;  // sub-op not applicable to this surface
            }
            const std::string defended = apply_defense(perturbed, defense, ctx);
            const std::size_t ed = edit_distance_chars(perturbed, defended);
            if (ed < best_ed) {
                best_ed = ed;
                best_op = op;
                found = true;
            }
        }
        if (found) {
            chosen_op[p] = best_op;
            feasible.push_back(p);
        }
    }
    if (feasible.empty()) raise(Errc::AllTokensFiltered, "no position admits a compound");

    const auto grads = model.token_gradients(feat, text);
    const double cut = grads.mean + cfg.grad_filter_alpha * grads.stddev;
    detail::GaProblem prob;
    prob.seq = &seq;
    for (std::size_t p : feasible)
        if (grads.magnitude[p] <= cut) prob.pool.push_back(p);
    if (prob.pool.empty())
        raise(Errc::AllTokensFiltered, "gradient filter removed every candidate position");
    prob.budget = std::min(budget_tokens(cfg.max_edit_rate, seq.size()), prob.pool.size());
    prob.make_plan = [&](const std::vector<std::size_t>& positions) {
        PerturbationPlan plan;
        plan.seed = cfg.seed;
        plan.positions = positions;
        std::sort(plan.positions.begin(), plan.positions.end());
        for (std::size_t p : plan.positions) plan.ops[p] = chosen_op.at(p);
        return plan;
    };
    // Fitness is the surrogate's view of the *defended* text, since the
    // defended detector is what the attack must beat.
    prob.score = [&](const std::string& t) { return ref_scorer(apply_defense(t, defense, ctx)); };
    prob.lexicon = nullptr;
    prob.two_stage = true;
    prob.stall_rule = true;
    const auto res = detail::run_ga(prob, cfg);
    AttackOutcome o;
    o.queries_ref = res.evals;
    o.best_loss_trace = res.trace;
    detail::finish_outcome(o, seq, res.best_text, res.best_changed);
    return o;
}

}  // namespace wmlab
