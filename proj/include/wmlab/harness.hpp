#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmlab/attacks.hpp"
#include "wmlab/corpus.hpp"
#include "wmlab/defense.hpp"
#include "wmlab/detector.hpp"
#include "wmlab/error.hpp"
#include "wmlab/ledger.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/perturb.hpp"
#include "wmlab/refdet.hpp"
#include "wmlab/tokenizer.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

struct DatasetRecord {
    std::string id;
    std::string prompt;
    std::string text;
    std::string scheme;  // preset name; "none" for non-watermarked rows
    double s_w = 0.0;
    bool verdict = false;
    bool watermarked = false;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"id", id},         {"prompt", prompt},
                {"text", text},     {"scheme", scheme},
                {"s_w", s_w},       {"verdict", verdict},
                {"watermarked", watermarked}, {"seed", seed}};
    }

    static DatasetRecord from_json(const nlohmann::json& j) {
        DatasetRecord r;
        r.id = j.at("id").get<std::string>();
        r.prompt = j.value("prompt", std::string());
        r.text = j.at("text").get<std::string>();
        r.scheme = j.value("scheme", std::string());
        r.s_w = j.value("s_w", 0.0);
        r.verdict = j.value("verdict", false);
        r.watermarked = j.value("watermarked", false);
        r.seed = j.value("seed", static_cast<std::uint64_t>(0));
        return r;
    }
};

struct Dataset {
    static constexpr const char* kSchema = "wmlab.dataset.v1";

    SchemeConfig scheme;  // tau_d holds the calibrated threshold
    DatasetStats stats;
    double target_fpr = 0.01;
    std::size_t length = 100;
    std::vector<DatasetRecord> records;

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
        nlohmann::json header{{"schema", kSchema},
                              {"scheme", scheme.to_json()},
                              {"stats", {{"s_w_max", stats.s_w_max}, {"s_min", stats.s_min}}},
                              {"target_fpr", target_fpr},
                              {"length", length}};
        f << header.dump() << "\n";
        for (const auto& r : records) f << r.to_json().dump() << "\n";
    }

    static Dataset load(const std::string& path) {
        std::ifstream f(path);
        if (!f) raise(Errc::MissingArtifact, "cannot read dataset " + path);
        std::string line;
        if (!std::getline(f, line)) raise(Errc::MissingArtifact, "empty dataset " + path);
        const auto header = nlohmann::json::parse(line);
        if (header.value("schema", std::string()) != kSchema)
            raise(Errc::ConfigError, "unexpected dataset schema in " + path);
        Dataset d;
        d.scheme = SchemeConfig::from_json(header.at("scheme"));
        d.stats.s_w_max = header.at("stats").at("s_w_max").get<double>();
        d.stats.s_min = header.at("stats").at("s_min").get<double>();
        d.target_fpr = header.value("target_fpr", 0.01);
        d.length = header.value("length", static_cast<std::size_t>(100));
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            d.records.push_back(DatasetRecord::from_json(nlohmann::json::parse(line)));
        }
        return d;
    }

    std::vector<const DatasetRecord*> watermarked_positives() const {
        std::vector<const DatasetRecord*> out;
        for (const auto& r : records)
            if (r.watermarked && r.verdict) out.push_back(&r);
        return out;
    }

    std::vector<double> nonwatermarked_scores() const {
        std::vector<double> out;
        for (const auto& r : records)
            if (!r.watermarked) out.push_back(r.s_w);
        return out;
    }
};

// `count` watermarked plus `count` non-watermarked records of `length`
// tokens; scores are computed on the re-encoded text, the threshold is
// calibrated on the non-watermarked half, and (scheme, seed) reproduce
// every text bit-exactly.
inline Dataset build_dataset(const Vocab& vocab, const NgramModel& lm, SchemeConfig scheme,
                             std::size_t count, std::size_t length, std::uint64_t seed,
                             double target_fpr = 0.01) {
    if (count == 0) raise(Errc::InsufficientSamples, "dataset count must be positive");
    // The provider key is arbitrary, so each dataset seed draws its own;
    // multi-seed experiments then average over keys rather than
    // inheriting one key's hash luck.
    scheme.secret = mix64(scheme.secret ^ mix64(seed ^ 0x5EC4E7u));
    Dataset ds;
    ds.target_fpr = target_fpr;
    ds.length = length;
    SeededStream prompt_stream(mix64(seed ^ 0x9201u));
    const std::size_t prompt_len = lm.order() + 3;
    auto make_record = [&](std::size_t i, bool wm) {
        DatasetRecord r;
        r.watermarked = wm;
        r.scheme = wm ? scheme.name : "none";
        r.seed = mix64(seed ^ (2 * i + (wm ? 0 : 1)));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s-%05zu", wm ? "wm" : "nw", i);
        r.id = buf;
        const TokenSeq prompt_seq = vocab.encode(generate_sentence(prompt_stream));
        GenParams gp;
        gp.seed = r.seed;
        gp.max_len = length;
        gp.prompt.assign(prompt_seq.ids.begin(),
                         prompt_seq.ids.begin() +
                             static_cast<std::ptrdiff_t>(
                                 std::min(prompt_len, prompt_seq.ids.size())));
        const auto ids = lm.generate(gp, wm ? &scheme : nullptr);
        r.prompt = vocab.decode(gp.prompt);
        r.text = vocab.decode(ids);
        return r;
    };
    for (std::size_t i = 0; i < count; ++i) ds.records.push_back(make_record(i, true));
    for (std::size_t i = 0; i < count; ++i) ds.records.push_back(make_record(i, false));

    std::vector<double> wm_scores, nw_scores;
    for (auto& r : ds.records) {
        const auto det = detect(vocab.encode(r.text), scheme, &lm);
        r.s_w = det.global_score;
        (r.watermarked ? wm_scores : nw_scores).push_back(r.s_w);
    }
    scheme.tau_d = calibrate_threshold(nw_scores, target_fpr);
    ds.scheme = scheme;
    for (auto& r : ds.records) r.verdict = r.s_w > scheme.tau_d;
    ds.stats.s_w_max = *std::max_element(wm_scores.begin(), wm_scores.end());
    ds.stats.s_min = *std::min_element(nw_scores.begin(), nw_scores.end());
    return ds;
}

// Frequency table over token ids from watermarked and non-watermarked
// record sets (built from corpora disjoint from the attack set).
inline FreqTable build_freq_table(const Vocab& vocab, const Dataset& ds) {
    FreqTable t;
    for (const auto& r : ds.records) {
        const TokenSeq seq = vocab.encode(r.text);
        for (TokenId id : seq.ids) t.add(id, r.watermarked);
    }
    return t;
}

enum class AttackMethod { Random, Freq, BoN, GaRef, GaOri, Sand, GradRank, Adaptive };

inline const char* attack_method_name(AttackMethod m) {
    switch (m) {
        case AttackMethod::Random: return "random";
        case AttackMethod::Freq: return "freq";
        case AttackMethod::BoN: return "bon";
        case AttackMethod::GaRef: return "ga-ref";
        case AttackMethod::GaOri: return "ga-ori";
        case AttackMethod::Sand: return "sand";
        case AttackMethod::GradRank: return "gradrank";
        case AttackMethod::Adaptive: return "adaptive";
    }
    return "?";
}

inline AttackMethod attack_method_from(const std::string& s) {
    if (s == "random") return AttackMethod::Random;
    if (s == "freq") return AttackMethod::Freq;
    if (s == "bon") return AttackMethod::BoN;
    if (s == "ga-ref") return AttackMethod::GaRef;
    if (s == "ga-ori") return AttackMethod::GaOri;
    if (s == "sand") return AttackMethod::Sand;
    if (s == "gradrank") return AttackMethod::GradRank;
    if (s == "adaptive") return AttackMethod::Adaptive;
    raise(Errc::ConfigError, "unknown attack method " + s);
}

struct AttackParams {
    AttackMethod method = AttackMethod::Random;
    PerturbKind op_kind = PerturbKind::Homoglyph;
    double eps = 0.1;
    std::size_t N = 10;             // Best-of-N candidates
    std::size_t sand_rounds = 40;
    bool bon_uses_original = false;  // Appendix-style BoN against D_ori
    GAConfig ga;
    ThreatModel threat = ThreatModel::AC1;
    long long ac2_budget = 10;
    DefenseKind defense = DefenseKind::Identity;
    std::uint64_t seed = 1;

    // Threat-model validation happens before any query is spent.
    void validate() const {
        const bool needs_ori =
            method == AttackMethod::GaOri || (method == AttackMethod::BoN && bon_uses_original);
        if (needs_ori && threat == ThreatModel::AC1)
            raise(Errc::ConfigError, std::string(attack_method_name(method)) +
                                         " needs detector access, not available under AC1");
    }

    bool needs_ref_model() const {
        switch (method) {
            case AttackMethod::GaRef:
            case AttackMethod::Sand:
            case AttackMethod::GradRank:
            case AttackMethod::Adaptive: return true;
            case AttackMethod::BoN: return !bon_uses_original;
            default: return false;
        }
    }
};

// Everything a cell run needs besides the dataset.
struct LabContext {
    const Vocab* vocab = nullptr;
    const NgramModel* lm = nullptr;
    const SynonymLexicon* lexicon = nullptr;
    const Dictionary* dict = nullptr;
    const CharTables* tables = &default_char_tables();
    const RefModel* ref_model = nullptr;
    const FreqTable* freq = nullptr;

    DefenseContext defense_ctx() const {
        DefenseContext ctx;
        ctx.tables = tables;
        ctx.vocab = vocab;
        ctx.dict = dict;
        return ctx;
    }
};

// Runs one attack on one record under the given threat model. The ledger
// meters attacker queries; evaluation detections (exactly two per
// record: before and after) bypass it and are tallied separately.
inline AttackOutcome attack_record(const LabContext& lab, const Dataset& ds,
                                   const DatasetRecord& record, const AttackParams& params,
                                   QueryLedger& ledger, long long* eval_detections = nullptr) {
    params.validate();
    if (params.needs_ref_model() && lab.ref_model == nullptr)
        raise(Errc::MissingArtifact, "attack needs a trained reference detector");
    const SchemeConfig& scheme = ds.scheme;
    const DefenseContext defctx = lab.defense_ctx();
    const Featurizer feat(lab.vocab);

    const auto detect_defended = [&](const std::string& text) {
        return defended_detect(text, scheme, params.defense, defctx, *lab.vocab, lab.lm);
    };
    const ScoreOracle ori_scorer = [&](const std::string& text) {
        ledger.charge_ori(record.id);
        return detect_defended(text).global_score;
    };
    const ScoreOracle ref_scorer = [&](const std::string& text) {
        ledger.count_ref();
        return lab.ref_model->predict(feat, text);
    };
    const std::uint64_t seed = mix64(params.seed ^ fnv1a64(record.id));

    AttackOutcome o;
    switch (params.method) {
        case AttackMethod::Random:
            o = random_attack(*lab.vocab, record.text, params.eps, params.op_kind, seed,
                              lab.lexicon);
            break;
        case AttackMethod::Freq:
            if (lab.freq == nullptr)
                raise(Errc::MissingFrequencyTable, "frequency attack needs a frequency table");
            o = frequency_attack(*lab.vocab, record.text, params.eps, *lab.freq, params.op_kind,
                                 lab.lexicon);
            break;
        case AttackMethod::BoN:
            o = best_of_n(*lab.vocab, record.text, params.eps, params.N, params.op_kind,
                          params.bon_uses_original ? ori_scorer : ref_scorer, seed, lab.lexicon,
                          params.bon_uses_original);
            break;
        case AttackMethod::GaRef: {
            GAConfig ga = params.ga;
            ga.seed = seed;
            ga.max_edit_rate = params.eps;
            ga.loss_threshold = lab.ref_model->normalize(scheme.tau_d);
            o = ga_ref_attack(feat, *lab.ref_model, record.text, ga, params.op_kind, lab.lexicon,
                              ref_scorer);
            break;
        }
        case AttackMethod::GaOri: {
            GAConfig ga = params.ga;
            ga.seed = seed;
            ga.max_edit_rate = params.eps;
            o = ga_ori_attack(*lab.vocab, record.text, ga, params.op_kind, lab.lexicon,
                              ori_scorer);
            break;
        }
        case AttackMethod::Sand:
            o = sand_attack(*lab.vocab, record.text, params.eps, params.sand_rounds,
                            params.op_kind, seed, lab.lexicon, ref_scorer);
            break;
        case AttackMethod::GradRank:
            o = gradient_rank_attack(feat, *lab.ref_model, record.text, params.eps,
                                     lab.ref_model->normalize(scheme.tau_d), params.op_kind,
                                     lab.lexicon, ref_scorer);
            break;
        case AttackMethod::Adaptive: {
            GAConfig ga = params.ga;
            ga.seed = seed;
            ga.max_edit_rate = params.eps;
            ga.loss_threshold = lab.ref_model->normalize(scheme.tau_d);
            o = adaptive_compound_ga(feat, *lab.ref_model, record.text, params.defense, defctx,
                                     ga, default_compound_menu(), ref_scorer);
            break;
        }
    }

    // Provider-side evaluation: one detection before, one after.
    o.score_before = detect_defended(record.text).global_score;
    const auto after = detect_defended(o.perturbed_text);
    o.score_after = after.global_score;
    o.verdict_after = after.verdict;
    if (eval_detections != nullptr) *eval_detections += 2;
    return o;
}

// Aggregate over one experiment cell.
struct MetricsReport {
    std::string scheme;
    std::string method;
    std::string op_kind;
    std::string defense;
    double eps = 0.0;
    std::size_t length = 0;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;
    double ed_char = 0.0;
    double er_char = 0.0;
    double ed_token = 0.0;
    double er_token = 0.0;
    double wdr_value = 0.0;
    double asr_value = 0.0;
    double auc_after = 0.0;
    double bleu_value = 0.0;
    double rouge_f1_value = 0.0;
    double ppl_rate_value = 0.0;
    long long queries_ref = 0;
    long long queries_ori = 0;

    static const char* csv_header() {
        return "scheme,method,op,defense,eps,length,seed,samples,ed_char,er_char,ed_token,"
               "er_token,wdr,asr,auc_after,bleu,rouge_f1,ppl_rate,queries_ref,queries_ori";
    }

    std::string csv_row() const {
        std::ostringstream ss;
        ss.precision(6);
        ss << std::fixed;
        ss << scheme << ',' << method << ',' << op_kind << ',' << defense << ',' << eps << ','
           << length << ',' << seed << ',' << sample_count << ',' << ed_char << ',' << er_char
           << ',' << ed_token << ',' << er_token << ',' << wdr_value << ',' << asr_value << ','
           << auc_after << ',' << bleu_value << ',' << rouge_f1_value << ',' << ppl_rate_value
           << ',' << queries_ref << ',' << queries_ori;
        return ss.str();
    }

    nlohmann::json to_json() const {
        return {{"scheme", scheme},     {"method", method},
                {"op", op_kind},        {"defense", defense},
                {"eps", eps},           {"length", length},
                {"seed", seed},         {"samples", sample_count},
                {"ed_char", ed_char},   {"er_char", er_char},
                {"ed_token", ed_token}, {"er_token", er_token},
                {"wdr", wdr_value},     {"asr", asr_value},
                {"auc_after", auc_after}, {"bleu", bleu_value},
                {"rouge_f1", rouge_f1_value}, {"ppl_rate", ppl_rate_value},
                {"queries_ref", queries_ref}, {"queries_ori", queries_ori}};
    }
};

struct CellResult {
    MetricsReport report;
    std::vector<AttackOutcome> outcomes;
    long long eval_detections = 0;
    long long ledger_ori_total = 0;
    long long ledger_ref_total = 0;
};

// Attacks every watermark-positive record of the dataset and aggregates
// the §II-D metrics; text-quality metrics are averaged over records.
inline CellResult run_cell(const LabContext& lab, const Dataset& ds, const AttackParams& params) {
    params.validate();
    CellResult cell;
    QueryLedger ledger = QueryLedger::for_model(params.threat, params.ac2_budget);
    const auto targets = ds.watermarked_positives();
    if (targets.empty()) raise(Errc::InsufficientSamples, "no watermark-positive records");

    std::vector<double> post_scores;
    std::vector<bool> verdicts;
    double ed_c = 0, er_c = 0, er_t = 0, ed_t = 0, wdr_sum = 0, bleu_sum = 0, rouge_sum = 0,
           ppl_sum = 0;
    for (const DatasetRecord* rec : targets) {
        AttackOutcome o = attack_record(lab, ds, *rec, params, ledger, &cell.eval_detections);
        const std::size_t chars = char_count(rec->text);
        const TokenSeq orig = lab.vocab->encode(rec->text);
        ed_c += o.ed_char;
        er_c += chars > 0 ? o.ed_char / static_cast<double>(chars) : 0.0;
        er_t += o.er_token;
        ed_t += o.er_token * static_cast<double>(orig.size());
        wdr_sum += wdr(o.score_before, o.score_after, ds.stats);
        bleu_sum += bleu(rec->text, o.perturbed_text);
        rouge_sum += rouge1_f1(rec->text, o.perturbed_text);
        ppl_sum += ppl_rate(*lab.lm, orig.ids, lab.vocab->encode(o.perturbed_text).ids);
        post_scores.push_back(o.score_after);
        verdicts.push_back(o.verdict_after);
        cell.outcomes.push_back(std::move(o));
    }
    const auto n = static_cast<double>(targets.size());
    MetricsReport& r = cell.report;
    r.scheme = ds.scheme.name;
    r.method = attack_method_name(params.method);
    r.op_kind = perturb_kind_name(params.op_kind);
    r.defense = defense_name(params.defense);
    r.eps = params.eps;
    r.length = ds.length;
    r.seed = params.seed;
    r.sample_count = targets.size();
    r.ed_char = ed_c / n;
    r.er_char = er_c / n;
    r.ed_token = ed_t / n;
    r.er_token = er_t / n;
    r.wdr_value = wdr_sum / n;
    r.asr_value = asr(verdicts);
    r.bleu_value = bleu_sum / n;
    r.rouge_f1_value = rouge_sum / n;
    r.ppl_rate_value = ppl_sum / n;
    r.auc_after = auc(post_scores, ds.nonwatermarked_scores());
    for (const auto& o : cell.outcomes) {
        r.queries_ref += o.queries_ref;
        r.queries_ori += o.queries_ori;
    }
    cell.ledger_ori_total = ledger.ori_total();
    cell.ledger_ref_total = ledger.ref_used();
    if (cell.ledger_ori_total != r.queries_ori || cell.ledger_ref_total != r.queries_ref)
        raise(Errc::ConfigError, "query accounting mismatch between ledger and outcomes");
    return cell;
}

// Ledger-metered training wrapper: scores watermarked samples and their
// augmented variants against the original detector, charging the
// training budget of (1 + aug) queries per watermarked sample.
inline RefModel train_ref_with_ledger(const LabContext& lab, const Dataset& ds,
                                      const TrainConfig& cfg, QueryLedger& ledger) {
    std::vector<RefTrainSample> samples;
    samples.reserve(ds.records.size());
    for (const auto& r : ds.records)
        samples.push_back({r.id, r.text, r.s_w, r.watermarked});
    const Featurizer feat(lab.vocab);
    const OriScoreFn query = [&](const std::string& id, const std::string& text) {
        ledger.charge_ori(id);
        return detect(lab.vocab->encode(text), ds.scheme, lab.lm).global_score;
    };
    return train_ref(samples, cfg, feat, lab.lexicon, query);
}

inline void save_outcomes(const std::string& path, const Dataset& ds, const AttackParams& params,
                          const std::vector<AttackOutcome>& outcomes) {
    std::ofstream f(path);
    if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
    nlohmann::json header{{"schema", "wmlab.outcomes.v1"},
                          {"scheme", ds.scheme.name},
                          {"method", attack_method_name(params.method)},
                          {"op", perturb_kind_name(params.op_kind)},
                          {"defense", defense_name(params.defense)},
                          {"eps", params.eps},
                          {"threat", threat_model_name(params.threat)}};
    f << header.dump() << "\n";
    const auto targets = ds.watermarked_positives();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const AttackOutcome& o = outcomes[i];
        nlohmann::json row{{"id", i < targets.size() ? targets[i]->id : std::to_string(i)},
                           {"perturbed_text", o.perturbed_text},
                           {"er_token", o.er_token},
                           {"ed_char", o.ed_char},
                           {"score_before", o.score_before},
                           {"score_after", o.score_after},
                           {"verdict_after", o.verdict_after},
                           {"queries_ref", o.queries_ref},
                           {"queries_ori", o.queries_ori}};
        f << row.dump() << "\n";
    }
}

inline void save_reports_csv(const std::string& path, std::vector<MetricsReport> reports) {
    std::sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
        return std::tie(a.scheme, a.method, a.op_kind, a.defense, a.eps, a.length, a.seed) <
               std::tie(b.scheme, b.method, b.op_kind, b.defense, b.eps, b.length, b.seed);
    });
    std::ofstream f(path);
    if (!f) raise(Errc::MissingArtifact, "cannot write " + path);
    f << MetricsReport::csv_header() << "\n";
    for (const auto& r : reports) f << r.csv_row() << "\n";
}

}  // namespace wmlab
