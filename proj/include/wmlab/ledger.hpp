#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "wmlab/error.hpp"

namespace wmlab {

enum class ThreatModel { AC1, AC2, UNBOUNDED };

inline const char* threat_model_name(ThreatModel t) {
    switch (t) {
        case ThreatModel::AC1: return "AC1";
        case ThreatModel::AC2: return "AC2";
        case ThreatModel::UNBOUNDED: return "UNBOUNDED";
    }
    return "?";
}

inline ThreatModel threat_model_from(const std::string& s) {
    if (s == "AC1" || s == "ac1") return ThreatModel::AC1;
    if (s == "AC2" || s == "ac2") return ThreatModel::AC2;
    if (s == "UNBOUNDED" || s == "unbounded") return ThreatModel::UNBOUNDED;
    raise(Errc::ConfigError, "unknown threat model " + s);
}

// Enforced accounting of attacker queries to the original detector.
// AC1 runs carry a zero budget; evaluation-side detections bypass the
// ledger entirely and are tallied separately by the harness.
class QueryLedger {
public:
    explicit QueryLedger(long long ori_budget_per_input)
        : ori_budget_per_input_(ori_budget_per_input) {}

    static QueryLedger for_model(ThreatModel t, long long ac2_budget) {
        switch (t) {
            case ThreatModel::AC1: return QueryLedger(0);
            case ThreatModel::AC2: return QueryLedger(ac2_budget);
            case ThreatModel::UNBOUNDED: return QueryLedger(-1);
        }
        raise(Errc::ConfigError, "bad threat model");
    }

    long long budget_per_input() const { return ori_budget_per_input_; }

    // Registers one original-detector query for `input_id`, refusing it
    // when the budget is exhausted.
    void charge_ori(const std::string& input_id) {
        std::lock_guard<std::mutex> lock(mu_);
        auto& used = ori_used_[input_id];
        if (ori_budget_per_input_ >= 0 && used >= ori_budget_per_input_) {
            violations_.push_back(input_id);
            raise(Errc::BudgetExceeded,
                  "original-detector budget (" + std::to_string(ori_budget_per_input_) +
                      ") exhausted for input " + input_id);
        }
        ++used;
        ++ori_total_;
    }

    void count_ref() {
        std::lock_guard<std::mutex> lock(mu_);
        ++ref_used_;
    }

    long long ori_used(const std::string& input_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = ori_used_.find(input_id);
        return it == ori_used_.end() ? 0 : it->second;
    }

    long long ori_total() const {
        std::lock_guard<std::mutex> lock(mu_);
        return ori_total_;
    }

    long long ref_used() const {
        std::lock_guard<std::mutex> lock(mu_);
        return ref_used_;
    }

    const std::vector<std::string>& violations() const { return violations_; }

private:
    long long ori_budget_per_input_;  // -1 means unbounded
    std::map<std::string, long long> ori_used_;
    long long ori_total_ = 0;
    long long ref_used_ = 0;
    std::vector<std::string> violations_;
    mutable std::mutex mu_;
};

}  // namespace wmlab
