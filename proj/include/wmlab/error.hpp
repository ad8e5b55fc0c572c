#pragma once

#include <stdexcept>
#include <string>

namespace wmlab {

enum class Errc {
    EmptyCorpus,
    VocabTooSmall,
    UnknownTokenId,
    CorpusTooSmall,
    EmptyText,
    TextTooShort,
    InsufficientSamples,
    InsufficientData,
    TokenTooShort,
    PlanOutOfRange,
    ZeroProbability,
    MissingFrequencyTable,
    AllTokensFiltered,
    BudgetExceeded,
    DegenerateDistribution,
    ConfigError,
    MissingArtifact,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::EmptyCorpus: return "EmptyCorpus";
        case Errc::VocabTooSmall: return "VocabTooSmall";
        case Errc::UnknownTokenId: return "UnknownTokenId";
        case Errc::CorpusTooSmall: return "CorpusTooSmall";
        case Errc::EmptyText: return "EmptyText";
        case Errc::TextTooShort: return "TextTooShort";
        case Errc::InsufficientSamples: return "InsufficientSamples";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::TokenTooShort: return "TokenTooShort";
        case Errc::PlanOutOfRange: return "PlanOutOfRange";
        case Errc::ZeroProbability: return "ZeroProbability";
        case Errc::MissingFrequencyTable: return "MissingFrequencyTable";
        case Errc::AllTokensFiltered: return "AllTokensFiltered";
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::DegenerateDistribution: return "DegenerateDistribution";
        case Errc::ConfigError: return "ConfigError";
        case Errc::MissingArtifact: return "MissingArtifact";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

    // Process exit code contract: 0 ok, 2 config error, 3 budget
    // violation, 4 missing artifact, 1 anything else.
    int exit_code() const {
        switch (code_) {
            case Errc::ConfigError: return 2;
            case Errc::BudgetExceeded: return 3;
            case Errc::MissingArtifact: return 4;
            default: return 1;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace wmlab
