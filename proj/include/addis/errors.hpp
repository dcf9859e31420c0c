#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace addis {

enum class Errc {
    DomainError,
    InvalidSpec,
    InvalidConfig,
    NonMonotoneConflicts,
    NonContiguousSuffix,
    IncompleteLedger,
    MissingAlphaC,
    NonMonotoneGamma,
    DegenerateRenormalization,
    HorizonExceeded,
    HorizonTooLarge,
    MissingIndicator,
    ScheduleViolation,
    FrozenRowViolation,
    UnknownIndex,
    DuplicateObservation,
    ModelUnavailable,
    QuadratureNonConvergence,
    BatchIncomplete,
    InvalidW0,
    EmptyOutcomeSet,
    MissingData,
    ParseError,
};

constexpr std::string_view errc_name(Errc c) {
    switch (c) {
    case Errc::DomainError: return "domain-error";
    case Errc::InvalidSpec: return "invalid-spec";
    case Errc::InvalidConfig: return "invalid-config";
    case Errc::NonMonotoneConflicts: return "non-monotone-conflicts";
    case Errc::NonContiguousSuffix: return "non-contiguous-suffix";
    case Errc::IncompleteLedger: return "incomplete-ledger";
    case Errc::MissingAlphaC: return "missing-alpha-c";
    case Errc::NonMonotoneGamma: return "non-monotone-gamma";
    case Errc::DegenerateRenormalization: return "degenerate-renormalization";
    case Errc::HorizonExceeded: return "horizon-exceeded";
    case Errc::HorizonTooLarge: return "horizon-too-large";
    case Errc::MissingIndicator: return "missing-indicator";
    case Errc::ScheduleViolation: return "schedule-violation";
    case Errc::FrozenRowViolation: return "frozen-row-violation";
    case Errc::UnknownIndex: return "unknown-index";
    case Errc::DuplicateObservation: return "duplicate-observation";
    case Errc::ModelUnavailable: return "model-unavailable";
    case Errc::QuadratureNonConvergence: return "quadrature-non-convergence";
    case Errc::BatchIncomplete: return "batch-incomplete";
    case Errc::InvalidW0: return "invalid-w0";
    case Errc::EmptyOutcomeSet: return "empty-outcome-set";
    case Errc::MissingData: return "missing-data";
    case Errc::ParseError: return "parse-error";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the stream protocol in particular) can report it without parsing
/// the message.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace addis
