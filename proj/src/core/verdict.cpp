#include "natscan/verdict.hpp"

#include <array>
#include <utility>

#include "natscan/error.hpp"

namespace natscan {

namespace {

constexpr std::array<std::pair<OutpostVerdict, std::string_view>, 9> kOutpostNames{{
    {OutpostVerdict::NotAlive, "NotAlive"},
    {OutpostVerdict::NoRstResponse, "NoRstResponse"},
    {OutpostVerdict::ZeroIpid, "ZeroIpid"},
    {OutpostVerdict::TooNoisy, "TooNoisy"},
    {OutpostVerdict::NotSharedIpid, "NotSharedIpid"},
    {OutpostVerdict::SpoofedPublicFiltered, "SpoofedPublicFiltered"},
    {OutpostVerdict::SpoofedPrivateFiltered, "SpoofedPrivateFiltered"},
    {OutpostVerdict::Inconclusive, "Inconclusive"},
    {OutpostVerdict::QualifiedOutpost, "QualifiedOutpost"},
}};

constexpr std::array<std::pair<PenetrationOutcome, std::string_view>, 3> kPenetrationNames{{
    {PenetrationOutcome::HolePresent, "HolePresent"},
    {PenetrationOutcome::HoleAbsent, "HoleAbsent"},
    {PenetrationOutcome::Inconclusive, "Inconclusive"},
}};

template <class Table, class E>
std::string_view name_of(const Table& table, E v) {
  for (const auto& [e, n] : table)
    if (e == v)
      return n;
  return "?";
}

template <class E, class Table>
std::optional<E> value_of(const Table& table, std::string_view s) {
  for (const auto& [e, n] : table)
    if (n == s)
      return e;
  return std::nullopt;
}

} // namespace

std::string_view to_string(OutpostVerdict v) { return name_of(kOutpostNames, v); }

std::optional<OutpostVerdict> outpost_verdict_from_string(std::string_view s) {
  return value_of<OutpostVerdict>(kOutpostNames, s);
}

std::string_view to_string(PenetrationOutcome v) {
  return name_of(kPenetrationNames, v);
}

std::optional<PenetrationOutcome> penetration_outcome_from_string(std::string_view s) {
  return value_of<PenetrationOutcome>(kPenetrationNames, s);
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::SpoofUnsupported: return "SpoofUnsupported";
  case ErrorCode::CapabilityMissing: return "CapabilityMissing";
  case ErrorCode::InsufficientData: return "InsufficientData";
  case ErrorCode::MissingSamples: return "MissingSamples";
  case ErrorCode::NoResponse: return "NoResponse";
  case ErrorCode::NoisySeriesAbort: return "NoisySeriesAbort";
  case ErrorCode::RateBudgetExceeded: return "RateBudgetExceeded";
  case ErrorCode::TraceDivergence: return "TraceDivergence";
  }
  return "?";
}

} // namespace natscan
