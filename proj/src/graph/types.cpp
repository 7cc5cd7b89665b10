#include "gmem/types.hpp"

#include <cstdio>
#include <ctime>

#include "gmem/error.hpp"

namespace gmem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedCaption: return "MalformedCaption";
    case ErrorCode::InconsistentSpans: return "InconsistentSpans";
    case ErrorCode::TypeConflict: return "TypeConflict";
    case ErrorCode::UnknownNote: return "UnknownNote";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::InvalidWindowSize: return "InvalidWindowSize";
    case ErrorCode::CaptionerFailure: return "CaptionerFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::ForbiddenClause: return "ForbiddenClause";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::EmptySeedSet: return "EmptySeedSet";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::HermeticViolation: return "HermeticViolation";
    case ErrorCode::UnparseableQuery: return "UnparseableQuery";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::Agent: return "Agent";
    case EntityType::Object: return "Object";
    case EntityType::Action: return "Action";
  }
  return "Unknown";
}

std::optional<EntityType> parse_entity_type(std::string_view text) {
  if (text == "Agent") return EntityType::Agent;
  if (text == "Object") return EntityType::Object;
  if (text == "Action") return EntityType::Action;
  return std::nullopt;
}

std::string format_rfc3339(Timestamp ts) {
  const std::time_t t = ts.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::optional<Timestamp> parse_rfc3339(std::string_view text) {
  // Accepts YYYY-MM-DDTHH:MM:SSZ and YYYY-MM-DDTHH:MM:SS+00:00.
  std::string s(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &se,
                  &consumed) != 6 ||
      consumed != 19) {
    return std::nullopt;
  }
  const std::string_view rest = text.substr(19);
  if (rest != "Z" && rest != "+00:00") return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) {
    return std::nullopt;
  }
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  return Timestamp{std::chrono::seconds{timegm(&tm)}};
}

}  // namespace gmem
