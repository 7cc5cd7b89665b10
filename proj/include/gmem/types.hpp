#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace gmem {

using NoteId = std::string;
using Timestamp = std::chrono::sys_seconds;

enum class EntityType { Agent, Object, Action };

std::string_view to_string(EntityType type);
std::optional<EntityType> parse_entity_type(std::string_view text);

// RFC 3339 in UTC with a trailing 'Z', seconds precision.
std::string format_rfc3339(Timestamp ts);
std::optional<Timestamp> parse_rfc3339(std::string_view text);

}  // namespace gmem
