#pragma once

// Annotated caption grammar (case-sensitive):
//
//   caption := (plain_char | mention)*
//   mention := '[' label ':' type ']'
//   label   := [a-z][a-z0-9]*(_[a-z0-9]+)*_[0-9]+
//   type    := 'Agent' | 'Object' | 'Action'
//
// A '[' whose bracket body holds no ':' is literal text. A body with a ':'
// must form a complete mention; nesting is not allowed.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gmem/error.hpp"
#include "gmem/types.hpp"

namespace gmem::caption {

struct Span {
  std::size_t start = 0;  // offset of '['
  std::size_t end = 0;    // one past ']'

  friend bool operator==(const Span&, const Span&) = default;
};

struct Mention {
  std::string label;
  EntityType entity_type = EntityType::Object;
  Span span;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct ParsedCaption {
  std::string raw;
  std::string plain;
  std::vector<Mention> mentions;

  friend bool operator==(const ParsedCaption&, const ParsedCaption&) = default;
};

enum class CaptionFault { UnknownEntityType, UnterminatedAnnotation, InvalidLabel };

std::string_view to_string(CaptionFault fault);

class CaptionError : public Error {
 public:
  CaptionError(CaptionFault fault, std::size_t offset, const std::string& message);

  CaptionFault fault() const noexcept { return fault_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  CaptionFault fault_;
  std::size_t offset_;
};

bool is_valid_label(std::string_view label);

/// Throws CaptionError on the first malformed annotation.
ParsedCaption parse_caption(std::string_view text);

struct StripResult {
  std::string text;
  bool parsed = true;  // false: input did not parse and was passed through
};

StripResult strip_annotations(std::string_view text);

/// Rebuilds the annotated text from plain + mentions. Throws
/// Error(InconsistentSpans) when the spans do not line up with `plain`.
std::string render_annotated(const ParsedCaption& parsed);

}  // namespace gmem::caption
