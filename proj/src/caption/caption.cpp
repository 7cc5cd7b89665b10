#include "gmem/caption.hpp"

#include <fmt/format.h>

namespace gmem::caption {

namespace {

bool is_lower_alnum(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string_view to_string(CaptionFault fault) {
  switch (fault) {
    case CaptionFault::UnknownEntityType: return "UnknownEntityType";
    case CaptionFault::UnterminatedAnnotation: return "UnterminatedAnnotation";
    case CaptionFault::InvalidLabel: return "InvalidLabel";
  }
  return "Unknown";
}

CaptionError::CaptionError(CaptionFault fault, std::size_t offset, const std::string& message)
    : Error(ErrorCode::MalformedCaption,
            fmt::format("{} at byte {}: {}", to_string(fault), offset, message)),
      fault_(fault),
      offset_(offset) {}

bool is_valid_label(std::string_view label) {
  // Segments split on '_': first starts with a letter, the last is all
  // digits, and there are at least two segments. No empty segments.
  if (label.empty() || !(label[0] >= 'a' && label[0] <= 'z')) return false;
  std::size_t segments = 0;
  std::size_t pos = 0;
  std::string_view last;
  while (true) {
    const std::size_t next = label.find('_', pos);
    const std::string_view seg =
        label.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (seg.empty()) return false;
    for (char c : seg) {
      if (!is_lower_alnum(c)) return false;
    }
    ++segments;
    last = seg;
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (segments < 2) return false;
  for (char c : last) {
    if (!is_digit(c)) return false;
  }
  return true;
}

ParsedCaption parse_caption(std::string_view text) {
  ParsedCaption out;
  out.raw = std::string(text);
  out.plain.reserve(text.size());

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '[') {
      out.plain.push_back(c);
      ++i;
      continue;
    }
    // Bracket body runs to the first ']' or '[' (nesting forbidden).
    const std::size_t stop = text.find_first_of("[]", i + 1);
    const bool closed = stop != std::string_view::npos && text[stop] == ']';
    const std::string_view body =
        text.substr(i + 1, (stop == std::string_view::npos ? text.size() : stop) - i - 1);
    const std::size_t colon = body.find(':');
    if (colon == std::string_view::npos) {
      out.plain.push_back(c);
      ++i;
      continue;
    }
    if (!closed) {
      throw CaptionError(CaptionFault::UnterminatedAnnotation, i,
                         "'[' with ':' is not closed by ']'");
    }
    const std::string_view label = body.substr(0, colon);
    const std::string_view type_text = body.substr(colon + 1);
    const auto type = parse_entity_type(type_text);
    if (!type) {
      throw CaptionError(CaptionFault::UnknownEntityType, i,
                         fmt::format("type '{}' is not one of Agent, Object, Action", type_text));
    }
    if (!is_valid_label(label)) {
      throw CaptionError(CaptionFault::InvalidLabel, i,
                         fmt::format("label '{}' does not match name_index", label));
    }
    out.mentions.push_back(Mention{std::string(label), *type, Span{i, stop + 1}});
    out.plain.append(label);
    i = stop + 1;
  }
  return out;
}

StripResult strip_annotations(std::string_view text) {
  try {
    return {parse_caption(text).plain, true};
  } catch (const CaptionError&) {
    return {std::string(text), false};
  }
}

std::string render_annotated(const ParsedCaption& parsed) {
  std::string out;
  std::size_t plain_pos = 0;
  std::size_t raw_pos = 0;  // expected raw offset of the next plain char
  for (const Mention& m : parsed.mentions) {
    const std::string annotation =
        fmt::format("[{}:{}]", m.label, to_string(m.entity_type));
    if (m.span.start < raw_pos || m.span.end != m.span.start + annotation.size()) {
      throw Error(ErrorCode::InconsistentSpans,
                  fmt::format("mention '{}' has span [{}, {}) inconsistent with its text",
                              m.label, m.span.start, m.span.end));
    }
    const std::size_t gap = m.span.start - raw_pos;
    if (plain_pos + gap + m.label.size() > parsed.plain.size() ||
        parsed.plain.compare(plain_pos + gap, m.label.size(), m.label) != 0) {
      throw Error(ErrorCode::InconsistentSpans,
                  fmt::format("label '{}' not found in plain text at the span position", m.label));
    }
    out.append(parsed.plain, plain_pos, gap);
    out.append(annotation);
    plain_pos += gap + m.label.size();
    raw_pos = m.span.end;
  }
  out.append(parsed.plain, plain_pos, std::string::npos);
  return out;
}

}  // namespace gmem::caption
