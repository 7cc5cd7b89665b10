#include <gtest/gtest.h>

#include "gmem/caption.hpp"
#include "support/oracles.hpp"

using namespace gmem;
using namespace gmem::caption;

namespace {

CaptionFault fault_of(std::string_view text) {
  try {
    parse_caption(text);
  } catch (const CaptionError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedCaption);
    return e.fault();
  }
  ADD_FAILURE() << "no error for: " << text;
  return CaptionFault::InvalidLabel;
}

}  // namespace

TEST(Caption, ParsesMentionsAndPlainText) {
  const auto p = parse_caption("[person_1:Agent] is [reading_1:Action] a [book_1:Object].");
  ASSERT_EQ(p.mentions.size(), 3u);
  EXPECT_EQ(p.plain, "person_1 is reading_1 a book_1.");
  EXPECT_EQ(p.mentions[0].label, "person_1");
  EXPECT_EQ(p.mentions[0].entity_type, EntityType::Agent);
  EXPECT_EQ(p.mentions[0].span, (Span{0, 16}));
  EXPECT_EQ(p.mentions[1].entity_type, EntityType::Action);
  EXPECT_EQ(p.mentions[2].entity_type, EntityType::Object);
}

TEST(Caption, EmptyAndPlainCaptions) {
  EXPECT_TRUE(parse_caption("").mentions.empty());
  const auto p = parse_caption("nothing annotated here");
  EXPECT_TRUE(p.mentions.empty());
  EXPECT_EQ(p.plain, "nothing annotated here");
}

TEST(Caption, BracketWithoutColonIsLiteral) {
  const auto p = parse_caption("quote [sic] and [3] then [person_1:Agent]");
  EXPECT_EQ(p.plain, "quote [sic] and [3] then person_1");
  ASSERT_EQ(p.mentions.size(), 1u);
  EXPECT_EQ(p.mentions[0].span.start, 25u);
  EXPECT_EQ(parse_caption("trailing [").plain, "trailing [");
}

TEST(Caption, RepeatedMentionsAreKept) {
  const auto p = parse_caption("[cup_1:Object] and [cup_1:Object]");
  ASSERT_EQ(p.mentions.size(), 2u);
  EXPECT_EQ(p.plain, "cup_1 and cup_1");
}

TEST(Caption, UnknownEntityType) {
  EXPECT_EQ(fault_of("[person_1:Person]"), CaptionFault::UnknownEntityType);
  EXPECT_EQ(fault_of("[person_1:agent]"), CaptionFault::UnknownEntityType);
  EXPECT_EQ(fault_of("[person_1:]"), CaptionFault::UnknownEntityType);
  // Type is checked before the label.
  EXPECT_EQ(fault_of("[Bad:Thing]"), CaptionFault::UnknownEntityType);
}

TEST(Caption, UnterminatedAnnotation) {
  EXPECT_EQ(fault_of("[person_1:Agent"), CaptionFault::UnterminatedAnnotation);
  EXPECT_EQ(fault_of("a [person_1:Agent [cup_1:Object]"), CaptionFault::UnterminatedAnnotation);
}

TEST(Caption, InvalidLabel) {
  EXPECT_EQ(fault_of("[Person_1:Agent]"), CaptionFault::InvalidLabel);
  EXPECT_EQ(fault_of("[person:Agent]"), CaptionFault::InvalidLabel);
  EXPECT_EQ(fault_of("[person__1:Agent]"), CaptionFault::InvalidLabel);
  EXPECT_EQ(fault_of("[:Agent]"), CaptionFault::InvalidLabel);
}

TEST(Caption, ErrorReportsOffset) {
  try {
    parse_caption("ok [person_1:Agent] then [x_1:Nope]");
    FAIL();
  } catch (const CaptionError& e) {
    EXPECT_EQ(e.offset(), 25u);
  }
}

TEST(Caption, LabelRule) {
  for (const char* good : {"person_1", "red_chair_12", "x2_y3_4", "a_0"}) EXPECT_TRUE(is_valid_label(good)) << good;
  for (const char* bad : {"", "person", "_1", "person_", "person_x", "1_person_1", "per-son_1", "Person_1", "a__1"}) {
    EXPECT_FALSE(is_valid_label(bad)) << bad;
  }
}

TEST(Caption, StripFallsBackOnMalformedInput) {
  EXPECT_EQ(strip_annotations("[cup_1:Object] here").text, "cup_1 here");
  const auto r = strip_annotations("[cup_1:Thing]");
  EXPECT_FALSE(r.parsed);
  EXPECT_EQ(r.text, "[cup_1:Thing]");
}

TEST(Caption, RenderRejectsInconsistentSpans) {
  auto p = parse_caption("a [cup_1:Object] b");
  p.mentions[0].span.start += 1;
  p.mentions[0].span.end += 1;
  try {
    render_annotated(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentSpans);
  }
  auto q = parse_caption("a [cup_1:Object] b");
  q.plain = "a cup_2 b";
  EXPECT_THROW(render_annotated(q), Error);
}

TEST(Caption, GeneratedCaptionsRoundTripAndMatchRegexOracle) {
  oracle::Rng rng(20240601);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = oracle::random_caption(rng);
    const auto parsed = parse_caption(text);
    EXPECT_EQ(render_annotated(parsed), text);
    EXPECT_EQ(parsed.plain, oracle::regex_plain(text));
    const auto expected = oracle::regex_mentions(text);
    ASSERT_EQ(parsed.mentions.size(), expected.size()) << text;
    for (std::size_t m = 0; m < expected.size(); ++m) {
      EXPECT_EQ(parsed.mentions[m].label, expected[m].label);
      EXPECT_EQ(to_string(parsed.mentions[m].entity_type), expected[m].type);
      EXPECT_EQ(text.substr(parsed.mentions[m].span.start, 1), "[");
      EXPECT_EQ(text[parsed.mentions[m].span.end - 1], ']');
    }
  }
}
