#include <fstream>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gmem/caption.hpp"
#include "gmem/perception.hpp"
#include "support/temp_dir.hpp"

using namespace gmem;
using namespace gmem::perception;

namespace {

std::vector<std::string> frame_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fmt::format("frame_{:05}.jpg", i));
  return out;
}

/// Records every request and answers with a caption naming the anchor.
class RecordingCaptioner : public Captioner {
 public:
  std::string caption(const CaptionRequest& request) override {
    requests.push_back(request);
    return fmt::format("[person_1:Agent] near [frame_{}:Object]", request.window.anchor());
  }
  std::vector<CaptionRequest> requests;
};

/// Fails with a provider error the first `failures` calls.
class FlakyCaptioner : public Captioner {
 public:
  explicit FlakyCaptioner(int failures) : failures_(failures) {}
  std::string caption(const CaptionRequest&) override {
    if (calls++ < failures_) throw providers::ProviderError(ErrorCode::RateLimited, "busy");
    return "a quiet room";
  }
  int calls = 0;

 private:
  int failures_;
};

providers::RetryPolicy no_sleep(std::vector<std::chrono::milliseconds>* slept) {
  providers::RetryPolicy p;
  p.sleep = [slept](std::chrono::milliseconds d) { slept->push_back(d); };
  return p;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(Windowing, SamplesEveryNthFrame) {
  EXPECT_EQ(sample_frames(11, 5), (std::vector<std::size_t>{0, 5, 10}));
  EXPECT_EQ(sample_frames(10, 5), (std::vector<std::size_t>{0, 5}));
  EXPECT_EQ(sample_frames(1, 5), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(sample_frames(0, 5).empty());
  EXPECT_EQ(sample_frames(3, 1), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Windowing, AdjacentWindowsShareTheirBoundaryFrame) {
  const auto w = make_windows({0, 5, 10, 15, 20}, 3);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].frame_indices, (std::vector<std::size_t>{0, 5, 10}));
  EXPECT_EQ(w[1].frame_indices, (std::vector<std::size_t>{10, 15, 20}));
  EXPECT_EQ(w[1].anchor(), 20u);
}

TEST(Windowing, ShortTailAndEmptyInput) {
  const auto w = make_windows({0, 5, 10, 15}, 3);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1].frame_indices, (std::vector<std::size_t>{10, 15}));
  EXPECT_TRUE(make_windows({}, 3).empty());
  EXPECT_EQ(make_windows({7}, 3).size(), 1u);
}

TEST(Windowing, WindowsCoverEverySampledFrameWithOneSharedFrame) {
  for (std::size_t count = 0; count < 40; ++count) {
    for (std::size_t size = 2; size < 6; ++size) {
      std::vector<std::size_t> sampled(count);
      for (std::size_t i = 0; i < count; ++i) sampled[i] = i * 3;
      const auto windows = make_windows(sampled, size);
      std::vector<std::size_t> seen;
      for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& f = windows[i].frame_indices;
        ASSERT_FALSE(f.empty());
        EXPECT_LE(f.size(), size);
        if (i > 0) {
          EXPECT_EQ(f.front(), windows[i - 1].anchor());
          seen.insert(seen.end(), f.begin() + 1, f.end());
        } else {
          seen = f;
        }
      }
      EXPECT_EQ(seen, sampled) << count << " " << size;
    }
  }
}

TEST(Windowing, RejectsWindowsSmallerThanTwo) {
  EXPECT_EQ(code_of([] { make_windows({0, 5}, 1); }), ErrorCode::InvalidWindowSize);
  EXPECT_EQ(code_of([] { make_windows({0, 5}, 0); }), ErrorCode::InvalidWindowSize);
  PerceptionParams p;
  p.window_size = 1;
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidWindowSize);
  p = {};
  p.every_nth = 0;
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidConfig);
  p = {};
  p.sample_rate_hz = 0;
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidConfig);
}

TEST(RunPerception, CaptionsEachWindowAtItsAnchor) {
  RecordingCaptioner cap;
  const auto frames = frame_names(21);
  const auto out = run_perception(frames, {}, cap);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].anchor_index, 10u);
  EXPECT_EQ(out[0].frame_ref, frames[10]);
  EXPECT_EQ(out[1].anchor_index, 20u);
  EXPECT_EQ(cap.requests[1].frame_refs, (std::vector<std::string>{frames[10], frames[15], frames[20]}));
}

TEST(RunPerception, PassesKnownLabelsForward) {
  RecordingCaptioner cap;
  run_perception(frame_names(31), {}, cap);
  ASSERT_EQ(cap.requests.size(), 3u);
  EXPECT_TRUE(cap.requests[0].known_labels.empty());
  EXPECT_EQ(cap.requests[1].known_labels, (std::vector<std::string>{"person_1:Agent", "frame_10:Object"}));
  EXPECT_EQ(cap.requests[2].known_labels,
            (std::vector<std::string>{"person_1:Agent", "frame_10:Object", "frame_20:Object"}));
}

TEST(RunPerception, MalformedCaptionNamesTheWindow) {
  ReplayCaptioner cap({{10, "[person_1:Agent] sits"}, {20, "a [broken_1:Thing] caption"}});
  try {
    run_perception(frame_names(21), {}, cap);
    FAIL();
  } catch (const PerceptionError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedCaption);
    EXPECT_EQ(e.window_index(), 1u);
  }
}

TEST(RunPerception, RetriesProviderErrorsThenGivesUp) {
  std::vector<std::chrono::milliseconds> slept;
  FlakyCaptioner ok_after_two(2);
  const auto out = run_perception(frame_names(11), {}, ok_after_two, no_sleep(&slept));
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(ok_after_two.calls, 3);
  EXPECT_EQ(slept.size(), 2u);

  FlakyCaptioner never(100);
  try {
    run_perception(frame_names(11), {}, never, no_sleep(&slept));
    FAIL();
  } catch (const PerceptionError& e) {
    EXPECT_EQ(e.code(), ErrorCode::CaptionerFailure);
    EXPECT_EQ(e.window_index(), 0u);
  }
  EXPECT_EQ(never.calls, 3);
}

TEST(ReplayCaptioner, MissingAnchorIsACaptionerFailure) {
  ReplayCaptioner cap({{10, "fine"}});
  try {
    run_perception(frame_names(21), {}, cap);
    FAIL();
  } catch (const PerceptionError& e) {
    EXPECT_EQ(e.code(), ErrorCode::CaptionerFailure);
    EXPECT_EQ(e.window_index(), 1u);
  }
}

TEST(ReplayCaptioner, LoadsJsonLines) {
  test::TempDir dir;
  const auto path = dir.path() / "c.jsonl";
  std::ofstream(path) << "{\"anchor_index\": 10, \"caption\": \"a\"}\n\n{\"anchor_index\": 20, \"caption\": \"b\"}\n";
  auto cap = ReplayCaptioner::from_jsonl(path);
  const auto out = run_perception(frame_names(21), {}, cap);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].caption, "b");
  EXPECT_EQ(code_of([&] { ReplayCaptioner::from_jsonl(dir.path() / "none.jsonl"); }), ErrorCode::IoFailure);
}

TEST(ReplayCaptioner, FixtureCoversA3291FrameStream) {
  auto cap = ReplayCaptioner::from_jsonl(std::string(GMEM_FIXTURE_DIR) + "/captions_329.jsonl");
  const auto out = run_perception(frame_names(3291), {}, cap);
  ASSERT_EQ(out.size(), 329u);
  for (std::size_t k = 0; k < out.size(); ++k) EXPECT_EQ(out[k].anchor_index, 10 * k + 10);
}

TEST(VisionCaptioner, SendsPromptLabelsAndFramesAsImages) {
  test::TempDir dir;
  std::ofstream(dir.path() / "a.png", std::ios::binary) << "ABC";
  auto stub = std::make_shared<providers::ScriptedChatStub>(
      std::vector<providers::StubRule>{},
      providers::ScriptedChatStub::Fallthrough([](const providers::ChatRequest& r) {
        const auto& m = r.messages.at(0);
        return fmt::format("{}|{}|{}", m.images.size(), m.images.at(0).mime_type, m.images.at(0).base64_data) +
               (m.content.find("person_1:Agent") != std::string::npos ? "|labels" : "|none");
      }));
  VisionCaptioner cap(stub, dir.path());
  CaptionRequest req;
  req.window.frame_indices = {0};
  req.frame_refs = {"a.png"};
  req.known_labels = {"person_1:Agent"};
  EXPECT_EQ(cap.caption(req), "1|image/png|QUJD|labels");
  req.frame_refs = {"missing.png"};
  EXPECT_EQ(code_of([&] { cap.caption(req); }), ErrorCode::IoFailure);
  EXPECT_NE(caption_prompt_template().find("{known_labels}"), std::string_view::npos);
}
