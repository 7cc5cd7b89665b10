#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gmem/error.hpp"
#include "gmem/providers.hpp"

namespace gmem::perception {

struct PerceptionParams {
  double sample_rate_hz = 3.0;  // frames extracted per second of video
  std::size_t every_nth = 5;    // caption every n-th extracted frame
  std::size_t window_size = 3;  // sampled frames per captioning window
};

void validate(const PerceptionParams& params);

/// A captioning window. Adjacent windows share their boundary frame; the
/// caption is attached to the last one.
struct Window {
  std::vector<std::size_t> frame_indices;

  std::size_t anchor() const { return frame_indices.back(); }
  friend bool operator==(const Window&, const Window&) = default;
};

/// [0, n, 2n, ...] below frame_count.
std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t every_nth);

/// Throws Error(InvalidWindowSize) when window_size < 2.
std::vector<Window> make_windows(const std::vector<std::size_t>& sampled, std::size_t window_size);

struct CaptionRequest {
  std::size_t window_index = 0;
  Window window;
  std::vector<std::string> frame_refs;    // one per window frame
  std::vector<std::string> known_labels;  // "label:Type" seen in earlier windows
};

/// Produces an annotated caption for one window.
class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string caption(const CaptionRequest& request) = 0;
};

/// Replays captions from a JSON-lines fixture keyed by anchor frame index.
class ReplayCaptioner : public Captioner {
 public:
  explicit ReplayCaptioner(std::map<std::size_t, std::string> by_anchor)
      : by_anchor_(std::move(by_anchor)) {}

  /// Lines of {"anchor_index": int, "caption": string}.
  static ReplayCaptioner from_jsonl(const std::filesystem::path& path);

  std::string caption(const CaptionRequest& request) override;

 private:
  std::map<std::size_t, std::string> by_anchor_;
};

/// The three-step prompt sent with each window. `{known_labels}` is replaced
/// by the labels already in use.
std::string_view caption_prompt_template();

/// Captions windows with a vision-capable chat provider; frames are read from
/// disk and attached as base64 images.
class VisionCaptioner : public Captioner {
 public:
  VisionCaptioner(std::shared_ptr<providers::ChatProvider> chat, std::filesystem::path frame_root);

  std::string caption(const CaptionRequest& request) override;

 private:
  std::shared_ptr<providers::ChatProvider> chat_;
  std::filesystem::path frame_root_;
};

struct WindowCaption {
  std::size_t window_index = 0;
  std::size_t anchor_index = 0;
  std::string frame_ref;  // frame the caption is attached to
  std::string caption;

  friend bool operator==(const WindowCaption&, const WindowCaption&) = default;
};

/// Raised when a captioner output fails the caption grammar.
class PerceptionError : public Error {
 public:
  PerceptionError(ErrorCode code, std::size_t window_index, const std::string& message)
      : Error(code, message), window_index_(window_index) {}
  std::size_t window_index() const noexcept { return window_index_; }

 private:
  std::size_t window_index_;
};

/// Samples frames, windows them, and captions every window in order. Provider
/// errors are retried per `retry`; anything else fails immediately.
std::vector<WindowCaption> run_perception(const std::vector<std::string>& frame_refs,
                                          const PerceptionParams& params, Captioner& captioner,
                                          const providers::RetryPolicy& retry = {});

}  // namespace gmem::perception
