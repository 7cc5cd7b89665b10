#include "gmem/perception.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gmem/caption.hpp"

namespace gmem::perception {

namespace {

constexpr std::string_view kCaptionPrompt = R"(You are given a short sequence of consecutive video frames, oldest first.
Work through three steps and return only the final paragraph.

Step 1 - Describe the scene: the setting, the people, and the objects that are visible.

Step 2 - Identify and label entities. Mark every person, object, and action as
[label_x:Type] where Type is Agent (who acts), Object (what is acted upon), or
Action (what is done), and label_x is a lowercase name with a numeric index,
for example [person_1:Agent], [sofa_1:Object], [reading_1:Action].
Reuse these labels when the same entity appears again: {known_labels}
Use a new index only for an entity that has not been seen before.

Step 3 - Summarize what happens across the sequence in one paragraph that uses
the labels from step 2. The summary describes the last frame of the sequence.)";

std::string mime_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

}  // namespace

void validate(const PerceptionParams& params) {
  if (!(params.sample_rate_hz > 0.0) || !std::isfinite(params.sample_rate_hz)) {
    throw Error(ErrorCode::InvalidConfig, "sample_rate_hz must be positive");
  }
  if (params.every_nth < 1) throw Error(ErrorCode::InvalidConfig, "every_nth must be >= 1");
  if (params.window_size < 2) {
    throw Error(ErrorCode::InvalidWindowSize, "window_size must be >= 2");
  }
}

std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t every_nth) {
  std::vector<std::size_t> out;
  if (every_nth == 0) return out;
  for (std::size_t i = 0; i < frame_count; i += every_nth) out.push_back(i);
  return out;
}

std::vector<Window> make_windows(const std::vector<std::size_t>& sampled, std::size_t window_size) {
  if (window_size < 2) {
    throw Error(ErrorCode::InvalidWindowSize,
                fmt::format("window_size must be >= 2, got {}", window_size));
  }
  std::vector<Window> windows;
  std::size_t start = 0;
  while (start < sampled.size()) {
    const std::size_t end = std::min(start + window_size, sampled.size());
    windows.push_back(Window{{sampled.begin() + static_cast<std::ptrdiff_t>(start),
                              sampled.begin() + static_cast<std::ptrdiff_t>(end)}});
    if (end == sampled.size()) break;
    start = end - 1;
  }
  return windows;
}

ReplayCaptioner ReplayCaptioner::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read caption fixture " + path.string());
  std::map<std::size_t, std::string> by_anchor;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      by_anchor[j.at("anchor_index").get<std::size_t>()] = j.at("caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoFailure, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return ReplayCaptioner(std::move(by_anchor));
}

std::string ReplayCaptioner::caption(const CaptionRequest& request) {
  auto it = by_anchor_.find(request.window.anchor());
  if (it == by_anchor_.end()) {
    throw Error(ErrorCode::CaptionerFailure,
                fmt::format("no replay caption for anchor frame {}", request.window.anchor()));
  }
  return it->second;
}

std::string_view caption_prompt_template() { return kCaptionPrompt; }

VisionCaptioner::VisionCaptioner(std::shared_ptr<providers::ChatProvider> chat,
                                 std::filesystem::path frame_root)
    : chat_(std::move(chat)), frame_root_(std::move(frame_root)) {}

std::string VisionCaptioner::caption(const CaptionRequest& request) {
  std::string prompt(kCaptionPrompt);
  const std::string labels = request.known_labels.empty()
                                 ? std::string("(none yet)")
                                 : fmt::format("{}", fmt::join(request.known_labels, ", "));
  prompt.replace(prompt.find("{known_labels}"), std::string_view("{known_labels}").size(), labels);

  providers::ChatMessage user{providers::Role::User, std::move(prompt), {}};
  for (const auto& ref : request.frame_refs) {
    const auto path = frame_root_ / ref;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read frame " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    user.images.push_back({mime_for(path), httplib::detail::base64_encode(buf.str())});
  }
  providers::ChatRequest req;
  req.messages.push_back(std::move(user));
  req.temperature = 0.0;
  return chat_->chat(req).content;
}

std::vector<WindowCaption> run_perception(const std::vector<std::string>& frame_refs,
                                          const PerceptionParams& params, Captioner& captioner,
                                          const providers::RetryPolicy& retry) {
  validate(params);
  const auto windows = make_windows(sample_frames(frame_refs.size(), params.every_nth),
                                    params.window_size);
  std::vector<WindowCaption> out;
  std::vector<std::string> known;
  std::set<std::string> known_set;
  const int attempts = std::max(1, retry.max_attempts);

  for (std::size_t w = 0; w < windows.size(); ++w) {
    CaptionRequest req;
    req.window_index = w;
    req.window = windows[w];
    for (std::size_t idx : windows[w].frame_indices) req.frame_refs.push_back(frame_refs[idx]);
    req.known_labels = known;

    std::string text;
    for (int attempt = 1;; ++attempt) {
      try {
        text = captioner.caption(req);
        break;
      } catch (const providers::ProviderError& e) {
        if (attempt >= attempts) {
          throw PerceptionError(ErrorCode::CaptionerFailure, w,
                                fmt::format("window {}: captioner failed after {} attempts: {}", w,
                                            attempt, e.what()));
        }
        const auto& d = retry.delays;
        const auto delay = d.empty() ? std::chrono::milliseconds(0)
                                     : d[std::min<std::size_t>(attempt - 1, d.size() - 1)];
        if (retry.sleep) {
          retry.sleep(delay);
        } else {
          std::this_thread::sleep_for(delay);
        }
      } catch (const PerceptionError&) {
        throw;
      } catch (const Error& e) {
        throw PerceptionError(e.code(), w, fmt::format("window {}: {}", w, e.what()));
      }
    }

    caption::ParsedCaption parsed;
    try {
      parsed = caption::parse_caption(text);
    } catch (const caption::CaptionError& e) {
      throw PerceptionError(ErrorCode::MalformedCaption, w,
                            fmt::format("window {}: {}", w, e.what()));
    }
    for (const auto& m : parsed.mentions) {
      std::string key = fmt::format("{}:{}", m.label, to_string(m.entity_type));
      if (known_set.insert(key).second) known.push_back(std::move(key));
    }
    out.push_back(WindowCaption{w, windows[w].anchor(), frame_refs[windows[w].anchor()], std::move(text)});
  }
  return out;
}

}  // namespace gmem::perception
