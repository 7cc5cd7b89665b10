// Command-line front end: ingest, ask, serve, export-vault, stats.
// Exit codes: 0 success, 1 user error, 2 internal error.

#include <algorithm>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include "gmem/perception.hpp"
#include "gmem/service.hpp"

namespace {

using namespace gmem;

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

bool is_user_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidWindowSize:
    case ErrorCode::HermeticViolation:
    case ErrorCode::MalformedCaption:
    case ErrorCode::IoFailure:
      return true;
    default:
      return false;
  }
}

std::vector<std::string> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw service::BadRequest(fmt::format("frame directory {} does not exist", dir.string()));
  }
  std::vector<std::string> frames;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".webp") {
      frames.push_back(entry.path().filename().string());
    }
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

void print_report(const service::IngestReport& report) {
  fmt::print("notes_created: {}\nentities_created: {}\n", report.notes_created, report.entities_created);
  for (const auto& e : report.errors) fmt::print("error: item {}: {}: {}\n", e.index, e.code, e.message);
}

void print_answer(const service::MemoryService& svc, const agent::Answer& answer) {
  const auto doc = svc.ask_json(answer);
  fmt::print("answer: {}\n", answer.text);
  fmt::print("sources:\n");
  for (const auto& s : doc["sources"]) {
    fmt::print("  {}  {}\n", s["note_id"].get<std::string>(), s["snippet"].get<std::string>());
  }
  fmt::print("trace:\n");
  for (const auto& t : doc["trace"]) {
    fmt::print("  {}: {}\n", t["tool"].get<std::string>(), t["detail"].get<std::string>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded memory store: ingest annotated captions and ask questions about them."};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::string data_dir;
  std::string provider_mode;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--data-dir", data_dir, "directory holding the graph snapshot");
  app.add_option("--provider-mode", provider_mode, "live or stub");
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  auto* ingest = app.add_subcommand("ingest", "ingest a caption fixture (JSON lines) or a frame directory");
  std::string fixture;
  std::string frames_dir;
  std::string replay;
  ingest->add_option("fixture", fixture, "caption fixture");
  ingest->add_option("--frames", frames_dir, "directory of extracted frames to caption");
  ingest->add_option("--replay", replay, "caption frames from this replay fixture instead of a provider");

  auto* ask = app.add_subcommand("ask", "answer a question from memory");
  std::string question;
  bool ask_json = false;
  ask->add_option("question", question, "question text")->required();
  ask->add_flag("--json", ask_json, "print the HTTP response body instead");

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  std::string host;
  int port = -1;
  std::string static_dir;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--static-dir", static_dir, "frontend files served under /");

  auto* export_vault = app.add_subcommand("export-vault", "write the graph as a markdown vault");
  std::string vault_dir;
  export_vault->add_option("dir", vault_dir, "output directory")->required();

  auto* stats = app.add_subcommand("stats", "print graph statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUserError;
  }

  try {
    service::ServiceConfig config;
    if (!config_file.empty()) config.load_file(config_file);
    config.load_env();
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw service::BadRequest(fmt::format("--set expects key=value, got '{}'", kv));
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!data_dir.empty()) config.set("data_dir", data_dir);
    if (!provider_mode.empty()) config.set("provider.mode", provider_mode);
    if (!host.empty()) config.set("host", host);
    if (port >= 0) config.set("port", std::to_string(port));
    if (!static_dir.empty()) config.set("static_dir", static_dir);

    service::MemoryService svc(config);

    if (*ingest) {
      std::vector<service::IngestItem> items;
      if (!frames_dir.empty()) {
        if (!fixture.empty()) throw service::BadRequest("give either a fixture or --frames, not both");
        const auto frames = list_frames(frames_dir);
        std::unique_ptr<perception::Captioner> captioner;
        if (!replay.empty()) {
          captioner = std::make_unique<perception::ReplayCaptioner>(perception::ReplayCaptioner::from_jsonl(replay));
        } else {
          auto set = providers::make_providers(svc.config().providers);
          if (!set.live) throw service::BadRequest("captioning frames needs provider.mode=live or --replay");
          captioner = std::make_unique<perception::VisionCaptioner>(set.chat, frames_dir);
        }
        for (auto& c : perception::run_perception(frames, svc.config().perception, *captioner)) {
          items.push_back({service::IngestItem::Kind::Image, std::move(c.caption), {c.frame_ref}, c.anchor_index});
        }
      } else {
        if (fixture.empty()) throw service::BadRequest("ingest needs a fixture path or --frames");
        items = service::read_fixture(fixture);
      }
      const auto report = svc.ingest(items);
      print_report(report);
      return report.errors.empty() || report.notes_created > 0 ? 0 : kUserError;
    }
    if (*ask) {
      const auto answer = svc.ask(question);
      if (ask_json) {
        fmt::print("{}\n", svc.ask_json(answer).dump(2));
      } else {
        print_answer(svc, answer);
      }
      return 0;
    }
    if (*serve) {
      auto server = service::make_http_server(svc);
      fmt::print("listening on http://{}:{}\n", svc.config().host, svc.config().port);
      std::fflush(stdout);
      if (!server->listen(svc.config().host, svc.config().port)) {
        fmt::print(stderr, "error: cannot bind {}:{}\n", svc.config().host, svc.config().port);
        return kUserError;
      }
      return 0;
    }
    if (*export_vault) {
      fmt::print("files_written: {}\n", svc.export_vault(vault_dir));
      return 0;
    }
    if (*stats) {
      const auto doc = svc.stats_json();
      fmt::print("image_count {}\n", doc["image_count"].get<std::size_t>());
      fmt::print("memory_note_count {}\n", doc["memory_note_count"].get<std::size_t>());
      for (const auto& [k, v] : doc["entity_counts"].items()) fmt::print("entities.{} {}\n", k, v.get<std::size_t>());
      for (const auto& [k, v] : doc["edge_counts"].items()) fmt::print("edges.{} {}\n", k, v.get<std::size_t>());
      fmt::print("chain_count {}\n", doc["chain_count"].get<std::size_t>());
      return 0;
    }
  } catch (const service::BadRequest& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUserError;
  } catch (const service::Busy& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUserError;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}: {}\n", to_string(e.code()), e.what());
    return is_user_error(e.code()) ? kUserError : kInternalError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kInternalError;
  }
  return 0;
}
