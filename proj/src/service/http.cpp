#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>

#include "gmem/service.hpp"

namespace gmem::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>memory</title></head>
<body><p>The memory service is running. Configure static_dir to serve the chat frontend.</p></body></html>
)";

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, ordered_json{{"error", code}, {"message", message}});
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".json") return "application/json";
  if (ext == ".md" || ext == ".txt") return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

// Resolves `rel` under `root`; nullopt when it escapes the root.
std::optional<std::filesystem::path> contained_path(const std::filesystem::path& root,
                                                    const std::string& rel) {
  const std::filesystem::path relative(rel);
  if (rel.empty() || relative.is_absolute()) return std::nullopt;
  for (const auto& part : relative) {
    if (part == "..") return std::nullopt;
  }
  std::error_code ec;
  const auto base = std::filesystem::weakly_canonical(root, ec);
  if (ec) return std::nullopt;
  const auto full = std::filesystem::weakly_canonical(base / relative, ec);
  if (ec) return std::nullopt;
  auto [b, f] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
  if (b != base.end()) return std::nullopt;
  return full;
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(MemoryService& service) {
  auto server = std::make_unique<httplib::Server>();
  auto& svr = *server;

  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, ordered_json{{"status", "ok"}});
  });

  svr.Post("/ingest", [&service](const httplib::Request& req, httplib::Response& res) {
    std::vector<IngestItem> items;
    try {
      const auto body = json::parse(req.body);
      if (!body.is_object()) throw BadRequest("body must be a JSON object");
      if (body.contains("fixture") == body.contains("captions")) {
        throw BadRequest("body needs exactly one of \"fixture\" or \"captions\"");
      }
      items = body.contains("fixture") ? read_fixture(body.at("fixture").get<std::string>())
                                       : items_from_json(body.at("captions"));
    } catch (const json::exception& e) {
      return send_error(res, 400, "BadRequest", e.what());
    } catch (const BadRequest& e) {
      return send_error(res, 400, "BadRequest", e.what());
    }
    try {
      const auto report = service.ingest(items);
      ordered_json errors = ordered_json::array();
      for (const auto& f : report.errors) {
        errors.push_back({{"index", f.index}, {"error", f.code}, {"message", f.message}});
      }
      const int status = !report.errors.empty() && report.notes_created == 0 ? 422 : 200;
      send_json(res, status,
                ordered_json{{"notes_created", report.notes_created},
                             {"entities_created", report.entities_created},
                             {"errors", std::move(errors)}});
    } catch (const Busy& e) {
      send_error(res, 409, "Busy", e.what());
    }
  });

  svr.Post("/ask", [&service](const httplib::Request& req, httplib::Response& res) {
    std::string question;
    try {
      const auto body = json::parse(req.body);
      question = body.at("question").get<std::string>();
    } catch (const json::exception& e) {
      return send_error(res, 400, "BadRequest", fmt::format("expected {{\"question\": string}}: {}", e.what()));
    }
    try {
      send_json(res, 200, service.ask_json(service.ask(question)));
    } catch (const BadRequest& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const providers::ProviderError& e) {
      send_error(res, 503, to_string(e.code()), e.what());
    }
  });

  svr.Get(R"(/notes/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (auto view = service.note_view(id)) return send_json(res, 200, *view);
    send_error(res, 404, "UnknownNote", fmt::format("no note with id {}", id));
  });

  svr.Get("/graph/stats", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.stats_json());
  });

  svr.Get(R"(/files/(.+))", [&service](const httplib::Request& req, httplib::Response& res) {
    const std::string rel = req.matches[1];
    const auto path = contained_path(service.config().resolved_files_dir(), rel);
    if (!path) return send_error(res, 400, "BadRequest", "path escapes the files directory");
    std::ifstream in(*path, std::ios::binary);
    if (!in || std::filesystem::is_directory(*path)) {
      return send_error(res, 404, "NotFound", fmt::format("no file {}", rel));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    res.status = 200;
    res.set_content(buf.str(), content_type_for(*path));
  });

  const auto& static_dir = service.config().static_dir;
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    svr.set_mount_point("/", static_dir.string());
  } else {
    svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kFallbackPage), "text/html; charset=utf-8");
    });
  }

  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, 500, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  });
  return server;
}

}  // namespace gmem::service
