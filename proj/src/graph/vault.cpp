#include "gmem/vault.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "restorer.hpp"

namespace gmem {

namespace fs = std::filesystem;

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << content;
  if (!out.flush()) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::string note_page(const MemoryGraph& graph, const Note& note) {
  YAML::Emitter y;
  y << YAML::BeginMap;
  y << YAML::Key << "id" << YAML::Value << note.id;
  y << YAML::Key << "type" << YAML::Value << std::string(to_string(note.kind));
  y << YAML::Key << "created_at" << YAML::Value << format_rfc3339(note.created_at);
  y << YAML::Key << "data_files" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : note.data_files) y << YAML::DoubleQuoted << f;
  y << YAML::EndSeq;
  y << YAML::Key << "entities" << YAML::Value << YAML::BeginSeq;
  for (const auto& label : graph.entities_of(note.id)) {
    y << fmt::format("{}:{}", label, to_string(graph.find_entity(label)->entity_type));
  }
  y << YAML::EndSeq;
  y << YAML::Key << "caption" << YAML::Value << YAML::DoubleQuoted << note.caption;
  if (note.sequence_index) {
    y << YAML::Key << "sequence_index" << YAML::Value << *note.sequence_index;
    const auto prev = graph.previous_of(note.id);
    y << YAML::Key << "previous" << YAML::Value << (prev ? *prev : std::string());
  }
  y << YAML::EndMap;
  return fmt::format("---\n{}\n---\n{}\n", y.c_str(), note.plain_caption);
}

std::string entity_page(const MemoryGraph& graph, const EntityNode& e) {
  const Note* first = graph.find_note(e.first_seen);
  YAML::Emitter y;
  y << YAML::BeginMap;
  y << YAML::Key << "id" << YAML::Value << e.label;
  y << YAML::Key << "type" << YAML::Value << lowercase(to_string(e.entity_type));
  y << YAML::Key << "created_at" << YAML::Value
    << (first ? format_rfc3339(first->created_at) : format_rfc3339(Timestamp{}));
  y << YAML::Key << "data_files" << YAML::Value << YAML::BeginSeq << YAML::EndSeq;
  y << YAML::Key << "entities" << YAML::Value << YAML::BeginSeq << YAML::EndSeq;
  y << YAML::Key << "first_seen" << YAML::Value << e.first_seen;
  y << YAML::Key << "mention_count" << YAML::Value << e.mention_count;
  y << YAML::EndMap;
  return fmt::format("---\n{}\n---\n", y.c_str());
}

struct Page {
  YAML::Node front;
  std::string body;
};

Page read_page(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.rfind("---\n", 0) != 0) {
    throw Error(ErrorCode::CorruptSnapshot, "missing front matter in " + path.string());
  }
  const std::size_t close = text.find("\n---\n", 3);
  if (close == std::string::npos) {
    throw Error(ErrorCode::CorruptSnapshot, "unterminated front matter in " + path.string());
  }
  Page page;
  try {
    page.front = YAML::Load(text.substr(4, close - 4));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::CorruptSnapshot, fmt::format("{}: {}", path.string(), e.what()));
  }
  page.body = text.substr(close + 5);
  if (!page.body.empty() && page.body.back() == '\n') page.body.pop_back();
  return page;
}

}  // namespace

std::size_t export_vault(const MemoryGraph& graph, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory.string());
  std::size_t written = 0;
  for (const auto& [id, note] : graph.notes()) {
    write_file(directory / (id + ".md"), note_page(graph, note));
    ++written;
  }
  for (const auto& [label, entity] : graph.entities()) {
    write_file(directory / (label + ".md"), entity_page(graph, entity));
    ++written;
  }
  return written;
}

MemoryGraph import_vault(const fs::path& directory, const ReEmbedFn& re_embed) {
  if (!fs::is_directory(directory)) {
    throw Error(ErrorCode::IoFailure, "not a directory: " + directory.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".md") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  GraphRestorer restorer;
  std::vector<Edge> edges;
  std::vector<Note> notes;
  try {
    for (const auto& path : files) {
      Page page = read_page(path);
      const auto& f = page.front;
      const std::string type = f["type"].as<std::string>();
      if (type == "image" || type == "note") {
        Note note;
        note.id = f["id"].as<std::string>();
        note.kind = type == "image" ? NoteKind::Image : NoteKind::Memory;
        note.caption = f["caption"].as<std::string>();
        note.plain_caption = page.body;
        const auto ts = parse_rfc3339(f["created_at"].as<std::string>());
        if (!ts) throw Error(ErrorCode::CorruptSnapshot, "bad created_at in " + path.string());
        note.created_at = *ts;
        note.data_files = f["data_files"].as<std::vector<std::string>>();
        if (caption::strip_annotations(note.caption).text != note.plain_caption) {
          throw Error(ErrorCode::CorruptSnapshot, "body does not match caption in " + path.string());
        }
        if (note.kind == NoteKind::Image) {
          note.sequence_index = f["sequence_index"].as<std::uint64_t>();
          const auto prev = f["previous"].as<std::string>("");
          if (!prev.empty()) edges.push_back(Edge{note.id, EdgeKind::HasPrevious, prev});
        }
        for (const auto& item : f["entities"].as<std::vector<std::string>>()) {
          const std::size_t colon = item.rfind(':');
          if (colon == std::string::npos) {
            throw Error(ErrorCode::CorruptSnapshot, "bad entity entry '" + item + "'");
          }
          edges.push_back(Edge{note.id, EdgeKind::HasElement, item.substr(0, colon)});
        }
        if (re_embed) note.chunks = re_embed(note);
        notes.push_back(std::move(note));
      } else {
        std::string cap = type;
        if (!cap.empty()) cap[0] = static_cast<char>(std::toupper(cap[0]));
        const auto entity_type = parse_entity_type(cap);
        if (!entity_type) {
          throw Error(ErrorCode::CorruptSnapshot, "unknown page type '" + type + "'");
        }
        restorer.add_entity(EntityNode{f["id"].as<std::string>(), *entity_type,
                                       f["first_seen"].as<std::string>(),
                                       f["mention_count"].as<std::size_t>()});
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::CorruptSnapshot, fmt::format("vault front matter: {}", e.what()));
  }
  for (auto& note : notes) restorer.add_note(std::move(note));
  for (const auto& e : edges) restorer.add_edge(e);
  return restorer.finish();
}

}  // namespace gmem
