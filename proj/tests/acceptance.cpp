// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sys/wait.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gmem/agent.hpp"
#include "gmem/caption.hpp"
#include "gmem/embedding.hpp"
#include "gmem/expansion.hpp"
#include "gmem/memory_graph.hpp"
#include "gmem/perception.hpp"
#include "gmem/query/evaluator.hpp"
#include "gmem/query/parser.hpp"
#include "gmem/service.hpp"
#include "gmem/vault.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace gmem;

namespace {

// Pinned tolerances.
constexpr double kPageRankL1Tol = 1e-6;
constexpr double kPageRankSumTol = 1e-9;
constexpr double kSymmetryTol = 1e-12;
constexpr double kCosineTol = 1e-12;

constexpr std::size_t kShapeCases = 200;
constexpr std::size_t kRoundTripCaptions = 1000;
constexpr std::size_t kDifferentialCases = 150;
constexpr std::size_t kPageRankGraphs = 30;
constexpr std::size_t kSearchEntries = 200;

const std::string kFixture = std::string(GMEM_FIXTURE_DIR) + "/captions_329.jsonl";
const Timestamp kT0{std::chrono::seconds(1'700'000'000)};

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(std::string why) {
    if (pass) detail = std::move(why);
    pass = false;
  }
};

service::ServiceConfig config_in(const test::TempDir& dir) {
  service::ServiceConfig c;
  c.data_dir = dir.path() / "data";
  return c;
}

bool has_number(const std::string& text, const std::string& number) {
  return std::regex_search(text, std::regex("(^|[^0-9])" + number + "([^0-9]|$)"));
}

// 1. Counting questions on the 329-caption fixture.
Outcome counting() {
  Outcome out;
  test::TempDir dir;
  service::MemoryService svc(config_in(dir));
  svc.ingest(service::read_fixture(kFixture));
  const auto images = svc.ask("How many images are there in memory?");
  const auto people = svc.ask("How many people are there?");
  if (!has_number(images.text, "329")) out.fail("image answer: " + images.text);
  if (!has_number(people.text, "1")) out.fail("people answer: " + people.text);
  if (images.sources.empty()) out.fail("image answer has no sources");
  out.detail = out.pass ? fmt::format("\"{}\" / \"{}\"", images.text, people.text) : out.detail;
  return out;
}

// 2. Shape invariants after random ingestion sequences, including rejected captions.
Outcome shape_invariants() {
  Outcome out;
  oracle::Rng rng(2002);
  const std::array<const char*, 4> broken{"[cup_1:Thing]", "[cup_1:Object", "[Cup:Object]", "[cup_1:Agent]"};
  for (std::size_t c = 0; c < kShapeCases && out.pass; ++c) {
    MemoryGraph g;
    const std::size_t steps = std::uniform_int_distribution<std::size_t>(1, 25)(rng);
    for (std::size_t s = 0; s < steps; ++s) {
      const int roll = std::uniform_int_distribution<int>(0, 9)(rng);
      const auto before = content_hash(g);
      try {
        if (roll == 0) {
          g.begin_stream();
        } else if (roll == 1) {
          g.add_memory_note(oracle::random_caption(rng), {}, kT0);
        } else if (roll == 2) {
          g.ingest_image(broken[std::uniform_int_distribution<std::size_t>(0, broken.size() - 1)(rng)], {}, kT0);
        } else {
          g.ingest_image(oracle::random_caption(rng), {}, kT0);
        }
      } catch (const Error&) {
        if (content_hash(g) != before) out.fail(fmt::format("case {}: failed ingest changed the graph", c));
      }
    }
    std::map<std::string, int> prev_out, prev_in;
    std::map<std::string, std::size_t> element_in;
    for (const auto& e : g.edges()) {
      if (e.kind == EdgeKind::HasPrevious) {
        const Note* s = g.find_note(e.source);
        const Note* t = g.find_note(e.target);
        if (!s || !t || s->kind != NoteKind::Image || t->kind != NoteKind::Image) {
          out.fail(fmt::format("case {}: HAS_PREVIOUS {} -> {} not between images", c, e.source, e.target));
        }
        ++prev_out[e.source];
        ++prev_in[e.target];
      } else if (!g.find_note(e.source) || !g.find_entity(e.target)) {
        out.fail(fmt::format("case {}: HAS_ELEMENT {} -> {} not note to entity", c, e.source, e.target));
      } else {
        ++element_in[e.target];
      }
    }
    for (const auto& [id, n] : prev_out) {
      if (n > 1) out.fail(fmt::format("case {}: {} has out-degree {}", c, id, n));
    }
    for (const auto& [id, n] : prev_in) {
      if (n > 1) out.fail(fmt::format("case {}: {} has in-degree {}", c, id, n));
    }
    for (const auto& [label, e] : g.entities()) {
      if (e.mention_count != element_in[label]) {
        out.fail(fmt::format("case {}: {} mention_count {} vs {} edges", c, label, e.mention_count,
                             element_in[label]));
      }
    }
  }
  if (out.pass) out.detail = fmt::format("{} sequences", kShapeCases);
  return out;
}

// 3. Caption round-trip, parse faults and label type conflicts.
Outcome caption_grammar() {
  Outcome out;
  oracle::Rng rng(3003);
  for (std::size_t i = 0; i < kRoundTripCaptions && out.pass; ++i) {
    const std::string text = oracle::random_caption(rng);
    const auto parsed = caption::parse_caption(text);
    if (caption::render_annotated(parsed) != text) out.fail("round-trip failed: " + text);
    if (parsed.plain != oracle::regex_plain(text)) out.fail("plain text differs from regex oracle: " + text);
  }
  const std::vector<std::pair<std::string, caption::CaptionFault>> faults{
      {"a [cup_1:Thing] here", caption::CaptionFault::UnknownEntityType},
      {"a [cup_1:Object here", caption::CaptionFault::UnterminatedAnnotation},
      {"a [Cup:Object] here", caption::CaptionFault::InvalidLabel}};
  for (const auto& [text, fault] : faults) {
    try {
      caption::parse_caption(text);
      out.fail("accepted malformed caption: " + text);
    } catch (const caption::CaptionError& e) {
      if (e.fault() != fault) out.fail(fmt::format("{}: raised {}", text, caption::to_string(e.fault())));
    }
  }
  // A label reused with another type is caught when the caption is ingested.
  MemoryGraph g;
  g.ingest_image("[cup_1:Object] on a shelf", {}, kT0);
  try {
    g.ingest_image("[cup_1:Agent] walks", {}, kT0);
    out.fail("accepted a label with a conflicting type");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TypeConflict) out.fail("conflicting type raised " + std::string(to_string(e.code())));
  }
  if (out.pass) out.detail = fmt::format("{} round-trips, 3 parse faults, type conflict", kRoundTripCaptions);
  return out;
}

// 4. Query engine against the nested-loop reference; mutation keywords rejected.
Outcome query_differential() {
  Outcome out;
  oracle::Rng rng(4004);
  for (std::size_t i = 0; i < kDifferentialCases && out.pass; ++i) {
    const MemoryGraph g = oracle::random_graph(rng, 30);
    const auto ast = oracle::random_query(rng);
    const auto got = query::evaluate(ast, g);
    const auto want = oracle::reference_evaluate(ast, g);
    bool same = got.columns == want.columns && got.rows.size() == want.rows.size();
    for (std::size_t r = 0; same && r < got.rows.size(); ++r) {
      same = got.rows[r].size() == want.rows[r].size();
      for (std::size_t col = 0; same && col < got.rows[r].size(); ++col) {
        same = query::compare_values(got.rows[r][col], want.rows[r][col]) == 0;
      }
    }
    if (!same) out.fail("disagrees with reference: " + query::render(ast));
  }
  for (const char* q : {"CREATE (n)", "MATCH (n) DELETE n", "MATCH (n) DETACH DELETE n", "MATCH (n) SET n.x = 1",
                        "MERGE (n:Agent)", "MATCH (n) REMOVE n.x", "DROP INDEX foo"}) {
    try {
      query::parse_query(q);
      out.fail(std::string("accepted: ") + q);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ForbiddenClause) out.fail(std::string("wrong error for: ") + q);
    }
  }
  if (out.pass) out.detail = fmt::format("{} cases, 7 mutation keywords", kDifferentialCases);
  return out;
}

// 5. Personalized PageRank against dense power iteration.
Outcome pagerank() {
  Outcome out;
  oracle::Rng rng(5005);
  double worst = 0.0;
  for (std::size_t t = 0; t < kPageRankGraphs; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    const auto adj = oracle::random_adjacency(rng, n, std::uniform_real_distribution<double>(0.0, 0.2)(rng));
    std::vector<std::size_t> seeds;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 4))(rng);
    for (std::size_t i = 0; i < k; ++i) seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    const auto got = expansion::personalized_pagerank(adj, seeds);
    const double l1 = oracle::l1_distance(got, oracle::dense_pagerank(adj, seeds, 0.85));
    worst = std::max(worst, l1);
    if (l1 > kPageRankL1Tol) out.fail(fmt::format("graph {}: L1 {:.3g}", t, l1));
    double sum = 0.0;
    for (double x : got) sum += x;
    if (std::abs(sum - 1.0) > kPageRankSumTol) out.fail(fmt::format("graph {}: sum {:.12f}", t, sum));
  }
  const expansion::AdjacencyList path{{1}, {0, 2}, {1}};
  const std::vector<std::size_t> middle{1};
  const auto r = expansion::personalized_pagerank(path, middle);
  if (std::abs(r[0] - r[2]) > kSymmetryTol) out.fail(fmt::format("A {} vs C {}", r[0], r[2]));
  if (out.pass) out.detail = fmt::format("{} graphs, worst L1 {:.2e}", kPageRankGraphs, worst);
  return out;
}

// 6. A background preference reachable only through a shared Agent.
Outcome expansion_recall() {
  Outcome out;
  MemoryGraph g;
  embedding::EmbeddingIndex index;
  auto add = [&](NoteId id) {
    const auto plain = g.find_note(id)->plain_caption;
    index.add({id, 0, plain, embedding::stub_embed(plain)});
    return id;
  };
  for (const char* c : {"the [person_1:Agent] sits down to read the [book_1:Object] on the sofa",
                        "the [person_1:Agent] wants to read what the [newspaper_1:Object] says",
                        "what does the [person_1:Agent] read at the [table_1:Object]",
                        "the [person_1:Agent] does [reading_1:Action] the [book_1:Object] by the lamp",
                        "the [person_1:Agent] puts the [book_1:Object] back to read later",
                        "the [person_1:Agent] reads the [letter_1:Object] twice"}) {
    add(g.ingest_image(c, {}, kT0));
  }
  const auto preference = add(g.add_memory_note("[person_1:Agent] prefers science fiction novels", {}, kT0));
  for (const auto& e : g.edges()) {
    if (e.source == preference && e.target != "person_1") out.fail("preference has a second link");
  }
  providers::ProviderSet set = providers::make_providers({}, agent::stub_reply);
  agent::RetrievalAgent agent(g, index, set);
  const std::string q = "What does the person usually read?";
  auto has = [&](const agent::ToolResult& r) {
    return std::any_of(r.context_notes.begin(), r.context_notes.end(),
                       [&](const agent::ContextNote& n) { return n.note_id == preference; });
  };
  if (has(agent.semantic_search(q, agent.config().top_k))) out.fail("preference already in semantic top-k");
  if (!has(agent.graph_expansion(q, agent.config().top_k))) out.fail("preference missing from expansion");
  if (out.pass) out.detail = "absent from semantic top-5, present after expansion";
  return out;
}

// 7. Top-k equals an exhaustive cosine scan.
Outcome semantic_search() {
  Outcome out;
  oracle::Rng rng(7007);
  std::normal_distribution<double> gauss;
  embedding::EmbeddingIndex index;
  std::vector<embedding::IndexEntry> entries;
  for (std::size_t i = 0; i < kSearchEntries; ++i) {
    embedding::IndexEntry e{fmt::format("note_{:04}", i), 0, "", {}};
    for (int d = 0; d < 32; ++d) e.vector.push_back(gauss(rng));
    entries.push_back(e);
    index.add(e);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q;
    for (int d = 0; d < 32; ++d) q.push_back(gauss(rng));
    for (std::size_t k : {1u, 5u, 10u}) {
      const auto got = index.search_top_k(q, k);
      const auto want = oracle::scan_top_k(entries, q, k);
      if (got.size() != want.size()) {
        out.fail(fmt::format("k={}: {} hits vs {}", k, got.size(), want.size()));
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].note_id != want[i].note_id || std::abs(got[i].score - want[i].score) > kCosineTol) {
          out.fail(fmt::format("k={} rank {}: {} vs {}", k, i, got[i].note_id, want[i].note_id));
        }
      }
    }
  }
  if (out.pass) out.detail = fmt::format("{} entries, k in {{1, 5, 10}}", kSearchEntries);
  return out;
}

// 8. Frame sampling and boundary-sharing windows.
Outcome windowing() {
  Outcome out;
  const auto sampled = perception::sample_frames(11, 5);
  if (sampled != std::vector<std::size_t>{0, 5, 10}) out.fail("sampled frames differ");
  const auto windows = perception::make_windows({0, 5, 10, 15, 20}, 3);
  if (windows.size() != 2 || windows[0].frame_indices != std::vector<std::size_t>{0, 5, 10} ||
      windows[1].frame_indices != std::vector<std::size_t>{10, 15, 20}) {
    out.fail("windows differ");
  }
  if (out.pass) out.detail = "[0,5,10]; [[0,5,10],[10,15,20]]";
  return out;
}

// 9. Snapshot and vault round-trips on the fixture.
Outcome persistence() {
  Outcome out;
  test::TempDir dir;
  service::MemoryService svc(config_in(dir));
  svc.ingest(service::read_fixture(kFixture));
  const MemoryGraph g = svc.graph_copy();
  const auto snap = dir.path() / "copy.json";
  save_snapshot(g, snap);
  if (!(load_snapshot(snap) == g)) out.fail("snapshot round-trip differs");
  export_vault(g, dir.path() / "vault");
  const auto back = import_vault(dir.path() / "vault", [](const Note& n) {
    std::vector<EmbeddedChunk> chunks;
    std::uint32_t ordinal = 0;
    for (auto& piece : embedding::chunk_text(n.plain_caption, embedding::kDefaultChunkChars)) {
      chunks.push_back({ordinal++, piece, embedding::stub_embed(piece)});
    }
    return chunks;
  });
  if (!(back == g)) out.fail("vault round-trip differs");
  if (out.pass) out.detail = fmt::format("{} notes, {} entities", g.note_count(), g.entities().size());
  return out;
}

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult run(const std::string& command) {
  RunResult r;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

// 10. Hermetic CLI runs are byte-identical and cannot reach a live provider.
Outcome hermetic_cli() {
  Outcome out;
  const std::string cli = GMEM_CLI_PATH;
  auto session = [&](const test::TempDir& dir) {
    const std::string env = "env -u MEM_PROVIDER_MODE MEM_HERMETIC=1 ";
    const std::string data = fmt::format("--data-dir '{}' --provider-mode stub", (dir.path() / "data").string());
    std::string transcript;
    for (const std::string& args :
         {fmt::format("{} ingest '{}'", data, kFixture), data + " ask 'How many images are there in memory?'",
          data + " ask 'How many people are there?'", data + " ask 'Where was the person lying on the floor?'",
          data + " ask 'What does the person usually do in the kitchen?'", data + " stats"}) {
      const auto r = run(env + cli + " " + args);
      if (r.status != 0) out.fail(fmt::format("exit {} for {}: {}", r.status, args, r.output));
      transcript += r.output;
    }
    return transcript;
  };
  test::TempDir a, b;
  const std::string first = session(a);
  const std::string second = session(b);
  if (first != second) out.fail("transcripts differ between runs");
  if (!has_number(first, "329")) out.fail("transcript lacks the image count");

  test::TempDir c;
  const auto live = run(fmt::format("env MEM_HERMETIC=1 {} --data-dir '{}' --provider-mode live ask 'hi'", cli,
                                    (c.path() / "data").string()));
  if (live.status == 0) out.fail("live provider allowed under hermetic mode");
  if (live.output.find("HermeticViolation") == std::string::npos) {
    out.fail("live refusal does not name HermeticViolation: " + live.output);
  }
  if (out.pass) out.detail = fmt::format("{} identical bytes; live mode refused", first.size());
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"counting reproduction", counting},   {"graph-shape invariants", shape_invariants},
      {"caption grammar", caption_grammar},  {"query differential", query_differential},
      {"pagerank oracle", pagerank},         {"expansion recall", expansion_recall},
      {"semantic search exactness", semantic_search}, {"windowing", windowing},
      {"persistence round-trips", persistence},       {"hermetic end-to-end", hermetic_cli},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    fmt::print("{} {:2} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
