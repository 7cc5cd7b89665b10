#include <numeric>

#include <gtest/gtest.h>

#include "gmem/expansion.hpp"
#include "support/oracles.hpp"

using namespace gmem;
using namespace gmem::expansion;

namespace {

const Timestamp kT0{std::chrono::seconds(1'700'000'000)};

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

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

TEST(PageRank, PathSeededInTheMiddleIsSymmetric) {
  const AdjacencyList path{{1}, {0, 2}, {1}};
  const std::vector<std::size_t> seeds{1};
  ExpansionParams params;
  params.max_iter = 1000;
  const auto r = personalized_pagerank(path, seeds, params);
  EXPECT_NEAR(r[0], r[2], 1e-12);
  EXPECT_NEAR(sum(r), 1.0, 1e-9);
  // Closed form: r_B = (1-d) + d (r_A + r_C), r_A = d r_B / 2.
  const double d = params.damping;
  const double rb = (1 - d) / (1 - d * d);
  EXPECT_NEAR(r[1], rb, 1e-8);
  EXPECT_NEAR(r[0], d * rb / 2, 1e-8);
}

TEST(PageRank, MatchesDenseOracleOnRandomGraphs) {
  oracle::Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    const auto adj = oracle::random_adjacency(rng, n, std::uniform_real_distribution<double>(0.0, 0.2)(rng));
    std::vector<std::size_t> seeds;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 4))(rng);
    for (std::size_t i = 0; i < k; ++i) seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    const auto got = personalized_pagerank(adj, seeds);
    EXPECT_LE(oracle::l1_distance(got, oracle::dense_pagerank(adj, seeds, 0.85)), 1e-6);
    EXPECT_LE(oracle::l1_distance(got, oracle::solved_pagerank(adj, seeds, 0.85)), 1e-6);
    EXPECT_NEAR(sum(got), 1.0, 1e-9);
    for (double x : got) EXPECT_GE(x, 0.0);
  }
}

TEST(PageRank, IsolatedSeedKeepsAllMass) {
  const AdjacencyList adj{{}, {2}, {1}};
  const std::vector<std::size_t> seeds{0};
  const auto r = personalized_pagerank(adj, seeds);
  EXPECT_NEAR(r[0], 1.0, 1e-12);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[2], 0.0);
}

TEST(PageRank, DuplicateSeedsCountOnce) {
  const AdjacencyList adj{{1}, {0, 2}, {1}};
  const std::vector<std::size_t> once{0, 2}, twice{0, 0, 2};
  EXPECT_EQ(personalized_pagerank(adj, once), personalized_pagerank(adj, twice));
}

TEST(PageRank, Errors) {
  const std::vector<std::size_t> seeds{0};
  EXPECT_EQ(code_of([&] { personalized_pagerank(AdjacencyList{}, seeds); }), ErrorCode::EmptyGraph);
  EXPECT_EQ(code_of([&] { personalized_pagerank(AdjacencyList{{}}, std::span<const std::size_t>{}); }),
            ErrorCode::EmptySeedSet);
  const std::vector<std::size_t> bad{3};
  EXPECT_EQ(code_of([&] { personalized_pagerank(AdjacencyList{{}}, bad); }), ErrorCode::UnknownNote);
  MemoryGraph g;
  g.ingest_image("x", {}, kT0);
  EXPECT_EQ(code_of([&] { personalized_pagerank(g, {"img_9999"}); }), ErrorCode::UnknownNote);
}

TEST(Expand, SharedEntityPullsInPreferenceNoteButNotDecoy) {
  MemoryGraph g;
  const auto seed = g.ingest_image("[person_1:Agent] is [reading_1:Action] a [book_1:Object]", {}, kT0);
  g.ingest_image("[person_1:Agent] puts down the [book_1:Object]", {}, kT0);
  const auto pref = g.add_memory_note("[person_1:Agent] prefers science fiction novels", {}, kT0);
  g.begin_stream();
  const auto decoy = g.ingest_image("an empty garage", {}, kT0);
  const auto out = expand(g, {seed});
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[0], seed);
  EXPECT_NE(std::find(out.begin(), out.end(), pref), out.end());
  EXPECT_EQ(std::find(out.begin(), out.end(), decoy), out.end());
  for (const auto& id : out) EXPECT_TRUE(g.find_note(id)) << id;
}

TEST(Expand, SeedsFirstInOrderAndTopMBound) {
  oracle::Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    MemoryGraph g = oracle::random_graph(rng, 50);
    if (g.notes().size() < 2) continue;
    std::vector<NoteId> ids;
    for (const auto& [id, _] : g.notes()) ids.push_back(id);
    std::vector<NoteId> seeds{ids.back(), ids.front(), ids.back()};
    ExpansionParams params;
    params.top_m = 3;
    const auto out = expand(g, seeds, params);
    ASSERT_GE(out.size(), 2u);
    EXPECT_EQ(out[0], ids.back());
    EXPECT_EQ(out[1], ids.front());
    EXPECT_LE(out.size(), 2u + params.top_m);
    const auto scores = personalized_pagerank(g, seeds, params);
    for (std::size_t i = 3; i < out.size(); ++i) EXPECT_GE(scores.at(out[i - 1]), scores.at(out[i]));
  }
}

TEST(Expand, AllNotesAsSeedsReturnsSeedsOnly) {
  MemoryGraph g;
  const auto a = g.ingest_image("[cup_1:Object]", {}, kT0);
  const auto b = g.ingest_image("[cup_1:Object]", {}, kT0);
  EXPECT_EQ(expand(g, {b, a}), (std::vector<NoteId>{b, a}));
}
