#include "cellnav/environment.hpp"
#include "cellnav/error.hpp"
#include "random_instances.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

using namespace cellnav;

namespace {

std::string fixture(const std::string& name) { return std::string(CELLNAV_FIXTURES) + "/" + name; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::ParseError;
}

// Share of uniform free-space samples that fall in some cell.
double coverage(const Environment& env, const CellDecomposition& d, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Point lo = env.boundary.front();
  Point hi = lo;
  for (const auto& p : env.boundary) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int free = 0;
  int covered = 0;
  while (free < samples) {
    const Point x(oracle::uniform(rng, lo.x(), hi.x()), oracle::uniform(rng, lo.y(), hi.y()));
    if (!env.in_free_space(x)) continue;
    ++free;
    if (d.locate(x) >= 0) ++covered;
  }
  return static_cast<double>(covered) / free;
}

}  // namespace

TEST(LoadEnvironment, CorridorFixture) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  ASSERT_TRUE(env.cells);
  EXPECT_EQ(env.cells->size(), 6u);
  ASSERT_TRUE(env.cell_landmarks);
  std::set<std::vector<int>> groups(env.cell_landmarks->begin(), env.cell_landmarks->end());
  EXPECT_EQ(groups.size(), 2u);
  ASSERT_TRUE(env.objective);
  EXPECT_EQ(env.objective->kind, Objective::Kind::Stabilize);
}

TEST(LoadEnvironment, Errors) {
  EXPECT_EQ(kind_of([] { load_environment(fixture("does_not_exist.json")); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_environment("{not json"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_environment(R"({"boundary": [[0,0],[1,0],[1,1]], "landmarks": []})"); }),
            ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] {
              parse_environment(R"({"boundary": [[0,0],[4,0],[4,4],[0,4]], "landmarks": [[1,1]],
                                    "cells": [[[0,0],[4,0],[1,1],[0,4]]]})");
            }),
            ErrorKind::InvalidGeometry);
  EXPECT_EQ(kind_of([] {
              parse_environment(R"({"boundary": [[0,0],[4,0],[4,4],[0,4]], "landmarks": [[1,1]],
                                    "objective": {"kind": "hover"}})");
            }),
            ErrorKind::SchemaError);
}

TEST(DecomposeRrt, CoversOpenSquare) {
  const Environment env = load_environment(fixture("open_square.json"));
  const CellDecomposition d = decompose_rrt(env, 7, RrtParams{});
  EXPECT_GE(coverage(env, d, 10000, 99), 0.99);
  for (const auto& c : d.cells) EXPECT_GT(polygon_area(vertices_2d(c)), 0.0);
}

TEST(DecomposeRrt, CoversFreeSpaceAroundObstacle) {
  const Environment env = load_environment(fixture("square_with_block.json"));
  // Colliding samples claim free space next to the obstacle that no cell
  // covers; without them only the clipping loss remains.
  const CellDecomposition d = decompose_rrt(env, 3, RrtParams{});
  EXPECT_GE(coverage(env, d, 10000, 5), 0.95);
  RrtParams no_colliding;
  no_colliding.colliding_generators = false;
  EXPECT_GE(coverage(env, decompose_rrt(env, 3, no_colliding), 10000, 5), 0.99);
  // No cell reaches into the obstacle interior.
  std::mt19937_64 rng(11);
  for (int k = 0; k < 5000; ++k) {
    const Point x(oracle::uniform(rng, 2.01, 3.99), oracle::uniform(rng, 2.01, 3.99));
    EXPECT_EQ(d.locate(x, -1e-9), -1) << x.transpose();
  }
}

TEST(DecomposeRrt, CellsAreInteriorDisjoint) {
  const Environment env = load_environment(fixture("open_square.json"));
  const CellDecomposition d = decompose_rrt(env, 21, RrtParams{});
  std::mt19937_64 rng(1);
  for (int k = 0; k < 5000; ++k) {
    const Point x(oracle::uniform(rng, 0, 4), oracle::uniform(rng, 0, 4));
    int inside = 0;
    for (const auto& c : d.cells) inside += c.depth(x) > 1e-7 ? 1 : 0;
    EXPECT_LE(inside, 1);
  }
}

TEST(DecomposeRrt, DeterministicPerSeed) {
  const Environment env = load_environment(fixture("square_with_block.json"));
  const CellDecomposition a = decompose_rrt(env, 42, RrtParams{});
  const CellDecomposition b = decompose_rrt(env, 42, RrtParams{});
  const CellDecomposition c = decompose_rrt(env, 43, RrtParams{});
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.cells[static_cast<std::size_t>(i)].A(), b.cells[static_cast<std::size_t>(i)].A());
    EXPECT_EQ(a.cells[static_cast<std::size_t>(i)].b(), b.cells[static_cast<std::size_t>(i)].b());
  }
  EXPECT_EQ(a.adjacency, b.adjacency);
  bool differs = a.size() != c.size();
  for (int i = 0; !differs && i < a.size(); ++i) {
    differs = a.generators[static_cast<std::size_t>(i)] != c.generators[static_cast<std::size_t>(i)];
  }
  EXPECT_TRUE(differs);
}

TEST(DecomposeRrt, BlockedEnvironmentFails) {
  const Environment env = load_environment(fixture("blocked_square.json"));
  EXPECT_EQ(kind_of([&] { decompose_rrt(env, 7, RrtParams{}); }), ErrorKind::DecompositionFailed);
}

TEST(DecomposeRrt, SingleNodeIsBoundary) {
  const Environment env = load_environment(fixture("open_square.json"));
  RrtParams p;
  p.n_samples = 1;
  const CellDecomposition d = decompose_rrt(env, 7, p);
  ASSERT_EQ(d.size(), 1);
  EXPECT_NEAR(polygon_area(vertices_2d(d.cells[0])), 16.0, 1e-9);
  EXPECT_TRUE(d.adjacency.empty());
}

TEST(DecomposeRrt, AdjacentCellsShareFaces) {
  const Environment env = load_environment(fixture("square_with_block.json"));
  const CellDecomposition d = decompose_rrt(env, 9, RrtParams{});
  ASSERT_FALSE(d.adjacency.empty());
  for (const auto& [i, j] : d.adjacency) {
    EXPECT_LT(i, j);
    EXPECT_TRUE(common_face(d.cells[static_cast<std::size_t>(i)], d.cells[static_cast<std::size_t>(j)]));
  }
  for (const auto& lm : d.landmarks) EXPECT_EQ(lm.size(), env.landmarks.size());
}

TEST(BuildGraph, SmallCases) {
  Environment env;
  env.boundary = {{0, 0}, {2, 0}, {2, 1}, {0, 1}};
  env.landmarks = {{0, 0}};
  env.cells = std::vector<std::vector<Point>>{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{1, 0}, {2, 0}, {2, 1}, {1, 1}}};
  const AbstractGraph g = build_graph(decomposition_from_cells(env));
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 0));

  env.cells = std::vector<std::vector<Point>>{{{0, 0}, {2, 0}, {2, 1}, {0, 1}}};
  EXPECT_TRUE(build_graph(decomposition_from_cells(env)).edges.empty());
}

TEST(BuildGraph, CorridorIsSixCycle) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const AbstractGraph g = build_graph(decomposition_from_cells(env));
  EXPECT_EQ(g.num_nodes, 6);
  EXPECT_EQ(g.edges.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_TRUE(g.has_edge(i, (i + 1) % 6)) << i;
    EXPECT_EQ(g.neighbors[static_cast<std::size_t>(i)].size(), 2u);
  }
}

TEST(DecompositionFromCells, UsesCellLandmarks) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  EXPECT_EQ(d.landmarks[0], (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(d.landmarks[4], (std::vector<int>{4, 5, 6, 7}));
  EXPECT_EQ(d.locate(Point(1, 0.2)), 0);
  EXPECT_EQ(d.locate(Point(3, 2)), -1);
}
