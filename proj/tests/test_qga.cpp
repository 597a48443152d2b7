#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "qsvm/qga.hpp"
#include "test_util.hpp"

using namespace qsvm;
using qsvm::testing::uniform;

namespace {

SearchSpace line_space(int bits, double lo = -5, double hi = 5) { return {{{"x", lo, hi, bits}}}; }

QgaConfig small_config(int bits, int generations, std::uint64_t seed) {
  QgaConfig c;
  c.population_size = 20;
  c.qubit_length = bits;
  c.max_generations = generations;
  c.seed = seed;
  return c;
}

// The strategy table, transcribed row by row: x best better dtheta s(ab>0) s(ab<0) s(a=0) s(b=0).
// "R" marks a cell whose sign is chosen at random.
constexpr const char* kStrategyTable = R"(
0 0 F 0 0 0 0 0
0 0 T 0 0 0 0 0
0 1 F 1 +1 -1 0 R
0 1 T 1 -1 +1 R 0
1 0 F 1 -1 +1 R 0
1 0 T 1 +1 -1 0 R
1 1 F 0 0 0 0 0
1 1 T 0 0 0 0 0
)";

}  // namespace

TEST(Qubit, InitialAmplitudes) {
  QgaConfig c;
  c.population_size = 3;
  c.qubit_length = 4;
  const auto pop = init_population(c);
  ASSERT_EQ(pop.size(), 3u);
  for (const auto& ch : pop) {
    ASSERT_EQ(ch.genes.size(), 4u);
    for (const auto& g : ch.genes) {
      EXPECT_DOUBLE_EQ(g.alpha, 0.7071067811865476);
      EXPECT_DOUBLE_EQ(g.beta, 0.7071067811865476);
      EXPECT_NEAR(g.probability_one(), 0.5, 1e-15);
    }
  }
}

TEST(Measure, CertainGenes) {
  Rng rng(1);
  QubitChromosome ch{{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}};
  for (int t = 0; t < 100; ++t) {
    const auto b = measure(ch, rng);
    EXPECT_EQ(b, (Bits{0, 1, 0, 1}));
  }
}

TEST(Measure, UniformGeneIsFair) {
  Rng rng(2);
  QubitChromosome ch{std::vector<QubitGene>(100)};
  long ones = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t)
    for (auto b : measure(ch, rng)) ones += b;
  EXPECT_NEAR(static_cast<double>(ones) / (100.0 * trials), 0.5, 0.01);
}

TEST(Measure, FollowsBetaSquared) {
  Rng rng(3);
  const double theta = 0.3;
  QubitChromosome ch{std::vector<QubitGene>(100, QubitGene{std::cos(theta), std::sin(theta)})};
  long ones = 0;
  for (int t = 0; t < 1000; ++t)
    for (auto b : measure(ch, rng)) ones += b;
  EXPECT_NEAR(ones / 1e5, std::sin(theta) * std::sin(theta), 0.01);
}

TEST(Decode, Endpoints) {
  SearchSpace s{{{"C", 0.25, 16, 30}, {"sigma", 0.0625, 16, 30}}};
  Bits zeros(60, 0), ones(60, 1);
  const auto lo = decode(zeros, s), hi = decode(ones, s);
  EXPECT_EQ(lo[0], 0.25);
  EXPECT_EQ(lo[1], 0.0625);
  EXPECT_EQ(hi[0], 16.0);
  EXPECT_EQ(hi[1], 16.0);
}

TEST(Decode, MostSignificantBitFirst) {
  SearchSpace s{{{"C", 0.25, 16, 30}}};
  Bits b(30, 0);
  b[0] = 1;  // 2^29
  const double expected = 0.25 + (536870912.0 / 1073741823.0) * 15.75;
  EXPECT_DOUBLE_EQ(decode(b, s)[0], expected);
  EXPECT_NEAR(expected, 8.125000007, 1e-9);
  Bits lsb(30, 0);
  lsb[29] = 1;
  EXPECT_DOUBLE_EQ(decode(lsb, s)[0], 0.25 + 15.75 / 1073741823.0);
}

TEST(Decode, SlicesPerDimension) {
  SearchSpace s{{{"a", 0, 3, 2}, {"b", 0, 7, 3}}};
  const auto v = decode(Bits{1, 0, 0, 1, 1}, s);
  EXPECT_DOUBLE_EQ(v[0], 2.0);
  EXPECT_DOUBLE_EQ(v[1], 3.0);
  EXPECT_THROW(decode(Bits{1, 0}, s), DimensionMismatchError);
}

TEST(Decode, MonotoneInInteger) {
  const auto s = line_space(10);
  double prev = -1e300;
  for (int v = 0; v < 1024; ++v) {
    Bits b(10);
    for (int k = 0; k < 10; ++k) b[k] = (v >> (9 - k)) & 1;
    const double x = decode(b, s)[0];
    EXPECT_GT(x, prev);
    prev = x;
  }
}

TEST(Rotation, StrategyTableFidelity) {
  std::istringstream in(kStrategyTable);
  const AmplitudeQuadrant quads[4] = {AmplitudeQuadrant::SameSign, AmplitudeQuadrant::OppositeSign,
                                      AmplitudeQuadrant::AlphaZero, AmplitudeQuadrant::BetaZero};
  int rows = 0;
  int x, best, dtheta;
  std::string better;
  while (in >> x >> best >> better >> dtheta) {
    ++rows;
    for (const auto q : quads) {
      std::string cell;
      in >> cell;
      const auto rule = rotation_rule(x, best, better == "T", q);
      EXPECT_EQ(rule.rotates, dtheta == 1) << "row " << rows;
      if (cell == "R") {
        EXPECT_TRUE(rule.random_sign) << "row " << rows;
      } else {
        EXPECT_FALSE(rule.random_sign) << "row " << rows;
        EXPECT_EQ(rule.sign, std::stoi(cell)) << "row " << rows;
      }
    }
  }
  EXPECT_EQ(rows, 8);
}

TEST(Rotation, QuadrantClassification) {
  EXPECT_EQ(classify({0.6, 0.8}), AmplitudeQuadrant::SameSign);
  EXPECT_EQ(classify({-0.6, -0.8}), AmplitudeQuadrant::SameSign);
  EXPECT_EQ(classify({0.6, -0.8}), AmplitudeQuadrant::OppositeSign);
  EXPECT_EQ(classify({0.0, 1.0}), AmplitudeQuadrant::AlphaZero);
  EXPECT_EQ(classify({1.0, 0.0}), AmplitudeQuadrant::BetaZero);
}

TEST(Rotation, AngleMagnitudeAndSign) {
  Rng rng(4);
  const double d = 0.01 * std::numbers::pi;
  const QubitGene same{0.6, 0.8}, opp{0.6, -0.8};
  EXPECT_EQ(rotation_angle(same, 0, 1, false, d, rng), d);
  EXPECT_EQ(rotation_angle(opp, 0, 1, false, d, rng), -d);
  EXPECT_EQ(rotation_angle(same, 1, 0, false, d, rng), -d);
  EXPECT_EQ(rotation_angle(same, 1, 1, true, d, rng), 0.0);
  EXPECT_EQ(rotation_angle(same, 0, 0, false, d, rng), 0.0);
}

TEST(Rotation, RandomSignCellsUseBothDirections) {
  Rng rng(5);
  const double d = 0.01 * std::numbers::pi;
  int pos = 0, neg = 0;
  for (int t = 0; t < 1000; ++t) {
    const double a = rotation_angle({1.0, 0.0}, 0, 1, false, d, rng);
    ASSERT_EQ(std::abs(a), d);
    (a > 0 ? pos : neg)++;
  }
  EXPECT_GT(pos, 400);
  EXPECT_GT(neg, 400);
}

TEST(Rotation, NonImprovingRowsPullTowardBestBit) {
  // With f(x) <= f(best), a rotation moves P(bit = best) up in every
  // deterministic quadrant.
  const double d = 0.01 * std::numbers::pi;
  Rng rng(6);
  for (int t = 0; t < 1000; ++t) {
    const double phi = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const QubitGene g{std::cos(phi), std::sin(phi)};
    if (std::abs(g.alpha) < 0.05 || std::abs(g.beta) < 0.05) continue;
    for (int best = 0; best <= 1; ++best) {
      const int x = 1 - best;
      const auto r = apply_rotation(g, rotation_angle(g, x, best, false, d, rng));
      if (best == 1)
        EXPECT_GT(r.probability_one(), g.probability_one());
      else
        EXPECT_LT(r.probability_one(), g.probability_one());
    }
  }
}

TEST(Rotation, PreservesNormalization) {
  Rng rng(7);
  for (int t = 0; t < 100000; ++t) {
    const double phi = uniform(rng, -4, 4);
    QubitGene g{std::cos(phi), std::sin(phi)};
    const auto r = apply_rotation(g, uniform(rng, -1, 1));
    EXPECT_NEAR(r.alpha * r.alpha + r.beta * r.beta, 1.0, 1e-12);
  }
}

TEST(Rotation, AgreementIsAFixedPoint) {
  QgaConfig c = small_config(8, 1, 1);
  Rng rng(8);
  QubitChromosome ch;
  for (int i = 0; i < 8; ++i) {
    const double phi = uniform(rng, 0, 6);
    ch.genes.push_back({std::cos(phi), std::sin(phi)});
  }
  const Bits bits{0, 1, 1, 0, 1, 0, 0, 1};
  EXPECT_EQ(rotate(ch, bits, bits, false, c, rng), ch);
  EXPECT_EQ(rotate(ch, bits, bits, true, c, rng), ch);
}

TEST(Run, ZeroGenerationsIsInitialMeasurementOnly) {
  std::atomic<int> calls{0};
  const auto r = run(line_space(10), [&](std::span<const double> x) {
    ++calls;
    return -x[0] * x[0];
  }, small_config(10, 0, 3));
  EXPECT_EQ(calls.load(), 20);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].generation, 0);
  double best = -1e300;
  for (const auto& ind : r.history[0].individuals) best = std::max(best, ind.fitness);
  EXPECT_EQ(r.best_fitness, best);
}

TEST(Run, BestTraceIsMonotone) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> table(1024);
    for (auto& v : table) v = uniform(rng, 0, 1);
    const auto space = line_space(10, 0, 1023);
    const auto r = run(space, [&](std::span<const double> x) { return table[static_cast<std::size_t>(std::lround(x[0]))]; },
                       small_config(10, 30, t));
    ASSERT_EQ(r.history.size(), 31u);
    for (std::size_t g = 1; g < r.history.size(); ++g)
      EXPECT_GE(r.history[g].best_fitness, r.history[g - 1].best_fitness);
    EXPECT_EQ(r.history.back().best_fitness, r.best_fitness);
  }
}

TEST(Run, DeterministicAndThreadIndependent) {
  auto f = [](std::span<const double> x) { return std::sin(3 * x[0]) - 0.1 * x[0] * x[0] + std::cos(5 * x[1]); };
  SearchSpace s{{{"a", -3, 3, 12}, {"b", -1, 1, 12}}};
  auto c = small_config(24, 15, 42);
  const auto a = run(s, f, c);
  c.threads = 4;
  const auto b = run(s, f, c);
  EXPECT_EQ(a.best_bits, b.best_bits);
  EXPECT_EQ(a.best_fitness, b.best_fitness);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t g = 0; g < a.history.size(); ++g)
    for (std::size_t i = 0; i < a.history[g].individuals.size(); ++i)
      EXPECT_EQ(a.history[g].individuals[i].bits, b.history[g].individuals[i].bits);
  c.seed = 43;
  EXPECT_NE(run(s, f, c).history[0].individuals[0].bits, a.history[0].individuals[0].bits);
}

TEST(Run, FindsOneDimensionalOptimum) {
  // Smooth unimodal landscape on [0, 10]; the optimum 6.3 must be found to 1%.
  const auto space = line_space(16, 0, 10);
  auto c = small_config(16, 60, 11);
  c.population_size = 40;
  const auto r = run(space, [](std::span<const double> x) { return -(x[0] - 6.3) * (x[0] - 6.3); }, c);
  EXPECT_NEAR(r.best_params[0], 6.3, 0.063);
}

TEST(Run, CatastropheResetsAfterStall) {
  // A constant landscape never improves after generation 0.
  auto c = small_config(8, 6, 1);
  c.catastrophe_patience = 2;
  const auto r = run(line_space(8), [](std::span<const double>) { return 1.0; }, c);
  ASSERT_EQ(r.history.size(), 7u);
  EXPECT_FALSE(r.history[0].catastrophe);
  EXPECT_FALSE(r.history[1].catastrophe);
  EXPECT_TRUE(r.history[2].catastrophe);
  EXPECT_FALSE(r.history[3].catastrophe);
  EXPECT_TRUE(r.history[4].catastrophe);
}

TEST(Run, ConvergenceEpsilonStopsEarly) {
  auto c = small_config(8, 50, 1);
  c.convergence_epsilon = 1e-6;
  const auto r = run(line_space(8), [](std::span<const double>) { return 1.0; }, c);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(Run, FitnessErrorsCarryContext) {
  auto c = small_config(8, 3, 1);
  try {
    run(line_space(8), [](std::span<const double>) -> double { throw std::runtime_error("boom"); }, c);
    FAIL();
  } catch (const FitnessEvaluationError& e) {
    EXPECT_EQ(e.generation(), 0);
    EXPECT_EQ(e.individual(), 0u);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  EXPECT_THROW(run(line_space(8), [](std::span<const double>) { return std::nan(""); }, c), FitnessEvaluationError);
}

TEST(Run, RejectsMismatchedLength) {
  auto c = small_config(9, 3, 1);
  EXPECT_THROW(run(line_space(8), [](std::span<const double>) { return 0.0; }, c), InvalidArgumentError);
}

TEST(Run, GenerationTraceFormat) {
  const auto r = run(line_space(8), [](std::span<const double> x) { return x[0]; }, small_config(8, 2, 1));
  std::ostringstream os;
  write_generation_trace(os, r.history, line_space(8));
  const auto s = os.str();
  EXPECT_EQ(s.rfind("# generation best_fitness x\n", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
