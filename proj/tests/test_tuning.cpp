#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qsvm/dataset.hpp"
#include "qsvm/synth.hpp"
#include "qsvm/tuning.hpp"
#include "test_util.hpp"

using namespace qsvm;
using qsvm::testing::uniform;

namespace {

std::vector<LabeledSample> blobs(Rng& rng, int per_class, double gap, double spread = 0.3) {
  std::vector<LabeledSample> d;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int y = i % 2 == 0 ? 1 : -1;
    d.push_back({{y * gap / 2 + spread * standard_normal(rng), spread * standard_normal(rng)}, y});
  }
  return d;
}

std::vector<LabeledSample> noise(Rng& rng, int per_class) {
  std::vector<LabeledSample> d;
  for (int i = 0; i < 2 * per_class; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = uniform(rng, -1, 1);
    d.push_back({x, i % 2 == 0 ? 1 : -1});
  }
  return d;
}

std::vector<LabeledSample> synthetic_samples(std::uint64_t seed, int per_class) {
  SynthSpec s;
  s.windows_per_class = {per_class, per_class};
  s.seed = seed;
  const auto cap = synth_generate(s);
  return to_samples(extract_features(cap.frames, cap.annotations, "synthetic"));
}

}  // namespace

TEST(Folds, StratifiedAndBalanced) {
  Rng rng(1);
  const auto d = blobs(rng, 23, 2);
  const auto fold = stratified_folds(d, 5, 7);
  for (int k = 0; k < 5; ++k) {
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (fold[i] == k) (d[i].label == 1 ? pos : neg)++;
    }
    EXPECT_GE(pos, 4);
    EXPECT_LE(pos, 5);
    EXPECT_GE(neg, 4);
    EXPECT_LE(neg, 5);
  }
  EXPECT_EQ(stratified_folds(d, 5, 7), fold);
  EXPECT_NE(stratified_folds(d, 5, 8), fold);
}

TEST(Folds, InsufficientData) {
  Rng rng(2);
  auto d = blobs(rng, 4, 2);
  EXPECT_THROW(stratified_folds(d, 5, 1), InsufficientDataError);
  TuningProtocol p;
  EXPECT_THROW(fitness_for(d, p), InsufficientDataError);
}

TEST(Partition, RoundsAreDisjointAndCover) {
  Rng rng(3);
  const auto d = blobs(rng, 20, 2);
  for (auto mode : {FitnessMode::KFoldCv, FitnessMode::Holdout}) {
    TuningProtocol p;
    p.mode = mode;
    p.seed = 5;
    const auto part = make_partition(d, p);
    std::vector<int> validated(d.size(), 0);
    for (const auto& r : part.rounds) {
      std::set<std::size_t> tr(r.train.begin(), r.train.end());
      for (auto i : r.validate) {
        EXPECT_FALSE(tr.count(i)) << "sample " << i << " both trained and validated";
        ++validated[i];
      }
      EXPECT_EQ(r.train.size() + r.validate.size(), d.size());
    }
    if (mode != FitnessMode::KFoldCv) continue;
    for (int v : validated) EXPECT_EQ(v, 1);
  }
}

TEST(Partition, HoldoutFractionPerClass) {
  Rng rng(4);
  const auto d = blobs(rng, 20, 2);
  TuningProtocol p;
  p.mode = FitnessMode::Holdout;
  p.holdout_fraction = 0.25;
  const auto part = make_partition(d, p);
  EXPECT_EQ(part.rounds.size(), 1u);
  EXPECT_EQ(part.rounds[0].validate.size(), 10u);
}

TEST(Fitness, SeparableDataScoresOne) {
  Rng rng(5);
  const auto d = blobs(rng, 25, 6, 0.2);
  TuningProtocol p;
  const auto f = fitness_for(d, p);
  const double params[2] = {1.0, 1.0};
  EXPECT_EQ(f(params), 1.0);
}

TEST(Fitness, ShuffledLabelsScoreChance) {
  Rng rng(6);
  double sum = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto d = noise(rng, 40);
    TuningProtocol p;
    p.seed = t;
    const double params[2] = {1.0, 1.0};
    sum += fitness_for(d, p)(params);
  }
  EXPECT_NEAR(sum / trials, 0.5, 0.05);
}

TEST(Fitness, MemorizationDoesNotLeakIntoCv) {
  // Tiny sigma memorizes the training set: perfect on seen samples, chance on
  // unseen ones. Cross-validation must report chance.
  Rng rng(7);
  const auto d = noise(rng, 50);
  const double params[2] = {16.0, 0.01};
  TuningProtocol train_mode;
  train_mode.mode = FitnessMode::TrainAccuracy;
  EXPECT_EQ(fitness_for(d, train_mode)(params), 1.0);
  TuningProtocol cv;
  EXPECT_LT(fitness_for(d, cv)(params), 0.65);
  TuningProtocol holdout;
  holdout.mode = FitnessMode::Holdout;
  EXPECT_LT(fitness_for(d, holdout)(params), 0.7);
}

TEST(Fitness, SentinelNeverInfluencesItsOwnValidation) {
  Rng rng(8);
  const auto d = blobs(rng, 15, 1.5, 0.6);
  const int k = 5;
  const auto fold = stratified_folds(d, k, 3);
  const auto part = partition_from_folds(fold, k);
  TuningProtocol p;
  const auto base = evaluate_partition(d, part, 4.0, 0.7, p);
  for (std::size_t s = 0; s < d.size(); s += 3) {
    // A flipped label on the sentinel cannot move its own validation score.
    auto flipped = d;
    flipped[s].label = -flipped[s].label;
    EXPECT_EQ(evaluate_partition(flipped, part, 4.0, 0.7, p).decision[s], base.decision[s]) << "sentinel " << s;
    // Nor can an outlier sentinel move any decision in its fold.
    auto poisoned = flipped;
    poisoned[s].features = {poisoned[s].features[0] * 5, 3.0};
    const auto alt = evaluate_partition(poisoned, part, 4.0, 0.7, p);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i == s || fold[i] != fold[s]) continue;
      EXPECT_EQ(alt.decision[i], base.decision[i]) << "sentinel " << s << ", sample " << i;
    }
  }
}

TEST(Fitness, DeterministicAcrossCalls) {
  Rng rng(9);
  const auto d = blobs(rng, 20, 1, 0.8);
  TuningProtocol p;
  p.seed = 11;
  const auto f = fitness_for(d, p);
  const double params[2] = {2.0, 0.5};
  const double a = f(params);
  EXPECT_EQ(f(params), a);
  EXPECT_EQ(fitness_for(d, p)(params), a);
}

TEST(Fitness, RejectsWrongArity) {
  Rng rng(10);
  const auto f = fitness_for(blobs(rng, 10, 2), TuningProtocol{});
  const double one[1] = {1.0};
  EXPECT_THROW(f(one), DimensionMismatchError);
}

TEST(Grid, PowersOfTwoShape) {
  const auto g = ParamGrid::powers_of_two();
  EXPECT_EQ(g.c_values.size(), 7u);
  EXPECT_EQ(g.sigma_values.size(), 9u);
  EXPECT_EQ(g.c_values.front(), 0.25);
  EXPECT_EQ(g.c_values.back(), 16.0);
  EXPECT_EQ(g.sigma_values.front(), 0.0625);
  EXPECT_EQ(g.sigma_values.back(), 16.0);
}

TEST(Grid, SingleCell) {
  ParamGrid g{{3.0}, {0.5}};
  const auto r = grid_search([](std::span<const double> p) { return p[0] * p[1]; }, g);
  EXPECT_EQ(r.best_c, 3.0);
  EXPECT_EQ(r.best_sigma, 0.5);
  EXPECT_EQ(r.fitness, 1.5);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Grid, FindsArgmaxOfMock) {
  const auto g = ParamGrid::powers_of_two();
  auto f = [](std::span<const double> p) {
    return -std::pow(std::log2(p[0]) - 2, 2) - std::pow(std::log2(p[1]) + 1, 2);
  };
  const auto r = grid_search(f, g, 4);
  EXPECT_EQ(r.best_c, 4.0);
  EXPECT_EQ(r.best_sigma, 0.5);
  EXPECT_EQ(r.trace.size(), 63u);
  for (std::size_t k = 0; k < r.trace.size(); ++k) EXPECT_EQ(r.trace[k].index, static_cast<int>(k));
}

TEST(Grid, TiesPreferSmallestCThenSigma) {
  const auto g = ParamGrid::powers_of_two();
  const auto r = grid_search([](std::span<const double> p) { return p[0] >= 1.0 && p[1] >= 2.0 ? 1.0 : 0.0; }, g);
  EXPECT_EQ(r.best_c, 1.0);
  EXPECT_EQ(r.best_sigma, 2.0);
}

TEST(Grid, ReportsFailingCell) {
  ParamGrid g{{1.0, 2.0}, {1.0}};
  try {
    grid_search([](std::span<const double> p) -> double {
      if (p[0] == 2.0) throw std::runtime_error("bad");
      return 0.0;
    }, g);
    FAIL();
  } catch (const GridCellError& e) {
    EXPECT_NE(std::string(e.what()).find("C=2"), std::string::npos);
  }
}

TEST(Grid, BestMatchesDirectEvaluation) {
  Rng rng(11);
  const auto d = blobs(rng, 20, 1.2, 0.7);
  TuningProtocol p;
  p.threads = 3;
  ParamGrid g{{0.5, 2, 8}, {0.25, 1, 4}};
  const auto r = grid_search(d, g, p);
  const double best[2] = {r.best_c, r.best_sigma};
  EXPECT_EQ(fitness_for(d, p)(best), r.fitness);
  for (const auto& e : r.trace) EXPECT_LE(e.fitness, r.fitness);
}

TEST(Qga, TunesMockWithinRange) {
  QgaConfig c;
  c.population_size = 20;
  c.max_generations = 10;
  c.seed = 3;
  const auto space = default_search_space();
  const auto r = qga_tune([](std::span<const double> p) { return -std::abs(p[0] - 5) - std::abs(p[1] - 1); }, space, c);
  EXPECT_GE(r.best_c, 0.25);
  EXPECT_LE(r.best_c, 16.0);
  EXPECT_EQ(r.trace.size(), 20u * 11u);
  EXPECT_EQ(r.generations.size(), 11u);
  for (const auto& g : r.generations) EXPECT_TRUE(g.individuals.empty());
  double best = -1e300;
  for (const auto& e : r.trace) best = std::max(best, e.fitness);
  EXPECT_EQ(best, r.fitness);
}

TEST(Qga, RejectsNonTwoDimensionalSpace) {
  SearchSpace s{{{"x", 0, 1, 60}}};
  EXPECT_THROW(qga_tune([](std::span<const double>) { return 0.0; }, s, QgaConfig{}), InvalidArgumentError);
}

TEST(Qga, MatchesCoarseGridOnSynthetic) {
  const auto d = synthetic_samples(21, 40);
  TuningProtocol p;
  p.seed = 1;
  p.threads = 4;
  QgaConfig c;
  c.population_size = 20;
  c.max_generations = 5;
  c.seed = 2;
  c.threads = 4;
  const auto grid = grid_search(d, ParamGrid::powers_of_two(-2, 4, -4, 4), p);
  ParamGrid coarse{{0.25, 1, 4, 8, 16}, {0.0625, 0.25, 1, 4, 16}};
  const auto coarse_r = grid_search(d, coarse, p);
  const auto q = qga_tune(d, default_search_space(), p, c);
  EXPECT_GE(q.fitness, coarse_r.fitness - 0.02);
  EXPECT_GE(grid.fitness, coarse_r.fitness);
}

TEST(Trace, Format) {
  ParamGrid g{{1.0}, {0.5, 2.0}};
  const auto r = grid_search([](std::span<const double> p) { return p[1]; }, g);
  std::ostringstream os;
  write_trace(os, r);
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "# method index C sigma fitness seconds");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("grid 0 1 0.5 0.5 ", 0), 0u);
}
