#pragma once

// (C, sigma) selection for the RBF SVM: a fitness protocol that keeps
// validation samples out of training, an exhaustive grid baseline, and the
// QGA-driven search.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qsvm/error.hpp"
#include "qsvm/parallel.hpp"
#include "qsvm/qga.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/svm.hpp"

namespace qsvm {

enum class FitnessMode { KFoldCv, Holdout, TrainAccuracy };

inline const char* fitness_mode_name(FitnessMode m) {
  switch (m) {
    case FitnessMode::KFoldCv: return "cv";
    case FitnessMode::Holdout: return "holdout";
    case FitnessMode::TrainAccuracy: return "train";
  }
  return "?";
}

struct TuningProtocol {
  FitnessMode mode = FitnessMode::KFoldCv;
  int folds = 5;
  double holdout_fraction = 0.3;  // share of each class held out
  std::uint64_t seed = 0;
  double svm_tolerance = 1e-3;
  long svm_max_passes = 0;
  // Worker threads for grid cells. Never changes the outcome.
  unsigned threads = 1;

  void validate() const {
    if (mode == FitnessMode::KFoldCv && folds < 2)
      throw InvalidArgumentError("k-fold protocol needs at least 2 folds");
    if (mode == FitnessMode::Holdout && !(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw InvalidArgumentError("holdout fraction must lie in (0, 1)");
  }
};

// One or more (train, validate) index rounds over a dataset.
struct Partition {
  struct Round {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validate;
  };
  std::vector<Round> rounds;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> indices_by_class(std::span<const LabeledSample> data) {
  std::vector<std::vector<std::size_t>> by(2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].label == 1)
      by[0].push_back(i);
    else if (data[i].label == -1)
      by[1].push_back(i);
    else
      throw InvalidArgumentError("sample " + std::to_string(i) + " has label " +
                                 std::to_string(data[i].label) + "; expected +1 or -1");
  }
  return by;
}

}  // namespace detail

// Stratified fold id per sample: each class is shuffled with the seed and dealt
// round-robin, so every fold sees both classes.
inline std::vector<int> stratified_folds(std::span<const LabeledSample> data, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgumentError("stratified_folds: k must be >= 2");
  auto by = detail::indices_by_class(data);
  std::vector<int> fold(data.size(), -1);
  for (std::size_t c = 0; c < by.size(); ++c) {
    if (by[c].size() < static_cast<std::size_t>(k))
      throw InsufficientDataError("class " + std::string(c == 0 ? "+1" : "-1") + " has " +
                                  std::to_string(by[c].size()) + " samples; " + std::to_string(k) +
                                  "-fold CV would leave a single-class fold");
    auto rng = make_rng(seed, {0x666f6c64ULL, c});
    shuffle(by[c], rng);
    for (std::size_t r = 0; r < by[c].size(); ++r) fold[by[c][r]] = static_cast<int>(r % k);
  }
  return fold;
}

inline Partition partition_from_folds(std::span<const int> fold, int k) {
  Partition p;
  p.rounds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < fold.size(); ++i)
    for (int r = 0; r < k; ++r)
      (fold[i] == r ? p.rounds[r].validate : p.rounds[r].train).push_back(i);
  return p;
}

inline Partition make_partition(std::span<const LabeledSample> data, const TuningProtocol& protocol) {
  protocol.validate();
  switch (protocol.mode) {
    case FitnessMode::KFoldCv: {
      const auto fold = stratified_folds(data, protocol.folds, protocol.seed);
      return partition_from_folds(fold, protocol.folds);
    }
    case FitnessMode::Holdout: {
      auto by = detail::indices_by_class(data);
      Partition p;
      p.rounds.resize(1);
      for (std::size_t c = 0; c < by.size(); ++c) {
        if (by[c].size() < 2)
          throw InsufficientDataError("holdout needs at least 2 samples per class");
        auto rng = make_rng(protocol.seed, {0x686f6c64ULL, c});
        shuffle(by[c], rng);
        auto held = static_cast<std::size_t>(std::llround(protocol.holdout_fraction * by[c].size()));
        held = std::clamp<std::size_t>(held, 1, by[c].size() - 1);
        for (std::size_t r = 0; r < by[c].size(); ++r)
          (r < held ? p.rounds[0].validate : p.rounds[0].train).push_back(by[c][r]);
      }
      std::sort(p.rounds[0].train.begin(), p.rounds[0].train.end());
      std::sort(p.rounds[0].validate.begin(), p.rounds[0].validate.end());
      return p;
    }
    case FitnessMode::TrainAccuracy: {
      auto by = detail::indices_by_class(data);
      if (by[0].empty() || by[1].empty())
        throw InsufficientDataError("training-accuracy fitness needs both classes");
      Partition p;
      p.rounds.resize(1);
      for (std::size_t i = 0; i < data.size(); ++i) {
        p.rounds[0].train.push_back(i);
        p.rounds[0].validate.push_back(i);
      }
      return p;
    }
  }
  return {};
}

struct PartitionEvaluation {
  double accuracy = 0.0;              // mean over rounds
  std::vector<double> decision;       // last validation decision value per sample (NaN if never validated)
};

inline PartitionEvaluation evaluate_partition(std::span<const LabeledSample> data, const Partition& partition,
                                              double c, double sigma, const TuningProtocol& protocol) {
  PartitionEvaluation out;
  out.decision.assign(data.size(), std::nan(""));
  TrainConfig tc;
  tc.penalty_c = c;
  tc.tolerance = protocol.svm_tolerance;
  tc.max_passes = protocol.svm_max_passes;
  tc.seed = protocol.seed;
  const auto kernel = KernelSpec::rbf(sigma);
  double acc_sum = 0.0;
  std::vector<LabeledSample> train_set;
  for (const auto& round : partition.rounds) {
    train_set.clear();
    for (auto i : round.train) train_set.push_back(data[i]);
    const auto model = train(train_set, kernel, tc);
    std::size_t correct = 0;
    for (auto i : round.validate) {
      const double f = decision_value(model, data[i].features);
      out.decision[i] = f;
      if ((f >= 0.0 ? 1 : -1) == data[i].label) ++correct;
    }
    acc_sum += round.validate.empty() ? 0.0 : static_cast<double>(correct) / round.validate.size();
  }
  out.accuracy = acc_sum / static_cast<double>(partition.rounds.size());
  return out;
}

// Fitness over params = (C, sigma): validation accuracy in [0, 1] under the
// protocol. The partition is fixed at construction, so repeated calls with
// the same point agree exactly.
inline FitnessFunction fitness_for(std::span<const LabeledSample> data, const TuningProtocol& protocol) {
  auto owned = std::make_shared<const std::vector<LabeledSample>>(data.begin(), data.end());
  auto partition = std::make_shared<const Partition>(make_partition(*owned, protocol));
  return [owned, partition, protocol](std::span<const double> params) {
    if (params.size() != 2)
      throw DimensionMismatchError("fitness expects (C, sigma), got " + std::to_string(params.size()) +
                                   " parameters");
    return evaluate_partition(*owned, *partition, params[0], params[1], protocol).accuracy;
  };
}

// ---------------------------------------------------------------------------

struct ParamGrid {
  std::vector<double> c_values;
  std::vector<double> sigma_values;

  // Powers of two: C in 2^-2..2^4, sigma in 2^-4..2^4 (7 x 9 = 63 pairs).
  static ParamGrid powers_of_two(int c_lo = -2, int c_hi = 4, int s_lo = -4, int s_hi = 4) {
    ParamGrid g;
    for (int e = c_lo; e <= c_hi; ++e) g.c_values.push_back(std::ldexp(1.0, e));
    for (int e = s_lo; e <= s_hi; ++e) g.sigma_values.push_back(std::ldexp(1.0, e));
    return g;
  }

  void validate() const {
    auto check = [](const std::vector<double>& v, const char* name) {
      if (v.empty()) throw InvalidArgumentError(std::string("grid ") + name + " is empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) throw InvalidArgumentError(std::string("grid ") + name + " must be positive");
        if (i > 0 && !(v[i] > v[i - 1]))
          throw InvalidArgumentError(std::string("grid ") + name + " must be strictly ascending");
      }
    };
    check(c_values, "c_values");
    check(sigma_values, "sigma_values");
  }
};

enum class TuningMethod { Grid, Qga };

inline const char* tuning_method_name(TuningMethod m) { return m == TuningMethod::Grid ? "grid" : "qga"; }

struct TraceEntry {
  TuningMethod method;
  int index;  // grid cell index, or QGA generation
  double c;
  double sigma;
  double fitness;
  double seconds;  // cumulative since the search started
};

struct TuningResult {
  TuningMethod method = TuningMethod::Grid;
  double best_c = 0.0;
  double best_sigma = 0.0;
  double fitness = 0.0;
  double wall_time = 0.0;
  std::vector<TraceEntry> trace;
  // QGA only: best-so-far per generation (individuals stripped).
  std::vector<GenerationRecord> generations;
};

class GridCellError : public Error {
 public:
  GridCellError(double c, double sigma, const std::string& what)
      : Error("grid search failed at C=" + format_double(c) + ", sigma=" + format_double(sigma) + ": " +
              what) {}
};

namespace detail {
using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace detail

// Evaluates every (C, sigma) cell. Ties go to the smallest C, then smallest sigma.
inline TuningResult grid_search(const FitnessFunction& fitness, const ParamGrid& grid, unsigned threads = 1) {
  grid.validate();
  const auto t0 = detail::Clock::now();
  const std::size_t ns = grid.sigma_values.size();
  const std::size_t cells = grid.c_values.size() * ns;
  std::vector<double> values(cells);
  std::vector<double> done_at(cells);
  parallel_for(cells, threads, [&](std::size_t k) {
    const double c = grid.c_values[k / ns];
    const double s = grid.sigma_values[k % ns];
    const double params[2] = {c, s};
    try {
      values[k] = fitness(params);
    } catch (const std::exception& e) {
      throw GridCellError(c, s, e.what());
    }
    done_at[k] = detail::seconds_since(t0);
  });

  TuningResult r;
  r.method = TuningMethod::Grid;
  std::size_t best = 0;
  for (std::size_t k = 0; k < cells; ++k) {
    r.trace.push_back({TuningMethod::Grid, static_cast<int>(k), grid.c_values[k / ns],
                       grid.sigma_values[k % ns], values[k], done_at[k]});
    if (values[k] > values[best]) best = k;
  }
  r.best_c = grid.c_values[best / ns];
  r.best_sigma = grid.sigma_values[best % ns];
  r.fitness = values[best];
  r.wall_time = detail::seconds_since(t0);
  return r;
}

inline TuningResult grid_search(std::span<const LabeledSample> data, const ParamGrid& grid,
                                const TuningProtocol& protocol) {
  return grid_search(fitness_for(data, protocol), grid, protocol.threads);
}

// C over [2^-2, 2^4] and sigma over [2^-4, 2^4], 30 bits each.
inline SearchSpace default_search_space() {
  return SearchSpace{{{"C", 0.25, 16.0, 30}, {"sigma", 0.0625, 16.0, 30}}};
}

inline TuningResult qga_tune(const FitnessFunction& fitness, const SearchSpace& space, const QgaConfig& config) {
  if (space.dims.size() != 2)
    throw InvalidArgumentError("qga_tune expects a two-dimensional (C, sigma) search space");
  const auto t0 = detail::Clock::now();
  TuningResult r;
  r.method = TuningMethod::Qga;
  auto observer = [&](const GenerationRecord& rec) {
    const double t = detail::seconds_since(t0);
    for (const auto& ind : rec.individuals)
      r.trace.push_back({TuningMethod::Qga, rec.generation, ind.decoded[0], ind.decoded[1], ind.fitness, t});
    GenerationRecord summary;
    summary.generation = rec.generation;
    summary.best_fitness = rec.best_fitness;
    summary.best_params = rec.best_params;
    summary.catastrophe = rec.catastrophe;
    r.generations.push_back(std::move(summary));
  };
  const auto res = run(space, fitness, config, observer);
  r.best_c = res.best_params[0];
  r.best_sigma = res.best_params[1];
  r.fitness = res.best_fitness;
  r.wall_time = detail::seconds_since(t0);
  return r;
}

inline TuningResult qga_tune(std::span<const LabeledSample> data, const SearchSpace& space,
                             const TuningProtocol& protocol, const QgaConfig& config) {
  return qga_tune(fitness_for(data, protocol), space, config);
}

// One line per evaluation: method index C sigma fitness seconds.
inline void write_trace(std::ostream& os, const TuningResult& r) {
  os << "# method index C sigma fitness seconds\n";
  for (const auto& e : r.trace)
    os << tuning_method_name(e.method) << ' ' << e.index << ' ' << format_double(e.c) << ' '
       << format_double(e.sigma) << ' ' << format_double(e.fitness) << ' ' << format_double(e.seconds)
       << '\n';
}

}  // namespace qsvm
