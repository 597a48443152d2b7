#pragma once

// Quantum-inspired genetic algorithm over a boxed real parameter space.
//
// Each chromosome is a string of qubits (alpha, beta) with
// alpha^2 + beta^2 = 1. Measuring a qubit yields 1 with probability beta^2.
// The bit string is split into one unsigned integer per dimension and mapped
// affinely onto [low, high]. After every generation each qubit is rotated by
// G(theta) = [[cos, -sin], [sin, cos]] toward (or away from) the best
// individual found so far, following the rotation strategy table below.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsvm/error.hpp"
#include "qsvm/parallel.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/strings.hpp"

namespace qsvm {

struct QubitGene {
  double alpha = std::numbers::sqrt2 / 2;
  double beta = std::numbers::sqrt2 / 2;

  double probability_one() const { return beta * beta; }
  friend bool operator==(const QubitGene&, const QubitGene&) = default;
};

struct QubitChromosome {
  std::vector<QubitGene> genes;
  friend bool operator==(const QubitChromosome&, const QubitChromosome&) = default;
};

using Bits = std::vector<std::uint8_t>;

struct Dimension {
  std::string name;
  double low = 0.0;
  double high = 1.0;
  int bits = 30;
};

struct SearchSpace {
  std::vector<Dimension> dims;

  int total_bits() const {
    int m = 0;
    for (const auto& d : dims) m += d.bits;
    return m;
  }

  void validate() const {
    if (dims.empty()) throw InvalidArgumentError("search space has no dimensions");
    for (const auto& d : dims) {
      if (!(d.low < d.high))
        throw InvalidArgumentError("search space dimension '" + d.name + "' needs low < high");
      if (d.bits < 1 || d.bits > 62)
        throw InvalidArgumentError("search space dimension '" + d.name + "' needs 1..62 bits");
    }
  }
};

struct QgaConfig {
  int population_size = 80;
  int qubit_length = 60;
  int max_generations = 5;
  double delta_theta = 0.01 * std::numbers::pi;
  // Re-initialize after this many generations without improvement; 0 disables.
  int catastrophe_patience = 0;
  // Stop once an iteration improves the best fitness by less than this. 0
  // never stops early.
  double convergence_epsilon = 0.0;
  std::uint64_t seed = 0;
  // Fitness evaluations per generation run on this many threads. Results do
  // not depend on it.
  unsigned threads = 1;

  void validate() const {
    if (population_size < 2) throw InvalidArgumentError("QGA population_size must be >= 2");
    if (qubit_length < 1) throw InvalidArgumentError("QGA qubit_length must be >= 1");
    if (max_generations < 0) throw InvalidArgumentError("QGA max_generations must be >= 0");
    if (!(delta_theta > 0.0)) throw InvalidArgumentError("QGA delta_theta must be > 0");
    if (catastrophe_patience < 0)
      throw InvalidArgumentError("QGA catastrophe_patience must be >= 0");
    if (convergence_epsilon < 0.0)
      throw InvalidArgumentError("QGA convergence_epsilon must be >= 0");
  }
};

struct MeasuredIndividual {
  Bits bits;
  std::vector<double> decoded;
  double fitness = 0.0;
};

// Larger is better. Must be safe to call concurrently.
using FitnessFunction = std::function<double(std::span<const double>)>;

class FitnessEvaluationError : public Error {
 public:
  FitnessEvaluationError(int generation, std::size_t individual, const std::string& what)
      : Error("fitness evaluation failed at generation " + std::to_string(generation) +
              ", individual " + std::to_string(individual) + ": " + what),
        generation_(generation),
        individual_(individual) {}
  int generation() const noexcept { return generation_; }
  std::size_t individual() const noexcept { return individual_; }

 private:
  int generation_;
  std::size_t individual_;
};

inline std::vector<QubitChromosome> init_population(const QgaConfig& config) {
  config.validate();
  QubitChromosome c;
  c.genes.assign(static_cast<std::size_t>(config.qubit_length), QubitGene{});
  return std::vector<QubitChromosome>(static_cast<std::size_t>(config.population_size), c);
}

inline Bits measure(const QubitChromosome& chromosome, Rng& rng) {
  Bits bits(chromosome.genes.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    bits[i] = uniform01(rng) < chromosome.genes[i].probability_one() ? 1 : 0;
  return bits;
}

// Most significant bit first within each dimension's slice.
inline std::vector<double> decode(std::span<const std::uint8_t> bits, const SearchSpace& space) {
  if (static_cast<int>(bits.size()) != space.total_bits())
    throw DimensionMismatchError("decode: " + std::to_string(bits.size()) + " bits for a " +
                                 std::to_string(space.total_bits()) + "-bit search space");
  std::vector<double> out;
  out.reserve(space.dims.size());
  std::size_t pos = 0;
  for (const auto& d : space.dims) {
    std::uint64_t v = 0;
    for (int b = 0; b < d.bits; ++b) v = (v << 1) | (bits[pos++] & 1u);
    const double max = static_cast<double>((std::uint64_t{1} << d.bits) - 1);
    out.push_back(d.low + static_cast<double>(v) / max * (d.high - d.low));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotation strategy.
//
//   x  best  f(x)>f(best)  dtheta   ab>0  ab<0  a=0  b=0
//   0   0    any           0        0     0     0    0
//   0   1    false         0.01pi   +1    -1    0    +-1
//   0   1    true          0.01pi   -1    +1    +-1  0
//   1   0    false         0.01pi   -1    +1    +-1  0
//   1   0    true          0.01pi   +1    -1    0    +-1
//   1   1    any           0        0     0     0    0

enum class AmplitudeQuadrant { SameSign, OppositeSign, AlphaZero, BetaZero };

inline AmplitudeQuadrant classify(const QubitGene& g) {
  if (g.alpha == 0.0) return AmplitudeQuadrant::AlphaZero;
  if (g.beta == 0.0) return AmplitudeQuadrant::BetaZero;
  return g.alpha * g.beta > 0.0 ? AmplitudeQuadrant::SameSign : AmplitudeQuadrant::OppositeSign;
}

struct RotationRule {
  bool rotates = false;  // dtheta is delta_theta rather than 0
  int sign = 0;          // -1, 0, +1
  bool random_sign = false;
};

inline RotationRule rotation_rule(int x, int best, bool better, AmplitudeQuadrant q) {
  constexpr int R = 2;  // either direction
  // [x][best][better][quadrant]
  constexpr int kSign[2][2][2][4] = {
      {{{0, 0, 0, 0}, {0, 0, 0, 0}}, {{+1, -1, 0, R}, {-1, +1, R, 0}}},
      {{{-1, +1, R, 0}, {+1, -1, 0, R}}, {{0, 0, 0, 0}, {0, 0, 0, 0}}},
  };
  const int cell = kSign[x & 1][best & 1][better ? 1 : 0][static_cast<int>(q)];
  RotationRule r;
  r.rotates = (x & 1) != (best & 1);
  r.random_sign = cell == R;
  r.sign = cell == R ? 0 : cell;
  return r;
}

inline QubitGene apply_rotation(const QubitGene& g, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * g.alpha - s * g.beta, s * g.alpha + c * g.beta};
}

// Signed angle for one gene; draws from rng only for the either-direction cells.
inline double rotation_angle(const QubitGene& g, int x, int best, bool better, double delta_theta,
                             Rng& rng) {
  const auto rule = rotation_rule(x, best, better, classify(g));
  if (!rule.rotates) return 0.0;
  int sign = rule.sign;
  if (rule.random_sign) sign = (rng() >> 63) ? +1 : -1;
  return sign * delta_theta;
}

inline QubitChromosome rotate(const QubitChromosome& chromosome, std::span<const std::uint8_t> measured,
                              std::span<const std::uint8_t> best, bool fitness_better_than_best,
                              const QgaConfig& config, Rng& rng) {
  if (measured.size() != chromosome.genes.size() || best.size() != chromosome.genes.size())
    throw DimensionMismatchError("rotate: bit strings must match the chromosome length");
  QubitChromosome out = chromosome;
  for (std::size_t i = 0; i < out.genes.size(); ++i) {
    const double theta = rotation_angle(chromosome.genes[i], measured[i], best[i],
                                        fitness_better_than_best, config.delta_theta, rng);
    if (theta != 0.0) out.genes[i] = apply_rotation(chromosome.genes[i], theta);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  std::vector<double> best_params;
  std::vector<MeasuredIndividual> individuals;
  bool catastrophe = false;
};

struct QgaResult {
  std::vector<double> best_params;
  double best_fitness = 0.0;
  Bits best_bits;
  std::vector<GenerationRecord> history;
};

// Structured generation trace: "generation best_fitness param..." per line.
inline void write_generation_trace(std::ostream& os, std::span<const GenerationRecord> history,
                                   const SearchSpace& space) {
  os << "# generation best_fitness";
  for (const auto& d : space.dims) os << ' ' << d.name;
  os << '\n';
  for (const auto& rec : history) {
    os << rec.generation << ' ' << format_double(rec.best_fitness);
    for (double p : rec.best_params) os << ' ' << format_double(p);
    os << '\n';
  }
}

using GenerationObserver = std::function<void(const GenerationRecord&)>;

namespace detail {
inline constexpr std::uint64_t kMeasureStream = 0;
inline constexpr std::uint64_t kRotateStream = 1;
}  // namespace detail

// Generation 0 is the initial measurement; generations 1..max_generations
// follow successive rotations. history has one record per evaluated
// generation and best_fitness across it never decreases.
inline QgaResult run(const SearchSpace& space, const FitnessFunction& fitness, const QgaConfig& config,
                     const GenerationObserver& observer = {}) {
  config.validate();
  space.validate();
  if (space.total_bits() != config.qubit_length)
    throw InvalidArgumentError("QGA qubit_length " + std::to_string(config.qubit_length) +
                               " does not match the search space's " +
                               std::to_string(space.total_bits()) + " bits");

  auto population = init_population(config);
  const auto pop = population.size();

  QgaResult result;
  bool have_best = false;
  int stall = 0;

  for (int gen = 0;; ++gen) {
    GenerationRecord record;
    record.generation = gen;
    record.individuals.resize(pop);

    for (std::size_t i = 0; i < pop; ++i) {
      auto rng = make_rng(config.seed, {static_cast<std::uint64_t>(gen), i, detail::kMeasureStream});
      auto& ind = record.individuals[i];
      ind.bits = measure(population[i], rng);
      ind.decoded = decode(ind.bits, space);
    }
    parallel_for(pop, config.threads, [&](std::size_t i) {
      auto& ind = record.individuals[i];
      double f;
      try {
        f = fitness(ind.decoded);
      } catch (const std::exception& e) {
        throw FitnessEvaluationError(gen, i, e.what());
      }
      if (!std::isfinite(f)) throw FitnessEvaluationError(gen, i, "non-finite fitness");
      ind.fitness = f;
    });

    const double previous_best = result.best_fitness;
    bool improved = false;
    for (const auto& ind : record.individuals) {
      if (!have_best || ind.fitness > result.best_fitness) {
        result.best_fitness = ind.fitness;
        result.best_params = ind.decoded;
        result.best_bits = ind.bits;
        improved = true;
        have_best = true;
      }
    }
    record.best_fitness = result.best_fitness;
    record.best_params = result.best_params;

    const bool last = gen >= config.max_generations;
    const bool converged = gen > 0 && config.convergence_epsilon > 0.0 &&
                           result.best_fitness - previous_best < config.convergence_epsilon;
    if (last || converged) {
      if (observer) observer(record);
      result.history.push_back(std::move(record));
      break;
    }

    for (std::size_t i = 0; i < pop; ++i) {
      auto rng = make_rng(config.seed, {static_cast<std::uint64_t>(gen), i, detail::kRotateStream});
      const auto& ind = record.individuals[i];
      population[i] = rotate(population[i], ind.bits, result.best_bits,
                             ind.fitness > result.best_fitness, config, rng);
    }

    stall = improved ? 0 : stall + 1;
    if (config.catastrophe_patience > 0 && stall >= config.catastrophe_patience) {
      population = init_population(config);
      record.catastrophe = true;
      stall = 0;
    }

    if (observer) observer(record);
    result.history.push_back(std::move(record));
  }
  return result;
}

}  // namespace qsvm
