#pragma once

// Binary-coded genetic search over nu-SVM hyperparameters. A chromosome is
// 116 bits split into four 29-bit fields (nu, coef0, degree, gamma), each
// mapped linearly onto a configured range.

#include <algorithm>
#include <atomic>
#include <bitset>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/svm.hpp"
#include "cellguard/text.hpp"

namespace cellguard::ga {

inline constexpr std::size_t kChromosomeBits = 116;
inline constexpr std::size_t kFieldBits = 29;
inline constexpr std::uint32_t kFieldMax = (1u << kFieldBits) - 1;
inline constexpr int kFullSearchGenerations = 10'000;

using Chromosome = std::bitset<kChromosomeBits>;

enum class Field { Nu = 0, Coef0 = 1, Degree = 2, Gamma = 3 };

struct Range {
  double min = 0.0;
  double max = 1.0;

  double map(std::uint32_t raw) const { return min + (max - min) * (static_cast<double>(raw) / kFieldMax); }
  bool contains(double v) const { return v >= min && v <= max; }
};

// Defaults reach the thousands because tuned polynomial/gamma values do.
struct ParameterRanges {
  Range nu{0.001, 1.0};
  Range coef0{0.0, 10'000.0};
  Range degree{0.01, 10.0};
  Range gamma{0.0001, 10'000.0};

  void validate() const {
    for (const Range* r : {&nu, &coef0, &degree, &gamma}) {
      if (!(r->min <= r->max)) throw InvalidInput("parameter range has min > max");
    }
    if (!(nu.min > 0.0) || nu.max > 1.0) throw InvalidInput("nu range must lie in (0, 1]");
    if (!(gamma.min > 0.0)) throw InvalidInput("gamma range must be positive");
  }
};

struct Hyperparameters {
  svm::KernelKind kind = svm::KernelKind::Linear;
  double nu = 0.5;
  double coef0 = 0.0;
  double degree = 1.0;
  double gamma = 1.0;

  svm::KernelSpec kernel() const {
    svm::KernelSpec spec;
    spec.kind = kind;
    if (spec.uses_gamma()) spec.gamma = gamma;
    if (spec.uses_coef0()) spec.coef0 = coef0;
    if (spec.uses_degree()) spec.degree = degree;
    return spec;
  }
};

inline std::uint32_t field_value(const Chromosome& c, Field field) {
  const std::size_t base = static_cast<std::size_t>(field) * kFieldBits;
  std::uint32_t v = 0;
  for (std::size_t b = 0; b < kFieldBits; ++b) {
    if (c.test(base + b)) v |= 1u << b;
  }
  return v;
}

inline Hyperparameters decode(const Chromosome& c, svm::KernelKind kind, const ParameterRanges& ranges = {}) {
  Hyperparameters h;
  h.kind = kind;
  h.nu = ranges.nu.map(field_value(c, Field::Nu));
  h.coef0 = ranges.coef0.map(field_value(c, Field::Coef0));
  h.degree = ranges.degree.map(field_value(c, Field::Degree));
  h.gamma = ranges.gamma.map(field_value(c, Field::Gamma));
  return h;
}

struct GaConfig {
  int population = 20;
  int generations = 50;  // desk scale; kFullSearchGenerations for the full search
  double crossover_rate = 0.80;
  double mutation_rate = 0.05;
  int tournament_size = 2;
  std::uint64_t seed = 1;
  ParameterRanges ranges;
  int folds = 9;
  std::uint64_t cv_seed = 1;
  int workers = 1;  // concurrent fitness evaluations
  svm::TrainOptions train;
  std::vector<Chromosome> initial_population;  // random when empty

  void validate() const {
    if (population < 2) throw InvalidInput("GA population must be at least 2");
    if (generations < 1) throw InvalidInput("GA needs at least one generation");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw InvalidInput("crossover rate must lie in [0, 1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw InvalidInput("mutation rate must lie in [0, 1]");
    if (tournament_size < 1) throw InvalidInput("tournament size must be positive");
    if (!initial_population.empty() && initial_population.size() != static_cast<std::size_t>(population)) {
      throw InvalidInput("initial population size differs from the configured population");
    }
    ranges.validate();
  }
};

// Mean k-fold accuracy of the decoded parameters; any training failure in
// any fold scores 0.
inline double fitness(const Chromosome& c, const eval::LabeledDataset& data, svm::KernelKind kind, int folds,
                      const ParameterRanges& ranges = {}, std::uint64_t cv_seed = 1,
                      const svm::TrainOptions& options = {}) {
  const Hyperparameters h = decode(c, kind, ranges);
  const eval::CvReport report = eval::cross_validate(data, h.kernel(), h.nu, folds, cv_seed, options);
  return report.failures() > 0 ? 0.0 : report.mean;
}

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;        // best ever, up to and including this generation
  double generation_best = 0.0;
  double mean_fitness = 0.0;
  Chromosome best;
};

struct EvolutionResult {
  Chromosome best;
  double best_fitness = 0.0;
  std::vector<GenerationStats> history;
  std::vector<Chromosome> final_population;
  std::size_t evaluations = 0;  // distinct chromosomes scored
};

using FitnessFn = std::function<double(const Chromosome&)>;

namespace detail {

// Portable draws from the 64-bit engine so runs replay across standard libraries.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline Chromosome random_chromosome(std::mt19937_64& rng) {
  Chromosome c;
  for (std::size_t base = 0; base < kChromosomeBits; base += 64) {
    const std::uint64_t word = rng();
    for (std::size_t b = 0; b < 64 && base + b < kChromosomeBits; ++b) c.set(base + b, (word >> b) & 1u);
  }
  return c;
}

// Scores every chromosome not already in the cache, `workers` at a time.
inline void score_missing(const std::vector<Chromosome>& pop, const FitnessFn& fn, int workers,
                          std::map<std::string, double>& cache) {
  std::vector<std::string> keys;
  std::vector<const Chromosome*> todo;
  for (const auto& c : pop) {
    std::string key = c.to_string();
    if (cache.contains(key)) continue;
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
    keys.push_back(std::move(key));
    todo.push_back(&c);
  }
  std::vector<double> scores(todo.size(), 0.0);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) scores[i] = fn(*todo[i]);
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), todo.size());
  if (threads <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
  }
  for (std::size_t i = 0; i < todo.size(); ++i) cache.emplace(keys[i], scores[i]);
}

}  // namespace detail

// Tournament selection, single-point crossover, per-bit mutation and one
// elite carried unchanged. All randomness comes from one engine owned by
// this loop; fitness scoring is the only concurrent part.
inline EvolutionResult evolve(const GaConfig& config, const FitnessFn& fitness_fn) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const auto pop_size = static_cast<std::size_t>(config.population);

  std::vector<Chromosome> pop = config.initial_population;
  if (pop.empty()) {
    for (std::size_t i = 0; i < pop_size; ++i) pop.push_back(detail::random_chromosome(rng));
  }

  std::map<std::string, double> cache;
  EvolutionResult result;
  bool have_best = false;

  for (int gen = 0; gen < config.generations; ++gen) {
    detail::score_missing(pop, fitness_fn, config.workers, cache);
    std::vector<double> scores(pop_size);
    double sum = 0.0;
    std::size_t gen_best = 0;
    for (std::size_t i = 0; i < pop_size; ++i) {
      scores[i] = cache.at(pop[i].to_string());
      sum += scores[i];
      if (scores[i] > scores[gen_best]) gen_best = i;
    }
    if (!have_best || scores[gen_best] > result.best_fitness) {
      result.best = pop[gen_best];
      result.best_fitness = scores[gen_best];
      have_best = true;
    }
    result.history.push_back(
        {gen, result.best_fitness, scores[gen_best], sum / static_cast<double>(pop_size), result.best});

    if (gen + 1 == config.generations) break;

    auto tournament = [&]() -> const Chromosome& {
      std::size_t winner = detail::below(rng, pop_size);
      for (int t = 1; t < config.tournament_size; ++t) {
        const std::size_t challenger = detail::below(rng, pop_size);
        if (scores[challenger] > scores[winner]) winner = challenger;
      }
      return pop[winner];
    };
    auto mutate = [&](Chromosome& c) {
      for (std::size_t b = 0; b < kChromosomeBits; ++b) {
        if (detail::unit(rng) < config.mutation_rate) c.flip(b);
      }
    };

    std::vector<Chromosome> next;
    next.reserve(pop_size);
    next.push_back(result.best);
    while (next.size() < pop_size) {
      Chromosome a = tournament();
      Chromosome b = tournament();
      if (detail::unit(rng) < config.crossover_rate) {
        const std::size_t point = 1 + detail::below(rng, kChromosomeBits - 1);
        for (std::size_t bit = point; bit < kChromosomeBits; ++bit) {
          const bool tmp = a[bit];
          a[bit] = b[bit];
          b[bit] = tmp;
        }
      }
      mutate(a);
      mutate(b);
      next.push_back(a);
      if (next.size() < pop_size) next.push_back(b);
    }
    pop = std::move(next);
  }
  result.final_population = pop;
  result.evaluations = cache.size();
  return result;
}

inline EvolutionResult evolve(const GaConfig& config, const eval::LabeledDataset& data, svm::KernelKind kind) {
  data.validate();
  return evolve(config, [&](const Chromosome& c) {
    return fitness(c, data, kind, config.folds, config.ranges, config.cv_seed, config.train);
  });
}

inline void write_log_header(std::ostream& out) {
  out << "restart,generation,best_fitness,generation_best,mean_fitness,nu,coef0,degree,gamma\n";
}

inline void write_log(std::ostream& out, const EvolutionResult& r, svm::KernelKind kind,
                      const ParameterRanges& ranges, int restart = 0) {
  using text::format_double;
  for (const auto& g : r.history) {
    const Hyperparameters h = decode(g.best, kind, ranges);
    out << restart << ',' << g.generation << ',' << format_double(g.best_fitness) << ','
        << format_double(g.generation_best) << ',' << format_double(g.mean_fitness) << ',' << format_double(h.nu)
        << ',' << format_double(h.coef0) << ',' << format_double(h.degree) << ',' << format_double(h.gamma) << '\n';
  }
}

}  // namespace cellguard::ga
