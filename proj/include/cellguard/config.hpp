#pragma once

// Flat key=value run configuration. Keys match the long CLI flag names with
// dashes replaced by underscores; '#' starts a comment.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/ga.hpp"
#include "cellguard/segmentation.hpp"
#include "cellguard/svm.hpp"
#include "cellguard/text.hpp"

namespace cellguard {

struct RunConfig {
  std::string kernel = "polynomial";  // kernel name, or "tune"
  svm::KernelKind tune_kernel = svm::KernelKind::Polynomial;
  double gamma = 1.0;
  double coef0 = 1.0;
  double degree = 2.0;
  double nu = 0.3;
  double seg_fraction = kDefaultSkinFraction;
  double window = eval::kDefaultWindow;
  double threshold = eval::kDefaultVoteThreshold;
  double green_upper = 0.40;
  double red_lower = 0.65;
  int workers = 4;
  double fps_cap = 6.0;
  double fps = 15.0;  // timestamps for manifests that omit them
  int folds = 9;
  std::uint64_t seed = 1;     // GA engine
  std::uint64_t cv_seed = 1;  // fold assignment
  int ga_population = 20;
  int ga_generations = 50;
  double ga_crossover = 0.80;
  double ga_mutation = 0.05;
  int ga_tournament = 2;
  int ga_restarts = 1;
  long long ga_max_iterations = 1'000'000;
  long long max_iterations = 10'000'000;
  std::vector<double> thresholds{eval::kDefaultSweep.begin(), eval::kDefaultSweep.end()};

  bool tuning() const { return kernel == "tune"; }

  svm::KernelSpec kernel_spec() const {
    svm::KernelSpec spec;
    spec.kind = svm::parse_kernel_kind(kernel);
    spec.gamma = gamma;
    spec.coef0 = coef0;
    spec.degree = degree;
    return spec;
  }

  ga::GaConfig ga_config(std::uint64_t restart = 0) const {
    ga::GaConfig g;
    g.population = ga_population;
    g.generations = ga_generations;
    g.crossover_rate = ga_crossover;
    g.mutation_rate = ga_mutation;
    g.tournament_size = ga_tournament;
    g.seed = seed + restart;
    g.folds = folds;
    g.cv_seed = cv_seed;
    g.workers = workers;
    g.train.max_iterations = ga_max_iterations;
    return g;
  }

  svm::TrainOptions train_options() const {
    svm::TrainOptions o;
    o.max_iterations = max_iterations;
    return o;
  }

  void validate() const {
    if (!tuning()) kernel_spec().validate();
    if (!(nu > 0.0 && nu <= 1.0)) throw InvalidInput("nu must lie in (0, 1]");
    if (!(seg_fraction > 0.0 && seg_fraction <= 1.0)) throw InvalidInput("seg_fraction must lie in (0, 1]");
    if (!(window > 0.0)) throw InvalidInput("window must be positive");
    if (!(green_upper >= 0.0 && green_upper < red_lower && red_lower <= 1.0)) {
      throw InvalidInput("status levels must satisfy 0 <= green_upper < red_lower <= 1");
    }
    if (workers < 1) throw InvalidInput("workers must be at least 1");
    if (!(fps_cap > 0.0) || !(fps > 0.0)) throw InvalidInput("frame rates must be positive");
    if (folds < 2) throw InvalidInput("folds must be at least 2");
    if (ga_restarts < 1) throw InvalidInput("ga_restarts must be at least 1");
  }

  // Applies one key=value pair; unknown keys are an error.
  void set(const std::string& key, const std::string& value) {
    using text::parse_double;
    using text::parse_int;
    if (key == "kernel") {
      kernel = value;
      if (kernel != "tune") svm::parse_kernel_kind(kernel);
    } else if (key == "tune_kernel") {
      tune_kernel = svm::parse_kernel_kind(value);
    } else if (key == "gamma") {
      gamma = parse_double(value);
    } else if (key == "coef0") {
      coef0 = parse_double(value);
    } else if (key == "degree") {
      degree = parse_double(value);
    } else if (key == "nu") {
      nu = parse_double(value);
    } else if (key == "seg_fraction") {
      seg_fraction = parse_double(value);
    } else if (key == "window") {
      window = parse_double(value);
    } else if (key == "threshold") {
      threshold = parse_double(value);
    } else if (key == "green_upper") {
      green_upper = parse_double(value);
    } else if (key == "red_lower") {
      red_lower = parse_double(value);
    } else if (key == "workers") {
      workers = static_cast<int>(parse_int(value));
    } else if (key == "fps_cap") {
      fps_cap = parse_double(value);
    } else if (key == "fps") {
      fps = parse_double(value);
    } else if (key == "folds") {
      folds = static_cast<int>(parse_int(value));
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "cv_seed") {
      cv_seed = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "ga_population") {
      ga_population = static_cast<int>(parse_int(value));
    } else if (key == "ga_generations") {
      ga_generations = static_cast<int>(parse_int(value));
    } else if (key == "ga_crossover") {
      ga_crossover = parse_double(value);
    } else if (key == "ga_mutation") {
      ga_mutation = parse_double(value);
    } else if (key == "ga_tournament") {
      ga_tournament = static_cast<int>(parse_int(value));
    } else if (key == "ga_restarts") {
      ga_restarts = static_cast<int>(parse_int(value));
    } else if (key == "ga_max_iterations") {
      ga_max_iterations = parse_int(value);
    } else if (key == "max_iterations") {
      max_iterations = parse_int(value);
    } else if (key == "thresholds") {
      thresholds.clear();
      for (const auto& f : text::split(value, ',')) thresholds.push_back(parse_double(f));
    } else {
      throw InvalidInput("unknown config key '" + key + "'");
    }
  }

  void load(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = text::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw InvalidInput("config line " + std::to_string(lineno) + ": expected key=value");
      }
      set(std::string(text::trim(body.substr(0, eq))), std::string(text::trim(body.substr(eq + 1))));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    load(in);
  }
};

}  // namespace cellguard
