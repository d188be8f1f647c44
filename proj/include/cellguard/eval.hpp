#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/features.hpp"
#include "cellguard/svm.hpp"

namespace cellguard::eval {

inline constexpr int kWithPhone = +1;
inline constexpr int kNoPhone = -1;

struct LabeledItem {
  FeatureVector features;
  int label = kNoPhone;
  std::string frame_id;
  std::optional<double> timestamp;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;

  std::size_t size() const noexcept { return items.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.label);
    return out;
  }

  void validate() const {
    bool pos = false, neg = false;
    for (const auto& it : items) {
      if (it.label == kWithPhone) pos = true;
      else if (it.label == kNoPhone) neg = true;
      else throw InvalidInput("dataset labels must be -1 or +1");
    }
    if (!pos || !neg) throw InvalidInput("dataset needs both labels");
  }
};

inline std::vector<double> as_vector(const FeatureVector& f) { return {f.ph, f.mi}; }

inline svm::TrainingSet training_set(const LabeledDataset& data, std::span<const std::size_t> indices) {
  svm::TrainingSet set;
  set.reserve(indices.size());
  for (std::size_t i : indices) set.push_back({as_vector(data.items[i].features), data.items[i].label});
  return set;
}

inline svm::TrainingSet training_set(const LabeledDataset& data) {
  svm::TrainingSet set;
  set.reserve(data.size());
  for (const auto& it : data.items) set.push_back({as_vector(it.features), it.label});
  return set;
}

// Fisher-Yates with modulo draws, so fold assignment replays identically
// across standard library implementations.
template <typename T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

// Stratified k-fold: each class is shuffled and dealt round-robin, the
// negative class continuing where the positive class stopped, so per-class
// and total fold sizes each differ by at most one.
inline std::vector<std::vector<std::size_t>> kfold_split(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("cross-validation needs at least two folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k)) {
    throw InvalidInput("each class needs at least k items");
  }
  std::mt19937_64 rng(seed);
  portable_shuffle(pos, rng);
  portable_shuffle(neg, rng);

  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t slot = 0;
  for (std::size_t i : pos) folds[slot++ % folds.size()].push_back(i);
  for (std::size_t i : neg) folds[slot++ % folds.size()].push_back(i);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

inline double accuracy(const svm::SvmModel& model, const LabeledDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const auto& it = data.items[i];
    correct += model.predict(as_vector(it.features)) == it.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

inline double accuracy(const svm::SvmModel& model, const LabeledDataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return accuracy(model, data, all);
}

struct CvReport {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over folds
  std::vector<double> fold_accuracy;
  std::vector<bool> fold_failed;
  std::vector<std::string> fold_error;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count(fold_failed.begin(), fold_failed.end(), true));
  }
};

inline void summarize(CvReport& report) {
  const auto n = static_cast<double>(report.fold_accuracy.size());
  double sum = 0.0;
  for (double a : report.fold_accuracy) sum += a;
  report.mean = sum / n;
  double ss = 0.0;
  for (double a : report.fold_accuracy) ss += (a - report.mean) * (a - report.mean);
  report.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

// A fold whose training throws scores 0 and is flagged.
inline CvReport cross_validate(const LabeledDataset& data, const svm::KernelSpec& kernel, double nu, int k = 9,
                               std::uint64_t seed = 1, const svm::TrainOptions& options = {}) {
  data.validate();
  const auto folds = kfold_split(data.labels(), k, seed);
  CvReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    try {
      const auto model = svm::train(training_set(data, train_idx), kernel, nu, options);
      report.fold_accuracy.push_back(accuracy(model, data, folds[f]));
      report.fold_failed.push_back(false);
      report.fold_error.emplace_back();
    } catch (const Error& e) {
      report.fold_accuracy.push_back(0.0);
      report.fold_failed.push_back(true);
      report.fold_error.emplace_back(e.what());
    }
  }
  summarize(report);
  return report;
}

// ---------------------------------------------------------------------------
// Period voting

struct FrameVerdict {
  double timestamp = 0.0;
  int label = kNoPhone;
};

struct PeriodVerdict {
  std::size_t period_index = 0;
  std::size_t frames = 0;
  std::size_t positives = 0;
  double positive_fraction = 0.0;
  int decision = kNoPhone;
  double threshold = 0.0;
  bool no_data = false;
};

inline constexpr double kDefaultWindow = 3.0;
inline constexpr double kDefaultVoteThreshold = 0.65;
inline constexpr std::array<double, 7> kDefaultSweep = {0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};

// Guards the inclusive comparison against representation error, so that
// e.g. 13/20 counts as reaching 0.65.
inline constexpr double kVoteSlack = 1e-12;

inline bool meets_threshold(double fraction, double threshold) { return fraction >= threshold - kVoteSlack; }

inline std::size_t period_of(double timestamp, double origin, double window) {
  return static_cast<std::size_t>(std::floor((timestamp - origin) / window + 1e-9));
}

// Buckets frames into consecutive windows from the first timestamp; a
// window reaches withPhone when its positive fraction is >= threshold.
inline std::vector<PeriodVerdict> classify_period(std::span<const FrameVerdict> frames, double window = kDefaultWindow,
                                                  double threshold = kDefaultVoteThreshold) {
  if (!(window > 0.0)) throw InvalidInput("period window must be positive");
  std::vector<PeriodVerdict> out;
  if (frames.empty()) return out;
  const double origin = frames.front().timestamp;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i].timestamp < frames[i - 1].timestamp) {
      throw InvalidInput("frame timestamps must be non-decreasing");
    }
    const std::size_t p = period_of(frames[i].timestamp, origin, window);
    while (out.size() <= p) {
      PeriodVerdict v;
      v.period_index = out.size();
      v.threshold = threshold;
      out.push_back(v);
    }
    ++out[p].frames;
    out[p].positives += frames[i].label == kWithPhone ? 1 : 0;
  }
  for (auto& v : out) {
    v.no_data = v.frames == 0;
    v.positive_fraction = v.no_data ? 0.0 : static_cast<double>(v.positives) / static_cast<double>(v.frames);
    v.decision = !v.no_data && meets_threshold(v.positive_fraction, threshold) ? kWithPhone : kNoPhone;
  }
  return out;
}

// Ground truth per period from per-frame truth labels: withPhone when at
// least half of the period's frames are. Empty periods get 0 (unknown).
inline std::vector<int> ground_truth_periods(std::span<const FrameVerdict> truth, double window = kDefaultWindow) {
  std::vector<int> out;
  for (const auto& v : classify_period(truth, window, 0.5)) out.push_back(v.no_data ? 0 : v.decision);
  return out;
}

struct SweepRow {
  double threshold = 0.0;
  std::optional<double> acc_with;     // over periods whose truth is withPhone
  std::optional<double> acc_without;  // over periods whose truth is noPhone
  double acc_general = 0.0;           // over all scored periods
  std::size_t periods_with = 0;
  std::size_t periods_without = 0;
};

inline std::vector<SweepRow> threshold_sweep(std::span<const FrameVerdict> predicted, std::span<const int> truth_periods,
                                             std::span<const double> thresholds, double window = kDefaultWindow) {
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    const auto verdicts = classify_period(predicted, window, t);
    SweepRow row;
    row.threshold = t;
    std::size_t hit_with = 0, hit_without = 0;
    for (const auto& v : verdicts) {
      if (v.no_data || v.period_index >= truth_periods.size()) continue;
      const int truth = truth_periods[v.period_index];
      if (truth == kWithPhone) {
        ++row.periods_with;
        hit_with += v.decision == kWithPhone ? 1 : 0;
      } else if (truth == kNoPhone) {
        ++row.periods_without;
        hit_without += v.decision == kNoPhone ? 1 : 0;
      }
    }
    if (row.periods_with > 0) row.acc_with = static_cast<double>(hit_with) / static_cast<double>(row.periods_with);
    if (row.periods_without > 0) {
      row.acc_without = static_cast<double>(hit_without) / static_cast<double>(row.periods_without);
    }
    const std::size_t scored = row.periods_with + row.periods_without;
    row.acc_general = scored > 0 ? static_cast<double>(hit_with + hit_without) / static_cast<double>(scored) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cellguard::eval
