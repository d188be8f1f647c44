#pragma once

// Throttled streaming classification: one admission stage, N frame workers
// and one aggregation stage that restores input order before the rolling
// status and period voting.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cellguard/config.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/pipeline.hpp"
#include "cellguard/svm.hpp"
#include "cellguard/text.hpp"

namespace cellguard::stream {

// Bounded multi-worker map that hands results to `sink` strictly in
// submission order. push() blocks while `capacity` items are queued.
template <typename In, typename Out>
class OrderedPipeline {
 public:
  using Work = std::function<Out(const In&)>;
  using Sink = std::function<void(std::size_t, Out&&)>;

  OrderedPipeline(std::size_t workers, std::size_t capacity, Work work, Sink sink)
      : capacity_(std::max<std::size_t>(capacity, 1)), work_(std::move(work)), sink_(std::move(sink)) {
    for (std::size_t i = 0; i < std::max<std::size_t>(workers, 1); ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
    aggregator_ = std::thread([this] { aggregate_loop(); });
  }

  OrderedPipeline(const OrderedPipeline&) = delete;
  OrderedPipeline& operator=(const OrderedPipeline&) = delete;

  ~OrderedPipeline() {
    try {
      finish();
    } catch (...) {
    }
  }

  void push(In item) {
    std::unique_lock lock(in_mutex_);
    in_space_.wait(lock, [&] { return queue_.size() < capacity_; });
    queue_.emplace_back(submitted_++, std::move(item));
    in_ready_.notify_one();
  }

  // Drains everything, joins all threads and rethrows the first failure.
  void finish() {
    {
      std::lock_guard lock(in_mutex_);
      if (finished_) return;
      finished_ = true;
      closed_ = true;
    }
    in_ready_.notify_all();
    for (auto& w : workers_) w.join();
    {
      std::lock_guard lock(out_mutex_);
      workers_done_ = true;
    }
    out_ready_.notify_all();
    aggregator_.join();
    if (failure_) std::rethrow_exception(failure_);
  }

 private:
  void worker_loop() {
    for (;;) {
      std::pair<std::size_t, In> job;
      {
        std::unique_lock lock(in_mutex_);
        in_ready_.wait(lock, [&] { return closed_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      in_space_.notify_one();
      std::optional<Out> result;
      try {
        result.emplace(work_(job.second));
      } catch (...) {
        std::lock_guard lock(out_mutex_);
        if (!failure_) failure_ = std::current_exception();
      }
      {
        std::lock_guard lock(out_mutex_);
        done_.emplace(job.first, std::move(result));
      }
      out_ready_.notify_one();
    }
  }

  void aggregate_loop() {
    std::size_t next = 0;
    for (;;) {
      std::optional<Out> item;
      {
        std::unique_lock lock(out_mutex_);
        out_ready_.wait(lock, [&] { return done_.contains(next) || (workers_done_ && done_.empty()); });
        auto it = done_.find(next);
        if (it == done_.end()) return;
        item = std::move(it->second);
        done_.erase(it);
      }
      if (item) {
        try {
          sink_(next, std::move(*item));
        } catch (...) {
          std::lock_guard lock(out_mutex_);
          if (!failure_) failure_ = std::current_exception();
        }
      }
      ++next;
    }
  }

  std::size_t capacity_;
  Work work_;
  Sink sink_;

  std::mutex in_mutex_;
  std::condition_variable in_ready_;
  std::condition_variable in_space_;
  std::deque<std::pair<std::size_t, In>> queue_;
  std::size_t submitted_ = 0;
  bool closed_ = false;
  bool finished_ = false;

  std::mutex out_mutex_;
  std::condition_variable out_ready_;
  std::map<std::size_t, std::optional<Out>> done_;
  bool workers_done_ = false;
  std::exception_ptr failure_;

  std::vector<std::thread> workers_;
  std::thread aggregator_;
};

// Admits a frame when its timestamp reaches the next slot of a 1/fps grid;
// after a gap longer than one slot the grid restarts at the frame.
class FrameThrottle {
 public:
  explicit FrameThrottle(double fps_cap) : period_(1.0 / fps_cap) {}

  bool admit(double timestamp) {
    if (started_ && timestamp < next_slot_ - 1e-9) return false;
    if (!started_ || timestamp - next_slot_ > period_) {
      next_slot_ = timestamp + period_;
    } else {
      next_slot_ += period_;
    }
    started_ = true;
    return true;
  }

 private:
  double period_;
  double next_slot_ = 0.0;
  bool started_ = false;
};

enum class Level { Green, Yellow, Red };

inline std::string_view to_string(Level l) {
  switch (l) {
    case Level::Green: return "green";
    case Level::Yellow: return "yellow";
    case Level::Red: return "red";
  }
  return "?";
}

inline Level status_level(double fraction, double green_upper, double red_lower) {
  if (fraction >= red_lower - eval::kVoteSlack) return Level::Red;
  if (fraction >= green_upper - eval::kVoteSlack) return Level::Yellow;
  return Level::Green;
}

// Incremental equivalent of eval::classify_period: a period is emitted as
// soon as a later period's frame arrives, and the rest on flush().
class PeriodAccumulator {
 public:
  PeriodAccumulator(double window, double threshold) : window_(window), threshold_(threshold) {}

  std::vector<eval::PeriodVerdict> add(double timestamp, int label) {
    std::vector<eval::PeriodVerdict> ready;
    if (!started_) {
      origin_ = timestamp;
      started_ = true;
    }
    const std::size_t p = eval::period_of(timestamp, origin_, window_);
    while (current_ < p) ready.push_back(close_current());
    ++frames_;
    positives_ += label == eval::kWithPhone ? 1 : 0;
    return ready;
  }

  std::vector<eval::PeriodVerdict> flush() {
    std::vector<eval::PeriodVerdict> ready;
    if (started_) ready.push_back(close_current());
    started_ = false;
    return ready;
  }

 private:
  eval::PeriodVerdict close_current() {
    eval::PeriodVerdict v;
    v.period_index = current_++;
    v.frames = frames_;
    v.positives = positives_;
    v.threshold = threshold_;
    v.no_data = frames_ == 0;
    v.positive_fraction = v.no_data ? 0.0 : static_cast<double>(positives_) / static_cast<double>(frames_);
    v.decision = !v.no_data && eval::meets_threshold(v.positive_fraction, threshold_) ? eval::kWithPhone
                                                                                      : eval::kNoPhone;
    frames_ = 0;
    positives_ = 0;
    return v;
  }

  double window_;
  double threshold_;
  double origin_ = 0.0;
  bool started_ = false;
  std::size_t current_ = 0;
  std::size_t frames_ = 0;
  std::size_t positives_ = 0;
};

struct StreamOptions {
  int workers = 4;
  double fps_cap = 6.0;
  double fps = 15.0;  // fallback timestamps
  double window = eval::kDefaultWindow;
  double threshold = eval::kDefaultVoteThreshold;
  double green_upper = 0.40;
  double red_lower = 0.65;
  double seg_fraction = kDefaultSkinFraction;
  bool realtime = false;  // sleep so frames are admitted at their timestamps
  std::string detector_command;

  static StreamOptions from(const RunConfig& c) {
    StreamOptions o;
    o.workers = c.workers;
    o.fps_cap = c.fps_cap;
    o.fps = c.fps;
    o.window = c.window;
    o.threshold = c.threshold;
    o.green_upper = c.green_upper;
    o.red_lower = c.red_lower;
    o.seg_fraction = c.seg_fraction;
    return o;
  }
};

struct StatusLine {
  std::string frame_id;
  double timestamp = 0.0;
  FrameStatus status = FrameStatus::Ok;
  int verdict = 0;        // classifier output for usable frames, else 0
  double fraction = 0.0;  // positive share of usable frames over the last window
  Level level = Level::Green;
};

struct Alarm {
  std::string frame_id;
  double timestamp = 0.0;
  double fraction = 0.0;
};

struct StreamSummary {
  std::size_t frames_total = 0;
  std::size_t frames_admitted = 0;
  std::size_t frames_dropped = 0;
  std::size_t frames_not_found = 0;
  std::size_t frames_failed = 0;
  std::vector<double> admitted_timestamps;
  std::vector<StatusLine> statuses;
  std::vector<eval::PeriodVerdict> periods;
  std::vector<Alarm> alarms;  // one per entry into the red level
};

struct StreamCallbacks {
  std::function<void(const StatusLine&)> on_status;
  std::function<void(const eval::PeriodVerdict&)> on_period;
  std::function<void(const Alarm&)> on_alarm;
};

struct ProcessedFrame {
  FrameRecord record;
  int verdict = 0;
};

inline StreamSummary run_stream(const std::vector<ManifestEntry>& entries, const svm::SvmModel& model,
                                const StreamOptions& opt, const StreamCallbacks& callbacks = {}) {
  if (model.dimension() != 2) throw InvalidInput("model expects " + std::to_string(model.dimension()) +
                                                 " features, the pipeline produces 2");
  if (!(opt.green_upper >= 0.0 && opt.green_upper < opt.red_lower && opt.red_lower <= 1.0)) {
    throw InvalidInput("status levels must satisfy 0 <= green_upper < red_lower <= 1");
  }
  StreamSummary summary;
  summary.frames_total = entries.size();

  IngestOptions ingest_opt;
  ingest_opt.seg_fraction = opt.seg_fraction;
  ingest_opt.fps = opt.fps;
  ingest_opt.detector_command = opt.detector_command;

  std::deque<std::pair<double, int>> recent;  // usable frames inside the rolling window
  PeriodAccumulator periods(opt.window, opt.threshold);
  Level last_level = Level::Green;

  auto emit_periods = [&](std::vector<eval::PeriodVerdict> ready) {
    for (auto& v : ready) {
      if (callbacks.on_period) callbacks.on_period(v);
      summary.periods.push_back(v);
    }
  };

  auto sink = [&](std::size_t, ProcessedFrame&& f) {
    StatusLine line;
    line.frame_id = f.record.frame_id;
    line.timestamp = f.record.timestamp;
    line.status = f.record.status;
    line.verdict = f.verdict;
    if (f.record.status == FrameStatus::NotFound) ++summary.frames_not_found;
    if (f.record.status == FrameStatus::Error) ++summary.frames_failed;
    if (f.record.status == FrameStatus::Ok) {
      recent.emplace_back(f.record.timestamp, f.verdict);
      emit_periods(periods.add(f.record.timestamp, f.verdict));
    }
    while (!recent.empty() && recent.front().first <= line.timestamp - opt.window + 1e-9) recent.pop_front();
    std::size_t positives = 0;
    for (const auto& r : recent) positives += r.second == eval::kWithPhone ? 1 : 0;
    line.fraction = recent.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(recent.size());
    line.level = status_level(line.fraction, opt.green_upper, opt.red_lower);
    if (line.level == Level::Red && last_level != Level::Red) {
      Alarm a{line.frame_id, line.timestamp, line.fraction};
      if (callbacks.on_alarm) callbacks.on_alarm(a);
      summary.alarms.push_back(a);
    }
    last_level = line.level;
    if (callbacks.on_status) callbacks.on_status(line);
    summary.statuses.push_back(std::move(line));
  };

  using Job = std::pair<std::size_t, const ManifestEntry*>;
  OrderedPipeline<Job, ProcessedFrame> pipeline(
      static_cast<std::size_t>(opt.workers), 2 * static_cast<std::size_t>(opt.workers),
      [&](const Job& job) {
        ProcessedFrame f;
        f.record = process_entry(*job.second, job.first, ingest_opt);
        if (f.record.status == FrameStatus::Ok) f.verdict = model.predict(eval::as_vector(f.record.features));
        return f;
      },
      sink);

  FrameThrottle throttle(opt.fps_cap);
  const auto wall_start = std::chrono::steady_clock::now();
  double first_ts = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double ts = entry_timestamp(entries[i], i, opt.fps);
    if (i > 0 && ts < entry_timestamp(entries[i - 1], i - 1, opt.fps)) {
      throw InvalidInput("stream timestamps must be non-decreasing");
    }
    if (i == 0) first_ts = ts;
    if (!throttle.admit(ts)) {
      ++summary.frames_dropped;
      continue;
    }
    if (opt.realtime) {
      std::this_thread::sleep_until(wall_start + std::chrono::duration<double>(ts - first_ts));
    }
    ++summary.frames_admitted;
    summary.admitted_timestamps.push_back(ts);
    pipeline.push(Job{i, &entries[i]});
  }
  pipeline.finish();
  emit_periods(periods.flush());
  return summary;
}

// `frame_id fraction level`
inline void write_status_line(std::ostream& out, const StatusLine& s) {
  out << s.frame_id << ' ' << text::format_fixed(s.fraction, 4) << ' ' << to_string(s.level) << '\n';
}

inline void write_verdict_header(std::ostream& out) { out << "period_index,frames,positive_fraction,decision\n"; }

inline void write_verdict_row(std::ostream& out, const eval::PeriodVerdict& v) {
  out << v.period_index << ',' << v.frames << ',' << text::format_double(v.positive_fraction) << ','
      << (v.decision == eval::kWithPhone ? "withPhone" : "noPhone") << '\n';
}

}  // namespace cellguard::stream
