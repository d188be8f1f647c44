// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cellguard/cellguard.hpp"
#include "oracles.hpp"

using namespace cellguard;
namespace fs = std::filesystem;

#ifndef CELLGUARD_CLI
#define CELLGUARD_CLI "cellguard"
#endif

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;

void run(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) o.require(false, "runtime " + std::to_string(secs) + " s over budget");
  std::ostringstream line;
  line << (o.pass ? "PASS " : "FAIL ") << name << " (" << std::fixed;
  line.precision(2);
  line << secs << " s / " << budget_s << " s)";
  if (!o.detail.empty()) line << " - " << o.detail;
  std::cout << line.str() << std::endl;
  if (!o.pass) ++failures;
}

BinaryMask block(int w, int h, Rect r) {
  BinaryMask m(w, h);
  for (int y = r.y; y < r.bottom(); ++y) {
    for (int x = r.x; x < r.right(); ++x) m.set(x, y);
  }
  return m;
}

BinaryMask disc(int n) {
  BinaryMask m(n, n);
  const double c = (n - 1) / 2.0, r = n / 2.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) m.set(x, y, (x - c) * (x - c) + (y - c) * (y - c) <= r * r);
  }
  return m;
}

Outcome moment_oracle() {
  Outcome o;
  const double square = moment_of_inertia(block(220, 220, {10, 10, 200, 200}));
  o.require(std::abs(square - 1.0 / 6.0) <= 1e-3, "square MI " + std::to_string(square));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    BinaryMask a(80, 80), b(80, 80);
    const int dx = static_cast<int>(rng() % 50), dy = static_cast<int>(rng() % 50);
    for (int y = 0; y < 15; ++y) {
      for (int x = 0; x < 20; ++x) {
        const bool on = rng() % 3 == 0 || (x == 0 && y == 0);
        a.set(x, y, on);
        b.set(x + dx + 3, y + dy + 5, on);
      }
    }
    o.require(moment_of_inertia(a) == moment_of_inertia(b), "translation changed MI");
  }
  const double drift = std::abs(moment_of_inertia(disc(64)) - moment_of_inertia(disc(128)));
  o.require(drift < 1e-2, "scale drift " + std::to_string(drift));
  return o;
}

Outcome segmentation_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 50; ++t) {
    const ImageBuffer img = oracle::random_crop(rng, 16, 16);
    const RoiLayout layout = layout_for_crop(16, 16);
    o.require(segment_skin(img, layout) == oracle::naive_segment(img, layout.skin_sample, kDefaultSkinFraction),
              "crop " + std::to_string(t) + " differs from naive segmentation");
  }
  return o;
}

Outcome qp_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240);
  std::size_t degenerate = 0, compared_c = 0, total = 0;
  for (const auto& k : oracle::oracle_kernels()) {
    for (int t = 0; t < 100; ++t) {
      const auto p = oracle::random_problem(rng);
      ++total;
      const std::string where = std::string(svm::to_string(k.kind)) + " set " + std::to_string(t);
      std::optional<svm::TrainResult> r;
      try {
        r = svm::train_detailed(p.data, k, p.nu);
      } catch (const DegenerateModel&) {
        // Optimum at (numerically) zero margin: the oracle optimum must agree.
        ++degenerate;
        const auto scaler = svm::MinMaxScaler::fit(p.data);
        std::vector<std::vector<double>> pts;
        std::vector<int> ys;
        for (const auto& pt : p.data) {
          pts.push_back(scaler.apply(pt.x));
          ys.push_back(pt.y);
        }
        const auto q = svm::signed_kernel_matrix(k, pts, ys);
        const double bound = 2e-3 * p.nu * static_cast<double>(ys.size()) / 2.0;
        o.require(svm::nu_dual_objective(q, oracle::solve_nu_dual(q, ys, p.nu)) < bound,
                  where + ": solver reported zero margin, oracle disagrees");
        continue;
      }
      double sum = 0;
      for (std::size_t i = 0; i < r->alpha.size(); ++i) {
        sum += r->labels[i] * r->alpha[i];
        o.require(r->alpha[i] >= -1e-12 && r->alpha[i] <= r->model.c_eff * (1 + 1e-12), where + ": box violated");
      }
      o.require(std::abs(sum) < 1e-6, where + ": sum y*alpha = " + std::to_string(sum));

      const auto q = svm::signed_kernel_matrix(k, r->scaled_points, r->labels);
      const double fs = svm::nu_dual_objective(q, r->nu_alpha);
      const double fo = svm::nu_dual_objective(q, oracle::solve_nu_dual(q, r->labels, p.nu));
      o.require(std::abs(fs - fo) <= 1e-3 * std::max(std::abs(fo), 1e-9), where + ": nu dual objective mismatch");

      if (r->model.c_eff <= oracle::kOracleMaxC) {
        ++compared_c;
        const double ws = svm::svm_dual_objective(q, r->alpha);
        const double wo = svm::svm_dual_objective(q, oracle::solve_c_dual(q, r->labels, r->model.c_eff));
        o.require(std::abs(ws - wo) <= 1e-3 * std::abs(wo), where + ": C dual objective mismatch");
      }
    }
  }
  std::cout << "  qp: " << total << " sets, " << degenerate << " zero-margin, " << compared_c
            << " compared in C-SVM form (C <= " << oracle::kOracleMaxC << ")" << std::endl;
  return o;
}

eval::LabeledDataset separable_set() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  eval::LabeledDataset d;
  while (d.items.size() < 200) {
    const double x = u(rng), y = u(rng);
    const double s = 0.8 * x - 0.6 * y + 0.1;
    if (std::abs(s) < 0.15) continue;
    const int want = d.items.size() % 2 == 0 ? eval::kWithPhone : eval::kNoPhone;
    if ((s > 0 ? eval::kWithPhone : eval::kNoPhone) != want) continue;
    d.items.push_back({{x, y}, want, "", {}});
  }
  return d;
}

Outcome separability() {
  Outcome o;
  const auto data = separable_set();
  const auto set = eval::training_set(data);
  const std::vector<svm::KernelSpec> kernels{{svm::KernelKind::Linear, 1.0, 0.0, 1.0},
                                             {svm::KernelKind::Polynomial, 1.0, 1.0, 3.0},
                                             {svm::KernelKind::Rbf, 2.0, 0.0, 1.0},
                                             {svm::KernelKind::Sigmoid, 0.5, 0.0, 1.0}};
  const double nu = 0.05;
  for (const auto& k : kernels) {
    const std::string name(svm::to_string(k.kind));
    const auto model = svm::train(set, k, nu);
    std::size_t correct = 0;
    for (const auto& p : set) correct += model.predict(p.x) == p.y ? 1 : 0;
    o.require(correct == set.size(), name + " training accuracy " + std::to_string(correct) + "/200");
    const auto cv = eval::cross_validate(data, k, nu, 9, 1);
    o.require(cv.mean >= 0.95, name + " CV mean " + std::to_string(cv.mean));
    std::cout << "  " << name << ": train " << correct << "/200, CV " << cv.mean << std::endl;
  }
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cellguard_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome end_to_end() {
  Outcome o;
  const fs::path dir = scratch("e2e");
  synth::DatasetOptions d;
  d.positives = 100;
  d.negatives = 100;
  d.seed = 7;
  std::vector<ManifestEntry> entries;
  const auto frames = synth::make_dataset(d);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const fs::path p = dir / ("frame_" + std::to_string(i) + ".ppm");
    write_ppm(p.string(), frames[i].scene.frame);
    entries.push_back({p.string(), frames[i].reported_face, frames[i].scene.label, frames[i].timestamp});
  }
  const IngestResult in = ingest(entries);
  o.require(in.dataset.size() == 200, "ingested " + std::to_string(in.dataset.size()) + " frames");

  RunConfig cfg;
  cfg.set("kernel", "tune");
  cfg.set("tune_kernel", "polynomial");
  const ga::GaConfig g = cfg.ga_config(0);
  o.require(g.population == 20 && g.generations == 50, "GA size not 20x50");
  const auto result = ga::evolve(g, in.dataset, svm::KernelKind::Polynomial);
  const auto best = ga::decode(result.best, svm::KernelKind::Polynomial, g.ranges);
  const auto cv = eval::cross_validate(in.dataset, best.kernel(), best.nu, 9, cfg.cv_seed);
  std::cout << "  tuned nu " << best.nu << " coef0 " << best.coef0 << " degree " << best.degree << " gamma "
            << best.gamma << ": GA fitness " << result.best_fitness << ", 9-fold CV " << cv.mean << " (sd "
            << cv.stddev << ")" << std::endl;
  o.require(cv.failures() == 0, "failing CV folds");
  o.require(cv.mean >= 0.95, "CV mean " + std::to_string(cv.mean));
  fs::remove_all(dir);
  return o;
}

std::vector<eval::FrameVerdict> ten_frames(int positives) {
  std::vector<eval::FrameVerdict> v;
  for (int i = 0; i < 10; ++i) v.push_back({0.25 * i, i < positives ? eval::kWithPhone : eval::kNoPhone});
  return v;
}

Outcome period_logic() {
  Outcome o;
  o.require(eval::classify_period(ten_frames(7), 3.0, 0.65).at(0).decision == eval::kWithPhone, "7/10 not withPhone");
  o.require(eval::classify_period(ten_frames(6), 3.0, 0.65).at(0).decision == eval::kNoPhone, "6/10 not noPhone");
  std::vector<eval::FrameVerdict> twenty;
  for (int i = 0; i < 20; ++i) twenty.push_back({0.1 * i, i < 13 ? eval::kWithPhone : eval::kNoPhone});
  o.require(eval::classify_period(twenty, 3.0, 0.65).at(0).decision == eval::kWithPhone, "13/20 == 0.65 not withPhone");
  o.require(eval::classify_period(ten_frames(7), 3.0, 0.70).at(0).decision == eval::kWithPhone, "7/10 at 0.70 not withPhone");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void cli(Outcome& o, const std::string& args) {
  const std::string cmd = std::string("\"") + CELLGUARD_CLI + "\" " + args + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  o.require(rc == 0, "command failed: cellguard " + args);
}

void same_files(Outcome& o, const fs::path& a, const fs::path& b) {
  const std::string x = slurp(a), y = slurp(b);
  o.require(!x.empty(), a.filename().string() + " is empty");
  o.require(x == y, a.filename().string() + " differs between runs");
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = scratch("determinism");
  const std::string d = dir.string();
  cli(o, "synth --out " + d + "/images --positives 30 --negatives 30 --seed 11");
  for (const char* run : {"a", "b"}) {
    const std::string r = d + "/" + run;
    fs::create_directories(r);
    cli(o, "tune --manifest " + d + "/images/manifest.csv --tune-kernel polynomial --ga-generations 5 --seed 3" +
               " --cv-seed 5 --log " + r + "/ga.csv --params " + r + "/params.cfg --model " + r + "/model.txt");
    cli(o, "eval --manifest " + d + "/images/manifest.csv --model " + r + "/model.txt --cv-seed 5 --report " + r +
               "/cv.csv --features " + r + "/features.csv");
  }
  for (const char* f : {"ga.csv", "params.cfg", "model.txt", "cv.csv", "features.csv"}) {
    same_files(o, dir / "a" / f, dir / "b" / f);
  }

  cli(o, "synth --out " + d + "/video --mode video --seconds 12 --seed 4 --missing-face-rate 0.05");
  for (const char* workers : {"1", "4"}) {
    const std::string r = d + "/w" + workers;
    fs::create_directories(r);
    cli(o, "stream --manifest " + d + "/video/manifest.csv --model " + d + "/a/model.txt --workers " + workers +
               " --status " + r + "/status.txt --verdicts " + r + "/verdicts.csv --alarms " + r + "/alarms.csv");
  }
  for (const char* f : {"status.txt", "verdicts.csv"}) same_files(o, dir / "w1" / f, dir / "w4" / f);
  o.require(slurp(dir / "w1" / "alarms.csv") == slurp(dir / "w4" / "alarms.csv"), "alarms differ by worker count");
  if (o.pass) fs::remove_all(dir);
  return o;
}

Outcome ga_properties() {
  Outcome o;
  const ga::ParameterRanges ranges;
  ga::Chromosome zeros, ones;
  ones.set();
  for (auto kind : {svm::KernelKind::Linear, svm::KernelKind::Polynomial, svm::KernelKind::Rbf,
                    svm::KernelKind::Sigmoid}) {
    const auto lo = ga::decode(zeros, kind, ranges), hi = ga::decode(ones, kind, ranges);
    o.require(lo.nu == ranges.nu.min && lo.coef0 == ranges.coef0.min && lo.degree == ranges.degree.min &&
                  lo.gamma == ranges.gamma.min,
              "all-zero chromosome does not decode to the lower endpoints");
    o.require(hi.nu == ranges.nu.max && hi.coef0 == ranges.coef0.max && hi.degree == ranges.degree.max &&
                  hi.gamma == ranges.gamma.max,
              "all-one chromosome does not decode to the upper endpoints");
  }
  o.require(ga::kChromosomeBits == 116, "chromosome is not 116 bits");

  // Fitness rewards set bits in every field, so the search has room to improve.
  ga::GaConfig cfg;
  cfg.generations = 50;
  cfg.seed = 8;
  const auto r = ga::evolve(cfg, [](const ga::Chromosome& c) {
    return static_cast<double>(c.count()) / static_cast<double>(ga::kChromosomeBits);
  });
  o.require(r.history.size() == 50, "history length " + std::to_string(r.history.size()));
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    o.require(r.history[g].best_fitness >= r.history[g - 1].best_fitness, "best fitness decreased");
  }
  for (const auto& c : r.final_population) {
    const auto h = ga::decode(c, svm::KernelKind::Polynomial, ranges);
    o.require(ranges.nu.contains(h.nu) && ranges.coef0.contains(h.coef0) && ranges.degree.contains(h.degree) &&
                  ranges.gamma.contains(h.gamma),
              "decoded value out of range");
  }
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto h = ga::decode(ga::detail::random_chromosome(rng), svm::KernelKind::Rbf, ranges);
    o.require(ranges.nu.contains(h.nu) && ranges.coef0.contains(h.coef0) && ranges.degree.contains(h.degree) &&
                  ranges.gamma.contains(h.gamma),
              "decoded value out of range");
  }
  return o;
}

}  // namespace

int main() {
  run("moment oracle", 1.0, moment_oracle);
  run("segmentation oracle", 5.0, segmentation_oracle);
  run("QP oracle", 60.0, qp_oracle);
  run("separability", 30.0, separability);
  run("end-to-end", 600.0, end_to_end);
  run("period logic", 1.0, period_logic);
  run("determinism", 600.0, determinism);
  run("GA properties", 60.0, ga_properties);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
