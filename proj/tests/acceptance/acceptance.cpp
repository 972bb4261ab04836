// Acceptance suite. Prints one verdict line per criterion:
//   PASS|FAIL|SKIP <id> <title>: <detail>
// Exit status is 0 once every criterion has been evaluated; --strict makes
// any FAIL exit 1.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ielm/data.hpp"
#include "ielm/elm.hpp"
#include "ielm/error.hpp"
#include "ielm/experiments.hpp"
#include "ielm/int_infer.hpp"
#include "ielm/model_io.hpp"
#include "ielm/quantize.hpp"
#include "ielm/rng.hpp"
#include "oracles.hpp"

using namespace ielm;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Verdict {
  Status status = Status::fail;
  std::string detail;
};

struct Options {
  bool fast = false;
  bool strict = false;
  std::string out_dir = "acceptance_reports";
  std::vector<std::string> only;
  std::uint64_t seed = 1;
};

Verdict pass_if(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- random model builders ---------------------------------------------------

DenseMatrix normal_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::normal_distribution<double> d(0.0, 1.0);
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = d(gen);
  return m;
}

std::size_t pick(std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
}

FloatModel random_float_model(std::mt19937_64& gen, std::size_t n) {
  const auto dist = gen() % 2 ? WeightDistribution::ternary : WeightDistribution::uniform01;
  const std::size_t hidden = pick(gen, 1, 64);
  const std::size_t classes = pick(gen, 2, 10);
  return FloatModel(gen_weights(dist, n, hidden, gen()), normal_matrix(gen, hidden, classes), 1.0, {});
}

// Nonzero integer signal in [0, 255].
std::vector<std::int32_t> random_signal(std::mt19937_64& gen, std::size_t n) {
  std::uniform_int_distribution<std::int32_t> d(0, 255);
  std::vector<std::int32_t> x(n);
  for (;;) {
    bool any = false;
    for (auto& v : x) {
      v = d(gen);
      any = any || v != 0;
    }
    if (any) return x;
  }
}

// ---- criteria 1-7 ----------------------------------------------------------------

Verdict scale_invariance(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {1}));
  std::size_t triples = 0, mismatches = 0, raw_checks = 0, raw_mismatches = 0;
  std::lognormal_distribution<double> scale(0.0, 3.0);
  for (std::size_t n : {4u, 144u, 784u}) {
    for (int t = 0; t < 400; ++t) {
      const FloatModel model = random_float_model(gen, n);
      const auto xi = random_signal(gen, n);
      const std::vector<double> x(xi.begin(), xi.end());
      double norm = 0.0;
      for (double v : x) norm += v * v;
      norm = std::sqrt(norm);
      const std::size_t base = predict_float(model, x);
      for (double c : {1.0 / norm, scale(gen), static_cast<double>(pick(gen, 2, 9))}) {
        std::vector<double> cx(x);
        for (auto& v : cx) v *= c;
        ++triples;
        mismatches += predict_float(model, cx) != base;
      }
      // Raw integer signal through the integer path vs. the normalized signal
      // through the float path, same ternary weights and integer β.
      if (model.input_weights().is_ternary()) {
        const auto q = QuantizedModel::from_float(model, quantize_beta(model.beta()), {0, 255});
        const FloatModel same = q.to_float_model();
        std::vector<double> xn(x);
        for (auto& v : xn) v /= norm;
        ++raw_checks;
        raw_mismatches += classify_int(q, {xi, {0, 255}}) != predict_float(same, xn);
      }
    }
  }
  return pass_if(mismatches == 0 && raw_mismatches == 0,
                 std::to_string(triples) + " (model, x, c) triples, " + std::to_string(mismatches) +
                     " mismatches; " + std::to_string(raw_checks) + " raw-integer vs normalized checks, " +
                     std::to_string(raw_mismatches) + " mismatches");
}

Verdict int_float_equivalence(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {2}));
  std::size_t models = 0, checks = 0, mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = std::vector<std::size_t>{4, 16, 144, 784}[pick(gen, 0, 3)];
    const std::size_t hidden = pick(gen, 1, 200);
    const std::size_t classes = pick(gen, 2, 10);
    // Bounded so every float sum in the reference stays below 2^53.
    const std::int32_t bound = 1 << pick(gen, 0, 16);
    std::uniform_int_distribution<std::int32_t> bd(-bound, bound);
    std::vector<std::int32_t> b(hidden * classes);
    for (auto& v : b) v = bd(gen);
    ModelInfo info;
    if (gen() % 2) info.preprocessing = {PreprocessStep::zero_mean, PreprocessStep::l2_normalize};
    const QuantizedModel q(gen_weights_ternary(n, hidden, gen()),
                           IntegerBeta(hidden, classes, std::move(b), 1.0, 0), {0, 255}, 1.0,
                           WeightDistribution::ternary, 0, info);
    ++models;
    for (int s = 0; s < 5; ++s) {
      const auto x = random_signal(gen, n);
      std::size_t got, want;
      try {
        got = classify_int(q, {x, {0, 255}});
        want = classify_float_reference(q, {x, {0, 255}});
      } catch (const InvalidArgument&) {
        continue;  // constant signal, null after centring
      }
      ++checks;
      mismatches += got != want;
    }
  }
  return pass_if(mismatches == 0 && models >= 1000,
                 std::to_string(models) + " models, " + std::to_string(checks) + " inputs, " +
                     std::to_string(mismatches) + " mismatches");
}

Verdict beta_scaling(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {3}));
  std::lognormal_distribution<double> scale(0.0, 4.0);
  std::size_t mismatches = 0;
  const std::size_t trials = 1000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = pick(gen, 2, 100);
    const FloatModel model = random_float_model(gen, n);
    const double c = scale(gen);
    DenseMatrix scaled = model.beta();
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled.data()[i] *= c;
    const FloatModel other(model.input_weights(), scaled, 1.0, {});
    const auto xi = random_signal(gen, n);
    const std::vector<double> x(xi.begin(), xi.end());
    mismatches += predict_float(model, x) != predict_float(other, x);
  }
  return pass_if(mismatches == 0, std::to_string(trials) + " (model, c) pairs, " +
                                      std::to_string(mismatches) + " mismatches");
}

Verdict training_oracle(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {4}));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t samples = pick(gen, 1, 50), hidden = pick(gen, 1, 20), classes = pick(gen, 1, 5);
    const std::size_t n = pick(gen, 1, 30);
    const DenseMatrix x = normal_matrix(gen, samples, n);
    std::vector<std::uint32_t> labels(samples);
    for (auto& l : labels) l = static_cast<std::uint32_t>(pick(gen, 0, classes - 1));
    const LabeledTargets targets(labels, classes);
    const auto dist = gen() % 2 ? WeightDistribution::ternary : WeightDistribution::uniform01;
    const WeightMatrix w = gen_weights(dist, n, hidden, gen());
    const double gamma = std::vector<double>{0.1, 1.0, 10.0}[pick(gen, 0, 2)];
    const std::size_t block = std::vector<std::size_t>{1, 3, 7, 2048}[pick(gen, 0, 3)];
    const FloatModel m = train(x, targets, w, gamma, {block, {}});
    const DenseMatrix expect = oracle::ridge_beta(oracle::relu_features(x, w.to_dense()), targets.onehot(), gamma);
    worst = std::max(worst, oracle::max_abs_diff(m.beta(), expect));
  }
  return pass_if(worst <= 1e-8, "100 problems, worst max-abs difference " + fmt("%.3g", worst) +
                                    " (limit 1e-8)");
}

Verdict quantizer_contract(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {5}));
  std::uniform_real_distribution<double> log_scale(-6.0, 3.0);
  std::size_t bad_unit = 0, bad_bound = 0, bad_end = 0, bad_length = 0, refused = 0;
  const std::size_t trials = 500;
  for (std::size_t t = 0; t < trials; ++t) {
    DenseMatrix beta = normal_matrix(gen, pick(gen, 1, 50), pick(gen, 1, 10));
    const double s = std::pow(10.0, log_scale(gen));
    std::size_t min_at = 0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      beta.data()[i] *= s;
      if (std::fabs(beta.data()[i]) < std::fabs(beta.data()[min_at])) min_at = i;
    }
    IntegerBeta q;
    try {
      q = quantize_beta(beta);
    } catch (const NumericError&) {
      ++refused;  // dynamic range beyond 32 bits; the quantizer refuses it
      continue;
    }
    bad_unit += std::abs(q.values()[min_at]) != 1;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      bad_bound += std::fabs(q.values()[i] - beta.data()[i] / q.tau()) > 0.5;
    }
    const auto ladder = precision_ladder(beta);
    bad_end += ladder.back().max_abs() != 1;
    const long expect = static_cast<long>(std::floor(std::log2(static_cast<double>(q.max_abs()))));
    const long steps = static_cast<long>(ladder.size()) - 1;
    bad_length += std::labs(steps - expect) > 1;
  }
  return pass_if(bad_unit + bad_bound + bad_end + bad_length == 0,
                 std::to_string(trials - refused) + " matrices checked (" + std::to_string(refused) +
                     " refused as wider than 32 bits); violations: unit=" + std::to_string(bad_unit) +
                     " bound=" + std::to_string(bad_bound) + " end=" + std::to_string(bad_end) +
                     " length=" + std::to_string(bad_length));
}

Verdict float_op_audit(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {6}));
  std::uint64_t float_ops = 0, projection_mul = 0, int_ops = 0, ref_float_ops = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = t % 2 ? 784 : 144;
    const std::size_t hidden = pick(gen, 1, 300), classes = pick(gen, 2, 10);
    ModelInfo info;
    if (t % 4 < 2) info.preprocessing = {PreprocessStep::zero_mean, PreprocessStep::l2_normalize};
    const FloatModel f(gen_weights(WeightDistribution::ternary, n, hidden, gen()),
                       normal_matrix(gen, hidden, classes), 1.0, info);
    const auto q = QuantizedModel::from_float(f, quantize_beta(f.beta()), {0, 255});
    const auto x = random_signal(gen, n);
    OpAudit audit;
    classify_int(q, {x, {0, 255}}, audit);
    float_ops += audit.counts().float_ops;
    projection_mul += audit.counts().projection_mul;
    int_ops += audit.counts().int_add + audit.counts().int_sub + audit.counts().int_mul +
               audit.counts().int_cmp;
    OpAudit ref;
    classify_float_reference(q, {x, {0, 255}}, ref);
    ref_float_ops += ref.counts().float_ops;
  }
  return pass_if(float_ops == 0 && projection_mul == 0 && int_ops > 0 && ref_float_ops > 0,
                 "200 classifications: float ops=" + std::to_string(float_ops) +
                     ", projection multiplies=" + std::to_string(projection_mul) +
                     ", integer ops=" + std::to_string(int_ops) +
                     " (audit sees " + std::to_string(ref_float_ops) + " float ops on the float reference)");
}

Verdict parser_golden(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, {7}));
  std::uniform_int_distribution<int> byte(0, 255);
  const fs::path dir = fs::path(o.out_dir) / "fixtures";
  fs::create_directories(dir);
  std::size_t files = 0, failures = 0;

  // IDX: header, then pixels, then labels; written by hand here.
  auto be32 = [](std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
  };
  for (std::uint32_t count : {1u, 5u, 17u}) {
    std::vector<std::uint8_t> img, lab;
    be32(img, 0x803);
    be32(img, count);
    be32(img, 28);
    be32(img, 28);
    for (std::uint32_t i = 0; i < count * 784; ++i) img.push_back(static_cast<std::uint8_t>(byte(gen)));
    be32(lab, 0x801);
    be32(lab, count);
    for (std::uint32_t i = 0; i < count; ++i) lab.push_back(static_cast<std::uint8_t>(byte(gen) % 10));
    write_file(dir / "img.idx", img);
    write_file(dir / "lab.idx", lab);
    const RawDataset d = load_idx(dir / "img.idx", dir / "lab.idx");
    write_idx(d, 28, 28, dir / "img2.idx", dir / "lab2.idx");
    files += 2;
    failures += read_file(dir / "img2.idx") != img;
    failures += read_file(dir / "lab2.idx") != lab;
  }
  // CIFAR-10: label byte then 3072 pixel bytes per record.
  for (std::size_t records : {1u, 7u}) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t r = 0; r < records; ++r) {
      bytes.push_back(static_cast<std::uint8_t>(byte(gen) % 10));
      for (std::size_t p = 0; p < kCifarPixels; ++p) bytes.push_back(static_cast<std::uint8_t>(byte(gen)));
    }
    write_file(dir / "batch.bin", bytes);
    const std::vector<fs::path> batches{dir / "batch.bin"};
    const RawDataset d = load_cifar10(batches);
    write_file(dir / "batch2.bin", encode_cifar10(d));
    ++files;
    failures += read_file(dir / "batch2.bin") != bytes;
  }
  fs::remove_all(dir);
  return pass_if(failures == 0, std::to_string(files) + " fixture files round-tripped, " +
                                    std::to_string(failures) + " byte mismatches");
}

// ---- criteria 8-11 (need data) -----------------------------------------------

bool mnist_present() {
  const fs::path dir = default_data_dir() / "mnist";
  return fs::exists(dir / "train-images-idx3-ubyte") && fs::exists(dir / "t10k-images-idx3-ubyte");
}

Verdict missing_mnist() {
  return {Status::skip, "MNIST IDX files not found under " + (default_data_dir() / "mnist").string() +
                            " (set IELM_DATA_DIR)"};
}

ExperimentConfig mnist_config(const Options& o, ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.dataset.kind = "mnist";
  c.seed = o.seed;
  return c;
}

void save(const Options& o, const SweepReport& r, const std::string& name) {
  fs::create_directories(o.out_dir);
  write_report(r, fs::path(o.out_dir) / (name + ".csv"));
}

std::pair<double, double> arm_means(const SweepReport& r) {
  double cont = NAN, tern = NAN;
  for (const auto& row : r.rows) {
    if (row.arm == "continuous") cont = *row.test_accuracy;
    if (row.arm == "ternary") tern = *row.test_accuracy;
  }
  return {cont, tern};
}

Verdict mnist_table_full(const Options& o) {
  if (o.fast) return {Status::skip, "full run disabled (--fast)"};
  if (!mnist_present()) return missing_mnist();
  auto c = mnist_config(o, ExperimentKind::weight_comparison);
  c.hidden_sizes = {2000};
  c.models_per_L = 10;
  const auto r = run_experiment(c);
  save(o, r, "mnist_table_full");
  const auto [cont, tern] = arm_means(r);
  const bool in_band = cont >= 0.953 && cont <= 0.966 && tern >= 0.953 && tern <= 0.966;
  return pass_if(in_band && std::fabs(cont - tern) <= 0.005,
                 "L=2000, 10 pairs: continuous " + pct(cont) + "%, ternary " + pct(tern) +
                     "%, gap " + fmt("%.2f", 100.0 * std::fabs(cont - tern)) +
                     " (need both in [95.3, 96.6], gap <= 0.5)");
}

Verdict mnist_table_fast(const Options& o) {
  if (!mnist_present()) return missing_mnist();
  auto c = mnist_config(o, ExperimentKind::weight_comparison);
  c.hidden_sizes = {500};
  c.models_per_L = 10;
  c.dataset.train_limit = 10000;
  const auto r = run_experiment(c);
  save(o, r, "mnist_table_fast");
  const auto [cont, tern] = arm_means(r);
  return pass_if(cont >= 0.92 && tern >= 0.92 && std::fabs(cont - tern) <= 0.015,
                 "10k subset, L=500, 10 pairs: continuous " + pct(cont) + "%, ternary " + pct(tern) +
                     "% (need both >= 92, gap <= 1.5)");
}

Verdict mnist_bit_sweep(const Options& o) {
  if (!mnist_present()) return missing_mnist();
  auto c = mnist_config(o, ExperimentKind::bit_sweep);
  c.hidden_sizes = {1000};
  c.models_per_L = 1;
  const auto r = run_experiment(c);
  save(o, r, "mnist_bit_sweep");
  const auto& rungs = r.rows;
  const double full = *rungs.front().test_accuracy;
  const std::uint32_t initial = *rungs.front().bit_width;
  double worst = 0.0;
  std::uint32_t reached = initial;
  for (const auto& row : rungs) {
    worst = std::max(worst, full - *row.test_accuracy);
    reached = *row.bit_width;
    if (2 * *row.bit_width <= initial) break;
  }
  std::string tail;
  for (const auto& row : rungs) tail += " " + std::to_string(*row.bit_width) + "b:" + pct(*row.test_accuracy);
  return pass_if(2 * reached <= initial && worst <= 0.005,
                 "L=1000 ternary, " + std::to_string(initial) + " bits at " + pct(full) + "%; largest drop " +
                     fmt("%.2f", 100.0 * worst) + " points down to " + std::to_string(reached) +
                     " bits (limit 0.5); ladder" + tail);
}

struct GapResult {
  Verdict verdict;
  std::string summary;
};

GapResult size_sweep_gap(const Options& o, DatasetSpec spec, const std::string& name) {
  ExperimentConfig c;
  c.kind = ExperimentKind::size_sweep;
  c.dataset = std::move(spec);
  c.hidden_sizes = {250, 400, 600, 1000, 1600, 2500};
  c.models_per_L = 8;
  c.seed = o.seed;
  const auto r = run_experiment(c);
  save(o, r, name);
  bool ok = r.deltas.size() == c.hidden_sizes.size();
  std::string s = name + " (original - proposed):";
  for (const auto& d : r.deltas) {
    const double gap = *d.test_accuracy;
    ok = ok && std::fabs(gap) <= 0.03;
    s += " L=" + std::to_string(d.hidden) + ":" + fmt("%+.2f", 100.0 * gap);
  }
  for (const auto& row : r.rows) {
    if (row.kind == "error") s += " [error " + row.arm + " L=" + std::to_string(row.hidden) + "]";
  }
  return {pass_if(ok, s), s};
}

Verdict size_sweep_shape(const Options& o, Verdict* texture_only) {
  DatasetSpec tex;
  tex.kind = "textures";
  const GapResult t = size_sweep_gap(o, tex, "textures_size_sweep");
  *texture_only = t.verdict;
  std::string detail = t.summary;
  Status status = t.verdict.status;
  if (mnist_present()) {
    DatasetSpec m;
    m.kind = "mnist";
    m.train_limit = 10000;
    const GapResult g = size_sweep_gap(o, m, "mnist_subset_size_sweep");
    detail += "; " + g.summary;
    if (g.verdict.status == Status::fail) status = Status::fail;
  } else {
    detail += "; MNIST subset skipped (data not found)";
  }
  return {status, detail + " (need |gap| <= 3 at every L)"};
}

const char* label(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::skip: return "SKIP";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Acceptance criteria"};
  app.add_flag("--fast", o.fast, "Skip the full-scale MNIST table run");
  app.add_flag("--strict", o.strict, "Exit 1 if any criterion fails");
  app.add_option("--out-dir", o.out_dir, "Where experiment reports are written");
  app.add_option("--only", o.only, "Run only these criterion ids (e.g. 1 8-fast)");
  app.add_option("--seed", o.seed, "Root seed");
  CLI11_PARSE(app, argc, argv);

  Verdict texture_part{Status::skip, "criterion 10 not run"};
  struct Criterion {
    std::string id;
    std::string title;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"1", "scale invariance of predictions", [&] { return scale_invariance(o); }},
      {"2", "integer path equals float evaluation", [&] { return int_float_equivalence(o); }},
      {"3", "argmax invariance under beta scaling", [&] { return beta_scaling(o); }},
      {"4", "streaming training matches dense oracle", [&] { return training_oracle(o); }},
      {"5", "quantizer contract", [&] { return quantizer_contract(o); }},
      {"6", "no floating-point ops on integer path", [&] { return float_op_audit(o); }},
      {"7", "IDX and CIFAR-10 byte round-trip", [&] { return parser_golden(o); }},
      {"8", "MNIST weight comparison, full scale", [&] { return mnist_table_full(o); }},
      {"8-fast", "MNIST weight comparison, fast mode", [&] { return mnist_table_fast(o); }},
      {"9", "MNIST bit sweep keeps accuracy to half width", [&] { return mnist_bit_sweep(o); }},
      {"10", "size sweep gap within 3 points for L >= 250",
       [&] { return size_sweep_shape(o, &texture_part); }},
      {"11", "texture table row",
       [&] {
         // Not reproducible without the original texture images; reported
         // through the synthetic-texture part of criterion 10.
         if (texture_part.status == Status::skip) return Verdict{Status::skip, "needs criterion 10"};
         return Verdict{texture_part.status,
                        "original images unavailable; substitute is the synthetic-texture gap check: " +
                            texture_part.detail};
       }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!o.only.empty() && std::find(o.only.begin(), o.only.end(), c.id) == o.only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {Status::fail, std::string("error: ") + e.what()};
    }
    failures += v.status == Status::fail;
    std::printf("%s %s %s: %s [%.1fs]\n", label(v.status), c.id.c_str(), c.title.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return o.strict && failures > 0 ? 1 : 0;
}
