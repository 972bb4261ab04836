#include "ielm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "ielm/error.hpp"
#include "ielm/model_io.hpp"
#include "ielm/quantize.hpp"
#include "ielm/rng.hpp"

namespace ielm {

using nlohmann::json;

// ---- Datasets ----------------------------------------------------------------

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("IELM_DATA_DIR"); env && *env) return env;
  return "data";
}

namespace {

// Stream tags for derive_seed, so each consumer of the root seed draws from
// its own sequence.
enum : std::uint64_t {
  kStreamTrainLimit = 1,
  kStreamTestLimit = 2,
  kStreamTextures = 3,
  kStreamSplit = 4,
  kStreamWeights = 5,
};

std::filesystem::path or_default(const std::string& explicit_path, const std::filesystem::path& dir,
                                 const char* file) {
  return explicit_path.empty() ? dir / file : std::filesystem::path(explicit_path);
}

std::vector<std::filesystem::path> to_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

LoadedData load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  LoadedData out;
  out.name = spec.name.empty() ? spec.kind : spec.name;
  if (spec.kind == "mnist") {
    const auto dir = spec.dir.empty() ? default_data_dir() / "mnist" : std::filesystem::path(spec.dir);
    out.train = load_idx(or_default(spec.train_images, dir, "train-images-idx3-ubyte"),
                         or_default(spec.train_labels, dir, "train-labels-idx1-ubyte"));
    out.test = load_idx(or_default(spec.test_images, dir, "t10k-images-idx3-ubyte"),
                        or_default(spec.test_labels, dir, "t10k-labels-idx1-ubyte"));
    out.steps = {PreprocessStep::zero_mean, PreprocessStep::l2_normalize};
  } else if (spec.kind == "cifar10") {
    const auto dir = spec.dir.empty() ? default_data_dir() / "cifar-10-batches-bin"
                                      : std::filesystem::path(spec.dir);
    auto train = to_paths(spec.train_batches);
    auto test = to_paths(spec.test_batches);
    if (train.empty()) {
      for (int i = 1; i <= 5; ++i) train.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    }
    if (test.empty()) test.push_back(dir / "test_batch.bin");
    out.train = load_cifar10(train, spec.classes);
    out.test = load_cifar10(test, spec.classes);
    out.steps = {PreprocessStep::l2_normalize};
  } else if (spec.kind == "textures") {
    std::vector<GrayImage> images;
    if (spec.texture_images.empty()) {
      const auto [a, b] = default_texture_pair();
      images.push_back(synth_texture(a, spec.texture_size, spec.texture_size,
                                     derive_seed(seed, {kStreamTextures, 0})));
      images.push_back(synth_texture(b, spec.texture_size, spec.texture_size,
                                     derive_seed(seed, {kStreamTextures, 1})));
    } else {
      for (const auto& p : spec.texture_images) images.push_back(read_gray(p));
    }
    const auto patch_seed = derive_seed(seed, {kStreamTextures, 2});
    out.train = texture_dataset(images, spec.patch_size, spec.patches_per_class, Half::left, patch_seed);
    out.test = texture_dataset(images, spec.patch_size, spec.patches_per_class, Half::right, patch_seed);
    // Without centring, (0,1) weights on non-negative patches make every
    // hidden unit active and the model linear through the origin.
    out.steps = {PreprocessStep::zero_mean, PreprocessStep::l2_normalize};
  } else if (spec.kind == "csv") {
    if (spec.train_csv.empty() || spec.test_csv.empty()) {
      throw ConfigError("csv datasets need train_csv and test_csv", "dataset.train_csv");
    }
    out.train = load_csv(spec.train_csv, spec.label_column);
    out.test = load_csv(spec.test_csv, spec.label_column);
    const InputRange joint{std::min(out.train.range.lo, out.test.range.lo),
                           std::max(out.train.range.hi, out.test.range.hi)};
    out.train.range = out.test.range = joint;
    out.train.classes = out.test.classes = std::max(out.train.classes, out.test.classes);
    out.steps = {PreprocessStep::l2_normalize};
  } else {
    throw ConfigError("unknown dataset kind '" + spec.kind + "'", "dataset.kind");
  }
  if (spec.preprocess_set) out.steps = spec.preprocess;
  if (out.train.features != out.test.features) {
    throw DimensionError("train and test sets have different feature counts (" +
                         std::to_string(out.train.features) + " vs " +
                         std::to_string(out.test.features) + ")");
  }
  if (spec.train_limit > 0) {
    out.train = random_subset(out.train, spec.train_limit, derive_seed(seed, {kStreamTrainLimit}));
  }
  if (spec.test_limit > 0) {
    out.test = random_subset(out.test, spec.test_limit, derive_seed(seed, {kStreamTestLimit}));
  }
  return out;
}

// ---- Configuration -------------------------------------------------------------

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::size_sweep: return "size_sweep";
    case ExperimentKind::weight_comparison: return "weight_comparison";
    case ExperimentKind::bit_sweep: return "bit_sweep";
  }
  return "unknown";
}

std::size_t ExperimentConfig::models() const {
  if (models_per_L) return *models_per_L;
  switch (kind) {
    case ExperimentKind::size_sweep: return 8;
    case ExperimentKind::weight_comparison: return 50;
    case ExperimentKind::bit_sweep: return 10;
  }
  return 8;
}

void ExperimentConfig::validate() const {
  if (hidden_sizes.empty()) throw ConfigError("L_list must not be empty", "L_list");
  for (std::size_t i = 0; i < hidden_sizes.size(); ++i) {
    if (hidden_sizes[i] == 0) throw ConfigError("hidden sizes must be positive", "L_list");
    if (i > 0 && hidden_sizes[i] <= hidden_sizes[i - 1]) {
      throw ConfigError("L_list must be strictly ascending", "L_list");
    }
  }
  if (models() == 0) throw ConfigError("models_per_L must be at least 1", "models_per_L");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive", "gamma");
  if (!(selection_threshold > 0.0 && selection_threshold <= 1.0)) {
    throw ConfigError("selection_threshold must be in (0, 1]", "selection_threshold");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)", "train_fraction");
  }
}

namespace {

const std::set<std::string> kTopKeys = {
    "kind", "dataset", "L_list", "models_per_L", "gamma", "original_weights", "proposed_weights",
    "seed", "selection_threshold", "train_fraction", "jobs", "output", "model"};

const std::set<std::string> kDatasetKeys = {
    "kind", "name", "dir", "train_images", "train_labels", "test_images", "test_labels",
    "train_batches", "test_batches", "classes", "texture_images", "patch_size",
    "patches_per_class", "texture_size", "train_csv", "test_csv", "label_column",
    "train_limit", "test_limit", "preprocess"};

const char* const kCifarNames[] = {"airplane", "automobile", "bird", "cat", "deer",
                                   "dog", "frog", "horse", "ship", "truck"};

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type for config value", key);
  }
}

std::uint32_t cifar_class(const json& v, const std::string& key) {
  if (v.is_number_unsigned() && v.get<std::uint32_t>() < 10) return v.get<std::uint32_t>();
  if (v.is_string()) {
    for (std::uint32_t i = 0; i < 10; ++i) {
      if (v.get<std::string>() == kCifarNames[i]) return i;
    }
  }
  throw ConfigError("expected a CIFAR-10 class index or name", key);
}

DatasetSpec parse_dataset(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset must be an object", "dataset");
  DatasetSpec d;
  for (const auto& [key, v] : j.items()) {
    const std::string full = "dataset." + key;
    if (!kDatasetKeys.count(key)) throw ConfigError("unknown config key", full);
    if (key == "kind") d.kind = get_as<std::string>(v, full);
    else if (key == "name") d.name = get_as<std::string>(v, full);
    else if (key == "dir") d.dir = get_as<std::string>(v, full);
    else if (key == "train_images") d.train_images = get_as<std::string>(v, full);
    else if (key == "train_labels") d.train_labels = get_as<std::string>(v, full);
    else if (key == "test_images") d.test_images = get_as<std::string>(v, full);
    else if (key == "test_labels") d.test_labels = get_as<std::string>(v, full);
    else if (key == "train_batches") d.train_batches = get_as<std::vector<std::string>>(v, full);
    else if (key == "test_batches") d.test_batches = get_as<std::vector<std::string>>(v, full);
    else if (key == "classes") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("classes must be a pair", full);
      d.classes = ClassPair{cifar_class(v[0], full), cifar_class(v[1], full)};
    } else if (key == "texture_images") d.texture_images = get_as<std::vector<std::string>>(v, full);
    else if (key == "patch_size") d.patch_size = get_as<std::size_t>(v, full);
    else if (key == "patches_per_class") d.patches_per_class = get_as<std::size_t>(v, full);
    else if (key == "texture_size") d.texture_size = get_as<std::size_t>(v, full);
    else if (key == "train_csv") d.train_csv = get_as<std::string>(v, full);
    else if (key == "test_csv") d.test_csv = get_as<std::string>(v, full);
    else if (key == "label_column") d.label_column = get_as<std::string>(v, full);
    else if (key == "train_limit") d.train_limit = get_as<std::size_t>(v, full);
    else if (key == "test_limit") d.test_limit = get_as<std::size_t>(v, full);
    else if (key == "preprocess") {
      d.preprocess.clear();
      for (const auto& s : get_as<std::vector<std::string>>(v, full)) {
        try {
          d.preprocess.push_back(parse_preprocess_step(s));
        } catch (const InvalidArgument&) {
          throw ConfigError("unknown preprocessing step '" + s + "'", full);
        }
      }
      d.preprocess_set = true;
    }
  }
  return d;
}

WeightDistribution parse_dist_key(const json& v, const std::string& key) {
  try {
    return parse_distribution(get_as<std::string>(v, key));
  } catch (const InvalidArgument&) {
    throw ConfigError("unknown weight distribution", key);
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", "<root>");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (!kTopKeys.count(key)) throw ConfigError("unknown config key", key);
    if (key == "kind") {
      const auto k = get_as<std::string>(v, key);
      if (k == "size_sweep") c.kind = ExperimentKind::size_sweep;
      else if (k == "weight_comparison") c.kind = ExperimentKind::weight_comparison;
      else if (k == "bit_sweep") c.kind = ExperimentKind::bit_sweep;
      else throw ConfigError("unknown experiment kind '" + k + "'", key);
    } else if (key == "dataset") c.dataset = parse_dataset(v);
    else if (key == "L_list") c.hidden_sizes = get_as<std::vector<std::size_t>>(v, key);
    else if (key == "models_per_L") c.models_per_L = get_as<std::size_t>(v, key);
    else if (key == "gamma") c.gamma = get_as<double>(v, key);
    else if (key == "original_weights") c.original_weights = parse_dist_key(v, key);
    else if (key == "proposed_weights") c.proposed_weights = parse_dist_key(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "selection_threshold") c.selection_threshold = get_as<double>(v, key);
    else if (key == "train_fraction") c.train_fraction = get_as<double>(v, key);
    else if (key == "jobs") c.jobs = get_as<std::size_t>(v, key);
    else if (key == "output") c.output = get_as<std::string>(v, key);
    else if (key == "model") c.model = get_as<std::string>(v, key);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON (") + e.what() + ")", path.string());
  }
  return parse_config(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value", assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null()) throw ConfigError("cannot descend into key", key);
    start = dot + 1;
  }
}

// ---- Reports -------------------------------------------------------------------

namespace {

std::string fmt_double(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

template <class T>
std::string fmt_opt(const std::optional<T>& v) {
  return v ? std::to_string(*v) : "";
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(std::span<const SweepRow> rows, std::span<const std::string> notes) {
  std::ostringstream os;
  for (const auto& n : notes) os << "# " << n << '\n';
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.kind << ',' << csv_escape(r.dataset) << ',' << r.arm << ',' << r.hidden << ','
       << r.seed << ',' << fmt_double(r.val_accuracy) << ',' << fmt_double(r.test_accuracy) << ','
       << fmt_double(r.test_accuracy_sd) << ',' << fmt_double(r.beta_energy) << ','
       << fmt_opt(r.bit_width) << ',' << fmt_opt(r.ladder_step) << ','
       << fmt_double(r.agreement_with_float) << ',' << csv_escape(r.error) << '\n';
  }
  return os.str();
}

void write_report(const SweepReport& report, const std::filesystem::path& path) {
  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing", p.string());
    out << text;
    if (!out) throw IoError("cannot write file", p.string());
  };
  write_text(path, to_csv(report.rows, report.notes));
  auto sibling = [&](const char* suffix) {
    auto p = path;
    p.replace_filename(path.stem().string() + suffix);
    return p;
  };
  if (!report.deltas.empty()) write_text(sibling(".delta.csv"), to_csv(report.deltas, report.notes));
  if (!report.candidates.empty()) {
    write_text(sibling(".candidates.csv"), to_csv(report.candidates, report.notes));
  }
}

// ---- Protocol --------------------------------------------------------------------

std::size_t select_model(std::span<const Candidate> candidates, double threshold) {
  if (candidates.empty()) throw InvalidArgument("select_model: no candidates");
  double best = candidates[0].val_accuracy;
  for (const auto& c : candidates) best = std::max(best, c.val_accuracy);
  const double cutoff = threshold * best;
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.val_accuracy < cutoff) continue;
    if (!chosen) {
      chosen = i;
      continue;
    }
    const auto& cur = candidates[*chosen];
    if (c.energy < cur.energy || (c.energy == cur.energy && c.seed < cur.seed)) chosen = i;
  }
  return *chosen;
}

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<std::uint32_t> predict_raw(const QuantizedModel& model, const RawDataset& data) {
  std::vector<std::uint32_t> out(data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    out[i] = static_cast<std::uint32_t>(classify_int(model, data.int_sample(i)));
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

std::string steps_string(std::span<const PreprocessStep> steps) {
  std::string s;
  for (auto step : steps) s += (s.empty() ? "" : "+") + to_string(step);
  return s.empty() ? "none" : s;
}

// Deterministic report order: (dataset, arm, L, seed). Stable, so rows that
// tie keep their insertion order.
void sort_rows(std::vector<SweepRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.dataset, a.arm, a.hidden, a.seed) < std::tie(b.dataset, b.arm, b.hidden, b.seed);
  });
}

bool has_zero_mean(std::span<const PreprocessStep> steps) {
  return std::find(steps.begin(), steps.end(), PreprocessStep::zero_mean) != steps.end();
}

std::vector<std::string> common_notes(const ExperimentConfig& config, const LoadedData& data) {
  std::vector<std::string> notes{
      "experiment=" + to_string(config.kind),
      "dataset=" + data.name + " train=" + std::to_string(data.train.count) +
          " test=" + std::to_string(data.test.count) + " n=" + std::to_string(data.train.features) +
          " m=" + std::to_string(data.train.classes),
      "preprocessing=" + steps_string(data.steps),
      "models_per_L=" + std::to_string(config.models()) + " gamma=" + fmt_double(config.gamma) +
          " seed=" + std::to_string(config.seed),
      std::string("prng=") + std::string(kPrngId),
  };
  return notes;
}

}  // namespace

SweepReport run_weight_comparison(const ExperimentConfig& config, const LoadedData& data) {
  config.validate();
  SweepReport report;
  report.notes = common_notes(config, data);
  report.notes.push_back("pairs=" + std::to_string(config.models()) +
                         " (default 50; the reference setup is described with both 50 and 100 "
                         "pairs, set models_per_L to choose)");

  const NormalizedDataset train_norm = preprocess(data.train, data.steps);
  const NormalizedDataset test_norm = preprocess(data.test, data.steps);
  const LabeledTargets targets(train_norm.labels, data.train.classes);
  const WeightDistribution arms[2] = {config.original_weights, config.proposed_weights};
  const std::size_t models = config.models();

  for (std::size_t hidden : config.hidden_sizes) {
    std::vector<SweepRow> rows(2 * models);
    parallel_for(rows.size(), config.jobs, [&](std::size_t job) {
      const std::size_t arm = job / models;
      const std::size_t k = job % models;
      SweepRow& row = rows[job];
      row.kind = "model";
      row.dataset = data.name;
      row.arm = to_string(arms[arm]);
      row.hidden = hidden;
      row.seed = derive_seed(config.seed, {kStreamWeights, arm, hidden, k});
      try {
        const WeightMatrix w = gen_weights(arms[arm], data.train.features, hidden, row.seed);
        const FloatModel model = train(train_norm.samples, targets, w, config.gamma, {2048, data.steps});
        row.beta_energy = model.beta().frobenius_norm();
        row.test_accuracy = accuracy(predict_batch(model, test_norm.samples), test_norm.labels);
      } catch (const Error& e) {
        throw Error("arm=" + row.arm + " seed=" + std::to_string(row.seed) + ": " + e.what());
      }
    });
    for (std::size_t arm = 0; arm < 2; ++arm) {
      double sum = 0.0, sq = 0.0;
      const std::size_t ok = models;
      for (std::size_t k = 0; k < models; ++k) sum += *rows[arm * models + k].test_accuracy;
      SweepRow agg;
      agg.kind = "aggregate";
      agg.dataset = data.name;
      agg.arm = to_string(arms[arm]);
      agg.hidden = hidden;
      agg.seed = config.seed;
      {
        const double mean = sum / static_cast<double>(ok);
        for (std::size_t k = 0; k < models; ++k) {
          const double d = *rows[arm * models + k].test_accuracy - mean;
          sq += d * d;
        }
        agg.test_accuracy = mean;
        agg.test_accuracy_sd = ok > 1 ? std::sqrt(sq / static_cast<double>(ok - 1)) : 0.0;
      }
      report.rows.push_back(std::move(agg));
    }
    report.candidates.insert(report.candidates.end(), rows.begin(), rows.end());
  }
  sort_rows(report.rows);
  sort_rows(report.candidates);
  return report;
}

SweepReport run_bit_sweep(const FloatModel& model, const RawDataset& test,
                          const std::string& dataset_name) {
  SweepReport report;
  const auto& steps = model.info().preprocessing;
  const NormalizedDataset norm = preprocess(test, steps);
  const std::vector<std::uint32_t> reference = predict_batch(model, norm.samples);
  report.notes.push_back("experiment=bit_sweep");
  report.notes.push_back("float_test_accuracy=" + fmt_double(accuracy(reference, test.labels)));
  report.notes.push_back("preprocessing=" + steps_string(steps));
  const bool integer_path = model.input_weights().is_ternary();
  report.notes.push_back(std::string("evaluation=") +
                         (integer_path ? "integer path on raw inputs" : "float path on preprocessed inputs"));

  for (const IntegerBeta& rung : precision_ladder(model.beta())) {
    std::vector<std::uint32_t> predicted;
    if (integer_path) {
      const QuantizedModel qm = QuantizedModel::from_float(model, rung, test.range);
      predicted = predict_raw(qm, test);
    } else {
      const FloatModel scaled(model.input_weights(), rung.values_as_real(), model.gamma(),
                              model.info());
      predicted = predict_batch(scaled, norm.samples);
    }
    SweepRow row;
    row.kind = "rung";
    row.dataset = dataset_name;
    row.arm = to_string(model.input_weights().distribution());
    row.hidden = model.hidden();
    row.seed = model.input_weights().seed();
    row.test_accuracy = accuracy(predicted, test.labels);
    row.beta_energy = rung.to_real().frobenius_norm();
    row.bit_width = bit_width(rung);
    row.ladder_step = rung.ladder_step();
    row.agreement_with_float = accuracy(predicted, reference);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

struct TrainedCandidate {
  Candidate stats;
  std::shared_ptr<const FloatModel> float_model;
  std::shared_ptr<const QuantizedModel> int_model;
  std::string error;
};

}  // namespace

SweepReport run_size_sweep(const ExperimentConfig& config, const LoadedData& data) {
  config.validate();
  SweepReport report;
  report.notes = common_notes(config, data);
  report.notes.push_back("arms: original=" + to_string(config.original_weights) +
                         " weights + float beta on preprocessed inputs; proposed=" +
                         to_string(config.proposed_weights) +
                         " weights + integer beta on raw integer inputs");
  if (has_zero_mean(data.steps)) {
    report.notes.push_back(
        "mean_shift: training rows were zero-mean; the integer path centres raw inputs exactly "
        "as n*x - sum(x)");
  }

  auto [train_raw, val_raw] = split_train_val(data.train, config.train_fraction,
                                              derive_seed(config.seed, {kStreamSplit}));
  const NormalizedDataset train_norm = preprocess(train_raw, data.steps);
  const NormalizedDataset val_norm = preprocess(val_raw, data.steps);
  const NormalizedDataset test_norm = preprocess(data.test, data.steps);
  const LabeledTargets targets(train_norm.labels, data.train.classes);
  const InputRange range{std::min(data.train.range.lo, data.test.range.lo),
                         std::max(data.train.range.hi, data.test.range.hi)};
  const WeightDistribution dists[2] = {config.original_weights, config.proposed_weights};
  const char* arm_names[2] = {"original", "proposed"};
  const std::size_t models = config.models();

  for (std::size_t hidden : config.hidden_sizes) {
    std::vector<TrainedCandidate> trained(2 * models);
    parallel_for(trained.size(), config.jobs, [&](std::size_t job) {
      const std::size_t arm = job / models;
      const std::size_t k = job % models;
      TrainedCandidate& tc = trained[job];
      tc.stats.seed = derive_seed(config.seed, {kStreamWeights, arm, hidden, k});
      try {
        const WeightMatrix w = gen_weights(dists[arm], data.train.features, hidden, tc.stats.seed);
        auto model = std::make_shared<const FloatModel>(
            train(train_norm.samples, targets, w, config.gamma, {2048, data.steps}));
        tc.stats.energy = model->beta().frobenius_norm();
        if (arm == 0) {
          tc.stats.val_accuracy = accuracy(predict_batch(*model, val_norm.samples), val_norm.labels);
          tc.float_model = std::move(model);
        } else {
          auto qm = std::make_shared<const QuantizedModel>(
              QuantizedModel::from_float(*model, quantize_beta(model->beta()), range));
          tc.stats.val_accuracy = accuracy(predict_raw(*qm, val_raw), val_raw.labels);
          tc.int_model = std::move(qm);
        }
      } catch (const Error& e) {
        tc.error = e.what();
      }
    });

    std::optional<double> test_acc[2];
    for (std::size_t arm = 0; arm < 2; ++arm) {
      std::vector<Candidate> ok;
      std::vector<std::size_t> ok_index;
      for (std::size_t k = 0; k < models; ++k) {
        const auto& tc = trained[arm * models + k];
        SweepRow c;
        c.kind = tc.error.empty() ? "candidate" : "error";
        c.dataset = data.name;
        c.arm = arm_names[arm];
        c.hidden = hidden;
        c.seed = tc.stats.seed;
        c.error = tc.error;
        if (tc.error.empty()) {
          c.val_accuracy = tc.stats.val_accuracy;
          c.beta_energy = tc.stats.energy;
          ok.push_back(tc.stats);
          ok_index.push_back(arm * models + k);
        }
        report.candidates.push_back(std::move(c));
      }
      SweepRow row;
      row.dataset = data.name;
      row.arm = arm_names[arm];
      row.hidden = hidden;
      if (ok.empty()) {
        row.kind = "error";
        row.error = "every candidate failed: " + trained[arm * models].error;
        report.rows.push_back(std::move(row));
        continue;
      }
      const auto& chosen = trained[ok_index[select_model(ok, config.selection_threshold)]];
      row.kind = "selected";
      row.seed = chosen.stats.seed;
      row.val_accuracy = chosen.stats.val_accuracy;
      row.beta_energy = chosen.stats.energy;
      try {
        if (arm == 0) {
          row.test_accuracy =
              accuracy(predict_batch(*chosen.float_model, test_norm.samples), test_norm.labels);
        } else {
          row.test_accuracy = accuracy(predict_raw(*chosen.int_model, data.test), data.test.labels);
          row.bit_width = bit_width(chosen.int_model->beta());
          row.ladder_step = chosen.int_model->beta().ladder_step();
        }
        test_acc[arm] = row.test_accuracy;
      } catch (const Error& e) {
        row.kind = "error";
        row.error = e.what();
      }
      report.rows.push_back(std::move(row));
    }
    if (test_acc[0] && test_acc[1]) {
      SweepRow delta;
      delta.kind = "delta";
      delta.dataset = data.name;
      delta.arm = "original-proposed";
      delta.hidden = hidden;
      delta.seed = config.seed;
      delta.test_accuracy = *test_acc[0] - *test_acc[1];
      report.deltas.push_back(std::move(delta));
    }
  }
  sort_rows(report.rows);
  sort_rows(report.candidates);
  return report;
}

SweepReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LoadedData data = load_dataset(config.dataset, config.seed);
  switch (config.kind) {
    case ExperimentKind::size_sweep: return run_size_sweep(config, data);
    case ExperimentKind::weight_comparison: return run_weight_comparison(config, data);
    case ExperimentKind::bit_sweep: break;
  }
  if (!config.model.empty()) {
    const AnyModel any = load_model(config.model);
    const auto* fm = std::get_if<FloatModel>(&any);
    if (!fm) throw ConfigError("bit sweep needs a float (unquantized) model", "model");
    SweepReport r = run_bit_sweep(*fm, data.test, data.name);
    r.notes.insert(r.notes.begin(), "model=" + config.model);
    return r;
  }
  // Train `models` classifiers of the proposed distribution at the first L
  // on the full training set and sweep each.
  SweepReport report;
  report.notes = common_notes(config, data);
  const NormalizedDataset train_norm = preprocess(data.train, data.steps);
  const LabeledTargets targets(train_norm.labels, data.train.classes);
  const std::size_t hidden = config.hidden_sizes.front();
  std::vector<SweepReport> parts(config.models());
  parallel_for(parts.size(), config.jobs, [&](std::size_t k) {
    const auto seed = derive_seed(config.seed, {kStreamWeights, 1, hidden, k});
    const WeightMatrix w = gen_weights(config.proposed_weights, data.train.features, hidden, seed);
    const FloatModel model = train(train_norm.samples, targets, w, config.gamma, {2048, data.steps});
    parts[k] = run_bit_sweep(model, data.test, data.name);
  });
  for (auto& p : parts) {
    report.notes.push_back("seed=" + std::to_string(p.rows.front().seed) + " " + p.notes[1]);
    report.rows.insert(report.rows.end(), p.rows.begin(), p.rows.end());
  }
  return report;
}

}  // namespace ielm
