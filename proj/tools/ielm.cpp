// ielm: command-line front end for training, quantizing and evaluating
// integer-inference ELM classifiers.
//
// Exit codes: 0 success, 1 other failure, 2 missing/unreadable file or
// refused overwrite, 3 input dimension mismatch, 4 invalid configuration.
// Failures print one line to stderr: error code=<n> kind=<k> [path=..|key=..] message="..".

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielm/data.hpp"
#include "ielm/elm.hpp"
#include "ielm/error.hpp"
#include "ielm/experiments.hpp"
#include "ielm/int_infer.hpp"
#include "ielm/model_io.hpp"
#include "ielm/quantize.hpp"
#include "ielm/rng.hpp"

namespace fs = std::filesystem;
using namespace ielm;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitIo = 2;
constexpr int kExitDimension = 3;
constexpr int kExitConfig = 4;

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

class OutputExists : public Error {
 public:
  explicit OutputExists(const std::string& path)
      : Error("output exists; pass --force to overwrite"), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

int verbosity = 0;

void log(const std::string& line) {
  if (verbosity > 0) std::cerr << "[ielm] " << line << '\n';
}

void check_output(const std::string& path, bool force) {
  if (!force && fs::exists(path)) throw OutputExists(path);
}

// Writes through a temporary sibling so a failed run never leaves a
// partial artifact under the requested name.
template <class WriteFn>
void write_atomically(const fs::path& path, WriteFn&& write) {
  fs::path tmp = path;
  tmp += ".partial";
  try {
    write(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void add_dataset_options(CLI::App* cmd, DatasetSpec& spec) {
  cmd->add_option("--data", spec.kind, "Dataset kind: mnist, cifar10, textures, csv")
      ->check(CLI::IsMember({"mnist", "cifar10", "textures", "csv"}));
  cmd->add_option("--data-dir", spec.dir, "Directory with the dataset's standard file names");
  cmd->add_option("--train-images", spec.train_images, "IDX training images");
  cmd->add_option("--train-labels", spec.train_labels, "IDX training labels");
  cmd->add_option("--test-images", spec.test_images, "IDX test images");
  cmd->add_option("--test-labels", spec.test_labels, "IDX test labels");
  cmd->add_option("--train-csv", spec.train_csv, "CSV training set");
  cmd->add_option("--test-csv", spec.test_csv, "CSV test set");
  cmd->add_option("--label-column", spec.label_column, "CSV label column name");
  cmd->add_option("--train-limit", spec.train_limit, "Random training subset size (0 = all)");
  cmd->add_option("--test-limit", spec.test_limit, "Random test subset size (0 = all)");
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  DatasetSpec dataset;
  std::size_t hidden = 1000;
  double gamma = 1.0;
  std::string weights = "ternary";
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
};

int cmd_train(const TrainArgs& a) {
  check_output(a.out, a.force);
  const LoadedData data = load_dataset(a.dataset, a.seed);
  log("loaded " + data.name + ": " + std::to_string(data.train.count) + " training samples");
  const NormalizedDataset train_set = preprocess(data.train, data.steps);
  const WeightMatrix w = gen_weights(parse_distribution(a.weights), data.train.features, a.hidden,
                                     derive_seed(a.seed, {0}));
  TrainStats stats;
  const FloatModel model = train(train_set.samples, LabeledTargets(train_set.labels, data.train.classes),
                                 w, a.gamma, {2048, data.steps}, &stats);
  write_atomically(a.out, [&](const fs::path& p) { save_model(model, p); });
  std::printf("trained L=%zu gamma=%.17g seconds=%.3f residual=%.3e model=%s\n", a.hidden, a.gamma,
              stats.seconds, stats.residual, a.out.c_str());
  return 0;
}

// ---- quantize ----------------------------------------------------------------

struct QuantizeArgs {
  std::string model;
  std::string out;
  std::optional<std::uint32_t> steps;
  std::optional<std::uint32_t> max_bits;
  std::vector<std::int32_t> range{0, 255};
  bool force = false;
};

int cmd_quantize(const QuantizeArgs& a) {
  check_output(a.out, a.force);
  const AnyModel any = load_model(a.model);
  const auto* fm = std::get_if<FloatModel>(&any);
  if (!fm) throw InvalidArgument("model is already quantized");
  if (!fm->input_weights().is_ternary()) {
    throw InvalidArgument("integer inference needs ternary or binary input weights, model has " +
                          to_string(fm->input_weights().distribution()));
  }
  if (a.range.size() != 2 || a.range[0] > a.range[1]) {
    throw InvalidArgument("--range needs two values lo <= hi");
  }
  IntegerBeta beta = quantize_beta(fm->beta());
  const std::uint32_t steps = a.steps.value_or(0);
  for (std::uint32_t i = 0; i < steps; ++i) {
    if (!can_reduce(beta)) throw InvalidArgument("precision ladder exhausted after " + std::to_string(i) + " steps");
    beta = reduce_precision_step(beta);
  }
  if (a.max_bits) {
    while (bit_width(beta) > *a.max_bits && can_reduce(beta)) beta = reduce_precision_step(beta);
    if (bit_width(beta) > *a.max_bits) {
      throw InvalidArgument("cannot reach " + std::to_string(*a.max_bits) + " bits");
    }
  }
  const QuantizedModel qm = QuantizedModel::from_float(*fm, beta, InputRange{a.range[0], a.range[1]});
  write_atomically(a.out, [&](const fs::path& p) { save_model(qm, p); });
  std::printf("quantized bits=%u ladder_step=%u tau=%.17g model=%s\n", bit_width(beta),
              beta.ladder_step(), beta.tau(), a.out.c_str());
  return 0;
}

// ---- classify ----------------------------------------------------------------

struct ClassifyArgs {
  std::string model;
  std::string input;
  std::string format = "text";
  std::string labels;
  std::string label_column = "label";
  std::string reference;
  bool scores = false;
};

// One sample per non-blank line, integers separated by commas or spaces.
std::vector<std::vector<std::int32_t>> read_text_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file", path);
  std::vector<std::vector<std::int32_t>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line) {
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream ss(line);
    std::vector<std::int32_t> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size() || v < INT32_MIN || v > INT32_MAX) throw std::out_of_range(tok);
        row.push_back(static_cast<std::int32_t>(v));
      } catch (const std::logic_error&) {
        throw FormatError("input line " + std::to_string(lineno) + ": '" + tok +
                          "' is not a 32-bit integer");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

RawDataset read_input(const ClassifyArgs& a, std::size_t features) {
  if (a.format == "idx") {
    const auto images = read_file(a.input);
    std::vector<std::uint8_t> labels;
    if (!a.labels.empty()) {
      labels = read_file(a.labels);
    } else {
      // Images only: pair them with placeholder labels.
      const std::uint32_t count = images.size() >= 8
                                      ? (std::uint32_t{images[4]} << 24 | std::uint32_t{images[5]} << 16 |
                                         std::uint32_t{images[6]} << 8 | images[7])
                                      : 0;
      labels = {0, 0, 8, 1, static_cast<std::uint8_t>(count >> 24), static_cast<std::uint8_t>(count >> 16),
                static_cast<std::uint8_t>(count >> 8), static_cast<std::uint8_t>(count)};
      labels.resize(8 + count, 0);
    }
    return parse_idx(images, labels);
  }
  if (a.format == "csv") return load_csv(a.input, a.label_column);
  const auto rows = read_text_samples(a.input);
  RawDataset d;
  d.count = rows.size();
  d.features = features;
  d.classes = 1;
  d.range = {INT32_MIN, INT32_MAX};
  d.labels.assign(d.count, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != features) {
      throw DimensionError("input line " + std::to_string(i + 1) + " has " +
                           std::to_string(rows[i].size()) + " values, model expects n=" +
                           std::to_string(features));
    }
    d.samples.insert(d.samples.end(), rows[i].begin(), rows[i].end());
  }
  return d;
}

std::vector<std::uint32_t> float_predictions(const FloatModel& model, const RawDataset& data,
                                             std::vector<std::vector<double>>* scores) {
  std::vector<std::uint32_t> out(data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    const auto x = preprocess_row(data.sample(i), model.info().preprocessing);
    const auto s = model.scores(x);
    out[i] = static_cast<std::uint32_t>(argmax(std::span<const double>(s)));
    if (scores) scores->push_back(s);
  }
  return out;
}

int cmd_classify(const ClassifyArgs& a) {
  const AnyModel any = load_model(a.model);
  const std::size_t n = std::visit([](const auto& m) { return m.inputs(); }, any);
  RawDataset data = read_input(a, n);
  if (data.count > 0 && data.features != n) {
    throw DimensionError("input has n=" + std::to_string(data.features) + " features, model expects n=" +
                         std::to_string(n));
  }

  std::vector<std::uint32_t> predicted(data.count);
  std::string out;
  char buf[32];
  if (const auto* qm = std::get_if<QuantizedModel>(&any)) {
    data.range = qm->declared_range();
    for (std::size_t i = 0; i < data.count; ++i) {
      const auto s = scores_int(*qm, data.int_sample(i));
      predicted[i] = static_cast<std::uint32_t>(argmax(std::span<const std::int64_t>(s)));
      out += std::to_string(predicted[i]);
      if (a.scores) {
        for (auto v : s) out += ' ' + std::to_string(v);
      }
      out += '\n';
    }
  } else {
    const auto& fm = std::get<FloatModel>(any);
    std::vector<std::vector<double>> scores;
    predicted = float_predictions(fm, data, a.scores ? &scores : nullptr);
    for (std::size_t i = 0; i < data.count; ++i) {
      out += std::to_string(predicted[i]);
      if (a.scores) {
        for (double v : scores[i]) {
          std::snprintf(buf, sizeof buf, " %.17g", v);
          out += buf;
        }
      }
      out += '\n';
    }
  }
  std::fwrite(out.data(), 1, out.size(), stdout);

  if (!a.reference.empty()) {
    const AnyModel ref_any = load_model(a.reference);
    const auto* ref = std::get_if<FloatModel>(&ref_any);
    if (!ref) throw InvalidArgument("--reference must be a float model");
    if (ref->inputs() != n) throw DimensionError("reference model n differs from model n");
    const auto ref_pred = float_predictions(*ref, data, nullptr);
    std::fprintf(stderr, "agreement=%.17g samples=%zu\n", accuracy(predicted, ref_pred), data.count);
  }
  if ((a.format == "idx" && !a.labels.empty()) || a.format == "csv") {
    std::fprintf(stderr, "accuracy=%.17g samples=%zu\n", accuracy(predicted, data.labels), data.count);
  }
  return 0;
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

std::string cell(const std::optional<double>& v, double scale = 100.0) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * scale);
  return buf;
}

void print_summary(const SweepReport& r) {
  std::printf("%-10s %-18s %6s %8s %8s %6s\n", "kind", "arm", "L", "val%", "test%", "bits");
  for (const auto& row : r.rows) {
    std::printf("%-10s %-18s %6zu %8s %8s %6s\n", row.kind.c_str(), row.arm.c_str(), row.hidden,
                cell(row.val_accuracy).c_str(), cell(row.test_accuracy).c_str(),
                row.bit_width ? std::to_string(*row.bit_width).c_str() : "-");
  }
  for (const auto& d : r.deltas) {
    std::printf("delta      %-18s %6zu %8s %8s\n", d.arm.c_str(), d.hidden, "-",
                cell(d.test_accuracy).c_str());
  }
}

int cmd_sweep(const SweepArgs& a) {
  const auto bytes = read_file(a.config);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), a.config);
  }
  for (const auto& o : a.overrides) apply_override(j, o);
  if (a.seed) j["seed"] = *a.seed;
  if (a.jobs) j["jobs"] = *a.jobs;
  if (!a.out.empty()) j["output"] = a.out;
  const ExperimentConfig config = parse_config(j);
  if (config.output.empty()) throw ConfigError("no output path (set output or pass -o)", "output");
  check_output(config.output, a.force);
  const auto t0 = std::chrono::steady_clock::now();
  const SweepReport report = run_experiment(config);
  write_atomically(config.output, [&](const fs::path& p) {
    write_report(report, p);
    // Companion files are written directly; only the main CSV is staged.
    auto stem = fs::path(config.output).stem().string();
    for (const char* suffix : {".delta.csv", ".candidates.csv"}) {
      fs::path from = p, to = config.output;
      from.replace_filename(p.stem().string() + suffix);
      to.replace_filename(stem + suffix);
      if (fs::exists(from)) fs::rename(from, to);
    }
  });
  print_summary(report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("wrote %s rows=%zu seconds=%.1f\n", config.output.c_str(), report.rows.size(), secs);
  return 0;
}

// ---- select ------------------------------------------------------------------

struct SelectArgs {
  std::string candidates;
  double threshold = 0.95;
};

// Reads a candidates CSV (as written by sweep) and prints the selected seed
// for every (dataset, arm, L) group.
int cmd_select(const SelectArgs& a) {
  std::ifstream in(a.candidates);
  if (!in) throw IoError("cannot open file", a.candidates);
  std::string line;
  std::vector<std::string> header;
  struct Group {
    std::vector<Candidate> cands;
  };
  std::map<std::tuple<std::string, std::string, std::size_t>, Group> groups;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  std::map<std::string, std::size_t> col;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line);
    if (col.empty()) {
      for (std::size_t i = 0; i < f.size(); ++i) col[f[i]] = i;
      for (const char* need : {"dataset", "arm", "L", "seed", "val_accuracy", "beta_energy"}) {
        if (!col.count(need)) throw FormatError(std::string("candidates file lacks column ") + need);
      }
      continue;
    }
    const auto& va = f.at(col["val_accuracy"]);
    const auto& en = f.at(col["beta_energy"]);
    if (va.empty() || en.empty()) continue;  // error rows
    try {
      groups[{f.at(col["dataset"]), f.at(col["arm"]), std::stoull(f.at(col["L"]))}].cands.push_back(
          Candidate{std::stod(va), std::stod(en), std::stoull(f.at(col["seed"]))});
    } catch (const std::logic_error&) {
      throw FormatError("candidates line " + std::to_string(lineno) + " is malformed");
    }
  }
  std::printf("dataset,arm,L,seed,val_accuracy,beta_energy\n");
  for (const auto& [key, g] : groups) {
    const auto& c = g.cands[select_model(g.cands, a.threshold)];
    std::printf("%s,%s,%zu,%llu,%.17g,%.17g\n", std::get<0>(key).c_str(), std::get<1>(key).c_str(),
                std::get<2>(key), static_cast<unsigned long long>(c.seed), c.val_accuracy, c.energy);
  }
  return 0;
}

int report_error(int code, const char* kind, const std::string& detail, const std::string& message) {
  std::fprintf(stderr, "error code=%d kind=%s%s message=%s\n", code, kind, detail.c_str(),
               quoted(message).c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integer-inference ELM classifier toolkit"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "Log progress to stderr");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a float model and write it to a file");
  add_dataset_options(train_cmd, train_args.dataset);
  train_cmd->add_option("-L,--hidden", train_args.hidden, "Hidden nodes")->check(CLI::PositiveNumber);
  train_cmd->add_option("--gamma", train_args.gamma, "Ridge parameter")->check(CLI::PositiveNumber);
  train_cmd->add_option("--weights", train_args.weights, "continuous | ternary | binary | symmetric");
  train_cmd->add_option("--seed", train_args.seed, "Root seed");
  train_cmd->add_option("-o,--out", train_args.out, "Model file")->required();
  train_cmd->add_flag("--force", train_args.force, "Overwrite an existing output");

  QuantizeArgs q_args;
  auto* q_cmd = app.add_subcommand("quantize", "Convert a float model to integer output weights");
  q_cmd->add_option("-m,--model", q_args.model, "Float model file")->required();
  q_cmd->add_option("-o,--out", q_args.out, "Quantized model file")->required();
  auto* steps_opt = q_cmd->add_option("--steps", q_args.steps, "Precision-reduction steps after quantizing");
  q_cmd->add_option("--max-bits", q_args.max_bits, "Reduce until the bit width is at most this")
      ->excludes(steps_opt);
  q_cmd->add_option("--range", q_args.range, "Declared input range lo hi")->expected(2)->delimiter(',');
  q_cmd->add_flag("--force", q_args.force, "Overwrite an existing output");

  ClassifyArgs c_args;
  auto* c_cmd = app.add_subcommand("classify", "Print one predicted label per input sample");
  c_cmd->add_option("-m,--model", c_args.model, "Model file (float or quantized)")->required();
  c_cmd->add_option("-i,--input", c_args.input, "Input samples")->required();
  c_cmd->add_option("--format", c_args.format, "text | idx | csv")
      ->check(CLI::IsMember({"text", "idx", "csv"}));
  c_cmd->add_option("--labels", c_args.labels, "IDX labels (reports accuracy)");
  c_cmd->add_option("--label-column", c_args.label_column, "CSV label column");
  c_cmd->add_option("--reference", c_args.reference, "Float model to compare predictions against");
  c_cmd->add_flag("--scores", c_args.scores, "Append raw score columns");

  SweepArgs s_args;
  auto* s_cmd = app.add_subcommand("sweep", "Run an experiment from a JSON config");
  s_cmd->add_option("-c,--config", s_args.config, "Config file")->required();
  s_cmd->add_option("--set", s_args.overrides, "Override a config key: key=value (dots for nesting)");
  s_cmd->add_option("-o,--out", s_args.out, "CSV output (overrides config output)");
  s_cmd->add_option("--jobs", s_args.jobs, "Worker threads (default: available cores)");
  s_cmd->add_option("--seed", s_args.seed, "Root seed (overrides config seed)");
  s_cmd->add_flag("--force", s_args.force, "Overwrite an existing output");

  SelectArgs sel_args;
  auto* sel_cmd = app.add_subcommand("select", "Apply model selection to a candidates CSV");
  sel_cmd->add_option("candidates", sel_args.candidates, "Candidates CSV from sweep")->required();
  sel_cmd->add_option("--threshold", sel_args.threshold, "Keep val accuracy >= threshold * best");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(kExitOther, "usage", "", e.what());
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (q_cmd->parsed()) return cmd_quantize(q_args);
    if (c_cmd->parsed()) return cmd_classify(c_args);
    if (s_cmd->parsed()) return cmd_sweep(s_args);
    if (sel_cmd->parsed()) return cmd_select(sel_args);
  } catch (const OutputExists& e) {
    return report_error(kExitIo, "exists", " path=" + quoted(e.path()), e.what());
  } catch (const IoError& e) {
    return report_error(kExitIo, "io", " path=" + quoted(e.path()), e.what());
  } catch (const DimensionError& e) {
    return report_error(kExitDimension, "dimension", "", e.what());
  } catch (const ConfigError& e) {
    return report_error(kExitConfig, "config", " key=" + quoted(e.key()), e.what());
  } catch (const FormatError& e) {
    return report_error(kExitOther, "format", "", e.what());
  } catch (const Error& e) {
    return report_error(kExitOther, "error", "", e.what());
  } catch (const std::exception& e) {
    return report_error(kExitOther, "internal", "", e.what());
  }
  return kExitOther;
}
