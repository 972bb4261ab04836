#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielm/data.hpp"
#include "ielm/elm.hpp"
#include "ielm/int_infer.hpp"

namespace ielm {

// ---- Dataset description shared by the config file and the CLI -----------

struct DatasetSpec {
  std::string kind = "mnist";  // mnist | cifar10 | textures | csv
  std::string name;            // label used in reports; defaults to kind

  // mnist: explicit IDX paths, or dir holding the four standard file names.
  std::string dir;
  std::string train_images, train_labels, test_images, test_labels;

  // cifar10
  std::vector<std::string> train_batches;
  std::vector<std::string> test_batches;
  std::optional<ClassPair> classes;

  // textures: one GRAY file per class; empty means the synthetic pair.
  std::vector<std::string> texture_images;
  std::size_t patch_size = 12;
  std::size_t patches_per_class = 500;
  std::size_t texture_size = 256;

  // csv
  std::string train_csv, test_csv;
  std::string label_column = "label";

  // Random subsets (0 = everything).
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;

  // Unset means the kind's default: zero_mean + l2 for mnist and textures,
  // l2 otherwise.
  std::vector<PreprocessStep> preprocess;
  bool preprocess_set = false;
};

struct LoadedData {
  std::string name;
  RawDataset train;
  RawDataset test;
  std::vector<PreprocessStep> steps;
};

// Default data root: $IELM_DATA_DIR, or "data" when unset.
std::filesystem::path default_data_dir();

LoadedData load_dataset(const DatasetSpec& spec, std::uint64_t seed);

// ---- Configuration ---------------------------------------------------------

enum class ExperimentKind { size_sweep, weight_comparison, bit_sweep };

std::string to_string(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::size_sweep;
  DatasetSpec dataset;
  std::vector<std::size_t> hidden_sizes{10, 15, 25, 40, 60, 100, 160, 250,
                                        400, 600, 1000, 1600, 2500, 4000, 6000};
  // Unset means the kind's default: 8 (size sweep), 50 (weight comparison),
  // 10 (bit sweep).
  std::optional<std::size_t> models_per_L;
  double gamma = 1.0;
  WeightDistribution original_weights = WeightDistribution::uniform01;
  WeightDistribution proposed_weights = WeightDistribution::ternary;
  std::uint64_t seed = 1;
  double selection_threshold = 0.95;
  double train_fraction = 0.8;
  std::size_t jobs = 0;  // 0 = hardware concurrency
  std::string output;    // CSV path
  std::string model;     // bit sweep over an existing model file

  std::size_t models() const;
  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Documented keys: kind, dataset{...}, L_list, models_per_L, gamma,
// original_weights, proposed_weights, seed, selection_threshold,
// train_fraction, jobs, output, model. Unknown keys throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "a.b=value" to a JSON config; value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// ---- Reports -----------------------------------------------------------------

struct SweepRow {
  std::string kind;  // selected | candidate | delta | aggregate | model | rung | error
  std::string dataset;
  std::string arm;
  std::size_t hidden = 0;
  std::uint64_t seed = 0;
  std::optional<double> val_accuracy;
  std::optional<double> test_accuracy;
  std::optional<double> test_accuracy_sd;
  std::optional<double> beta_energy;
  std::optional<std::uint32_t> bit_width;
  std::optional<std::uint32_t> ladder_step;
  std::optional<double> agreement_with_float;
  std::string error;
};

struct SweepReport {
  std::vector<std::string> notes;     // written as '#' lines above the header
  std::vector<SweepRow> rows;         // the primary table
  std::vector<SweepRow> deltas;       // original − proposed per L (size sweep)
  std::vector<SweepRow> candidates;   // every trained model
};

inline constexpr const char* kCsvHeader =
    "kind,dataset,arm,L,seed,val_accuracy,test_accuracy,test_accuracy_sd,beta_energy,"
    "bit_width,ladder_step,agreement_with_float,error";

std::string to_csv(std::span<const SweepRow> rows, std::span<const std::string> notes = {});
// Writes rows to path; deltas and candidates (when present) go next to it as
// <stem>.delta.csv and <stem>.candidates.csv.
void write_report(const SweepReport& report, const std::filesystem::path& path);

// ---- Protocol --------------------------------------------------------------------

struct Candidate {
  double val_accuracy = 0.0;
  double energy = 0.0;  // Frobenius norm of β
  std::uint64_t seed = 0;
};

// Index of the chosen candidate: keep val_accuracy >= threshold·best, then
// the smallest energy, then the smallest seed. Throws on empty input.
std::size_t select_model(std::span<const Candidate> candidates, double threshold = 0.95);

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth);

// Integer-path predictions for every sample of a raw dataset.
std::vector<std::uint32_t> predict_raw(const QuantizedModel& model, const RawDataset& data);

// Runs fn(i) for i in [0, count) on up to `jobs` threads (0 = hardware
// concurrency). Exceptions from fn propagate after all workers finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

SweepReport run_weight_comparison(const ExperimentConfig& config, const LoadedData& data);

// Rung rows in ladder order (descending bit width). Ternary-weight models
// are evaluated on raw integers via the integer path; continuous ones via
// the float path with β replaced by the rung's integer values.
SweepReport run_bit_sweep(const FloatModel& model, const RawDataset& test,
                          const std::string& dataset_name = "");

SweepReport run_size_sweep(const ExperimentConfig& config, const LoadedData& data);

// Dispatches on config.kind, loading data as needed.
SweepReport run_experiment(const ExperimentConfig& config);

}  // namespace ielm
