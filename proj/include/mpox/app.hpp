#pragma once

#include "mpox/checkpoint.hpp"
#include "mpox/data.hpp"
#include "mpox/metrics.hpp"
#include "mpox/model.hpp"
#include "mpox/optim.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <map>

namespace mpox {

/// Everything a training invocation needs. Defaults: 20 epochs, batch 32,
/// 90/10 split, Adam(1e-3, 0.9, 0.999), six-pool ladder at 224x224.
struct RunConfig {
  std::string data_root;
  std::uint64_t seed = 42;
  int epochs = 20;
  std::size_t batch_size = 32;
  double split_ratio = 0.9;
  AdamHyper optimizer;
  ModelConfig model;
  AugmentPolicy augment;
  std::string output_dir = "runs";
  std::size_t limit = 0;  // 0 = whole corpus
  int runs = 1;

  Index image_size() const { return model.input_h; }
  void set_image_size(Index s) {
    model.input_h = s;
    model.input_w = s;
  }
  void validate() const;
};

/// Flat JSON schema; see README for the key list.
nlohmann::json run_config_to_json(const RunConfig& c);
/// Applies keys present in `j` on top of `base`. A "preset" key is applied
/// before explicit model keys.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Failure with a short machine-readable code, reported by the CLI as
/// `mpox: error[<code>]: <message>`.
class AppError : public std::runtime_error {
 public:
  AppError(std::string code, const std::string& what, int exit_code = 1)
      : std::runtime_error(what), code_(std::move(code)), exit_code_(exit_code) {}
  const std::string& code() const { return code_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string code_;
  int exit_code_;
};

// Checkpoints ---------------------------------------------------------------

struct CheckpointState {
  std::uint64_t run_seed = 0;
  std::vector<std::string> class_names;
  std::int64_t step = 0;
  int epoch = 0;
  Rng::State dropout_rng{};
};

/// Serializes parameters and running statistics (and Adam moments when
/// `adam` is given) with the run config embedded.
CheckpointData make_checkpoint(const RunConfig& config, const CheckpointState& state,
                               Model<float>& model, const AdamState<float>* adam = nullptr);

struct LoadedModel {
  RunConfig config;
  CheckpointState state;
  Model<float> model;
  AdamState<float> adam;  // empty moments when the file carries none
};

LoadedModel restore_checkpoint(const CheckpointData& data);
LoadedModel load_model(const std::filesystem::path& path);

/// Predicted file size for a weights-only checkpoint of `config`.
std::size_t estimate_checkpoint_bytes(const RunConfig& config);

// Evaluation ----------------------------------------------------------------

struct EvalOutput {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<double> score0;  // positive-class (label 0) sigmoid unit
  std::vector<double> score1;
  std::vector<std::size_t> record_ids;
  std::size_t failures = 0;
};

EvalOutput evaluate_model(Model<float>& model, DataLoader& loader);

struct EvalReport {
  ConfusionMatrix cm;
  ClassificationReport report;
  std::optional<RocCurve> roc;  // absent when a class is missing
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalReport build_report(const EvalOutput& out);
EvalReport build_report(const std::vector<ScoreRow>& rows);

/// confusion.{txt,csv}, report.{txt,csv}, roc.csv, summary.txt
void write_eval_report(const std::filesystem::path& dir, const EvalReport& r,
                       const std::vector<std::string>& class_names);
std::string summary_line(const EvalReport& r);

// Commands ------------------------------------------------------------------

struct TrainRun {
  RunHistory history;
  EvalReport final_report;
  std::filesystem::path dir;
};

struct TrainOutcome {
  std::vector<TrainRun> runs;
  RunSummary summary;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `config.runs` independent trainings with seeds master + r, writing
/// per-run history, curves, best/final checkpoints and reports under
/// `<out>/run_<r>/`, plus `<out>/config.json` and `<out>/aggregate.csv`.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::string data_root;       // empty: use the root recorded in the checkpoint
  bool whole_dataset = false;  // false: the checkpoint's recorded test split
  std::filesystem::path out_dir;
};

EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);
EvalReport cmd_evaluate_scores(const std::filesystem::path& scores,
                               const std::filesystem::path& out_dir, std::ostream& log);

struct Prediction {
  std::string file;
  int label = -1;
  double score0 = 0.0;
  double score1 = 0.0;
  std::string error;
};

std::vector<Prediction> cmd_predict(const std::filesystem::path& checkpoint,
                                    const std::vector<std::filesystem::path>& images,
                                    std::ostream& out);

/// Layer table, parameter totals, estimated checkpoint size and an optional
/// comparison against named baseline parameter counts.
std::string cmd_summary(const RunConfig& config,
                        const std::map<std::string, std::int64_t>& baselines = {});

}  // namespace mpox
