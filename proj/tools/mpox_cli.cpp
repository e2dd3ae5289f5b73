// Batch front end: train, evaluate, predict, summary, augment-preview,
// dataset-stats, make-synthetic.

#include "mpox/app.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mpox;

namespace {

std::vector<Index> parse_list(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoll(item));
  return out;
}

struct CommonFlags {
  std::string config_path;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<int> runs;
  std::optional<double> lr, beta1, beta2, split, dropout;
  std::optional<std::string> preset;
  std::optional<std::size_t> limit;
  std::optional<Index> image_size;
  std::optional<std::string> filters, dense;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
    cmd->add_option("--data", data, "dataset root with one folder per class");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--runs", runs, "independent runs, seeds master+r");
    cmd->add_option("--lr", lr);
    cmd->add_option("--beta1", beta1);
    cmd->add_option("--beta2", beta2);
    cmd->add_option("--split", split, "train fraction");
    cmd->add_option("--preset", preset, "six-pool | paper-figure");
    cmd->add_option("--dropout", dropout);
    cmd->add_option("--limit", limit, "use a seeded subset of N records");
    cmd->add_option("--image-size", image_size, "square input size");
    cmd->add_option("--filters", filters, "comma-separated conv ladder, e.g. 8,16,32");
    cmd->add_option("--dense", dense, "comma-separated dense widths");
    cmd->add_option("--out", out, "output directory");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(read_text_file(config_path));
      } catch (const std::exception& e) {
        throw AppError("config", std::string("cannot load config: ") + e.what());
      }
      c = run_config_from_json(j, c);
    }
    if (preset) {
      const Index size = c.image_size();
      try {
        c.model = model_preset(*preset);
      } catch (const std::invalid_argument& e) {
        throw AppError("config", e.what());
      }
      c.set_image_size(size);
    }
    if (!data.empty()) c.data_root = data;
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (runs) c.runs = *runs;
    if (lr) c.optimizer.lr = *lr;
    if (beta1) c.optimizer.beta1 = *beta1;
    if (beta2) c.optimizer.beta2 = *beta2;
    if (split) c.split_ratio = *split;
    if (dropout) c.model.dropout_rate = *dropout;
    if (limit) c.limit = *limit;
    if (image_size) c.set_image_size(*image_size);
    if (filters) {
      c.model.conv_filters = parse_list(*filters);
      c.model.pool_after_block.assign(c.model.conv_filters.size(), true);
    }
    if (dense) c.model.dense_widths = parse_list(*dense);
    if (!out.empty()) c.output_dir = out;
    c.validate();
    return c;
  }
};

int fail(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "mpox: error[" << code << "]: " << message << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MpoxSLDNet training and evaluation engine"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train one or more seeded runs");
  train_flags.attach(train);

  std::string eval_checkpoint, eval_data, eval_out, eval_scores;
  bool eval_all = false;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on its recorded test split");
  evaluate->add_option("--checkpoint", eval_checkpoint, "MPXT checkpoint");
  evaluate->add_option("--data", eval_data, "dataset root (default: recorded in checkpoint)");
  evaluate->add_flag("--all", eval_all, "evaluate every record instead of the test split");
  evaluate->add_option("--scores", eval_scores, "bypass the model: CSV of label,score0,score1");
  evaluate->add_option("--out", eval_out, "directory for report files");

  std::string predict_checkpoint;
  std::vector<std::string> predict_images;
  auto* predict = app.add_subcommand("predict", "classify images");
  predict->add_option("--checkpoint", predict_checkpoint, "MPXT checkpoint")->required();
  predict->add_option("images", predict_images, "image files")->required();

  CommonFlags summary_flags;
  std::vector<std::string> baselines;
  auto* summary = app.add_subcommand("summary", "layer table, parameter count and storage estimate");
  summary_flags.attach(summary);
  summary->add_option("--baseline", baselines, "name=param_count to compare against");

  CommonFlags preview_flags;
  std::size_t preview_n = 9;
  bool preview_identity = false;
  auto* preview = app.add_subcommand("augment-preview", "write a grid of augmented samples as PNG");
  preview_flags.attach(preview);
  preview->add_option("--n", preview_n, "number of tiles");
  preview->add_flag("--identity", preview_identity, "disable every augmentation");

  std::string stats_data, stats_out;
  auto* stats = app.add_subcommand("dataset-stats", "per-class image counts as CSV");
  stats->add_option("--data", stats_data, "dataset root")->required();
  stats->add_option("--out", stats_out, "CSV file (default: stdout)");

  std::string synth_out;
  SyntheticOptions synth;
  auto* synthetic = app.add_subcommand("make-synthetic", "write the synthetic two-class corpus");
  synthetic->add_option("--out", synth_out, "corpus root")->required();
  synthetic->add_option("--per-class", synth.per_class);
  synthetic->add_option("--size", synth.size);
  synthetic->add_option("--seed", synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (*train) {
      RunConfig config = train_flags.resolve();
      cmd_train(config, std::cout);
    } else if (*evaluate) {
      if (!eval_scores.empty()) {
        cmd_evaluate_scores(eval_scores, eval_out, std::cout);
      } else {
        if (eval_checkpoint.empty()) throw AppError("usage", "evaluate needs --checkpoint or --scores", 2);
        cmd_evaluate({eval_checkpoint, eval_data, eval_all, eval_out}, std::cout);
      }
    } else if (*predict) {
      std::vector<fs::path> paths(predict_images.begin(), predict_images.end());
      const auto preds = cmd_predict(predict_checkpoint, paths, std::cout);
      for (const auto& p : preds)
        if (!p.error.empty()) return 3;
    } else if (*summary) {
      RunConfig config = summary_flags.resolve();
      std::map<std::string, std::int64_t> base;
      for (const auto& b : baselines) {
        const auto eq = b.find('=');
        if (eq == std::string::npos) throw AppError("usage", "--baseline expects name=count", 2);
        base[b.substr(0, eq)] = std::stoll(b.substr(eq + 1));
      }
      std::cout << cmd_summary(config, base);
    } else if (*preview) {
      RunConfig config = preview_flags.resolve();
      const DatasetIndex index = scan_dataset(config.data_root);
      const auto plan = split(index.size(), config.split_ratio, config.seed, config.limit);
      const AugmentPolicy policy = preview_identity ? AugmentPolicy::identity() : config.augment;
      const fs::path out = preview_flags.out.empty() ? fs::path("augment_preview.png") : fs::path(preview_flags.out);
      preview_grid(index, plan.train, preview_n, policy, config.seed, config.image_size(), out);
      std::cout << "wrote " << out.string() << "\n";
    } else if (*stats) {
      const std::string csv = dataset_stats_csv(scan_dataset(stats_data));
      if (stats_out.empty()) std::cout << csv;
      else write_text_file(stats_out, csv);
    } else if (*synthetic) {
      generate_synthetic(synth_out, synth);
      std::cout << "wrote " << 2 * synth.per_class << " images under " << synth_out << "\n";
    }
  } catch (const AppError& e) {
    return fail(e.code(), e.what(), e.exit_code());
  } catch (const CheckpointError& e) {
    return fail(checkpoint_errc_name(e.code()), e.what(), 10 + int(e.code()));
  } catch (const TrainingError& e) {
    return fail("train.nonfinite", e.what(), 4);
  } catch (const DatasetError& e) {
    return fail("data", e.what(), 1);
  } catch (const ImageError& e) {
    return fail("image", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
