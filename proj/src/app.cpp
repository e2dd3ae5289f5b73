#include "mpox/app.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace mpox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitTag = 0x494E4954ULL;     // "INIT"
constexpr std::uint64_t kDropoutTag = 0x44524F50ULL;  // "DROP"

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

// RunConfig -----------------------------------------------------------------

void RunConfig::validate() const {
  if (epochs < 1) throw AppError("config", "epochs must be >= 1");
  if (batch_size < 1) throw AppError("config", "batch_size must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw AppError("config", "split must be in (0, 1)");
  if (runs < 1) throw AppError("config", "runs must be >= 1");
  if (!(optimizer.lr > 0.0)) throw AppError("config", "lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw AppError("config", "Adam betas must be in [0, 1)");
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw AppError("config", e.what());
  }
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["data"] = c.data_root;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["split"] = c.split_ratio;
  j["lr"] = c.optimizer.lr;
  j["beta1"] = c.optimizer.beta1;
  j["beta2"] = c.optimizer.beta2;
  j["adam_epsilon"] = c.optimizer.epsilon;
  j["preset"] = preset_name(c.model);
  j["conv_filters"] = c.model.conv_filters;
  j["kernel"] = c.model.kernel;
  j["pool_after_block"] = c.model.pool_after_block;
  j["dense_widths"] = c.model.dense_widths;
  j["dropout"] = c.model.dropout_rate;
  j["output_units"] = c.model.output_units;
  j["image_size"] = c.model.input_h;
  j["input_channels"] = c.model.input_channels;
  j["bn_momentum"] = c.model.bn_momentum;
  j["bn_epsilon"] = c.model.bn_epsilon;
  j["zoom_range"] = {c.augment.zoom_lo, c.augment.zoom_hi};
  j["brightness_range"] = {c.augment.brightness_lo, c.augment.brightness_hi};
  j["horizontal_flip"] = c.augment.flip_probability;
  j["fill_value"] = c.augment.fill_value;
  j["out"] = c.output_dir;
  j["limit"] = c.limit;
  j["runs"] = c.runs;
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  try {
    if (!j.is_object()) throw AppError("config", "config must be a JSON object");
    if (j.contains("preset") && j["preset"] != "custom") {
      const Index size = c.image_size();
      c.model = model_preset(j["preset"].get<std::string>());
      c.set_image_size(size);
    }
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    take("data", c.data_root);
    take("seed", c.seed);
    take("epochs", c.epochs);
    take("batch_size", c.batch_size);
    take("split", c.split_ratio);
    take("lr", c.optimizer.lr);
    take("beta1", c.optimizer.beta1);
    take("beta2", c.optimizer.beta2);
    take("adam_epsilon", c.optimizer.epsilon);
    if (j.contains("conv_filters")) {
      c.model.conv_filters = j["conv_filters"].get<std::vector<Index>>();
      if (!j.contains("pool_after_block")) c.model.pool_after_block.assign(c.model.conv_filters.size(), true);
    }
    take("kernel", c.model.kernel);
    take("pool_after_block", c.model.pool_after_block);
    take("dense_widths", c.model.dense_widths);
    take("dropout", c.model.dropout_rate);
    take("output_units", c.model.output_units);
    if (j.contains("image_size")) c.set_image_size(j["image_size"].get<Index>());
    take("input_channels", c.model.input_channels);
    take("bn_momentum", c.model.bn_momentum);
    take("bn_epsilon", c.model.bn_epsilon);
    if (j.contains("zoom_range")) {
      c.augment.zoom_lo = j["zoom_range"].at(0).get<double>();
      c.augment.zoom_hi = j["zoom_range"].at(1).get<double>();
    }
    if (j.contains("brightness_range")) {
      c.augment.brightness_lo = j["brightness_range"].at(0).get<double>();
      c.augment.brightness_hi = j["brightness_range"].at(1).get<double>();
    }
    take("horizontal_flip", c.augment.flip_probability);
    take("fill_value", c.augment.fill_value);
    take("out", c.output_dir);
    take("limit", c.limit);
    take("runs", c.runs);
  } catch (const json::exception& e) {
    throw AppError("config", std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw AppError("config", e.what());
  }
  return c;
}

// Checkpoints ---------------------------------------------------------------

namespace {

json state_to_json(const CheckpointState& s) {
  json rng = json::array();
  for (auto w : s.dropout_rng) rng.push_back(std::to_string(w));
  return {{"run_seed", s.run_seed},
          {"classes", s.class_names},
          {"step", s.step},
          {"epoch", s.epoch},
          {"dropout_rng", rng}};
}

CheckpointState state_from_json(const json& j) {
  CheckpointState s;
  s.run_seed = j.value("run_seed", std::uint64_t{0});
  s.class_names = j.value("classes", std::vector<std::string>{});
  s.step = j.value("step", std::int64_t{0});
  s.epoch = j.value("epoch", 0);
  if (j.contains("dropout_rng"))
    for (std::size_t i = 0; i < 4 && i < j["dropout_rng"].size(); ++i)
      s.dropout_rng[i] = std::stoull(j["dropout_rng"][i].get<std::string>());
  return s;
}

// The output directory is left out so a checkpoint does not depend on where
// it was written.
std::string config_blob(const RunConfig& config, const CheckpointState& state) {
  json c = run_config_to_json(config);
  c.erase("out");
  return json{{"config", c}, {"state", state_to_json(state)}}.dump();
}

}  // namespace

CheckpointData make_checkpoint(const RunConfig& config, const CheckpointState& state,
                               Model<float>& model, const AdamState<float>* adam) {
  CheckpointData data;
  data.config_text = config_blob(config, state);
  for (auto& [name, tensor] : model.named_tensors()) data.tensors.push_back({name, *tensor});
  if (adam && !adam->m.empty()) {
    const auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      data.tensors.push_back({"adam_m/" + params[i]->name, adam->m[i]});
      data.tensors.push_back({"adam_v/" + params[i]->name, adam->v[i]});
    }
  }
  return data;
}

LoadedModel restore_checkpoint(const CheckpointData& data) {
  json blob;
  try {
    blob = json::parse(data.config_text);
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrc::kBadConfig, std::string("embedded config is not JSON: ") + e.what());
  }
  if (!blob.contains("config"))
    throw CheckpointError(CheckpointErrc::kBadConfig, "embedded config lacks a 'config' object");
  RunConfig config;
  try {
    config = run_config_from_json(blob["config"]);
    config.model.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrc::kBadConfig, std::string("embedded config invalid: ") + e.what());
  }
  LoadedModel loaded{config, state_from_json(blob.value("state", json::object())),
                     build_mpoxsldnet<float>(config.model), {}};
  for (auto& [name, tensor] : loaded.model.named_tensors()) {
    const TensorF* stored = data.find(name);
    if (!stored) throw CheckpointError(CheckpointErrc::kTensorMismatch, "checkpoint lacks tensor " + name);
    if (stored->shape() != tensor->shape())
      throw CheckpointError(CheckpointErrc::kTensorMismatch,
                            "tensor " + name + " has shape " + shape_to_string(stored->shape()) +
                                ", model expects " + shape_to_string(tensor->shape()));
    *tensor = *stored;
  }
  loaded.adam.hyper = config.optimizer;
  loaded.adam.step = loaded.state.step;
  const auto params = loaded.model.parameters();
  if (!params.empty() && data.find("adam_m/" + params.front()->name)) {
    for (auto* p : params) {
      const TensorF* m = data.find("adam_m/" + p->name);
      const TensorF* v = data.find("adam_v/" + p->name);
      if (!m || !v || m->shape() != p->value.shape() || v->shape() != p->value.shape())
        throw CheckpointError(CheckpointErrc::kTensorMismatch, "incomplete Adam moments for " + p->name);
      loaded.adam.m.push_back(*m);
      loaded.adam.v.push_back(*v);
    }
  }
  return loaded;
}

LoadedModel load_model(const fs::path& path) { return restore_checkpoint(load_checkpoint(path)); }

std::size_t estimate_checkpoint_bytes(const RunConfig& config) {
  Model<float> model = build_mpoxsldnet<float>(config.model);
  CheckpointState state;
  state.class_names = {"Monkeypox", "Non_Monkeypox"};
  CheckpointData data;
  data.config_text = config_blob(config, state);
  std::size_t payload = 0;
  for (auto& [name, tensor] : model.named_tensors()) {
    data.tensors.push_back({name, TensorF({1})});
    payload += std::size_t(tensor->size()) * 4;
  }
  // Each placeholder above is rank 1; add the real rank bytes.
  std::size_t meta = checkpoint_metadata_bytes(data);
  for (auto& [name, tensor] : model.named_tensors()) meta += 4 * (tensor->rank() - 1);
  return meta + payload;
}

// Evaluation ----------------------------------------------------------------

EvalOutput evaluate_model(Model<float>& model, DataLoader& loader) {
  EvalOutput out;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& ids : loader.epoch_plan(0)) {
    Batch batch = loader.load(ids, 0);
    out.failures += batch.failures;
    if (batch.size() == 0) continue;
    const TensorF pred = model.forward(batch.images, Mode::kEval);
    const auto loss = bce_loss(pred, batch.labels);
    loss_sum += double(loss.loss) * double(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double s0 = pred.at(Index(i), 0), s1 = pred.at(Index(i), 1);
      const int p = predicted_class(s0, s1);
      out.labels.push_back(batch.label_ids[i]);
      out.predictions.push_back(p);
      out.score0.push_back(s0);
      out.score1.push_back(s1);
      out.record_ids.push_back(batch.record_ids[i]);
      correct += p == batch.label_ids[i];
    }
  }
  if (!out.labels.empty()) {
    out.loss = loss_sum / double(out.labels.size());
    out.accuracy = double(correct) / double(out.labels.size());
  }
  return out;
}

EvalReport build_report(const EvalOutput& out) {
  EvalReport r;
  r.cm = confusion(out.labels, out.predictions, 0);
  r.report = report(r.cm);
  r.loss = out.loss;
  r.accuracy = out.accuracy;
  if (r.cm.tp + r.cm.fn > 0 && r.cm.fp + r.cm.tn > 0) r.roc = roc_auc(out.score0, out.labels, 0);
  return r;
}

EvalReport build_report(const std::vector<ScoreRow>& rows) {
  EvalOutput out;
  double loss_sum = 0.0;
  for (const auto& row : rows) {
    out.labels.push_back(row.label);
    out.predictions.push_back(predicted_class(row.score0, row.score1));
    out.score0.push_back(row.score0);
    out.score1.push_back(row.score1);
    TensorF pred({1, 2}, {float(row.score0), float(row.score1)});
    TensorF target({1, 2});
    target.at(0, row.label) = 1.0f;
    loss_sum += bce_loss(pred, target).loss;
  }
  if (!rows.empty()) out.loss = loss_sum / double(rows.size());
  EvalReport r = build_report(out);
  r.accuracy = r.report.accuracy;
  return r;
}

std::string summary_line(const EvalReport& r) {
  std::ostringstream os;
  os << "accuracy=" << fmt(r.report.accuracy) << " loss=" << fmt(r.loss)
     << " auc=" << (r.roc ? fmt(r.roc->auc) : std::string("undefined")) << " n=" << r.cm.total();
  return os.str();
}

void write_eval_report(const fs::path& dir, const EvalReport& r,
                       const std::vector<std::string>& names) {
  fs::create_directories(dir);
  write_text_file(dir / "confusion.txt", render_confusion(r.cm, names));
  write_text_file(dir / "confusion.csv", confusion_csv(r.cm, names));
  write_text_file(dir / "report.txt", render_report(r.report, names));
  write_text_file(dir / "report.csv", report_csv(r.report, names));
  if (r.roc) write_text_file(dir / "roc.csv", roc_csv(*r.roc));
  write_text_file(dir / "summary.txt", summary_line(r) + "\n");
}

// Training ------------------------------------------------------------------

namespace {

DatasetIndex scan_or_throw(const std::string& root) {
  if (root.empty()) throw AppError("data", "no dataset root given (--data)");
  try {
    return scan_dataset(root);
  } catch (const DatasetError& e) {
    throw AppError("data", e.what());
  } catch (const fs::filesystem_error& e) {
    throw AppError("data", e.what());
  }
}

LoaderOptions loader_options(const RunConfig& c, std::uint64_t seed) {
  LoaderOptions o;
  o.batch_size = c.batch_size;
  o.image_size = c.image_size();
  o.seed = seed;
  o.policy = c.augment;
  o.workers = worker_count_from_env();
  return o;
}

void save_or_throw(const fs::path& path, const CheckpointData& data) {
  try {
    save_checkpoint(path, data);
  } catch (const CheckpointError& e) {
    throw AppError(checkpoint_errc_name(e.code()), e.what());
  }
}

TrainRun train_one(const RunConfig& config, const DatasetIndex& index, int run_id,
                   const fs::path& run_dir, std::ostream& log) {
  const std::uint64_t run_seed = config.seed + std::uint64_t(run_id);
  fs::create_directories(run_dir);

  SplitPlan plan;
  try {
    plan = split(index.size(), config.split_ratio, run_seed, config.limit);
  } catch (const DatasetError& e) {
    throw AppError("data", e.what());
  }
  json split_json;
  for (auto i : plan.train) split_json["train"].push_back(fs::relative(index.records[i].path, index.root).string());
  for (auto i : plan.test) split_json["test"].push_back(fs::relative(index.records[i].path, index.root).string());
  write_text_file(run_dir / "split.json", split_json.dump(1) + "\n");

  Rng init(derive_seed({run_seed, kInitTag}));
  Model<float> model = build_mpoxsldnet<float>(config.model, &init);
  Rng dropout_rng(derive_seed({run_seed, kDropoutTag}));
  AdamState<float> adam;
  adam.hyper = config.optimizer;

  DataLoader train_loader(index, plan.train, LoaderMode::kTrain, loader_options(config, run_seed));
  DataLoader test_loader(index, plan.test, LoaderMode::kEval, loader_options(config, run_seed));

  log << "run " << run_id << " seed=" << run_seed << " train=" << plan.train.size()
      << " test=" << plan.test.size() << " batches/epoch=" << train_loader.batches_per_epoch() << "\n";

  TrainRun result;
  result.dir = run_dir;
  result.history.run_id = run_id;
  result.history.seed = run_seed;
  CheckpointState state;
  state.run_seed = run_seed;
  state.class_names = index.class_names;
  double best_val = -1.0;
  EvalOutput last_eval;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0, failures = 0, skipped = 0;
    std::size_t step_in_epoch = 0;
    for (const auto& ids : train_loader.epoch_plan(std::uint64_t(epoch))) {
      ++step_in_epoch;
      Batch batch = train_loader.load(ids, std::uint64_t(epoch));
      failures += batch.failures;
      if (batch.size() < 2) {
        skipped += batch.size();
        continue;
      }
      const TensorF pred = model.forward(batch.images, Mode::kTrain, &dropout_rng);
      const auto loss = bce_loss(pred, batch.labels);
      if (!std::isfinite(loss.loss))
        throw TrainingError("non-finite loss at run " + std::to_string(run_id) + " epoch " +
                            std::to_string(epoch) + " step " + std::to_string(step_in_epoch) +
                            " (global step " + std::to_string(adam.step + 1) + ")");
      model.zero_grad();
      model.backward(loss.grad);
      try {
        adam_step(model.parameters(), adam);
      } catch (const NonFiniteGradient& e) {
        throw TrainingError(std::string(e.what()) + " at run " + std::to_string(run_id) +
                            " epoch " + std::to_string(epoch) + " step " +
                            std::to_string(step_in_epoch));
      }
      loss_sum += double(loss.loss) * double(batch.size());
      seen += batch.size();
      for (std::size_t i = 0; i < batch.size(); ++i)
        correct += predicted_class(pred.at(Index(i), 0), pred.at(Index(i), 1)) == batch.label_ids[i];
    }

    last_eval = evaluate_model(model, test_loader);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / double(seen) : 0.0;
    rec.train_acc = seen ? double(correct) / double(seen) : 0.0;
    rec.val_loss = last_eval.loss;
    rec.val_acc = last_eval.accuracy;
    result.history.epochs.push_back(rec);
    log << "  epoch " << std::setw(3) << epoch << "  loss " << fmt(rec.train_loss) << "  acc "
        << fmt(rec.train_acc) << "  val_loss " << fmt(rec.val_loss) << "  val_acc "
        << fmt(rec.val_acc);
    if (failures + last_eval.failures) log << "  decode_failures " << failures + last_eval.failures;
    if (skipped) log << "  skipped_singleton " << skipped;
    log << "\n";

    state.step = adam.step;
    state.epoch = epoch;
    state.dropout_rng = dropout_rng.state();
    if (rec.val_acc > best_val) {
      best_val = rec.val_acc;
      save_or_throw(run_dir / "best.mpxt", make_checkpoint(config, state, model));
    }
  }

  save_or_throw(run_dir / "final.mpxt", make_checkpoint(config, state, model, &adam));
  export_curves(result.history, run_dir);
  result.final_report = build_report(last_eval);
  write_eval_report(run_dir, result.final_report, index.class_names);
  log << "  final: " << summary_line(result.final_report) << "\n";
  return result;
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const DatasetIndex index = scan_or_throw(config.data_root);
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  write_text_file(out / "config.json", run_config_to_json(config).dump(2) + "\n");
  write_text_file(out / "dataset_stats.csv", dataset_stats_csv(index));

  TrainOutcome outcome;
  std::vector<RunHistory> histories;
  for (int r = 0; r < config.runs; ++r) {
    outcome.runs.push_back(train_one(config, index, r, out / ("run_" + std::to_string(r)), log));
    histories.push_back(outcome.runs.back().history);
  }
  outcome.summary = aggregate_runs(histories);
  write_text_file(out / "aggregate.csv", render_run_summary(histories, outcome.summary));
  log << "aggregate over " << outcome.summary.runs << " run(s): mean train_acc "
      << fmt(outcome.summary.mean_train_acc) << ", mean val_acc " << fmt(outcome.summary.mean_val_acc)
      << "\n";
  return outcome;
}

EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  LoadedModel loaded = [&] {
    try {
      return load_model(options.checkpoint);
    } catch (const CheckpointError& e) {
      throw AppError(checkpoint_errc_name(e.code()), e.what(), 10 + int(e.code()));
    }
  }();
  const std::string root = options.data_root.empty() ? loaded.config.data_root : options.data_root;
  const DatasetIndex index = scan_or_throw(root);
  if (index.class_names.size() != std::size_t(loaded.config.model.output_units) ||
      (!loaded.state.class_names.empty() && loaded.state.class_names != index.class_names))
    throw AppError("classes", "dataset classes do not match the checkpoint's classes");

  std::vector<std::size_t> ids;
  if (options.whole_dataset) {
    ids.resize(index.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  } else {
    try {
      ids = split(index.size(), loaded.config.split_ratio, loaded.state.run_seed, loaded.config.limit).test;
    } catch (const DatasetError& e) {
      throw AppError("data", e.what());
    }
  }
  DataLoader loader(index, ids, LoaderMode::kEval, loader_options(loaded.config, loaded.state.run_seed));
  const EvalOutput out = evaluate_model(loaded.model, loader);
  EvalReport r = build_report(out);
  if (!options.out_dir.empty()) write_eval_report(options.out_dir, r, index.class_names);
  log << render_confusion(r.cm, index.class_names) << "\n"
      << render_report(r.report, index.class_names) << "\n"
      << summary_line(r) << "\n";
  return r;
}

EvalReport cmd_evaluate_scores(const fs::path& scores, const fs::path& out_dir, std::ostream& log) {
  std::vector<ScoreRow> rows;
  try {
    rows = read_scores_csv(scores);
  } catch (const std::exception& e) {
    throw AppError("scores", e.what());
  }
  if (rows.empty()) throw AppError("scores", "score file has no rows");
  EvalReport r = build_report(rows);
  const std::vector<std::string> names{"Monkeypox", "Non_Monkeypox"};
  if (!out_dir.empty()) write_eval_report(out_dir, r, names);
  log << render_confusion(r.cm, names) << "\n" << render_report(r.report, names) << "\n"
      << summary_line(r) << "\n";
  return r;
}

std::vector<Prediction> cmd_predict(const fs::path& checkpoint, const std::vector<fs::path>& images,
                                    std::ostream& out) {
  LoadedModel loaded = [&] {
    try {
      return load_model(checkpoint);
    } catch (const CheckpointError& e) {
      throw AppError(checkpoint_errc_name(e.code()), e.what(), 10 + int(e.code()));
    }
  }();
  const Index size = loaded.config.image_size();
  std::vector<Prediction> result;
  out << "file,label,score0,score1\n";
  char line[64];
  for (const auto& path : images) {
    Prediction p;
    p.file = path.string();
    try {
      TensorF img = load_image(path, size);
      const TensorF batch = img.reshaped({1, size, size, 3});
      const TensorF pred = loaded.model.forward(batch, Mode::kEval);
      p.score0 = pred.at(0, 0);
      p.score1 = pred.at(0, 1);
      p.label = predicted_class(p.score0, p.score1);
      std::snprintf(line, sizeof line, ",%d,%.6f,%.6f", p.label, p.score0, p.score1);
      out << p.file << line << "\n";
    } catch (const ImageError& e) {
      p.error = e.what();
      std::cerr << "mpox: error[image]: " << e.what() << "\n";
    }
    result.push_back(std::move(p));
  }
  return result;
}

std::string cmd_summary(const RunConfig& config, const std::map<std::string, std::int64_t>& baselines) {
  config.validate();
  Model<float> model = build_mpoxsldnet<float>(config.model);
  const ParameterTable table = count_parameters(model);
  std::ostringstream os;
  char line[160];
  os << "model: MpoxSLDNet (" << preset_name(config.model) << "), input "
     << config.model.input_h << "x" << config.model.input_w << "x" << config.model.input_channels << "\n";
  std::snprintf(line, sizeof line, "%-22s %-12s %-16s %14s\n", "layer", "type", "output shape", "params");
  os << line << std::string(67, '-') << "\n";
  Shape pre_flatten;
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof line, "%-22s %-12s %-16s %14lld\n", row.name.c_str(), row.kind.c_str(),
                  render_shape(row.output_shape).c_str(),
                  static_cast<long long>(row.trainable + row.non_trainable));
    os << line;
  }
  os << std::string(67, '-') << "\n";
  os << "pre-flatten shape: " << render_shape(config.model.pre_flatten_shape()) << "\n";
  os << "trainable params: " << table.trainable << "\n";
  os << "non-trainable params: " << table.non_trainable << "\n";
  os << "total params: " << table.total() << "\n";
  const std::size_t bytes = estimate_checkpoint_bytes(config);
  os << "estimated checkpoint bytes: " << bytes << " (" << fmt(double(bytes) / (1024.0 * 1024.0), 2)
     << " MiB; 4 x params + " << bytes - 4 * std::size_t(table.total()) << " metadata)\n";
  if (!baselines.empty()) {
    os << "\ncomparison (params, ratio to this model):\n";
    for (const auto& [name, count] : baselines) {
      std::snprintf(line, sizeof line, "  %-20s %14lld  %8.2fx\n", name.c_str(),
                    static_cast<long long>(count), double(count) / double(table.total()));
      os << line;
    }
  }
  return os.str();
}

}  // namespace mpox
