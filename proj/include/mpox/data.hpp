#pragma once

#include "mpox/image.hpp"
#include "mpox/rng.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mpox {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Record {
  std::filesystem::path path;
  std::string class_name;
  int label = 0;
};

/// Class folders sorted lexicographically; label = position in that order.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<Record> records;
  std::vector<std::string> class_names;
  std::vector<std::size_t> counts;             // per label
  std::vector<std::filesystem::path> skipped;  // files rejected at scan time

  std::size_t size() const { return records.size(); }
};

/// Scans `<root>/<ClassName>/<file>.{png,jpg,jpeg}`. Exactly two non-empty
/// class folders are required. Files whose header is not PNG/JPEG are
/// skipped and listed in `skipped`.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// `class,count` lines with a header.
std::string dataset_stats_csv(const DatasetIndex& index);

struct SplitPlan {
  std::vector<std::size_t> permutation;  // over the (possibly limited) record set
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double ratio = 0.9;
  std::uint64_t seed = 0;
};

/// Seeded Fisher-Yates over 0..n-1, optionally truncated to `limit`
/// records; the first floor(ratio * n') go to train.
SplitPlan split(std::size_t n, double ratio, std::uint64_t seed, std::size_t limit = 0);

struct AugmentPolicy {
  double zoom_lo = 0.99;
  double zoom_hi = 1.01;
  double brightness_lo = 0.8;
  double brightness_hi = 1.2;
  double flip_probability = 0.5;
  float fill_value = 0.0f;

  static AugmentPolicy identity() { return {1.0, 1.0, 1.0, 1.0, 0.0, 0.0f}; }
};

struct AugmentDraw {
  double zoom = 1.0;
  double brightness = 1.0;
  bool flip = false;
};

/// Draws zoom, brightness, flip in that order.
AugmentDraw draw_augment(const AugmentPolicy& policy, Rng& rng);

/// Center-anchored zoom by `draw.zoom` (values below 1 shrink the picture and
/// expose a fill border), brightness multiply with [0, 1] clipping, optional
/// horizontal flip. Input/output are (h, w, c) in [0, 1].
TensorF apply_augment(const TensorF& image, const AugmentDraw& draw, float fill_value = 0.0f);

TensorF zoom_image(const TensorF& image, double zoom, float fill_value);
TensorF flip_horizontal(const TensorF& image);

/// Per-image stream for (master seed, epoch, record).
Rng augment_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t record);

struct Batch {
  TensorF images;  // (B, S, S, 3)
  TensorF labels;  // (B, classes) one-hot
  std::vector<std::size_t> record_ids;
  std::vector<int> label_ids;
  std::size_t failures = 0;  // entries dropped because decoding failed
  bool augmented = false;

  std::size_t size() const { return record_ids.size(); }
};

/// Batches `indices` into groups of `batch_size`; the last may be short.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices,
                                                   std::size_t batch_size);

enum class LoaderMode { kTrain, kEval };

struct LoaderOptions {
  std::size_t batch_size = 32;
  Index image_size = 224;
  std::uint64_t seed = 0;
  AugmentPolicy policy;
  std::size_t workers = 1;
  std::size_t cache_bytes = std::size_t(512) << 20;
};

/// Reads `MPOX_THREADS`; defaults to 1.
std::size_t worker_count_from_env();

/// Produces batches for one split. Train mode reshuffles per epoch from the
/// epoch stream and augments each image from its own stream; eval mode keeps
/// the given order and never augments. Decoded images are cached while the
/// whole split fits in `cache_bytes`.
class DataLoader {
 public:
  DataLoader(const DatasetIndex& index, std::vector<std::size_t> indices, LoaderMode mode,
             LoaderOptions options);

  /// Record order for the given epoch, grouped into batches.
  std::vector<std::vector<std::size_t>> epoch_plan(std::uint64_t epoch) const;

  Batch load(const std::vector<std::size_t>& record_ids, std::uint64_t epoch);

  std::size_t batches_per_epoch() const;
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::optional<TensorF> load_one(std::size_t record);

  const DatasetIndex* index_;
  std::vector<std::size_t> indices_;
  LoaderMode mode_;
  LoaderOptions options_;
  bool use_cache_;
  std::mutex cache_mutex_;
  std::unordered_map<std::size_t, TensorF> cache_;
};

/// Writes a ceil(sqrt(n))-column grid of `n` augmented samples drawn with a
/// seeded stream from `candidates` (record ids into `index`).
void preview_grid(const DatasetIndex& index, const std::vector<std::size_t>& candidates,
                  std::size_t n, const AugmentPolicy& policy, std::uint64_t seed,
                  Index image_size, const std::filesystem::path& out);

struct SyntheticOptions {
  std::size_t per_class = 20;
  Index size = 64;
  std::uint64_t seed = 7;
};

/// Two separable classes written as PNG: bright blobs on a dark background
/// under `Monkeypox/`, dark stripes on a light background under
/// `Non_Monkeypox/`.
void generate_synthetic(const std::filesystem::path& root, const SyntheticOptions& options);

Image8 synthetic_blob_image(Index size, Rng& rng);
Image8 synthetic_stripe_image(Index size, Rng& rng);

}  // namespace mpox
