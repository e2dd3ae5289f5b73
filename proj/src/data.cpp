#include "mpox/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

namespace mpox {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitTag = 0x53504C4954ULL;    // "SPLIT"
constexpr std::uint64_t kEpochTag = 0x45504F4348ULL;    // "EPOCH"
constexpr std::uint64_t kAugmentTag = 0x4155474DULL;    // "AUGM"
constexpr std::uint64_t kPreviewTag = 0x50524556ULL;    // "PREV"

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DatasetError("dataset root is not a directory: " + root.string());
  DatasetIndex index;
  index.root = root;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) index.class_names.push_back(entry.path().filename().string());
  std::sort(index.class_names.begin(), index.class_names.end());
  if (index.class_names.size() != 2)
    throw DatasetError("binary task requires exactly two class folders under " + root.string() +
                       ", found " + std::to_string(index.class_names.size()));

  index.counts.assign(index.class_names.size(), 0);
  for (std::size_t label = 0; label < index.class_names.size(); ++label) {
    const fs::path dir = root / index.class_names[label];
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      if (detect_image_format(f) == ImageFormat::kUnknown) {
        std::cerr << "warning: skipping unreadable image " << f.string() << "\n";
        index.skipped.push_back(f);
        continue;
      }
      index.records.push_back({f, index.class_names[label], int(label)});
      ++index.counts[label];
    }
    if (index.counts[label] == 0)
      throw DatasetError("class directory has no readable images: " + dir.string());
  }
  return index;
}

std::string dataset_stats_csv(const DatasetIndex& index) {
  std::ostringstream os;
  os << "class,count\n";
  for (std::size_t i = 0; i < index.class_names.size(); ++i)
    os << index.class_names[i] << ',' << index.counts[i] << '\n';
  return os.str();
}

SplitPlan split(std::size_t n, double ratio, std::uint64_t seed, std::size_t limit) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DatasetError("split ratio must be in (0, 1)");
  SplitPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.permutation.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.permutation[i] = i;
  Rng rng(derive_seed({seed, kSplitTag}));
  rng.shuffle(plan.permutation);
  if (limit > 0 && limit < n) plan.permutation.resize(limit);
  const std::size_t total = plan.permutation.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * double(total)));
  if (n_train == 0 || n_train == total)
    throw DatasetError("split of " + std::to_string(total) + " records at ratio " +
                       std::to_string(ratio) + " leaves one side empty");
  plan.train.assign(plan.permutation.begin(), plan.permutation.begin() + std::ptrdiff_t(n_train));
  plan.test.assign(plan.permutation.begin() + std::ptrdiff_t(n_train), plan.permutation.end());
  return plan;
}

AugmentDraw draw_augment(const AugmentPolicy& policy, Rng& rng) {
  AugmentDraw d;
  d.zoom = rng.uniform(policy.zoom_lo, policy.zoom_hi);
  d.brightness = rng.uniform(policy.brightness_lo, policy.brightness_hi);
  d.flip = rng.bernoulli(policy.flip_probability);
  return d;
}

TensorF zoom_image(const TensorF& image, double zoom, float fill_value) {
  if (zoom == 1.0) return image;
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  TensorF out({h, w, c}, fill_value);
  // Continuous coordinates: pixel i covers [i, i + 1). Output center i + 0.5
  // maps to (i + 0.5 - extent/2) / zoom + extent/2 in the source.
  auto map = [zoom](Index i, Index extent, Index& lo, Index& hi, float& frac) {
    const double half = double(extent) / 2.0;
    const double u = (double(i) + 0.5 - half) / zoom + half;
    if (u < 0.0 || u > double(extent)) return false;
    const double s = std::clamp(u - 0.5, 0.0, double(extent - 1));
    lo = Index(std::floor(s));
    hi = std::min(lo + 1, extent - 1);
    frac = float(s - double(lo));
    return true;
  };
  for (Index y = 0; y < h; ++y) {
    Index y0, y1;
    float fy;
    if (!map(y, h, y0, y1, fy)) continue;
    for (Index x = 0; x < w; ++x) {
      Index x0, x1;
      float fx;
      if (!map(x, w, x0, x1, fx)) continue;
      for (Index ch = 0; ch < c; ++ch) {
        const float a = image[(y0 * w + x0) * c + ch];
        const float b = image[(y0 * w + x1) * c + ch];
        const float d = image[(y1 * w + x0) * c + ch];
        const float e = image[(y1 * w + x1) * c + ch];
        const float top = a + (b - a) * fx;
        const float bottom = d + (e - d) * fx;
        out[(y * w + x) * c + ch] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

TensorF flip_horizontal(const TensorF& image) {
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  TensorF out(image.shape());
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch)
        out[(y * w + x) * c + ch] = image[(y * w + (w - 1 - x)) * c + ch];
  return out;
}

TensorF apply_augment(const TensorF& image, const AugmentDraw& draw, float fill_value) {
  TensorF out = zoom_image(image, draw.zoom, fill_value);
  if (draw.brightness != 1.0) {
    const float b = float(draw.brightness);
    out.array() = (out.array() * b).min(1.0f).max(0.0f);
  }
  if (draw.flip) out = flip_horizontal(out);
  return out;
}

Rng augment_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t record) {
  return Rng(derive_seed({seed, kAugmentTag, epoch, record}));
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices,
                                                   std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < indices.size(); i += batch_size)
    out.emplace_back(indices.begin() + std::ptrdiff_t(i),
                     indices.begin() + std::ptrdiff_t(std::min(indices.size(), i + batch_size)));
  return out;
}

std::size_t worker_count_from_env() {
  if (const char* env = std::getenv("MPOX_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return std::size_t(v);
  }
  return 1;
}

DataLoader::DataLoader(const DatasetIndex& index, std::vector<std::size_t> indices,
                       LoaderMode mode, LoaderOptions options)
    : index_(&index), indices_(std::move(indices)), mode_(mode), options_(options) {
  if (options_.workers == 0) options_.workers = 1;
  const std::size_t per_image = std::size_t(options_.image_size * options_.image_size * 3) * sizeof(float);
  use_cache_ = per_image * indices_.size() <= options_.cache_bytes;
}

std::vector<std::vector<std::size_t>> DataLoader::epoch_plan(std::uint64_t epoch) const {
  std::vector<std::size_t> order = indices_;
  if (mode_ == LoaderMode::kTrain) {
    Rng rng(derive_seed({options_.seed, kEpochTag, epoch}));
    rng.shuffle(order);
  }
  return make_batches(order, options_.batch_size);
}

std::size_t DataLoader::batches_per_epoch() const {
  return (indices_.size() + options_.batch_size - 1) / options_.batch_size;
}

std::optional<TensorF> DataLoader::load_one(std::size_t record) {
  if (use_cache_) {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(record); it != cache_.end()) return it->second;
  }
  try {
    TensorF img = load_image(index_->records.at(record).path, options_.image_size);
    if (use_cache_) {
      std::lock_guard lock(cache_mutex_);
      cache_.emplace(record, img);
    }
    return img;
  } catch (const ImageError& e) {
    std::cerr << "warning: " << e.what() << "\n";
    return std::nullopt;
  }
}

Batch DataLoader::load(const std::vector<std::size_t>& record_ids, std::uint64_t epoch) {
  const bool augment = mode_ == LoaderMode::kTrain;
  std::vector<std::optional<TensorF>> slots(record_ids.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto img = load_one(record_ids[i]);
      if (img && augment) {
        Rng rng = augment_stream(options_.seed, epoch, record_ids[i]);
        img = apply_augment(*img, draw_augment(options_.policy, rng), options_.policy.fill_value);
      }
      slots[i] = std::move(img);
    }
  };
  const std::size_t workers = std::min(options_.workers, std::max<std::size_t>(1, record_ids.size()));
  if (workers <= 1) {
    work(0, record_ids.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (record_ids.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(record_ids.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }

  Batch batch;
  batch.augmented = augment;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      ++batch.failures;
      continue;
    }
    batch.record_ids.push_back(record_ids[i]);
    batch.label_ids.push_back(index_->records[record_ids[i]].label);
  }
  if (batch.record_ids.empty()) return batch;
  const Index b = Index(batch.record_ids.size()), s = options_.image_size;
  const Index classes = Index(index_->class_names.size());
  batch.images = TensorF({b, s, s, 3});
  batch.labels = TensorF({b, classes});
  const Index per = s * s * 3;
  Index row = 0;
  for (auto& slot : slots) {
    if (!slot) continue;
    std::copy(slot->data(), slot->data() + per, batch.images.data() + row * per);
    batch.labels.at(row, batch.label_ids[std::size_t(row)]) = 1.0f;
    ++row;
  }
  return batch;
}

void preview_grid(const DatasetIndex& index, const std::vector<std::size_t>& candidates,
                  std::size_t n, const AugmentPolicy& policy, std::uint64_t seed,
                  Index image_size, const fs::path& out) {
  if (n == 0) throw std::invalid_argument("preview needs at least one tile");
  if (candidates.empty()) throw DatasetError("no records to preview");
  const auto cols = std::size_t(std::ceil(std::sqrt(double(n))));
  const std::size_t rows = (n + cols - 1) / cols;
  Image8 grid{Index(rows) * image_size, Index(cols) * image_size, {}};
  grid.pixels.assign(std::size_t(grid.height * grid.width * 3), 0);
  Rng pick(derive_seed({seed, kPreviewTag}));
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t record = candidates[pick.below(candidates.size())];
    TensorF img = load_image(index.records.at(record).path, image_size);
    Rng rng = augment_stream(seed, 0, t);
    img = apply_augment(img, draw_augment(policy, rng), policy.fill_value);
    const Image8 tile = to_image8(img);
    const Index oy = Index(t / cols) * image_size, ox = Index(t % cols) * image_size;
    for (Index y = 0; y < image_size; ++y)
      std::copy_n(tile.pixels.begin() + std::ptrdiff_t(y * image_size * 3), image_size * 3,
                  grid.pixels.begin() + std::ptrdiff_t(((oy + y) * grid.width + ox) * 3));
  }
  write_png(out, grid);
}

Image8 synthetic_blob_image(Index size, Rng& rng) {
  Image8 img{size, size, std::vector<std::uint8_t>(std::size_t(size * size * 3))};
  const double base[3] = {rng.uniform(15, 55), rng.uniform(10, 45), rng.uniform(10, 45)};
  const int blobs = 3 + int(rng.below(4));
  struct Blob { double cx, cy, r, color[3]; };
  std::vector<Blob> list;
  for (int b = 0; b < blobs; ++b)
    list.push_back({rng.uniform(0.15, 0.85) * size, rng.uniform(0.15, 0.85) * size,
                    rng.uniform(0.07, 0.14) * size,
                    {rng.uniform(210, 255), rng.uniform(150, 220), rng.uniform(140, 210)}});
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      double px[3] = {base[0], base[1], base[2]};
      for (const auto& b : list) {
        const double d2 = (x + 0.5 - b.cx) * (x + 0.5 - b.cx) + (y + 0.5 - b.cy) * (y + 0.5 - b.cy);
        const double wgt = std::exp(-d2 / (2.0 * b.r * b.r));
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - wgt) + b.color[c] * wgt;
      }
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::uint8_t(std::clamp(px[c] + rng.uniform(-8, 8), 0.0, 255.0));
    }
  return img;
}

Image8 synthetic_stripe_image(Index size, Rng& rng) {
  Image8 img{size, size, std::vector<std::uint8_t>(std::size_t(size * size * 3))};
  const double light[3] = {rng.uniform(170, 225), rng.uniform(160, 215), rng.uniform(150, 205)};
  const double dark[3] = {rng.uniform(20, 60), rng.uniform(20, 55), rng.uniform(20, 55)};
  const double period = rng.uniform(0.12, 0.25) * size;
  const double angle = rng.uniform(0.0, 3.14159265358979);
  const double phase = rng.uniform(0.0, period);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      const double t = std::fmod(x * ca + y * sa + phase + 4.0 * size, period) / period;
      const bool stripe = t < 0.35;
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::uint8_t(
            std::clamp((stripe ? dark[c] : light[c]) + rng.uniform(-8, 8), 0.0, 255.0));
    }
  return img;
}

void generate_synthetic(const fs::path& root, const SyntheticOptions& options) {
  const fs::path pos = root / "Monkeypox", neg = root / "Non_Monkeypox";
  fs::create_directories(pos);
  fs::create_directories(neg);
  Rng rng(options.seed);
  char name[64];
  for (std::size_t i = 0; i < options.per_class; ++i) {
    std::snprintf(name, sizeof name, "blob_%05zu.png", i);
    write_png(pos / name, synthetic_blob_image(options.size, rng));
    std::snprintf(name, sizeof name, "stripe_%05zu.png", i);
    write_png(neg / name, synthetic_stripe_image(options.size, rng));
  }
}

}  // namespace mpox
