#include "vsml/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace vsml {

namespace {

uint32_t read_be32(std::span<const uint8_t> bytes, size_t at) {
  return (static_cast<uint32_t>(bytes[at]) << 24) |
         (static_cast<uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<uint32_t>(bytes[at + 2]) << 8) | static_cast<uint32_t>(bytes[at + 3]);
}

}  // namespace

IdxTensor parse_idx(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw ConfigError("idx: truncated header, need 4 magic bytes, have " +
                      std::to_string(bytes.size()));
  }
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw ConfigError("idx: bad magic at offset 0");
  }
  if (bytes[2] != 0x08) {
    throw ConfigError("idx: unsupported data type 0x" + std::to_string(bytes[2]) +
                      " at offset 2 (only ubyte 0x08)");
  }
  const int ndims = bytes[3];
  if (ndims < 1 || ndims > 3) {
    throw ConfigError("idx: unsupported dimension count " + std::to_string(ndims) +
                      " at offset 3");
  }
  const size_t header = 4 + 4 * static_cast<size_t>(ndims);
  if (bytes.size() < header) {
    throw ConfigError("idx: truncated dimension list, need " + std::to_string(header) +
                      " bytes, have " + std::to_string(bytes.size()));
  }
  IdxTensor t;
  size_t expected = 1;
  for (int d = 0; d < ndims; ++d) {
    const uint32_t dim = read_be32(bytes, 4 + 4 * static_cast<size_t>(d));
    t.shape.push_back(static_cast<int>(dim));
    expected *= dim;
  }
  if (bytes.size() != header + expected) {
    throw ConfigError("idx: payload length mismatch, expected " +
                      std::to_string(header + expected) + " bytes total, have " +
                      std::to_string(bytes.size()));
  }
  t.data.assign(bytes.begin() + static_cast<long>(header), bytes.end());
  return t;
}

RawDataset load_idx_dataset(const std::string& images_path,
                            const std::string& labels_path, const std::string& name) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
  };
  const std::vector<uint8_t> img_bytes = slurp(images_path);
  const std::vector<uint8_t> lbl_bytes = slurp(labels_path);
  IdxTensor images = parse_idx(img_bytes);
  IdxTensor labels = parse_idx(lbl_bytes);
  if (images.shape.size() != 3) throw ConfigError(images_path + ": expected 3-D image tensor");
  if (labels.shape.size() != 1) throw ConfigError(labels_path + ": expected 1-D label tensor");
  if (images.shape[0] != labels.shape[0]) {
    throw ConfigError(name + ": image count " + std::to_string(images.shape[0]) +
                      " != label count " + std::to_string(labels.shape[0]));
  }
  RawDataset ds;
  ds.name = name;
  ds.rows = images.shape[1];
  ds.cols = images.shape[2];
  ds.images = std::move(images.data);
  ds.labels = std::move(labels.data);
  int max_label = 0;
  for (uint8_t l : ds.labels) max_label = std::max(max_label, static_cast<int>(l));
  ds.class_count = max_label + 1;
  return ds;
}

const RawDataset& DatasetStore::get(const std::string& name) const {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  const auto colon = name.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("dataset name must be <base>:<split>, got '" + name + "'");
  }
  const std::string base = name.substr(0, colon);
  const std::string split = name.substr(colon + 1);
  std::string img_file, lbl_file;
  if (split == "train") {
    img_file = "train-images-idx3-ubyte";
    lbl_file = "train-labels-idx1-ubyte";
  } else if (split == "test") {
    img_file = "t10k-images-idx3-ubyte";
    lbl_file = "t10k-labels-idx1-ubyte";
  } else {
    throw ConfigError("dataset split must be train or test, got '" + split + "'");
  }
  const std::string dir = data_root_ + "/" + base + "/";
  RawDataset ds = load_idx_dataset(dir + img_file, dir + lbl_file, name);
  return cache_.emplace(name, std::move(ds)).first->second;
}

void TaskSpec::validate() const {
  if (episode_length < 1) throw ConfigError("TaskSpec: episode_length must be >= 1");
  if (source == Source::dataset) {
    if (dataset_name.empty()) throw ConfigError("TaskSpec: dataset source needs a name");
    if (rescale_size != 0 && rescale_size != 14 && rescale_size != 28 && rescale_size != 32) {
      throw ConfigError("TaskSpec: rescale size must be 14, 28, or 32");
    }
  } else {
    if (input_dim < 1) throw ConfigError("TaskSpec: synthetic source needs input_dim");
    if (source == Source::random && class_count < 2) {
      throw ConfigError("TaskSpec: random source needs >= 2 classes");
    }
    if (source == Source::random && random_points < 1) {
      throw ConfigError("TaskSpec: random source needs >= 1 points");
    }
    if (rescale_size != 0) throw ConfigError("TaskSpec: rescale applies to datasets only");
  }
}

int TaskSpec::resolved_input_dim(const DatasetStore* store) const {
  if (source != Source::dataset) return input_dim;
  if (rescale_size != 0) return rescale_size * rescale_size;
  if (store == nullptr) throw ConfigError("TaskSpec: dataset source needs a data root");
  const RawDataset& ds = store->get(dataset_name);
  return ds.rows * ds.cols;
}

int TaskSpec::resolved_class_count(const DatasetStore* store) const {
  if (source == Source::sum_sign) return 2;
  if (source != Source::dataset) return class_count;
  if (!class_subset.empty()) return static_cast<int>(class_subset.size());
  if (store == nullptr) throw ConfigError("TaskSpec: dataset source needs a data root");
  return store->get(dataset_name).class_count;
}

Mat make_projection(int dim_in, int dim_out, uint64_t seed) {
  Mat p(dim_out, dim_in);
  Rng rng(derive_seed(seed, {0x70726f6a}));  // projection stream
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_in));
  for (int c = 0; c < dim_in; ++c)
    for (int r = 0; r < dim_out; ++r) p(r, c) = rng.normal() * scale;
  return p;
}

Vec rescale_image(const Vec& image, int rows, int cols, int out_size) {
  if (out_size != 14 && out_size != 28 && out_size != 32) {
    throw ConfigError("rescale: size must be 14, 28, or 32");
  }
  if (image.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw ConfigError("rescale: image size mismatch");
  }
  if (rows == out_size && cols == out_size) return image;
  Vec out(out_size * out_size);
  const double sy = static_cast<double>(rows) / out_size;
  const double sx = static_cast<double>(cols) / out_size;
  for (int oy = 0; oy < out_size; ++oy) {
    for (int ox = 0; ox < out_size; ++ox) {
      // Pixel-center sampling with edge clamping.
      const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, rows - 1.0);
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, cols - 1.0);
      const int y0 = static_cast<int>(fy);
      const int x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, rows - 1);
      const int x1 = std::min(x0 + 1, cols - 1);
      const double wy = fy - y0;
      const double wx = fx - x0;
      const double v =
          (1 - wy) * ((1 - wx) * image[y0 * cols + x0] + wx * image[y0 * cols + x1]) +
          wy * ((1 - wx) * image[y1 * cols + x0] + wx * image[y1 * cols + x1]);
      out[oy * out_size + ox] = v;
    }
  }
  return out;
}

void make_random_task(uint64_t seed, int points, int dims, int classes, Mat& xs,
                      std::vector<int>& ys) {
  if (classes < 2) throw ConfigError("make_random_task: classes must be >= 2");
  Rng rng(derive_seed(seed, {0x726e64}));
  xs.resize(points, dims);
  rng.fill_normal(xs);
  ys.resize(static_cast<size_t>(points));
  for (auto& y : ys) y = rng.uniform_int(classes);
}

Example make_sum_sign_example(Rng& rng, int dims) {
  Example ex;
  ex.x.resize(dims);
  rng.fill_normal(ex.x);
  ex.label = ex.x.sum() > 0.0 ? 1 : 0;
  return ex;
}

EpisodeStream::EpisodeStream(const TaskSpec& spec, const DatasetStore* store,
                             uint64_t seed)
    : spec_(spec), rng_(derive_seed(seed, {0x657069})) {
  spec_.validate();
  class_count_ = spec_.resolved_class_count(store);

  int native_dim = 0;
  if (spec_.source == TaskSpec::Source::dataset) {
    dataset_ = &store->get(spec_.dataset_name);
    native_dim = spec_.resolved_input_dim(store);
    std::set<int> keep(spec_.class_subset.begin(), spec_.class_subset.end());
    for (int i = 0; i < dataset_->count(); ++i) {
      const int label = dataset_->labels[static_cast<size_t>(i)];
      if (keep.empty() || keep.count(label)) pool_.push_back(i);
    }
    if (pool_.empty()) throw ConfigError("episode: class subset selects no examples");
    if (!keep.empty()) {
      int next = 0;
      for (int c : keep) relabel_[c] = next++;
    }
  } else if (spec_.source == TaskSpec::Source::random) {
    native_dim = spec_.input_dim;
    make_random_task(rng_.next_u64(), spec_.random_points, spec_.input_dim,
                     spec_.class_count, random_x_, random_y_);
    pool_.resize(static_cast<size_t>(spec_.random_points));
    for (size_t i = 0; i < pool_.size(); ++i) pool_[i] = static_cast<int>(i);
  } else {
    native_dim = spec_.input_dim;
  }

  input_dim_ = native_dim;
  if (spec_.project) {
    const uint64_t proj_seed = spec_.projection_seed >= 0
                                   ? static_cast<uint64_t>(spec_.projection_seed)
                                   : rng_.next_u64();
    projection_ = make_projection(native_dim, native_dim, proj_seed);
  }
  if (spec_.permute) {
    permutation_.resize(static_cast<size_t>(native_dim));
    for (int i = 0; i < native_dim; ++i) permutation_[static_cast<size_t>(i)] = i;
    if (spec_.permutation_seed >= 0) {
      Rng perm_rng(derive_seed(static_cast<uint64_t>(spec_.permutation_seed), {0x7065726d}));
      perm_rng.shuffle(permutation_);
    } else {
      rng_.shuffle(permutation_);
    }
  }
  if (!pool_.empty()) {
    order_ = pool_;
    rng_.shuffle(order_);
  }
}

Example EpisodeStream::raw_next() {
  if (spec_.source == TaskSpec::Source::sum_sign) {
    return make_sum_sign_example(rng_, spec_.input_dim);
  }
  if (cursor_ >= order_.size()) {
    rng_.shuffle(order_);
    cursor_ = 0;
  }
  const int idx = order_[cursor_++];
  Example ex;
  if (spec_.source == TaskSpec::Source::random) {
    ex.x = random_x_.row(idx).transpose();
    ex.label = random_y_[static_cast<size_t>(idx)];
    return ex;
  }
  const int pixels = dataset_->rows * dataset_->cols;
  Vec img(pixels);
  for (int p = 0; p < pixels; ++p) {
    img[p] = dataset_->images[static_cast<size_t>(idx) * pixels + p] / 255.0;
  }
  if (spec_.rescale_size != 0) {
    img = rescale_image(img, dataset_->rows, dataset_->cols, spec_.rescale_size);
  }
  ex.x = std::move(img);
  const int raw_label = dataset_->labels[static_cast<size_t>(idx)];
  ex.label = relabel_.empty() ? raw_label : relabel_.at(raw_label);
  return ex;
}

Example EpisodeStream::next() {
  Example ex = raw_next();
  if (!permutation_.empty()) {
    Vec permuted(ex.x.size());
    for (Eigen::Index i = 0; i < ex.x.size(); ++i) {
      permuted[i] = ex.x[permutation_[static_cast<size_t>(i)]];
    }
    ex.x = std::move(permuted);
  }
  if (projection_.size() > 0) ex.x = projection_ * ex.x;
  return ex;
}

std::vector<double> cumulative_accuracy(const std::vector<int>& correct) {
  std::vector<double> curve;
  curve.reserve(correct.size());
  double sum = 0.0;
  for (size_t t = 0; t < correct.size(); ++t) {
    sum += correct[t];
    curve.push_back(sum / static_cast<double>(t + 1));
  }
  return curve;
}

void TaskDistribution::validate() const {
  if (specs.empty()) throw ConfigError("task distribution: at least one task required");
  if (!weights.empty() && weights.size() != specs.size()) {
    throw ConfigError("task distribution: weight count must match task count");
  }
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("task distribution: weights must be non-negative");
  }
  for (const auto& s : specs) s.validate();
}

const TaskSpec& TaskDistribution::sample(uint64_t seed) const {
  if (specs.size() == 1) return specs[0];
  Rng rng(derive_seed(seed, {0x7461736b}));
  if (weights.empty()) {
    return specs[static_cast<size_t>(rng.uniform_int(static_cast<int>(specs.size())))];
  }
  double total = 0.0;
  for (double w : weights) total += w;
  double r = rng.uniform01() * total;
  for (size_t i = 0; i < specs.size(); ++i) {
    r -= weights[i];
    if (r <= 0.0) return specs[i];
  }
  return specs.back();
}

}  // namespace vsml
