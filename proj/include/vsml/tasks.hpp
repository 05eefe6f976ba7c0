#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>

#include "vsml/common.hpp"
#include "vsml/rng.hpp"

namespace vsml {

// Parsed IDX container (big-endian, ubyte payload).
struct IdxTensor {
  std::vector<int> shape;
  std::vector<uint8_t> data;
};

// Throws ConfigError naming the bad offset on malformed input.
IdxTensor parse_idx(std::span<const uint8_t> bytes);

struct RawDataset {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> images;  // count * rows * cols
  std::vector<uint8_t> labels;
  int class_count = 0;

  int count() const { return static_cast<int>(labels.size()); }
};

RawDataset load_idx_dataset(const std::string& images_path,
                            const std::string& labels_path, const std::string& name);

// Loads and caches named datasets from a data-root directory. Names follow
// "<base>:<split>", e.g. "mnist:train", "fashion-mnist:test".
class DatasetStore {
 public:
  explicit DatasetStore(std::string data_root) : data_root_(std::move(data_root)) {}
  const RawDataset& get(const std::string& name) const;

 private:
  std::string data_root_;
  mutable std::map<std::string, RawDataset> cache_;
};

struct TaskSpec {
  enum class Source { dataset, random, sum_sign };
  Source source = Source::random;
  std::string dataset_name;     // e.g. "mnist:train"
  std::vector<int> class_subset;  // dataset sources; empty = all classes
  int rescale_size = 0;           // 0 = native; else 14, 28, or 32
  bool project = false;           // random linear projection, fixed per episode
  bool permute = false;           // random input permutation, fixed per episode
  // When >= 0, the projection/permutation is drawn from this seed instead of
  // the episode seed, i.e. it is the same transformation in every episode.
  long long projection_seed = -1;
  long long permutation_seed = -1;
  int input_dim = 0;              // synthetic sources; derived for datasets
  int class_count = 2;            // synthetic sources; derived for datasets
  int episode_length = 500;
  int random_points = 20;         // pool size for the random source

  void validate() const;
  // Flattened input dimension the learner sees (A^(1)).
  int resolved_input_dim(const DatasetStore* store) const;
  int resolved_class_count(const DatasetStore* store) const;
};

// Random projection matrix, entries i.i.d. N(0, 1/dim_in) so input scale is
// preserved in expectation.
Mat make_projection(int dim_in, int dim_out, uint64_t seed);

// Bilinear rescale of a single-channel image in [0,1].
Vec rescale_image(const Vec& image, int rows, int cols, int out_size);

// One labelled example after the full augmentation pipeline.
struct Example {
  Vec x;
  int label = 0;
};

// Deterministic per-(spec, seed) stream of examples. The projection or
// permutation is drawn once at construction and fixed for the episode.
// Dataset examples are drawn without replacement, reshuffling when the pool
// is exhausted; the random source regenerates its pool from the seed; the
// sum-sign source is an infinite generator.
class EpisodeStream {
 public:
  EpisodeStream(const TaskSpec& spec, const DatasetStore* store, uint64_t seed);
  Example next();

  int input_dim() const { return input_dim_; }
  int class_count() const { return class_count_; }

 private:
  Example raw_next();

  TaskSpec spec_;
  const RawDataset* dataset_ = nullptr;
  std::vector<int> pool_;  // dataset indices after class-subset filtering
  std::vector<int> order_;
  size_t cursor_ = 0;
  std::map<int, int> relabel_;
  Rng rng_;
  Mat projection_;
  std::vector<int> permutation_;
  int input_dim_ = 0;
  int class_count_ = 0;
  // random-source pool
  Mat random_x_;
  std::vector<int> random_y_;
};

// Synthetic dataset of `points` standard-normal inputs with uniform labels.
void make_random_task(uint64_t seed, int points, int dims, int classes, Mat& xs,
                      std::vector<int>& ys);

// Single sum-sign draw: x ~ N(0,1)^dims, label 1 iff the sum is positive
// (ties go to class 0).
Example make_sum_sign_example(Rng& rng, int dims);

// Running mean of per-step correctness (the cumulative accuracy curve).
std::vector<double> cumulative_accuracy(const std::vector<int>& correct);

// A weighted set of task specs; episodes draw one spec per seed.
struct TaskDistribution {
  std::vector<TaskSpec> specs;
  std::vector<double> weights;  // empty = uniform

  void validate() const;
  const TaskSpec& sample(uint64_t seed) const;
};

}  // namespace vsml
