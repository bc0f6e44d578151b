#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "biocl/matrix.hpp"
#include "biocl/rng.hpp"

namespace biocl {

/// Raised by the IDX parser with the byte offset of the offending field.
struct IdxParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Dataset {
    Matrix images;            // n x (side*side), values in [0, 1]
    std::vector<int> labels;  // class indices
    int image_side = 28;

    int size() const { return images.rows(); }
    int dim() const { return images.cols(); }
};

/// Parse one IDX image file (magic 0x00000803) and its label file
/// (magic 0x00000801); pixels scale by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Locate the four MNIST-style IDX files under a directory and load
/// train/test splits.
std::pair<Dataset, Dataset> load_idx_dir(const std::string& dir);

enum class Scenario : std::uint8_t { Rotate, Permute, ClassSplit };

struct TaskSpec {
    Scenario kind = Scenario::Rotate;
    int task_id = 0;               // 0-based position in the stream
    real angle_deg = 0;            // Rotate
    std::vector<int> permutation;  // Permute, a bijection over pixels
    std::vector<int> classes;      // ClassSplit
};

/// One materialized task: transformed train/test splits.
struct Task {
    TaskSpec spec;
    Dataset train;
    Dataset test;
};

struct StreamConfig {
    Scenario scenario = Scenario::Permute;
    int n_tasks = 5;
    real theta_inc = 8;           // degrees per task for Rotate
    int classes_per_task = 2;     // ClassSplit
    std::uint64_t seed = 0;
    int train_limit = 0;          // 0 = use every sample
    int test_limit = 0;
    bool bilinear = true;         // rotation interpolation
};

/// Deterministic task stream over a base train/test pair. Tasks are stored
/// as (spec, index split) pairs and materialized on demand, so only the
/// task being consumed occupies memory. Rotation angles follow
/// {0, theta_inc, ..., (n_tasks-1)*theta_inc}; every permutation task draws
/// a fresh random bijection; class splits take label pairs in order.
class TaskStream {
public:
    TaskStream(const Dataset& train_base, const Dataset& test_base, const StreamConfig& cfg);

    int n_tasks() const { return static_cast<int>(specs_.size()); }
    const TaskSpec& spec(int t) const { return specs_[t]; }
    const StreamConfig& config() const { return cfg_; }

    Dataset materialize_train(int t) const;
    Dataset materialize_test(int t) const;
    Task task(int t) const { return {specs_[t], materialize_train(t), materialize_test(t)}; }

    /// Pools every task's train split into one dataset (the joint baseline).
    Dataset pooled_train() const;

private:
    const Dataset* train_base_;
    const Dataset* test_base_;
    StreamConfig cfg_;
    std::vector<TaskSpec> specs_;
    std::vector<std::vector<int>> train_idx_;
    std::vector<std::vector<int>> test_idx_;
};

/// Rotate one flat side x side image about its center; out-of-bounds reads
/// fill with 0 and the output is clamped to [0, 1].
void rotate_image(std::span<const real> in, std::span<real> out, int side, real angle_deg,
                  bool bilinear = true);

/// Transform a subset of a base dataset according to a task spec.
Dataset apply_task_transform(const Dataset& base, std::span<const int> indices,
                             const TaskSpec& spec, bool bilinear);

std::vector<int> invert_permutation(std::span<const int> perm);

}  // namespace biocl
