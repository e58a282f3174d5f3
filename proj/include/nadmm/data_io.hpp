#pragma once

#include "nadmm/dataset.hpp"

#include <random>
#include <string>
#include <utility>

namespace nadmm {

namespace detail {

/// Deterministic RNG: mt19937_64 core with hand-rolled transforms, so streams
/// are identical across standard libraries (std distributions are not).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();                       // [0, 1)
    double normal();                        // Box-Muller, cached pair
    std::uint64_t uniform_int(std::uint64_t bound);  // [0, bound)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(i))]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detail

enum class PartitionScheme { contiguous, strided };

struct PartitionPlan {
    PartitionScheme scheme = PartitionScheme::contiguous;
    int n_workers = 1;
};

struct SyntheticSpec {
    Index n = 1000;
    Index p = 20;
    int num_classes = 4;
    double separation = 10.0;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

/// LIBSVM sparse text: "label idx:val idx:val ..." with 1-based indices.
/// Labels are remapped to {1..C} in ascending value order; the mapping is kept
/// in Dataset::label_values().
Dataset load_libsvm(const std::string& path);
void write_libsvm(const std::string& path, const Dataset& data);

/// Dense CSV, last column is the label; `header` skips the first line.
Dataset load_csv(const std::string& path, bool header = false);

/// IDX image/label pair (magic 0x803 / 0x801). Pixels scale to [0,1];
/// labels 0..9 remap to 1..10.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
/// Writes a dataset with features in [0,1] as an IDX pair (quantized to u8).
void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& data);

/// Disjoint covering row subsets. Contiguous: worker i gets
/// [i*ceil(n/N), (i+1)*ceil(n/N)); strided: row j goes to worker j mod N.
std::vector<Dataset> partition(const Dataset& data, const PartitionPlan& plan);

/// Gaussian class clusters with the given center separation; 90/10 train/test
/// split. Same seed, same bytes.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec);

/// Per-column max-abs scaling; returns the scaled copy with the normalized
/// flag stamped.
Dataset normalize_columns(const Dataset& data);

}  // namespace nadmm
