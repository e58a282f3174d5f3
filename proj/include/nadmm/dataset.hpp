#pragma once

#include "nadmm/common.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <span>
#include <vector>

namespace nadmm {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// A labeled design matrix: n observations of dimension p with labels in
/// {1..C}. Storage is either dense row-major or CSR; both present the same
/// matrix-product interface so every kernel is storage-agnostic.
class Dataset {
  public:
    Dataset() = default;

    static Dataset dense(RowMatrix features, std::vector<std::int32_t> labels, int num_classes);
    static Dataset sparse(SparseRowMatrix features, std::vector<std::int32_t> labels, int num_classes);

    Index n() const { return labels_.empty() ? 0 : static_cast<Index>(labels_.size()); }
    Index p() const { return is_sparse_ ? sparse_.cols() : dense_.cols(); }
    int num_classes() const { return num_classes_; }
    /// Weight dimension d = (C-1) * p.
    Index weight_dim() const { return (num_classes_ - 1) * p(); }
    bool is_sparse() const { return is_sparse_; }

    const std::vector<std::int32_t>& labels() const { return labels_; }
    int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }

    const RowMatrix& dense_features() const;
    const SparseRowMatrix& sparse_features() const;

    /// features * rhs, an n x k dense result.
    Matrix multiply(const Eigen::Ref<const Matrix>& rhs) const;
    /// features^T * rhs, a p x k dense result.
    Matrix multiply_transposed(const Eigen::Ref<const Matrix>& rhs) const;

    /// Row subset as a new Dataset (same storage kind, same class count).
    Dataset subset(std::span<const Index> rows) const;

    /// Original label values in class-index order: label_values()[c-1] is the
    /// source-file value that was remapped to class c. Empty when the data was
    /// built directly with {1..C} labels.
    const std::vector<double>& label_values() const { return label_values_; }
    void set_label_values(std::vector<double> values) { label_values_ = std::move(values); }

    bool normalized() const { return normalized_; }
    void set_normalized(bool v) { normalized_ = v; }

  private:
    void validate() const;

    bool is_sparse_ = false;
    RowMatrix dense_;
    SparseRowMatrix sparse_;
    std::vector<std::int32_t> labels_;
    std::vector<double> label_values_;
    int num_classes_ = 0;
    bool normalized_ = false;
};

}  // namespace nadmm
