#include "nadmm/dataset.hpp"

#include <cmath>

namespace nadmm {

Dataset Dataset::dense(RowMatrix features, std::vector<std::int32_t> labels, int num_classes) {
    Dataset d;
    d.is_sparse_ = false;
    d.dense_ = std::move(features);
    d.labels_ = std::move(labels);
    d.num_classes_ = num_classes;
    d.validate();
    return d;
}

Dataset Dataset::sparse(SparseRowMatrix features, std::vector<std::int32_t> labels, int num_classes) {
    Dataset d;
    d.is_sparse_ = true;
    d.sparse_ = std::move(features);
    d.sparse_.makeCompressed();
    d.labels_ = std::move(labels);
    d.num_classes_ = num_classes;
    d.validate();
    return d;
}

void Dataset::validate() const {
    const Index rows = is_sparse_ ? sparse_.rows() : dense_.rows();
    const Index cols = is_sparse_ ? sparse_.cols() : dense_.cols();
    if (rows < 1 || cols < 1) {
        throw ConfigError("dataset must have n >= 1 and p >= 1, got n=" + std::to_string(rows) +
                          " p=" + std::to_string(cols));
    }
    if (num_classes_ < 2) {
        throw ConfigError("dataset needs at least 2 classes, got " + std::to_string(num_classes_));
    }
    if (static_cast<Index>(labels_.size()) != rows) {
        throw ConfigError("label count " + std::to_string(labels_.size()) +
                          " does not match row count " + std::to_string(rows));
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] < 1 || labels_[i] > num_classes_) {
            throw DataError("label out of range at row " + std::to_string(i) + ": " +
                            std::to_string(labels_[i]));
        }
    }
    if (is_sparse_) {
        for (Index k = 0; k < sparse_.nonZeros(); ++k) {
            if (!std::isfinite(sparse_.valuePtr()[k])) {
                throw DataError("non-finite feature value in sparse dataset");
            }
        }
    } else if (!dense_.allFinite()) {
        throw DataError("non-finite feature value in dense dataset");
    }
}

const RowMatrix& Dataset::dense_features() const {
    if (is_sparse_) throw ConfigError("dataset is sparse, dense features unavailable");
    return dense_;
}

const SparseRowMatrix& Dataset::sparse_features() const {
    if (!is_sparse_) throw ConfigError("dataset is dense, sparse features unavailable");
    return sparse_;
}

Matrix Dataset::multiply(const Eigen::Ref<const Matrix>& rhs) const {
    if (rhs.rows() != p()) {
        throw ConfigError("multiply: expected " + std::to_string(p()) + " rows, got " +
                          std::to_string(rhs.rows()));
    }
    if (is_sparse_) return sparse_ * rhs;
    return dense_ * rhs;
}

Matrix Dataset::multiply_transposed(const Eigen::Ref<const Matrix>& rhs) const {
    if (rhs.rows() != n()) {
        throw ConfigError("multiply_transposed: expected " + std::to_string(n()) + " rows, got " +
                          std::to_string(rhs.rows()));
    }
    if (is_sparse_) return sparse_.transpose() * rhs;
    return dense_.transpose() * rhs;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
    if (rows.empty()) throw ConfigError("subset: empty row selection");
    std::vector<std::int32_t> sub_labels;
    sub_labels.reserve(rows.size());
    for (Index r : rows) {
        if (r < 0 || r >= n()) throw ConfigError("subset: row index out of range");
        sub_labels.push_back(labels_[static_cast<std::size_t>(r)]);
    }
    Dataset out;
    if (is_sparse_) {
        SparseRowMatrix sub(static_cast<Index>(rows.size()), p());
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (SparseRowMatrix::InnerIterator it(sparse_, rows[i]); it; ++it) {
                trips.emplace_back(static_cast<Index>(i), it.col(), it.value());
            }
        }
        sub.setFromTriplets(trips.begin(), trips.end());
        out = Dataset::sparse(std::move(sub), std::move(sub_labels), num_classes_);
    } else {
        RowMatrix sub(static_cast<Index>(rows.size()), p());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            sub.row(static_cast<Index>(i)) = dense_.row(rows[i]);
        }
        out = Dataset::dense(std::move(sub), std::move(sub_labels), num_classes_);
    }
    out.label_values_ = label_values_;
    out.normalized_ = normalized_;
    return out;
}

}  // namespace nadmm
