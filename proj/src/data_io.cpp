#include "nadmm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace nadmm {

namespace detail {

double Rng::uniform() {
    // 53-bit mantissa fill.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
    if (bound == 0) throw ConfigError("uniform_int: zero bound");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % bound;
}

}  // namespace detail

namespace {

// Remaps arbitrary numeric labels to {1..C} in ascending order and records the
// original values.
std::pair<std::vector<std::int32_t>, std::vector<double>> remap_labels(
    const std::vector<double>& raw) {
    std::map<double, std::int32_t> mapping;
    for (double v : raw) mapping.emplace(v, 0);
    std::int32_t next = 1;
    std::vector<double> values;
    values.reserve(mapping.size());
    for (auto& [value, idx] : mapping) {
        idx = next++;
        values.push_back(value);
    }
    std::vector<std::int32_t> labels;
    labels.reserve(raw.size());
    for (double v : raw) labels.push_back(mapping.at(v));
    return {std::move(labels), std::move(values)};
}

std::uint32_t read_be_u32(std::istream& in) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("unexpected end of IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24),
                               static_cast<std::uint8_t>(v >> 16),
                               static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_libsvm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);

    std::vector<double> raw_labels;
    std::vector<Eigen::Triplet<double>> triplets;
    Index max_col = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double label;
        if (!(ls >> label) || label != std::floor(label)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-integer label");
        }
        const Index row = static_cast<Index>(raw_labels.size());
        raw_labels.push_back(label);
        std::string tok;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": malformed feature token '" + tok + "'");
            }
            Index idx;
            double val;
            try {
                idx = std::stoll(tok.substr(0, colon));
                val = std::stod(tok.substr(colon + 1));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": malformed feature token '" + tok + "'");
            }
            if (idx < 1) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": feature indices are 1-based");
            }
            max_col = std::max(max_col, idx);
            triplets.emplace_back(row, idx - 1, val);
        }
    }
    if (raw_labels.empty()) throw DataError(path + ": no data rows");

    auto [labels, values] = remap_labels(raw_labels);
    SparseRowMatrix features(static_cast<Index>(raw_labels.size()), max_col);
    features.setFromTriplets(triplets.begin(), triplets.end());
    Dataset out = Dataset::sparse(std::move(features), std::move(labels),
                                  static_cast<int>(values.size()));
    out.set_label_values(std::move(values));
    return out;
}

void write_libsvm(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out.precision(17);
    const auto& values = data.label_values();
    for (Index i = 0; i < data.n(); ++i) {
        const int c = data.label(i);
        if (values.empty()) {
            out << c;
        } else {
            out << values[static_cast<std::size_t>(c - 1)];
        }
        if (data.is_sparse()) {
            for (SparseRowMatrix::InnerIterator it(data.sparse_features(), i); it; ++it) {
                out << ' ' << (it.col() + 1) << ':' << it.value();
            }
        } else {
            const auto& row = data.dense_features();
            for (Index j = 0; j < data.p(); ++j) {
                if (row(i, j) != 0.0) out << ' ' << (j + 1) << ':' << row(i, j);
            }
        }
        out << '\n';
    }
}

Dataset load_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    if (header) {
        std::getline(in, line);
        ++line_no;
    }
    std::vector<std::vector<double>> rows;
    std::vector<double> raw_labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                fields.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad value '" + cell +
                                "'");
            }
        }
        if (fields.size() < 2) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": need at least one feature and a label");
        }
        if (!rows.empty() && fields.size() != rows.front().size() + 1) {
            throw DataError(path + ":" + std::to_string(line_no) + ": ragged row");
        }
        const double label = fields.back();
        if (label != std::floor(label)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-integer label");
        }
        fields.pop_back();
        rows.push_back(std::move(fields));
        raw_labels.push_back(label);
    }
    if (rows.empty()) throw DataError(path + ": no data rows");

    RowMatrix features(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            features(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    auto [labels, values] = remap_labels(raw_labels);
    Dataset out =
        Dataset::dense(std::move(features), std::move(labels), static_cast<int>(values.size()));
    out.set_label_values(std::move(values));
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw ConfigError("cannot open " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw ConfigError("cannot open " + labels_path);

    if (read_be_u32(images) != 0x00000803u) {
        throw DataError(images_path + ": bad IDX image magic");
    }
    const std::uint32_t n = read_be_u32(images);
    const std::uint32_t rows = read_be_u32(images);
    const std::uint32_t cols = read_be_u32(images);

    if (read_be_u32(labels) != 0x00000801u) {
        throw DataError(labels_path + ": bad IDX label magic");
    }
    const std::uint32_t n_labels = read_be_u32(labels);
    if (n != n_labels) {
        throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                        std::to_string(n_labels) + " labels");
    }

    const std::size_t pixels = std::size_t(n) * rows * cols;
    std::vector<std::uint8_t> buf(pixels);
    images.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<std::size_t>(images.gcount()) != pixels) {
        throw DataError(images_path + ": truncated, expected " + std::to_string(pixels) +
                        " pixel bytes, found " + std::to_string(images.gcount()));
    }
    std::vector<std::uint8_t> lab(n);
    labels.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(labels.gcount()) != n) {
        throw DataError(labels_path + ": truncated, expected " + std::to_string(n) +
                        " label bytes, found " + std::to_string(labels.gcount()));
    }

    RowMatrix features(static_cast<Index>(n), static_cast<Index>(rows * cols));
    for (std::size_t i = 0; i < pixels; ++i) {
        features.data()[i] = static_cast<double>(buf[i]) / 255.0;
    }
    std::vector<std::int32_t> ls(n);
    std::vector<double> values;
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        ls[i] = static_cast<std::int32_t>(lab[i]) + 1;
        max_label = std::max(max_label, static_cast<int>(lab[i]));
    }
    for (int v = 0; v <= max_label; ++v) values.push_back(static_cast<double>(v));
    Dataset out = Dataset::dense(std::move(features), std::move(ls), max_label + 1);
    out.set_label_values(std::move(values));
    return out;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& data) {
    std::ofstream images(images_path, std::ios::binary);
    if (!images) throw ConfigError("cannot write " + images_path);
    std::ofstream labels(labels_path, std::ios::binary);
    if (!labels) throw ConfigError("cannot write " + labels_path);

    write_be_u32(images, 0x00000803u);
    write_be_u32(images, static_cast<std::uint32_t>(data.n()));
    write_be_u32(images, 1u);
    write_be_u32(images, static_cast<std::uint32_t>(data.p()));
    const auto& feats = data.dense_features();
    for (Index i = 0; i < data.n(); ++i) {
        for (Index j = 0; j < data.p(); ++j) {
            const double v = std::clamp(feats(i, j), 0.0, 1.0);
            const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
            images.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }
    write_be_u32(labels, 0x00000801u);
    write_be_u32(labels, static_cast<std::uint32_t>(data.n()));
    for (Index i = 0; i < data.n(); ++i) {
        const auto byte = static_cast<std::uint8_t>(data.label(i) - 1);
        labels.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

std::vector<Dataset> partition(const Dataset& data, const PartitionPlan& plan) {
    const int N = plan.n_workers;
    if (N < 1) throw ConfigError("partition needs n_workers >= 1");
    if (data.n() < N) {
        throw ConfigError("cannot partition " + std::to_string(data.n()) + " rows across " +
                          std::to_string(N) + " workers");
    }
    std::vector<std::vector<Index>> assignment(static_cast<std::size_t>(N));
    if (plan.scheme == PartitionScheme::contiguous) {
        const Index chunk = (data.n() + N - 1) / N;  // ceil(n/N)
        for (int i = 0; i < N; ++i) {
            const Index begin = i * chunk;
            const Index end = std::min<Index>(begin + chunk, data.n());
            if (begin >= end) {
                throw ConfigError("contiguous partition leaves worker " + std::to_string(i) +
                                  " empty; use strided or fewer workers");
            }
            for (Index r = begin; r < end; ++r) assignment[static_cast<std::size_t>(i)].push_back(r);
        }
    } else {
        for (Index r = 0; r < data.n(); ++r) {
            assignment[static_cast<std::size_t>(r % N)].push_back(r);
        }
    }
    std::vector<Dataset> out;
    out.reserve(assignment.size());
    for (const auto& rows : assignment) out.push_back(data.subset(rows));
    return out;
}

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2 || spec.p < 1 || spec.num_classes < 2) {
        throw ConfigError("synthetic spec needs n >= 2, p >= 1, C >= 2");
    }
    if (spec.num_classes > spec.n) {
        throw ConfigError("synthetic spec: more classes than samples");
    }
    detail::Rng rng(spec.seed);

    // Class centers: random directions scaled to the requested separation.
    Matrix centers(spec.p, spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        Vector dir(spec.p);
        for (Index j = 0; j < spec.p; ++j) dir(j) = rng.normal();
        const double norm = dir.norm();
        centers.col(c) = (norm > 0.0 ? (spec.separation / norm) * dir : dir);
    }

    RowMatrix features(spec.n, spec.p);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(spec.n));
    for (Index i = 0; i < spec.n; ++i) {
        const int c = static_cast<int>(i % spec.num_classes);
        labels[static_cast<std::size_t>(i)] = c + 1;
        for (Index j = 0; j < spec.p; ++j) {
            features(i, j) = centers(j, c) + spec.noise * rng.normal();
        }
    }

    const Index n_train = (spec.n * 9) / 10;
    if (n_train < spec.num_classes || spec.n - n_train < 1) {
        throw ConfigError("synthetic spec too small for a 90/10 split");
    }
    std::vector<Index> train_rows(static_cast<std::size_t>(n_train));
    std::vector<Index> test_rows(static_cast<std::size_t>(spec.n - n_train));
    for (Index i = 0; i < n_train; ++i) train_rows[static_cast<std::size_t>(i)] = i;
    for (Index i = n_train; i < spec.n; ++i) {
        test_rows[static_cast<std::size_t>(i - n_train)] = i;
    }
    Dataset all = Dataset::dense(std::move(features), std::move(labels), spec.num_classes);
    return {all.subset(train_rows), all.subset(test_rows)};
}

Dataset normalize_columns(const Dataset& data) {
    if (data.is_sparse()) {
        SparseRowMatrix m = data.sparse_features();
        Vector scale = Vector::Zero(data.p());
        for (Index k = 0; k < m.outerSize(); ++k) {
            for (SparseRowMatrix::InnerIterator it(m, k); it; ++it) {
                scale(it.col()) = std::max(scale(it.col()), std::abs(it.value()));
            }
        }
        for (Index k = 0; k < m.outerSize(); ++k) {
            for (SparseRowMatrix::InnerIterator it(m, k); it; ++it) {
                if (scale(it.col()) > 0.0) it.valueRef() /= scale(it.col());
            }
        }
        Dataset out = Dataset::sparse(std::move(m), data.labels(), data.num_classes());
        out.set_label_values(data.label_values());
        out.set_normalized(true);
        return out;
    }
    RowMatrix m = data.dense_features();
    for (Index j = 0; j < m.cols(); ++j) {
        const double scale = m.col(j).cwiseAbs().maxCoeff();
        if (scale > 0.0) m.col(j) /= scale;
    }
    Dataset out = Dataset::dense(std::move(m), data.labels(), data.num_classes());
    out.set_label_values(data.label_values());
    out.set_normalized(true);
    return out;
}

}  // namespace nadmm
