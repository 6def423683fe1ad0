#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace symdyn {

/// Minimal row-major dense matrix. Just enough surface for count tables,
/// emission/transition matrices, and their serialization; not a linear
/// algebra type.
template <typename T>
class matrix {
public:
    matrix() = default;

    matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw error(errc::invalid_argument, "matrix: data size does not match dimensions");
    }

    /// Convenience for small literal fixtures: rows of equal length.
    static matrix from_rows(const std::vector<std::vector<T>>& rows) {
        if (rows.empty()) return {};
        matrix m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_)
                throw error(errc::invalid_argument, "matrix: ragged rows");
            for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<T> row(std::size_t i) noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    [[nodiscard]] std::span<const T> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    [[nodiscard]] std::vector<T>& data() noexcept { return data_; }
    [[nodiscard]] const std::vector<T>& data() const noexcept { return data_; }

    bool operator==(const matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using dmatrix = matrix<double>;
using cmatrix = matrix<std::uint64_t>;

} // namespace symdyn
