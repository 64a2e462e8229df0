#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "abr/error.hpp"

namespace abr {

/// Dense row-major matrix of doubles; rows are the samples.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        for (auto r : rows) push_row(std::span<const double>(r.begin(), r.size()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
    const std::vector<double>& data() const noexcept { return data_; }

    void push_row(std::span<const double> r) {
        if (rows_ == 0 && data_.empty()) cols_ = r.size();
        if (r.size() != cols_) throw Error("Matrix::push_row: row length mismatch");
        data_.insert(data_.end(), r.begin(), r.end());
        ++rows_;
    }

    /// Rows selected by `indices`, in that order.
    Matrix select_rows(std::span<const std::size_t> indices) const {
        Matrix out(indices.size(), cols_);
        for (std::size_t k = 0; k < indices.size(); ++k) std::ranges::copy(row(indices[k]), out.row(k).begin());
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace abr
