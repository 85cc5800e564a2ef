#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace fedishc {

// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Grid identity(std::size_t n) {
    Grid g(n, n);
    for (std::size_t i = 0; i < n; ++i) g(i, i) = T{1};
    return g;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  const std::vector<T>& data() const noexcept { return data_; }

  // Rows as nested vectors, handy for JSON export.
  std::vector<std::vector<T>> nested() const {
    std::vector<std::vector<T>> out(rows_, std::vector<T>(cols_));
    for (std::size_t r = 0; r < rows_; ++r)
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_), cols_, out[r].begin());
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;

}  // namespace fedishc
