#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "motenc/error.hpp"

namespace motenc {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major array of doubles, 1 to 4 dimensions. Values are plain;
// there is no broadcasting and no views — the index math in the backward
// passes stays explicit.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(element_count(shape_), 0.0);
  }

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (element_count(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor full(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> vals;
    vals.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix initializer");
      vals.insert(vals.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(vals));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  std::size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return {data_.data(), data_.size()}; }
  std::span<const double> values() const { return {data_.data(), data_.size()}; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Same data, different shape; element counts must agree.
  Tensor reshaped(Shape new_shape) const {
    if (element_count(new_shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                       shape_str(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  static std::size_t element_count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  void validate_shape() const {
    if (shape_.empty() || shape_.size() > 4) {
      throw ShapeError("tensor rank must be 1..4, got " + shape_str(shape_));
    }
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape_));
    }
  }

  void require_same_shape(const Tensor& o, const char* op) const {
    if (!same_shape(o)) {
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(shape_) +
                       " vs " + shape_str(o.shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {

// Core kernel: C(+)= A * B, all row-major. The i-k-j order keeps the inner
// loop over contiguous rows of B and C so it vectorizes with plain -O3.
inline void matmul_kernel(double* c, const double* a, const double* b,
                          std::size_t m, std::size_t k, std::size_t n,
                          bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline void transpose_into(double* dst, const double* src, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

inline void require_matrix(const Tensor& t, const char* who) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(who) + ": expected a matrix, got " +
                     shape_str(t.shape()));
  }
}

}  // namespace detail

// Standard matrix product, no implicit broadcasting.
inline void matmul_into(Tensor& c, const Tensor& a, const Tensor& b,
                        bool accumulate = false) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  if (c.rank() != 2 || c.dim(0) != a.dim(0) || c.dim(1) != b.dim(1)) {
    throw ShapeError("matmul: bad output shape " + shape_str(c.shape()));
  }
  detail::matmul_kernel(c.data(), a.data(), b.data(), a.dim(0), a.dim(1),
                        b.dim(1), accumulate);
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  detail::matmul_kernel(c.data(), a.data(), b.data(), a.dim(0), a.dim(1),
                        b.dim(1), true);
  return c;
}

// C(+)= A * B^T. B is transposed into scratch first so the kernel keeps its
// vector-friendly layout; the reduction order matches plain matmul.
inline void matmul_nt_into(Tensor& c, const Tensor& a, const Tensor& b,
                           bool accumulate = false) {
  detail::require_matrix(a, "matmul_nt");
  detail::require_matrix(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> bt(b.size());
  detail::transpose_into(bt.data(), b.data(), b.dim(0), b.dim(1));
  detail::matmul_kernel(c.data(), a.data(), bt.data(), a.dim(0), a.dim(1),
                        b.dim(0), accumulate);
}

inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(0)});
  matmul_nt_into(c, a, b, true);
  return c;
}

// C(+)= A^T * B.
inline void matmul_tn_into(Tensor& c, const Tensor& a, const Tensor& b,
                           bool accumulate = false) {
  detail::require_matrix(a, "matmul_tn");
  detail::require_matrix(b, "matmul_tn");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_tn: inner dimensions disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  double* cp = c.data();
  if (!accumulate) std::fill(cp, cp + k * n, 0.0);
  const double* ap = a.data();
  const double* bp = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = ap + i * k;
    const double* brow = bp + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      double* crow = cp + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(1), b.dim(1)});
  matmul_tn_into(c, a, b, true);
  return c;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_matrix(a, "transpose");
  Tensor t({a.dim(1), a.dim(0)});
  detail::transpose_into(t.data(), a.data(), a.dim(0), a.dim(1));
  return t;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("hadamard: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

inline double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

inline double mean(const Tensor& t) { return sum(t) / double(t.size()); }

// Deterministic random source. mt19937_64 has a fully specified output
// stream; the distributions are hand-rolled on top of it because the
// standard library ones are implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw ParamError("uniform_below: n must be positive");
    unsigned __int128 m = (unsigned __int128)next_u64() * n;
    auto lo = (std::uint64_t)m;
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = (unsigned __int128)next_u64() * n;
        lo = (std::uint64_t)m;
      }
    }
    return (std::uint64_t)(m >> 64);
  }

  // Box-Muller with the usual spare caching.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = (std::size_t)uniform_below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p);
    return p;
  }

  // k distinct values from [0, n), ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t k, std::size_t n) {
    if (k > n) throw ParamError("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + (std::size_t)uniform_below(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // Independent stream for a sub-task; splitmix64 over (seed, tag).
  SeededRng derive(std::uint64_t tag) const {
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z = z ^ (z >> 31);
    return SeededRng(z);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sparse Gaussian weight init: every column gets exactly `nonzeros_per_unit`
// entries at distinct rows, values N(0, std^2), everything else exactly zero.
inline Tensor sample_sparse_gaussian(SeededRng& rng, std::size_t fan_in,
                                     std::size_t fan_out,
                                     std::size_t nonzeros_per_unit, double std) {
  if (nonzeros_per_unit < 1 || nonzeros_per_unit > fan_in) {
    throw ParamError("sample_sparse_gaussian: nonzeros_per_unit " +
                     std::to_string(nonzeros_per_unit) + " outside [1, " +
                     std::to_string(fan_in) + "]");
  }
  Tensor w({fan_in, fan_out});
  for (std::size_t col = 0; col < fan_out; ++col) {
    const auto rows = rng.sample_without_replacement(nonzeros_per_unit, fan_in);
    for (std::size_t r : rows) w(r, col) = rng.normal(0.0, std);
  }
  return w;
}

}  // namespace motenc
