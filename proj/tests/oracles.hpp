#pragma once

// Test-only oracles. Everything here is deliberately written as plain loops,
// independent of the library's compute paths, so the tests check against a
// second derivation rather than the implementation itself.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <motenc/tensor.hpp>

namespace oracles {

inline motenc::Tensor naive_matmul(const motenc::Tensor& a, const motenc::Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  motenc::Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a(i, kk) * b(kk, j);
      c(i, j) = acc;
    }
  }
  return c;
}

inline motenc::Tensor random_tensor(motenc::Shape shape, motenc::SeededRng& rng,
                                    double scale = 1.0) {
  motenc::Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(const motenc::Tensor& a, const motenc::Tensor& b,
                          double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, rel_err(a[i], b[i], floor));
  }
  return worst;
}

inline double max_abs_diff(const motenc::Tensor& a, const motenc::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

// Central finite differences of a scalar function w.r.t. every entry of a
// tensor that the function reads through a reference.
inline motenc::Tensor finite_diff(motenc::Tensor& target,
                                  const std::function<double()>& scalar_fn,
                                  double h = 1e-5) {
  motenc::Tensor grad(target.shape());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double orig = target[i];
    target[i] = orig + h;
    const double up = scalar_fn();
    target[i] = orig - h;
    const double down = scalar_fn();
    target[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Direct-loop temporal convolution: valid positions, stride 1, filters
// spanning the full (coordinate, joint) slab.
inline motenc::Tensor loop_conv_forward(const motenc::Tensor& filters,
                                        const motenc::Tensor& bias,
                                        const motenc::Tensor& window,
                                        std::size_t width) {
  const std::size_t batch = window.dim(0), joints = window.dim(2), dt = window.dim(3);
  const std::size_t filters_n = filters.dim(0);
  const std::size_t positions = dt - width + 1;
  motenc::Tensor out({batch, filters_n, positions});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < filters_n; ++n) {
      for (std::size_t p = 0; p < positions; ++p) {
        double acc = bias(n);
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t j = 0; j < joints; ++j) {
            for (std::size_t w = 0; w < width; ++w) {
              acc += filters(n, (c * joints + j) * width + w) * window(b, c, j, p + w);
            }
          }
        }
        out(b, n, p) = acc;
      }
    }
  }
  return out;
}

}  // namespace oracles
