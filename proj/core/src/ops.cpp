// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "astroseq/errors.hpp"

namespace astroseq::ad {
namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  require_same_shape(a.value(), b.value(), op);
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.value().shape_string() + " * " + b.value().shape_string());
  }
  return a.tape().record(astroseq::matmul(a.value(), b.value()), {a, b},
                         [](const BackwardArgs& g) {
                           if (g.in_grad[0]) matmul_a_bt_accumulate(g.grad_out, *g.in[1], *g.in_grad[0]);
                           if (g.in_grad[1]) matmul_at_b_accumulate(*g.in[0], g.grad_out, *g.in_grad[1]);
                         });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [](const BackwardArgs& g) {
    if (g.in_grad[0]) *g.in_grad[0] += g.grad_out;
    if (g.in_grad[1]) *g.in_grad[1] += g.grad_out;
  });
}

Var subtract(Var a, Var b) {
  same_shape(a, b, "subtract");
  return a.tape().record(a.value() - b.value(), {a, b}, [](const BackwardArgs& g) {
    if (g.in_grad[0]) *g.in_grad[0] += g.grad_out;
    if (g.in_grad[1]) *g.in_grad[1] -= g.grad_out;
  });
}

Var hadamard(Var a, Var b) {
  same_shape(a, b, "hadamard");
  return a.tape().record(astroseq::hadamard(a.value(), b.value()), {a, b},
                         [](const BackwardArgs& g) {
                           if (g.in_grad[0]) *g.in_grad[0] += astroseq::hadamard(g.grad_out, *g.in[1]);
                           if (g.in_grad[1]) *g.in_grad[1] += astroseq::hadamard(g.grad_out, *g.in[0]);
                         });
}

Var scalar_mul(Var a, double scalar) {
  return a.tape().record(a.value() * scalar, {a}, [scalar](const BackwardArgs& g) {
    auto dst = g.in_grad[0]->data();
    auto src = g.grad_out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scalar * src[i];
  });
}

Var transpose(Var a) {
  return a.tape().record(astroseq::transpose(a.value()), {a}, [](const BackwardArgs& g) {
    *g.in_grad[0] += astroseq::transpose(g.grad_out);
  });
}

Var row_sum(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out(i, 0) = s;
  }
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < dx.rows(); ++i)
      for (double& v : dx.row(i)) v += g.grad_out(i, 0);
  });
}

Var col_sum(Var a) {
  const Matrix& x = a.value();
  Matrix out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < dx.rows(); ++i)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) += g.grad_out(0, j);
  });
}

Var elu_plus_one(Var a) {
  Matrix out = map(a.value(), [](double x) { return x >= 0.0 ? x + 1.0 : std::exp(x); });
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    auto x = g.in[0]->data();
    auto y = g.out.data();
    auto go = g.grad_out.data();
    auto dx = g.in_grad[0]->data();
    // d/dx = 1 for x >= 0, exp(x) = y otherwise
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += go[i] * (x[i] >= 0.0 ? 1.0 : y[i]);
  });
}

Var power(Var a, double exponent) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) {
      throw DomainError("power: base must be strictly positive, got " + std::to_string(v));
    }
  }
  Matrix out = map(a.value(), [exponent](double x) { return std::pow(x, exponent); });
  return a.tape().record(std::move(out), {a}, [exponent](const BackwardArgs& g) {
    auto x = g.in[0]->data();
    auto go = g.grad_out.data();
    auto dx = g.in_grad[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      dx[i] += go[i] * exponent * std::pow(x[i], exponent - 1.0);
  });
}

Var reciprocal(Var a, double floor) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) {
      throw DomainError("reciprocal: input must be strictly positive, got " + std::to_string(v));
    }
  }
  Matrix out = map(a.value(), [floor](double x) { return 1.0 / std::max(x, floor); });
  return a.tape().record(std::move(out), {a}, [floor](const BackwardArgs& g) {
    auto x = g.in[0]->data();
    auto go = g.grad_out.data();
    auto dx = g.in_grad[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (x[i] >= floor) dx[i] -= go[i] / (x[i] * x[i]);
    }
  });
}

Var broadcast_col(Var a, std::size_t cols) {
  if (a.cols() != 1) throw ShapeError("broadcast_col expects N x 1, got " + a.value().shape_string());
  const Matrix& x = a.value();
  Matrix out(x.rows(), cols);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (double& v : out.row(i)) v = x(i, 0);
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < dx.rows(); ++i) {
      double s = 0.0;
      for (double v : g.grad_out.row(i)) s += v;
      dx(i, 0) += s;
    }
  });
}

Var broadcast_row(Var a, std::size_t rows) {
  if (a.rows() != 1) throw ShapeError("broadcast_row expects 1 x d, got " + a.value().shape_string());
  const Matrix& x = a.value();
  Matrix out(rows, x.cols());
  for (std::size_t i = 0; i < rows; ++i)
    std::copy(x.row(0).begin(), x.row(0).end(), out.row(i).begin());
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < g.grad_out.rows(); ++i)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(0, j) += g.grad_out(i, j);
  });
}

Var layer_norm(Var a, double eps) {
  const Matrix& x = a.value();
  const std::size_t n = x.rows(), d = x.cols();
  if (d == 0) throw ShapeError("layer_norm on zero-width input");
  Matrix out(n, d);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = (r[j] - mean) * inv_std[i];
  }
  return a.tape().record(std::move(out), {a}, [inv_std = std::move(inv_std)](const BackwardArgs& g) {
    const Matrix& y = g.out;
    Matrix& dx = *g.in_grad[0];
    const std::size_t d = y.cols();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        mean_g += g.grad_out(i, j);
        mean_gy += g.grad_out(i, j) * y(i, j);
      }
      mean_g /= static_cast<double>(d);
      mean_gy /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j)
        dx(i, j) += inv_std[i] * (g.grad_out(i, j) - mean_g - y(i, j) * mean_gy);
    }
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) z += (out(i, j) = std::exp(r[j] - mx));
    for (double& v : out.row(i)) v /= z;
  }
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    const Matrix& y = g.out;
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g.grad_out(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) += y(i, j) * (g.grad_out(i, j) - dot);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& x = logits.value();
  if (labels.size() != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(x.rows()) + " rows");
  }
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= x.cols()) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " out of range");
    }
    auto r = x.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < r.size(); ++j) probs(i, j) = std::exp(r[j] - log_z);
    loss += log_z - r[static_cast<std::size_t>(label)];
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  std::vector<int> saved(labels.begin(), labels.end());
  return logits.tape().record(
      Matrix(1, 1, loss * inv_n), {logits},
      [probs = std::move(probs), saved = std::move(saved), inv_n](const BackwardArgs& g) {
        Matrix& dx = *g.in_grad[0];
        const double go = g.grad_out(0, 0) * inv_n;
        for (std::size_t i = 0; i < probs.rows(); ++i) {
          for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double onehot = static_cast<int>(j) == saved[i] ? 1.0 : 0.0;
            dx(i, j) += go * (probs(i, j) - onehot);
          }
        }
      });
}

Var mse(Var a, Var b) {
  same_shape(a, b, "mse");
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  auto ad = a.value().data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < ad.size(); ++i) s += (ad[i] - bd[i]) * (ad[i] - bd[i]);
  return a.tape().record(Matrix(1, 1, s / n), {a, b}, [n](const BackwardArgs& g) {
    auto x = g.in[0]->data();
    auto y = g.in[1]->data();
    const double scale = 2.0 * g.grad_out(0, 0) / n;
    if (g.in_grad[0]) {
      auto dx = g.in_grad[0]->data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += scale * (x[i] - y[i]);
    }
    if (g.in_grad[1]) {
      auto dy = g.in_grad[1]->data();
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] -= scale * (x[i] - y[i]);
    }
  });
}

Var gelu(Var a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double c = 0.044715;
  Matrix out = map(a.value(), [](double x) {
    return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x)));
  });
  return a.tape().record(std::move(out), {a}, [](const BackwardArgs& g) {
    auto x = g.in[0]->data();
    auto go = g.grad_out.data();
    auto dx = g.in_grad[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double u = k * (x[i] + c * x[i] * x[i] * x[i]);
      const double t = std::tanh(u);
      const double du = k * (1.0 + 3.0 * c * x[i] * x[i]);
      dx[i] += go[i] * (0.5 * (1.0 + t) + 0.5 * x[i] * (1.0 - t * t) * du);
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (begin + count > x.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of " + x.shape_string());
  }
  Matrix out(count, x.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(x.row(begin + i).begin(), x.row(begin + i).end(), out.row(i).begin());
  return a.tape().record(std::move(out), {a}, [begin](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < g.grad_out.rows(); ++i)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(begin + i, j) += g.grad_out(i, j);
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (begin + count > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of " + x.shape_string());
  }
  Matrix out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return a.tape().record(std::move(out), {a}, [begin](const BackwardArgs& g) {
    Matrix& dx = *g.in_grad[0];
    for (std::size_t i = 0; i < g.grad_out.rows(); ++i)
      for (std::size_t j = 0; j < g.grad_out.cols(); ++j) dx(i, begin + j) += g.grad_out(i, j);
  });
}

Var concat_rows(Var top, Var bottom) {
  if (top.cols() != bottom.cols()) {
    throw ShapeError("concat_rows: " + top.value().shape_string() + " over " +
                     bottom.value().shape_string());
  }
  const Matrix& a = top.value();
  const Matrix& b = bottom.value();
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  const std::size_t split = a.size();
  return top.tape().record(std::move(out), {top, bottom}, [split](const BackwardArgs& g) {
    auto go = g.grad_out.data();
    if (g.in_grad[0]) {
      auto d = g.in_grad[0]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i];
    }
    if (g.in_grad[1]) {
      auto d = g.in_grad[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[split + i];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& x = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, offset + j) = x(i, j);
    offset += x.cols();
  }
  return parts[0].tape().record(std::move(out), parts, [](const BackwardArgs& g) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < g.in.size(); ++k) {
      const std::size_t w = g.in[k]->cols();
      if (g.in_grad[k]) {
        Matrix& d = *g.in_grad[k];
        for (std::size_t i = 0; i < d.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) d(i, j) += g.grad_out(i, off + j);
      }
      off += w;
    }
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& t = table.value();
  Matrix out(ids.size(), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= t.rows()) {
      throw InvalidArgument("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                            std::to_string(t.rows()) + " rows");
    }
    auto src = t.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return table.tape().record(std::move(out), {table}, [saved = std::move(saved)](const BackwardArgs& g) {
    Matrix& dt = *g.in_grad[0];
    for (std::size_t i = 0; i < saved.size(); ++i) {
      auto dst = dt.row(static_cast<std::size_t>(saved[i]));
      auto src = g.grad_out.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  });
}

}  // namespace astroseq::ad
