#include "agrn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace agrn {
namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                              to_string(b));
}

// Gradient buffer of input i, or nullptr when that input needs no gradient.
double* grad_of(detail::Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

const std::vector<double>& value_of(detail::Node& self, std::size_t i) { return self.inputs[i]->value; }

// True when `suffix` equals the trailing axes of `full`.
bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), full.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

bool is_prefix(const Shape& full, const Shape& prefix) {
  if (prefix.size() > full.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), full.begin());
}

enum class Binary { add, sub, mul };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  if (!is_suffix(a.shape(), b.shape())) shape_error(name, a.shape(), b.shape());
  const std::size_t inner = b.numel();
  const std::size_t outer = inner == 0 ? 0 : a.numel() / inner;
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t k = o * inner + i;
      switch (kind) {
        case Binary::add: out[k] = av[k] + bv[i]; break;
        case Binary::sub: out[k] = av[k] - bv[i]; break;
        case Binary::mul: out[k] = av[k] * bv[i]; break;
      }
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [outer, inner, kind](detail::Node& self) {
    const auto& g = self.grad;
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = o * inner + i;
        switch (kind) {
          case Binary::add:
            if (ga) ga[k] += g[k];
            if (gb) gb[i] += g[k];
            break;
          case Binary::sub:
            if (ga) ga[k] += g[k];
            if (gb) gb[i] -= g[k];
            break;
          case Binary::mul:
            if (ga) ga[k] += g[k] * bv[i];
            if (gb) gb[i] += g[k] * av[k];
            break;
        }
      }
    }
  });
}

struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.numel() / k;
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double arp = av[r * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t c = 0; c < n; ++c) o[c] += arp * brow[c];
    }
  }
  Shape shape = a.shape();
  shape.back() = n;
  return Tensor::make_result(std::move(shape), std::move(out), {a, b}, [rows, k, n](detail::Node& self) {
    const auto& g = self.grad;
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n; ++c) acc += g[r * n + c] * bv[p * n + c];
          ga[r * k + p] += acc;
        }
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < k; ++p) {
          const double arp = av[r * k + p];
          for (std::size_t c = 0; c < n; ++c) gb[p * n + c] += arp * g[r * n + c];
        }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, Binary::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, Binary::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, Binary::mul, "mul"); }

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (!is_prefix(a.shape(), s.shape())) shape_error("scale_by", a.shape(), s.shape());
  const std::size_t outer = s.numel();
  const std::size_t inner = outer == 0 ? 0 : a.numel() / outer;
  const auto av = a.values();
  const auto sv = s.values();
  std::vector<double> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = av[o * inner + i] * sv[o];
  return Tensor::make_result(a.shape(), std::move(out), {a, s}, [outer, inner](detail::Node& self) {
    const auto& g = self.grad;
    const auto& av = value_of(self, 0);
    const auto& sv = value_of(self, 1);
    double* ga = grad_of(self, 0);
    double* gs = grad_of(self, 1);
    for (std::size_t o = 0; o < outer; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = o * inner + i;
        if (ga) ga[k] += g[k] * sv[o];
        acc += g[k] * av[k];
      }
      if (gs) gs[o] += acc;
    }
  });
}

Tensor scalar_mul(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= c;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [c](detail::Node& self) {
    if (double* ga = grad_of(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) ga[k] += c * self.grad[k];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = std::tanh(v);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    if (double* ga = grad_of(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k)
        ga[k] += self.grad[k] * (1.0 - self.value[k] * self.value[k]);
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = v >= 0.0 ? v : slope * v;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [slope](detail::Node& self) {
    const auto& x = value_of(self, 0);
    if (double* ga = grad_of(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k)
        ga[k] += self.grad[k] * (x[k] >= 0.0 ? 1.0 : slope);
  });
}

Tensor softmax(const Tensor& a, std::size_t axis, MaskView mask) {
  if (axis >= a.rank()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                                to_string(a.shape()));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  if (!mask.empty() && mask.size() != s.length) {
    throw std::invalid_argument("softmax: mask of length " + std::to_string(mask.size()) +
                                " for axis of length " + std::to_string(s.length));
  }
  std::vector<bool> masked(s.length, false);
  for (std::size_t i = 0; i < mask.size(); ++i) masked[i] = mask[i] != 0;

  const auto x = a.values();
  std::vector<double> out(a.numel(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto at = [&](std::size_t l) { return (o * s.length + l) * s.inner + in; };
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.length; ++l)
        if (!masked[l]) peak = std::max(peak, x[at(l)]);
      if (peak == -std::numeric_limits<double>::infinity()) continue;
      double total = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        if (masked[l]) continue;
        out[at(l)] = std::exp(x[at(l)] - peak);
        total += out[at(l)];
      }
      for (std::size_t l = 0; l < s.length; ++l) out[at(l)] /= total;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        auto at = [&](std::size_t l) { return (o * s.length + l) * s.inner + in; };
        double dot = 0.0;
        for (std::size_t l = 0; l < s.length; ++l) dot += g[at(l)] * y[at(l)];
        for (std::size_t l = 0; l < s.length; ++l) ga[at(l)] += y[at(l)] * (g[at(l)] - dot);
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make_result(Shape{}, {total}, {a}, [](detail::Node& self) {
    if (double* ga = grad_of(self, 0)) {
      const std::size_t n = self.inputs[0]->value.size();
      for (std::size_t k = 0; k < n; ++k) ga[k] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  return scalar_mul(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](detail::Node& self) {
    if (double* ga = grad_of(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) ga[k] += self.grad[k];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for shape " +
                                to_string(first));
  }
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> lengths;
  for (const Tensor& p : parts) {
    const Shape& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = i == axis || ps[i] == first[i];
    if (!ok) shape_error("concat", first, ps);
    lengths.push_back(ps[axis]);
    shape[axis] += ps[axis];
  }
  const AxisSplit s = split_at(shape, axis);
  std::vector<double> out(numel(shape));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto v = parts[i].values();
    const std::size_t block = lengths[i] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(v.begin() + o * block, block, out.begin() + o * s.length * s.inner + offset);
    offset += block;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result(std::move(shape), std::move(out), std::move(inputs),
                             [s, lengths](detail::Node& self) {
                               std::size_t offset = 0;
                               for (std::size_t i = 0; i < lengths.size(); ++i) {
                                 const std::size_t block = lengths[i] * s.inner;
                                 if (double* gi = grad_of(self, i)) {
                                   for (std::size_t o = 0; o < s.outer; ++o)
                                     for (std::size_t k = 0; k < block; ++k)
                                       gi[o * block + k] += self.grad[o * s.length * s.inner + offset + k];
                                 }
                                 offset += block;
                               }
                             });
}

Tensor node_mix(const Matrix& m, const Tensor& x) {
  if (x.rank() != 3 || !m.is_square() || m.rows() != x.dim(1)) {
    throw std::invalid_argument("node_mix: matrix " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + " incompatible with shape " +
                                to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), n = x.dim(1), f = x.dim(2);
  const auto xv = x.values();
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = xv.data() + b * n * f;
    double* ob = out.data() + b * n * f;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double mij = m(i, j);
        if (mij == 0.0) continue;
        for (std::size_t c = 0; c < f; ++c) ob[i * f + c] += mij * xb[j * f + c];
      }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m, batch, n, f](detail::Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gb = self.grad.data() + b * n * f;
      double* xb = gx + b * n * f;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double mij = m(i, j);
          if (mij == 0.0) continue;
          for (std::size_t c = 0; c < f; ++c) xb[j * f + c] += mij * gb[i * f + c];
        }
    }
  });
}

BatchNormState BatchNormState::fresh(std::size_t features) {
  return BatchNormState{std::vector<double>(features, 0.0), std::vector<double>(features, 1.0)};
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  const BatchNormOptions& options) {
  if (x.rank() < 2) throw std::invalid_argument("batch_norm: input needs a batch axis, got " + to_string(x.shape()));
  const Shape feature_shape(x.shape().begin() + 1, x.shape().end());
  if (gamma.shape() != feature_shape) shape_error("batch_norm", x.shape(), gamma.shape());
  if (beta.shape() != feature_shape) shape_error("batch_norm", x.shape(), beta.shape());
  const std::size_t batch = x.dim(0);
  const std::size_t d = numel(feature_shape);
  if (state.running_mean.size() != d || state.running_var.size() != d) {
    throw std::invalid_argument("batch_norm: running statistics sized " +
                                std::to_string(state.running_mean.size()) + " for " +
                                std::to_string(d) + " features");
  }
  if (batch == 0) throw std::invalid_argument("batch_norm: empty batch");

  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
  if (options.training) {
    std::vector<double> var(d, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) mean[j] += xv[b * d + j];
    for (double& m : mean) m /= static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = xv[b * d + j] - mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      var[j] /= static_cast<double>(batch);
      inv_std[j] = 1.0 / std::sqrt(var[j] + options.eps);
      state.running_mean[j] = options.momentum * state.running_mean[j] + (1.0 - options.momentum) * mean[j];
      state.running_var[j] = options.momentum * state.running_var[j] + (1.0 - options.momentum) * var[j];
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] = state.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + options.eps);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = b * d + j;
      xhat[k] = (xv[k] - mean[j]) * inv_std[j];
      out[k] = gv[j] * xhat[k] + bv[j];
    }

  const bool training = options.training;
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [batch, d, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& g = self.grad;
        const auto& gamma_v = value_of(self, 1);
        double* gx = grad_of(self, 0);
        double* ggamma = grad_of(self, 1);
        double* gbeta = grad_of(self, 2);
        const double n = static_cast<double>(batch);
        for (std::size_t j = 0; j < d; ++j) {
          double sum_g = 0.0, sum_g_xhat = 0.0;
          for (std::size_t b = 0; b < batch; ++b) {
            sum_g += g[b * d + j];
            sum_g_xhat += g[b * d + j] * xhat[b * d + j];
          }
          if (ggamma) ggamma[j] += sum_g_xhat;
          if (gbeta) gbeta[j] += sum_g;
          if (!gx) continue;
          const double scale = gamma_v[j] * inv_std[j];
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t k = b * d + j;
            if (training) {
              gx[k] += scale * (g[k] - sum_g / n - xhat[k] * sum_g_xhat / n);
            } else {
              gx[k] += scale * g[k];
            }
          }
        }
      });
}

Tensor masked_pair_max(const Tensor& x, MaskView fake) {
  if (x.rank() != 3) throw std::invalid_argument("masked_pair_max: expected (batch, nodes, features), got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), nodes = x.dim(1), f = x.dim(2);
  if (nodes % 2 != 0) {
    throw std::invalid_argument("masked_pair_max: node dimension " + std::to_string(nodes) + " is odd");
  }
  if (fake.size() != nodes) {
    throw std::invalid_argument("masked_pair_max: mask of length " + std::to_string(fake.size()) +
                                " for " + std::to_string(nodes) + " nodes");
  }
  const std::size_t half = nodes / 2;
  const auto xv = x.values();
  std::vector<double> out(batch * half * f, 0.0);
  // Flat index of the winning input element, or -1 when both slots are fake.
  std::vector<std::ptrdiff_t> winner(out.size(), -1);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < half; ++j)
      for (std::size_t c = 0; c < f; ++c) {
        const std::size_t lo = (b * nodes + 2 * j) * f + c;
        const std::size_t hi = (b * nodes + 2 * j + 1) * f + c;
        const std::size_t o = (b * half + j) * f + c;
        const bool lo_ok = fake[2 * j] == 0;
        const bool hi_ok = fake[2 * j + 1] == 0;
        std::ptrdiff_t w = -1;
        if (lo_ok && hi_ok) {
          w = static_cast<std::ptrdiff_t>(xv[lo] >= xv[hi] ? lo : hi);
        } else if (lo_ok) {
          w = static_cast<std::ptrdiff_t>(lo);
        } else if (hi_ok) {
          w = static_cast<std::ptrdiff_t>(hi);
        }
        winner[o] = w;
        if (w >= 0) out[o] = xv[static_cast<std::size_t>(w)];
      }
  return Tensor::make_result(Shape{batch, half, f}, std::move(out), {x},
                             [winner = std::move(winner)](detail::Node& self) {
                               double* gx = grad_of(self, 0);
                               if (!gx) return;
                               for (std::size_t o = 0; o < winner.size(); ++o)
                                 if (winner[o] >= 0) gx[winner[o]] += self.grad[o];
                             });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("softmax_cross_entropy: expected (batch, classes), got " + to_string(logits.shape()));
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(batch));
  }
  if (batch == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  const auto z = logits.values();
  std::vector<double> probs(logits.numel());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                  " outside [0," + std::to_string(classes) + ")");
    }
    const double* row = z.data() + b * classes;
    const double peak = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - peak);
    const double log_total = std::log(total) + peak;
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - log_total);
    loss += log_total - row[label];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> owned(labels.begin(), labels.end());
  return Tensor::make_result(Shape{}, {loss}, {logits},
                             [batch, classes, probs = std::move(probs), owned = std::move(owned)](detail::Node& self) {
                               double* gz = grad_of(self, 0);
                               if (!gz) return;
                               const double scale = self.grad[0] / static_cast<double>(batch);
                               for (std::size_t b = 0; b < batch; ++b)
                                 for (std::size_t c = 0; c < classes; ++c) {
                                   const double target = static_cast<int>(c) == owned[b] ? 1.0 : 0.0;
                                   gz[b * classes + c] += scale * (probs[b * classes + c] - target);
                                 }
                             });
}

}  // namespace agrn
