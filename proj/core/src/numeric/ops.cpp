#include "cadd/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cadd/errors.hpp"

namespace cadd::numeric {

using detail::Node;

namespace {

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

// Splits a shape around `axis` into outer x length x inner strides.
struct AxisLayout {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisLayout layout_for(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

Tensor softmax_impl(const Tensor& x, std::size_t axis, const std::vector<bool>* mask) {
  const AxisLayout l = layout_for(x.shape(), axis);
  if (mask) {
    if (mask->size() != l.length) throw ShapeError("masked_softmax: mask length mismatch");
    if (std::none_of(mask->begin(), mask->end(), [](bool b) { return b; })) {
      throw ValidationError("masked_softmax: every position is masked");
    }
  }
  auto valid = [mask](std::size_t k) { return !mask || (*mask)[k]; };
  auto xv = x.values();
  std::vector<double> out(xv.size(), 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.length * l.inner + in;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < l.length; ++k) {
        if (valid(k)) mx = std::max(mx, xv[base + k * l.inner]);
      }
      double total = 0.0;
      for (std::size_t k = 0; k < l.length; ++k) {
        if (!valid(k)) continue;
        const double e = std::exp(xv[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < l.length; ++k) out[base + k * l.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [l](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.length * l.inner + in;
        double weighted = 0.0;
        for (std::size_t k = 0; k < l.length; ++k) {
          weighted += self.grad[base + k * l.inner] * self.value[base + k * l.inner];
        }
        for (std::size_t k = 0; k < l.length; ++k) {
          const std::size_t i = base + k * l.inner;
          p.grad[i] += self.value[i] * (self.grad[i] - weighted);
        }
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
  });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary(
      x, [=](double v) { return scale * v + shift; }, [=](double, double) { return scale; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw ValidationError("log of non-positive value");
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [=](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [=](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto ra = a.rank(), rb = b.rank();
  auto av = a.values(), bv = b.values();
  if (ra == 2 && rb == 2) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* row = out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double s = av[i * k + p];
        if (s == 0.0) continue;
        const double* brow = bv.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
      }
    }
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
      Node& pa = parent(self, 0);
      Node& pb = parent(self, 1);
      const double* g = self.grad.data();
      if (pa.requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = pb.value.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * brow[j];
            pa.grad[i * k + p] += acc;
          }
        }
      }
      if (pb.requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double s = pa.value[i * k + p];
            if (s == 0.0) continue;
            double* gb = pb.grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gb[j] += s * g[i * n + j];
          }
        }
      }
    });
  }
  if (ra == 2 && rb == 1) {
    const std::size_t m = a.dim(0), k = a.dim(1);
    if (b.dim(0) != k) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = av.data() + i * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * bv[p];
      out[i] = acc;
    }
    return make_result({m}, std::move(out), {a, b}, [m, k](Node& self) {
      Node& pa = parent(self, 0);
      Node& pb = parent(self, 1);
      for (std::size_t i = 0; i < m; ++i) {
        const double g = self.grad[i];
        if (pa.requires_grad) {
          double* ga = pa.grad.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) ga[p] += g * pb.value[p];
        }
        if (pb.requires_grad) {
          const double* arow = pa.value.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) pb.grad[p] += g * arow[p];
        }
      }
    });
  }
  if (ra == 1 && rb == 2) {
    const std::size_t k = a.dim(0), n = b.dim(1);
    if (b.dim(0) != k) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += s * brow[j];
    }
    return make_result({n}, std::move(out), {a, b}, [k, n](Node& self) {
      Node& pa = parent(self, 0);
      Node& pb = parent(self, 1);
      for (std::size_t p = 0; p < k; ++p) {
        if (pa.requires_grad) {
          const double* brow = pb.value.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += brow[j] * self.grad[j];
          pa.grad[p] += acc;
        }
        if (pb.requires_grad) {
          const double s = pa.value[p];
          double* gb = pb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += s * self.grad[j];
        }
      }
    });
  }
  throw ShapeError("matmul: unsupported ranks " + shape_string(a.shape()) + " x " +
                   shape_string(b.shape()));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw ShapeError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  auto xv = x.values();
  return make_result(std::move(shape), std::vector<double>(xv.begin(), xv.end()), {x},
                     [](Node& self) {
                       Node& p = parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p.grad[i] += self.grad[i];
                     });
}

Tensor concat(std::span<const Tensor> parts) {
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& t : parts) {
    offsets.push_back(out.size());
    auto v = t.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  const std::size_t n = out.size();
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({n}, std::move(out), std::move(parents), [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[offsets[k] + i];
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.size()) throw IndexError("slice out of range");
  auto xv = x.values();
  return make_result({end - begin}, std::vector<double>(xv.begin() + begin, xv.begin() + end),
                     {x}, [begin](Node& self) {
                       Node& p = parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p.grad[begin + i] += self.grad[i];
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({}, {s}, {x}, [](Node& self) {
    Node& p = parent(self, 0);
    for (auto& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  return affine(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dot(const Tensor& u, const Tensor& v) {
  require_same_shape(u, v, "dot");
  return sum(mul(u, v));
}

Tensor softmax(const Tensor& x, std::size_t axis) { return softmax_impl(x, axis, nullptr); }

Tensor masked_softmax(const Tensor& x, std::size_t axis, const std::vector<bool>& mask) {
  return softmax_impl(x, axis, &mask);
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() != 1 || x.size() == 0) throw ShapeError("log_softmax expects a non-empty vector");
  auto xv = x.values();
  const double mx = *std::max_element(xv.begin(), xv.end());
  double total = 0.0;
  for (double v : xv) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] - lse;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    double gsum = 0.0;
    for (double g : self.grad) gsum += g;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
    }
  });
}

Tensor masked_mean_rows(const Tensor& x, const std::vector<bool>& mask) {
  if (x.rank() != 2) throw ShapeError("masked_mean_rows expects a matrix");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (mask.size() != rows) throw ShapeError("masked_mean_rows: mask length mismatch");
  const auto valid = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (valid == 0) throw ValidationError("masked_mean_rows: no valid rows");
  const double inv = 1.0 / static_cast<double>(valid);
  auto xv = x.values();
  std::vector<double> out(cols, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    if (!mask[t]) continue;
    for (std::size_t j = 0; j < cols; ++j) out[j] += xv[t * cols + j];
  }
  for (auto& v : out) v *= inv;
  return make_result({cols}, std::move(out), {x}, [mask, rows, cols, inv](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t t = 0; t < rows; ++t) {
      if (!mask[t]) continue;
      for (std::size_t j = 0; j < cols; ++j) p.grad[t * cols + j] += self.grad[j] * inv;
    }
  });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || u.shape() != v.shape() || u.size() == 0) {
    throw ShapeError("cosine_similarity expects equal-length non-empty vectors");
  }
  auto uv = u.values(), vv = v.values();
  double uu = 0.0, vvn = 0.0, uvd = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    uu += uv[i] * uv[i];
    vvn += vv[i] * vv[i];
    uvd += uv[i] * vv[i];
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vvn);
  if (nu < kCosineNormFloor || nv < kCosineNormFloor) {
    return make_result({}, {0.0}, {u, v}, [](Node&) {});
  }
  const double c = std::clamp(uvd / (nu * nv), -1.0, 1.0);
  return make_result({}, {c}, {u, v}, [nu, nv, c](Node& self) {
    Node& pu = parent(self, 0);
    Node& pv = parent(self, 1);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < pu.value.size(); ++i) {
      const double ui = pu.value[i], vi = pv.value[i];
      if (pu.requires_grad) pu.grad[i] += g * (vi / (nu * nv) - c * ui / (nu * nu));
      if (pv.requires_grad) pv.grad[i] += g * (ui / (nu * nv) - c * vi / (nv * nv));
    }
  });
}

Tensor l2_normalize(const Tensor& x) {
  auto xv = x.values();
  double ss = 0.0;
  for (double v : xv) ss += v * v;
  const double norm = std::max(std::sqrt(ss), kCosineNormFloor);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / norm;
  return make_result(x.shape(), std::move(out), {x}, [norm](Node& self) {
    Node& p = parent(self, 0);
    double yg = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) yg += self.value[i] * self.grad[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += (self.grad[i] - self.value[i] * yg) / norm;
    }
  });
}

Tensor stop_gradient(const Tensor& x) {
  auto xv = x.values();
  return Tensor(x.shape(), std::vector<double>(xv.begin(), xv.end()), false);
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> scale(x.size());
  for (auto& s : scale) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    s = u < rate ? 0.0 : keep_scale;
  }
  return mul(x, Tensor(x.shape(), std::move(scale)));
}

Tensor cross_entropy_smoothed(const Tensor& logits, std::size_t label, double epsilon) {
  if (logits.rank() != 1 || logits.size() < 2) {
    throw ShapeError("cross_entropy_smoothed expects at least two logits");
  }
  if (label >= logits.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  if (epsilon < 0.0 || epsilon >= 1.0) throw ValidationError("epsilon must be in [0, 1)");
  const std::size_t classes = logits.size();
  std::vector<double> target(classes, epsilon / static_cast<double>(classes));
  target[label] += 1.0 - epsilon;
  return affine(dot(log_softmax(logits), Tensor::vector(std::move(target))), -1.0);
}

Tensor bce_with_logits(const Tensor& logit, double target) {
  if (logit.size() != 1) throw ShapeError("bce_with_logits expects a single logit");
  const double x = logit.values()[0];
  const double loss = std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::abs(x)));
  return make_result({}, {loss}, {logit}, [target](Node& self) {
    Node& p = parent(self, 0);
    const double x = p.value[0];
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    p.grad[0] += self.grad[0] * (s - target);
  });
}

Tensor spread_heads(const Tensor& q, std::size_t heads) {
  if (q.rank() != 1 || heads == 0 || q.size() % heads != 0) {
    throw ShapeError("spread_heads: width must be divisible by head count");
  }
  const std::size_t d = q.size(), dh = d / heads;
  auto qv = q.values();
  std::vector<double> out(heads * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) out[(j / dh) * d + j] = qv[j];
  return make_result({heads, d}, std::move(out), {q}, [d, dh](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t j = 0; j < d; ++j) p.grad[j] += self.grad[(j / dh) * d + j];
  });
}

Tensor collect_heads(const Tensor& m, std::size_t heads) {
  if (m.rank() != 2 || m.dim(0) != heads || m.dim(1) % heads != 0) {
    throw ShapeError("collect_heads: expected [heads x d] with d divisible by heads");
  }
  const std::size_t d = m.dim(1), dh = d / heads;
  auto mv = m.values();
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = mv[(j / dh) * d + j];
  return make_result({d}, std::move(out), {m}, [d, dh](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t j = 0; j < d; ++j) p.grad[(j / dh) * d + j] += self.grad[j];
  });
}

}  // namespace cadd::numeric
