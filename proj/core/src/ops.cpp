// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace htvgnn {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

namespace {

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor finish(Shape shape, std::vector<double> values, bool requires_grad, const char* op) {
  check_finite(values, op);
  return make_result(std::move(shape), std::move(values), requires_grad);
}

void record(const Tensor& out, Tape::BackwardFn fn) { Tape::active().record(out.shared_impl(), std::move(fn)); }

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= s[i];
  return n;
}

// For every element of the broadcast output, the linear offset into each operand.
struct BroadcastMap {
  Shape out;
  bool a_identity = false;
  bool b_identity = false;
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;

  std::size_t ia(std::size_t i) const { return a_identity ? i : a[i]; }
  std::size_t ib(std::size_t i) const { return b_identity ? i : b[i]; }
};

std::vector<std::size_t> broadcast_offsets(const Shape& operand, const Shape& out) {
  const std::size_t r = out.size();
  const std::size_t pad = r - operand.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t stride = 1;
  for (std::size_t d = r; d-- > pad;) {
    const std::size_t extent = operand[d - pad];
    strides[d] = extent == 1 ? 0 : stride;
    stride *= extent;
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> offsets(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      off += strides[d];
      if (counter[d] < out[d]) break;
      off -= strides[d] * counter[d];
      counter[d] = 0;
    }
  }
  return offsets;
}

BroadcastMap plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastMap m;
  m.out = broadcast_shapes(a, b, op);
  m.a_identity = a == m.out;
  m.b_identity = b == m.out;
  if (!m.a_identity) m.a = broadcast_offsets(a, m.out);
  if (!m.b_identity) m.b = broadcast_offsets(b, m.out);
  return m;
}

// f(x, y) -> value; dfa/dfb(x, y, out) -> partial derivatives.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA dfa, DB dfb) {
  auto map = std::make_shared<BroadcastMap>(plan_broadcast(a.shape(), b.shape(), op));
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t n = shape_numel(map->out);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[map->ia(i)], bd[map->ib(i)]);
  const bool rg = wants_grad({&a, &b});
  Tensor result = finish(map->out, std::move(out), rg, op);
  if (rg) {
    ImplPtr pa = a.shared_impl(), pb = b.shared_impl(), po = result.shared_impl();
    record(result, [pa, pb, po, map, dfa, dfb]() {
      const auto& g = po->grad;
      const std::size_t count = g.size();
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t ia = map->ia(i), ib = map->ib(i);
          ga[ia] += g[i] * dfa(pa->data[ia], pb->data[ib], po->data[i]);
        }
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t ia = map->ia(i), ib = map->ib(i);
          gb[ib] += g[i] * dfb(pa->data[ia], pb->data[ib], po->data[i]);
        }
      }
    });
  }
  return result;
}

// f(x) -> value; df(x, y) -> derivative.
template <class F, class DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  const bool rg = wants_grad({&x});
  Tensor result = finish(x.shape(), std::move(out), rg, op);
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po, df]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(px->data[i], po->data[i]);
    });
  }
  return result;
}

// Output element i reads input element index[i]; gradient scatters back.
Tensor gather(const Tensor& x, Shape shape, std::shared_ptr<std::vector<std::size_t>> index, const char* op) {
  const auto xd = x.data();
  std::vector<double> out(index->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[(*index)[i]];
  const bool rg = wants_grad({&x});
  Tensor result = make_result(std::move(shape), std::move(out), rg);
  (void)op;
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po, index]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*index)[i]] += g[i];
    });
  }
  return result;
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* __restrict A, const double* __restrict B, double* __restrict C, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* __restrict brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(const double* __restrict A, const double* __restrict B, double* __restrict C, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* __restrict arow = A + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* __restrict brow = B + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      C[i * n + j] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T B[m,n]
void gemm_tn(const double* __restrict A, const double* __restrict B, double* __restrict C, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* __restrict brow = B + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      double* __restrict crow = C + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  try {
    batch = broadcast_shapes(batch_a, batch_b, "matmul");
  } catch (const DimensionError&) {
    throw DimensionError("matmul: batch dimensions of " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " are not broadcast-compatible");
  }
  auto map = std::make_shared<BroadcastMap>();
  map->out = batch;
  map->a_identity = batch_a == batch;
  map->b_identity = batch_b == batch;
  if (!map->a_identity) map->a = broadcast_offsets(batch_a, batch);
  if (!map->b_identity) map->b = broadcast_offsets(batch_b, batch);
  const std::size_t nb = shape_numel(batch);

  std::vector<double> out(nb * m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t bi = 0; bi < nb; ++bi) {
    gemm_nn(ad + map->ia(bi) * m * k, bd + map->ib(bi) * k * n, out.data() + bi * m * n, m, k, n);
  }
  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(n);
  const bool rg = wants_grad({&a, &b});
  Tensor result = finish(std::move(shape), std::move(out), rg, "matmul");
  if (rg) {
    ImplPtr pa = a.shared_impl(), pb = b.shared_impl(), po = result.shared_impl();
    record(result, [pa, pb, po, map, nb, m, k, n]() {
      const double* G = po->grad.data();
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t bi = 0; bi < nb; ++bi) {
          gemm_nt(G + bi * m * n, pb->data.data() + map->ib(bi) * k * n, ga.data() + map->ia(bi) * m * k, m, n, k);
        }
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t bi = 0; bi < nb; ++bi) {
          gemm_tn(pa->data.data() + map->ia(bi) * m * k, G + bi * m * n, gb.data() + map->ib(bi) * k * n, m, k, n);
        }
      }
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, "add_scalar", [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary(
      x, "mul_scalar", [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.rank(), "softmax");
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t len = x.shape()[ax];
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xd[base];
      for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, xd[base + l * inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(xd[base + l * inner] - mx);
        out[base + l * inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= total;
    }
  }
  const bool rg = wants_grad({&x});
  Tensor result = finish(x.shape(), std::move(out), rg, "softmax");
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po, outer, len, inner]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      const auto& y = po->data;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          double dot = 0.0;
          for (std::size_t l = 0; l < len; ++l) dot += g[base + l * inner] * y[base + l * inner];
          for (std::size_t l = 0; l < len; ++l) {
            const std::size_t i = base + l * inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const auto xd = x.data();
  const bool rg = wants_grad({&x});
  Tensor result = make_result(std::move(shape), std::vector<double>(xd.begin(), xd.end()), rg);
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& dims) {
  const std::size_t r = x.rank();
  if (dims.size() != r) throw DimensionError("permute: expected " + std::to_string(r) + " axes");
  std::vector<bool> seen(r, false);
  for (auto d : dims) {
    if (d >= r || seen[d]) throw DimensionError("permute: invalid axis order for shape " + shape_str(x.shape()));
    seen[d] = true;
  }
  const Shape& in = x.shape();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t d = r - 1; d-- > 0;) in_strides[d] = in_strides[d + 1] * in[d + 1];
  Shape out_shape(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = in[dims[d]];
    strides[d] = in_strides[dims[d]];
  }
  const std::size_t n = x.numel();
  auto index = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*index)[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      off += strides[d];
      if (counter[d] < out_shape[d]) break;
      off -= strides[d] * counter[d];
      counter[d] = 0;
    }
  }
  return gather(x, std::move(out_shape), std::move(index), "permute");
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  const std::size_t a0 = normalize_axis(axis0, x.rank(), "transpose");
  const std::size_t a1 = normalize_axis(axis1, x.rank(), "transpose");
  std::vector<std::size_t> dims(x.rank());
  std::iota(dims.begin(), dims.end(), 0);
  std::swap(dims[a0], dims[a1]);
  return permute(x, dims);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const std::size_t r = parts.front().rank();
  const std::size_t ax = normalize_axis(axis, r, "concat");
  Shape shape = parts.front().shape();
  shape[ax] = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rank() != r) throw DimensionError("concat: rank mismatch, " + shape_str(p.shape()));
    for (std::size_t d = 0; d < r; ++d) {
      if (d != ax && p.shape()[d] != parts.front().shape()[d]) {
        throw DimensionError("concat: shapes " + shape_str(parts.front().shape()) + " and " +
                             shape_str(p.shape()) + " differ off the concat axis");
      }
    }
    shape[ax] += p.shape()[ax];
    rg = rg || p.requires_grad();
  }
  rg = rg && Tape::recording();
  const std::size_t outer = prod(shape, 0, ax);
  const std::size_t inner = prod(shape, ax + 1, r);
  const std::size_t row = shape[ax] * inner;
  std::vector<double> out(shape_numel(shape));
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[ax] * inner;
    const auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + col));
    }
    col += chunk;
  }
  Tensor result = make_result(std::move(shape), std::move(out), rg);
  if (rg) {
    std::vector<ImplPtr> impls;
    for (const auto& p : parts) impls.push_back(p.shared_impl());
    ImplPtr po = result.shared_impl();
    record(result, [impls, po, outer, inner, row, ax]() {
      std::size_t c = 0;
      for (const auto& pi : impls) {
        const std::size_t chunk = pi->shape[ax] * inner;
        if (pi->requires_grad) {
          auto& gp = pi->grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += po->grad[o * row + c + i];
          }
        }
        c += chunk;
      }
    });
  }
  return result;
}

Tensor stack(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("stack: no operands");
  const std::size_t r = parts.front().rank() + 1;
  const std::size_t ax = normalize_axis(axis, r, "stack");
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(ax), 1);
    expanded.push_back(reshape(p, std::move(s)));
  }
  return concat(expanded, static_cast<int>(ax));
}

Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.rank(), "narrow");
  if (length == 0 || start + length > x.shape()[ax]) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(ax) + " of " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[ax] = length;
  const std::size_t outer = prod(shape, 0, ax);
  const std::size_t inner = prod(shape, ax + 1, shape.size());
  const std::size_t src_row = x.shape()[ax] * inner;
  const std::size_t chunk = length * inner;
  auto index = std::make_shared<std::vector<std::size_t>>(outer * chunk);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < chunk; ++i) (*index)[o * chunk + i] = o * src_row + start * inner + i;
  }
  return gather(x, std::move(shape), std::move(index), "narrow");
}

Tensor index_select(const Tensor& table, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("index_select: no rows requested");
  const std::size_t n_rows = table.shape()[0];
  const std::size_t width = table.numel() / n_rows;
  auto index = std::make_shared<std::vector<std::size_t>>(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n_rows) {
      throw ContractError("index_select: row " + std::to_string(rows[r]) + " out of range for table " +
                          shape_str(table.shape()));
    }
    for (std::size_t i = 0; i < width; ++i) (*index)[r * width + i] = rows[r] * width + i;
  }
  Shape shape = table.shape();
  shape[0] = rows.size();
  return gather(table, std::move(shape), std::move(index), "index_select");
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const bool rg = wants_grad({&x});
  Tensor result = finish({1}, {total}, rg, "sum");
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po]() {
      auto& gx = px->grad_buffer();
      const double g = po->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return result;
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, x.rank(), "sum");
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t len = x.shape()[ax];
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  const auto xd = x.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t in = 0; in < inner; ++in) out[o * inner + in] += xd[(o * len + l) * inner + in];
    }
  }
  Shape shape = x.shape();
  if (keepdim) {
    shape[ax] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
    if (shape.empty()) shape.push_back(1);
  }
  const bool rg = wants_grad({&x});
  Tensor result = finish(std::move(shape), std::move(out), rg, "sum");
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po, outer, len, inner]() {
      auto& gx = px->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t l = 0; l < len; ++l) {
          for (std::size_t in = 0; in < inner; ++in) gx[(o * len + l) * inner + in] += po->grad[o * inner + in];
        }
      }
    });
  }
  return result;
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor layer_norm(const Tensor& x, double eps) {
  const std::size_t len = x.dim(-1);
  const std::size_t rows = x.numel() / len;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * len;
    double mu = 0.0;
    for (std::size_t i = 0; i < len; ++i) mu += row[i];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(len);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t i = 0; i < len; ++i) out[r * len + i] = (row[i] - mu) * inv;
  }
  const bool rg = wants_grad({&x});
  Tensor result = finish(x.shape(), std::move(out), rg, "layer_norm");
  if (rg) {
    ImplPtr px = x.shared_impl(), po = result.shared_impl();
    record(result, [px, po, inv_std, rows, len]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      const auto& y = po->data;
      const double inv_len = 1.0 / static_cast<double>(len);
      for (std::size_t r = 0; r < rows; ++r) {
        double g_mean = 0.0, gy_mean = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          g_mean += g[r * len + i];
          gy_mean += g[r * len + i] * y[r * len + i];
        }
        g_mean *= inv_len;
        gy_mean *= inv_len;
        const double inv = (*inv_std)[r];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = r * len + i;
          gx[k] += inv * (g[k] - g_mean - y[k] * gy_mean);
        }
      }
    });
  }
  return result;
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: probability must lie in [0, 1)");
  if (p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace htvgnn
