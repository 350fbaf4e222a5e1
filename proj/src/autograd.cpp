#include "hvtrack/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "hvtrack/kernels.hpp"

namespace hvt::ag {

namespace {

std::atomic<std::uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;

NodePtr make_node(Tensor val) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// result node wiring shared by every op
Var make_result(Tensor val, std::vector<Var> parents,
                std::function<void(Node&)> backprop) {
  auto n = make_node(std::move(val));
  if (g_grad_enabled) {
    bool needs = false;
    for (const auto& p : parents)
      if (p.requires_grad()) needs = true;
    if (needs) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node());
      n->backprop = std::move(backprop);
    }
  }
  return Var(n);
}

void accum(Node& parent, const Tensor& g) {
  if (!parent.requires_grad) return;
  parent.ensure_grad();
  kernels::active().axpy(g.numel(), 1.0, g.data(), parent.grad.data());
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void Node::ensure_grad() {
  if (grad.numel() != val.numel()) grad = Tensor::zeros(val.rows, val.cols);
}

Tensor& Var::leaf_value() {
  if (!n_->parents.empty()) throw std::logic_error("leaf_value on non-leaf node");
  return n_->val;
}

void Var::zero_grad() {
  if (n_->grad.numel()) std::fill(n_->grad.v.begin(), n_->grad.v.end(), 0.0);
}

Var constant(Tensor t) { return Var(make_node(std::move(t))); }

Var param(Tensor t) {
  auto n = make_node(std::move(t));
  n->requires_grad = true;
  return Var(n);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

// ---------------------------------------------------------------- basic ops

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.rows(), a.cols());
  kernels::active().vadd(out.numel(), a.val().data(), b.val().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    accum(*n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.v[i] = a.val().v[i] - b.val().v[i];
  return make_result(std::move(out), {a, b}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      kernels::active().axpy(n.grad.numel(), -1.0, n.grad.data(),
                             n.parents[1]->grad.data());
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.rows(), a.cols());
  kernels::active().vmul(out.numel(), a.val().data(), b.val().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      Tensor t(n.grad.rows, n.grad.cols);
      kernels::active().vmul(t.numel(), n.grad.data(), pb.val.data(), t.data());
      kernels::active().axpy(t.numel(), 1.0, t.data(), pa.grad.data());
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      Tensor t(n.grad.rows, n.grad.cols);
      kernels::active().vmul(t.numel(), n.grad.data(), pa.val.data(), t.data());
      kernels::active().axpy(t.numel(), 1.0, t.data(), pb.grad.data());
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] * s;
  return make_result(std::move(out), {a}, [s](Node& n) {
    if (n.parents[0]->requires_grad) {
      n.parents[0]->ensure_grad();
      kernels::active().axpy(n.grad.numel(), s, n.grad.data(),
                             n.parents[0]->grad.data());
    }
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.at(r, c) = x.val().at(r, c) + b.val().at(0, c);
  return make_result(std::move(out), {x, b}, [](Node& n) {
    accum(*n.parents[0], n.grad);
    Node& pb = *n.parents[1];
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t r = 0; r < n.grad.rows; ++r)
        for (std::size_t c = 0; c < n.grad.cols; ++c)
          pb.grad.at(0, c) += n.grad.at(r, c);
    }
  });
}

Var mul_colvec(const Var& x, const Var& w) {
  if (w.cols() != 1 || w.rows() != x.rows())
    throw std::invalid_argument("mul_colvec: weights must be rows(x) x 1");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double wv = w.val().at(r, 0);
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.val().at(r, c) * wv;
  }
  return make_result(std::move(out), {x, w}, [](Node& n) {
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t r = 0; r < n.grad.rows; ++r) {
        const double wv = pw.val.at(r, 0);
        for (std::size_t c = 0; c < n.grad.cols; ++c)
          px.grad.at(r, c) += n.grad.at(r, c) * wv;
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (std::size_t r = 0; r < n.grad.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n.grad.cols; ++c)
          acc += n.grad.at(r, c) * px.val.at(r, c);
        pw.grad.at(r, 0) += acc;
      }
    }
  });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  if (trans_a && trans_b) throw std::invalid_argument("matmul: double transpose unsupported");
  const auto& k = kernels::active();
  std::size_t m, kk, n;
  Tensor out;
  if (!trans_a && !trans_b) {
    m = a.rows(); kk = a.cols(); n = b.cols();
    if (b.rows() != kk) throw std::invalid_argument("matmul nn: inner dim mismatch");
    out = Tensor(m, n);
    k.gemm_nn(m, kk, n, a.val().data(), b.val().data(), out.data(), false);
  } else if (!trans_a && trans_b) {
    m = a.rows(); kk = a.cols(); n = b.rows();
    if (b.cols() != kk) throw std::invalid_argument("matmul nt: inner dim mismatch");
    out = Tensor(m, n);
    k.gemm_nt(m, kk, n, a.val().data(), b.val().data(), out.data(), false);
  } else {
    m = a.cols(); kk = a.rows(); n = b.cols();
    if (b.rows() != kk) throw std::invalid_argument("matmul tn: inner dim mismatch");
    out = Tensor(m, n);
    k.gemm_tn(m, kk, n, a.val().data(), b.val().data(), out.data(), false);
  }
  return make_result(std::move(out), {a, b}, [trans_a, trans_b](Node& nd) {
    const auto& kt = kernels::active();
    Node& pa = *nd.parents[0];
    Node& pb = *nd.parents[1];
    const Tensor& dy = nd.grad;
    if (!trans_a && !trans_b) {
      // y = a b : da += dy b^T ; db += a^T dy
      if (pa.requires_grad) {
        pa.ensure_grad();
        kt.gemm_nt(dy.rows, dy.cols, pb.val.rows, dy.data(), pb.val.data(),
                   pa.grad.data(), true);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        kt.gemm_tn(pa.val.cols, pa.val.rows, dy.cols, pa.val.data(), dy.data(),
                   pb.grad.data(), true);
      }
    } else if (!trans_a && trans_b) {
      // y = a b^T : da += dy b ; db += dy^T a
      if (pa.requires_grad) {
        pa.ensure_grad();
        kt.gemm_nn(dy.rows, dy.cols, pb.val.cols, dy.data(), pb.val.data(),
                   pa.grad.data(), true);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        kt.gemm_tn(dy.cols, dy.rows, pa.val.cols, dy.data(), pa.val.data(),
                   pb.grad.data(), true);
      }
    } else {
      // y = a^T b : da += b dy^T ; db += a dy
      if (pa.requires_grad) {
        pa.ensure_grad();
        kt.gemm_nt(pb.val.rows, pb.val.cols, dy.rows, pb.val.data(), dy.data(),
                   pa.grad.data(), true);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        kt.gemm_nn(pa.val.rows, pa.val.cols, dy.cols, pa.val.data(), dy.data(),
                   pb.grad.data(), true);
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x.rows(), x.cols());
  kernels::active().relu(out.numel(), x.val().data(), out.data());
  return make_result(std::move(out), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (p.requires_grad) {
      p.ensure_grad();
      kernels::active().relu_grad(n.grad.numel(), p.val.data(), n.grad.data(),
                                  p.grad.data());
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.v[i] = 1.0 / (1.0 + std::exp(-x.val().v[i]));
  auto yv = out.v;  // captured for backward
  return make_result(std::move(out), {x}, [yv](Node& n) {
    Node& p = *n.parents[0];
    if (p.requires_grad) {
      p.ensure_grad();
      for (std::size_t i = 0; i < n.grad.numel(); ++i)
        p.grad.v[i] += n.grad.v[i] * yv[i] * (1.0 - yv[i]);
    }
  });
}

Var softmax_rows(const Var& x) {
  Tensor out(x.rows(), x.cols());
  kernels::active().row_softmax(x.rows(), x.cols(), x.val().data(), out.data());
  auto yv = out.v;
  return make_result(std::move(out), {x}, [yv](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t rows = n.grad.rows, cols = n.grad.cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = n.grad.data() + r * cols;
      const double* y = yv.data() + r * cols;
      double dotv = kernels::active().dot(cols, g, y);
      double* d = p.grad.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) d[c] += (g[c] - dotv) * y[c];
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  Tensor out(rows, cols);
  std::vector<double> xhat(rows * cols), inv_sigma(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.val().data() + r * cols;
    double mu = kernels::active().reduce_sum(cols, xr) / double(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= double(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (xr[c] - mu) * is;
      xhat[r * cols + c] = xh;
      out.at(r, c) = xh * gain.val().at(0, c) + bias.val().at(0, c);
    }
  }
  return make_result(std::move(out), {x, gain, bias},
                     [xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& n) {
    Node& px = *n.parents[0];
    Node& pg = *n.parents[1];
    Node& pb = *n.parents[2];
    const std::size_t rows = n.grad.rows, cols = n.grad.cols;
    if (pg.requires_grad) {
      pg.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          pg.grad.at(0, c) += n.grad.at(r, c) * xhat[r * cols + c];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) pb.grad.at(0, c) += n.grad.at(r, c);
    }
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        // dxhat = dy * gain ; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) / sigma
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        std::vector<double> dxh(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          dxh[c] = n.grad.at(r, c) * pg.val.at(0, c);
          mean_dxh += dxh[c];
          mean_dxh_xh += dxh[c] * xhat[r * cols + c];
        }
        mean_dxh /= double(cols);
        mean_dxh_xh /= double(cols);
        for (std::size_t c = 0; c < cols; ++c)
          px.grad.at(r, c) += (dxh[c] - mean_dxh - xhat[r * cols + c] * mean_dxh_xh) *
                              inv_sigma[r];
      }
    }
  });
}

Var concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty");
  const std::size_t cols = xs[0].cols();
  std::size_t rows = 0;
  for (const auto& x : xs) {
    if (x.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += x.rows();
  }
  Tensor out(rows, cols);
  std::size_t r = 0;
  for (const auto& x : xs) {
    std::copy(x.val().v.begin(), x.val().v.end(), out.v.begin() + r * cols);
    r += x.rows();
  }
  std::vector<std::size_t> row_of(xs.size());
  {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      row_of[i] = acc;
      acc += xs[i].rows();
    }
  }
  return make_result(std::move(out), xs, [row_of](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const std::size_t nr = p.val.rows, cols = n.grad.cols;
      kernels::active().axpy(nr * cols, 1.0, n.grad.data() + row_of[i] * cols,
                             p.grad.data());
    }
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  const std::size_t rows = xs[0].rows();
  std::size_t cols = 0;
  for (const auto& x : xs) {
    if (x.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += x.cols();
  }
  Tensor out(rows, cols);
  std::size_t c0 = 0;
  for (const auto& x : xs) {
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(x.val().v.begin() + r * x.cols(), x.val().v.begin() + (r + 1) * x.cols(),
                out.v.begin() + r * cols + c0);
    c0 += x.cols();
  }
  std::vector<std::size_t> col_of(xs.size());
  {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      col_of[i] = acc;
      acc += xs[i].cols();
    }
  }
  return make_result(std::move(out), xs, [col_of](Node& n) {
    const std::size_t cols = n.grad.cols;
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
    if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t r = 0; r < p.val.rows; ++r)
        for (std::size_t c = 0; c < p.val.cols; ++c)
          p.grad.at(r, c) += n.grad.v[r * cols + col_of[i] + c];
    }
  });
}

Var slice_rows(const Var& x, std::size_t r0, std::size_t r1) {
  if (r1 > x.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
  const std::size_t cols = x.cols();
  Tensor out(r1 - r0, cols);
  std::copy(x.val().v.begin() + r0 * cols, x.val().v.begin() + r1 * cols, out.v.begin());
  return make_result(std::move(out), {x}, [r0](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    kernels::active().axpy(n.grad.numel(), 1.0, n.grad.data(),
                           p.grad.data() + r0 * n.grad.cols);
  });
}

Var slice_cols(const Var& x, std::size_t c0, std::size_t c1) {
  if (c1 > x.cols() || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Tensor out(x.rows(), c1 - c0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::copy(x.val().v.begin() + r * x.cols() + c0,
              x.val().v.begin() + r * x.cols() + c1, out.v.begin() + r * out.cols);
  return make_result(std::move(out), {x}, [c0](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < n.grad.rows; ++r)
      for (std::size_t c = 0; c < n.grad.cols; ++c)
        p.grad.at(r, c0 + c) += n.grad.at(r, c);
  });
}

Var gather_rows(const Var& x, const std::vector<std::size_t>& idx) {
  const std::size_t cols = x.cols();
  Tensor out(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw std::out_of_range("gather_rows: index");
    std::copy(x.val().v.begin() + idx[i] * cols,
              x.val().v.begin() + (idx[i] + 1) * cols, out.v.begin() + i * cols);
  }
  return make_result(std::move(out), {x}, [idx](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t cols = n.grad.cols;
    for (std::size_t i = 0; i < idx.size(); ++i)
      kernels::active().axpy(cols, 1.0, n.grad.data() + i * cols,
                             p.grad.data() + idx[i] * cols);
  });
}

Var group_maxpool_rows(const Var& x, std::size_t group_size) {
  if (group_size == 0 || x.rows() % group_size != 0)
    throw std::invalid_argument("group_maxpool_rows: rows not divisible by group size");
  const std::size_t groups = x.rows() / group_size, cols = x.cols();
  Tensor out(groups, cols);
  std::vector<std::uint32_t> arg(groups * cols);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = g * group_size;
      double bv = x.val().at(best, c);
      for (std::size_t j = 1; j < group_size; ++j) {
        const double v = x.val().at(g * group_size + j, c);
        if (v > bv) {
          bv = v;
          best = g * group_size + j;
        }
      }
      out.at(g, c) = bv;
      arg[g * cols + c] = static_cast<std::uint32_t>(best);
    }
  return make_result(std::move(out), {x}, [arg = std::move(arg)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t cols = n.grad.cols;
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      p.grad.v[arg[i] * cols + i % cols] += n.grad.v[i];
  });
}

Var cluster_aggregate(const Var& x, const Var& w) {
  if (w.cols() != 1) throw std::invalid_argument("cluster_aggregate: weights must be m x 1");
  const std::size_t m = w.rows();
  if (m == 0 || x.rows() % m != 0)
    throw std::invalid_argument("cluster_aggregate: rows not divisible by member count");
  const std::size_t clusters = x.rows() / m, cols = x.cols();
  Tensor out(clusters, cols);
  for (std::size_t c = 0; c < clusters; ++c)
    for (std::size_t j = 0; j < m; ++j)
      kernels::active().axpy(cols, w.val().at(j, 0),
                             x.val().data() + (c * m + j) * cols,
                             out.data() + c * cols);
  return make_result(std::move(out), {x, w}, [m](Node& n) {
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    const std::size_t clusters = n.grad.rows, cols = n.grad.cols;
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t c = 0; c < clusters; ++c)
        for (std::size_t j = 0; j < m; ++j)
          kernels::active().axpy(cols, pw.val.at(j, 0), n.grad.data() + c * cols,
                                 px.grad.data() + (c * m + j) * cols);
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < clusters; ++c)
          acc += kernels::active().dot(cols, n.grad.data() + c * cols,
                                       px.val.data() + (c * m + j) * cols);
        pw.grad.at(j, 0) += acc;
      }
    }
  });
}

Var sum_all(const Var& x) {
  Tensor out(1, 1);
  out.v[0] = kernels::active().reduce_sum(x.val().numel(), x.val().data());
  return make_result(std::move(out), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = n.grad.v[0];
    for (auto& e : p.grad.v) e += g;
  });
}

Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / double(x.val().numel())); }

Var row_sum(const Var& x) {
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    out.at(r, 0) = kernels::active().reduce_sum(x.cols(), x.val().data() + r * x.cols());
  return make_result(std::move(out), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t cols = p.val.cols;
    for (std::size_t r = 0; r < p.val.rows; ++r) {
      const double g = n.grad.at(r, 0);
      for (std::size_t c = 0; c < cols; ++c) p.grad.at(r, c) += g;
    }
  });
}

Var col_sum(const Var& x) {
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    kernels::active().axpy(x.cols(), 1.0, x.val().data() + r * x.cols(), out.data());
  return make_result(std::move(out), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < p.val.rows; ++r)
      kernels::active().axpy(p.val.cols, 1.0, n.grad.data(),
                             p.grad.data() + r * p.val.cols);
  });
}

Var div_by_scalar(const Var& x, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("div_by_scalar: s must be 1x1");
  const double sv = s.val().v[0];
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = x.val().v[i] / sv;
  return make_result(std::move(out), {x, s}, [sv](Node& n) {
    Node& px = *n.parents[0];
    Node& ps = *n.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      kernels::active().axpy(n.grad.numel(), 1.0 / sv, n.grad.data(), px.grad.data());
    }
    if (ps.requires_grad) {
      ps.ensure_grad();
      double acc = kernels::active().dot(n.grad.numel(), n.grad.data(), n.val.data());
      ps.grad.v[0] += -acc / sv;
    }
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(rows, cols);
  std::vector<double> inv_r(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.val().data() + r * cols;
    const double nrm = std::sqrt(kernels::active().dot(cols, xr, xr) + eps);
    inv_r[r] = 1.0 / nrm;
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = xr[c] * inv_r[r];
  }
  return make_result(std::move(out), {x}, [inv_r = std::move(inv_r)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t cols = n.grad.cols;
    for (std::size_t r = 0; r < n.grad.rows; ++r) {
      const double* g = n.grad.data() + r * cols;
      const double* xr = p.val.data() + r * cols;
      const double ir = inv_r[r];
      const double gdx = kernels::active().dot(cols, g, xr);
      for (std::size_t c = 0; c < cols; ++c)
        p.grad.at(r, c) += g[c] * ir - xr[c] * gdx * ir * ir * ir;
    }
  });
}

Var dropout(const Var& x, double rate, Rng& rng, bool train) {
  if (!train || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.val().numel());
  for (auto& m : mask) m = rng.uniform(0.0, 1.0) < rate ? 0.0 : 1.0 / keep;
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = x.val().v[i] * mask[i];
  return make_result(std::move(out), {x}, [mask = std::move(mask)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      p.grad.v[i] += n.grad.v[i] * mask[i];
  });
}

Var wrap_angle(const Var& x) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double a = std::remainder(x.val().v[i], kTwoPi);
    if (a <= -3.14159265358979323846) a += kTwoPi;
    out.v[i] = a;
  }
  return make_result(std::move(out), {x}, [](Node& n) { accum(*n.parents[0], n.grad); });
}

Var mse_mean(const Var& x, const Tensor& target) {
  if (!x.val().same_shape(target)) throw std::invalid_argument("mse_mean: shape mismatch");
  const std::size_t n = x.val().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x.val().v[i] - target.v[i];
    acc += d * d;
  }
  Tensor out(1, 1);
  out.v[0] = acc / double(n);
  return make_result(std::move(out), {x}, [target](Node& nd) {
    Node& p = *nd.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = nd.grad.v[0] * 2.0 / double(p.val.numel());
    for (std::size_t i = 0; i < p.val.numel(); ++i)
      p.grad.v[i] += g * (p.val.v[i] - target.v[i]);
  });
}

Var huber_mean(const Var& x, const Tensor& target, double delta) {
  if (!x.val().same_shape(target)) throw std::invalid_argument("huber_mean: shape mismatch");
  const std::size_t n = x.val().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::abs(x.val().v[i] - target.v[i]);
    acc += e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
  }
  Tensor out(1, 1);
  out.v[0] = acc / double(n);
  return make_result(std::move(out), {x}, [target, delta](Node& nd) {
    Node& p = *nd.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = nd.grad.v[0] / double(p.val.numel());
    for (std::size_t i = 0; i < p.val.numel(); ++i) {
      const double e = p.val.v[i] - target.v[i];
      const double de = std::abs(e) <= delta ? e : (e > 0 ? delta : -delta);
      p.grad.v[i] += g * de;
    }
  });
}

Var bce_mean(const Var& p, const Tensor& target) {
  if (!p.val().same_shape(target)) throw std::invalid_argument("bce_mean: shape mismatch");
  constexpr double kEps = 1e-12;
  const std::size_t n = p.val().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pv = std::clamp(p.val().v[i], kEps, 1.0 - kEps);
    acc -= target.v[i] * std::log(pv) + (1.0 - target.v[i]) * std::log(1.0 - pv);
  }
  Tensor out(1, 1);
  out.v[0] = acc / double(n);
  return make_result(std::move(out), {p}, [target, kEps](Node& nd) {
    Node& pp = *nd.parents[0];
    if (!pp.requires_grad) return;
    pp.ensure_grad();
    const double g = nd.grad.v[0] / double(pp.val.numel());
    for (std::size_t i = 0; i < pp.val.numel(); ++i) {
      const double pv = std::clamp(pp.val.v[i], kEps, 1.0 - kEps);
      pp.grad.v[i] += g * (-target.v[i] / pv + (1.0 - target.v[i]) / (1.0 - pv));
    }
  });
}

void backward(const Var& root) {
  if (root.val().numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root.requires_grad()) return;

  // collect reachable grad-requiring nodes, then run in reverse creation order
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root.node()->ensure_grad();
  root.node()->grad.v[0] = 1.0;
  for (Node* n : order) {
    if (n->backprop && n->grad.numel()) n->backprop(*n);
  }
}

}  // namespace hvt::ag
