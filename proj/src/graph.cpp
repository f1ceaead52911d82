// Copyright 2026  The corrpool authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "corrpool/graph.hpp"

#include <algorithm>
#include <cmath>

namespace corrpool {

namespace {

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                     " tensor, got shape " + t.shape_string());
  }
}

}  // namespace

NodeId Graph::make_node(const char* op, Tensor value, std::function<void(Graph&)> backprop,
                        Parameter* param) {
  check_finite(op, value);
  Node n;
  n.grad = Tensor(value.shape());
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  n.param = param;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) { return make_node("constant", std::move(value), {}); }

NodeId Graph::leaf(Parameter& p) { return make_node("leaf", p.value, {}, &p); }

double Graph::scalar_value(NodeId id) const {
  const Tensor& t = nodes_[id].value;
  if (t.size() != 1) {
    throw ShapeError("scalar_value: node has shape " + t.shape_string());
  }
  return t[0];
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw ShapeError("add: shape " + ta.shape_string() + " vs " + tb.shape_string());
  }
  Tensor out = ta;
  out.add_scaled(tb, 1.0);
  NodeId id = nodes_.size();
  return make_node("add", std::move(out), [id, a, b](Graph& g) {
    g.grad_slot(a).add_scaled(g.gradient(id), 1.0);
    g.grad_slot(b).add_scaled(g.gradient(id), 1.0);
  });
}

NodeId Graph::scale(NodeId a, double s) {
  Tensor out = value(a);
  for (double& v : out.raw()) v *= s;
  NodeId id = nodes_.size();
  return make_node("scale", std::move(out), [id, a, s](Graph& g) {
    g.grad_slot(a).add_scaled(g.gradient(id), s);
  });
}

NodeId Graph::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.raw()) v = v > 0.0 ? v : 0.0;
  NodeId id = nodes_.size();
  return make_node("relu", std::move(out), [id, a](Graph& g) {
    const Tensor& x = g.value(a);
    const Tensor& go = g.gradient(id);
    Tensor& gx = g.grad_slot(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) gx[i] += go[i];
    }
  });
}

NodeId Graph::sum_all(NodeId a) {
  const Tensor& x = value(a);
  double s = 0.0;
  for (double v : x.raw()) s += v;
  NodeId id = nodes_.size();
  return make_node("sum_all", Tensor::scalar(s), [id, a](Graph& g) {
    double go = g.gradient(id)[0];
    for (double& v : g.grad_slot(a).raw()) v += go;
  });
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_rank("tensor_matmul", ta, 2);
  require_rank("tensor_matmul", tb, 2);
  if (ta.dim(1) != tb.dim(0)) {
    throw ShapeError("tensor_matmul: inner dimensions disagree: " + ta.shape_string() +
                     " vs " + tb.shape_string());
  }
  std::size_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  // ikj order: row of the output accumulated from scaled rows of b.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = ta.at2(i, p);
      if (aip == 0.0) continue;
      const double* brow = tb.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  NodeId id = nodes_.size();
  return make_node("tensor_matmul", std::move(out), [id, a, b, m, k, n](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    Tensor& ga = g.grad_slot(a);
    Tensor& gb = g.grad_slot(b);
    // dA = G * B^T
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = go.data() + i * n;
        const double* brow = tb.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        ga.at2(i, p) += acc;
      }
    }
    // dB = A^T * G
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t i = 0; i < m; ++i) {
        double aip = ta.at2(i, p);
        if (aip == 0.0) continue;
        const double* grow = go.data() + i * n;
        double* gbrow = gb.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
      }
    }
  });
}

NodeId Graph::vecmat(NodeId v, NodeId m) {
  const Tensor& tv = value(v);
  const Tensor& tm = value(m);
  require_rank("vecmat", tv, 1);
  require_rank("vecmat", tm, 2);
  if (tv.dim(0) != tm.dim(0)) {
    throw ShapeError("vecmat: inner dimensions disagree: " + tv.shape_string() + " vs " +
                     tm.shape_string());
  }
  std::size_t d = tm.dim(0), n = tm.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < d; ++i) {
    double vi = tv[i];
    if (vi == 0.0) continue;
    const double* mrow = tm.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += vi * mrow[j];
  }
  NodeId id = nodes_.size();
  return make_node("vecmat", std::move(out), [id, v, m, d, n](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& tv = g.value(v);
    const Tensor& tm = g.value(m);
    Tensor& gv = g.grad_slot(v);
    Tensor& gm = g.grad_slot(m);
    for (std::size_t i = 0; i < d; ++i) {
      const double* mrow = tm.data() + i * n;
      double* gmrow = gm.data() + i * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += go[j] * mrow[j];
        gmrow[j] += tv[i] * go[j];
      }
      gv[i] += acc;
    }
  });
}

NodeId Graph::matvec(NodeId m, NodeId v) {
  const Tensor& tm = value(m);
  const Tensor& tv = value(v);
  require_rank("matvec", tm, 2);
  require_rank("matvec", tv, 1);
  if (tm.dim(1) != tv.dim(0)) {
    throw ShapeError("matvec: inner dimensions disagree: " + tm.shape_string() + " vs " +
                     tv.shape_string());
  }
  std::size_t n = tm.dim(0), d = tm.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* mrow = tm.data() + i * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += mrow[j] * tv[j];
    out[i] = acc;
  }
  NodeId id = nodes_.size();
  return make_node("matvec", std::move(out), [id, m, v, n, d](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& tm = g.value(m);
    const Tensor& tv = g.value(v);
    Tensor& gm = g.grad_slot(m);
    Tensor& gv = g.grad_slot(v);
    for (std::size_t i = 0; i < n; ++i) {
      double gi = go[i];
      if (gi == 0.0) continue;
      const double* mrow = tm.data() + i * d;
      double* gmrow = gm.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) {
        gmrow[j] += gi * tv[j];
        gv[j] += gi * mrow[j];
      }
    }
  });
}

NodeId Graph::softmax_vec(NodeId a) {
  const Tensor& x = value(a);
  require_rank("softmax_vec", x, 1);
  std::size_t n = x.dim(0);
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  Tensor out({n});
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
  NodeId id = nodes_.size();
  return make_node("softmax_vec", std::move(out), [id, a, n](Graph& g) {
    const Tensor& s = g.value(id);
    const Tensor& go = g.gradient(id);
    Tensor& gx = g.grad_slot(a);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += go[i] * s[i];
    for (std::size_t i = 0; i < n; ++i) gx[i] += s[i] * (go[i] - dot);
  });
}

NodeId Graph::layer_combine(NodeId stack, NodeId gamma) {
  const Tensor& ts = value(stack);
  const Tensor& tg = value(gamma);
  require_rank("layer_combine", ts, 3);
  require_rank("layer_combine", tg, 1);
  if (ts.dim(0) != tg.dim(0)) {
    throw ShapeError("layer_combine: stack has " + std::to_string(ts.dim(0)) +
                     " layers but weights have length " + std::to_string(tg.dim(0)));
  }
  std::size_t layers = ts.dim(0), t = ts.dim(1), d = ts.dim(2);
  Tensor out({t, d});
  for (std::size_t l = 0; l < layers; ++l) {
    double w = tg[l];
    const double* layer = ts.data() + l * t * d;
    for (std::size_t i = 0; i < t * d; ++i) out[i] += w * layer[i];
  }
  NodeId id = nodes_.size();
  return make_node("layer_combine", std::move(out), [id, stack, gamma, layers, t, d](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& ts = g.value(stack);
    const Tensor& tg = g.value(gamma);
    Tensor& gs = g.grad_slot(stack);
    Tensor& gg = g.grad_slot(gamma);
    for (std::size_t l = 0; l < layers; ++l) {
      const double* layer = ts.data() + l * t * d;
      double* glayer = gs.data() + l * t * d;
      double w = tg[l];
      double acc = 0.0;
      for (std::size_t i = 0; i < t * d; ++i) {
        acc += go[i] * layer[i];
        glayer[i] += w * go[i];
      }
      gg[l] += acc;
    }
  });
}

NodeId Graph::channel_scale(NodeId frames, NodeId scales) {
  const Tensor& x = value(frames);
  const Tensor& s = value(scales);
  require_rank("channel_scale", x, 2);
  require_rank("channel_scale", s, 1);
  if (x.dim(1) != s.dim(0)) {
    throw ShapeError("channel_scale: frames " + x.shape_string() + " vs scales " +
                     s.shape_string());
  }
  std::size_t t = x.dim(0), d = x.dim(1);
  Tensor out({t, d});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) = x.at2(i, j) * s[j];
  }
  NodeId id = nodes_.size();
  return make_node("channel_scale", std::move(out), [id, frames, scales, t, d](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& x = g.value(frames);
    const Tensor& s = g.value(scales);
    Tensor& gx = g.grad_slot(frames);
    Tensor& gsc = g.grad_slot(scales);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        gx.at2(i, j) += go.at2(i, j) * s[j];
        gsc[j] += go.at2(i, j) * x.at2(i, j);
      }
    }
  });
}

NodeId Graph::mean_pool(NodeId frames) {
  const Tensor& x = value(frames);
  require_rank("mean_pool", x, 2);
  std::size_t t = x.dim(0), d = x.dim(1);
  Tensor out({d});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[j] += x.at2(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) out[j] /= static_cast<double>(t);
  NodeId id = nodes_.size();
  return make_node("mean_pool", std::move(out), [id, frames, t, d](Graph& g) {
    const Tensor& go = g.gradient(id);
    Tensor& gx = g.grad_slot(frames);
    double inv_t = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < d; ++j) gx.at2(i, j) += go[j] * inv_t;
    }
  });
}

namespace {

// Channel moments shared by statistics_pool and standardize: population
// mean and std (1/T normalization).
void channel_moments(const Tensor& x, std::vector<double>& mean, std::vector<double>& stdev) {
  std::size_t t = x.dim(0), d = x.dim(1);
  mean.assign(d, 0.0);
  stdev.assign(d, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at2(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double c = x.at2(i, j) - mean[j];
      stdev[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    stdev[j] = std::sqrt(stdev[j] / static_cast<double>(t));
  }
}

}  // namespace

NodeId Graph::statistics_pool(NodeId frames, double eps) {
  const Tensor& x = value(frames);
  require_rank("statistics_pool", x, 2);
  std::size_t t = x.dim(0), d = x.dim(1);
  std::vector<double> mean, stdev;
  channel_moments(x, mean, stdev);
  Tensor out({2 * d});
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = mean[j];
    out[d + j] = stdev[j];
  }
  NodeId id = nodes_.size();
  return make_node("statistics_pool", std::move(out),
                   [id, frames, t, d, eps, mean, stdev](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& x = g.value(frames);
    Tensor& gx = g.grad_slot(frames);
    double inv_t = 1.0 / static_cast<double>(t);
    for (std::size_t j = 0; j < d; ++j) {
      double gm = go[j] * inv_t;
      // d(std_j)/dx_tj = (x_tj - mean_j) / (T * std_j); clamped at zero std.
      double gs = stdev[j] > eps ? go[d + j] / (static_cast<double>(t) * stdev[j]) : 0.0;
      for (std::size_t i = 0; i < t; ++i) {
        gx.at2(i, j) += gm + gs * (x.at2(i, j) - mean[j]);
      }
    }
  });
}

NodeId Graph::standardize(NodeId frames, double eps) {
  const Tensor& x = value(frames);
  require_rank("standardize", x, 2);
  std::size_t t = x.dim(0), d = x.dim(1);
  if (t < 2) {
    throw ValueError("standardize: needs at least 2 frames, got " + std::to_string(t));
  }
  std::vector<double> mean, stdev;
  channel_moments(x, mean, stdev);
  Tensor out({t, d});
  for (std::size_t j = 0; j < d; ++j) {
    if (stdev[j] > eps) {
      for (std::size_t i = 0; i < t; ++i) out.at2(i, j) = (x.at2(i, j) - mean[j]) / stdev[j];
    }
    // else: degenerate channel stays all-zero.
  }
  NodeId id = nodes_.size();
  return make_node("standardize", std::move(out), [id, frames, t, d, eps, stdev](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& o = g.value(id);
    Tensor& gx = g.grad_slot(frames);
    // For o = (x - mean)/std per channel:
    //   dL/dx_t = (G_t - mean(G) - o_t * mean(G .* o)) / std
    for (std::size_t j = 0; j < d; ++j) {
      if (stdev[j] <= eps) continue;  // zero gradient on degenerate channels
      double gbar = 0.0, gobar = 0.0;
      for (std::size_t i = 0; i < t; ++i) {
        gbar += go.at2(i, j);
        gobar += go.at2(i, j) * o.at2(i, j);
      }
      gbar /= static_cast<double>(t);
      gobar /= static_cast<double>(t);
      for (std::size_t i = 0; i < t; ++i) {
        gx.at2(i, j) += (go.at2(i, j) - gbar - o.at2(i, j) * gobar) / stdev[j];
      }
    }
  });
}

NodeId Graph::correlation_uppertri(NodeId frames) {
  const Tensor& o = value(frames);
  require_rank("correlation_uppertri", o, 2);
  std::size_t t = o.dim(0), d = o.dim(1);
  if (t < 2) {
    throw ValueError("correlation_uppertri: needs at least 2 frames, got " + std::to_string(t));
  }
  if (d < 2) {
    throw ValueError("correlation_uppertri: needs at least 2 channels, got " + std::to_string(d));
  }
  Tensor out({d * (d - 1) / 2});
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j, ++idx) {
      double acc = 0.0;
      for (std::size_t s = 0; s < t; ++s) acc += o.at2(s, i) * o.at2(s, j);
      out[idx] = acc / static_cast<double>(t);
    }
  }
  NodeId id = nodes_.size();
  return make_node("correlation_uppertri", std::move(out), [id, frames, t, d](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& o = g.value(frames);
    Tensor& gx = g.grad_slot(frames);
    // dL/dO = (1/T) * O * Ghat with Ghat the symmetrized gradient matrix
    // (zero diagonal).
    double inv_t = 1.0 / static_cast<double>(t);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j, ++idx) {
        double gij = go[idx] * inv_t;
        if (gij == 0.0) continue;
        for (std::size_t s = 0; s < t; ++s) {
          gx.at2(s, i) += gij * o.at2(s, j);
          gx.at2(s, j) += gij * o.at2(s, i);
        }
      }
    }
  });
}

NodeId Graph::conv1d(NodeId x, NodeId w, std::size_t kernel, std::size_t dilation) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  require_rank("conv1d", tx, 2);
  require_rank("conv1d", tw, 2);
  if (kernel == 0 || dilation == 0) {
    throw ValueError("conv1d: kernel and dilation must be positive");
  }
  std::size_t t = tx.dim(0), cin = tx.dim(1);
  if (tw.dim(0) != kernel * cin) {
    throw ShapeError("conv1d: weight rows " + std::to_string(tw.dim(0)) +
                     " != kernel*channels " + std::to_string(kernel * cin));
  }
  std::size_t cout = tw.dim(1);
  std::size_t span = (kernel - 1) * dilation;
  if (t <= span) {
    throw ValueError("conv1d: input has " + std::to_string(t) +
                     " frames but the receptive field needs " + std::to_string(span + 1));
  }
  std::size_t tout = t - span;
  Tensor out({tout, cout});
  for (std::size_t s = 0; s < tout; ++s) {
    double* orow = out.data() + s * cout;
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* xrow = tx.data() + (s + k * dilation) * cin;
      const double* wblock = tw.data() + k * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        double xv = xrow[ci];
        if (xv == 0.0) continue;
        const double* wrow = wblock + ci * cout;
        for (std::size_t co = 0; co < cout; ++co) orow[co] += xv * wrow[co];
      }
    }
  }
  NodeId id = nodes_.size();
  return make_node("conv1d", std::move(out),
                   [id, x, w, kernel, dilation, cin, cout, tout](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& tx = g.value(x);
    const Tensor& tw = g.value(w);
    Tensor& gx = g.grad_slot(x);
    Tensor& gw = g.grad_slot(w);
    for (std::size_t s = 0; s < tout; ++s) {
      const double* grow = go.data() + s * cout;
      for (std::size_t k = 0; k < kernel; ++k) {
        std::size_t ti = s + k * dilation;
        const double* xrow = tx.data() + ti * cin;
        double* gxrow = gx.data() + ti * cin;
        const double* wblock = tw.data() + k * cin * cout;
        double* gwblock = gw.data() + k * cin * cout;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* wrow = wblock + ci * cout;
          double* gwrow = gwblock + ci * cout;
          double xv = xrow[ci];
          double acc = 0.0;
          for (std::size_t co = 0; co < cout; ++co) {
            acc += grow[co] * wrow[co];
            gwrow[co] += xv * grow[co];
          }
          gxrow[ci] += acc;
        }
      }
    }
  });
}

NodeId Graph::l2_normalize(NodeId a) {
  const Tensor& x = value(a);
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("l2_normalize: expected rank-1 or rank-2, got " + x.shape_string());
  }
  std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  std::size_t d = x.rank() == 2 ? x.dim(1) : x.dim(0);
  Tensor out(x.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += row[j] * row[j];
    double norm = std::sqrt(s);
    if (norm == 0.0) {
      throw ValueError("l2_normalize: zero-norm vector cannot be normalized");
    }
    norms[r] = norm;
    double* orow = out.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) orow[j] = row[j] / norm;
  }
  NodeId id = nodes_.size();
  return make_node("l2_normalize", std::move(out), [id, a, rows, d, norms](Graph& g) {
    const Tensor& go = g.gradient(id);
    const Tensor& y = g.value(id);
    Tensor& gx = g.grad_slot(a);
    // For y = x / |x|: dL/dx = (G - y * (G . y)) / |x| per row.
    for (std::size_t r = 0; r < rows; ++r) {
      const double* grow = go.data() + r * d;
      const double* yrow = y.data() + r * d;
      double* gxrow = gx.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += grow[j] * yrow[j];
      for (std::size_t j = 0; j < d; ++j) gxrow[j] += (grow[j] - yrow[j] * dot) / norms[r];
    }
  });
}

NodeId Graph::margin_logits(NodeId cosines, std::size_t label, double scale, double margin) {
  const Tensor& c = value(cosines);
  require_rank("margin_logits", c, 1);
  if (label >= c.dim(0)) {
    throw ValueError("margin_logits: label " + std::to_string(label) + " out of range for " +
                     std::to_string(c.dim(0)) + " classes");
  }
  if (scale <= 0.0) throw ValueError("margin_logits: scale must be positive");
  if (margin < 0.0) throw ValueError("margin_logits: margin must be non-negative");
  Tensor out = c;
  out[label] -= margin;
  for (double& v : out.raw()) v *= scale;
  NodeId id = nodes_.size();
  return make_node("margin_logits", std::move(out), [id, cosines, scale](Graph& g) {
    g.grad_slot(cosines).add_scaled(g.gradient(id), scale);
  });
}

NodeId Graph::cross_entropy(NodeId logits, std::size_t label) {
  const Tensor& x = value(logits);
  require_rank("cross_entropy", x, 1);
  std::size_t n = x.dim(0);
  if (label >= n) {
    throw ValueError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(n) + " classes");
  }
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(x[i] - mx);
  double loss = mx + std::log(z) - x[label];
  NodeId id = nodes_.size();
  return make_node("cross_entropy", Tensor::scalar(loss), [id, logits, label, n, mx, z](Graph& g) {
    double go = g.gradient(id)[0];
    const Tensor& x = g.value(logits);
    Tensor& gx = g.grad_slot(logits);
    for (std::size_t i = 0; i < n; ++i) {
      double p = std::exp(x[i] - mx) / z;
      gx[i] += go * (p - (i == label ? 1.0 : 0.0));
    }
  });
}

void Graph::backward_scaled(NodeId root, double seed) {
  const Tensor& v = value(root);
  if (v.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + v.shape_string());
  }
  if (!std::isfinite(v[0])) {
    throw NumericError("backward: loss is not finite");
  }
  grad_slot(root)[0] += seed;
  replay(root);
}

void Graph::backward_with_cotangent(NodeId out, const Tensor& cotangent) {
  if (!cotangent.same_shape(value(out))) {
    throw ShapeError("backward_with_cotangent: cotangent shape " + cotangent.shape_string() +
                     " vs node shape " + value(out).shape_string());
  }
  grad_slot(out).add_scaled(cotangent, 1.0);
  replay(out);
}

void Graph::replay(NodeId root) {
  for (std::size_t i = root + 1; i-- > 0;) {
    if (nodes_[i].backprop) nodes_[i].backprop(*this);
  }
  for (std::size_t i = 0; i <= root; ++i) {
    Parameter* p = nodes_[i].param;
    if (p != nullptr && p->trainable) {
      p->grad.add_scaled(nodes_[i].grad, 1.0);
    }
  }
}

}  // namespace corrpool
