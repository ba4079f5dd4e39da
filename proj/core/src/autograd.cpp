#include "procap/autograd.hpp"

#include "procap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

namespace procap::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
}

// Builds a result node. Parents are retained only when some parent needs a
// gradient and recording is on; otherwise the result is a constant.
Tensor make_result(Matrix value, std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

void backward(const Tensor& root, double seed) {
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Node& r = *root.node();
  r.accumulate(Matrix::Constant(r.value.rows(), r.value.cols(), seed));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward_fn || node->grad.size() == 0) continue;
    node->backward_fn(*node);
    // Interior gradients are consumed exactly once.
    node->grad.resize(0, 0);
  }
}

Tensor detach(const Tensor& t) { return Tensor::constant(t.value()); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul inner dimensions differ");
  Matrix out;
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Matrix g;
      g.noalias() = self.grad * pb.value.transpose();
      pa.accumulate(g);
    }
    if (pb.requires_grad) {
      Matrix g;
      g.noalias() = pa.value.transpose() * self.grad;
      pb.accumulate(g);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt inner dimensions differ");
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Matrix g;
      g.noalias() = self.grad * pb.value;
      pa.accumulate(g);
    }
    if (pb.requires_grad) {
      Matrix g;
      g.noalias() = self.grad.transpose() * pa.value;
      pb.accumulate(g);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shapes differ");
  return make_result(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    self.parents[0]->accumulate(self.grad);
    self.parents[1]->accumulate(self.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row expects a 1xC row");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_result(std::move(out), {a.node(), row.node()}, [](Node& self) {
    self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      self.parents[1]->accumulate(self.grad.colwise().sum());
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shapes differ");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Tensor mul_col(const Tensor& a, const Tensor& m) {
  require(m.cols() == 1 && m.rows() == a.rows(), "mul_col expects an Nx1 gate");
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) out.row(i) *= m.value()(i, 0);
  return make_result(std::move(out), {a.node(), m.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pm = *self.parents[1];
    if (pa.requires_grad) {
      Matrix g = self.grad;
      for (Index i = 0; i < g.rows(); ++i) g.row(i) *= pm.value(i, 0);
      pa.accumulate(g);
    }
    if (pm.requires_grad) {
      pm.accumulate(self.grad.cwiseProduct(pa.value).rowwise().sum());
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a.node()},
                     [s](Node& self) { self.parents[0]->accumulate(self.grad * s); });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluK * x * x * x)));
  });
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    Matrix d = x.unaryExpr([](double v) {
      const double t = std::tanh(kGeluC * (v + kGeluK * v * v * v));
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluK * v * v);
    });
    self.parents[0]->accumulate(self.grad.cwiseProduct(d));
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    const Matrix& y = self.value;
    self.parents[0]->accumulate(self.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

namespace {

Matrix softmax_forward(const Matrix& a, bool causal, Index offset) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const Index limit = causal ? std::min<Index>(a.cols(), i + offset + 1) : a.cols();
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < limit; ++j) mx = std::max(mx, a(i, j));
    double sum = 0.0;
    for (Index j = 0; j < limit; ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      sum += out(i, j);
    }
    for (Index j = 0; j < limit; ++j) out(i, j) /= sum;
    for (Index j = limit; j < a.cols(); ++j) out(i, j) = 0.0;
  }
  return out;
}

void softmax_backward(Node& self) {
  const Matrix& y = self.value;
  Matrix g = self.grad.cwiseProduct(y);
  const Eigen::VectorXd dot = g.rowwise().sum();
  g -= (y.array().colwise() * dot.array()).matrix();
  self.parents[0]->accumulate(g);
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  return make_result(softmax_forward(a.value(), false, 0), {a.node()}, softmax_backward);
}

Tensor causal_softmax_rows(const Tensor& a, Index offset) {
  return make_result(softmax_forward(a.value(), true, offset), {a.node()}, softmax_backward);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 &&
              beta.cols() == x.cols(),
          "layer_norm affine parameters must be 1xC");
  const Index n = x.rows();
  const Index c = x.cols();
  auto xhat = std::make_shared<Matrix>(n, c);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    (*rstd)(i) = 1.0 / std::sqrt(var + eps);
    xhat->row(i) = (x.value().row(i).array() - mu) * (*rstd)(i);
  }
  Matrix out = xhat->array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_result(std::move(out), {x.node(), gamma.node(), beta.node()},
                     [xhat, rstd](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pg = *self.parents[1];
                       Node& pb = *self.parents[2];
                       const Matrix& dy = self.grad;
                       if (pg.requires_grad) pg.accumulate(dy.cwiseProduct(*xhat).colwise().sum());
                       if (pb.requires_grad) pb.accumulate(dy.colwise().sum());
                       if (px.requires_grad) {
                         const double c = static_cast<double>(dy.cols());
                         Matrix dxhat = dy.array().rowwise() * pg.value.row(0).array();
                         Matrix dx(dy.rows(), dy.cols());
                         for (Index i = 0; i < dy.rows(); ++i) {
                           const double s1 = dxhat.row(i).sum();
                           const double s2 = dxhat.row(i).dot(xhat->row(i));
                           dx.row(i) = ((*rstd)(i) / c) *
                                       (c * dxhat.row(i).array() - s1 - xhat->row(i).array() * s2);
                         }
                         px.accumulate(dx);
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> parents;
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    parents.push_back(p.node());
  }
  return make_result(std::move(out), std::move(parents), [](Node& self) {
    Index r = 0;
    for (auto& p : self.parents) {
      const Index n = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(r, n));
      r += n;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> parents;
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    parents.push_back(p.node());
  }
  return make_result(std::move(out), std::move(parents), [](Node& self) {
    Index c = 0;
    for (auto& p : self.parents) {
      const Index n = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(c, n));
      c += n;
    }
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows out of range");
  return make_result(a.value().middleRows(start, count), {a.node()},
                     [start, count](Node& self) {
                       Node& p = *self.parents[0];
                       Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
                       g.middleRows(start, count) = self.grad;
                       p.accumulate(g);
                     });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols out of range");
  return make_result(a.value().middleCols(start, count), {a.node()},
                     [start, count](Node& self) {
                       Node& p = *self.parents[0];
                       Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
                       g.middleCols(start, count) = self.grad;
                       p.accumulate(g);
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows id out of range");
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_result(std::move(out), {table.node()}, [idx = std::move(idx)](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    p.accumulate(g);
  });
}

Tensor mean_rows(const Tensor& a) {
  require(a.rows() > 0, "mean_rows of an empty matrix");
  Matrix out = a.value().colwise().sum() / static_cast<double>(a.rows());
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix g = self.grad.replicate(p.value.rows(), 1) / static_cast<double>(p.value.rows());
    p.accumulate(g);
  });
}

Tensor conv3x3(const Tensor& x, Index height, Index width, const Tensor& weight,
               const Tensor& bias) {
  const Index cin = x.cols();
  require(x.rows() == height * width, "conv3x3 grid size mismatch");
  require(weight.rows() == 9 * cin, "conv3x3 weight rows must be 9*Cin");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "conv3x3 bias must be 1xCout");

  auto cols = std::make_shared<Matrix>(Matrix::Zero(height * width, 9 * cin));
  for (Index y = 0; y < height; ++y) {
    for (Index xx = 0; xx < width; ++xx) {
      const Index r = y * width + xx;
      for (Index ky = 0; ky < 3; ++ky) {
        const Index sy = y + ky - 1;
        if (sy < 0 || sy >= height) continue;
        for (Index kx = 0; kx < 3; ++kx) {
          const Index sx = xx + kx - 1;
          if (sx < 0 || sx >= width) continue;
          cols->block(r, (ky * 3 + kx) * cin, 1, cin) = x.value().row(sy * width + sx);
        }
      }
    }
  }
  Matrix out;
  out.noalias() = (*cols) * weight.value();
  out.rowwise() += bias.value().row(0);
  return make_result(
      std::move(out), {x.node(), weight.node(), bias.node()},
      [cols, height, width, cin](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        if (pw.requires_grad) {
          Matrix g;
          g.noalias() = cols->transpose() * self.grad;
          pw.accumulate(g);
        }
        if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
        if (px.requires_grad) {
          Matrix dcols;
          dcols.noalias() = self.grad * pw.value.transpose();
          Matrix dx = Matrix::Zero(height * width, cin);
          for (Index y = 0; y < height; ++y) {
            for (Index xx = 0; xx < width; ++xx) {
              const Index r = y * width + xx;
              for (Index ky = 0; ky < 3; ++ky) {
                const Index sy = y + ky - 1;
                if (sy < 0 || sy >= height) continue;
                for (Index kx = 0; kx < 3; ++kx) {
                  const Index sx = xx + kx - 1;
                  if (sx < 0 || sx >= width) continue;
                  dx.row(sy * width + sx) += dcols.block(r, (ky * 3 + kx) * cin, 1, cin);
                }
              }
            }
          }
          px.accumulate(dx);
        }
      });
}

Tensor deconv4x4s2(const Tensor& x, Index height, Index width, const Tensor& weight,
                   const Tensor& bias) {
  const Index cin = x.cols();
  require(x.rows() == height * width, "deconv grid size mismatch");
  require(weight.rows() == cin && weight.cols() % 16 == 0, "deconv weight must be Cin x 16*Cout");
  const Index cout = weight.cols() / 16;
  require(bias.rows() == 1 && bias.cols() == cout, "deconv bias must be 1xCout");
  const Index oh = 2 * height;
  const Index ow = 2 * width;

  Matrix taps;
  taps.noalias() = x.value() * weight.value();
  Matrix out = Matrix::Zero(oh * ow, cout);
  for (Index iy = 0; iy < height; ++iy) {
    for (Index ix = 0; ix < width; ++ix) {
      const Index r = iy * width + ix;
      for (Index ky = 0; ky < 4; ++ky) {
        const Index oy = 2 * iy - 1 + ky;
        if (oy < 0 || oy >= oh) continue;
        for (Index kx = 0; kx < 4; ++kx) {
          const Index ox = 2 * ix - 1 + kx;
          if (ox < 0 || ox >= ow) continue;
          out.row(oy * ow + ox) += taps.block(r, (ky * 4 + kx) * cout, 1, cout);
        }
      }
    }
  }
  out.rowwise() += bias.value().row(0);
  return make_result(
      std::move(out), {x.node(), weight.node(), bias.node()},
      [height, width, cout, oh, ow](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
        if (!px.requires_grad && !pw.requires_grad) return;
        Matrix gathered = Matrix::Zero(height * width, 16 * cout);
        for (Index iy = 0; iy < height; ++iy) {
          for (Index ix = 0; ix < width; ++ix) {
            const Index r = iy * width + ix;
            for (Index ky = 0; ky < 4; ++ky) {
              const Index oy = 2 * iy - 1 + ky;
              if (oy < 0 || oy >= oh) continue;
              for (Index kx = 0; kx < 4; ++kx) {
                const Index ox = 2 * ix - 1 + kx;
                if (ox < 0 || ox >= ow) continue;
                gathered.block(r, (ky * 4 + kx) * cout, 1, cout) = self.grad.row(oy * ow + ox);
              }
            }
          }
        }
        if (pw.requires_grad) {
          Matrix g;
          g.noalias() = px.value.transpose() * gathered;
          pw.accumulate(g);
        }
        if (px.requires_grad) {
          Matrix g;
          g.noalias() = gathered * pw.value.transpose();
          px.accumulate(g);
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id) {
  require(static_cast<Index>(targets.size()) == logits.rows(), "cross_entropy target count");
  const Matrix& z = logits.value();
  auto probs = std::make_shared<Matrix>(z.rows(), z.cols());
  double total = 0.0;
  Index counted = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    double sum = 0.0;
    for (Index j = 0; j < z.cols(); ++j) {
      (*probs)(i, j) = std::exp(z(i, j) - mx);
      sum += (*probs)(i, j);
    }
    probs->row(i) /= sum;
    const int t = targets[static_cast<std::size_t>(i)];
    if (t == ignore_id) continue;
    require(t >= 0 && t < z.cols(), "cross_entropy target out of range");
    total += (mx + std::log(sum)) - z(i, t);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::kEmptySequence, "no scored positions");
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(counted);
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(std::move(out), {logits.node()},
                     [probs, tgt = std::move(tgt), ignore_id, counted](Node& self) {
                       const double g = self.grad(0, 0) / static_cast<double>(counted);
                       Matrix d = Matrix::Zero(probs->rows(), probs->cols());
                       for (Index i = 0; i < probs->rows(); ++i) {
                         const int t = tgt[static_cast<std::size_t>(i)];
                         if (t == ignore_id) continue;
                         d.row(i) = probs->row(i) * g;
                         d(i, t) -= g;
                       }
                       self.parents[0]->accumulate(d);
                     });
}

Tensor binary_cross_entropy(const Tensor& pred, const Matrix& target, double eps) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "bce shapes differ");
  require(pred.value().size() > 0, "bce of an empty grid");
  const Matrix& p = pred.value();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index j = 0; j < p.cols(); ++j) {
      const double c = std::clamp(p(i, j), eps, 1.0 - eps);
      const double t = target(i, j);
      total += -(t * std::log(c) + (1.0 - t) * std::log(1.0 - c));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  return make_result(std::move(out), {pred.node()}, [target, eps, n](Node& self) {
    const Matrix& p = self.parents[0]->value;
    const double g = self.grad(0, 0) / n;
    Matrix d(p.rows(), p.cols());
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index j = 0; j < p.cols(); ++j) {
        const double v = p(i, j);
        if (v <= eps || v >= 1.0 - eps) {
          d(i, j) = 0.0;
        } else {
          const double t = target(i, j);
          d(i, j) = g * (-(t / v) + (1.0 - t) / (1.0 - v));
        }
      }
    }
    self.parents[0]->accumulate(d);
  });
}

}  // namespace procap::ag

namespace procap::ag {

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal) {
  require(q.cols() == k.cols() && k.cols() == v.cols(), "attention widths differ");
  require(k.rows() == v.rows(), "attention key/value counts differ");
  require(heads > 0 && q.cols() % heads == 0, "attention width not divisible by heads");
  const Index dh = q.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(heads));
  Matrix out(q.rows(), q.cols());
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dh, dh);
    const auto kh = k.value().middleCols(h * dh, dh);
    const auto vh = v.value().middleCols(h * dh, dh);
    Matrix scores;
    scores.noalias() = (qh * kh.transpose()) * s;
    (*probs)[static_cast<std::size_t>(h)] = softmax_forward(scores, causal, 0);
    out.middleCols(h * dh, dh).noalias() = (*probs)[static_cast<std::size_t>(h)] * vh;
  }
  return make_result(
      std::move(out), {q.node(), k.node(), v.node()}, [probs, heads, dh, s](Node& self) {
        Node& pq = *self.parents[0];
        Node& pk = *self.parents[1];
        Node& pv = *self.parents[2];
        Matrix dq = Matrix::Zero(pq.value.rows(), pq.value.cols());
        Matrix dk = Matrix::Zero(pk.value.rows(), pk.value.cols());
        Matrix dv = Matrix::Zero(pv.value.rows(), pv.value.cols());
        for (int h = 0; h < heads; ++h) {
          const Matrix& a = (*probs)[static_cast<std::size_t>(h)];
          const auto go = self.grad.middleCols(h * dh, dh);
          const auto qh = pq.value.middleCols(h * dh, dh);
          const auto kh = pk.value.middleCols(h * dh, dh);
          const auto vh = pv.value.middleCols(h * dh, dh);
          dv.middleCols(h * dh, dh).noalias() = a.transpose() * go;
          Matrix da;
          da.noalias() = go * vh.transpose();
          Matrix ds = da.cwiseProduct(a);
          const Eigen::VectorXd dot = ds.rowwise().sum();
          ds -= (a.array().colwise() * dot.array()).matrix();
          ds *= s;
          dq.middleCols(h * dh, dh).noalias() = ds * kh;
          dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qh;
        }
        pq.accumulate(dq);
        pk.accumulate(dk);
        pv.accumulate(dv);
      });
}

}  // namespace procap::ag
