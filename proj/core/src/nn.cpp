#include "procap/nn.hpp"

#include "procap/error.hpp"

#include <cmath>

namespace procap::nn {

Tensor ParamStore::add(const std::string& name, Matrix init) {
  if (find(name) != nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate parameter name " + name);
  }
  params_.push_back({name, Tensor::parameter(std::move(init))});
  return params_.back().tensor;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

Tensor& ParamStore::at(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown parameter " + name);
}

const Tensor& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : params_) {
    if (p.name.starts_with(prefix)) p.tensor.set_requires_grad(trainable);
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.value().size());
  return n;
}

Matrix normal_matrix(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void round_to_float(Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

Linear Linear::create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", normal_matrix(in, out, 1.0 / std::sqrt(double(in)), rng));
  l.bias = store.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  return ag::add_row(ag::matmul(x, weight), bias);
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, Index dim) {
  LayerNorm ln;
  ln.gamma = store.add(name + ".gamma", Matrix::Ones(1, dim));
  ln.beta = store.add(name + ".beta", Matrix::Zero(1, dim));
  return ln;
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ag::layer_norm(x, gamma, beta); }

MultiHeadAttention MultiHeadAttention::create(ParamStore& store, const std::string& name,
                                              Index dim, int heads, Rng& rng) {
  if (heads <= 0 || dim % heads != 0) {
    throw Error(ErrorCode::kDimensionMismatch, name + ": width not divisible by head count");
  }
  MultiHeadAttention a;
  a.query = Linear::create(store, name + ".q", dim, dim, rng);
  a.key = Linear::create(store, name + ".k", dim, dim, rng);
  a.value = Linear::create(store, name + ".v", dim, dim, rng);
  a.output = Linear::create(store, name + ".o", dim, dim, rng);
  a.heads = heads;
  return a;
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& keys_values,
                                      bool causal) const {
  auto mixed = ag::attention(query(queries), key(keys_values), value(keys_values), heads, causal);
  return output(mixed);
}

FeedForward FeedForward::create(ParamStore& store, const std::string& name, Index dim,
                                Index hidden, Rng& rng) {
  FeedForward f;
  f.up = Linear::create(store, name + ".up", dim, hidden, rng);
  f.down = Linear::create(store, name + ".down", hidden, dim, rng);
  return f;
}

Tensor FeedForward::operator()(const Tensor& x) const { return down(ag::gelu(up(x))); }

Matrix sinusoid_1d(Index length, Index dim) {
  Matrix table(length, dim);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / double(dim));
      const double angle = static_cast<double>(pos) * freq;
      table(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

Matrix sinusoid_2d(Index height, Index width, Index dim) {
  const Index half = dim / 2;
  const Matrix ys = sinusoid_1d(height, half);
  const Matrix xs = sinusoid_1d(width, dim - half);
  Matrix table(height * width, dim);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      table.row(y * width + x) << ys.row(y), xs.row(x);
    }
  }
  return table;
}

}  // namespace procap::nn
