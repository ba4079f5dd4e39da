#pragma once

// Parameter registry and the small layer vocabulary shared by the vision,
// query-encoder and decoder modules.

#include "procap/autograd.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace procap::nn {

using ag::Index;
using ag::Matrix;
using ag::Tensor;

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Ordered, name-addressed set of trainable arrays. Registration order is the
/// serialization order.
class ParamStore {
 public:
  Tensor add(const std::string& name, Matrix init);
  const Tensor* find(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }

  void zero_grad();
  /// Marks every parameter whose name starts with `prefix` as (not) trainable.
  void set_trainable(const std::string& prefix, bool trainable);
  std::size_t scalar_count() const;

 private:
  std::vector<NamedParam> params_;
};

Matrix normal_matrix(Index rows, Index cols, double stddev, Rng& rng);

/// Round every entry to the nearest 32-bit float.
void round_to_float(Matrix& m);

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  static Linear create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(ParamStore& store, const std::string& name, Index dim);
  Tensor operator()(const Tensor& x) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  int heads = 1;

  static MultiHeadAttention create(ParamStore& store, const std::string& name, Index dim,
                                   int heads, Rng& rng);
  Tensor operator()(const Tensor& queries, const Tensor& keys_values, bool causal) const;
};

struct FeedForward {
  Linear up, down;

  static FeedForward create(ParamStore& store, const std::string& name, Index dim, Index hidden,
                            Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Fixed 2-D sinusoidal table, one row per grid cell (row index y*W + x).
/// The first half of the columns encodes y, the second half x.
Matrix sinusoid_2d(Index height, Index width, Index dim);
/// Standard 1-D sinusoidal position table.
Matrix sinusoid_1d(Index length, Index dim);

}  // namespace procap::nn
