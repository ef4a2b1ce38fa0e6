#pragma once

#include <cstddef>
#include <vector>

#include "uavris/rng.hpp"
#include "uavris/types.hpp"

namespace uavris::drl {

struct Layer {
  RMatrix W;  ///< out x in
  RVector b;
};

struct MlpGrads {
  std::vector<RMatrix> dW;
  std::vector<RVector> db;

  void set_zero();
};

/// Activations kept from a forward pass for the matching backward pass.
struct Tape {
  std::vector<RMatrix> inputs;  ///< input of every layer
  std::vector<RMatrix> pre;     ///< pre-activation of every hidden layer
};

/// Fully connected network with ReLU hidden layers and a linear output.
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  /// Weights and biases uniform in +-1/sqrt(fan_in).
  Mlp(const std::vector<int>& dims, Rng& rng);
  static Mlp zeros(const std::vector<int>& dims);

  int input_dim() const { return static_cast<int>(layers_.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().W.rows()); }
  std::vector<int> dims() const;
  std::size_t parameter_count() const;

  RMatrix forward(const RMatrix& X) const;
  RMatrix forward(const RMatrix& X, Tape& tape) const;

  /// Back-propagates dL/dY. Parameter gradients are accumulated into
  /// `grads` when non-null; returns dL/dX.
  RMatrix backward(const Tape& tape, const RMatrix& dY, MlpGrads* grads) const;

  MlpGrads make_grads() const;

  RVector flatten() const;
  void assign(const RVector& flat);
  static RVector flatten(const MlpGrads& grads);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimiser holding per-parameter first and second moments.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg);

  /// Descends along `grads`.
  void step(Mlp& net, const MlpGrads& grads);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  MlpGrads m_, v_;
  long t_ = 0;
};

/// A network bundled with its gradient buffers and optimiser state.
struct TrainableMlp {
  Mlp net;
  MlpGrads grads;
  Adam opt;

  TrainableMlp() = default;
  TrainableMlp(Mlp n, const AdamConfig& cfg) : net(std::move(n)), grads(net.make_grads()), opt(net, cfg) {}
};

}  // namespace uavris::drl
