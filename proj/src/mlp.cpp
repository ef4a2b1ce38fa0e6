#include "uavris/mlp.hpp"

#include <cmath>

namespace uavris::drl {

void MlpGrads::set_zero() {
  for (auto& w : dW) w.setZero();
  for (auto& b : db) b.setZero();
}

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw DimensionError("an MLP needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i], out = dims[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l;
    l.W.resize(out, in);
    l.b.resize(out);
    // fill column-major then biases, fixed order for reproducibility
    for (Eigen::Index c = 0; c < l.W.cols(); ++c)
      for (Eigen::Index r = 0; r < l.W.rows(); ++r) l.W(r, c) = u(rng);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = u(rng);
    layers_.push_back(std::move(l));
  }
}

Mlp Mlp::zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) throw DimensionError("an MLP needs at least input and output dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    m.layers_.push_back({RMatrix::Zero(dims[i + 1], dims[i]), RVector::Zero(dims[i + 1])});
  return m;
}

std::vector<int> Mlp::dims() const {
  std::vector<int> d{input_dim()};
  for (const auto& l : layers_) d.push_back(static_cast<int>(l.W.rows()));
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

RMatrix Mlp::forward(const RMatrix& X) const {
  RMatrix h = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    RMatrix z = layers_[i].W * h;
    z.colwise() += layers_[i].b;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

RMatrix Mlp::forward(const RMatrix& X, Tape& tape) const {
  tape.inputs.clear();
  tape.pre.clear();
  RMatrix h = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    tape.inputs.push_back(h);
    RMatrix z = layers_[i].W * h;
    z.colwise() += layers_[i].b;
    if (i + 1 < layers_.size()) {
      tape.pre.push_back(z);
      z = z.cwiseMax(0.0);
    }
    h = std::move(z);
  }
  return h;
}

RMatrix Mlp::backward(const Tape& tape, const RMatrix& dY, MlpGrads* grads) const {
  RMatrix delta = dY;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) delta = delta.cwiseProduct((tape.pre[i].array() > 0.0).cast<double>().matrix());
    if (grads) {
      grads->dW[i].noalias() += delta * tape.inputs[i].transpose();
      grads->db[i] += delta.rowwise().sum();
    }
    delta = layers_[i].W.transpose() * delta;
  }
  return delta;
}

MlpGrads Mlp::make_grads() const {
  MlpGrads g;
  for (const auto& l : layers_) {
    g.dW.push_back(RMatrix::Zero(l.W.rows(), l.W.cols()));
    g.db.push_back(RVector::Zero(l.b.size()));
  }
  return g;
}

RVector Mlp::flatten() const {
  RVector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (const auto& l : layers_) {
    flat.segment(off, l.W.size()) = l.W.reshaped();
    off += l.W.size();
    flat.segment(off, l.b.size()) = l.b;
    off += l.b.size();
  }
  return flat;
}

void Mlp::assign(const RVector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) throw DimensionError("parameter vector size mismatch");
  Eigen::Index off = 0;
  for (auto& l : layers_) {
    l.W.reshaped() = flat.segment(off, l.W.size());
    off += l.W.size();
    l.b = flat.segment(off, l.b.size());
    off += l.b.size();
  }
}

RVector Mlp::flatten(const MlpGrads& grads) {
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i) total += grads.dW[i].size() + grads.db[i].size();
  RVector flat(total);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i) {
    flat.segment(off, grads.dW[i].size()) = grads.dW[i].reshaped();
    off += grads.dW[i].size();
    flat.segment(off, grads.db[i].size()) = grads.db[i];
    off += grads.db[i].size();
  }
  return flat;
}

Adam::Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg), m_(net.make_grads()), v_(net.make_grads()) {}

void Adam::step(Mlp& net, const MlpGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step = cfg_.lr / c1;
  const double sqrt_c2 = std::sqrt(c2);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    param.array() -= step * m.array() / (v.array().sqrt() / sqrt_c2 + cfg_.eps);
  };
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].W, grads.dW[i], m_.dW[i], v_.dW[i]);
    update(layers[i].b, grads.db[i], m_.db[i], v_.db[i]);
  }
}

}  // namespace uavris::drl
