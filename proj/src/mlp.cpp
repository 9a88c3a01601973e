#include "csrl/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace csrl {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("mlp layer size < 1");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_.assign(total, 0.0);
}

void Mlp::init(Rng& rng, double output_scale) {
  const std::size_t layers = offsets_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out)) * (l + 1 == layers ? output_scale : 1.0);
    double* w = params_.data() + offsets_[l];
    for (int i = 0; i < in * out; ++i) w[i] = uniform_real(rng, -limit, limit);
    for (int i = 0; i < out; ++i) w[in * out + i] = 0.0;
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  const std::size_t layers = offsets_.size();
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstMatMap w(params_.data() + offsets_[l], out, in);
    ConstVecMap b(params_.data() + offsets_[l] + static_cast<std::size_t>(in) * out, out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l + 1 < layers) {
      a = z.array().tanh().matrix();
      if (cache) cache->activations.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size");
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = offsets_.size(); l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Eigen::MatrixXd& a_prev = cache.activations[l];
    MatMap gw(grad.data() + offsets_[l], out, in);
    VecMap gb(grad.data() + offsets_[l] + static_cast<std::size_t>(in) * out, out);
    gw.noalias() += delta * a_prev.transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      ConstMatMap w(params_.data() + offsets_[l], out, in);
      Eigen::MatrixXd back = w.transpose() * delta;
      delta = (back.array() * (1.0 - a_prev.array().square())).matrix();
    }
  }
}

}  // namespace csrl
