#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "csrl/random.hpp"

namespace csrl {

// Fully connected network with tanh hidden layers and a linear output layer.
// Parameters live in one flat buffer: per layer, W as a column-major
// out x in block followed by b.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Xavier-uniform weights, zero biases; the output layer is scaled by
  // output_scale.
  void init(Rng& rng, double output_scale);

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer
  };

  // x is input_dim x batch; returns output_dim x batch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // Accumulates dLoss/dparams into grad given dLoss/doutput.
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_out, std::span<double> grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;  // start of W for each layer
  std::vector<double> params_;
};

}  // namespace csrl
