#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace ltlrl {

enum class Head { Linear, Softmax };
enum class Loss { TdMse, CrossEntropy };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out × in
  Eigen::VectorXd bias;
};

// Fully connected network: ReLU hidden layers, linear or softmax output. An optional affine
// input transform (x - offset) ⊙ scale is stored with the weights and is not trained.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, Head head);

  // He-uniform weights, zero biases.
  static Mlp init(const std::vector<std::size_t>& sizes, Head head, std::uint64_t seed);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  Head head() const noexcept { return head_; }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  void set_input_transform(Eigen::VectorXd offset, Eigen::VectorXd scale);
  const Eigen::VectorXd& input_offset() const noexcept { return offset_; }
  const Eigen::VectorXd& input_scale() const noexcept { return scale_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  // Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

  std::size_t num_parameters() const;
  // Flat view over all parameters, layer by layer: weights row-major, then biases.
  double& parameter(std::size_t i);
  double parameter(std::size_t i) const;

  bool all_finite() const;

  void save(const std::filesystem::path& file) const;
  static Mlp load(const std::filesystem::path& file);

  bool operator==(const Mlp& other) const;

 private:
  Eigen::MatrixXd transform(const Eigen::MatrixXd& inputs) const;

  std::vector<std::size_t> sizes_;
  Head head_ = Head::Linear;
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd scale_;
};

// For TdMse, `index` holds the taken action and `target` the regression target y; loss is
// ½·mean((y − Q[a])²) and only output a is trained. For CrossEntropy, `index` holds the class
// label and `target` is ignored.
struct Batch {
  Eigen::MatrixXd inputs;  // input_size × B
  std::vector<std::size_t> index;
  Eigen::VectorXd target;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

double batch_loss(const Mlp& net, const Batch& batch, Loss loss);

// Mean loss and its gradient, laid out like Mlp::parameter.
double loss_gradient(const Mlp& net, const Batch& batch, Loss loss, std::vector<DenseLayer>& grads);

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const noexcept { return config_; }
  void apply(Mlp& net, const std::vector<DenseLayer>& grads);

 private:
  OptimizerConfig config_;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  long step_ = 0;
};

// One gradient step; returns the batch loss before the update. Throws DivergenceError when
// the loss or any parameter becomes non-finite.
double backward_and_step(Mlp& net, const Batch& batch, Loss loss, Optimizer& optimizer);

// Index of the largest entry, lowest index on ties.
std::size_t argmax(const Eigen::VectorXd& v);

}  // namespace ltlrl
