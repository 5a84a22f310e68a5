#include "ltlrl/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ltlrl/error.hpp"
#include "ltlrl/random.hpp"

namespace ltlrl {

namespace {

constexpr char kMagic[8] = {'L', 'T', 'L', 'R', 'L', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

// Pre-activation outputs of each layer; activations[0] is the transformed input.
struct Activations {
  std::vector<Eigen::MatrixXd> a;
};

Activations run(const Mlp& net, const Eigen::MatrixXd& x) {
  Activations acts;
  acts.a.reserve(net.layers().size() + 1);
  acts.a.push_back(x);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const DenseLayer& layer = net.layers()[l];
    Eigen::MatrixXd z = layer.weight * acts.a.back();
    z.colwise() += layer.bias;
    if (l + 1 < net.layers().size())
      z = z.cwiseMax(0.0);
    else if (net.head() == Head::Softmax)
      softmax_columns(z);
    acts.a.push_back(std::move(z));
  }
  return acts;
}

void check_batch(const Mlp& net, const Batch& batch, Loss loss) {
  if (batch.size() == 0) throw Error("empty batch");
  if (static_cast<std::size_t>(batch.inputs.rows()) != net.input_size()) throw Error("batch input dimension mismatch");
  if (batch.index.size() != batch.size()) throw Error("batch index count mismatch");
  if (loss == Loss::TdMse && static_cast<std::size_t>(batch.target.size()) != batch.size())
    throw Error("batch target count mismatch");
  if (loss == Loss::CrossEntropy && net.head() != Head::Softmax) throw Error("cross-entropy needs a softmax head");
  if (loss == Loss::TdMse && net.head() != Head::Linear) throw Error("td-mse needs a linear head");
  for (auto i : batch.index)
    if (i >= net.output_size()) throw Error("batch index out of range");
}

// Loss and dL/d(output pre-activation) for every sample.
double output_delta(const Eigen::MatrixXd& out, const Batch& batch, Loss loss, Eigen::MatrixXd* delta) {
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  if (delta) delta->setZero(out.rows(), out.cols());
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(batch.index[c]);
    const auto col = static_cast<Eigen::Index>(c);
    if (loss == Loss::TdMse) {
      const double err = out(k, col) - batch.target[col];
      total += 0.5 * err * err;
      if (delta) (*delta)(k, col) = err / n;
    } else {
      total -= std::log(std::max(out(k, col), 1e-300));
      if (delta) {
        delta->col(col) = out.col(col) / n;
        (*delta)(k, col) -= 1.0 / n;
      }
    }
  }
  return total / n;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated model file");
  return v;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes, Head head) : sizes_(std::move(sizes)), head_(head) {
  if (sizes_.size() < 2) throw Error("an MLP needs at least an input and an output layer");
  for (auto s : sizes_)
    if (s == 0) throw Error("layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  offset_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes_.front()));
  scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sizes_.front()));
}

Mlp Mlp::init(const std::vector<std::size_t>& sizes, Head head, std::uint64_t seed) {
  Mlp net(sizes, head);
  Rng rng(derive_seed(seed, {0x6d6c70}));
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  return net;
}

void Mlp::set_input_transform(Eigen::VectorXd offset, Eigen::VectorXd scale) {
  if (static_cast<std::size_t>(offset.size()) != input_size() || static_cast<std::size_t>(scale.size()) != input_size())
    throw Error("input transform dimension mismatch");
  offset_ = std::move(offset);
  scale_ = std::move(scale);
}

Eigen::MatrixXd Mlp::transform(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size()) throw Error("input dimension mismatch");
  return (inputs.colwise() - offset_).array().colwise() * scale_.array();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  if (layers_.empty()) throw Error("forward on an empty network");
  return run(*this, transform(inputs)).a.back();
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

double& Mlp::parameter(std::size_t i) {
  for (auto& l : layers_) {
    const auto nw = static_cast<std::size_t>(l.weight.size());
    if (i < nw) {
      const auto cols = static_cast<std::size_t>(l.weight.cols());
      return l.weight(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols));
    }
    i -= nw;
    if (i < static_cast<std::size_t>(l.bias.size())) return l.bias(static_cast<Eigen::Index>(i));
    i -= static_cast<std::size_t>(l.bias.size());
  }
  throw Error("parameter index out of range");
}

double Mlp::parameter(std::size_t i) const { return const_cast<Mlp*>(this)->parameter(i); }

bool Mlp::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool Mlp::operator==(const Mlp& other) const {
  if (sizes_ != other.sizes_ || head_ != other.head_) return false;
  if (offset_ != other.offset_ || scale_ != other.scale_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) return false;
  return true;
}

void Mlp::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(head_));
  write_pod(out, static_cast<std::uint32_t>(sizes_.size()));
  for (auto s : sizes_) write_pod(out, static_cast<std::uint64_t>(s));
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) write_pod(out, l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) write_pod(out, l.bias(r));
  }
  for (Eigen::Index i = 0; i < offset_.size(); ++i) write_pod(out, offset_(i));
  for (Eigen::Index i = 0; i < scale_.size(); ++i) write_pod(out, scale_(i));
  if (!out) throw Error("failed writing " + file.string());
}

Mlp Mlp::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(file.string() + " is not a model file");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) throw Error("unsupported model version " + std::to_string(version));
  const auto head = read_pod<std::uint32_t>(in);
  if (head > 1) throw Error("unknown output head");
  const auto n = read_pod<std::uint32_t>(in);
  if (n < 2 || n > 64) throw Error("implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i < n; ++i) sizes.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(in)));
  Mlp net(sizes, static_cast<Head>(head));
  for (auto& l : net.layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = read_pod<double>(in);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = read_pod<double>(in);
  }
  for (Eigen::Index i = 0; i < net.offset_.size(); ++i) net.offset_(i) = read_pod<double>(in);
  for (Eigen::Index i = 0; i < net.scale_.size(); ++i) net.scale_(i) = read_pod<double>(in);
  return net;
}

double batch_loss(const Mlp& net, const Batch& batch, Loss loss) {
  check_batch(net, batch, loss);
  return output_delta(net.forward(batch.inputs), batch, loss, nullptr);
}

double loss_gradient(const Mlp& net, const Batch& batch, Loss loss, std::vector<DenseLayer>& grads) {
  check_batch(net, batch, loss);
  const Activations acts = run(net, (batch.inputs.colwise() - net.input_offset()).array().colwise() *
                                        net.input_scale().array());
  Eigen::MatrixXd delta;
  const double value = output_delta(acts.a.back(), batch, loss, &delta);
  const auto& layers = net.layers();
  grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weight.noalias() = delta * acts.a[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    delta = back.cwiseProduct((acts.a[l].array() > 0.0).cast<double>().matrix());
  }
  return value;
}

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Eigen::VectorXd v(n);
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) v(k++) = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) v(k++) = l.bias(r);
  }
  return v;
}

void Optimizer::apply(Mlp& net, const std::vector<DenseLayer>& grads) {
  auto& layers = net.layers();
  if (grads.size() != layers.size()) throw Error("gradient layout mismatch");
  if (config_.kind == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight -= config_.learning_rate * grads[l].weight;
      layers[l].bias -= config_.learning_rate * grads[l].bias;
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& g : grads) {
      m_.push_back({Eigen::MatrixXd::Zero(g.weight.rows(), g.weight.cols()), Eigen::VectorXd::Zero(g.bias.size())});
      v_.push_back(m_.back());
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    m_[l].weight = b1 * m_[l].weight + (1 - b1) * grads[l].weight;
    v_[l].weight = b2 * v_[l].weight + (1 - b2) * grads[l].weight.cwiseAbs2();
    layers[l].weight.array() -= lr * (m_[l].weight.array() / c1) / ((v_[l].weight.array() / c2).sqrt() + eps);
    m_[l].bias = b1 * m_[l].bias + (1 - b1) * grads[l].bias;
    v_[l].bias = b2 * v_[l].bias + (1 - b2) * grads[l].bias.cwiseAbs2();
    layers[l].bias.array() -= lr * (m_[l].bias.array() / c1) / ((v_[l].bias.array() / c2).sqrt() + eps);
  }
}

double backward_and_step(Mlp& net, const Batch& batch, Loss loss, Optimizer& optimizer) {
  std::vector<DenseLayer> grads;
  const double value = loss_gradient(net, batch, loss, grads);
  if (!std::isfinite(value)) throw DivergenceError("loss became non-finite");
  optimizer.apply(net, grads);
  if (!net.all_finite()) throw DivergenceError("parameters became non-finite");
  return value;
}

std::size_t argmax(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

}  // namespace ltlrl
