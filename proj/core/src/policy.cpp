#include "hsdlab/policy.hpp"

#include <cmath>
#include <random>

#include "hsdlab/errors.hpp"

namespace hsd {

namespace {

void check_dim(const ActionScorer& p, const Observation& obs) {
  if (obs.size() != p.input_dim())
    throw DomainError("observation length " + std::to_string(obs.size()) + " does not match input dim " +
                      std::to_string(p.input_dim()));
}

}  // namespace

LinearPolicy::LinearPolicy(Mat weight_rows) : rows_(std::move(weight_rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) throw ShapeError("linear policy needs at least one row and column");
  if (!rows_.allFinite()) throw NumericError("linear policy rows must be finite");
}

Vec LinearPolicy::score(const Observation& obs) const {
  check_dim(*this, obs);
  return rows_ * obs;
}

Vec LinearPolicy::score_vjp(const Observation& obs, const Vec& output_weights) const {
  check_dim(*this, obs);
  return rows_.transpose() * output_weights;
}

FunctionScorer::FunctionScorer(int input_dim, int action_count, Fn fn)
    : input_dim_(input_dim), action_count_(action_count), fn_(std::move(fn)) {}

Vec FunctionScorer::score(const Observation& obs) const {
  check_dim(*this, obs);
  return fn_(obs);
}

Vec FunctionScorer::score_vjp(const Observation&, const Vec&) const {
  throw Error("function scorer is not differentiable");
}

std::string to_string(HeadKind head) { return head == HeadKind::Plain ? "Plain" : "Dueling"; }

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "Plain") return HeadKind::Plain;
  if (name == "Dueling") return HeadKind::Dueling;
  throw ConfigError("unknown head kind '" + name + "'");
}

QNetwork::QNetwork(int input_dim, std::vector<int> hidden, int action_count, HeadKind head, Seed init_seed,
                   std::string arch_id)
    : action_count_(action_count), head_(head), arch_id_(std::move(arch_id)) {
  if (input_dim < 1 || action_count < 1) throw ShapeError("network dims must be positive");
  std::mt19937_64 rng(mix_seed(init_seed, 0x51ed));
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(head == HeadKind::Dueling ? action_count + 1 : action_count);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    if (out < 1) throw ShapeError("layer width must be positive");
    // He-uniform for rectified layers; the output layer is scaled down.
    double bound = std::sqrt(6.0 / in);
    if (l + 2 == sizes.size()) bound *= 0.1;
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Mat(out, in), Vec::Zero(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    layers_.push_back(std::move(layer));
  }
  if (arch_id_.empty()) {
    arch_id_ = "mlp";
    for (int h : hidden) arch_id_ += "-" + std::to_string(h);
    arch_id_ += head == HeadKind::Dueling ? "-dueling" : "-plain";
  }
}

QNetwork::QNetwork(std::vector<DenseLayer> layers, int action_count, HeadKind head, std::string arch_id)
    : layers_(std::move(layers)), action_count_(action_count), head_(head), arch_id_(std::move(arch_id)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.bias.size() != L.weight.rows()) throw ShapeError("bias length mismatch in layer " + std::to_string(l));
    if (l > 0 && L.weight.cols() != layers_[l - 1].weight.rows())
      throw ShapeError("layer " + std::to_string(l) + " input does not match previous output");
  }
  const int expected_out = head == HeadKind::Dueling ? action_count + 1 : action_count;
  if (layers_.back().weight.rows() != expected_out)
    throw ShapeError("final layer width " + std::to_string(layers_.back().weight.rows()) + " does not fit a " +
                     to_string(head) + " head with " + std::to_string(action_count) + " actions");
}

std::vector<std::pair<int, int>> QNetwork::layer_shapes() const {
  std::vector<std::pair<int, int>> shapes;
  for (const auto& L : layers_) shapes.emplace_back(static_cast<int>(L.weight.cols()), static_cast<int>(L.weight.rows()));
  return shapes;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += static_cast<std::size_t>(L.weight.size() + L.bias.size());
  return n;
}

bool QNetwork::parameters_finite() const {
  for (const auto& L : layers_)
    if (!L.weight.allFinite() || !L.bias.allFinite()) return false;
  return true;
}

Mat QNetwork::combine_head(const Mat& raw) const {
  if (head_ == HeadKind::Plain) return raw;
  const Eigen::Index n = raw.rows();
  Mat q(n, action_count_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto adv = raw.row(i).tail(action_count_);
    const double mean = adv.mean();
    q.row(i) = (adv.array() + (raw(i, 0) - mean)).matrix();
  }
  return q;
}

Mat QNetwork::head_grad(const Mat& grad_q) const {
  if (head_ == HeadKind::Plain) return grad_q;
  const Eigen::Index n = grad_q.rows();
  Mat g(n, action_count_ + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double total = grad_q.row(i).sum();
    g(i, 0) = total;
    g.row(i).tail(action_count_) = (grad_q.row(i).array() - total / action_count_).matrix();
  }
  return g;
}

Vec QNetwork::score(const Observation& obs) const {
  check_dim(*this, obs);
  Vec h = obs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vec z = layers_[l].weight * h + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  if (!h.allFinite()) throw NumericError("non-finite network output");
  if (head_ == HeadKind::Plain) return h;
  const auto adv = h.tail(action_count_);
  return (adv.array() + (h[0] - adv.mean())).matrix();
}

Mat QNetwork::score_batch(const Mat& inputs) const {
  ForwardCache cache;
  return score_batch(inputs, cache);
}

Mat QNetwork::score_batch(const Mat& inputs, ForwardCache& cache) const {
  if (inputs.cols() != input_dim()) throw DomainError("batch width does not match input dim");
  cache.input = inputs;
  cache.activations.clear();
  const Mat* prev = &cache.input;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Mat z = (*prev) * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    cache.activations.push_back(z.cwiseMax(0.0));
    prev = &cache.activations.back();
  }
  cache.head_output = (*prev) * layers_.back().weight.transpose();
  cache.head_output.rowwise() += layers_.back().bias.transpose();
  return combine_head(cache.head_output);
}

void QNetwork::backward(const ForwardCache& cache, const Mat& grad_q, NetworkGradients* params,
                        Mat* grad_input) const {
  const std::size_t nl = layers_.size();
  if (params) {
    params->weight.resize(nl);
    params->bias.resize(nl);
  }
  Mat delta = head_grad(grad_q);
  for (std::size_t li = nl; li-- > 0;) {
    const Mat& prev = li == 0 ? cache.input : cache.activations[li - 1];
    if (params) {
      params->weight[li] = delta.transpose() * prev;
      params->bias[li] = delta.colwise().sum().transpose();
    }
    if (li == 0 && !grad_input) break;
    Mat back = delta * layers_[li].weight;
    if (li > 0) {
      // Subgradient 0 at the kink: activation exactly 0 passes nothing.
      back = back.cwiseProduct((prev.array() > 0.0).cast<double>().matrix());
      delta = std::move(back);
    } else {
      *grad_input = std::move(back);
    }
  }
}

Vec QNetwork::score_vjp(const Observation& obs, const Vec& output_weights) const {
  check_dim(*this, obs);
  const std::size_t nl = layers_.size();
  std::vector<Vec> acts;
  acts.reserve(nl);
  Vec h = obs;
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    h = (layers_[l].weight * h + layers_[l].bias).cwiseMax(0.0);
    acts.push_back(h);
  }
  Vec delta;
  if (head_ == HeadKind::Plain) {
    delta = output_weights;
  } else {
    delta.resize(action_count_ + 1);
    const double total = output_weights.sum();
    delta[0] = total;
    delta.tail(action_count_) = output_weights.array() - total / action_count_;
  }
  for (std::size_t li = nl; li-- > 0;) {
    Vec back = layers_[li].weight.transpose() * delta;
    if (li > 0) back = back.cwiseProduct((acts[li - 1].array() > 0.0).cast<double>().matrix());
    delta = std::move(back);
  }
  return delta;
}

namespace {

int runner_up(const Vec& scores, int excluded) {
  int best = -1;
  for (int a = 0; a < scores.size(); ++a) {
    if (a == excluded) continue;
    if (best < 0 || scores[a] > scores[best]) best = a;
  }
  return best;
}

struct LossPlan {
  double value = 0.0;
  Vec weights;  // coefficients on the scores, zero when clamped
};

LossPlan plan_loss(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss) {
  const Vec scores = policy.score(obs);
  if (!scores.allFinite()) throw NumericError("non-finite scores");
  const int n = policy.action_count();
  const auto check_action = [n](int a) {
    if (a < 0 || a >= n) throw DomainError("loss action " + std::to_string(a) + " out of range");
  };
  LossPlan plan;
  plan.weights = Vec::Zero(n);
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ActionScoreLoss>) {
          check_action(l.action);
          plan.value = scores[l.action];
          plan.weights[l.action] = 1.0;
        } else if constexpr (std::is_same_v<T, ScoreGapLoss>) {
          check_action(l.first);
          check_action(l.second);
          plan.value = scores[l.first] - scores[l.second];
          plan.weights[l.first] += 1.0;
          plan.weights[l.second] -= 1.0;
        } else {
          check_action(l.clean_action);
          if (n < 2) throw DomainError("margin loss needs at least two actions");
          const int other = runner_up(scores, l.clean_action);
          const double gap = scores[l.clean_action] - scores[other];
          if (gap > -l.confidence) {
            plan.value = gap;
            plan.weights[l.clean_action] = 1.0;
            plan.weights[other] = -1.0;
          } else {
            plan.value = -l.confidence;
          }
        }
      },
      loss);
  return plan;
}

}  // namespace

double evaluate_loss(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss) {
  return plan_loss(policy, obs, loss).value;
}

std::pair<double, Vec> loss_and_grad(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss) {
  LossPlan plan = plan_loss(policy, obs, loss);
  Vec g = plan.weights.isZero(0.0) ? Vec::Zero(policy.input_dim()) : policy.score_vjp(obs, plan.weights);
  if (!g.allFinite()) throw NumericError("non-finite input gradient");
  return {plan.value, std::move(g)};
}

Vec grad_input(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss) {
  return loss_and_grad(policy, obs, loss).second;
}

}  // namespace hsd
