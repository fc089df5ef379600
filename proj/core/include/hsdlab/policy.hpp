#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "hsdlab/types.hpp"

namespace hsd {

/// A differentiable map from an observation to one score per action.
class ActionScorer {
 public:
  virtual ~ActionScorer() = default;

  virtual int input_dim() const = 0;
  virtual int action_count() const = 0;
  virtual Vec score(const Observation& obs) const = 0;

  /// Gradient of `output_weights . score(obs)` with respect to `obs`.
  virtual Vec score_vjp(const Observation& obs, const Vec& output_weights) const = 0;
};

/// Scores are inner products <w_a, s>, one row per action.
class LinearPolicy final : public ActionScorer {
 public:
  explicit LinearPolicy(Mat weight_rows);

  int input_dim() const override { return static_cast<int>(rows_.cols()); }
  int action_count() const override { return static_cast<int>(rows_.rows()); }
  Vec score(const Observation& obs) const override;
  Vec score_vjp(const Observation& obs, const Vec& output_weights) const override;

  const Mat& rows() const { return rows_; }
  Vec row(int a) const { return rows_.row(a).transpose(); }

 private:
  Mat rows_;
};

/// Wraps a plain function; useful for scripted and oracle policies.
/// Not differentiable: `score_vjp` throws.
class FunctionScorer final : public ActionScorer {
 public:
  using Fn = std::function<Vec(const Observation&)>;
  FunctionScorer(int input_dim, int action_count, Fn fn);

  int input_dim() const override { return input_dim_; }
  int action_count() const override { return action_count_; }
  Vec score(const Observation& obs) const override;
  Vec score_vjp(const Observation& obs, const Vec& output_weights) const override;

 private:
  int input_dim_;
  int action_count_;
  Fn fn_;
};

enum class HeadKind { Plain, Dueling };

std::string to_string(HeadKind head);
HeadKind head_kind_from_string(const std::string& name);

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out
};

/// Per-layer parameter gradients, same shapes as the network layers.
struct NetworkGradients {
  std::vector<Mat> weight;
  std::vector<Vec> bias;
};

/// Intermediate values of a batched forward pass, kept for backprop.
struct ForwardCache {
  Mat input;                    // batch x in
  std::vector<Mat> activations; // post-rectifier output of each hidden layer
  Mat head_output;              // raw output of the final layer
};

/// Fully connected Q-network with rectified hidden layers and a plain or
/// dueling head. Dueling combines Q = V + A - mean(A).
class QNetwork final : public ActionScorer {
 public:
  QNetwork() = default;
  QNetwork(int input_dim, std::vector<int> hidden, int action_count, HeadKind head, Seed init_seed,
           std::string arch_id = {});
  /// Builds a network from explicit layers; throws ShapeError on inconsistency.
  QNetwork(std::vector<DenseLayer> layers, int action_count, HeadKind head, std::string arch_id);

  int input_dim() const override { return static_cast<int>(layers_.front().weight.cols()); }
  int action_count() const override { return action_count_; }
  Vec score(const Observation& obs) const override;
  Vec score_vjp(const Observation& obs, const Vec& output_weights) const override;

  /// Batched scores; rows of `inputs` are observations.
  Mat score_batch(const Mat& inputs) const;
  Mat score_batch(const Mat& inputs, ForwardCache& cache) const;

  /// Backpropagates `grad_q` (batch x actions) through the cached pass.
  /// Either output pointer may be null.
  void backward(const ForwardCache& cache, const Mat& grad_q, NetworkGradients* params,
                Mat* grad_input) const;

  HeadKind head() const { return head_; }
  const std::string& arch_id() const { return arch_id_; }
  void set_arch_id(std::string id) { arch_id_ = std::move(id); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  std::vector<std::pair<int, int>> layer_shapes() const;
  std::size_t parameter_count() const;
  bool parameters_finite() const;

 private:
  Mat combine_head(const Mat& raw) const;
  Mat head_grad(const Mat& grad_q) const;

  std::vector<DenseLayer> layers_;
  int action_count_ = 0;
  HeadKind head_ = HeadKind::Plain;
  std::string arch_id_;
};

// Scalar losses whose input gradient can be requested.
struct ActionScoreLoss {
  int action = 0;
};
struct ScoreGapLoss {
  int first = 0;
  int second = 0;
};
/// max(score[clean_action] - max_{a != clean_action} score[a], -confidence).
struct MarginLoss {
  int clean_action = 0;
  double confidence = 0.0;
};
using ScalarLoss = std::variant<ActionScoreLoss, ScoreGapLoss, MarginLoss>;

double evaluate_loss(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss);

/// Exact reverse-mode gradient of the scalar loss with respect to the observation.
Vec grad_input(const ActionScorer& policy, const Observation& obs, const ScalarLoss& loss);

/// Loss value and gradient in one pass.
std::pair<double, Vec> loss_and_grad(const ActionScorer& policy, const Observation& obs,
                                     const ScalarLoss& loss);

}  // namespace hsd
