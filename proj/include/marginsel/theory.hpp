#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "marginsel/random.hpp"

namespace marginsel::theory {

// Projections for values, keys and queries, each d' x d.
struct AttentionParams {
  Eigen::MatrixXd w_v;
  Eigen::MatrixXd w_k;
  Eigen::MatrixXd w_q;
};

// Token matrices hold one d-dimensional row per token. The key/value
// sequence is [Xp; Yp; X].
struct PromptTensors {
  Eigen::VectorXd q;   // query token, d
  Eigen::MatrixXd x;   // test-input tokens, M x d
  Eigen::MatrixXd xp;  // demonstration inputs, N x d
  Eigen::MatrixXd yp;  // demonstration labels, N x d
};

// Throws Errc::kShapeMismatch on inconsistent dimensions or non-finite
// entries.
void check_shapes(const AttentionParams& params, const PromptTensors& tensors);

// Row-stacked [Xp; Yp; X].
Eigen::MatrixXd key_value_rows(const PromptTensors& tensors);

// exp(s - max s) / sum.
Eigen::VectorXd stable_softmax(const Eigen::VectorXd& scores);

// W_V H^T softmax((W_K H^T)^T W_Q q / sqrt(d)); needs at least one row.
Eigen::VectorXd softmax_attention(const AttentionParams& params, const PromptTensors& tensors);

// W_V H^T (W_K H^T)^T W_Q q
Eigen::VectorXd linear_attention(const AttentionParams& params, const PromptTensors& tensors);

struct Decomposition {
  Eigen::VectorXd test;         // W_ZSL q
  Eigen::VectorXd demo_inputs;  // W'_ZSL q
  Eigen::VectorXd demo_labels;  // W_L q
};

Decomposition decompose(const AttentionParams& params, const PromptTensors& tensors);

// W_V X^T X W_K^T W_Q, so that w_zsl * q is the test term.
Eigen::MatrixXd w_zsl(const AttentionParams& params, const PromptTensors& tensors);

// Full: sum_k W_V (x'_k x'_k^T + y'_k y'_k^T) W_K^T W_Q, with
// (W_ZSL + dW) q equal to linear attention. Simplified: sum_k y'_k x'_k^T.
// Throws Errc::kShapeMismatch when N == 0.
Eigen::MatrixXd delta_w_icl(const AttentionParams& params, const PromptTensors& tensors, bool simplified);

struct MarginSolution {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd beta;  // one per point, zero off the support
  double geometric_margin = 0.0;
  double functional_margin = 1.0;
  std::vector<std::size_t> support;
};

inline constexpr std::size_t kMaxMarginPoints = 64;

// Hard-margin separator of `points` (one row per point) with labels in
// {-1, +1}, by enumerating candidate support sets of size 2 .. d + 1 and
// keeping the first whose KKT system yields non-negative multipliers and a
// feasible separator. Throws Errc::kNotSeparable or Errc::kTooLarge.
MarginSolution solve_hard_margin(const Eigen::MatrixXd& points, const std::vector<int>& labels);

struct KktResiduals {
  double primal = 0.0;          // max(0, 1 - y_k (w.x_k + b))
  double dual = 0.0;            // max(0, -beta_k)
  double stationarity = 0.0;    // |w - sum beta_k y_k x_k|_inf
  double complementary = 0.0;   // max |beta_k (y_k (w.x_k + b) - 1)|
  double balance = 0.0;         // |sum beta_k y_k|

  double max() const;
};

KktResiduals kkt_residuals(const Eigen::MatrixXd& points, const std::vector<int>& labels, const MarginSolution& sol);

// W_ZSL q + W_L q + sum_k beta_k y'_k x'_k^T q. Needs d' == d. When
// `label_term` is given it replaces W_L q, so that the label contribution
// can be held at its full-prompt value while demonstrations are dropped.
Eigen::VectorXd support_vector_split(const AttentionParams& params, const PromptTensors& tensors,
                                     const Eigen::VectorXd& beta, const Eigen::VectorXd* label_term = nullptr);

// Keeps only the demonstrations with beta > 0.
PromptTensors restrict_to_support(const PromptTensors& tensors, const Eigen::VectorXd& beta,
                                  Eigen::VectorXd* kept_beta);

struct InstanceBounds {
  int max_d = 16;
  int max_d_prime = 16;
  int max_m = 8;
  int max_n = 8;
  bool square = false;  // force d' == d
  int min_n = 0;
};

// Dimensions drawn uniformly within the bounds (d, d' >= 1), entries uniform
// in [-1, 1].
std::pair<AttentionParams, PromptTensors> random_instance(Rng& rng, const InstanceBounds& bounds);

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

// n points in d dimensions labeled by a random hyperplane, discarding points
// closer than `gap` to it; both classes present.
struct MarginInstance {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};
MarginInstance random_separable(Rng& rng, int n, int d, double gap = 0.1);

struct TheoryCheckConfig {
  std::uint64_t seed = 0;
  int identity_instances = 1000;
  int kkt_instances = 100;
  int agreement_instances = 200;
  double identity_tolerance = 1e-10;
  double kkt_tolerance = 1e-8;
  double restriction_tolerance = 1e-12;
};

struct TheoryReport {
  int identity_instances = 0;
  double decomposition_error = 0.0;
  double affine_update_error = 0.0;
  double simplified_split_error = 0.0;  // beta = 1 against the simplified update
  double softmax_shift_error = 0.0;

  int kkt_instances = 0;
  KktResiduals kkt;

  double analytic_w_error = 0.0;
  double analytic_b_error = 0.0;
  double analytic_beta_error = 0.0;

  int restriction_instances = 0;
  double restriction_error = 0.0;

  // Reported only: how often softmax and linear attention pick the same label
  // direction on well-separated instances.
  int agreement_instances = 0;
  double agreement_rate = 0.0;

  bool passed = false;
};

TheoryReport run_theory_check(const TheoryCheckConfig& cfg);
nlohmann::ordered_json theory_report_to_json(const TheoryReport& report, const TheoryCheckConfig& cfg);

}  // namespace marginsel::theory
