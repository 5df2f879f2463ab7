#include "marginsel/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marginsel/error.hpp"

namespace marginsel::theory {
namespace {

constexpr double kSolverTolerance = 1e-9;
constexpr double kMaxSubsets = 2e7;

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::kShapeMismatch, what);
}

bool all_finite(const Eigen::MatrixXd& m) { return m.size() == 0 || m.allFinite(); }

// W_K^T W_Q q
Eigen::VectorXd key_query(const AttentionParams& p, const PromptTensors& t) {
  return p.w_k.transpose() * (p.w_q * t.q);
}

// W_V R^T R kq for one block of token rows.
Eigen::VectorXd block_term(const AttentionParams& p, const Eigen::MatrixXd& rows, const Eigen::VectorXd& kq) {
  if (rows.rows() == 0) return Eigen::VectorXd::Zero(p.w_v.rows());
  return p.w_v * (rows.transpose() * (rows * kq));
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Advances `idx` to the next k-combination of [0, n); false after the last.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

std::optional<MarginSolution> try_support_set(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                              const std::vector<int>& set) {
  const int s = static_cast<int>(set.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s + 1, s + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) a(i, j) = y[set[j]] * x.row(set[j]).dot(x.row(set[i]));
    a(i, s) = 1.0;
    a(s, i) = y[set[i]];
    rhs(i) = y[set[i]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd sol = lu.solve(rhs);

  MarginSolution out;
  out.beta = Eigen::VectorXd::Zero(x.rows());
  out.w = Eigen::VectorXd::Zero(x.cols());
  for (int i = 0; i < s; ++i) {
    if (sol(i) < -kSolverTolerance) return std::nullopt;
    const double beta = std::max(sol(i), 0.0);
    out.beta(set[i]) = beta;
    out.w += beta * y[set[i]] * x.row(set[i]).transpose();
  }
  out.b = sol(s);
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    if (y[k] * (out.w.dot(x.row(k)) + out.b) < 1.0 - kSolverTolerance) return std::nullopt;
  }
  const double norm = out.w.norm();
  if (norm == 0.0) return std::nullopt;
  out.geometric_margin = 1.0 / norm;
  out.functional_margin = 1.0;
  for (int i = 0; i < s; ++i) {
    if (out.beta(set[i]) > 0.0) out.support.push_back(static_cast<std::size_t>(set[i]));
  }
  return out;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

void check_shapes(const AttentionParams& p, const PromptTensors& t) {
  const Eigen::Index d = p.w_v.cols();
  const Eigen::Index dp = p.w_v.rows();
  require(d > 0 && dp > 0, "projection matrices must be non-empty");
  require(p.w_k.rows() == dp && p.w_k.cols() == d, "W_K must match W_V in shape");
  require(p.w_q.rows() == dp && p.w_q.cols() == d, "W_Q must match W_V in shape");
  require(t.q.size() == d, "query length differs from d");
  require(t.x.rows() == 0 || t.x.cols() == d, "X must have d columns");
  require(t.xp.rows() == 0 || t.xp.cols() == d, "X' must have d columns");
  require(t.yp.rows() == 0 || t.yp.cols() == d, "Y' must have d columns");
  require(t.xp.rows() == t.yp.rows(), "X' and Y' need one row per demonstration");
  require(all_finite(p.w_v) && all_finite(p.w_k) && all_finite(p.w_q), "projections must be finite");
  require(all_finite(t.q) && all_finite(t.x) && all_finite(t.xp) && all_finite(t.yp), "tensors must be finite");
}

Eigen::MatrixXd key_value_rows(const PromptTensors& t) {
  const Eigen::Index d = t.q.size();
  const Eigen::Index n = t.xp.rows();
  const Eigen::Index m = t.x.rows();
  Eigen::MatrixXd h(2 * n + m, d);
  if (n > 0) {
    h.topRows(n) = t.xp;
    h.middleRows(n, n) = t.yp;
  }
  if (m > 0) h.bottomRows(m) = t.x;
  return h;
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& scores) {
  require(scores.size() > 0, "softmax of an empty score vector");
  const Eigen::VectorXd e = (scores.array() - scores.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd softmax_attention(const AttentionParams& p, const PromptTensors& t) {
  check_shapes(p, t);
  const Eigen::MatrixXd h = key_value_rows(t);
  require(h.rows() > 0, "attention needs at least one key/value row");
  const Eigen::VectorXd scores = (h * key_query(p, t)) / std::sqrt(static_cast<double>(t.q.size()));
  return p.w_v * (h.transpose() * stable_softmax(scores));
}

Eigen::VectorXd linear_attention(const AttentionParams& p, const PromptTensors& t) {
  check_shapes(p, t);
  return block_term(p, key_value_rows(t), key_query(p, t));
}

Decomposition decompose(const AttentionParams& p, const PromptTensors& t) {
  check_shapes(p, t);
  const Eigen::VectorXd kq = key_query(p, t);
  return Decomposition{block_term(p, t.x, kq), block_term(p, t.xp, kq), block_term(p, t.yp, kq)};
}

Eigen::MatrixXd w_zsl(const AttentionParams& p, const PromptTensors& t) {
  check_shapes(p, t);
  const Eigen::Index d = p.w_v.cols();
  const Eigen::MatrixXd gram = t.x.rows() == 0 ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd(t.x.transpose() * t.x);
  return p.w_v * gram * p.w_k.transpose() * p.w_q;
}

Eigen::MatrixXd delta_w_icl(const AttentionParams& p, const PromptTensors& t, bool simplified) {
  check_shapes(p, t);
  require(t.xp.rows() > 0, "delta W needs at least one demonstration");
  const Eigen::Index d = p.w_v.cols();
  if (simplified) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index k = 0; k < t.xp.rows(); ++k) out += t.yp.row(k).transpose() * t.xp.row(k);
    return out;
  }
  const Eigen::MatrixXd right = p.w_k.transpose() * p.w_q;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.w_v.rows(), d);
  for (Eigen::Index k = 0; k < t.xp.rows(); ++k) {
    const Eigen::VectorXd x = t.xp.row(k).transpose();
    const Eigen::VectorXd y = t.yp.row(k).transpose();
    out += p.w_v * (x * x.transpose() + y * y.transpose()) * right;
  }
  return out;
}

MarginSolution solve_hard_margin(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const Eigen::Index n = points.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error(Errc::kShapeMismatch, "one label per point is required");
  }
  if (static_cast<std::size_t>(n) > kMaxMarginPoints) {
    throw Error(Errc::kTooLarge, "at most " + std::to_string(kMaxMarginPoints) + " points are supported");
  }
  bool pos = false;
  bool neg = false;
  for (int y : labels) {
    if (y != 1 && y != -1) throw Error(Errc::kInvalidArgument, "labels must be -1 or +1");
    pos |= y == 1;
    neg |= y == -1;
  }
  if (!pos || !neg) throw Error(Errc::kNotSeparable, "both classes must be present");
  require(all_finite(points), "points must be finite");

  const int max_size = static_cast<int>(std::min<Eigen::Index>(points.cols() + 1, n));
  double subsets = 0.0;
  for (int s = 2; s <= max_size; ++s) subsets += binomial(static_cast<int>(n), s);
  if (subsets > kMaxSubsets) throw Error(Errc::kTooLarge, "too many candidate support sets to enumerate");

  for (int s = 2; s <= max_size; ++s) {
    std::vector<int> idx(s);
    for (int i = 0; i < s; ++i) idx[i] = i;
    do {
      bool mixed = false;
      for (int i = 1; i < s && !mixed; ++i) mixed = labels[idx[i]] != labels[idx[0]];
      if (!mixed) continue;
      if (auto sol = try_support_set(points, labels, idx)) return *sol;
    } while (next_combination(idx, static_cast<int>(n)));
  }
  throw Error(Errc::kNotSeparable, "no separating hyperplane found");
}

double KktResiduals::max() const { return std::max({primal, dual, stationarity, complementary, balance}); }

KktResiduals kkt_residuals(const Eigen::MatrixXd& x, const std::vector<int>& y, const MarginSolution& sol) {
  KktResiduals r;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double balance = 0.0;
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const double f = y[k] * (sol.w.dot(x.row(k)) + sol.b);
    r.primal = std::max(r.primal, 1.0 - f);
    r.dual = std::max(r.dual, -sol.beta(k));
    r.complementary = std::max(r.complementary, std::fabs(sol.beta(k) * (f - 1.0)));
    w += sol.beta(k) * y[k] * x.row(k).transpose();
    balance += sol.beta(k) * y[k];
  }
  r.stationarity = max_abs(sol.w - w);
  r.balance = std::fabs(balance);
  return r;
}

Eigen::VectorXd support_vector_split(const AttentionParams& p, const PromptTensors& t, const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd* label_term) {
  check_shapes(p, t);
  require(p.w_v.rows() == p.w_v.cols(), "the support-vector split needs d' == d");
  require(beta.size() == t.xp.rows(), "one beta per demonstration is required");
  require(beta.size() == 0 || beta.minCoeff() >= 0.0, "beta must be non-negative");
  const Decomposition parts = decompose(p, t);
  Eigen::VectorXd out = parts.test + (label_term != nullptr ? *label_term : parts.demo_labels);
  require(out.size() == p.w_v.rows(), "label term has the wrong length");
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    out += beta(k) * t.yp.row(k).transpose() * t.xp.row(k).dot(t.q);
  }
  return out;
}

PromptTensors restrict_to_support(const PromptTensors& t, const Eigen::VectorXd& beta, Eigen::VectorXd* kept_beta) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    if (beta(k) > 0.0) keep.push_back(k);
  }
  PromptTensors out{t.q, t.x, Eigen::MatrixXd(keep.size(), t.q.size()), Eigen::MatrixXd(keep.size(), t.q.size())};
  if (kept_beta != nullptr) kept_beta->resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.xp.row(row) = t.xp.row(keep[i]);
    out.yp.row(row) = t.yp.row(keep[i]);
    if (kept_beta != nullptr) (*kept_beta)(row) = beta(keep[i]);
  }
  return out;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = 2.0 * rng.uniform01() - 1.0;
  }
  return m;
}

std::pair<AttentionParams, PromptTensors> random_instance(Rng& rng, const InstanceBounds& b) {
  const auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform_index(hi - lo + 1)); };
  const int d = pick(1, b.max_d);
  const int dp = b.square ? d : pick(1, b.max_d_prime);
  int m = pick(0, b.max_m);
  const int n = pick(std::min(b.min_n, b.max_n), b.max_n);
  if (m + n == 0) m = 1;

  AttentionParams params{random_matrix(rng, dp, d), random_matrix(rng, dp, d), random_matrix(rng, dp, d)};
  PromptTensors tensors;
  tensors.q = random_matrix(rng, d, 1).col(0);
  tensors.x = random_matrix(rng, m, d);
  tensors.xp = random_matrix(rng, n, d);
  tensors.yp = random_matrix(rng, n, d);
  return {std::move(params), std::move(tensors)};
}

MarginInstance random_separable(Rng& rng, int n, int d, double gap) {
  if (n < 2 || d < 1) throw Error(Errc::kInvalidArgument, "need n >= 2 points in d >= 1 dimensions");
  for (;;) {
    const Eigen::VectorXd w = random_matrix(rng, d, 1).col(0);
    const double norm = w.norm();
    if (norm < 1e-3) continue;
    const double b = 0.5 * (2.0 * rng.uniform01() - 1.0);
    MarginInstance inst{Eigen::MatrixXd(n, d), {}};
    int filled = 0;
    for (int attempts = 0; filled < n && attempts < 1000 * n; ++attempts) {
      const Eigen::VectorXd x = random_matrix(rng, d, 1).col(0);
      const double f = (w.dot(x) + b) / norm;
      if (std::fabs(f) < gap) continue;
      inst.points.row(filled++) = x.transpose();
      inst.labels.push_back(f > 0 ? 1 : -1);
    }
    if (filled < n) continue;
    const bool pos = std::count(inst.labels.begin(), inst.labels.end(), 1) > 0;
    const bool neg = std::count(inst.labels.begin(), inst.labels.end(), -1) > 0;
    if (pos && neg) return inst;
  }
}

TheoryReport run_theory_check(const TheoryCheckConfig& cfg) {
  TheoryReport rep;

  Rng rng(derive_seed(cfg.seed, "theory:identities"));
  for (int i = 0; i < cfg.identity_instances; ++i) {
    auto [p, t] = random_instance(rng, InstanceBounds{});
    const Eigen::VectorXd lin = linear_attention(p, t);
    const Decomposition parts = decompose(p, t);
    rep.decomposition_error =
        std::max(rep.decomposition_error, max_abs(lin - (parts.test + parts.demo_inputs + parts.demo_labels)));
    if (t.xp.rows() > 0) {
      const Eigen::VectorXd affine = (w_zsl(p, t) + delta_w_icl(p, t, false)) * t.q;
      rep.affine_update_error = std::max(rep.affine_update_error, max_abs(lin - affine));
    }
    const Eigen::MatrixXd h = key_value_rows(t);
    const Eigen::VectorXd scores = h * (p.w_k.transpose() * (p.w_q * t.q));
    const double shift = 2.0 * rng.uniform01() - 1.0;
    rep.softmax_shift_error = std::max(
        rep.softmax_shift_error,
        max_abs(stable_softmax(scores) - stable_softmax((scores.array() + shift).matrix())));
  }
  Rng square_rng(derive_seed(cfg.seed, "theory:split"));
  for (int i = 0; i < cfg.identity_instances; ++i) {
    auto [p, t] = random_instance(square_rng, InstanceBounds{16, 16, 8, 8, true, 1});
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(t.xp.rows());
    const Decomposition parts = decompose(p, t);
    const Eigen::VectorXd reduced = parts.test + parts.demo_labels + delta_w_icl(p, t, true) * t.q;
    rep.simplified_split_error = std::max(rep.simplified_split_error, max_abs(support_vector_split(p, t, ones) - reduced));
  }
  rep.identity_instances = cfg.identity_instances;

  Rng kkt_rng(derive_seed(cfg.seed, "theory:kkt"));
  for (int i = 0; i < cfg.kkt_instances; ++i) {
    const int n = 2 + static_cast<int>(kkt_rng.uniform_index(7));
    const int d = 1 + static_cast<int>(kkt_rng.uniform_index(4));
    const MarginInstance inst = random_separable(kkt_rng, n, d);
    const MarginSolution sol = solve_hard_margin(inst.points, inst.labels);
    const KktResiduals r = kkt_residuals(inst.points, inst.labels, sol);
    rep.kkt.primal = std::max(rep.kkt.primal, r.primal);
    rep.kkt.dual = std::max(rep.kkt.dual, r.dual);
    rep.kkt.stationarity = std::max(rep.kkt.stationarity, r.stationarity);
    rep.kkt.complementary = std::max(rep.kkt.complementary, r.complementary);
    rep.kkt.balance = std::max(rep.kkt.balance, r.balance);

    // Embed the solved problem as demonstrations and drop the beta = 0 ones.
    AttentionParams p{random_matrix(kkt_rng, d, d), random_matrix(kkt_rng, d, d), random_matrix(kkt_rng, d, d)};
    const Eigen::VectorXd u = random_matrix(kkt_rng, d, 1).col(0);
    PromptTensors t{random_matrix(kkt_rng, d, 1).col(0), random_matrix(kkt_rng, 2, d), inst.points,
                    Eigen::MatrixXd(n, d)};
    for (int k = 0; k < n; ++k) t.yp.row(k) = inst.labels[k] * u.transpose();
    const Eigen::VectorXd full = support_vector_split(p, t, sol.beta);
    const Eigen::VectorXd label_term = decompose(p, t).demo_labels;
    Eigen::VectorXd kept;
    const PromptTensors restricted = restrict_to_support(t, sol.beta, &kept);
    rep.restriction_error =
        std::max(rep.restriction_error, max_abs(full - support_vector_split(p, restricted, kept, &label_term)));
    ++rep.restriction_instances;
  }
  rep.kkt_instances = cfg.kkt_instances;

  {
    Eigen::MatrixXd x(4, 1);
    x << 1, -2, 3, 6;
    const MarginSolution sol = solve_hard_margin(x, {-1, -1, 1, 1});
    Eigen::VectorXd beta(4);
    beta << 0.5, 0.0, 0.5, 0.0;
    rep.analytic_w_error = std::fabs(sol.w(0) - 1.0);
    rep.analytic_b_error = std::fabs(sol.b + 2.0);
    rep.analytic_beta_error = max_abs(sol.beta - beta);
  }

  Rng agree_rng(derive_seed(cfg.seed, "theory:agreement"));
  int agree = 0;
  for (int i = 0; i < cfg.agreement_instances; ++i) {
    const int d = 8;
    Eigen::MatrixXd means = random_matrix(agree_rng, 2, d) * 3.0;
    Eigen::MatrixXd dirs(2, d);
    for (int c = 0; c < 2; ++c) dirs.row(c) = means.row(c).normalized();
    const int n = 6;
    PromptTensors t{Eigen::VectorXd(d), Eigen::MatrixXd(1, d), Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, d)};
    for (int k = 0; k < n; ++k) {
      const int c = k % 2;
      t.xp.row(k) = means.row(c) + 0.1 * random_matrix(agree_rng, 1, d);
      t.yp.row(k) = dirs.row(c);
    }
    const int target = static_cast<int>(agree_rng.uniform_index(2));
    t.x.row(0) = means.row(target) + 0.1 * random_matrix(agree_rng, 1, d);
    t.q = (means.row(target) + 0.1 * random_matrix(agree_rng, 1, d)).transpose();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const AttentionParams p{eye, eye, eye};
    const auto nearest = [&](const Eigen::VectorXd& v) { return dirs.row(0).dot(v) >= dirs.row(1).dot(v) ? 0 : 1; };
    agree += nearest(softmax_attention(p, t)) == nearest(linear_attention(p, t));
  }
  rep.agreement_instances = cfg.agreement_instances;
  rep.agreement_rate = cfg.agreement_instances > 0 ? static_cast<double>(agree) / cfg.agreement_instances : 0.0;

  rep.passed = rep.decomposition_error <= cfg.identity_tolerance && rep.affine_update_error <= cfg.identity_tolerance &&
               rep.simplified_split_error <= cfg.identity_tolerance &&
               rep.softmax_shift_error <= cfg.identity_tolerance && rep.kkt.max() <= cfg.kkt_tolerance &&
               rep.analytic_w_error <= 1e-12 && rep.analytic_b_error <= 1e-12 && rep.analytic_beta_error <= 1e-12 &&
               rep.restriction_error <= cfg.restriction_tolerance;
  return rep;
}

nlohmann::ordered_json theory_report_to_json(const TheoryReport& r, const TheoryCheckConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["passed"] = r.passed;

  nlohmann::ordered_json ids;
  ids["instances"] = r.identity_instances;
  ids["tolerance"] = cfg.identity_tolerance;
  ids["decomposition_max_abs_error"] = r.decomposition_error;
  ids["affine_update_max_abs_error"] = r.affine_update_error;
  ids["simplified_split_max_abs_error"] = r.simplified_split_error;
  ids["softmax_shift_max_abs_error"] = r.softmax_shift_error;
  j["identities"] = std::move(ids);

  nlohmann::ordered_json kkt;
  kkt["instances"] = r.kkt_instances;
  kkt["tolerance"] = cfg.kkt_tolerance;
  kkt["primal"] = r.kkt.primal;
  kkt["dual"] = r.kkt.dual;
  kkt["stationarity"] = r.kkt.stationarity;
  kkt["complementary_slackness"] = r.kkt.complementary;
  kkt["balance"] = r.kkt.balance;
  j["kkt"] = std::move(kkt);

  nlohmann::ordered_json analytic;
  analytic["w_error"] = r.analytic_w_error;
  analytic["b_error"] = r.analytic_b_error;
  analytic["beta_error"] = r.analytic_beta_error;
  j["analytic_1d"] = std::move(analytic);

  nlohmann::ordered_json restriction;
  restriction["instances"] = r.restriction_instances;
  restriction["tolerance"] = cfg.restriction_tolerance;
  restriction["max_abs_error"] = r.restriction_error;
  j["support_restriction"] = std::move(restriction);

  nlohmann::ordered_json agreement;
  agreement["instances"] = r.agreement_instances;
  agreement["same_label_direction_rate"] = r.agreement_rate;
  agreement["asserted"] = false;
  j["softmax_vs_linear"] = std::move(agreement);
  return j;
}

}  // namespace marginsel::theory
