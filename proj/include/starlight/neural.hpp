#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "starlight/error.hpp"
#include "starlight/json_io.hpp"
#include "starlight/rng.hpp"

namespace starlight {

struct NetConfig {
  int obs_dim = 0;
  int n_branches = 0;
  int n_actions = 4;               // per branch
  std::vector<int> trunk = {512, 256};
  int head_hidden = 128;

  void validate() const;
  static NetConfig from_json(const Json& j);
  Json to_json() const;
  bool operator==(const NetConfig&) const = default;
};

/// Per-branch dueling combination: Q_k(a) = V + A_k(a) - mean_a' A_k(a').
/// `advantages` is n_branches * n_actions, row per branch; so is the result.
std::vector<double> dueling_combine(double value, const std::vector<double>& advantages,
                                    int n_actions);

/// Branching dueling Q-network: a shared ReLU trunk feeds one state-value
/// head and one advantage head per branch. All math is double precision and
/// the parameter vector is flat, so snapshots and soft updates are exact.
class BranchingNet {
public:
  explicit BranchingNet(NetConfig cfg);

  struct Output {
    double value = 0.0;
    std::vector<double> advantages;  // n_branches * n_actions
    std::vector<double> q;           // n_branches * n_actions
  };

  Output forward(const std::vector<double>& obs) const;

  /// Mean over the batch of the per-sample mean squared error, where the
  /// per-sample mean runs over activated branches only: each activated branch
  /// k contributes (target_i - Q_k(chosen action))^2. Writes dL/dparams into
  /// `grad` (resized and zeroed here). Idle branches contribute nothing, so
  /// their head parameters receive exactly zero gradient.
  double loss_and_gradients(const std::vector<std::vector<double>>& obs,
                            const std::vector<std::vector<int>>& actions,
                            const std::vector<std::vector<bool>>& activated,
                            const std::vector<double>& targets,
                            std::vector<double>& grad) const;

  /// Glorot-uniform weights, zero biases; layer order is fixed, so one Rng
  /// seed pins every parameter.
  void init_random(Rng& rng);

  int param_count() const { return n_params_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const NetConfig& config() const { return cfg_; }

  /// Bit-exact binary snapshot: a one-line JSON header then raw doubles.
  void save(std::ostream& out) const;
  static BranchingNet load(std::istream& in);

private:
  struct Block {  // one affine layer inside the flat parameter vector
    int w = 0, b = 0, in = 0, out = 0;
  };
  struct Cache;

  void affine(const Block& blk, const double* x, double* y) const;
  void affine_relu(const Block& blk, const double* x, double* y) const;
  // Accumulates dL/dW, dL/db into `grad` and returns dL/dx through `dx`.
  void backprop_affine(const Block& blk, const double* x, const double* dy, double* dx,
                       std::vector<double>& grad) const;
  Output forward_cached(const std::vector<double>& obs, Cache& cache) const;

  NetConfig cfg_;
  std::vector<Block> trunk_;
  Block v_hidden_, v_out_;
  std::vector<Block> a_hidden_, a_out_;
  int n_params_ = 0;
  std::vector<double> params_;
};

/// Central-difference gradient of the same loss; the independent oracle for
/// loss_and_gradients. Perturbs every parameter, so keep the net tiny.
std::vector<double> finite_difference_gradient(BranchingNet net,
                                               const std::vector<std::vector<double>>& obs,
                                               const std::vector<std::vector<int>>& actions,
                                               const std::vector<std::vector<bool>>& activated,
                                               const std::vector<double>& targets, double eps);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<double> m, v;

  void save(std::ostream& out) const;
  static AdamState load(std::istream& in);
};

/// One Adam update in place. Lazily sizes the moment vectors on first use.
void adam_step(AdamState& st, std::vector<double>& params, const std::vector<double>& grad);

/// target <- tau * online + (1 - tau) * target, element-wise.
void soft_update(std::vector<double>& target, const std::vector<double>& online, double tau);

}  // namespace starlight
