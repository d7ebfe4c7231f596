#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "emu/matrix.hpp"

namespace emu {

/// Shape of one probabilistic network.
struct ArchSpec {
  std::size_t d_in = 12;
  std::size_t d_out = 500;
  std::size_t n_hidden = 5;
  std::size_t width = 400;
  /// Floor on the predicted variance; the sigma head adds sqrt(sigma_min)
  /// to its standard-deviation output.
  double sigma_min = 1e-6;

  /// Throws InvalidArgument unless every dimension is >= 1 and sigma_min > 0.
  void validate() const;

  /// Input width of each hidden layer under the concatenation wiring:
  /// layer 1 sees x, layer 2 sees [h1, x], layer k >= 3 sees [h(k-1), h(k-2)].
  std::vector<std::size_t> hidden_input_widths() const;

  std::size_t parameter_count() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct Dense {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  friend bool operator==(const Dense&, const Dense&) = default;
};

/// Parameter (or gradient) tensors of a ProbNet.
struct NetParams {
  std::vector<Dense> hidden;
  Dense mu_head;
  Dense sigma_head;

  static NetParams zeros(const ArchSpec& spec);

  /// Tensors in canonical order: hidden 1..N (weight, bias), mu head
  /// (weight, bias), sigma head (weight, bias). Checkpoints and optimizers
  /// rely on this order.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Heteroscedastic feedforward network: softplus hidden stack with
/// concatenation skips, a linear mean head and a softplus std-dev head.
class ProbNet {
 public:
  /// Xavier-normal weights and zero biases drawn from `seed`.
  ProbNet(const ArchSpec& spec, std::uint64_t seed);
  /// Adopt existing parameters; throws InvalidArgument on any shape mismatch.
  ProbNet(const ArchSpec& spec, NetParams params, std::uint64_t seed);

  static ProbNet zeros(const ArchSpec& spec);

  const ArchSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const NetParams& params() const noexcept { return params_; }

  /// Mutable access invalidates forward caches taken before the call.
  NetParams& mutable_params() noexcept {
    ++revision_;
    return params_;
  }
  std::uint64_t revision() const noexcept { return revision_; }

  friend bool operator==(const ProbNet& a, const ProbNet& b) {
    return a.spec_ == b.spec_ && a.seed_ == b.seed_ && a.params_ == b.params_;
  }

 private:
  ArchSpec spec_;
  NetParams params_;
  std::uint64_t seed_ = 0;
  std::uint64_t revision_ = 0;
};

/// Activations retained by forward() for a later backward().
struct ForwardCache {
  const ProbNet* owner = nullptr;
  std::uint64_t revision = 0;
  std::vector<Matrix> inputs;  // per hidden layer, after concatenation
  std::vector<Matrix> pre;     // per hidden layer, before softplus
  std::vector<Matrix> out;     // per hidden layer, after softplus
  std::vector<Matrix> slope;   // per hidden layer, softplus derivative
  Matrix sigma_pre;            // sigma head before softplus
  Matrix sigma;                // predicted standard deviation
  Matrix sigma_slope;
};

struct ForwardResult {
  Matrix mu;
  Matrix sigma2;
  ForwardCache cache;
};

/// Throws InvalidArgument on a column-count mismatch and NumericError naming
/// the layer when any activation is non-finite.
ForwardResult forward(const ProbNet& net, const Matrix& x);

struct BackwardResult {
  NetParams param_grads;
  Matrix input_grads;
};

/// Reverse-mode gradients of sum(d_mu * mu + d_sigma2 * sigma2) with respect
/// to every parameter and to the network input. Throws InvalidState when the
/// cache was not produced by `net` at its current revision.
BackwardResult backward(const ProbNet& net, const ForwardCache& cache, const Matrix& d_mu,
                        const Matrix& d_sigma2);

struct ParamNorms {
  double l2_squared = 0.0;
  double l2 = 0.0;
};

ParamNorms param_vector_norms(const ProbNet& net);
ParamNorms param_vector_norms(const NetParams& params);

}  // namespace emu
