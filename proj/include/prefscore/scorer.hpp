#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "prefscore/errors.hpp"

namespace prefscore {

enum class Pooling { LastToken, Cls };

struct ScorerConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 256;
  int vocab_size = 0;
  std::uint64_t init_seed = 0;
  Pooling pooling = Pooling::LastToken;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
};

/// Parameter tree shared by the model, its gradients, and optimizer moments.
/// Weight matrices are stored input-major: W[k * d_out + j].
struct ParamSet {
  struct Layer {
    std::vector<double> ln1_g, ln1_b;
    std::vector<double> wq, bq, wk, bk, wv, bv, wo, bo;
    std::vector<double> ln2_g, ln2_b;
    std::vector<double> w1, b1;  // d_model -> d_ff
    std::vector<double> w2, b2;  // d_ff -> d_model
  };
  std::vector<double> embedding;  // vocab_size x d_model
  std::vector<Layer> layers;
  std::vector<double> lnf_g, lnf_b;
  std::vector<double> head_w;  // d_model
  std::vector<double> head_b;  // single scalar, kept as a tensor for uniform traversal

  static ParamSet zeros(const ScorerConfig& cfg);
  void set_zero();

  /// Visit every tensor in a fixed canonical order (same order for any two
  /// ParamSets built from the same config).
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(embedding);
    for (auto& l : layers) {
      fn(l.ln1_g); fn(l.ln1_b);
      fn(l.wq); fn(l.bq); fn(l.wk); fn(l.bk); fn(l.wv); fn(l.bv); fn(l.wo); fn(l.bo);
      fn(l.ln2_g); fn(l.ln2_b);
      fn(l.w1); fn(l.b1); fn(l.w2); fn(l.b2);
    }
    fn(lnf_g); fn(lnf_b); fn(head_w); fn(head_b);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<ParamSet*>(this)->for_each_tensor([&](std::vector<double>& t) {
      fn(static_cast<const std::vector<double>&>(t));
    });
  }
};

using Gradients = ParamSet;

struct ScorerModel {
  ScorerConfig cfg;
  ParamSet params;
  std::vector<double> pos_table;  // max_len x d_model, sinusoidal, not trained
};

/// Deterministic initialization: weight matrices uniform in
/// [-1/sqrt(d_model), +1/sqrt(d_model)], biases zero, layer-norm scales one,
/// and a zero head (so every score starts at exactly 0.0).
ScorerModel init_scorer(const ScorerConfig& cfg);

/// Forward activations kept for the backward pass. Reusable across calls.
class ForwardCache {
 public:
  ForwardCache() = default;

 private:
  friend double score_cached(const ScorerModel&, std::span<const int>, int, ForwardCache&);
  friend void backward(const ScorerModel&, const ForwardCache&, double, Gradients&);

  struct LayerCache {
    std::vector<double> xhat1, a, q, k, v, att, ctx, xhat2, a2, f, u;
    std::vector<double> rstd1, rstd2;
  };
  std::vector<int> ids_;
  int len_ = 0;
  std::vector<double> x0_;
  std::vector<LayerCache> layers_;
  std::vector<double> xhatf_;
  double rstdf_ = 0.0;
  int pool_ = 0;
};

/// Score an assembled input. Only the first true_len positions participate,
/// so the result is invariant to whatever sits in the padding region.
double score(const ScorerModel& model, std::span<const int> ids, int true_len);

/// Same as score() but records activations for backward().
double score_cached(const ScorerModel& model, std::span<const int> ids, int true_len,
                    ForwardCache& cache);

/// Accumulate d(seed * r)/d(theta) into grads, using the activations of the
/// forward pass recorded in `cache`.
void backward(const ScorerModel& model, const ForwardCache& cache, double seed,
              Gradients& grads);

// Checkpoint I/O. The binary format round-trips parameters bit-exactly.
void save_checkpoint(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_checkpoint(const std::filesystem::path& path);

}  // namespace prefscore
