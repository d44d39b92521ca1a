#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace polab {

using Seq = std::vector<int>;

// Frozen random features: the hidden state at a position is the normalized
// sum of one learned-nothing gaussian embedding per (slot, token) pair plus a
// bias term. Sequences that share most of their tokens therefore get highly
// aligned hidden states, and editing one token moves the state by a single
// summand -- the texture a trained encoder would give, without training one.
// Everything is counter-keyed off the seed, so providers are pure values.
class HiddenProvider {
 public:
  HiddenProvider(uint64_t seed, int dim, bool unit_norm = true);

  int dim() const { return dim_; }

  // Hidden state that conditions the next-token distribution after seeing
  // the whole prompt plus the first `prefix_len` response tokens.
  std::vector<double> hidden(const Seq& prompt, const Seq& response,
                             int prefix_len) const;

 private:
  std::vector<double> feature(uint64_t slot, uint64_t token) const;
  uint64_t seed_;
  int dim_;
  bool unit_norm_;
};

// Next-token states for every position of one response under one prompt,
// cached so repeated log-prob/gradient evaluation (finite differences,
// training loops) pays for feature generation once.
struct Encoded {
  Seq tokens;                           // response tokens
  std::vector<std::vector<double>> h;   // h[i] conditions position i
};

// Softmax language model with a frozen feature extractor and one trainable
// d x V head. Parameters are stored column-major (column j at [j*d, j*d+d)).
// Models are immutable: stepping returns a new model.
class LinearHeadLM {
 public:
  LinearHeadLM(int d, int vocab, HiddenProvider provider);
  static LinearHeadLM random_init(int d, int vocab, HiddenProvider provider,
                                  uint64_t seed, double scale);

  int dim() const { return d_; }
  int vocab() const { return vocab_; }
  int num_params() const { return d_ * vocab_; }
  const std::vector<double>& params() const { return theta_; }
  const HiddenProvider& provider() const { return provider_; }

  LinearHeadLM with_params(std::vector<double> theta) const;
  // theta += eta * direction
  LinearHeadLM apply_step(std::span<const double> direction, double eta) const;

  // Restrict the distribution at one response position to a token subset
  // (mask[j] != 0 keeps token j). Positions without a mask use the full
  // vocabulary.
  void set_support(int response_pos, std::vector<uint8_t> mask);

  Encoded encode(const Seq& prompt, const Seq& response) const;

  double logprob(const Encoded& e) const;
  double logprob(const Seq& prompt, const Seq& response) const;
  std::vector<double> token_logprobs(const Encoded& e) const;

  // d(sequence logp)/d(theta), length num_params().
  std::vector<double> grad_logprob(const Encoded& e) const;
  // d(logp of token at position i)/d(theta).
  std::vector<double> token_grad(const Encoded& e, int i) const;
  // sum_i weights[i] * token_grad(e, i), accumulated in one pass.
  std::vector<double> weighted_grad(const Encoded& e,
                                    std::span<const double> weights) const;

  // Softmax row conditioning position i (zeros off support).
  std::vector<double> next_token_probs(const Encoded& e, int i) const;

 private:
  const std::vector<uint8_t>* support_at(int i) const;
  int d_;
  int vocab_;
  HiddenProvider provider_;
  std::vector<double> theta_;
  std::map<int, std::vector<uint8_t>> support_;
};

enum class Branch { chosen, rejected };

// Two edit-distance-one continuations scored by per-position logit rows that
// share one trainable table: branch rows are softmax(z_i + offset_b_i) with
// the offsets frozen at construction. A gradient step on z therefore moves
// both branches through the same rows, which is what makes the positions
// before the edit cancel exactly.
class LogitsLM {
 public:
  LogitsLM(Seq tokens_chosen, Seq tokens_rejected, int vocab,
           std::vector<std::vector<double>> rows_chosen,
           std::vector<std::vector<double>> rows_rejected);

  int length() const { return static_cast<int>(tok_w_.size()); }
  int vocab() const { return vocab_; }
  int edit_index() const { return edit_; }  // 0-based position of the edit
  int num_params() const { return length() * vocab_; }
  const std::vector<double>& params() const { return z_; }

  LogitsLM with_params(std::vector<double> z) const;
  LogitsLM apply_step(std::span<const double> direction, double eta) const;

  const Seq& tokens(Branch b) const;
  std::vector<double> row(Branch b, int i) const;  // softmax(z_i + off_b_i)
  std::vector<double> token_logprobs(Branch b) const;
  double logprob(Branch b) const;
  std::vector<double> grad_logprob(Branch b) const;  // w.r.t. z

 private:
  Seq tok_w_, tok_l_;
  int vocab_;
  int edit_;
  std::vector<double> z_;      // length() * vocab, row-major by position
  std::vector<double> off_l_;  // frozen rejected-branch offsets, same shape
};

// Index of the single position where the two responses differ; throws
// invalid_argument unless there is exactly one.
int edit_index(const Seq& a, const Seq& b);

}  // namespace polab
