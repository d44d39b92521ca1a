#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polab/datasets.hpp"
#include "polab/diagnostics.hpp"
#include "polab/losses.hpp"
#include "polab/models.hpp"

namespace polab {

// One diagnostics row per step (plus a final row after the last update).
// norms/cosine are of the batch-mean gradients; d_w/d_l are batch means
// except under npo/sparse rules, where they carry the rule's effective
// per-side coefficients.
struct TraceRow {
  int step = 0;
  double logp_w = 0.0, logp_l = 0.0;
  double margin = 0.0;
  double norm_w = 0.0, norm_l = 0.0;
  double cosine = 0.0;
  double d_w = 0.0, d_l = 0.0;
  std::string case_label;
  double loss = 0.0;
};

enum class UpdateRule { vanilla, npo, sparse };

const char* update_rule_name(UpdateRule r);

struct TrainConfig {
  LossSpec spec;
  UpdateRule rule = UpdateRule::vanilla;
  double eta = 0.1;
  int steps = 100;
  bool use_ref = true;    // reference model = frozen copy of the init
  double npo_eps = 1e-8;  // gradient-norm floor for the npo rule
};

struct TrainResult {
  LinearHeadLM model;
  std::vector<TraceRow> trace;  // steps + 1 rows
};

TrainResult train(const LinearHeadLM& init,
                  const std::vector<PreferenceTriple>& data,
                  const TrainConfig& cfg);

// Plain likelihood warmup on the chosen responses (gradient ascent on the
// mean chosen logp). Used to move the policy off its symmetric init before
// preference training.
LinearHeadLM sft(const LinearHeadLM& init,
                 const std::vector<PreferenceTriple>& data, double eta,
                 int steps);

// Norm-equalized update: both sides' gradients are rescaled to unit norm
// before being combined, so the pair geometry (the angle) alone decides the
// first-order outcome and both target signs hold whenever cos < 1.
struct NpoInfo {
  double C = 0.0;          // common scale, sqrt(d_w * d_l) of the base loss
  double eff_w = 0.0;      // C / max(|grad_w|, eps)
  double eff_l = 0.0;      // C / max(|grad_l|, eps)
  bool degenerate = false; // base loss gave a non-positive d_w or d_l
};

NpoInfo npo_coeffs(const LossSpec& spec, const LossContext& ctx, double logp_w,
                   double logp_l, double norm_w, double norm_l, double eps);

// Descent direction -C * (grad_w/|grad_w| - grad_l/|grad_l|); zero when
// degenerate. Apply with theta <- theta - eta * direction.
std::vector<double> npo_direction(const LossSpec& spec, const LossContext& ctx,
                                  double logp_w, double logp_l,
                                  std::span<const double> grad_w,
                                  std::span<const double> grad_l,
                                  double eps = 1e-8);

// Token-level reweighting: each response token carries a learnable gate
// m = sigmoid(k * (u - r)); the pair objective scores the gated sum of
// per-token log-ratios against the reference, plus an l1-style pressure
// eta_sparse * sum(m) that closes gates with nothing to contribute.
struct SparseParams {
  double k = 50.0;          // gate steepness
  double r = 0.0;           // gate threshold
  double eta_sparse = 0.01; // sparsity pressure
};

struct MaskState {
  std::vector<double> u_w, u_l;  // pre-gate logits, one per token position
};

MaskState make_mask_state(const PreferenceTriple& t, double u_init = 0.0);

struct SparseEval {
  double S = 0.0;          // gated margin
  double loss = 0.0;
  double sigma_bar = 0.0;  // sigmoid(-S), the shared gradient scale
  std::vector<double> m_w, m_l;
  std::vector<double> rho_w, rho_l;  // per-token log-ratios vs the reference
  std::vector<double> grad_theta;    // d loss / d theta
  std::vector<double> grad_u_w, grad_u_l;
};

SparseEval sparse_eval(const LinearHeadLM& model, const LinearHeadLM& ref,
                       const PreferenceTriple& t, const MaskState& mask,
                       const SparseParams& sp);

// Loss value only; the finite-difference oracle target for both theta and
// the mask logits.
double sparse_loss(const LinearHeadLM& model, const LinearHeadLM& ref,
                   const PreferenceTriple& t, const MaskState& mask,
                   const SparseParams& sp);

struct SparseTrainConfig {
  SparseParams sp;
  double eta_model = 0.05;
  double eta_mask = 0.05;  // defaults keep both learning rates equal
  int steps = 500;
};

struct SparseTrainResult {
  LinearHeadLM model;
  std::vector<MaskState> masks;  // one per triple, jointly trained
  std::vector<TraceRow> trace;
};

SparseTrainResult sparse_train(const LinearHeadLM& init,
                               const std::vector<PreferenceTriple>& data,
                               const SparseTrainConfig& cfg);

}  // namespace polab
