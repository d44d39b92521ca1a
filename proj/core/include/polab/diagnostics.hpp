#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polab/losses.hpp"
#include "polab/models.hpp"

namespace polab {

// First-order change of (logp_w, logp_l) after one descent step of size eta
// on the unified objective. Everything below is driven by three scalars:
// the squared gradient norms and the inner product <grad_w, grad_l>.
struct TaylorDelta {
  double delta_w = 0.0;
  double delta_l = 0.0;
};

TaylorDelta taylor_predict(const DwDl& d, double norm_w_sq, double norm_l_sq,
                           double inner, double eta);

// Sign tests for the first-order deltas, in product form so they stay exact
// for negative coefficients as well. Equality counts as satisfied.
//   chosen:   d_l * inner <= d_w * |grad_w|^2   (logp_w does not fall)
//   rejected: d_w * inner <= d_l * |grad_l|^2   (logp_l does not rise)
struct CondPair {
  bool chosen = false;
  bool rejected = false;
};

CondPair check_conditions(const DwDl& d, double norm_w_sq, double norm_l_sq,
                          double inner);

enum class CaseLabel {
  ideal,          // chosen up, rejected down
  both_down,      // gradients coupled: even the chosen response loses mass
  both_up,        // gradients coupled: even the rejected response gains mass
  indeterminate,  // neither sign test holds
};

CaseLabel classify_case(const CondPair& c);
const char* case_name(CaseLabel c);

// Everything the lab records about one gradient pair at one point.
struct GradReport {
  double logp_w = 0.0, logp_l = 0.0;
  double loss = 0.0;
  double margin = 0.0;  // g_w(logp_w) - g_l(logp_l)
  DwDl d;
  double norm_w = 0.0, norm_l = 0.0;
  double inner = 0.0, cosine = 0.0;
  TaylorDelta pred;
  CondPair conds;
  CaseLabel label = CaseLabel::indeterminate;
};

GradReport grad_report(const LossSpec& spec, const LossContext& ctx,
                       double logp_w, double logp_l,
                       std::span<const double> grad_w,
                       std::span<const double> grad_l, double eta);

// Central differences; the oracle the analytic gradients are tested against.
std::vector<double> central_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x0, double step);

// cos(token_grad_w[i], token_grad_l[j]) for every position pair.
struct TokenHeatmap {
  int rows = 0, cols = 0;
  std::vector<double> v;  // row-major
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
};

TokenHeatmap token_heatmap(const LinearHeadLM& model, const Seq& prompt,
                           const Seq& y_w, const Seq& y_l);

}  // namespace polab
