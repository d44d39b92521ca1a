#include "polab/diagnostics.hpp"

#include <stdexcept>

#include "polab/numerics.hpp"

namespace polab {

TaylorDelta taylor_predict(const DwDl& d, double norm_w_sq, double norm_l_sq,
                           double inner, double eta) {
  TaylorDelta t;
  t.delta_w = eta * (d.d_w * norm_w_sq - d.d_l * inner);
  t.delta_l = eta * (d.d_w * inner - d.d_l * norm_l_sq);
  return t;
}

CondPair check_conditions(const DwDl& d, double norm_w_sq, double norm_l_sq,
                          double inner) {
  CondPair c;
  c.chosen = d.d_l * inner <= d.d_w * norm_w_sq;
  c.rejected = d.d_w * inner <= d.d_l * norm_l_sq;
  return c;
}

CaseLabel classify_case(const CondPair& c) {
  if (c.chosen && c.rejected) return CaseLabel::ideal;
  if (!c.chosen && c.rejected) return CaseLabel::both_down;
  if (c.chosen && !c.rejected) return CaseLabel::both_up;
  return CaseLabel::indeterminate;
}

const char* case_name(CaseLabel c) {
  switch (c) {
    case CaseLabel::ideal: return "case1_ideal";
    case CaseLabel::both_down: return "case2_both_down";
    case CaseLabel::both_up: return "case3_both_up";
    case CaseLabel::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

GradReport grad_report(const LossSpec& spec, const LossContext& ctx,
                       double logp_w, double logp_l,
                       std::span<const double> grad_w,
                       std::span<const double> grad_l, double eta) {
  if (grad_w.size() != grad_l.size())
    throw std::invalid_argument("grad_report: size mismatch");
  GradReport r;
  r.logp_w = logp_w;
  r.logp_l = logp_l;
  r.loss = loss_value(spec, ctx, logp_w, logp_l);
  r.margin = transformed_margin(spec, ctx, logp_w, logp_l);
  r.d = dw_dl(spec, ctx, logp_w, logp_l);
  double nw2 = norm_sq(grad_w);
  double nl2 = norm_sq(grad_l);
  r.norm_w = std::sqrt(nw2);
  r.norm_l = std::sqrt(nl2);
  r.inner = dot(grad_w, grad_l);
  r.cosine = cosine(grad_w, grad_l);
  r.pred = taylor_predict(r.d, nw2, nl2, r.inner, eta);
  r.conds = check_conditions(r.d, nw2, nl2, r.inner);
  r.label = classify_case(r.conds);
  return r;
}

std::vector<double> central_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x0, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("central_diff_grad: step <= 0");
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + step;
    double hi = f(x);
    x[i] = keep - step;
    double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

TokenHeatmap token_heatmap(const LinearHeadLM& model, const Seq& prompt,
                           const Seq& y_w, const Seq& y_l) {
  Encoded ew = model.encode(prompt, y_w);
  Encoded el = model.encode(prompt, y_l);
  TokenHeatmap hm;
  hm.rows = static_cast<int>(y_w.size());
  hm.cols = static_cast<int>(y_l.size());
  hm.v.assign(static_cast<size_t>(hm.rows) * hm.cols, 0.0);
  std::vector<std::vector<double>> gw(hm.rows), gl(hm.cols);
  for (int i = 0; i < hm.rows; ++i) gw[i] = model.token_grad(ew, i);
  for (int j = 0; j < hm.cols; ++j) gl[j] = model.token_grad(el, j);
  for (int i = 0; i < hm.rows; ++i)
    for (int j = 0; j < hm.cols; ++j)
      hm.v[static_cast<size_t>(i) * hm.cols + j] = cosine(gw[i], gl[j]);
  return hm;
}

}  // namespace polab
