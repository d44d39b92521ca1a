#include "polab/training.hpp"

#include <cmath>
#include <stdexcept>

#include "polab/errors.hpp"
#include "polab/numerics.hpp"

namespace polab {
namespace {

struct PairState {
  Encoded ew, el;
  LossContext ctx;
};

std::vector<PairState> prepare_pairs(const LinearHeadLM& init,
                                     const std::vector<PreferenceTriple>& data,
                                     bool use_ref) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<PairState> ps;
  ps.reserve(data.size());
  for (const auto& t : data) {
    PairState s;
    s.ew = init.encode(t.prompt, t.y_w);
    s.el = init.encode(t.prompt, t.y_l);
    s.ctx.len_w = static_cast<double>(t.y_w.size());
    s.ctx.len_l = static_cast<double>(t.y_l.size());
    if (use_ref) {
      s.ctx.ref_logp_w = init.logprob(s.ew);
      s.ctx.ref_logp_l = init.logprob(s.el);
    }
    ps.push_back(std::move(s));
  }
  return ps;
}

void axpy(std::vector<double>& y, double a, std::span<const double> x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void ensure_finite(double x, const char* what, int step) {
  if (!std::isfinite(x))
    throw numeric_error(std::string(what) + " became non-finite", step);
}

}  // namespace

const char* update_rule_name(UpdateRule r) {
  switch (r) {
    case UpdateRule::vanilla: return "vanilla";
    case UpdateRule::npo: return "npo";
    case UpdateRule::sparse: return "sparse";
  }
  return "vanilla";
}

NpoInfo npo_coeffs(const LossSpec& spec, const LossContext& ctx, double logp_w,
                   double logp_l, double norm_w, double norm_l, double eps) {
  NpoInfo info;
  DwDl d = dw_dl(spec, ctx, logp_w, logp_l);
  if (!(d.d_w > 0.0) || !(d.d_l > 0.0)) {
    info.degenerate = true;
    return info;
  }
  info.C = std::sqrt(d.d_w * d.d_l);
  info.eff_w = info.C / std::max(norm_w, eps);
  info.eff_l = info.C / std::max(norm_l, eps);
  return info;
}

std::vector<double> npo_direction(const LossSpec& spec, const LossContext& ctx,
                                  double logp_w, double logp_l,
                                  std::span<const double> grad_w,
                                  std::span<const double> grad_l, double eps) {
  if (grad_w.size() != grad_l.size())
    throw std::invalid_argument("npo_direction: size mismatch");
  NpoInfo info = npo_coeffs(spec, ctx, logp_w, logp_l, norm(grad_w),
                            norm(grad_l), eps);
  std::vector<double> dir(grad_w.size(), 0.0);
  if (info.degenerate) return dir;
  for (size_t i = 0; i < dir.size(); ++i)
    dir[i] = -(info.eff_w * grad_w[i] - info.eff_l * grad_l[i]);
  return dir;
}

TrainResult train(const LinearHeadLM& init,
                  const std::vector<PreferenceTriple>& data,
                  const TrainConfig& cfg) {
  if (cfg.rule == UpdateRule::sparse)
    throw std::invalid_argument("train: use sparse_train for the sparse rule");
  if (cfg.steps < 0 || !(cfg.eta > 0.0))
    throw std::invalid_argument("train: need steps >= 0 and eta > 0");
  std::vector<PairState> pairs = prepare_pairs(init, data, cfg.use_ref);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());

  TrainResult result{init, {}};
  result.trace.reserve(cfg.steps + 1);
  LinearHeadLM& model = result.model;

  for (int step = 0; step <= cfg.steps; ++step) {
    double m_lw = 0, m_ll = 0, m_loss = 0, m_margin = 0, m_dw = 0, m_dl = 0;
    LossContext ctx_mean;
    ctx_mean.ref_logp_w = ctx_mean.ref_logp_l = 0;
    ctx_mean.len_w = ctx_mean.len_l = 0;
    std::vector<double> gw_mean(model.num_params(), 0.0);
    std::vector<double> gl_mean(model.num_params(), 0.0);
    std::vector<double> dir(model.num_params(), 0.0);

    for (const PairState& p : pairs) {
      double lw = model.logprob(p.ew);
      double ll = model.logprob(p.el);
      std::vector<double> gw = model.grad_logprob(p.ew);
      std::vector<double> gl = model.grad_logprob(p.el);
      DwDl d = dw_dl(cfg.spec, p.ctx, lw, ll);
      m_lw += lw * inv_n;
      m_ll += ll * inv_n;
      m_loss += loss_value(cfg.spec, p.ctx, lw, ll) * inv_n;
      m_margin += transformed_margin(cfg.spec, p.ctx, lw, ll) * inv_n;
      m_dw += d.d_w * inv_n;
      m_dl += d.d_l * inv_n;
      ctx_mean.ref_logp_w += p.ctx.ref_logp_w * inv_n;
      ctx_mean.ref_logp_l += p.ctx.ref_logp_l * inv_n;
      ctx_mean.len_w += p.ctx.len_w * inv_n;
      ctx_mean.len_l += p.ctx.len_l * inv_n;
      axpy(gw_mean, inv_n, gw);
      axpy(gl_mean, inv_n, gl);
      if (cfg.rule == UpdateRule::vanilla) {
        axpy(dir, -d.d_w * inv_n, gw);
        axpy(dir, d.d_l * inv_n, gl);
      }
    }

    double nw2 = norm_sq(gw_mean);
    double nl2 = norm_sq(gl_mean);
    double inner = dot(gw_mean, gl_mean);

    TraceRow row;
    row.step = step;
    row.logp_w = m_lw;
    row.logp_l = m_ll;
    row.margin = m_margin;
    row.norm_w = std::sqrt(nw2);
    row.norm_l = std::sqrt(nl2);
    row.cosine = cosine(gw_mean, gl_mean);
    row.loss = m_loss;
    if (cfg.rule == UpdateRule::npo) {
      NpoInfo info = npo_coeffs(cfg.spec, ctx_mean, m_lw, m_ll, row.norm_w,
                                row.norm_l, cfg.npo_eps);
      row.d_w = info.eff_w;
      row.d_l = info.eff_l;
      row.case_label =
          info.degenerate
              ? "degenerate"
              : case_name(classify_case(check_conditions(
                    DwDl{info.eff_w, info.eff_l}, nw2, nl2, inner)));
      if (!info.degenerate) {
        for (size_t i = 0; i < dir.size(); ++i)
          dir[i] = -(info.eff_w * gw_mean[i] - info.eff_l * gl_mean[i]);
      }
    } else {
      row.d_w = m_dw;
      row.d_l = m_dl;
      row.case_label = case_name(
          classify_case(check_conditions(DwDl{m_dw, m_dl}, nw2, nl2, inner)));
    }
    ensure_finite(row.logp_w, "logp_w", step);
    ensure_finite(row.logp_l, "logp_l", step);
    ensure_finite(row.loss, "loss", step);
    result.trace.push_back(std::move(row));

    if (step == cfg.steps) break;
    ensure_finite(norm_sq(dir), "update direction", step);
    model = model.apply_step(dir, -cfg.eta);
  }
  return result;
}

LinearHeadLM sft(const LinearHeadLM& init,
                 const std::vector<PreferenceTriple>& data, double eta,
                 int steps) {
  if (steps < 0 || !(eta > 0.0))
    throw std::invalid_argument("sft: need steps >= 0 and eta > 0");
  std::vector<PairState> pairs = prepare_pairs(init, data, false);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  LinearHeadLM model = init;
  for (int step = 0; step < steps; ++step) {
    std::vector<double> dir(model.num_params(), 0.0);
    for (const PairState& p : pairs)
      axpy(dir, inv_n, model.grad_logprob(p.ew));
    ensure_finite(norm_sq(dir), "sft direction", step);
    model = model.apply_step(dir, eta);  // ascent on chosen likelihood
  }
  return model;
}

MaskState make_mask_state(const PreferenceTriple& t, double u_init) {
  MaskState m;
  m.u_w.assign(t.y_w.size(), u_init);
  m.u_l.assign(t.y_l.size(), u_init);
  return m;
}

namespace {

struct SparsePairState {
  Encoded ew, el;
  std::vector<double> ref_lp_w, ref_lp_l;  // per-token reference logps
};

SparsePairState prepare_sparse_pair(const LinearHeadLM& ref,
                                    const PreferenceTriple& t) {
  SparsePairState s;
  s.ew = ref.encode(t.prompt, t.y_w);
  s.el = ref.encode(t.prompt, t.y_l);
  s.ref_lp_w = ref.token_logprobs(s.ew);
  s.ref_lp_l = ref.token_logprobs(s.el);
  return s;
}

SparseEval sparse_eval_prepared(const LinearHeadLM& model,
                                const SparsePairState& p,
                                const MaskState& mask,
                                const SparseParams& sp) {
  const size_t Lw = p.ew.tokens.size(), Ll = p.el.tokens.size();
  if (mask.u_w.size() != Lw || mask.u_l.size() != Ll)
    throw std::invalid_argument("sparse_eval: mask size mismatch");
  SparseEval ev;
  std::vector<double> lp_w = model.token_logprobs(p.ew);
  std::vector<double> lp_l = model.token_logprobs(p.el);
  ev.rho_w.resize(Lw);
  ev.rho_l.resize(Ll);
  ev.m_w.resize(Lw);
  ev.m_l.resize(Ll);
  double mask_sum = 0.0;
  for (size_t i = 0; i < Lw; ++i) {
    ev.rho_w[i] = lp_w[i] - p.ref_lp_w[i];
    ev.m_w[i] = sigmoid(sp.k * (mask.u_w[i] - sp.r));
    mask_sum += ev.m_w[i];
    ev.S += ev.m_w[i] * ev.rho_w[i];
  }
  for (size_t i = 0; i < Ll; ++i) {
    ev.rho_l[i] = lp_l[i] - p.ref_lp_l[i];
    ev.m_l[i] = sigmoid(sp.k * (mask.u_l[i] - sp.r));
    mask_sum += ev.m_l[i];
    ev.S -= ev.m_l[i] * ev.rho_l[i];
  }
  ev.sigma_bar = sigmoid(-ev.S);
  ev.loss = -log_sigmoid(ev.S) + sp.eta_sparse * mask_sum;

  std::vector<double> Gw = model.weighted_grad(p.ew, ev.m_w);
  std::vector<double> Gl = model.weighted_grad(p.el, ev.m_l);
  ev.grad_theta.resize(Gw.size());
  for (size_t i = 0; i < Gw.size(); ++i)
    ev.grad_theta[i] = -ev.sigma_bar * (Gw[i] - Gl[i]);

  ev.grad_u_w.resize(Lw);
  for (size_t i = 0; i < Lw; ++i)
    ev.grad_u_w[i] = (-ev.sigma_bar * ev.rho_w[i] + sp.eta_sparse) * sp.k *
                     ev.m_w[i] * (1.0 - ev.m_w[i]);
  ev.grad_u_l.resize(Ll);
  for (size_t i = 0; i < Ll; ++i)
    ev.grad_u_l[i] = (ev.sigma_bar * ev.rho_l[i] + sp.eta_sparse) * sp.k *
                     ev.m_l[i] * (1.0 - ev.m_l[i]);
  return ev;
}

}  // namespace

SparseEval sparse_eval(const LinearHeadLM& model, const LinearHeadLM& ref,
                       const PreferenceTriple& t, const MaskState& mask,
                       const SparseParams& sp) {
  return sparse_eval_prepared(model, prepare_sparse_pair(ref, t), mask, sp);
}

double sparse_loss(const LinearHeadLM& model, const LinearHeadLM& ref,
                   const PreferenceTriple& t, const MaskState& mask,
                   const SparseParams& sp) {
  return sparse_eval(model, ref, t, mask, sp).loss;
}

SparseTrainResult sparse_train(const LinearHeadLM& init,
                               const std::vector<PreferenceTriple>& data,
                               const SparseTrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("sparse_train: empty dataset");
  if (cfg.steps < 0 || !(cfg.eta_model > 0.0) || !(cfg.eta_mask > 0.0))
    throw std::invalid_argument("sparse_train: bad step sizes");
  std::vector<SparsePairState> pairs;
  pairs.reserve(data.size());
  for (const auto& t : data) pairs.push_back(prepare_sparse_pair(init, t));
  const double inv_n = 1.0 / static_cast<double>(pairs.size());

  SparseTrainResult result{init, {}, {}};
  for (const auto& t : data) result.masks.push_back(make_mask_state(t));
  result.trace.reserve(cfg.steps + 1);
  LinearHeadLM& model = result.model;

  for (int step = 0; step <= cfg.steps; ++step) {
    std::vector<double> theta_dir(model.num_params(), 0.0);
    std::vector<double> gw_mean(model.num_params(), 0.0);
    std::vector<double> gl_mean(model.num_params(), 0.0);
    std::vector<SparseEval> evals(pairs.size());
    double m_lw = 0, m_ll = 0, m_S = 0, m_loss = 0, m_sbar = 0;
    for (size_t i = 0; i < pairs.size(); ++i) {
      evals[i] = sparse_eval_prepared(model, pairs[i], result.masks[i], cfg.sp);
      const SparseEval& ev = evals[i];
      m_S += ev.S * inv_n;
      m_loss += ev.loss * inv_n;
      m_sbar += ev.sigma_bar * inv_n;
      // Raw sequence logps for the trace come from the gated pieces' inputs.
      for (size_t j = 0; j < ev.rho_w.size(); ++j)
        m_lw += (ev.rho_w[j] + pairs[i].ref_lp_w[j]) * inv_n;
      for (size_t j = 0; j < ev.rho_l.size(); ++j)
        m_ll += (ev.rho_l[j] + pairs[i].ref_lp_l[j]) * inv_n;
      axpy(theta_dir, inv_n, ev.grad_theta);
      std::vector<double> Gw = model.weighted_grad(pairs[i].ew, ev.m_w);
      std::vector<double> Gl = model.weighted_grad(pairs[i].el, ev.m_l);
      axpy(gw_mean, inv_n, Gw);
      axpy(gl_mean, inv_n, Gl);
    }

    double nw2 = norm_sq(gw_mean);
    double nl2 = norm_sq(gl_mean);
    TraceRow row;
    row.step = step;
    row.logp_w = m_lw;
    row.logp_l = m_ll;
    row.margin = m_S;  // the gated margin plays the role of the pair margin
    row.norm_w = std::sqrt(nw2);
    row.norm_l = std::sqrt(nl2);
    row.cosine = cosine(gw_mean, gl_mean);
    row.d_w = m_sbar;
    row.d_l = m_sbar;
    row.case_label = case_name(classify_case(
        check_conditions(DwDl{m_sbar, m_sbar}, nw2, nl2,
                         dot(gw_mean, gl_mean))));
    row.loss = m_loss;
    ensure_finite(row.loss, "sparse loss", step);
    ensure_finite(row.logp_w, "logp_w", step);
    result.trace.push_back(std::move(row));

    if (step == cfg.steps) break;
    ensure_finite(norm_sq(theta_dir), "sparse update", step);
    model = model.apply_step(theta_dir, -cfg.eta_model);
    for (size_t i = 0; i < pairs.size(); ++i) {
      MaskState& m = result.masks[i];
      for (size_t j = 0; j < m.u_w.size(); ++j)
        m.u_w[j] -= cfg.eta_mask * evals[i].grad_u_w[j];
      for (size_t j = 0; j < m.u_l.size(); ++j)
        m.u_l[j] -= cfg.eta_mask * evals[i].grad_u_l[j];
    }
  }
  return result;
}

}  // namespace polab
