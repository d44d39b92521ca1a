#include "polab/claims.hpp"

#include <cmath>
#include <stdexcept>

#include "polab/datasets.hpp"
#include "polab/diagnostics.hpp"
#include "polab/losses.hpp"
#include "polab/models.hpp"
#include "polab/numerics.hpp"
#include "polab/rng.hpp"
#include "polab/training.hpp"

namespace polab {
namespace {

constexpr uint64_t kClaimTag = 0x636c6d;

ClaimRecord claim_rel(std::string name, double observed, double expected,
                      double tol, std::string note = "") {
  ClaimRecord c;
  c.name = std::move(name);
  c.expected = expected;
  c.observed = observed;
  c.relative = true;
  c.err = rel_err(observed, expected);
  c.tol = tol;
  c.pass = c.err <= tol;
  c.note = std::move(note);
  return c;
}

ClaimRecord claim_abs(std::string name, double observed, double expected,
                      double tol, std::string note = "") {
  ClaimRecord c;
  c.name = std::move(name);
  c.expected = expected;
  c.observed = observed;
  c.relative = false;
  c.err = std::fabs(observed - expected);
  c.tol = tol;
  c.pass = c.err <= tol;
  c.note = std::move(note);
  return c;
}

// Strict sign claims: observed must be > 0 (or < 0 with positive=false).
ClaimRecord claim_sign(std::string name, double observed, bool positive,
                       std::string note = "") {
  ClaimRecord c;
  c.name = std::move(name);
  c.expected = positive ? 1.0 : -1.0;
  c.observed = observed;
  c.err = 0.0;
  c.tol = 0.0;
  c.pass = positive ? observed > 0.0 : observed < 0.0;
  c.note = std::move(note);
  return c;
}

ClaimRecord claim_bool(std::string name, bool ok, std::string note = "") {
  ClaimRecord c;
  c.name = std::move(name);
  c.expected = 1.0;
  c.observed = ok ? 1.0 : 0.0;
  c.pass = ok;
  c.note = std::move(note);
  return c;
}

void finish(TheoremReport& r) {
  r.pass = true;
  for (const auto& c : r.claims) r.pass = r.pass && c.pass;
}

double max_abs_off_support(const std::vector<double>& g, int d, int vocab,
                           int first_off) {
  double m = 0.0;
  for (int j = first_off; j < vocab; ++j)
    for (int k = 0; k < d; ++k)
      m = std::max(m, std::fabs(g[static_cast<size_t>(j) * d + k]));
  return m;
}

std::vector<uint8_t> first_m_mask(int M, int V) {
  std::vector<uint8_t> mask(V, 0);
  for (int j = 0; j < M; ++j) mask[j] = 1;
  return mask;
}

}  // namespace

TheoremReport verify_theorem1(int M, int V, int d, double eta, double beta,
                              int steps, uint64_t seed, double tol) {
  if (M < 2 || M > V) throw std::invalid_argument("verify_theorem1: bad M");
  TheoremReport rep;
  rep.kind = "theorem1";

  HiddenProvider provider(seed, d, /*unit_norm=*/true);
  LinearHeadLM model(d, V, provider);
  model.set_support(0, first_m_mask(M, V));

  Rng rng(derive_seed(seed, static_cast<uint64_t>(M), static_cast<uint64_t>(V),
                      kClaimTag));
  PreferenceTriple t;
  t.prompt.resize(4);
  for (int& tok : t.prompt) tok = rng.uniform_int(V);
  t.y_w = {0};
  t.y_l = {1};

  Encoded ew = model.encode(t.prompt, t.y_w);
  Encoded el = model.encode(t.prompt, t.y_l);
  const double h2 = norm_sq(ew.h[0]);
  const double Md = static_cast<double>(M);

  std::vector<double> p0 = model.next_token_probs(ew, 0);
  double max_unif_dev = 0.0;
  for (int j = 0; j < M; ++j)
    max_unif_dev = std::max(max_unif_dev, std::fabs(p0[j] - 1.0 / Md));
  rep.claims.push_back(claim_abs("uniform_init", max_unif_dev, 0.0, 1e-12,
                                 "max |p_j - 1/M| over the support"));

  std::vector<double> gw = model.grad_logprob(ew);
  std::vector<double> gl = model.grad_logprob(el);
  double inner = dot(gw, gl);
  double nw2 = norm_sq(gw);
  double nl2 = norm_sq(gl);

  rep.claims.push_back(
      claim_rel("inner_product", inner, -h2 / Md, tol,
                "<grad_w, grad_l> = -|h|^2 / M at the symmetric init"));
  rep.claims.push_back(claim_rel("chosen_sq_norm", nw2, (Md - 1.0) / Md * h2,
                                 tol, "|grad_w|^2 = (M-1)/M * |h|^2"));
  rep.claims.push_back(claim_rel("rejected_sq_norm", nl2, (Md - 1.0) / Md * h2,
                                 tol, "|grad_l|^2 = (M-1)/M * |h|^2"));
  double off_dev = std::max(max_abs_off_support(gw, d, V, M),
                            max_abs_off_support(gl, d, V, M));
  rep.claims.push_back(claim_abs("off_support_zero", off_dev, 0.0, 0.0,
                                 "masked-out columns get exactly zero grad"));

  LossSpec spec = make_loss_spec(Algo::dpo, {{"beta", beta}});
  LossContext ctx;
  ctx.ref_logp_w = model.logprob(ew);
  ctx.ref_logp_l = model.logprob(el);
  DwDl dd = dw_dl(spec, ctx, ctx.ref_logp_w, ctx.ref_logp_l);
  CondPair conds = check_conditions(dd, nw2, nl2, inner);
  rep.claims.push_back(claim_bool("chosen_cond_holds", conds.chosen));
  rep.claims.push_back(claim_bool("rejected_cond_holds", conds.rejected));

  if (steps > 0) {
    TrainConfig cfg;
    cfg.spec = spec;
    cfg.eta = eta;
    cfg.steps = steps;
    TrainResult res = train(model, {t}, cfg);
    double min_dw = HUGE_VAL, max_dl = -HUGE_VAL;
    for (size_t i = 1; i < res.trace.size(); ++i) {
      min_dw = std::min(min_dw, res.trace[i].logp_w - res.trace[i - 1].logp_w);
      max_dl = std::max(max_dl, res.trace[i].logp_l - res.trace[i - 1].logp_l);
    }
    rep.claims.push_back(claim_sign("logp_w_up_every_step", min_dw, true,
                                    "min per-step change over " +
                                        std::to_string(steps) + " steps"));
    rep.claims.push_back(claim_sign("logp_l_down_every_step", max_dl, false,
                                    "max per-step change over " +
                                        std::to_string(steps) + " steps"));
  }

  rep.notes.push_back("support size M=" + std::to_string(M) +
                      ", |h|^2=" + fmt_g17(h2));
  finish(rep);
  return rep;
}

TheoremReport verify_corollary1(int L, int M, int V, int d, double eta,
                                double beta, uint64_t seed, double tol) {
  if (L < 2) throw std::invalid_argument("verify_corollary1: need L >= 2");
  if (M < 2 || M > V) throw std::invalid_argument("verify_corollary1: bad M");
  TheoremReport rep;
  rep.kind = "corollary1";

  HiddenProvider provider(seed, d, /*unit_norm=*/true);
  LinearHeadLM model(d, V, provider);
  model.set_support(L - 1, first_m_mask(M, V));

  Rng rng(derive_seed(seed, static_cast<uint64_t>(L), static_cast<uint64_t>(M),
                      kClaimTag));
  PreferenceTriple t;
  t.prompt.resize(4);
  for (int& tok : t.prompt) tok = rng.uniform_int(V);
  t.y_w.resize(L - 1);
  for (int& tok : t.y_w) tok = rng.uniform_int(V);
  t.y_l = t.y_w;
  t.y_w.push_back(0);
  t.y_l.push_back(1);

  Encoded ew = model.encode(t.prompt, t.y_w);
  Encoded el = model.encode(t.prompt, t.y_l);

  // Shared positions produce bitwise-identical per-position gradients.
  double shared_dev = 0.0;
  std::vector<double> a_sum(model.num_params(), 0.0);
  for (int i = 0; i < L - 1; ++i) {
    std::vector<double> aw = model.token_grad(ew, i);
    std::vector<double> al = model.token_grad(el, i);
    for (size_t k = 0; k < aw.size(); ++k) {
      shared_dev = std::max(shared_dev, std::fabs(aw[k] - al[k]));
      a_sum[k] += aw[k];
    }
  }
  rep.claims.push_back(claim_abs("shared_position_grads_match", shared_dev,
                                 0.0, 0.0));

  std::vector<double> bw = model.token_grad(ew, L - 1);
  std::vector<double> bl = model.token_grad(el, L - 1);
  const double h2 = norm_sq(ew.h[L - 1]);
  const double Md = static_cast<double>(M);
  rep.claims.push_back(
      claim_rel("last_inner_product", dot(bw, bl), -h2 / Md, tol,
                "final-position gradients reproduce the single-token value"));

  std::vector<double> gw = model.grad_logprob(ew);
  std::vector<double> gl = model.grad_logprob(el);
  double inner = dot(gw, gl);
  double decomposition = norm_sq(a_sum) + dot(a_sum, bw) + dot(a_sum, bl) +
                         dot(bw, bl);
  rep.claims.push_back(
      claim_rel("sequence_inner_decomposition", inner, decomposition, 1e-9,
                "<g_w,g_l> = |sum a|^2 + <sum a, b_w + b_l> + <b_w, b_l>"));

  LossSpec spec = make_loss_spec(Algo::dpo, {{"beta", beta}});
  LossContext ctx;
  ctx.len_w = ctx.len_l = static_cast<double>(L);
  ctx.ref_logp_w = model.logprob(ew);
  ctx.ref_logp_l = model.logprob(el);
  std::vector<double> dir = unified_gradient(spec, ctx, ctx.ref_logp_w,
                                             ctx.ref_logp_l, gw, gl);
  LinearHeadLM stepped = model.apply_step(dir, -eta);
  std::vector<double> lp_w0 = model.token_logprobs(ew);
  std::vector<double> lp_l0 = model.token_logprobs(el);
  std::vector<double> lp_w1 = stepped.token_logprobs(ew);
  std::vector<double> lp_l1 = stepped.token_logprobs(el);
  rep.claims.push_back(claim_sign("last_token_logp_w_up",
                                  lp_w1[L - 1] - lp_w0[L - 1], true));
  rep.claims.push_back(claim_sign("last_token_logp_l_down",
                                  lp_l1[L - 1] - lp_l0[L - 1], false));

  double cross = dot(a_sum, bw) - dot(a_sum, bl);
  rep.notes.push_back("sequence-level cross term <sum a, b_w - b_l> = " +
                      fmt_g17(cross) + " (reported, not sign-constrained)");
  DwDl dd = dw_dl(spec, ctx, ctx.ref_logp_w, ctx.ref_logp_l);
  CondPair conds = check_conditions(dd, norm_sq(gw), norm_sq(gl), inner);
  rep.notes.push_back(std::string("sequence-level conditions: chosen=") +
                      (conds.chosen ? "true" : "false") + " rejected=" +
                      (conds.rejected ? "true" : "false"));
  finish(rep);
  return rep;
}

namespace {

struct EditFixture {
  PreferenceTriple t;
  LogitsLM model;
};

EditFixture build_edit_fixture(int L, int m, int V, double peak_w,
                               double peak_l, uint64_t seed) {
  PreferenceTriple t = build_edit1_triple(L, m, V, seed);
  const int m0 = m - 1;
  auto uniform_row = [&] {
    return std::vector<double>(V, 1.0 / static_cast<double>(V));
  };
  auto peaked_row = [&](int target, double peak) {
    std::vector<double> r(V, (1.0 - peak) / static_cast<double>(V - 1));
    r[target] = peak;
    return r;
  };
  std::vector<std::vector<double>> rows_w, rows_l;
  for (int i = 0; i < L; ++i) {
    if (i <= m0) {
      rows_w.push_back(uniform_row());
      rows_l.push_back(uniform_row());
    } else {
      rows_w.push_back(peaked_row(t.y_w[i], peak_w));
      rows_l.push_back(peaked_row(t.y_l[i], peak_l));
    }
  }
  LogitsLM model(t.y_w, t.y_l, V, std::move(rows_w), std::move(rows_l));
  return {std::move(t), std::move(model)};
}

// Total chosen-logp change after one dpo-style step of size eta.
double one_step_total_delta(const LogitsLM& model, double eta, double beta) {
  LossSpec spec = make_loss_spec(Algo::dpo, {{"beta", beta}});
  LossContext ctx;
  ctx.ref_logp_w = model.logprob(Branch::chosen);
  ctx.ref_logp_l = model.logprob(Branch::rejected);
  std::vector<double> gw = model.grad_logprob(Branch::chosen);
  std::vector<double> gl = model.grad_logprob(Branch::rejected);
  std::vector<double> dir = unified_gradient(spec, ctx, ctx.ref_logp_w,
                                             ctx.ref_logp_l, gw, gl);
  LogitsLM stepped = model.apply_step(dir, -eta);
  return stepped.logprob(Branch::chosen) - ctx.ref_logp_w;
}

}  // namespace

TheoremReport verify_theorem2(int L, int m, int V, double eta, double beta,
                              double peak_w, double peak_l, uint64_t seed,
                              double tol_scale, int sweep_max_suffix) {
  if (L < 1 || m < 1 || m > L)
    throw std::invalid_argument("verify_theorem2: need 1 <= m <= L");
  if (!(peak_w > 1.0 / V && peak_w < 1.0) || !(peak_l > 1.0 / V && peak_l < 1.0))
    throw std::invalid_argument("verify_theorem2: peaks must be in (1/V, 1)");
  TheoremReport rep;
  rep.kind = "theorem2";
  const int m0 = m - 1;
  const double tol = tol_scale * eta * eta;

  EditFixture fx = build_edit_fixture(L, m, V, peak_w, peak_l, seed);
  LogitsLM& model = fx.model;

  LossSpec spec = make_loss_spec(Algo::dpo, {{"beta", beta}});
  LossContext ctx;
  ctx.ref_logp_w = model.logprob(Branch::chosen);
  ctx.ref_logp_l = model.logprob(Branch::rejected);
  const double c = sigmoid(beta * ((model.logprob(Branch::rejected) -
                                    ctx.ref_logp_l) -
                                   (model.logprob(Branch::chosen) -
                                    ctx.ref_logp_w)));  // exactly 1/2 here

  std::vector<double> gw = model.grad_logprob(Branch::chosen);
  std::vector<double> gl = model.grad_logprob(Branch::rejected);
  std::vector<double> dir =
      unified_gradient(spec, ctx, ctx.ref_logp_w, ctx.ref_logp_l, gw, gl);
  LogitsLM stepped = model.apply_step(dir, -eta);

  std::vector<double> before = model.token_logprobs(Branch::chosen);
  std::vector<double> after = stepped.token_logprobs(Branch::chosen);

  for (int i = 0; i < L; ++i) {
    double observed = after[i] - before[i];
    std::string name = "delta_pos_" + std::to_string(i + 1);
    if (i < m0) {
      rep.claims.push_back(claim_abs(name, observed, 0.0, 0.0,
                                     "pre-edit positions cancel exactly"));
    } else if (i == m0) {
      std::vector<double> s = model.row(Branch::chosen, i);
      double pred = eta * beta * c *
                    (1.0 + s[fx.t.y_l[i]] - s[fx.t.y_w[i]]);
      rep.claims.push_back(claim_abs(name, observed, pred, tol,
                                     "edit position: eta*beta*c*(1 + "
                                     "s[rejected] - s[chosen])"));
    } else {
      std::vector<double> sw = model.row(Branch::chosen, i);
      std::vector<double> sl = model.row(Branch::rejected, i);
      const int target = fx.t.y_w[i];
      double pred = 0.0;
      for (int j = 0; j < V; ++j) {
        double e = (j == target) ? 1.0 : 0.0;
        pred += (e - sw[j]) * (sl[j] - sw[j]);
      }
      pred *= eta * beta * c;
      rep.claims.push_back(claim_abs(name, observed, pred, tol,
                                     "post-edit position: eta*beta*c*"
                                     "<e_t - s_w, s_l - s_w>"));
      rep.claims.push_back(
          claim_bool("pred_nonpositive_pos_" + std::to_string(i + 1),
                     pred <= 0.0));
      rep.claims.push_back(claim_bool(
          "coupling_target_pos_" + std::to_string(i + 1),
          sw[target] >= sl[target],
          "chosen row puts at least as much mass on the realized token"));
      double max_off = -HUGE_VAL;
      for (int j = 0; j < V; ++j)
        if (j != target) max_off = std::max(max_off, sw[j] - sl[j]);
      rep.claims.push_back(claim_bool(
          "coupling_off_target_pos_" + std::to_string(i + 1), max_off <= 0.0,
          "and no more mass than the rejected row anywhere else"));
    }
  }

  rep.notes.push_back(
      "per-position predictions use the inner-product form "
      "<e_t - s_w, s_l - s_w>; expanding with the bracket reversed flips "
      "every trailing sign and does not match the measured deltas");
  rep.notes.push_back("c = " + fmt_g17(c) + " (reference equals init)");

  if (sweep_max_suffix >= 1) {
    std::vector<double> totals;
    for (int k = 1; k <= sweep_max_suffix; ++k) {
      EditFixture sweep_fx =
          build_edit_fixture(m + k, m, V, peak_w, peak_l, seed);
      totals.push_back(one_step_total_delta(sweep_fx.model, eta, beta));
      rep.notes.push_back("suffix_len=" + std::to_string(k) +
                          " total_delta_logp_w=" + fmt_g17(totals.back()));
    }
    double max_adjacent_rise = -HUGE_VAL;
    for (size_t i = 1; i < totals.size(); ++i)
      max_adjacent_rise = std::max(max_adjacent_rise,
                                   totals[i] - totals[i - 1]);
    rep.claims.push_back(
        claim_bool("suffix_sweep_monotone", max_adjacent_rise <= 0.0,
                   "total chosen-logp gain never grows with suffix length"));
  }

  finish(rep);
  return rep;
}

}  // namespace polab
