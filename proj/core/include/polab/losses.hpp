#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace polab {

// Pairwise preference objectives, all expressed in one shape:
//
//   loss = -( f( g_w(logp_w) - g_l(logp_l) - shift ) + R(logp_w) )
//
// where f is a link applied to the transformed margin, g_w/g_l map each
// sequence log-probability, shift collects reference/target offsets, and R is
// an optional anchor on the chosen response. Every algorithm below is the
// published minimization objective (up to an additive constant), so one
// gradient routine covers all of them:
//
//   grad(loss) = -( d_w * grad_logp_w - d_l * grad_logp_l )
//   d_w = f'(margin) * g_w'(logp_w) + R'(logp_w)
//   d_l = f'(margin) * g_l'(logp_l)
enum class Algo {
  dpo,
  rdpo,
  simpo,
  ipo,
  rrhf,
  slichf,
  cpo,
  dpop,
  kto,
  sppo,
};

const char* algo_name(Algo a);
std::optional<Algo> algo_from_name(std::string_view name);
const std::vector<Algo>& catalog();

// Per-pair quantities the losses read but do not own: reference-model
// sequence log-probabilities and response lengths in tokens.
struct LossContext {
  double ref_logp_w = 0.0;
  double ref_logp_l = 0.0;
  double len_w = 1.0;
  double len_l = 1.0;
};

struct LossSpec {
  Algo algo = Algo::dpo;
  double beta = 1.0;      // margin scale (dpo, rdpo, simpo, ipo, cpo, dpop, kto, sppo)
  double gamma = 0.5;     // target margin (simpo)
  double delta = 1.0;     // hinge margin (slichf)
  double alpha = 0.2;     // length-penalty weight (rdpo)
  double lambda = 1.0;    // anchor weight (rrhf, slichf, cpo) / hinge weight (dpop)
  double lambda_w = 1.0;  // chosen-side weight (kto)
  double lambda_l = 1.0;  // rejected-side weight (kto)
  double z_ref = 0.0;     // reference point (kto)
};

// Accepted hyperparameter keys for one algorithm, with defaults.
const std::map<std::string, double>& algo_defaults(Algo a);

// Validates keys (unknown key -> invalid_argument) and positivity where the
// objective needs it (beta, gamma, delta, lambda_w, lambda_l must be > 0).
LossSpec make_loss_spec(Algo a,
                        const std::map<std::string, double>& hyper = {});

double loss_value(const LossSpec& spec, const LossContext& ctx, double logp_w,
                  double logp_l);

// Transformed margin g_w(logp_w) - g_l(logp_l), before shift and link.
double transformed_margin(const LossSpec& spec, const LossContext& ctx,
                          double logp_w, double logp_l);

struct DwDl {
  double d_w = 0.0;
  double d_l = 0.0;
};

DwDl dw_dl(const LossSpec& spec, const LossContext& ctx, double logp_w,
           double logp_l);

// -(d_w * grad_w - d_l * grad_l); sizes must match.
std::vector<double> unified_gradient(const LossSpec& spec,
                                     const LossContext& ctx, double logp_w,
                                     double logp_l,
                                     std::span<const double> grad_w,
                                     std::span<const double> grad_l);

}  // namespace polab
