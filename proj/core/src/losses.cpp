#include "polab/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "polab/numerics.hpp"

namespace polab {
namespace {

struct AlgoRow {
  Algo algo;
  const char* name;
  std::map<std::string, double> defaults;
};

const std::vector<AlgoRow>& rows() {
  static const std::vector<AlgoRow> r = {
      {Algo::dpo, "dpo", {{"beta", 1.0}}},
      {Algo::rdpo, "rdpo", {{"beta", 1.0}, {"alpha", 0.2}}},
      {Algo::simpo, "simpo", {{"beta", 1.0}, {"gamma", 0.5}}},
      {Algo::ipo, "ipo", {{"beta", 1.0}}},
      {Algo::rrhf, "rrhf", {{"lambda", 1.0}}},
      {Algo::slichf, "slichf", {{"delta", 1.0}, {"lambda", 1.0}}},
      {Algo::cpo, "cpo", {{"beta", 1.0}, {"lambda", 1.0}}},
      {Algo::dpop, "dpop", {{"beta", 1.0}, {"lambda", 1.0}}},
      {Algo::kto,
       "kto",
       {{"beta", 1.0}, {"lambda_w", 1.0}, {"lambda_l", 1.0}, {"z_ref", 0.0}}},
      {Algo::sppo, "sppo", {{"beta", 1.0}}},
  };
  return r;
}

const AlgoRow& row_of(Algo a) {
  for (const auto& r : rows())
    if (r.algo == a) return r;
  throw std::invalid_argument("unknown algorithm id");
}

bool must_be_positive(const std::string& key) {
  return key == "beta" || key == "gamma" || key == "delta" ||
         key == "lambda_w" || key == "lambda_l";
}

void set_field(LossSpec& s, const std::string& key, double v) {
  if (key == "beta")
    s.beta = v;
  else if (key == "gamma")
    s.gamma = v;
  else if (key == "delta")
    s.delta = v;
  else if (key == "alpha")
    s.alpha = v;
  else if (key == "lambda")
    s.lambda = v;
  else if (key == "lambda_w")
    s.lambda_w = v;
  else if (key == "lambda_l")
    s.lambda_l = v;
  else if (key == "z_ref")
    s.z_ref = v;
}

// Pieces of the decomposition for one algorithm at one evaluation point.
struct Pieces {
  double margin = 0.0;   // g_w(w) - g_l(l)
  double f = 0.0;        // f(margin - shift)
  double fprime = 0.0;   // f'(margin - shift)
  double gw_prime = 0.0; // g_w'(w)
  double gl_prime = 0.0; // g_l'(l)
  double anchor = 0.0;   // R(w)
  double anchor_prime = 0.0;
};

Pieces eval_pieces(const LossSpec& s, const LossContext& c, double w,
                   double l) {
  Pieces p;
  const double b = s.beta;
  switch (s.algo) {
    case Algo::dpo: {
      p.margin = b * w - b * l;
      double a = p.margin - b * (c.ref_logp_w - c.ref_logp_l);
      p.f = log_sigmoid(a);
      p.fprime = sigmoid(-a);
      p.gw_prime = b;
      p.gl_prime = b;
      break;
    }
    case Algo::rdpo: {
      p.margin = b * w - b * l;
      double shift =
          b * (c.ref_logp_w - c.ref_logp_l) + s.alpha * (c.len_w - c.len_l);
      double a = p.margin - shift;
      p.f = log_sigmoid(a);
      p.fprime = sigmoid(-a);
      p.gw_prime = b;
      p.gl_prime = b;
      break;
    }
    case Algo::simpo: {
      p.margin = b * w / c.len_w - b * l / c.len_l;
      double a = p.margin - s.gamma;
      p.f = log_sigmoid(a);
      p.fprime = sigmoid(-a);
      p.gw_prime = b / c.len_w;
      p.gl_prime = b / c.len_l;
      break;
    }
    case Algo::ipo: {
      // Squared deviation of the length-averaged ratio margin from 1/(2*beta).
      p.margin = w / c.len_w - l / c.len_l;
      double target =
          (c.ref_logp_w / c.len_w - c.ref_logp_l / c.len_l) + 0.5 / b;
      double u = p.margin - target;
      p.f = -u * u;
      p.fprime = -2.0 * u;
      p.gw_prime = 1.0 / c.len_w;
      p.gl_prime = 1.0 / c.len_l;
      break;
    }
    case Algo::rrhf: {
      p.margin = w / c.len_w - l / c.len_l;
      p.f = std::min(0.0, p.margin);
      p.fprime = (p.margin <= 0.0) ? 1.0 : 0.0;
      p.gw_prime = 1.0 / c.len_w;
      p.gl_prime = 1.0 / c.len_l;
      p.anchor = s.lambda * w;  // likelihood anchor on the raw chosen logp
      p.anchor_prime = s.lambda;
      break;
    }
    case Algo::slichf: {
      p.margin = w - l;
      double a = p.margin - s.delta;
      p.f = std::min(0.0, a);
      p.fprime = (a <= 0.0) ? 1.0 : 0.0;
      p.gw_prime = 1.0;
      p.gl_prime = 1.0;
      p.anchor = s.lambda * w;
      p.anchor_prime = s.lambda;
      break;
    }
    case Algo::cpo: {
      p.margin = b * w - b * l;
      p.f = log_sigmoid(p.margin);
      p.fprime = sigmoid(-p.margin);
      p.gw_prime = b;
      p.gl_prime = b;
      p.anchor = s.lambda * w;
      p.anchor_prime = s.lambda;
      break;
    }
    case Algo::dpop: {
      // Chosen side carries a hinge that fires when the policy falls below
      // the reference on the chosen response.
      double hinge = std::max(0.0, c.ref_logp_w - w);
      p.margin = (b * w - s.lambda * hinge) - b * l;
      double a = p.margin - b * (c.ref_logp_w - c.ref_logp_l);
      p.f = log_sigmoid(a);
      p.fprime = sigmoid(-a);
      p.gw_prime = b + s.lambda * (w < c.ref_logp_w ? 1.0 : 0.0);
      p.gl_prime = b;
      break;
    }
    case Algo::kto: {
      // Identity link over saturating per-side value maps; each side is
      // anchored to its own reference logp.
      double aw = b * (w - c.ref_logp_w) - s.z_ref;
      double al = b * (l - c.ref_logp_l) - s.z_ref;
      double sw = sigmoid(aw);
      double sl = sigmoid(al);
      p.margin = s.lambda_w * sw - s.lambda_l * sl;
      p.f = p.margin;
      p.fprime = 1.0;
      p.gw_prime = s.lambda_w * b * sw * (1.0 - sw);
      p.gl_prime = s.lambda_l * b * sl * (1.0 - sl);
      break;
    }
    case Algo::sppo: {
      // loss = (w - 1/b)^2 + (l + 1/b)^2, written as -(g_w - g_l) with
      // g_w = (w - 1/b)^2 and g_l = -(l + 1/b)^2 under f = negation.
      double uw = w - 1.0 / b;
      double ul = l + 1.0 / b;
      p.margin = uw * uw + ul * ul;
      p.f = -p.margin;
      p.fprime = -1.0;
      p.gw_prime = 2.0 * uw;
      p.gl_prime = -2.0 * ul;
      break;
    }
  }
  return p;
}

}  // namespace

const char* algo_name(Algo a) { return row_of(a).name; }

std::optional<Algo> algo_from_name(std::string_view name) {
  for (const auto& r : rows())
    if (name == r.name) return r.algo;
  return std::nullopt;
}

const std::vector<Algo>& catalog() {
  static const std::vector<Algo> all = [] {
    std::vector<Algo> v;
    for (const auto& r : rows()) v.push_back(r.algo);
    return v;
  }();
  return all;
}

const std::map<std::string, double>& algo_defaults(Algo a) {
  return row_of(a).defaults;
}

LossSpec make_loss_spec(Algo a, const std::map<std::string, double>& hyper) {
  const AlgoRow& row = row_of(a);
  LossSpec s;
  s.algo = a;
  for (const auto& [key, def] : row.defaults) set_field(s, key, def);
  for (const auto& [key, val] : hyper) {
    if (!row.defaults.count(key))
      throw std::invalid_argument(std::string(row.name) +
                                  ": unknown hyperparameter '" + key + "'");
    if (must_be_positive(key) && !(val > 0.0))
      throw std::invalid_argument(std::string(row.name) + ": '" + key +
                                  "' must be > 0");
    if (!std::isfinite(val))
      throw std::invalid_argument(std::string(row.name) + ": '" + key +
                                  "' must be finite");
    set_field(s, key, val);
  }
  return s;
}

double loss_value(const LossSpec& spec, const LossContext& ctx, double logp_w,
                  double logp_l) {
  Pieces p = eval_pieces(spec, ctx, logp_w, logp_l);
  return -(p.f + p.anchor);
}

double transformed_margin(const LossSpec& spec, const LossContext& ctx,
                          double logp_w, double logp_l) {
  return eval_pieces(spec, ctx, logp_w, logp_l).margin;
}

DwDl dw_dl(const LossSpec& spec, const LossContext& ctx, double logp_w,
           double logp_l) {
  Pieces p = eval_pieces(spec, ctx, logp_w, logp_l);
  DwDl d;
  d.d_w = p.fprime * p.gw_prime + p.anchor_prime;
  d.d_l = p.fprime * p.gl_prime;
  return d;
}

std::vector<double> unified_gradient(const LossSpec& spec,
                                     const LossContext& ctx, double logp_w,
                                     double logp_l,
                                     std::span<const double> grad_w,
                                     std::span<const double> grad_l) {
  if (grad_w.size() != grad_l.size())
    throw std::invalid_argument("unified_gradient: size mismatch");
  DwDl d = dw_dl(spec, ctx, logp_w, logp_l);
  std::vector<double> out(grad_w.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = -(d.d_w * grad_w[i] - d.d_l * grad_l[i]);
  return out;
}

}  // namespace polab
