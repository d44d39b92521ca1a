#include <cmath>
#include <vector>

#include "doctest.h"
#include "polab/datasets.hpp"
#include "polab/diagnostics.hpp"
#include "polab/models.hpp"
#include "polab/numerics.hpp"
#include "polab/rng.hpp"

using namespace polab;

TEST_SUITE("diagnostics") {

TEST_CASE("taylor_predict: closed form in the three scalars") {
  DwDl d{0.7, 0.3};
  TaylorDelta t = taylor_predict(d, 4.0, 9.0, -2.0, 0.1);
  CHECK(t.delta_w == doctest::Approx(0.1 * (0.7 * 4.0 - 0.3 * -2.0)));
  CHECK(t.delta_l == doctest::Approx(0.1 * (0.7 * -2.0 - 0.3 * 9.0)));
}

TEST_CASE("check_conditions: product form, equality counts") {
  // d_l*inner <= d_w*nw2 and d_w*inner <= d_l*nl2
  DwDl d{1.0, 1.0};
  CondPair c = check_conditions(d, 1.0, 1.0, -0.5);
  CHECK(c.chosen);
  CHECK(c.rejected);
  // inner exactly at the boundary: satisfied
  CondPair edge = check_conditions(d, 1.0, 1.0, 1.0);
  CHECK(edge.chosen);
  CHECK(edge.rejected);
  // aligned gradients with asymmetric coefficients: chosen wins, rejected loses
  DwDl skew{2.0, 0.5};
  CondPair s = check_conditions(skew, 1.0, 1.0, 0.9);
  CHECK(s.chosen);        // 0.5*0.9 <= 2.0
  CHECK_FALSE(s.rejected);  // 2.0*0.9 > 0.5
  // negative coefficients: d_l*inner = 0.5 > d_w*nw2 = -1, so both fail
  DwDl neg{-1.0, -1.0};
  CondPair n = check_conditions(neg, 1.0, 1.0, -0.5);
  CHECK_FALSE(n.chosen);
  CHECK_FALSE(n.rejected);
}

TEST_CASE("conditions agree with the sign of the predicted deltas") {
  Rng rng(404);
  for (int rep = 0; rep < 500; ++rep) {
    DwDl d{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    double nw = rng.uniform(0.1, 2.0), nl = rng.uniform(0.1, 2.0);
    double inner = rng.uniform(-1.0, 1.0) * nw * nl;
    TaylorDelta t = taylor_predict(d, nw * nw, nl * nl, inner, 1.0);
    CondPair c = check_conditions(d, nw * nw, nl * nl, inner);
    CHECK(c.chosen == (t.delta_w >= 0.0));
    CHECK(c.rejected == (t.delta_l <= 0.0));
  }
}

TEST_CASE("case labels cover the four sign patterns") {
  CHECK(classify_case({true, true}) == CaseLabel::ideal);
  CHECK(classify_case({false, true}) == CaseLabel::both_down);
  CHECK(classify_case({true, false}) == CaseLabel::both_up);
  CHECK(classify_case({false, false}) == CaseLabel::indeterminate);
  CHECK(std::string(case_name(CaseLabel::ideal)) == "case1_ideal");
  CHECK(std::string(case_name(CaseLabel::both_down)) == "case2_both_down");
  CHECK(std::string(case_name(CaseLabel::both_up)) == "case3_both_up");
  CHECK(std::string(case_name(CaseLabel::indeterminate)) == "indeterminate");
}

TEST_CASE("central_diff_grad is exact on a quadratic") {
  auto f = [](std::span<const double> x) {
    return 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1];
  };
  std::vector<double> x0 = {1.5, -2.0};
  auto g = central_diff_grad(f, x0, 1e-4);
  CHECK(g[0] == doctest::Approx(6.0 * 1.5 - 2.0 * -2.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(-2.0 * 1.5 + 1.0 * -2.0).epsilon(1e-9));
}

TEST_CASE("grad_report wires the scalars together consistently") {
  LossSpec s = make_loss_spec(Algo::dpo);
  LossContext c;
  c.ref_logp_w = -1.0;
  c.ref_logp_l = -1.0;
  std::vector<double> gw = {1.0, 0.5, 0.0};
  std::vector<double> gl = {0.5, 1.0, 0.0};
  double eta = 0.05;
  GradReport r = grad_report(s, c, -0.8, -1.1, gw, gl, eta);
  CHECK(r.logp_w == -0.8);
  CHECK(r.logp_l == -1.1);
  CHECK(r.loss == doctest::Approx(loss_value(s, c, -0.8, -1.1)));
  CHECK(r.norm_w == doctest::Approx(norm(gw)));
  CHECK(r.norm_l == doctest::Approx(norm(gl)));
  CHECK(r.inner == doctest::Approx(dot(gw, gl)));
  CHECK(r.cosine == doctest::Approx(dot(gw, gl) / (norm(gw) * norm(gl))));
  TaylorDelta t = taylor_predict(r.d, r.norm_w * r.norm_w,
                                 r.norm_l * r.norm_l, r.inner, eta);
  CHECK(r.pred.delta_w == doctest::Approx(t.delta_w));
  CHECK(r.pred.delta_l == doctest::Approx(t.delta_l));
  CHECK(r.label == classify_case(r.conds));
}

TEST_CASE("taylor prediction matches an actual small step on a real model") {
  HiddenProvider p(31, 12);
  LinearHeadLM m = LinearHeadLM::random_init(12, 10, p, 77, 0.4);
  Seq prompt = {1, 2, 3};
  Seq yw = {4, 5};
  Seq yl = {6, 7};
  Encoded ew = m.encode(prompt, yw), el = m.encode(prompt, yl);
  LossSpec s = make_loss_spec(Algo::dpo, {{"beta", 2.0}});
  LossContext c;
  c.ref_logp_w = m.logprob(ew);
  c.ref_logp_l = m.logprob(el);
  double w0 = m.logprob(ew), l0 = m.logprob(el);
  auto gw = m.grad_logprob(ew), gl = m.grad_logprob(el);
  double eta = 1e-4;
  GradReport r = grad_report(s, c, w0, l0, gw, gl, eta);
  auto dir = unified_gradient(s, c, w0, l0, gw, gl);
  LinearHeadLM m2 = m.apply_step(dir, -eta);  // descend
  double dw_obs = m2.logprob(m2.encode(prompt, yw)) - w0;
  double dl_obs = m2.logprob(m2.encode(prompt, yl)) - l0;
  CHECK(std::fabs(dw_obs - r.pred.delta_w) < 100 * eta * eta);
  CHECK(std::fabs(dl_obs - r.pred.delta_l) < 100 * eta * eta);
}

TEST_CASE("token heatmap: shape, range, edit-position structure") {
  HiddenProvider p(9, 24);
  LinearHeadLM m(24, 32, p);  // theta = 0
  Seq prompt = {10, 11, 12};
  Seq yw = template_response(PairStyle::prefix_suffix, true);
  Seq yl = template_response(PairStyle::prefix_suffix, false);
  TokenHeatmap hm = token_heatmap(m, prompt, yw, yl);
  REQUIRE(hm.rows == static_cast<int>(yw.size()));
  REQUIRE(hm.cols == static_cast<int>(yl.size()));
  for (double v : hm.v) CHECK(std::fabs(v) <= 1.0 + 1e-12);
  int ed = differ_position(PairStyle::prefix_suffix);
  // At theta=0 the differing position's gradients anti-align...
  CHECK(hm.at(ed, ed) < 0.0);
  // ...while shared positions with identical prefixes align perfectly.
  for (int i = 0; i < ed; ++i)
    CHECK(hm.at(i, i) == doctest::Approx(1.0).epsilon(1e-9));
  // Shared-suffix positions (same token, near-identical prefixes) stay high.
  for (size_t i = ed + 1; i < yw.size(); ++i)
    CHECK(hm.at(static_cast<int>(i), static_cast<int>(i)) > 0.5);
}

}  // TEST_SUITE
