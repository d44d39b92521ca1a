#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "polab/diagnostics.hpp"
#include "polab/models.hpp"
#include "polab/numerics.hpp"
#include "polab/rng.hpp"

using namespace polab;

TEST_SUITE("models") {

// log(1/4) summed over a 3-token response, frozen at high precision.
constexpr double kThreeTokenUniformV4 = -4.1588830833596718565;

TEST_CASE("hidden provider: deterministic, unit norm, prefix-sensitive") {
  HiddenProvider p(7, 16);
  HiddenProvider q(7, 16);
  Seq prompt = {1, 2, 3};
  Seq resp = {4, 5, 6};
  auto h1 = p.hidden(prompt, resp, 2);
  auto h2 = q.hidden(prompt, resp, 2);
  REQUIRE(h1.size() == 16);
  for (size_t i = 0; i < h1.size(); ++i) CHECK(h1[i] == h2[i]);
  CHECK(norm(h1) == doctest::Approx(1.0).epsilon(1e-12));

  // Different seed, different state.
  HiddenProvider r(8, 16);
  auto h3 = r.hidden(prompt, resp, 2);
  double diff = 0;
  for (size_t i = 0; i < h1.size(); ++i) diff += std::fabs(h1[i] - h3[i]);
  CHECK(diff > 1e-6);

  // Prefixes sharing all but one token give strongly aligned states.
  Seq resp_b = {4, 9, 6};
  auto ha = p.hidden(prompt, resp, 3);
  auto hb = p.hidden(prompt, resp_b, 3);
  double c = cosine(ha, hb);
  CHECK(c > 0.5);
  CHECK(c < 1.0);

  // Same (prompt, prefix) content through different argument splits agrees:
  // only tokens up to prefix_len matter.
  auto hc = p.hidden(prompt, {4, 5, 6}, 2);
  auto hd = p.hidden(prompt, {4, 5, 999}, 2);
  for (size_t i = 0; i < hc.size(); ++i) CHECK(hc[i] == hd[i]);

  CHECK_THROWS_AS(HiddenProvider(1, 0), std::invalid_argument);
}

TEST_CASE("linear head at zero: uniform rows, frozen sequence logp") {
  HiddenProvider p(3, 8);
  LinearHeadLM m(8, 4, p);
  Seq prompt = {0};
  Seq resp = {1, 2, 3};
  Encoded e = m.encode(prompt, resp);
  auto probs = m.next_token_probs(e, 0);
  REQUIRE(probs.size() == 4);
  for (double v : probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.logprob(e) ==
        doctest::Approx(kThreeTokenUniformV4).epsilon(1e-14));
  CHECK(m.logprob(prompt, resp) == m.logprob(e));
  auto per_tok = m.token_logprobs(e);
  REQUIRE(per_tok.size() == 3);
  double s = 0;
  for (double v : per_tok) s += v;
  CHECK(s == doctest::Approx(m.logprob(e)).epsilon(1e-14));
}

TEST_CASE("grad_logprob matches finite differences of logprob") {
  HiddenProvider p(11, 4);
  LinearHeadLM m0 = LinearHeadLM::random_init(4, 6, p, 99, 0.5);
  Seq prompt = {2, 5};
  Seq resp = {0, 3, 1};
  Encoded e = m0.encode(prompt, resp);
  auto g = m0.grad_logprob(e);
  REQUIRE(g.size() == static_cast<size_t>(m0.num_params()));

  auto f = [&](std::span<const double> th) {
    return m0.with_params(std::vector<double>(th.begin(), th.end()))
        .logprob(prompt, resp);
  };
  auto fd = central_diff_grad(f, m0.params(), 1e-5);
  for (size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6));
}

TEST_CASE("token gradients sum to the sequence gradient") {
  HiddenProvider p(5, 6);
  LinearHeadLM m = LinearHeadLM::random_init(6, 5, p, 17, 0.3);
  Encoded e = m.encode({1}, {0, 2, 4});
  auto g = m.grad_logprob(e);
  std::vector<double> acc(g.size(), 0.0);
  for (int i = 0; i < 3; ++i) {
    auto t = m.token_grad(e, i);
    for (size_t k = 0; k < acc.size(); ++k) acc[k] += t[k];
  }
  for (size_t k = 0; k < acc.size(); ++k)
    CHECK(acc[k] == doctest::Approx(g[k]).epsilon(1e-12));

  // weighted_grad with all-ones equals grad_logprob; half weights halve it.
  std::vector<double> ones(3, 1.0), halves(3, 0.5);
  auto gw = m.weighted_grad(e, ones);
  auto gh = m.weighted_grad(e, halves);
  for (size_t k = 0; k < acc.size(); ++k) {
    CHECK(gw[k] == doctest::Approx(g[k]).epsilon(1e-12));
    CHECK(gh[k] == doctest::Approx(0.5 * g[k]).epsilon(1e-12));
  }
  std::vector<double> wrong(2, 1.0);
  CHECK_THROWS_AS(m.weighted_grad(e, wrong), std::invalid_argument);
}

TEST_CASE("support mask restricts the distribution and the gradient") {
  HiddenProvider p(21, 8);
  LinearHeadLM m(8, 6, p);
  m.set_support(0, {1, 1, 0, 0, 1, 1});  // 4 tokens kept at position 0
  Encoded e = m.encode({0}, {1, 2});
  auto probs = m.next_token_probs(e, 0);
  CHECK(probs[2] == 0.0);
  CHECK(probs[3] == 0.0);
  double s = probs[0] + probs[1] + probs[4] + probs[5];
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs[0] == doctest::Approx(0.25).epsilon(1e-12));  // theta = 0

  // Gradient w.r.t. columns outside the support is exactly zero.
  auto g = m.token_grad(e, 0);
  for (int j : {2, 3})
    for (int k = 0; k < 8; ++k) CHECK(g[j * 8 + k] == 0.0);

  // Scoring a response whose token is off-support throws.
  m.set_support(1, {1, 0, 1, 0, 1, 0});
  Encoded bad = m.encode({0}, {1, 3});
  CHECK_THROWS_AS(m.token_logprobs(bad), std::invalid_argument);

  CHECK_THROWS_AS(m.set_support(0, {1, 0, 0, 0, 0, 0}),
                  std::invalid_argument);  // fewer than two tokens kept
  CHECK_THROWS_AS(m.set_support(0, {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("apply_step and with_params") {
  HiddenProvider p(2, 4);
  LinearHeadLM m(4, 3, p);
  std::vector<double> dir(m.num_params(), 1.0);
  LinearHeadLM m2 = m.apply_step(dir, 0.25);
  for (double v : m2.params()) CHECK(v == 0.25);
  for (double v : m.params()) CHECK(v == 0.0);  // original untouched
  CHECK_THROWS_AS(m.with_params(std::vector<double>(5, 0.0)),
                  std::invalid_argument);
  std::vector<double> short_dir(3, 1.0);
  CHECK_THROWS_AS(m.apply_step(short_dir, 0.1), std::invalid_argument);
}

namespace {
std::vector<std::vector<double>> uniform_rows(int n, int v) {
  return std::vector<std::vector<double>>(
      n, std::vector<double>(v, 1.0 / v));
}
}  // namespace

TEST_CASE("paired logits model: rows, logp, edit detection") {
  int V = 4;
  Seq tw = {0, 1, 2};
  Seq tl = {0, 3, 2};
  auto rw = uniform_rows(3, V);
  auto rl = uniform_rows(3, V);
  rw[2] = {0.1, 0.2, 0.6, 0.1};
  rl[2] = {0.4, 0.2, 0.3, 0.1};
  LogitsLM m(tw, tl, V, rw, rl);
  CHECK(m.length() == 3);
  CHECK(m.edit_index() == 1);
  CHECK(edit_index(tw, tl) == 1);

  for (int i = 0; i < 3; ++i) {
    auto a = m.row(Branch::chosen, i);
    auto b = m.row(Branch::rejected, i);
    for (int j = 0; j < V; ++j) {
      CHECK(a[j] == doctest::Approx(rw[i][j]).epsilon(1e-12));
      CHECK(b[j] == doctest::Approx(rl[i][j]).epsilon(1e-12));
    }
  }
  double want_w = std::log(0.25) + std::log(0.25) + std::log(0.6);
  CHECK(m.logprob(Branch::chosen) == doctest::Approx(want_w).epsilon(1e-12));
  double want_l = std::log(0.25) + std::log(0.25) + std::log(0.3);
  CHECK(m.logprob(Branch::rejected) == doctest::Approx(want_l).epsilon(1e-12));

  // Through the edit position the two branches share bitwise-equal rows.
  for (int i = 0; i <= m.edit_index(); ++i) {
    auto a = m.row(Branch::chosen, i);
    auto b = m.row(Branch::rejected, i);
    for (int j = 0; j < V; ++j) CHECK(a[j] == b[j]);
  }
}

TEST_CASE("paired logits model: gradient matches finite differences") {
  int V = 5;
  Seq tw = {1, 2, 0};
  Seq tl = {1, 4, 0};
  auto rw = uniform_rows(3, V);
  auto rl = uniform_rows(3, V);
  rw[2] = {0.5, 0.125, 0.125, 0.125, 0.125};
  rl[2] = {0.125, 0.5, 0.125, 0.125, 0.125};
  LogitsLM m(tw, tl, V, rw, rl);
  for (Branch b : {Branch::chosen, Branch::rejected}) {
    auto g = m.grad_logprob(b);
    auto f = [&](std::span<const double> z) {
      return m.with_params(std::vector<double>(z.begin(), z.end())).logprob(b);
    };
    auto fd = central_diff_grad(f, m.params(), 1e-6);
    REQUIRE(g.size() == fd.size());
    for (size_t i = 0; i < g.size(); ++i)
      CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-5));
  }
}

TEST_CASE("paired logits model: constructor validation") {
  int V = 4;
  Seq tw = {0, 1};
  Seq tl = {0, 2};
  auto ok = uniform_rows(2, V);

  auto bad_sum = ok;
  bad_sum[1] = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(LogitsLM(tw, tl, V, bad_sum, ok), std::invalid_argument);

  auto differs_early = ok;
  differs_early[0] = {0.4, 0.2, 0.2, 0.2};  // edit is at position 1
  CHECK_THROWS_AS(LogitsLM(tw, tl, V, differs_early, ok),
                  std::invalid_argument);

  CHECK_THROWS_AS(LogitsLM(tw, tw, V, ok, ok), std::invalid_argument);  // no edit
  Seq two_edits = {1, 3};
  CHECK_THROWS_AS(LogitsLM(tw, two_edits, V, ok, ok), std::invalid_argument);
  CHECK_THROWS_AS(edit_index(tw, tw), std::invalid_argument);
  CHECK_THROWS_AS(edit_index(tw, two_edits), std::invalid_argument);
  Seq wrong_len = {0, 1, 2};
  CHECK_THROWS_AS(edit_index(tw, wrong_len), std::invalid_argument);
}

}  // TEST_SUITE
