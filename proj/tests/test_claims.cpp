#include <algorithm>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "polab/claims.hpp"

using namespace polab;

TEST_SUITE("claims") {

namespace {
bool has_claim(const TheoremReport& r, const std::string& name) {
  return std::any_of(r.claims.begin(), r.claims.end(),
                     [&](const ClaimRecord& c) { return c.name == name; });
}

const ClaimRecord& claim(const TheoremReport& r, const std::string& name) {
  for (const ClaimRecord& c : r.claims)
    if (c.name == name) return c;
  throw std::runtime_error("claim not found: " + name);
}
}  // namespace

TEST_CASE("single-token geometry report passes across mask sizes") {
  for (int M : {2, 4, 8}) {
    CAPTURE(M);
    TheoremReport r = verify_theorem1(M, 32, 16, 0.1, 1.0, 5, 7, 1e-10);
    CHECK(r.kind == "theorem1");
    CHECK(r.pass);
    for (const ClaimRecord& c : r.claims) {
      CAPTURE(c.name);
      CHECK(c.pass);
    }
    CHECK(has_claim(r, "uniform_init"));
    CHECK(has_claim(r, "inner_product"));
    CHECK(has_claim(r, "chosen_sq_norm"));
    CHECK(has_claim(r, "rejected_sq_norm"));
    CHECK(has_claim(r, "off_support_zero"));
    CHECK(has_claim(r, "chosen_cond_holds"));
    CHECK(has_claim(r, "rejected_cond_holds"));
    CHECK(has_claim(r, "logp_w_up_every_step"));
    CHECK(has_claim(r, "logp_l_down_every_step"));
    // the two norms are equal and the inner product is negative
    const ClaimRecord& inner = claim(r, "inner_product");
    CHECK(inner.observed < 0.0);
  }
}

TEST_CASE("single-token geometry: exact expected values for M = 4") {
  // |h| = 1 (unit-norm features): inner = -1/4, norms^2 = 3/4.
  TheoremReport r = verify_theorem1(4, 32, 16, 0.1, 1.0, 0, 7, 1e-10);
  CHECK(claim(r, "inner_product").expected == doctest::Approx(-0.25));
  CHECK(claim(r, "chosen_sq_norm").expected == doctest::Approx(0.75));
  CHECK(claim(r, "inner_product").err < 1e-12);
}

TEST_CASE("single-token geometry rejects bad arguments") {
  CHECK_THROWS_AS(verify_theorem1(1, 32, 16, 0.1, 1.0, 1, 7, 1e-10),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_theorem1(40, 32, 16, 0.1, 1.0, 1, 7, 1e-10),
                  std::invalid_argument);  // mask larger than vocab
  CHECK_THROWS_AS(verify_theorem1(4, 32, 16, -0.1, 1.0, 1, 7, 1e-10),
                  std::invalid_argument);
}

TEST_CASE("shared-prefix variant passes and pins the prefix cancellation") {
  TheoremReport r = verify_corollary1(3, 4, 32, 16, 1e-2, 1.0, 7, 1e-9);
  CHECK(r.kind == "corollary1");
  CHECK(r.pass);
  for (const ClaimRecord& c : r.claims) {
    CAPTURE(c.name);
    CHECK(c.pass);
  }
  CHECK(has_claim(r, "shared_position_grads_match"));
  CHECK(has_claim(r, "last_inner_product"));
  CHECK(has_claim(r, "sequence_inner_decomposition"));
  CHECK(has_claim(r, "last_token_logp_w_up"));
  CHECK(has_claim(r, "last_token_logp_l_down"));
  // the prefix match is exact
  CHECK(claim(r, "shared_position_grads_match").err == 0.0);
  CHECK_FALSE(r.notes.empty());
}

TEST_CASE("edit-pair one-step report passes with the suffix sweep") {
  TheoremReport r =
      verify_theorem2(4, 2, 8, 1e-4, 1.0, 0.6, 0.5, 7, 10.0, 10);
  CHECK(r.kind == "theorem2");
  CHECK(r.pass);
  for (const ClaimRecord& c : r.claims) {
    CAPTURE(c.name);
    CHECK(c.pass);
  }
  // pre-edit positions cancel bitwise
  CHECK(claim(r, "delta_pos_1").err == 0.0);
  CHECK(claim(r, "delta_pos_1").tol == 0.0);
  CHECK(has_claim(r, "delta_pos_2"));  // the edit position
  CHECK(has_claim(r, "pred_nonpositive_pos_3"));
  CHECK(has_claim(r, "pred_nonpositive_pos_4"));
  CHECK(has_claim(r, "coupling_target_pos_3"));
  CHECK(has_claim(r, "coupling_off_target_pos_3"));
  CHECK(has_claim(r, "suffix_sweep_monotone"));
  CHECK_FALSE(r.notes.empty());
}

TEST_CASE("edit-pair report fails when tolerances are impossible") {
  // Second-order terms are real: with a near-zero tolerance scale the
  // at/after-edit predictions cannot match, so the report must say fail.
  TheoremReport r =
      verify_theorem2(4, 2, 8, 1e-2, 1.0, 0.6, 0.5, 7, 1e-12, 0);
  CHECK_FALSE(r.pass);
  bool any_failed = false;
  for (const ClaimRecord& c : r.claims) any_failed |= !c.pass;
  CHECK(any_failed);
}

TEST_CASE("edit-pair report rejects bad arguments") {
  CHECK_THROWS_AS(verify_theorem2(4, 0, 8, 1e-4, 1.0, 0.6, 0.5, 7, 10.0, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_theorem2(4, 5, 8, 1e-4, 1.0, 0.6, 0.5, 7, 10.0, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_theorem2(4, 2, 8, 1e-4, 1.0, 1.2, 0.5, 7, 10.0, 0),
                  std::invalid_argument);  // peak outside (0, 1)
  CHECK_THROWS_AS(verify_theorem2(4, 2, 1, 1e-4, 1.0, 0.6, 0.5, 7, 10.0, 0),
                  std::invalid_argument);
}

}  // TEST_SUITE
