#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace polab {

// One checked identity/inequality: what was expected, what was measured,
// how far apart they are, and whether that is within tolerance.
struct ClaimRecord {
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double err = 0.0;  // absolute or relative, per `relative`
  double tol = 0.0;
  bool relative = false;
  bool pass = false;
  std::string note;
};

struct TheoremReport {
  std::string kind;
  bool pass = false;
  std::vector<ClaimRecord> claims;
  std::vector<std::string> notes;
};

// Single-token pair on a masked vocabulary of M tokens at the symmetric
// (all-zero head) init: the next-token distribution is uniform on the mask,
// the two pair gradients have equal squared norm (M-1)/M * |h|^2 and inner
// product -|h|^2 / M, both sign conditions hold, and every scaled-sigmoid
// (dpo-style) step moves the chosen logp strictly up and the rejected
// strictly down.
TheoremReport verify_theorem1(int M, int V, int d, double eta, double beta,
                              int steps, uint64_t seed, double tol);

// Same geometry when the pair shares all but the final token: positionwise
// gradients on the shared prefix coincide exactly, the final-position
// gradients reproduce the single-token identities, and one step moves the
// final-token conditionals in opposite directions. Sequence-level terms are
// reported (decomposition checked, signs not asserted).
TheoremReport verify_corollary1(int L, int M, int V, int d, double eta,
                                double beta, uint64_t seed, double tol);

// Edit-distance-one pair scored by shared per-position logit rows. After one
// dpo-style step of size eta, per-position chosen-logp changes are:
// exactly zero before the edit, eta*beta*c*(1 + s[rejected] - s[chosen]) at
// the edit, and eta*beta*c*<e_t - s_w, s_l - s_w> <= 0 after it, each within
// tol_scale * eta^2. With sweep_max_suffix >= 1 the fixture is rebuilt with
// 1..sweep_max_suffix trailing shared tokens and the total one-step change
// of the chosen logp must be non-increasing in the suffix length.
TheoremReport verify_theorem2(int L, int m, int V, double eta, double beta,
                              double peak_w, double peak_l, uint64_t seed,
                              double tol_scale, int sweep_max_suffix = 0);

}  // namespace polab
