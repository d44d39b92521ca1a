#include "polab/models.hpp"

#include <cmath>
#include <stdexcept>

#include "polab/numerics.hpp"
#include "polab/rng.hpp"

namespace polab {

namespace {
constexpr uint64_t kFeatureTag = 0x68696464;  // feature stream namespace
constexpr uint64_t kInitTag = 0x696e6974;     // head init stream namespace

void check_token_range(const Seq& s, int vocab, const char* what) {
  for (int t : s)
    if (t < 0 || t >= vocab)
      throw std::invalid_argument(std::string(what) + ": token out of range");
}
}  // namespace

HiddenProvider::HiddenProvider(uint64_t seed, int dim, bool unit_norm)
    : seed_(seed), dim_(dim), unit_norm_(unit_norm) {
  if (dim <= 0) throw std::invalid_argument("HiddenProvider: dim must be > 0");
}

std::vector<double> HiddenProvider::feature(uint64_t slot,
                                            uint64_t token) const {
  Rng rng(derive_seed(seed_, slot, token, kFeatureTag));
  return rng.normal_vec(static_cast<size_t>(dim_));
}

std::vector<double> HiddenProvider::hidden(const Seq& prompt,
                                           const Seq& response,
                                           int prefix_len) const {
  if (prefix_len < 0 || prefix_len > static_cast<int>(response.size()))
    throw std::invalid_argument("HiddenProvider: bad prefix length");
  std::vector<double> acc = feature(0, 0);  // bias slot
  uint64_t slot = 1;
  for (int t : prompt) {
    std::vector<double> f = feature(slot++, static_cast<uint64_t>(t) + 1);
    for (int i = 0; i < dim_; ++i) acc[i] += f[i];
  }
  for (int k = 0; k < prefix_len; ++k) {
    std::vector<double> f =
        feature(slot++, static_cast<uint64_t>(response[k]) + 1);
    for (int i = 0; i < dim_; ++i) acc[i] += f[i];
  }
  if (unit_norm_) {
    double n = norm(acc);
    if (n > 1e-12)
      for (double& x : acc) x /= n;
  }
  return acc;
}

LinearHeadLM::LinearHeadLM(int d, int vocab, HiddenProvider provider)
    : d_(d), vocab_(vocab), provider_(std::move(provider)) {
  if (d <= 0 || vocab <= 1)
    throw std::invalid_argument("LinearHeadLM: need d > 0 and vocab > 1");
  if (provider_.dim() != d)
    throw std::invalid_argument("LinearHeadLM: provider dim mismatch");
  theta_.assign(static_cast<size_t>(d) * vocab, 0.0);
}

LinearHeadLM LinearHeadLM::random_init(int d, int vocab,
                                       HiddenProvider provider, uint64_t seed,
                                       double scale) {
  LinearHeadLM m(d, vocab, std::move(provider));
  Rng rng(derive_seed(seed, static_cast<uint64_t>(d),
                      static_cast<uint64_t>(vocab), kInitTag));
  m.theta_ = rng.normal_vec(m.theta_.size(), scale);
  return m;
}

LinearHeadLM LinearHeadLM::with_params(std::vector<double> theta) const {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("with_params: size mismatch");
  LinearHeadLM m = *this;
  m.theta_ = std::move(theta);
  return m;
}

LinearHeadLM LinearHeadLM::apply_step(std::span<const double> direction,
                                      double eta) const {
  if (direction.size() != theta_.size())
    throw std::invalid_argument("apply_step: size mismatch");
  LinearHeadLM m = *this;
  for (size_t i = 0; i < m.theta_.size(); ++i)
    m.theta_[i] += eta * direction[i];
  return m;
}

void LinearHeadLM::set_support(int response_pos, std::vector<uint8_t> mask) {
  if (static_cast<int>(mask.size()) != vocab_)
    throw std::invalid_argument("set_support: mask must have vocab entries");
  int kept = 0;
  for (uint8_t b : mask) kept += (b != 0);
  if (kept < 2)
    throw std::invalid_argument("set_support: need at least two tokens");
  support_[response_pos] = std::move(mask);
}

const std::vector<uint8_t>* LinearHeadLM::support_at(int i) const {
  auto it = support_.find(i);
  return it == support_.end() ? nullptr : &it->second;
}

Encoded LinearHeadLM::encode(const Seq& prompt, const Seq& response) const {
  check_token_range(prompt, vocab_, "encode(prompt)");
  check_token_range(response, vocab_, "encode(response)");
  Encoded e;
  e.tokens = response;
  e.h.reserve(response.size());
  for (int i = 0; i < static_cast<int>(response.size()); ++i)
    e.h.push_back(provider_.hidden(prompt, response, i));
  return e;
}

std::vector<double> LinearHeadLM::token_logprobs(const Encoded& e) const {
  std::vector<double> out(e.tokens.size());
  std::vector<double> z;
  z.reserve(vocab_);
  for (size_t i = 0; i < e.tokens.size(); ++i) {
    const auto* mask = support_at(static_cast<int>(i));
    const std::vector<double>& h = e.h[i];
    z.clear();
    double z_tok = 0.0;
    bool tok_allowed = false;
    for (int j = 0; j < vocab_; ++j) {
      if (mask && !(*mask)[j]) continue;
      double zj = dot(h, std::span<const double>(
                             theta_.data() + static_cast<size_t>(j) * d_, d_));
      z.push_back(zj);
      if (j == e.tokens[i]) {
        z_tok = zj;
        tok_allowed = true;
      }
    }
    if (!tok_allowed)
      throw std::invalid_argument("token_logprobs: token off support");
    out[i] = z_tok - logsumexp(z);
  }
  return out;
}

double LinearHeadLM::logprob(const Encoded& e) const {
  std::vector<double> lp = token_logprobs(e);
  return pairwise_sum(lp);
}

double LinearHeadLM::logprob(const Seq& prompt, const Seq& response) const {
  return logprob(encode(prompt, response));
}

std::vector<double> LinearHeadLM::next_token_probs(const Encoded& e,
                                                   int i) const {
  if (i < 0 || i >= static_cast<int>(e.tokens.size()))
    throw std::invalid_argument("next_token_probs: bad position");
  const auto* mask = support_at(i);
  const std::vector<double>& h = e.h[i];
  std::vector<double> z(vocab_, -HUGE_VAL);
  std::vector<double> live;
  live.reserve(vocab_);
  for (int j = 0; j < vocab_; ++j) {
    if (mask && !(*mask)[j]) continue;
    z[j] = dot(h, std::span<const double>(
                      theta_.data() + static_cast<size_t>(j) * d_, d_));
    live.push_back(z[j]);
  }
  double lse = logsumexp(live);
  std::vector<double> p(vocab_, 0.0);
  for (int j = 0; j < vocab_; ++j)
    if (std::isfinite(z[j])) p[j] = std::exp(z[j] - lse);
  return p;
}

std::vector<double> LinearHeadLM::token_grad(const Encoded& e, int i) const {
  if (i < 0 || i >= static_cast<int>(e.tokens.size()))
    throw std::invalid_argument("token_grad: bad position");
  std::vector<double> g(theta_.size(), 0.0);
  std::vector<double> p = next_token_probs(e, i);
  const auto* mask = support_at(i);
  const std::vector<double>& h = e.h[i];
  for (int j = 0; j < vocab_; ++j) {
    if (mask && !(*mask)[j]) continue;  // off-support columns stay exactly 0
    double coeff = (j == e.tokens[i] ? 1.0 : 0.0) - p[j];
    double* col = g.data() + static_cast<size_t>(j) * d_;
    for (int k = 0; k < d_; ++k) col[k] += coeff * h[k];
  }
  return g;
}

std::vector<double> LinearHeadLM::weighted_grad(
    const Encoded& e, std::span<const double> weights) const {
  if (weights.size() != e.tokens.size())
    throw std::invalid_argument("weighted_grad: weight per position required");
  std::vector<double> g(theta_.size(), 0.0);
  for (size_t i = 0; i < e.tokens.size(); ++i) {
    if (weights[i] == 0.0) continue;
    std::vector<double> p = next_token_probs(e, static_cast<int>(i));
    const auto* mask = support_at(static_cast<int>(i));
    const std::vector<double>& h = e.h[i];
    for (int j = 0; j < vocab_; ++j) {
      if (mask && !(*mask)[j]) continue;
      double coeff = weights[i] * ((j == e.tokens[i] ? 1.0 : 0.0) - p[j]);
      double* col = g.data() + static_cast<size_t>(j) * d_;
      for (int k = 0; k < d_; ++k) col[k] += coeff * h[k];
    }
  }
  return g;
}

std::vector<double> LinearHeadLM::grad_logprob(const Encoded& e) const {
  std::vector<double> ones(e.tokens.size(), 1.0);
  return weighted_grad(e, ones);
}

int edit_index(const Seq& a, const Seq& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("edit_index: length mismatch");
  int idx = -1;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      if (idx >= 0)
        throw std::invalid_argument("edit_index: more than one difference");
      idx = static_cast<int>(i);
    }
  }
  if (idx < 0) throw std::invalid_argument("edit_index: sequences identical");
  return idx;
}

LogitsLM::LogitsLM(Seq tokens_chosen, Seq tokens_rejected, int vocab,
                   std::vector<std::vector<double>> rows_chosen,
                   std::vector<std::vector<double>> rows_rejected)
    : tok_w_(std::move(tokens_chosen)),
      tok_l_(std::move(tokens_rejected)),
      vocab_(vocab) {
  if (vocab_ < 2) throw std::invalid_argument("LogitsLM: vocab must be >= 2");
  if (tok_w_.empty()) throw std::invalid_argument("LogitsLM: empty response");
  check_token_range(tok_w_, vocab_, "LogitsLM(chosen)");
  check_token_range(tok_l_, vocab_, "LogitsLM(rejected)");
  edit_ = polab::edit_index(tok_w_, tok_l_);
  const size_t L = tok_w_.size();
  if (rows_chosen.size() != L || rows_rejected.size() != L)
    throw std::invalid_argument("LogitsLM: need one row per position");
  auto check_row = [&](const std::vector<double>& r) {
    if (static_cast<int>(r.size()) != vocab_)
      throw std::invalid_argument("LogitsLM: row has wrong width");
    double s = 0.0;
    for (double x : r) {
      if (!(x > 0.0)) throw std::invalid_argument("LogitsLM: row entry <= 0");
      s += x;
    }
    if (std::fabs(s - 1.0) > 1e-6)
      throw std::invalid_argument("LogitsLM: row does not sum to 1");
  };
  z_.resize(L * vocab_);
  off_l_.resize(L * vocab_);
  for (size_t i = 0; i < L; ++i) {
    check_row(rows_chosen[i]);
    check_row(rows_rejected[i]);
    // Positions up to and including the edit condition on identical
    // prefixes, so their rows must coincide exactly.
    if (static_cast<int>(i) <= edit_ && rows_chosen[i] != rows_rejected[i])
      throw std::invalid_argument(
          "LogitsLM: rows through the edit position must match");
    for (int j = 0; j < vocab_; ++j) {
      double lw = std::log(rows_chosen[i][j]);
      z_[i * vocab_ + j] = lw;
      // log(x) - log(x) is exactly +0 for matching rows; only post-edit
      // positions carry a nonzero frozen offset.
      off_l_[i * vocab_ + j] = std::log(rows_rejected[i][j]) - lw;
    }
  }
}

LogitsLM LogitsLM::with_params(std::vector<double> z) const {
  if (z.size() != z_.size())
    throw std::invalid_argument("with_params: size mismatch");
  LogitsLM m = *this;
  m.z_ = std::move(z);
  return m;
}

LogitsLM LogitsLM::apply_step(std::span<const double> direction,
                              double eta) const {
  if (direction.size() != z_.size())
    throw std::invalid_argument("apply_step: size mismatch");
  LogitsLM m = *this;
  for (size_t i = 0; i < m.z_.size(); ++i) m.z_[i] += eta * direction[i];
  return m;
}

const Seq& LogitsLM::tokens(Branch b) const {
  return b == Branch::chosen ? tok_w_ : tok_l_;
}

std::vector<double> LogitsLM::row(Branch b, int i) const {
  if (i < 0 || i >= length()) throw std::invalid_argument("row: bad position");
  const double* off = b == Branch::rejected
                          ? off_l_.data() + static_cast<size_t>(i) * vocab_
                          : nullptr;
  std::vector<double> z(vocab_);
  for (int j = 0; j < vocab_; ++j)
    z[j] = z_[static_cast<size_t>(i) * vocab_ + j] + (off ? off[j] : 0.0);
  double lse = logsumexp(z);
  std::vector<double> p(vocab_);
  for (int j = 0; j < vocab_; ++j) p[j] = std::exp(z[j] - lse);
  return p;
}

std::vector<double> LogitsLM::token_logprobs(Branch b) const {
  const Seq& tok = tokens(b);
  const bool rej = b == Branch::rejected;
  std::vector<double> out(length());
  std::vector<double> z(vocab_);
  for (int i = 0; i < length(); ++i) {
    for (int j = 0; j < vocab_; ++j)
      z[j] = z_[static_cast<size_t>(i) * vocab_ + j] +
             (rej ? off_l_[static_cast<size_t>(i) * vocab_ + j] : 0.0);
    out[i] = z[tok[i]] - logsumexp(z);
  }
  return out;
}

double LogitsLM::logprob(Branch b) const {
  std::vector<double> lp = token_logprobs(b);
  return pairwise_sum(lp);
}

std::vector<double> LogitsLM::grad_logprob(Branch b) const {
  const Seq& tok = tokens(b);
  std::vector<double> g(z_.size(), 0.0);
  for (int i = 0; i < length(); ++i) {
    std::vector<double> p = row(b, i);
    for (int j = 0; j < vocab_; ++j)
      g[static_cast<size_t>(i) * vocab_ + j] =
          (j == tok[i] ? 1.0 : 0.0) - p[j];
  }
  return g;
}

}  // namespace polab
