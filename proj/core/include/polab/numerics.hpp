#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace polab {

// σ(x) without overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log σ(x) = -softplus(-x), stable in both tails.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline double softplus(double x) {
  if (x >= 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Deterministic order-independent-enough reduction: fixed recursive halving,
// so the result depends only on the input sequence, never on chunking.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  size_t mid = v.size() / 2;
  return pairwise_sum(v.first(mid)) + pairwise_sum(v.subspan(mid));
}

inline double logsumexp(std::span<const double> v) {
  double m = -HUGE_VAL;
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;  // all -inf (or empty): log of zero mass
  std::vector<double> e(v.size());
  for (size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - m);
  return m + std::log(pairwise_sum(e));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  std::vector<double> p(a.size());
  for (size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
  return pairwise_sum(p);
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

inline double cosine(std::span<const double> a, std::span<const double> b,
                     double eps = 1e-12) {
  double na = norm(a), nb = norm(b);
  if (na < eps || nb < eps) return 0.0;
  return dot(a, b) / (na * nb);
}

inline double rel_err(double got, double want) {
  double denom = std::fabs(want);
  if (denom < 1e-300) return std::fabs(got - want);
  return std::fabs(got - want) / denom;
}

// Fixed-width float formatting for trace/report files. %.17g round-trips
// doubles exactly, so rerun byte-identity reduces to value identity.
inline std::string fmt_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
  return buf;
}

}  // namespace polab
