#include "kbdial/kernels.hpp"

#include <cstdint>

namespace kbdial::kernels {

namespace {
bool worth_parallel(std::size_t p, std::size_t q, std::size_t r) {
  return p > 1 && p * q * r >= kParallelThreshold;
}
}  // namespace

void gemm_nn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  const auto rows = static_cast<std::int64_t>(p);
#pragma omp parallel for schedule(static) if (worth_parallel(p, q, r))
  for (std::int64_t i = 0; i < rows; ++i) {
    double* ci = c + i * r;
    const double* ai = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_nt(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  const auto rows = static_cast<std::int64_t>(p);
#pragma omp parallel for schedule(static) if (worth_parallel(p, q, r))
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* ai = a + i * q;
    double* ci = c + i * r;
    for (std::size_t j = 0; j < r; ++j) {
      const double* bj = b + j * q;
      double sum = 0.0;
      for (std::size_t k = 0; k < q; ++k) sum += ai[k] * bj[k];
      ci[j] += sum;
    }
  }
}

void gemm_tn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  const auto rows = static_cast<std::int64_t>(p);
#pragma omp parallel for schedule(static) if (worth_parallel(p, q, r))
  for (std::int64_t i = 0; i < rows; ++i) {
    double* ci = c + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aki = a[k * p + i];
      if (aki == 0.0) continue;
      const double* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aki * bk[j];
    }
  }
}

namespace reference {

void gemm_nn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < q; ++k) sum += a[i * q + k] * b[k * r + j];
      c[i * r + j] += sum;
    }
}

void gemm_nt(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < q; ++k) sum += a[i * q + k] * b[j * q + k];
      c[i * r + j] += sum;
    }
}

void gemm_tn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < q; ++k) sum += a[k * p + i] * b[k * r + j];
      c[i * r + j] += sum;
    }
}

}  // namespace reference
}  // namespace kbdial::kernels
