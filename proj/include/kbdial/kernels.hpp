#ifndef KBDIAL_KERNELS_HPP_
#define KBDIAL_KERNELS_HPP_

#include <cstddef>

// Dense matrix kernels used by the autodiff engine. All matrices are
// row-major. Every routine accumulates into C (C += op(A) * op(B)).
//
// kernels::reference holds straight serial loops and exists for testing and
// benchmarking; kernels:: holds the OpenMP versions the engine calls. Each
// output element is produced by exactly one thread with a fixed summation
// order, so results do not depend on the thread count.
namespace kbdial::kernels {

// C[p x r] += A[p x q] * B[q x r]
void gemm_nn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);
// C[p x r] += A[p x q] * B^T, B stored [r x q]
void gemm_nt(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);
// C[p x r] += A^T * B[q x r], A stored [q x p]
void gemm_tn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);

// Work size (p*q*r) below which the parallel kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

namespace reference {
void gemm_nn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);
void gemm_nt(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);
void gemm_tn(std::size_t p, std::size_t q, std::size_t r, const double* a,
             const double* b, double* c);
}  // namespace reference

}  // namespace kbdial::kernels

#endif  // KBDIAL_KERNELS_HPP_
