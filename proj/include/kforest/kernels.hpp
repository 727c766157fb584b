#pragma once

// Dense double-precision inner loops used by propagation, the n-gram
// convolutions and the cosine similarity channels. Every kernel has a scalar
// reference and an AVX2/FMA variant; the variant is picked once at startup
// from CPUID and can be overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace kforest::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view to_string(Backend backend);

bool available(Backend backend) noexcept;

// Best backend the running CPU supports.
Backend detect() noexcept;

Backend active() noexcept;

// Throws std::invalid_argument if the backend is not available on this CPU.
void set_active(Backend backend);

// Sum of a[i] * b[i]. Sizes must match.
double dot(std::span<const double> a, std::span<const double> b) noexcept;

// y[i] += alpha * x[i].
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

// y[i] = alpha * y[i] + beta * x[i].
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) noexcept;

// Max over i of |a[i] - b[i]|.
double max_abs_diff(std::span<const double> a, std::span<const double> b) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) noexcept;
double max_abs_diff(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) noexcept;
double max_abs_diff(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace kforest::kernels
