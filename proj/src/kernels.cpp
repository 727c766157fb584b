#include "kforest/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kforest::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * y[i] + beta * x[i];
}

double max_abs_diff(const double* a, const double* b, std::size_t n) noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace scalar

#if !defined(KFOREST_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept { return scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept { scalar::axpy(alpha, x, y, n); }
void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) noexcept {
  scalar::axpby(alpha, x, beta, y, n);
}
double max_abs_diff(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::max_abs_diff(a, b, n);
}
}  // namespace avx2
#endif

namespace {

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

bool available(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar: return true;
    case Backend::Avx2:
#if defined(KFOREST_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Backend detect() noexcept { return available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar; }

Backend active() noexcept { return current().load(std::memory_order_relaxed); }

void set_active(Backend backend) {
  if (!available(backend)) {
    throw std::invalid_argument("kernel backend " + std::string(to_string(backend)) + " not supported on this CPU");
  }
  current().store(backend, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active() == Backend::Avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                   : scalar::dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  if (active() == Backend::Avx2) {
    avx2::axpy(alpha, x.data(), y.data(), x.size());
  } else {
    scalar::axpy(alpha, x.data(), y.data(), x.size());
  }
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) noexcept {
  if (active() == Backend::Avx2) {
    avx2::axpby(alpha, x.data(), beta, y.data(), x.size());
  } else {
    scalar::axpby(alpha, x.data(), beta, y.data(), x.size());
  }
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) noexcept {
  return active() == Backend::Avx2 ? avx2::max_abs_diff(a.data(), b.data(), a.size())
                                   : scalar::max_abs_diff(a.data(), b.data(), a.size());
}

}  // namespace kforest::kernels
