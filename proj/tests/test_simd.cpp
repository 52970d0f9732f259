#include <cmath>
#include <random>

#include "doctest.h"
#include "smia/simd/kernels.hpp"

using namespace smia::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

}  // namespace

TEST_CASE("isa selection") {
  CHECK(isa_supported(Isa::scalar));
  CHECK(&kernels_for(Isa::scalar) == &scalar_kernels());
  const Isa before = active_isa();
  set_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(&kernels() == &scalar_kernels());
  set_isa(before);
  CHECK(isa_name(Isa::scalar) == "scalar");
}

TEST_CASE("scalar reference kernels") {
  const auto& k = scalar_kernels();
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  CHECK(k.dot(a.data(), b.data(), 3) == 32.0);
  std::vector<double> y = {1, 1, 1};
  k.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y == std::vector<double>{3, 5, 7});
  // [1 2; 3 4] * [5 6; 7 8]
  const std::vector<double> A = {1, 2, 3, 4}, B = {5, 6, 7, 8};
  std::vector<double> C(4, 0.0);
  k.gemm_nn(2, 2, 2, A.data(), B.data(), C.data());
  CHECK(C == std::vector<double>{19, 22, 43, 50});
  std::fill(C.begin(), C.end(), 0.0);
  k.gemm_nt(2, 2, 2, A.data(), B.data(), C.data());
  CHECK(C == std::vector<double>{17, 23, 39, 53});
  std::fill(C.begin(), C.end(), 1.0);
  k.gemm_tn(2, 2, 2, A.data(), B.data(), C.data());
  CHECK(C == std::vector<double>{27, 31, 39, 45});
}

TEST_CASE("adam update matches the closed form for one step") {
  const auto& k = scalar_kernels();
  std::vector<double> p = {1.0, -1.0}, g = {0.5, -2.0}, m(2, 0.0), v(2, 0.0);
  k.adam(p.data(), g.data(), m.data(), v.data(), 2, {0.1, 0.9, 0.999, 1e-8, 1});
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-1.0 + 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("vector kernels agree with the scalar reference") {
  if (!isa_supported(Isa::avx2)) return;
  const auto& s = scalar_kernels();
  const auto& v = avx2_kernels();
  std::mt19937_64 g(5);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 17u, 33u, 1000u}) {
    const auto a = random_vec(g, n), b = random_vec(g, n);
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <= 1e-12 * (1.0 + n));
    auto y1 = random_vec(g, n), y2 = y1;
    s.axpy(0.7, a.data(), y1.data(), n);
    v.axpy(0.7, a.data(), y2.data(), n);
    check_close(y1, y2, 1e-15);
  }
  const std::size_t shapes[][3] = {{1, 1, 1},   {2, 3, 5},    {6, 8, 4},    {7, 9, 13},  {13, 17, 130},
                                   {100, 32, 64}, {5, 1, 32}, {1, 32, 100}, {30, 600, 150}, {12, 520, 260}};
  for (const auto& sh : shapes) {
    const std::size_t m = sh[0], n = sh[1], k = sh[2];
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    const auto A = random_vec(g, m * k), Bt = random_vec(g, n * k), B = random_vec(g, k * n), At = random_vec(g, k * m);
    const auto C0 = random_vec(g, m * n);
    auto c1 = C0, c2 = C0;
    s.gemm_nt(m, n, k, A.data(), Bt.data(), c1.data());
    v.gemm_nt(m, n, k, A.data(), Bt.data(), c2.data());
    check_close(c1, c2, 1e-12);
    c1 = c2 = C0;
    s.gemm_nn(m, n, k, A.data(), B.data(), c1.data());
    v.gemm_nn(m, n, k, A.data(), B.data(), c2.data());
    check_close(c1, c2, 1e-12);
    c1 = c2 = C0;
    s.gemm_tn(m, n, k, At.data(), B.data(), c1.data());
    v.gemm_tn(m, n, k, At.data(), B.data(), c2.data());
    check_close(c1, c2, 1e-12);
  }
  for (std::size_t n : {1u, 5u, 64u, 1001u}) {
    auto p1 = random_vec(g, n), gr = random_vec(g, n), m1 = random_vec(g, n), v1 = random_vec(g, n);
    for (auto& x : v1) x = std::abs(x);
    auto p2 = p1, m2 = m1, v2 = v1;
    for (long step = 1; step <= 3; ++step) {
      s.adam(p1.data(), gr.data(), m1.data(), v1.data(), n, {1e-3, 0.9, 0.999, 1e-8, step});
      v.adam(p2.data(), gr.data(), m2.data(), v2.data(), n, {1e-3, 0.9, 0.999, 1e-8, step});
    }
    check_close(p1, p2, 1e-14);
    check_close(m1, m2, 1e-15);
    check_close(v1, v2, 1e-15);
  }
}
