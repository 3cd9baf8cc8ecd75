#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "metaexo/common/rng.hpp"
#include "metaexo/kernels/kernels.hpp"

using metaexo::Rng;
using metaexo::kernels::KernelTable;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double rel_err(double got, double want) {
  const double denom = std::max(1e-30, std::abs(want));
  return std::abs(got - want) / denom;
}

const std::size_t kSizes[] = {1, 3, 4, 5, 7, 8, 15, 16, 31, 64, 1000, 1003};

}  // namespace

TEST_CASE("elementwise kernels are bit-identical across implementations") {
  const KernelTable* avx = metaexo::kernels::avx2_table();
  if (!metaexo::kernels::avx2_runtime_supported()) return;
  const KernelTable& sca = metaexo::kernels::scalar_table();
  Rng rng(1234);
  for (std::size_t n : kSizes) {
    const auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    for (auto& x : b)
      if (std::abs(x) < 1e-3) x = 1e-3;  // keep div well away from 0
    std::vector<double> r0(n), r1(n);

    sca.add(a.data(), b.data(), r0.data(), n);
    avx->add(a.data(), b.data(), r1.data(), n);
    CHECK(bit_equal(r0, r1));

    sca.sub(a.data(), b.data(), r0.data(), n);
    avx->sub(a.data(), b.data(), r1.data(), n);
    CHECK(bit_equal(r0, r1));

    sca.mul(a.data(), b.data(), r0.data(), n);
    avx->mul(a.data(), b.data(), r1.data(), n);
    CHECK(bit_equal(r0, r1));

    sca.div(a.data(), b.data(), r0.data(), n);
    avx->div(a.data(), b.data(), r1.data(), n);
    CHECK(bit_equal(r0, r1));

    sca.scale(a.data(), 1.7, r0.data(), n);
    avx->scale(a.data(), 1.7, r1.data(), n);
    CHECK(bit_equal(r0, r1));

    sca.shift(a.data(), -0.3, r0.data(), n);
    avx->shift(a.data(), -0.3, r1.data(), n);
    CHECK(bit_equal(r0, r1));

    r0 = b;
    r1 = b;
    sca.axpy(0.37, a.data(), r0.data(), n);
    avx->axpy(0.37, a.data(), r1.data(), n);
    CHECK(bit_equal(r0, r1));
  }
}

TEST_CASE("dot agrees across implementations within accumulation tolerance") {
  if (!metaexo::kernels::avx2_runtime_supported()) return;
  const KernelTable& sca = metaexo::kernels::scalar_table();
  const KernelTable* avx = metaexo::kernels::avx2_table();
  Rng rng(77);
  for (std::size_t n : kSizes) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    const double d0 = sca.dot(a.data(), b.data(), n);
    const double d1 = avx->dot(a.data(), b.data(), n);
    CHECK(rel_err(d1, d0) < 1e-13);
  }
}

TEST_CASE("matmul matches a naive oracle and the AVX2 variant stays close") {
  const KernelTable& sca = metaexo::kernels::scalar_table();
  const KernelTable* avx = metaexo::kernels::avx2_table();
  const bool has_avx = metaexo::kernels::avx2_runtime_supported();
  Rng rng(4242);
  const std::size_t shapes[][3] = {{1, 1, 1}, {2, 3, 4}, {5, 7, 9},
                                   {17, 33, 8}, {13, 5, 21}, {64, 64, 64}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, k * n);

    // independent i-j-k oracle
    std::vector<double> want(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
        want[i * n + j] = acc;
      }

    // Individual elements can cancel toward zero, so normalize the error by
    // the magnitude of the whole matrix rather than per element.
    double scale = 1.0;
    for (double w : want) scale = std::max(scale, std::abs(w));

    std::vector<double> got(m * n);
    sca.matmul(a.data(), b.data(), got.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i)
      CHECK(std::abs(got[i] - want[i]) / scale < 1e-13);

    if (has_avx) {
      std::vector<double> got2(m * n);
      avx->matmul(a.data(), b.data(), got2.data(), m, k, n);
      for (std::size_t i = 0; i < m * n; ++i)
        CHECK(std::abs(got2[i] - got[i]) / scale < 1e-13);
    }
  }
}

TEST_CASE("dispatch picks a registered table and names it consistently") {
  const KernelTable& act = metaexo::kernels::active();
  const char* name = metaexo::kernels::active_name();
  const bool is_scalar = &act == &metaexo::kernels::scalar_table();
  const bool is_avx = metaexo::kernels::avx2_table() != nullptr &&
                      &act == metaexo::kernels::avx2_table();
  CHECK((is_scalar || is_avx));
  if (is_avx) {
    CHECK(std::strcmp(name, "avx2") == 0);
    CHECK(metaexo::kernels::avx2_runtime_supported());
  } else {
    CHECK(std::strcmp(name, "scalar") == 0);
  }
}
