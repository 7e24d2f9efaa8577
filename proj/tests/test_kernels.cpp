#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "picnet/kernels.hpp"
#include "picnet/rng.hpp"

using namespace picnet;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bit_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar kernel semantics") {
  const auto& k = kernels::scalar_table();
  std::vector<double> a = {1.0, 2.0, 3.0};
  std::vector<double> b = {4.0, -1.0, 0.5};
  std::vector<double> out(3);
  k.add(a.data(), b.data(), out.data(), 3);
  CHECK(out == std::vector<double>{5.0, 1.0, 3.5});
  k.sub(a.data(), b.data(), out.data(), 3);
  CHECK(out == std::vector<double>{-3.0, 3.0, 2.5});
  k.mul(a.data(), b.data(), out.data(), 3);
  CHECK(out == std::vector<double>{4.0, -2.0, 1.5});
  CHECK(k.sum(a.data(), 3) == doctest::Approx(6.0));
  CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(3.5));
  std::vector<double> r = {-1.0, 0.0, 2.0};
  k.relu(r.data(), out.data(), 3);
  CHECK(out == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("avx2 variants are bit-identical to the scalar reference") {
  const kernels::KernelTable* avx2 = kernels::avx2_table();
  if (avx2 == nullptr || !__builtin_cpu_supports("avx2")) {
    MESSAGE("AVX2 unavailable; equivalence not exercised on this host");
    return;
  }
  const auto& ref = kernels::scalar_table();
  Rng rng(1234);
  // Sizes straddling the 4-lane width, including empty and remainders.
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 13, 64, 67, 130}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    std::vector<double> o1(n), o2(n);

    ref.add(a.data(), b.data(), o1.data(), n);
    avx2->add(a.data(), b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    ref.sub(a.data(), b.data(), o1.data(), n);
    avx2->sub(a.data(), b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    ref.mul(a.data(), b.data(), o1.data(), n);
    avx2->mul(a.data(), b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    o1 = a;
    o2 = a;
    ref.axpy(0.77, b.data(), o1.data(), n);
    avx2->axpy(0.77, b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    ref.scale(-1.3, a.data(), o1.data(), n);
    avx2->scale(-1.3, a.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    o1 = b;
    o2 = b;
    ref.acc_scalar(0.11, o1.data(), n);
    avx2->acc_scalar(0.11, o2.data(), n);
    CHECK(bit_equal(o1, o2));

    o1 = b;
    o2 = b;
    ref.mul_acc(a.data(), b.data(), o1.data(), n);
    avx2->mul_acc(a.data(), b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    CHECK(bit_equal(ref.sum(a.data(), n), avx2->sum(a.data(), n)));
    CHECK(bit_equal(ref.dot(a.data(), b.data(), n),
                    avx2->dot(a.data(), b.data(), n)));

    ref.relu(a.data(), o1.data(), n);
    avx2->relu(a.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));

    o1 = b;
    o2 = b;
    ref.relu_bwd_acc(a.data(), b.data(), o1.data(), n);
    avx2->relu_bwd_acc(a.data(), b.data(), o2.data(), n);
    CHECK(bit_equal(o1, o2));
  }
}

TEST_CASE("adam kernel bit-identical across variants") {
  const kernels::KernelTable* avx2 = kernels::avx2_table();
  if (avx2 == nullptr || !__builtin_cpu_supports("avx2")) return;
  const auto& ref = kernels::scalar_table();
  Rng rng(99);
  for (std::size_t n : {1, 4, 6, 33}) {
    const auto g = random_vec(rng, n);
    auto p1 = random_vec(rng, n), m1 = random_vec(rng, n, 0.0, 0.1),
         v1 = random_vec(rng, n, 0.0, 0.1);
    auto p2 = p1, m2 = m1, v2 = v1;
    ref.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9,
                    0.999, 1e-8, 0.1, 0.001999);
    avx2->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3, 0.9,
                      0.999, 1e-8, 0.1, 0.001999);
    CHECK(bit_equal(p1, p2));
    CHECK(bit_equal(m1, m2));
    CHECK(bit_equal(v1, v2));
  }
}

TEST_CASE("relu handles negative zero like the scalar ternary") {
  const auto& ref = kernels::scalar_table();
  std::vector<double> in = {-0.0, 0.0, -1.0, 1.0};
  std::vector<double> out(4);
  ref.relu(in.data(), out.data(), 4);
  CHECK(!std::signbit(out[0]));
  const kernels::KernelTable* avx2 = kernels::avx2_table();
  if (avx2 != nullptr && __builtin_cpu_supports("avx2")) {
    std::vector<double> out2(4);
    avx2->relu(in.data(), out2.data(), 4);
    CHECK(bit_equal(out, out2));
  }
}

TEST_CASE("dispatch reports an active table") {
  const std::string name = kernels::active_name();
  CHECK((name == "scalar" || name == "avx2"));
}
