#include <cstdlib>
#include <string>

#include "picnet/errors.hpp"
#include "picnet/kernels.hpp"

namespace picnet::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const KernelTable* pick() {
  const char* env = std::getenv("PICNET_SIMD");
  const std::string mode = env ? env : "auto";
  if (mode == "scalar") return &scalar_table();
  if (mode == "avx2") {
    const KernelTable* t = avx2_table();
    if (t == nullptr || !cpu_has_avx2()) {
      throw ConfigError("PICNET_SIMD=avx2 requested but AVX2 is unavailable");
    }
    return t;
  }
  if (mode != "auto" && mode != "") {
    throw ConfigError("PICNET_SIMD must be auto, scalar or avx2; got '" +
                      mode + "'");
  }
  const KernelTable* t = avx2_table();
  if (t != nullptr && cpu_has_avx2()) return t;
  return &scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable* table = pick();
  return *table;
}

std::string active_name() { return active().name; }

}  // namespace picnet::kernels
