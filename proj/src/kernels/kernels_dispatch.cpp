#include <cstdlib>
#include <cstring>

#include "metaexo/common/error.hpp"
#include "metaexo/kernels/kernels.hpp"

namespace metaexo::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* choose() {
  if (const char* env = std::getenv("METAEXO_KERNEL")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_runtime_supported())
        throw ConfigError("METAEXO_KERNEL=avx2 but AVX2+FMA is unavailable");
      return avx2_table();
    }
    throw ConfigError(std::string("METAEXO_KERNEL: unknown value '") + env +
                      "' (expected scalar or avx2)");
  }
  if (avx2_runtime_supported()) return avx2_table();
  return &scalar_table();
}

}  // namespace

bool avx2_runtime_supported() {
  return avx2_table() != nullptr && cpu_has_avx2_fma();
}

const KernelTable& active() {
  static const KernelTable* chosen = choose();
  return *chosen;
}

const char* active_name() { return &active() == avx2_table() ? "avx2" : "scalar"; }

}  // namespace metaexo::kernels
