// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "ccnn/error.hpp"
#include "ccnn/kernels.hpp"
#include "kernel_variants.hpp"

namespace ccnn::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CCNN_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet* lookup(std::string_view name) {
  const auto sets = available_kernels();
  if (name == "auto") return sets.back();
  for (const KernelSet* s : sets) {
    if (s->name == name) return s;
  }
  return nullptr;
}

const KernelSet* initial_choice() {
  if (const char* env = std::getenv("CCNN_KERNELS"); env != nullptr && *env != '\0') {
    if (const KernelSet* s = lookup(env)) return s;
    throw_usage("CCNN_KERNELS names an unknown or unsupported kernel set: " + std::string(env));
  }
  return available_kernels().back();
}

std::atomic<const KernelSet*>& current() {
  static std::atomic<const KernelSet*> chosen{initial_choice()};
  return chosen;
}

}  // namespace

std::vector<const KernelSet*> available_kernels() {
  std::vector<const KernelSet*> sets{&scalar_kernels()};
#if defined(CCNN_WITH_AVX2)
  if (cpu_has_avx2()) sets.push_back(&avx2_kernels());
#endif
  return sets;
}

const KernelSet& active() { return *current().load(std::memory_order_acquire); }

void select(std::string_view name) {
  const KernelSet* s = lookup(name);
  if (s == nullptr) throw_usage("unknown or unsupported kernel set: " + std::string(name));
  current().store(s, std::memory_order_release);
}

}  // namespace ccnn::kernels
