#ifndef SIMT_SRC_DEVICE_ARRAY_REGISTRY_HPP
#define SIMT_SRC_DEVICE_ARRAY_REGISTRY_HPP

#include <memory>
#include <mutex>
#include <string>

#include "device/context_impl.hpp"

namespace simt::detail {

/// The context's generated-kernel object under `key`, built by `make` on
/// first use. Entries live as long as the context and never move.
template <class K, class Make>
const K& registered(const Context& ctx, const std::string& key, Make&& make) {
  ContextImpl& impl = ContextImpl::of(ctx);
  {
    std::lock_guard lock(impl.mu);
    auto it = impl.registry.find(key);
    if (it != impl.registry.end()) return *std::static_pointer_cast<const K>(it->second);
  }
  // Compiling takes the context lock itself.
  auto made = std::make_shared<K>(make());
  std::lock_guard lock(impl.mu);
  auto [it, inserted] = impl.registry.emplace(key, std::move(made));
  return *std::static_pointer_cast<const K>(it->second);
}

}  // namespace simt::detail

#endif  // SIMT_SRC_DEVICE_ARRAY_REGISTRY_HPP
