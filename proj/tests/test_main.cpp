#include <gtest/gtest.h>

#include <cstdlib>

#include "support.hpp"

// Generated kernels compile through the default cache directory; keep test
// runs out of the user's cache unless SIMT_CACHE_DIR is set explicitly.
int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  std::optional<simt::test::TempDir> cache;
  if (!std::getenv("SIMT_CACHE_DIR")) {
    cache.emplace();
    setenv("SIMT_CACHE_DIR", cache->path().c_str(), 1);
  }
  return RUN_ALL_TESTS();
}
