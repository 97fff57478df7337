#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace psij::detail {

// Helper executables are looked up via an environment override, then next
// to the running binary, then at their build-tree location.
inline std::filesystem::path find_tool(const char* env_var, const char* name, const char* build_path) {
  if (const char* e = std::getenv(env_var); e && *e) return e;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto sibling = self.parent_path() / name;
    if (std::filesystem::exists(sibling, ec)) return sibling;
  }
  return build_path;
}

}  // namespace psij::detail
