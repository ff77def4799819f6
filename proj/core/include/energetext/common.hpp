#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace energetext {

/// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  InvalidArgument,  // bad parameter or violated precondition
  InvalidData,      // malformed input file contents
  MissingInput,     // input path does not exist or cannot be opened
  Numeric,          // NaN/Inf or other numerical breakdown
  Io,               // failure writing output
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

/// 64-bit FNV-1a. Used for seed derivation, not for content hashing.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named sub-seed: the same master seed and name always give the same stream,
/// and distinct names give unrelated streams. Names follow "component:purpose".
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) noexcept {
  return splitmix64(master ^ fnv1a(name));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Worker cap from ENERGETEXT_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks; callers
/// must write results by index so the outcome does not depend on thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t max_workers = 0);

}  // namespace energetext
