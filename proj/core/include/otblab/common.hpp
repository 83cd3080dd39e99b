#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace otblab {

using Token = std::int32_t;

// Token id 0 terminates every generation.
inline constexpr Token kEos = 0;

// Read-only view of a token prefix y_{<t}.
using Prefix = std::span<const Token>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otblab
