#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace gforge::utf8 {

bool is_valid(std::string_view bytes) noexcept;

// Number of Unicode scalar values. Input must be valid UTF-8.
std::size_t length(std::string_view bytes) noexcept;

// Byte offset of every scalar value plus a trailing entry equal to
// bytes.size(). Input must be valid UTF-8.
std::vector<std::size_t> scalar_offsets(std::string_view bytes);

}  // namespace gforge::utf8
