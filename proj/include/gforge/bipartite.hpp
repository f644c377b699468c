#pragma once

#include <cstddef>
#include <vector>

namespace gforge {

inline constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);

// Hopcroft-Karp maximum-cardinality matching. adjacency[l] lists the right
// vertices compatible with left vertex l, in preference order. The result
// maps each left vertex to its partner or kUnmatched. Deterministic for a
// fixed adjacency.
std::vector<std::size_t> maximum_matching(const std::vector<std::vector<std::size_t>>& adjacency,
                                          std::size_t right_count);

}  // namespace gforge
