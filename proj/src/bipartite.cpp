#include "gforge/bipartite.hpp"

#include <limits>
#include <queue>

namespace gforge {

namespace {

constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

class HopcroftKarp {
 public:
  HopcroftKarp(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_count)
      : adj_(adj), match_left_(adj.size(), kUnmatched), match_right_(right_count, kUnmatched), dist_(adj.size()) {}

  std::vector<std::size_t> run() {
    while (bfs()) {
      for (std::size_t l = 0; l < adj_.size(); ++l) {
        if (match_left_[l] == kUnmatched) dfs(l);
      }
    }
    return match_left_;
  }

 private:
  bool bfs() {
    std::queue<std::size_t> queue;
    bool found = false;
    for (std::size_t l = 0; l < adj_.size(); ++l) {
      if (match_left_[l] == kUnmatched) {
        dist_[l] = 0;
        queue.push(l);
      } else {
        dist_[l] = kInf;
      }
    }
    while (!queue.empty()) {
      const std::size_t l = queue.front();
      queue.pop();
      for (const std::size_t r : adj_[l]) {
        const std::size_t next = match_right_[r];
        if (next == kUnmatched) {
          found = true;
        } else if (dist_[next] == kInf) {
          dist_[next] = dist_[l] + 1;
          queue.push(next);
        }
      }
    }
    return found;
  }

  bool dfs(std::size_t l) {
    for (const std::size_t r : adj_[l]) {
      const std::size_t next = match_right_[r];
      if (next == kUnmatched || (dist_[next] == dist_[l] + 1 && dfs(next))) {
        match_left_[l] = r;
        match_right_[r] = l;
        return true;
      }
    }
    dist_[l] = kInf;
    return false;
  }

  const std::vector<std::vector<std::size_t>>& adj_;
  std::vector<std::size_t> match_left_;
  std::vector<std::size_t> match_right_;
  std::vector<std::size_t> dist_;
};

}  // namespace

std::vector<std::size_t> maximum_matching(const std::vector<std::vector<std::size_t>>& adjacency,
                                          std::size_t right_count) {
  return HopcroftKarp(adjacency, right_count).run();
}

}  // namespace gforge
