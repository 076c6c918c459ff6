#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/rng.hpp"
#include "csckit/types.hpp"

namespace testutil {

// Unique scratch directory per test process, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("csckit-test-" + std::to_string(::getpid()) + "-" +
                               std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Exponential-recursion Levenshtein with memoization: an implementation
// intentionally unlike the production single-row DP.
inline int naive_edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& slot = memo[i][j];
    if (slot >= 0) return slot;
    const int same = a[i] == b[j] ? self(self, i + 1, j + 1) : 1 + std::min({self(self, i + 1, j + 1), self(self, i + 1, j), self(self, i, j + 1)});
    slot = same;
    return slot;
  };
  return rec(rec, 0, 0);
}

// Purpose-built table: `groups` phonological trios; visual partners come in
// identical-stroke pairs (consecutive characters share a stroke string), so
// every character has both a pc and a vc partner.
inline std::vector<csc::CharRecord> grouped_table(int groups) {
  std::vector<csc::CharRecord> table;
  int serial = 0;
  for (int g = 0; g < groups; ++g) {
    for (int k = 0; k < 3; ++k) {
      csc::CharRecord rec;
      rec.ch = static_cast<char32_t>(0x4e00 + serial);
      rec.pinyin = "s" + std::string(1, static_cast<char>('a' + g % 26)) +
                   std::string(1, static_cast<char>('a' + g / 26)) +
                   std::to_string(k % 5 + 1);
      // Identical strokes within a consecutive pair; a parity digit keeps
      // distinct pairs at Levenshtein >= 2 (normalized 0.5, above any
      // reasonable tau), so visual sets are exactly the designed pairs.
      const int pair_id = serial / 2;
      const int d0 = pair_id % 5, d1 = (pair_id / 5) % 5, d2 = (pair_id / 25) % 5;
      rec.strokes = {1 + d0, 1 + d1, 1 + d2, 1 + (d0 + d1 + d2) % 5};
      table.push_back(rec);
      serial += 1;
    }
  }
  return table;
}

// Random length-`n` vector with entries below `limit`.
inline std::vector<int> random_ints(csc::Rng& rng, int n, int limit) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int& x : v) x = rng.index(limit);
  return v;
}

// Relative-error comparison used by every finite-difference check: relative
// where the magnitudes are meaningful, absolute for near-zero pairs.
inline double grad_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-6) return std::abs(analytic - numeric) < 1e-8 ? 0.0 : 1.0;
  return std::abs(analytic - numeric) / scale;
}

}  // namespace testutil
