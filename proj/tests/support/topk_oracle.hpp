#pragma once

// Full-sort retrieval oracle: score every entry in long double, report the float score, order by
// score descending then id ascending.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace qarag::testing {

struct OracleHit {
  std::string id;
  float score;
};

inline std::vector<OracleHit> full_sort_topk(const std::vector<std::string>& ids,
                                             const std::vector<std::vector<float>>& vectors,
                                             const std::vector<float>& query, std::size_t k,
                                             bool cosine = true) {
  std::vector<OracleHit> all;
  long double qn = 0;
  for (float x : query) qn += static_cast<long double>(x) * x;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    long double dot = 0, n = 0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      dot += static_cast<long double>(vectors[i][j]) * query[j];
      n += static_cast<long double>(vectors[i][j]) * vectors[i][j];
    }
    long double s = dot;
    if (cosine) s = (n == 0 || qn == 0) ? 0 : std::clamp(dot / std::sqrt(n * qn), -1.0L, 1.0L);
    all.push_back({ids[i], static_cast<float>(s)});
  }
  std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace qarag::testing
