#pragma once

// Plain-loop reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "kdrank/autodiff/tensor.hpp"

namespace kdrank::test::oracle {

inline double row_dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.shape()[1]; ++k) s += a.at(i, k) * b.at(j, k);
  return s;
}

inline double row_norm(const Tensor& a, std::size_t i) { return std::sqrt(row_dot(a, i, a, i)); }

inline double colbert_maxsim(const Tensor& q, const Tensor& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.shape()[0]; ++i) {
    double best = row_dot(q, i, p, 0);
    for (std::size_t j = 1; j < p.shape()[0]; ++j) best = std::max(best, row_dot(q, i, p, j));
    total += best;
  }
  return total;
}

inline double cosine(const Tensor& q, std::size_t i, const Tensor& p, std::size_t j) {
  const double nq = row_norm(q, i), np = row_norm(p, j);
  if (nq == 0.0 || np == 0.0) return 0.0;
  return row_dot(q, i, p, j) / (nq * np);
}

inline std::vector<double> kernel_pooling(const Tensor& q, const Tensor& p, const std::vector<double>& centers,
                                          double sigma) {
  std::vector<double> out;
  for (double mu : centers) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.shape()[0]; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p.shape()[0]; ++j) {
        const double d = cosine(q, i, p, j) - mu;
        s += std::exp(-(d * d) / (2.0 * sigma * sigma));
      }
      total += std::log(s + 1e-10);
    }
    out.push_back(total);
  }
  return out;
}

/// Ranked list of (passage id, grade) in final rank order.
using GradedRanking = std::vector<std::pair<std::string, int>>;

inline double ndcg(const GradedRanking& ranking, std::vector<int> judged_grades, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
    dcg += (std::pow(2.0, ranking[r].second) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
  }
  std::sort(judged_grades.rbegin(), judged_grades.rend());
  double idcg = 0.0;
  for (std::size_t r = 0; r < judged_grades.size() && r < k; ++r) {
    idcg += (std::pow(2.0, judged_grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

inline double reciprocal_rank(const std::vector<bool>& relevant, std::size_t k) {
  for (std::size_t r = 0; r < relevant.size() && r < k; ++r) {
    if (relevant[r]) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

inline double average_precision(const std::vector<bool>& relevant, std::size_t total_relevant, std::size_t k) {
  if (total_relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < relevant.size() && r < k; ++r) {
    if (relevant[r]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(std::min(total_relevant, k));
}

}  // namespace kdrank::test::oracle
