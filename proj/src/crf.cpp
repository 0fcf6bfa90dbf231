#include "crf.hpp"

namespace gp {

BruteForceResult brute_force_reference(const Tensor<double>& em, const CrfParams<double>& p) {
  detail::check_crf_inputs(em, p);
  const std::size_t t = em.dim(0), L = em.dim(1);
  double count = 1.0;
  for (std::size_t i = 0; i < t; ++i) {
    count *= static_cast<double>(L);
    if (count > 1e6) throw SizeError("brute force over more than 10^6 label paths");
  }
  const auto n_paths = static_cast<std::size_t>(count);
  std::vector<double> scores(n_paths);
  std::vector<std::uint8_t> path(t, 0);
  BruteForceResult result;
  bool have_best = false;
  for (std::size_t code = 0; code < n_paths; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < t; ++i) {
      path[i] = static_cast<std::uint8_t>(c % L);
      c /= L;
    }
    const double s = path_score(em, path, p);
    scores[code] = s;
    bool better = !have_best || s > result.best.score;
    if (have_best && s == result.best.score) {
      // reverse-lexicographic comparison: last position is most significant
      for (std::size_t i = t; i-- > 0;) {
        if (path[i] != result.best.labels[i]) {
          better = path[i] < result.best.labels[i];
          break;
        }
      }
    }
    if (better) {
      result.best.labels = path;
      result.best.score = s;
      have_best = true;
    }
  }
  result.log_partition = nn::logsumexp<double>(scores);
  return result;
}

}  // namespace gp
