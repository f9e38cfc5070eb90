#ifndef UDA_TESTS_HELPERS_HPP
#define UDA_TESTS_HELPERS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>

#include <unistd.h>

#include "uda/model.hpp"

namespace testing {

inline Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

// Central differences of `loss` for every entry of every tensor of `p`.
inline uda::ModelParams<double> numeric_gradient(const uda::ModelParams<double>& p,
                                                 const std::function<double(const uda::ModelParams<double>&)>& loss,
                                                 double eps = 1e-5) {
  auto grads = uda::ModelParams<double>::zeros(p.config);
  auto probe = p;
  uda::zip_tensors(
      [&](const std::string&, auto& t, auto& g) {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          const double orig = t.data()[i];
          t.data()[i] = orig + eps;
          const double up = loss(probe);
          t.data()[i] = orig - eps;
          const double down = loss(probe);
          t.data()[i] = orig;
          g.data()[i] = (up - down) / (2 * eps);
        }
      },
      probe, grads);
  return grads;
}

// max |a - b| / max(max |a|, max |b|), zero when both vanish.
template <typename A, typename B>
double relative_error(const A& a, const B& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return scale > 0 ? diff / scale : diff;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("uda_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing

#endif
