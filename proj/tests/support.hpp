#pragma once

// Independent oracles and fixtures shared by the test binaries. Nothing here
// calls into the library's numerical routines.

#include "eblime/linalg.hpp"
#include "eblime/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <sys/wait.h>

namespace testsupport {

using eblime::linalg::Matrix;
using eblime::linalg::Vector;

// Random binary design with weights in (0.05, 1] and responses in [0, 1].
inline eblime::linalg::WeightedDesign random_design(int N, int p, std::uint64_t seed) {
  eblime::CounterRng rng = eblime::CounterRng::stream(seed, "test-design");
  eblime::linalg::WeightedDesign d;
  d.Z.resize(N, p);
  d.weights.resize(N);
  d.Y.resize(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < p; ++j) d.Z(i, j) = (rng() >> 63) ? 1.0 : 0.0;
    d.weights[i] = 0.05 + 0.95 * rng.uniform();
    d.Y[i] = rng.uniform();
  }
  return d;
}

// M = diag(1/w) + Z Z' / lambda, assembled densely (N x N).
inline Matrix dense_m(const eblime::linalg::WeightedDesign& d, double lambda) {
  Matrix M = d.Z * d.Z.transpose() / lambda;
  for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, i) += 1.0 / d.weights[i];
  return M;
}

inline double dense_logdet_m(const eblime::linalg::WeightedDesign& d, double lambda) {
  Eigen::PartialPivLU<Matrix> lu(dense_m(d, lambda));
  double s = 0.0;
  for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i) s += std::log(std::abs(lu.matrixLU()(i, i)));
  return s;
}

inline double dense_q(const eblime::linalg::WeightedDesign& d, double lambda, double b) {
  const Vector x = dense_m(d, lambda).partialPivLu().solve(d.Y);
  return d.Y.dot(x) + 2.0 * b;
}

// beta_hat = (Z'WZ + lambda I)^-1 Z'WY by an LU solve of the explicitly formed system.
inline Vector dense_beta(const eblime::linalg::WeightedDesign& d, double lambda) {
  const Matrix W = d.weights.asDiagonal();
  Matrix A = d.Z.transpose() * W * d.Z;
  A += lambda * Matrix::Identity(A.rows(), A.cols());
  return A.partialPivLu().solve(d.Z.transpose() * W * d.Y);
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command line verbatim and captures its stdout.
inline CommandResult run_shell(const std::string& full) {
  CommandResult r;
  FILE* pipe = popen(full.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// stdout only, or stdout followed by stderr when merge_stderr.
inline CommandResult run_command(const std::string& cmd, bool merge_stderr = false) {
  return run_shell(merge_stderr ? cmd + " 2>&1" : cmd + " 2>/dev/null");
}

// stderr only.
inline CommandResult run_stderr(const std::string& cmd) { return run_shell(cmd + " 2>&1 >/dev/null"); }

inline std::string mock_adapter(const std::string& args) { return std::string(MOCK_ADAPTER_PATH) + " " + args; }

inline std::string cli() { return std::string(EBLIME_CLI_PATH); }

}  // namespace testsupport
