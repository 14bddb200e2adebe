#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace dgame {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// FNV-1a, used to fingerprint configs and artifacts.
std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

// Worker pool size: DGAME_WORKERS env var, else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Work is assigned cyclically to a fixed number
// of threads; fn must write only to per-index slots so the result is
// independent of scheduling and of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Uniform sample in [lo, hi] per coordinate.
Vec uniform_in_box(const Vec& lo, const Vec& hi, Rng& rng);

Vec linspace(double lo, double hi, int n);

}  // namespace dgame
