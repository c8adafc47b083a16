// rng.hpp -- seeded random generation with derived sub-streams
#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "bdcl/matrix.hpp"

namespace bdcl {

// splitmix64 finalizer; used to derive independent sub-seeds from a run seed
// (e.g. per view, per epoch, per forward pass) without correlated streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Entries filled in row-major order so results do not depend on storage.
  template <class S>
  Mat<S> gaussian(Index rows, Index cols, S mean = S(0), S stddev = S(1)) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat<S> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        m(i, j) = mean + stddev * static_cast<S>(dist(gen_));
    return m;
  }

  template <class S>
  Mat<S> uniform(Index rows, Index cols, S lo, S hi) {
    std::uniform_real_distribution<double> dist(static_cast<double>(lo),
                                                static_cast<double>(hi));
    Mat<S> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        m(i, j) = static_cast<S>(dist(gen_));
    return m;
  }

  double uniform_scalar(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(gen_);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> dist(lo, hi);
    return dist(gen_);
  }

  std::vector<Index> permutation(Index n) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index(0));
    std::shuffle(idx.begin(), idx.end(), gen_);
    return idx;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace bdcl
