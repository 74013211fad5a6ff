#pragma once

#include <cstdint>

#include "scdiff/matrix.hpp"

namespace scdiff {

/// Deterministic random source: xoshiro256++ (Blackman/Vigna), state seeded
/// with splitmix64. Gaussian draws use the Marsaglia polar method with a
/// cached spare, so a given seed produces the same stream on every run.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    /// Independent substream; derive(i) != derive(j) stays reproducible
    /// regardless of draw order between the substreams.
    Rng derive(uint64_t stream) const;

    uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer in [0, n), rejection sampled (n > 0).
    uint64_t uniform_int(uint64_t n);

    /// Standard normal draw.
    double gaussian();
    double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

    /// Matrix of iid standard normals, row-major fill order.
    Matrix gaussian_matrix(int rows, int cols);

    /// Gamma(shape, scale) via Marsaglia-Tsang (Gamma(a+1) boost for a < 1).
    double gamma(double shape, double scale);

    /// Poisson via Knuth's product method, chunked for large means.
    long poisson(double lambda);

  private:
    uint64_t state_[4];
    uint64_t seed_origin_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace scdiff
