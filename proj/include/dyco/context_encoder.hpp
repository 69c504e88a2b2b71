#pragma once

#include "dyco/nn.hpp"
#include "dyco/sequence.hpp"

#include <string>
#include <vector>

namespace dyco {

/// Localized dynamic context encoder: mask each delta pose, map it through a
/// shared spatial layer (3K+3 -> 16, ReLU), flatten oldest-first and aggregate
/// through a temporal layer (L*16 -> 32, ReLU).
class ContextEncoder {
 public:
  static constexpr int kSpatialDim = 16;
  static constexpr int kOutputDim = 32;

  struct Cache {
    Matrix masked;       // (3K+3) x L
    Matrix spatial_pre;  // 16 x L
    Matrix flat;         // (16 L) x 1, post-ReLU
    Matrix temporal_pre; // 32 x 1
    Vector mask;
  };

  ContextEncoder() = default;
  ContextEncoder(const std::string& name, int joint_count, int sequence_length);

  int joint_count() const noexcept { return joints_; }
  int sequence_length() const noexcept { return length_; }
  int input_dim() const noexcept { return 3 * joints_ + 3; }

  void init_fan_in(Rng& rng);

  /// Throws DimensionMismatch when the sequence or mask shape disagrees.
  Vector encode(const std::vector<DeltaPose>& sequence, const Vector& mask, Cache* cache = nullptr) const;
  Vector encode(const DeltaPoseSequence& sequence, const Vector& mask, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients; optionally returns dL/d(sequence), (3K+3) x L.
  void backward(const Cache& cache, const Vector& d_out, GradBuffer& grads, Matrix* d_sequence = nullptr) const;

  void collect(std::vector<Param*>& out) {
    spatial.collect(out);
    temporal.collect(out);
  }

  DenseLayer spatial;
  DenseLayer temporal;

 private:
  int joints_ = 0;
  int length_ = 0;
};

}  // namespace dyco
