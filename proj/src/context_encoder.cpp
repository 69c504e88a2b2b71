#include "dyco/context_encoder.hpp"

#include "dyco/error.hpp"

namespace dyco {

ContextEncoder::ContextEncoder(const std::string& name, int joint_count, int sequence_length)
    : spatial(name + ".spatial", 3 * joint_count + 3, kSpatialDim),
      temporal(name + ".temporal", sequence_length * kSpatialDim, kOutputDim),
      joints_(joint_count),
      length_(sequence_length) {}

void ContextEncoder::init_fan_in(Rng& rng) {
  spatial.init_fan_in(rng);
  temporal.init_fan_in(rng);
}

Vector ContextEncoder::encode(const DeltaPoseSequence& sequence, const Vector& mask, Cache* cache) const {
  return encode(sequence.values(), mask, cache);
}

Vector ContextEncoder::encode(const std::vector<DeltaPose>& sequence, const Vector& mask, Cache* cache) const {
  const int d = input_dim();
  if (static_cast<int>(sequence.size()) != length_)
    throw Error(ErrorCode::DimensionMismatch, "sequence length " + std::to_string(sequence.size()) +
                                                  " != encoder length " + std::to_string(length_));
  if (mask.size() != d) throw Error(ErrorCode::DimensionMismatch, "mask length must be 3K+3");

  Matrix masked(d, length_);
  for (int j = 0; j < length_; ++j) {
    if (sequence[j].size() != d) throw Error(ErrorCode::DimensionMismatch, "delta pose must have 3K+3 entries");
    // Multiply, then select, so masked-out slots are exactly zero even for inf/nan.
    for (int c = 0; c < d; ++c) masked(c, j) = mask[c] != 0.0 ? sequence[j][c] * mask[c] : 0.0;
  }
  Matrix spatial_pre = spatial.forward(masked);
  Matrix flat = spatial_pre.cwiseMax(0.0).reshaped(kSpatialDim * length_, 1);
  Matrix temporal_pre = temporal.forward(flat);
  Vector out = temporal_pre.col(0).cwiseMax(0.0);
  if (cache) {
    cache->masked = std::move(masked);
    cache->spatial_pre = std::move(spatial_pre);
    cache->flat = std::move(flat);
    cache->temporal_pre = std::move(temporal_pre);
    cache->mask = mask;
  }
  return out;
}

void ContextEncoder::backward(const Cache& cache, const Vector& d_out, GradBuffer& grads,
                              Matrix* d_sequence) const {
  Matrix d_pre = (cache.temporal_pre.array() > 0.0).select(Matrix(d_out), 0.0);
  Matrix d_flat;
  temporal.backward(cache.flat, d_pre, &d_flat, grads);
  Matrix d_spatial = d_flat.reshaped(kSpatialDim, length_);
  d_spatial = (cache.spatial_pre.array() > 0.0).select(d_spatial, 0.0);
  Matrix d_masked;
  spatial.backward(cache.masked, d_spatial, d_sequence ? &d_masked : nullptr, grads);
  if (d_sequence) *d_sequence = (d_masked.array().colwise() * cache.mask.array()).matrix();
}

}  // namespace dyco
