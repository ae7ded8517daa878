#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bmtc/bm_algebra.hpp"
#include "bmtc/tensor.hpp"

namespace bmtc {

// Tensor container: 8-byte magic "BMT3\0\0\0\1", three little-endian u64
// dims (n1,n2,n3), then n1*n2*n3 little-endian IEEE-754 doubles in storage
// order. Round-trips are bitwise lossless. Readers throw std::runtime_error
// on bad magic, truncated payload or dim overflow.
void write_tensor(const std::string& path, const Tensor3& x);
Tensor3 read_tensor(const std::string& path);

// Mask container: magic "BMM3\0\0\0\1", dims as above, then one flag byte
// (0 or 1) per entry in storage order. Values are not stored; bind them to a
// data tensor when loading.
void write_mask(const std::string& path, Dims dims,
                std::span<const std::uint8_t> flags);

struct MaskData {
  Dims dims;
  std::vector<std::uint8_t> flags;
};
MaskData read_mask(const std::string& path);

// Grayscale frame sequences as binary portable graymaps (P5, 8- or 16-bit).
// Frames are the lexicographically sorted *.pgm files of the directory, all
// sharing one geometry; x(i,j,k) is pixel (row i, col j) of frame k scaled
// to [0,1] by the file's maxval. export_frames inverts this: clamp to [0,1],
// quantize to maxval (255 or 65535), one zero-padded frame_NNNN.pgm per
// frontal slice.
Tensor3 import_frames(const std::string& dir);
void export_frames(const Tensor3& x, const std::string& dir, int maxval = 255);

// Uniform observation sampling: exactly round(sample_rate * n1*n2*n3)
// distinct entries, chosen by a seeded partial shuffle, values copied
// from t. Pure function of (spec, t).
struct MaskSpec {
  double sample_rate = 0.0;
  std::uint64_t seed = 0;
  Dims dims;
};
ObservationMask gen_mask(const MaskSpec& spec, const Tensor3& t);

// Synthetic low-BM-rank instance: each of the ell lateral slices of a1 and
// horizontal slices of a3 is a sum of slice_rank rank-one uniform(0,1) outer
// products; a2 is unconstrained uniform(0,1). x = bmp(a1,a2,a3). Requires
// 1 <= slice_rank <= min(n1,n2,n3).
struct SyntheticInstance {
  Tensor3 x;
  BmFactors factors;
};
SyntheticInstance gen_synthetic(Dims dims, std::size_t ell,
                                std::size_t slice_rank, std::uint64_t seed);

// FNV-1a 64-bit, for manifest input fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t hash_file(const std::string& path);

}  // namespace bmtc
