#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "radpose/skeleton.hpp"
#include "radpose/tensor.hpp"

namespace radpose {

struct RadarDims {
  std::size_t frames = 8;      // T, frames per window
  std::size_t azimuth = 4;     // A
  std::size_t elevation = 4;   // E
  std::size_t samples = 64;    // S, ADC samples per chirp
  std::size_t chirps = 128;    // C
  std::size_t pad_samples = 64;
  std::size_t pad_chirps = 128;
  std::size_t pad_azimuth = 4;
  std::size_t pad_elevation = 4;

  // Pads equal to the raw sizes.
  static RadarDims unpadded(std::size_t t, std::size_t a, std::size_t e, std::size_t s,
                            std::size_t c);

  void validate() const;
  Shape cube_shape() const { return {frames, azimuth, elevation, samples, chirps}; }
  Shape frame_shape() const { return {azimuth, elevation, samples, chirps}; }
  // Processed per-frame layout: [Doppler, azimuth, elevation, range].
  Shape processed_frame_shape() const {
    return {pad_chirps, pad_azimuth, pad_elevation, pad_samples};
  }
  Shape processed_shape() const {
    return {2 * frames, pad_chirps, pad_azimuth, pad_elevation, pad_samples};
  }
  std::size_t slice_size() const {
    return pad_chirps * pad_azimuth * pad_elevation * pad_samples;
  }
};

// Complex [T, A, E, S, C] beat-signal samples.
struct RadarCube {
  RadarDims dims;
  Tensor data;

  void validate() const;
  // Complex [A, E, S, C] slice of frame t.
  Tensor frame(std::size_t t) const;
  // Frames [start, start + count) as a new cube.
  RadarCube window(std::size_t start, std::size_t count) const;
};

// Real [2T, Doppler, azimuth, elevation, range]: T real-part slices in time
// order followed by T imaginary-part slices.
struct ProcessedTensor {
  Tensor data;
};

struct PreprocessOptions {
  bool remove_clutter = true;
};

// Clutter centering over chirps, then FFTs over samples, chirps, azimuth and
// elevation, permuted to [Doppler, azimuth, elevation, range]. Complex output.
Tensor preprocess_frame(const Tensor& frame, const RadarDims& dims,
                        const PreprocessOptions& options = {});

// Stacks per-frame outputs of preprocess_frame into a ProcessedTensor.
ProcessedTensor assemble_window(std::span<const Tensor> processed_frames);

ProcessedTensor preprocess(const RadarCube& cube, const PreprocessOptions& options = {});

// Binary cube format "RPC1": magic, u32 version (1), u32 x 5 dims [T,A,E,S,C],
// then T*A*E*S*C little-endian (re, im) f32 pairs, row-major. Pads are not
// stored; read_cube returns unpadded dims.
void write_cube(const RadarCube& cube, const std::filesystem::path& path);
RadarCube read_cube(const std::filesystem::path& path);

// Pose sidecar: header "frame_index,kp0_x,...,kp25_z", one row per frame.
void write_pose_csv(const std::filesystem::path& path, std::span<const Pose> poses);
std::vector<Pose> read_pose_csv(const std::filesystem::path& path);

}  // namespace radpose
