#include "radpose/radar_frontend.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "radpose/error.hpp"
#include "radpose/fft.hpp"

namespace radpose {

RadarDims RadarDims::unpadded(std::size_t t, std::size_t a, std::size_t e, std::size_t s,
                              std::size_t c) {
  RadarDims d;
  d.frames = t;
  d.azimuth = a;
  d.elevation = e;
  d.samples = s;
  d.chirps = c;
  d.pad_samples = s;
  d.pad_chirps = c;
  d.pad_azimuth = a;
  d.pad_elevation = e;
  return d;
}

void RadarDims::validate() const {
  for (std::size_t v : {frames, azimuth, elevation, samples, chirps})
    require(v > 0, ErrorKind::kConfig, "radar dims must be positive");
  const std::array<std::pair<std::size_t, std::size_t>, 4> pads = {{
      {pad_samples, samples},
      {pad_chirps, chirps},
      {pad_azimuth, azimuth},
      {pad_elevation, elevation},
  }};
  for (auto [pad, raw] : pads) {
    require(is_power_of_two(pad), ErrorKind::kConfig,
            "fft pad " + std::to_string(pad) + " is not a power of two");
    require(pad >= raw, ErrorKind::kConfig,
            "fft pad " + std::to_string(pad) + " is smaller than raw size " + std::to_string(raw));
  }
}

void RadarCube::validate() const {
  dims.validate();
  require(data.is_complex(), ErrorKind::kShapeMismatch, "radar cube must be complex");
  require(data.shape() == dims.cube_shape(), ErrorKind::kShapeMismatch,
          "radar cube shape " + shape_string(data.shape()) + " does not match dims " +
              shape_string(dims.cube_shape()));
  require(all_finite(data), ErrorKind::kNumerical, "radar cube holds non-finite values");
}

Tensor RadarCube::frame(std::size_t t) const {
  require(t < dims.frames, ErrorKind::kInvalidArgument, "frame index out of range");
  Tensor out(dims.frame_shape(), DType::kComplex);
  const std::size_t n = shape_product(dims.frame_shape()) * 2;
  auto src = data.data().subspan(t * n, n);
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

RadarCube RadarCube::window(std::size_t start, std::size_t count) const {
  require(count > 0 && start + count <= dims.frames, ErrorKind::kInvalidArgument,
          "window exceeds recording length");
  RadarCube out;
  out.dims = dims;
  out.dims.frames = count;
  const std::size_t n = shape_product(dims.frame_shape()) * 2;
  auto src = data.data().subspan(start * n, count * n);
  out.data = Tensor(out.dims.cube_shape(), std::vector<double>(src.begin(), src.end()),
                    DType::kComplex);
  return out;
}

Tensor preprocess_frame(const Tensor& frame, const RadarDims& dims,
                        const PreprocessOptions& options) {
  require(frame.is_complex() && frame.shape() == dims.frame_shape(), ErrorKind::kShapeMismatch,
          "frame shape " + shape_string(frame.shape()) + " does not match dims " +
              shape_string(dims.frame_shape()));
  // Frame axes: 0 azimuth, 1 elevation, 2 samples, 3 chirps.
  Tensor x = options.remove_clutter ? center_along(frame, 3) : frame;
  x = fft_along(x, 2, dims.pad_samples);
  x = fft_along(x, 3, dims.pad_chirps);
  x = fft_along(x, 0, dims.pad_azimuth);
  x = fft_along(x, 1, dims.pad_elevation);
  constexpr std::array<std::size_t, 4> kToDopplerFirst = {3, 0, 1, 2};
  return permute(x, kToDopplerFirst);
}

ProcessedTensor assemble_window(std::span<const Tensor> processed_frames) {
  require(!processed_frames.empty(), ErrorKind::kInvalidArgument, "window has no frames");
  const Shape& fs = processed_frames.front().shape();
  const std::size_t t_count = processed_frames.size();
  const std::size_t n = shape_product(fs);
  Shape out_shape = {2 * t_count};
  out_shape.insert(out_shape.end(), fs.begin(), fs.end());
  ProcessedTensor out{Tensor(out_shape)};
  auto dst = out.data.data();
  for (std::size_t t = 0; t < t_count; ++t) {
    const Tensor& f = processed_frames[t];
    require(f.is_complex() && f.shape() == fs, ErrorKind::kShapeMismatch,
            "processed frames differ in shape");
    auto src = f.data();
    double* re = dst.data() + t * n;
    double* im = dst.data() + (t_count + t) * n;
    for (std::size_t i = 0; i < n; ++i) {
      re[i] = src[2 * i];
      im[i] = src[2 * i + 1];
    }
  }
  return out;
}

ProcessedTensor preprocess(const RadarCube& cube, const PreprocessOptions& options) {
  cube.validate();
  std::vector<Tensor> frames;
  frames.reserve(cube.dims.frames);
  for (std::size_t t = 0; t < cube.dims.frames; ++t)
    frames.push_back(preprocess_frame(cube.frame(t), cube.dims, options));
  return assemble_window(frames);
}

namespace {

constexpr std::array<char, 4> kCubeMagic = {'R', 'P', 'C', '1'};
constexpr std::uint32_t kCubeVersion = 1;
constexpr std::uint64_t kMaxCubeElements = std::uint64_t{1} << 40;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return to_little(v);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream os(path, mode);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

void write_cube(const RadarCube& cube, const std::filesystem::path& path) {
  cube.validate();
  auto os = open_out(path, std::ios::binary);
  os.write(kCubeMagic.data(), kCubeMagic.size());
  put<std::uint32_t>(os, kCubeVersion);
  for (std::size_t d : cube.dims.cube_shape()) {
    require(d <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::kDimOverflow,
            "cube dim does not fit in u32");
    put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  for (double v : cube.data.data()) put<float>(os, static_cast<float>(v));
  require(static_cast<bool>(os), ErrorKind::kIo, "write failed for " + path.string());
}

RadarCube read_cube(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kFileNotFound, "cannot open " + path.string());
  constexpr std::size_t kHeader = 4 + 4 + 5 * 4;
  std::array<unsigned char, kHeader> header{};
  is.read(reinterpret_cast<char*>(header.data()), kHeader);
  if (static_cast<std::size_t>(is.gcount()) >= 4 &&
      std::memcmp(header.data(), kCubeMagic.data(), 4) != 0)
    fail(ErrorKind::kBadMagic, path.string() + ": bad magic");
  require(static_cast<std::size_t>(is.gcount()) == kHeader, ErrorKind::kTruncatedPayload,
          path.string() + ": truncated header");
  const auto version = get<std::uint32_t>(header.data() + 4);
  require(version == kCubeVersion, ErrorKind::kUnsupportedVersion,
          path.string() + ": unsupported version " + std::to_string(version));

  std::array<std::uint64_t, 5> d{};
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < 5; ++i) {
    d[i] = get<std::uint32_t>(header.data() + 8 + 4 * i);
    require(d[i] > 0, ErrorKind::kDimOverflow, path.string() + ": zero dimension in header");
    require(count <= kMaxCubeElements / d[i], ErrorKind::kDimOverflow,
            path.string() + ": header dims exceed the element limit");
    count *= d[i];
  }

  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  const std::uint64_t payload = count * 2 * sizeof(float);
  require(file_size >= kHeader + payload, ErrorKind::kTruncatedPayload,
          path.string() + ": truncated payload (" + std::to_string(file_size - kHeader) +
              " of " + std::to_string(payload) + " bytes)");
  is.seekg(kHeader, std::ios::beg);

  std::vector<unsigned char> raw(payload);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(payload));
  require(static_cast<std::uint64_t>(is.gcount()) == payload, ErrorKind::kTruncatedPayload,
          path.string() + ": truncated payload");

  RadarCube cube;
  cube.dims = RadarDims::unpadded(d[0], d[1], d[2], d[3], d[4]);
  std::vector<double> values(count * 2);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<double>(get<float>(raw.data() + i * sizeof(float)));
  cube.data = Tensor(cube.dims.cube_shape(), std::move(values), DType::kComplex);
  require(all_finite(cube.data), ErrorKind::kNumerical, path.string() + ": non-finite samples");
  return cube;
}

void write_pose_csv(const std::filesystem::path& path, std::span<const Pose> poses) {
  auto os = open_out(path, std::ios::out);
  os << "frame_index";
  const char axes[3] = {'x', 'y', 'z'};
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (char a : axes) os << ",kp" << k << '_' << a;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    os << i;
    for (double v : poses[i].flat()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
  require(static_cast<bool>(os), ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<Pose> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::kFileNotFound, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line.rfind("frame_index", 0) == 0,
          ErrorKind::kIo, path.string() + ": missing pose csv header");
  std::vector<Pose> poses;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const auto index = std::stoull(cell);
    require(index == poses.size(), ErrorKind::kIo,
            path.string() + ": frame indices must be consecutive from 0");
    while (std::getline(ss, cell, ',')) values.push_back(std::strtod(cell.c_str(), nullptr));
    require(values.size() == kPoseDims, ErrorKind::kShapeMismatch,
            path.string() + ": pose row needs 78 values");
    poses.push_back(Pose::from_flat(values));
  }
  return poses;
}

}  // namespace radpose
