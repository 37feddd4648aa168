#include "radpose/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "radpose/error.hpp"

namespace radpose {
namespace {

struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  fail(ErrorKind::kConfig, "config key '" + key + "': " + what + ", got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, v, "expected a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "expected a number");
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, v, "expected a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "expected true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

Binding size_key(std::string key, std::size_t& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_u64(key, v); },
          [&ref] { return std::to_string(ref); }};
}

Binding u64_key(std::string key, std::uint64_t& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_u64(key, v); },
          [&ref] { return std::to_string(ref); }};
}

Binding double_key(std::string key, double& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_double(key, v); },
          [&ref] { return fmt(ref); }};
}

Binding bool_key(std::string key, bool& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_bool(key, v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

std::vector<Binding> bindings(RunConfig& c) {
  auto& d = c.radar.dims;
  auto& m = c.train.model;
  auto& sp = c.sim.spread;
  std::vector<Binding> b = {
      u64_key("seed", c.seed),
      {"split", [&c](const std::string& v) { c.split = v; }, [&c] { return c.split; }},

      size_key("dims.frames", d.frames),
      size_key("dims.azimuth", d.azimuth),
      size_key("dims.elevation", d.elevation),
      size_key("dims.samples", d.samples),
      size_key("dims.chirps", d.chirps),
      size_key("dims.pad_samples", d.pad_samples),
      size_key("dims.pad_chirps", d.pad_chirps),
      size_key("dims.pad_azimuth", d.pad_azimuth),
      size_key("dims.pad_elevation", d.pad_elevation),

      double_key("radar.carrier_hz", c.radar.carrier_hz),
      double_key("radar.bandwidth_hz", c.radar.bandwidth_hz),
      double_key("radar.chirp_s", c.radar.chirp_s),
      double_key("radar.adc_hz", c.radar.adc_hz),
      double_key("radar.frame_rate_hz", c.radar.frame_rate_hz),
      size_key("radar.n_tx", c.radar.n_tx),
      double_key("radar.element_spacing", c.radar.element_spacing),

      size_key("sim.subjects", c.sim.n_subjects),
      size_key("sim.frames", c.sim.frames_per_recording),
      {"sim.activities",
       [&c](const std::string& v) {
         c.sim.activities.clear();
         for (const auto& s : split_list(v))
           c.sim.activities.push_back(static_cast<int>(parse_u64("sim.activities", s)));
       },
       [&c] { return join(c.sim.activities); }},
      {"sim.rcs",
       [&c](const std::string& v) {
         try {
           c.sim.rcs = parse_rcs_profile(v);
         } catch (const Error&) {
           bad_value("sim.rcs", v, "expected uniform, heteroscedastic or three_point");
         }
       },
       [&c] { return to_string(c.sim.rcs); }},
      double_key("sim.noise_std", c.sim.noise_std),
      double_key("sim.scale_min", sp.scale_min),
      double_key("sim.scale_max", sp.scale_max),
      double_key("sim.range_min", sp.range_min),
      double_key("sim.range_max", sp.range_max),
      double_key("sim.lateral_max", sp.lateral_max),
      {"sim.yaw_deg",
       [&sp](const std::string& v) {
         sp.yaw_deg.clear();
         for (const auto& s : split_list(v)) sp.yaw_deg.push_back(parse_double("sim.yaw_deg", s));
       },
       [&sp] { return join(sp.yaw_deg); }},
      double_key("sim.tempo_min", sp.tempo_min),
      double_key("sim.tempo_max", sp.tempo_max),

      size_key("model.d_lat", m.d_lat),
      size_key("model.n_samples", m.n_samples),
      {"model.latent",
       [&m](const std::string& v) {
         try {
           m.latent_family = parse_latent_family(v);
         } catch (const Error&) {
           bad_value("model.latent", v, "expected gauss or laplace");
         }
       },
       [&m] { return to_string(m.latent_family); }},
      {"model.likelihood",
       [&m](const std::string& v) {
         try {
           m.likelihood = parse_likelihood(v);
         } catch (const Error&) {
           bad_value("model.likelihood", v, "expected gauss_diag, gauss_cov or laplace");
         }
       },
       [&m] { return to_string(m.likelihood); }},
      size_key("model.reducer_hidden", m.reducer_hidden),
      size_key("model.feature_dim", m.feature_dim),
      size_key("model.d_k", m.d_k),
      size_key("model.post_dim", m.post_dim),
      size_key("model.decoder_hidden", m.decoder_hidden),
      bool_key("model.decoder_relu", m.decoder_relu),
      double_key("model.alpha_init", m.alpha_init),
      double_key("model.var_floor", m.var_floor),
      double_key("model.cov_ridge", m.cov_ridge),

      double_key("loss.beta", c.train.weights.beta),
      double_key("loss.gamma", c.train.weights.gamma),

      size_key("train.epochs", c.train.epochs),
      size_key("train.batch_size", c.train.batch_size),
      double_key("train.lr", c.train.lr),
      size_key("train.patience", c.train.patience),
      size_key("train.windows_per_epoch", c.train.windows_per_epoch),
      size_key("train.scale_windows", c.train.scale_windows),
      double_key("train.grad_clip", c.train.grad_clip),
      double_key("train.weight_decay", c.train.weight_decay),
      bool_key("train.verbose", c.train.verbose),

      u64_key("eval.seed", c.eval_seed),
      size_key("calib.levels", c.calib_levels),
      size_key("report.ece_levels", c.report.ece_levels),
      size_key("report.quantile_levels", c.report.quantile_levels),

      size_key("aug.samples_per_sequence", c.aug_samples),
      double_key("aug.alpha", c.aug_alpha),
      double_key("aug.half_width", c.aug_half_width),
      size_key("aug.extra", c.aug_extra),
      size_key("classifier.channels", c.classifier.channels),
      size_key("classifier.epochs", c.classifier.epochs),
      size_key("classifier.batch_size", c.classifier.batch_size),
      double_key("classifier.lr", c.classifier.lr),
  };
  return b;
}

// Keeps derived fields in step with the ones they depend on.
void sync(RunConfig& c) {
  c.radar.array_mask = RadarParams::l_shaped_mask(c.radar.dims.azimuth, c.radar.dims.elevation);
  c.train.model.dims = c.radar.dims;
  c.classifier.d_lat = c.train.model.d_lat;
  c.classifier.seed = c.seed;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& b : bindings(*this)) {
    if (b.key == key) {
      b.set(value);
      sync(*this);
      return;
    }
  }
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      fail(ErrorKind::kConfig, e.what());
    }
  };
  wrap([&] { radar.validate(); });
  wrap([&] { train.validate(); });
  wrap([&] { SplitSpec::parse(split).validate(); });
  wrap([&] { classifier.validate(); });
  require(sim.n_subjects >= 1 && sim.frames_per_recording >= radar.dims.frames, ErrorKind::kConfig,
          "sim.frames must be at least dims.frames and sim.subjects at least 1");
  require(!sim.activities.empty(), ErrorKind::kConfig, "sim.activities is empty");
  for (int a : sim.activities)
    require(a >= 0 && a < kNumActivities, ErrorKind::kConfig,
            "sim.activities entry out of range: " + std::to_string(a));
  require(calib_levels >= 2, ErrorKind::kConfig, "calib.levels must be >= 2");
  require(report.ece_levels >= 1 && report.quantile_levels >= 2, ErrorKind::kConfig,
          "report levels too small");
  require(aug_samples >= 1, ErrorKind::kConfig, "aug.samples_per_sequence must be >= 1");
  require(aug_alpha >= 0.0 && aug_half_width >= 0.0, ErrorKind::kConfig,
          "aug.alpha and aug.half_width must be >= 0");
}

std::map<std::string, std::string> RunConfig::entries() const {
  RunConfig copy = *this;
  std::map<std::string, std::string> out;
  for (const auto& b : bindings(copy)) out[b.key] = b.get();
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c;
  sync(c);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            origin + ":" + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kFileNotFound, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

}  // namespace radpose
