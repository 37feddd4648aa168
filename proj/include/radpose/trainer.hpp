#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "radpose/pose_model.hpp"
#include "radpose/prob_losses.hpp"
#include "radpose/radar_frontend.hpp"
#include "radpose/scatter_sim.hpp"

namespace radpose {

// Subject-level split. Windows of one subject never appear in two splits.
struct SplitSpec {
  std::vector<int> train;
  int calib = -1;
  std::vector<int> test;
  std::size_t stride = 1;

  void validate() const;
  // "train=0,1,2,3;calib=4;test=5[;stride=1]"
  static SplitSpec parse(const std::string& text);
  std::string to_string() const;
};

// Recordings preprocessed frame by frame. Preprocessing is per frame, so a
// window's input is assembled from cached frames without recomputing FFTs.
class Dataset {
 public:
  struct Sequence {
    int subject = -1;
    int activity = -1;
    std::vector<Pose> poses;
    std::vector<Tensor> frames;  // complex [pad_C, pad_A, pad_E, pad_S]
  };
  struct WindowRef {
    std::size_t sequence = 0;
    std::size_t last_frame = 0;
  };

  Dataset() = default;
  // `dims` gives the window length and FFT pads; the raw sizes must match the
  // recordings.
  static Dataset from_recordings(const std::vector<Recording>& recordings, const RadarDims& dims);

  const RadarDims& dims() const { return dims_; }
  const std::vector<Sequence>& sequences() const { return sequences_; }
  bool empty() const { return sequences_.empty(); }

  // All windows of the given subjects, in sequence then frame order.
  std::vector<WindowRef> windows(const std::vector<int>& subjects, std::size_t stride = 1) const;
  ProcessedTensor input(const WindowRef& w) const;
  const Pose& label(const WindowRef& w) const;
  std::string window_id(const WindowRef& w) const;  // "s<subject>_a<activity>_f<last frame>"

 private:
  RadarDims dims_;
  std::vector<Sequence> sequences_;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LossWeights weights;
  ModelConfig model;
  std::size_t patience = 20;
  // Windows drawn per training epoch; 0 uses every training window.
  std::size_t windows_per_epoch = 0;
  // Windows sampled for the input RMS estimate.
  std::size_t scale_windows = 64;
  // Global gradient-norm clip per batch; 0 disables.
  double grad_clip = 0.0;
  // Decoupled weight decay on weight matrices.
  double weight_decay = 0.0;
  std::filesystem::path out_dir;  // checkpoint.bin and history.csv when set
  bool verbose = false;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean training objective
  double val_loss = 0.0;    // mean validation NLL, the early-stopping criterion
  double val_mpjpe = 0.0;   // meters
};

struct TrainResult {
  PoseModel model;  // best validation checkpoint
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool aborted = false;  // non-finite loss; model holds the last good parameters
  std::string abort_reason;
};

TrainResult train(const Dataset& data, const SplitSpec& split, const TrainConfig& config);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

struct EvalRecord {
  std::string window_id;
  int subject = -1;
  int activity = -1;
  PredictiveDistribution pred;
  Pose truth;
};

// Deterministic given eval_seed: window i draws its latent noise from a stream
// derived from (eval_seed, i). Work is sharded over `threads` workers (0 reads
// RADPOSE_THREADS, default 1).
std::vector<EvalRecord> evaluate(const PoseModel& model, const Dataset& data,
                                 const std::vector<Dataset::WindowRef>& windows,
                                 std::uint64_t eval_seed, bool keep_samples = false,
                                 std::size_t threads = 0);

// Mean of the training labels, used as the constant-pose baseline.
Pose mean_pose(const Dataset& data, const std::vector<Dataset::WindowRef>& windows);

std::size_t thread_count_from_env();

}  // namespace radpose
