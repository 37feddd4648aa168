#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "radpose/error.hpp"
#include "radpose/scatter_sim.hpp"
#include "radpose/trainer.hpp"

namespace radpose {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingFile = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitShape = 4;

int exit_code_for(ErrorKind kind);

// Entry point of the `radpose` tool. Diagnostics go to `err` as one line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Simulated data directory: manifest.csv plus one RPC1 cube and one pose CSV
// per recording.
void write_recordings(const std::filesystem::path& dir, const std::vector<Recording>& recordings);
std::vector<Recording> read_recordings(const std::filesystem::path& dir);

// predictions.csv: one row per window with the split it belongs to, the
// predictive mean and per-dimension dispersion, and the ground truth.
struct PredictionRow {
  std::string split;  // "calib" or "test"
  EvalRecord record;
};
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

}  // namespace radpose
