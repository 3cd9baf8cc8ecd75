#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace metaexo::dataset {

struct Sample {
  double angle = 0.0;     // rad
  double velocity = 0.0;  // rad/s
};

struct Trajectory {
  std::vector<Sample> samples;
  double dt = 0.0;
  std::string task_id;
  std::string subject_id;

  std::size_t length() const { return samples.size(); }
  void validate() const;  // finite values, dt > 0, L >= 2, angles in [-pi, pi]
};

struct TaskDataset {
  std::string task_id;
  std::vector<Trajectory> trajectories;
};

struct MetaDataset {
  std::vector<TaskDataset> tasks;
};

// History rows run oldest to newest; the target is the next-step angle.
struct TemporalWindow {
  std::vector<std::array<double, 2>> history;  // (angle, velocity) x (delta_t + 1)
  double target = 0.0;
};

// Builds a trajectory from raw angles: wraps to [-pi, pi] and differentiates
// by central differences with one-sided stencils at the endpoints.
Trajectory extract_trajectory(const std::vector<double>& angles, double dt);

// One window per step k in [delta_t + 1, L - 1] (1-indexed), so exactly
// L - delta_t - 1 windows; window k predicts the angle at k + 1.
std::vector<TemporalWindow> make_windows(const Trajectory& traj, int delta_t);

// Disjoint, exhaustive trajectory-level partition. Support size is
// max(1, floor(fraction * N)) capped at N - 1; assignment is a seeded
// shuffle, so the same seed always reproduces the same split.
std::pair<TaskDataset, TaskDataset> split_support_query(const TaskDataset& task,
                                                        double support_fraction,
                                                        std::uint64_t seed);

struct NormStats {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> scale{1.0, 1.0};
};

NormStats compute_stats(const MetaDataset& data);
Trajectory normalize(const Trajectory& traj, const NormStats& stats);
Trajectory denormalize(const Trajectory& traj, const NormStats& stats);

}  // namespace metaexo::dataset
