#pragma once

#include <cstdint>
#include <string>

#include "metaexo/dataset/dataset.hpp"

namespace metaexo::dataset {

enum class TaskFamily { kReach, kLiftCycle, kGesture };

const char* family_name(TaskFamily f);

struct SynthParams {
  std::string task_id;
  double amplitude = 1.0;     // rad; peak flexion above the starting angle
  double duration = 2.0;      // s; nominal motion duration
  int cycles = 2;             // lift_cycle: number of rectified-sine maxima
  int phases = 3;             // gesture: number of move-and-hold segments
  double dt = 0.01;           // s
  double noise_sigma = 0.005; // rad, Gaussian angle noise
  bool jitter = true;         // +-10% amplitude, +-15% duration, phase shift
  int n_subjects = 5;         // subject ids cycle through this pool
};

// One synthetic task: n_traj executions of the same motion with
// per-trajectory jitter and noise. Deterministic in (params, seed).
TaskDataset synth_task_family(TaskFamily family, const SynthParams& params, int n_traj,
                              std::uint64_t seed);

// A corpus of `n_tasks` distinct tasks cycling through the three families
// with task-level parameter variation, `traj_per_task` executions each.
// The `tag` enters both the task ids and the seed derivation so train and
// held-out corpora never overlap.
MetaDataset build_corpus(int n_tasks, int traj_per_task, double dt, double noise_sigma,
                         int n_subjects, std::uint64_t seed, const std::string& tag);

}  // namespace metaexo::dataset
