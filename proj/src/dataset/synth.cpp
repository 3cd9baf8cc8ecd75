#include "metaexo/dataset/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "metaexo/common/error.hpp"
#include "metaexo/common/rng.hpp"

namespace metaexo::dataset {

namespace {

constexpr double kElbowLo = 0.0;
constexpr double kElbowHi = 2.6;

double min_jerk(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return ((6.0 * s - 15.0) * s + 10.0) * s * s * s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct Jitter {
  double amp_scale = 1.0;
  double dur_scale = 1.0;
  double phase = 0.0;  // start delay, seconds
};

// Task-level waypoint sequence for the gesture family: move-and-hold
// targets with a guaranteed minimum swing between consecutive holds.
std::vector<double> gesture_waypoints(int phases, double amplitude, Rng& rng) {
  std::vector<double> w = {0.0};
  for (int i = 0; i < phases; ++i) {
    double next = 0.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
      next = rng.uniform(0.25, 1.0) * amplitude;
      if (std::abs(next - w.back()) >= 0.15 * amplitude) break;
    }
    w.push_back(next);
  }
  return w;
}

std::vector<double> generate_angles(TaskFamily family, const SynthParams& p,
                                    const Jitter& j, const std::vector<double>& waypoints) {
  const double amp = p.amplitude * j.amp_scale;
  const double dur = p.duration * j.dur_scale;
  const double total = j.phase + dur;
  const std::size_t n = static_cast<std::size_t>(std::ceil(total / p.dt)) + 1;
  std::vector<double> angles(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * p.dt - j.phase;
    double a = 0.0;
    switch (family) {
      case TaskFamily::kReach:
        a = amp * min_jerk(t / dur);
        break;
      case TaskFamily::kLiftCycle: {
        const double t_c = dur / static_cast<double>(p.cycles);
        if (t > 0.0 && t < dur) a = amp * std::abs(std::sin(std::acos(-1.0) * t / t_c));
        break;
      }
      case TaskFamily::kGesture: {
        const int phases = static_cast<int>(waypoints.size()) - 1;
        const double phase_dur = dur / static_cast<double>(phases);
        // holds shorter than the predictor window, so a history of samples
        // always pins where the motion is within a phase
        const double move_dur = phase_dur * 0.9;
        if (t <= 0.0) {
          a = waypoints.front();
        } else if (t >= dur) {
          a = waypoints.back();
        } else {
          const int ph = std::min(phases - 1, static_cast<int>(t / phase_dur));
          const double local = t - ph * phase_dur;
          const double from = waypoints[ph], to = waypoints[ph + 1];
          a = from + (to - from) * min_jerk(local / move_dur);
        }
        break;
      }
    }
    angles[i] = a;
  }
  return angles;
}

}  // namespace

const char* family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::kReach: return "reach";
    case TaskFamily::kLiftCycle: return "lift";
    case TaskFamily::kGesture: return "gesture";
  }
  return "unknown";
}

TaskDataset synth_task_family(TaskFamily family, const SynthParams& params, int n_traj,
                              std::uint64_t seed) {
  if (n_traj < 2) throw TooFewTrajectoriesError("a task needs at least 2 trajectories");
  const double amp_peak = params.amplitude * (params.jitter ? 1.1 : 1.0);
  if (!(params.amplitude > 0.0) || amp_peak > kElbowHi)
    throw BadParamsError("amplitude " + std::to_string(params.amplitude) +
                         " (with jitter headroom) leaves elbow limits [0, 2.6]");
  if (!(params.duration > 0.0) || !(params.dt > 0.0) || params.cycles < 1 ||
      params.phases < 1 || params.noise_sigma < 0.0)
    throw BadParamsError("non-positive duration/dt/cycles/phases or negative noise");

  Rng task_rng(Rng::derive(seed, {0}));
  const std::vector<double> waypoints =
      gesture_waypoints(params.phases, params.amplitude, task_rng);

  TaskDataset out;
  out.task_id = params.task_id.empty() ? family_name(family) : params.task_id;
  for (int idx = 0; idx < n_traj; ++idx) {
    Rng rng(Rng::derive(seed, {1, static_cast<std::uint64_t>(idx)}));
    Jitter j;
    if (params.jitter) {
      j.amp_scale = rng.uniform(0.9, 1.1);
      j.dur_scale = rng.uniform(0.85, 1.15);
      j.phase = rng.uniform(0.0, 0.08 * params.duration);
    }
    std::vector<double> angles = generate_angles(family, params, j, waypoints);
    if (params.noise_sigma > 0.0)
      for (double& a : angles)
        a = std::clamp(a + rng.gaussian(0.0, params.noise_sigma), kElbowLo, kElbowHi);
    Trajectory traj = extract_trajectory(angles, params.dt);
    traj.task_id = out.task_id;
    traj.subject_id = "subj_" + std::to_string(idx % std::max(1, params.n_subjects));
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

MetaDataset build_corpus(int n_tasks, int traj_per_task, double dt, double noise_sigma,
                         int n_subjects, std::uint64_t seed, const std::string& tag) {
  if (n_tasks < 1) throw TooFewTrajectoriesError("corpus needs at least one task");
  MetaDataset out;
  const std::uint64_t tag_hash = fnv1a(tag);
  for (int i = 0; i < n_tasks; ++i) {
    const TaskFamily family = static_cast<TaskFamily>(i % 3);
    Rng rng(Rng::derive(seed, {tag_hash, static_cast<std::uint64_t>(i), 7}));
    SynthParams p;
    // durations scale with amplitude so peak speeds stay in the range an
    // elbow actually moves at (roughly 1.5 to 5 rad/s)
    switch (family) {
      case TaskFamily::kReach:
        p.amplitude = rng.uniform(0.6, 2.0);
        p.duration = std::max(1.0, 1.875 * p.amplitude / rng.uniform(1.5, 3.0));
        break;
      case TaskFamily::kLiftCycle:
        p.amplitude = rng.uniform(0.5, 1.1);
        p.cycles = 2 + static_cast<int>(rng.uniform_int(0, 1));
        p.duration = std::acos(-1.0) * p.amplitude * p.cycles / rng.uniform(3.0, 5.0);
        break;
      case TaskFamily::kGesture:
        p.amplitude = rng.uniform(0.6, 1.6);
        p.phases = 2 + static_cast<int>(rng.uniform_int(0, 2));
        p.duration = p.phases * rng.uniform(0.5, 0.8);
        break;
    }
    p.dt = dt;
    p.noise_sigma = noise_sigma;
    p.n_subjects = n_subjects;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    p.task_id = tag + "_" + family_name(family) + "_" + buf;
    out.tasks.push_back(synth_task_family(
        family, p, traj_per_task,
        Rng::derive(seed, {tag_hash, static_cast<std::uint64_t>(i), 13})));
  }
  return out;
}

}  // namespace metaexo::dataset
