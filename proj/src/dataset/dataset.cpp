#include "metaexo/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "metaexo/common/error.hpp"
#include "metaexo/common/rng.hpp"

namespace metaexo::dataset {

namespace {

const double kPi = std::acos(-1.0);

double wrap_angle(double a) {
  // remainder() lands in (-pi, pi]; map the open edge to the closed one.
  const double w = std::remainder(a, 2.0 * kPi);
  return w < -kPi ? w + 2.0 * kPi : w;
}

}  // namespace

void Trajectory::validate() const {
  if (samples.size() < 2) throw TooShortError("trajectory needs at least 2 samples");
  if (!(dt > 0.0)) throw Error("trajectory dt must be positive");
  for (const Sample& s : samples) {
    if (!std::isfinite(s.angle) || !std::isfinite(s.velocity))
      throw NaNDetectedError("trajectory contains a non-finite value");
    if (s.angle < -kPi || s.angle > kPi)
      throw Error("trajectory angle outside [-pi, pi]");
  }
}

Trajectory extract_trajectory(const std::vector<double>& angles, double dt) {
  if (angles.size() < 2) throw TooShortError("need at least 2 angle samples");
  if (!(dt > 0.0)) throw Error("dt must be positive");
  const std::size_t n = angles.size();
  Trajectory out;
  out.dt = dt;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i].angle = wrap_angle(angles[i]);
  out.samples[0].velocity = (out.samples[1].angle - out.samples[0].angle) / dt;
  out.samples[n - 1].velocity =
      (out.samples[n - 1].angle - out.samples[n - 2].angle) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i)
    out.samples[i].velocity =
        (out.samples[i + 1].angle - out.samples[i - 1].angle) / (2.0 * dt);
  return out;
}

std::vector<TemporalWindow> make_windows(const Trajectory& traj, int delta_t) {
  if (delta_t < 0) throw Error("delta_t must be non-negative");
  const std::size_t l = traj.length();
  const std::size_t need = static_cast<std::size_t>(delta_t) + 2;
  if (l < need)
    throw TooShortError("trajectory of length " + std::to_string(l) +
                        " cannot produce windows with delta_t " + std::to_string(delta_t));
  std::vector<TemporalWindow> out;
  out.reserve(l - delta_t - 1);
  // 0-indexed: window ending at sample k covers [k - delta_t, k] and
  // targets the angle at k + 1.
  for (std::size_t k = static_cast<std::size_t>(delta_t); k + 1 < l; ++k) {
    TemporalWindow w;
    w.history.resize(delta_t + 1);
    for (int j = 0; j <= delta_t; ++j) {
      const Sample& s = traj.samples[k - delta_t + j];
      w.history[j] = {s.angle, s.velocity};
    }
    w.target = traj.samples[k + 1].angle;
    out.push_back(std::move(w));
  }
  return out;
}

std::pair<TaskDataset, TaskDataset> split_support_query(const TaskDataset& task,
                                                        double support_fraction,
                                                        std::uint64_t seed) {
  const std::size_t n = task.trajectories.size();
  if (n < 2) throw TooFewTrajectoriesError("need at least 2 trajectories to split");
  if (!(support_fraction > 0.0) || !(support_fraction < 1.0))
    throw Error("support_fraction must lie in (0, 1)");
  std::size_t n_support = static_cast<std::size_t>(
      std::floor(support_fraction * static_cast<double>(n)));
  n_support = std::max<std::size_t>(1, std::min(n_support, n - 1));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }

  TaskDataset support{task.task_id, {}}, query{task.task_id, {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_support)
      support.trajectories.push_back(task.trajectories[order[i]]);
    else
      query.trajectories.push_back(task.trajectories[order[i]]);
  }
  return {std::move(support), std::move(query)};
}

NormStats compute_stats(const MetaDataset& data) {
  double sum[2] = {0, 0}, sumsq[2] = {0, 0};
  std::size_t count = 0;
  for (const TaskDataset& task : data.tasks)
    for (const Trajectory& traj : task.trajectories)
      for (const Sample& s : traj.samples) {
        sum[0] += s.angle;
        sum[1] += s.velocity;
        sumsq[0] += s.angle * s.angle;
        sumsq[1] += s.velocity * s.velocity;
        ++count;
      }
  if (count == 0) throw TooShortError("cannot compute stats of an empty dataset");
  NormStats st;
  for (int c = 0; c < 2; ++c) {
    st.mean[c] = sum[c] / static_cast<double>(count);
    const double var = sumsq[c] / static_cast<double>(count) - st.mean[c] * st.mean[c];
    st.scale[c] = std::sqrt(std::max(var, 0.0));
  }
  return st;
}

namespace {

Trajectory affine_map(const Trajectory& traj, const NormStats& st, bool forward) {
  for (double s : st.scale)
    if (!(s > 1e-12)) throw ZeroScaleError("normalization scale is not positive");
  Trajectory out = traj;
  for (Sample& s : out.samples) {
    if (forward) {
      s.angle = (s.angle - st.mean[0]) / st.scale[0];
      s.velocity = (s.velocity - st.mean[1]) / st.scale[1];
    } else {
      s.angle = s.angle * st.scale[0] + st.mean[0];
      s.velocity = s.velocity * st.scale[1] + st.mean[1];
    }
  }
  return out;
}

}  // namespace

Trajectory normalize(const Trajectory& traj, const NormStats& stats) {
  return affine_map(traj, stats, true);
}

Trajectory denormalize(const Trajectory& traj, const NormStats& stats) {
  return affine_map(traj, stats, false);
}

}  // namespace metaexo::dataset
