#include "metaexo/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metaexo/autodiff/checkpoint.hpp"
#include "metaexo/autodiff/ops.hpp"
#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"
#include "metaexo/common/rng.hpp"
#include "metaexo/dataset/dataset_io.hpp"
#include "metaexo/dataset/synth.hpp"
#include "metaexo/kinematics/motion_io.hpp"
#include "metaexo/meta/meta.hpp"
#include "metaexo/simcontrol/simcontrol.hpp"
#include "metaexo/tasknet/tasknet.hpp"

namespace metaexo::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using autodiff::ParamSet;
using autodiff::ParamVars;
using autodiff::Tape;
using autodiff::Var;
using dataset::Trajectory;
using tasknet::TaskNet;

namespace {

fs::path required_path(const RunConfig& cfg, const std::string& key,
                       const std::string& command) {
  if (!cfg.has(key))
    throw ConfigError(command + " requires the '" + key + "' config key");
  const fs::path p = cfg.get_string(key);
  if (!fs::exists(p)) throw IoError(key + " path does not exist: " + p.string());
  return p;
}

// Path-typed keys stay out of reports and checkpoints so outputs do not
// depend on where the run happened.
std::map<std::string, std::string> echo_map(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  for (const auto& [key, value] : cfg.items())
    if (cfg.type(key) != RunConfig::Type::kPath) m[key] = value;
  return m;
}

json echo_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [key, value] : cfg.items())
    if (cfg.type(key) != RunConfig::Type::kPath) j[key] = value;
  return j;
}

simcontrol::PlantModel plant_from(const RunConfig& cfg) {
  simcontrol::PlantModel p;
  p.a0 = cfg.get_double("plant_a0");
  p.a1 = cfg.get_double("plant_a1");
  p.m_load = cfg.get_double("load_mass");
  p.l_m = cfg.get_double("load_arm");
  p.m_link = cfg.get_double("link_mass");
  p.l_c = cfg.get_double("link_com");
  p.g_acc = cfg.get_double("gravity_acc");
  p.validate();
  return p;
}

simcontrol::GravityCompensator comp_from(const RunConfig& cfg) {
  simcontrol::GravityCompensator c;
  c.m_hat = cfg.get_double("comp_mass");
  c.l_m = cfg.get_double("comp_arm");
  c.g_acc = cfg.get_double("gravity_acc");
  c.validate();
  return c;
}

simcontrol::ControllerGains gains_from(const RunConfig& cfg) {
  simcontrol::ControllerGains g;
  g.kp = cfg.get_double("kp");
  g.kd = cfg.get_double("kd");
  g.tau_max = cfg.get_double("tau_max");
  g.reference_velocity_feedforward = cfg.get_bool("reference_velocity_feedforward");
  g.validate();
  return g;
}

struct LoadedNet {
  TaskNet net;
  ParamSet params;
  std::map<std::string, std::string> config;
};

// Rebuilds the architecture recorded in the checkpoint and verifies the
// stored parameters actually fit it.
LoadedNet net_from_checkpoint(const fs::path& path) {
  autodiff::Checkpoint ck = autodiff::load_checkpoint(path);
  RunConfig echo;
  for (const auto& [key, value] : ck.config) echo.set(key, value);
  TaskNet net(tasknet::meta_config_from(echo));
  const ParamSet expect = net.init_params(0);
  if (expect.size() != ck.params.size())
    throw CheckpointError(path.string() + ": parameter count does not match the "
                          "recorded architecture");
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const auto& [name, tensor] = expect.item(i);
    if (!ck.params.contains(name))
      throw CheckpointError(path.string() + ": parameter '" + name + "' is missing");
    if (ck.params.at(name).shape != tensor.shape)
      throw CheckpointError(path.string() + ": parameter '" + name +
                            "' does not fit the recorded architecture");
  }
  return {std::move(net), std::move(ck.params), std::move(ck.config)};
}

std::vector<double> latent_of(const TaskNet& net, const ParamSet& params,
                              const Trajectory& traj) {
  Tape t;
  ParamVars p = autodiff::lift(t, params, false);
  const TaskNet::Latent lat = net.encode(t, p, traj);
  return t.tensor(lat.mu).data;
}

}  // namespace

// Seeding at onset rather than at rest matters: a resting window does not
// say when the task begins, so rollouts seeded there would hold still.
Trajectory rollout_reference(const TaskNet& net, const ParamSet& params,
                             const Trajectory& demo, int override_steps) {
  const auto win = static_cast<std::size_t>(net.config().window_len());
  if (demo.length() < win + 1)
    throw TooShortError("demo has " + std::to_string(demo.length()) +
                        " samples; the rollout seed needs " + std::to_string(win + 1));

  double v_peak = 0.0;
  for (const dataset::Sample& s : demo.samples)
    v_peak = std::max(v_peak, std::abs(s.velocity));
  const double v_onset = std::max(0.25, 0.1 * v_peak);
  std::size_t onset = 0;
  while (onset < demo.length() && std::abs(demo.samples[onset].velocity) < v_onset)
    ++onset;
  const std::size_t start =
      std::min(onset > 3 ? onset - 3 : 0, demo.length() - win - 1);

  std::vector<std::array<double, 2>> seed_hist;
  seed_hist.reserve(win);
  for (std::size_t i = start; i < start + win; ++i)
    seed_hist.push_back({demo.samples[i].angle, demo.samples[i].velocity});

  const std::vector<double> z = latent_of(net, params, demo);
  const int n_steps = override_steps > 0
                          ? override_steps
                          : static_cast<int>(demo.length() - start - win);
  const Trajectory generated = net.rollout(params, seed_hist, z, n_steps, demo.dt);

  Trajectory ref;
  ref.dt = demo.dt;
  ref.task_id = demo.task_id;
  ref.subject_id = demo.subject_id;
  for (std::size_t i = 0; i < start; ++i) ref.samples.push_back(demo.samples[i]);
  for (const auto& h : seed_hist) ref.samples.push_back({h[0], h[1]});
  ref.samples.insert(ref.samples.end(), generated.samples.begin(),
                     generated.samples.end());
  return ref;
}

namespace {

// One-step prediction error on pooled query windows, conditioned on the
// demo's latent code. Measures what adaptation bought on unseen executions.
double query_mse(const TaskNet& net, const ParamSet& params, const Trajectory& demo,
                 const std::vector<Trajectory>& queries) {
  Tape t;
  ParamVars p = autodiff::lift(t, params, false);
  const TaskNet::Latent lat = net.encode(t, p, demo);

  std::vector<dataset::TemporalWindow> windows;
  for (const Trajectory& q : queries) {
    const auto w = dataset::make_windows(q, net.config().delta_t);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  const Var pred = net.predict(t, p, windows, lat.mu);
  std::vector<double> targets;
  targets.reserve(windows.size());
  for (const auto& w : windows) targets.push_back(w.target);
  const Var y = t.leaf(autodiff::Tensor{{windows.size(), 1}, std::move(targets)}, false);
  return t.value(autodiff::mse(t, pred, y));
}

// Round-robin worker pool with results keyed by index, so any worker count
// produces identical output.
void run_indexed(int workers, std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int n_threads =
      std::max(1, std::min(workers, static_cast<int>(std::min<std::size_t>(n, 64))));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int tid = 0; tid < n_threads; ++tid) {
    pool.emplace_back([&, tid] {
      for (std::size_t i = tid; i < n; i += n_threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_json(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

std::string checkpoint_name(long long iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06lld.json", iteration);
  return buf;
}

}  // namespace

void cmd_retarget(const RunConfig& cfg, const fs::path& out) {
  const fs::path motion_path = required_path(cfg, "motion", "retarget");

  kinematics::HumanModel model;
  if (cfg.has("skeleton_config")) {
    const fs::path skel_path = required_path(cfg, "skeleton_config", "retarget");
    json skel;
    try {
      skel = json::parse(read_text_file(skel_path));
    } catch (const json::exception& e) {
      throw IoError(skel_path.string() + ": " + e.what());
    }
    try {
      for (const auto& [key, value] : skel.items()) {
        if (key == "shoulder_offset") model.shoulder_offset = value.get<double>();
        else if (key == "upper_arm") model.upper_arm = value.get<double>();
        else if (key == "forearm") model.forearm = value.get<double>();
        else if (key == "elbow_lo") model.elbow_lo = value.get<double>();
        else if (key == "elbow_hi") model.elbow_hi = value.get<double>();
        else if (key == "shoulder_lo") model.shoulder_lo = value.get<double>();
        else if (key == "shoulder_hi") model.shoulder_hi = value.get<double>();
        else throw ConfigError(skel_path.string() + ": unknown field '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw IoError(skel_path.string() + ": " + e.what());
    }
  }

  const std::string arm_name = cfg.get_string("retarget_arm");
  if (arm_name != "right" && arm_name != "left")
    throw ConfigError("retarget_arm must be 'right' or 'left', got '" + arm_name + "'");
  const kinematics::Arm arm =
      arm_name == "right" ? kinematics::Arm::kRight : kinematics::Arm::kLeft;

  const kinematics::KeypointMotion motion = kinematics::load_motion(motion_path);
  if (motion.frames.size() < 2)
    throw TooShortError(motion_path.string() + ": a motion needs at least 2 frames");

  const kinematics::RetargetedTrajectory rt =
      kinematics::retarget_to_elbow(motion, model, arm, kinematics::Mat3::identity());
  const Trajectory elbow = dataset::extract_trajectory(rt.angles, rt.dt);

  fs::create_directories(out);
  dataset::write_trajectory_csv(out / "retarget_elbow.csv", elbow);

  std::vector<std::string> header{"t"};
  for (std::size_t d = 0; d < kinematics::HumanModel::kDofs; ++d)
    header.push_back("q" + std::to_string(d));
  std::vector<std::vector<double>> rows;
  std::vector<double> times, residuals;
  for (std::size_t k = 0; k < rt.joints.size(); ++k) {
    std::vector<double> row{static_cast<double>(k) * rt.dt};
    row.insert(row.end(), rt.joints[k].begin(), rt.joints[k].end());
    rows.push_back(std::move(row));
    times.push_back(static_cast<double>(k) * rt.dt);
    residuals.push_back(rt.residuals[k]);
  }
  write_csv(out / "retarget_joints.csv", header, rows);
  simcontrol::write_series(out / "retarget_residuals.txt", times, residuals);

  json report;
  report["frames"] = rt.angles.size();
  report["unconverged_frames"] = rt.unconverged_frames;
  report["max_residual"] = *std::max_element(rt.residuals.begin(), rt.residuals.end());
  report["dt"] = rt.dt;
  report["arm"] = arm_name;
  write_json(out / "retarget_report.json", report);
  std::cout << "retargeted " << rt.angles.size() << " frames ("
            << rt.unconverged_frames << " unconverged)\n";
}

void cmd_synth(const RunConfig& cfg, const fs::path& out) {
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const dataset::MetaDataset train = dataset::build_corpus(
      static_cast<int>(cfg.get_int("synth_train_tasks")),
      static_cast<int>(cfg.get_int("synth_traj_per_task")), cfg.get_double("synth_dt"),
      cfg.get_double("synth_noise_sigma"), static_cast<int>(cfg.get_int("synth_subjects")),
      seed, "train");
  const dataset::MetaDataset heldout = dataset::build_corpus(
      static_cast<int>(cfg.get_int("synth_heldout_tasks")),
      static_cast<int>(cfg.get_int("synth_heldout_traj_per_task")),
      cfg.get_double("synth_dt"), cfg.get_double("synth_noise_sigma"),
      static_cast<int>(cfg.get_int("synth_subjects")), seed, "heldout");

  fs::create_directories(out);
  dataset::write_dataset(out / "dataset_train", train);
  dataset::write_dataset(out / "dataset_heldout", heldout);
  std::cout << "synthesized " << train.tasks.size() << " training and "
            << heldout.tasks.size() << " held-out tasks\n";
}

void cmd_train(const RunConfig& cfg, const fs::path& out) {
  const fs::path dataset_dir = required_path(cfg, "dataset_dir", "train");
  const dataset::MetaDataset data = dataset::read_dataset(dataset_dir);
  const TaskNet net(tasknet::meta_config_from(cfg));

  fs::create_directories(out / "checkpoints");
  const std::map<std::string, std::string> echo = echo_map(cfg);

  meta::TrainOptions opt;
  opt.iterations = static_cast<int>(cfg.get_int("meta_iterations"));
  opt.meta_batch = static_cast<int>(cfg.get_int("meta_batch"));
  opt.support_fraction = cfg.get_double("support_fraction");
  opt.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  opt.workers = static_cast<int>(cfg.get_int("workers"));
  opt.checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every"));
  opt.on_checkpoint = [&](const meta::MetaState& state) {
    autodiff::save_checkpoint(out / "checkpoints" / checkpoint_name(state.iteration),
                              state.params, echo);
  };

  const meta::MetaState state = meta::meta_train(net, data, opt);
  autodiff::save_checkpoint(out / "theta_star.json", state.params, echo);

  std::vector<std::vector<double>> rows;
  rows.reserve(state.query_history.size());
  for (std::size_t i = 0; i < state.query_history.size(); ++i)
    rows.push_back({static_cast<double>(i + 1), state.query_history[i],
                    state.support_history[i]});
  write_csv(out / "train_log.csv", {"iter", "mean_query_loss", "mean_support_loss"},
            rows);
  std::cout << "meta-trained " << state.iteration << " iterations, final query loss "
            << state.query_history.back() << "\n";
}

void cmd_adapt(const RunConfig& cfg, const fs::path& out) {
  const fs::path ck_path = required_path(cfg, "checkpoint", "adapt");
  const fs::path demo_path = required_path(cfg, "demo", "adapt");
  LoadedNet loaded = net_from_checkpoint(ck_path);
  const Trajectory demo = dataset::read_trajectory_csv(demo_path);

  const int steps = static_cast<int>(cfg.get_int("inner_steps_deploy"));
  const meta::AdaptationReport report =
      meta::online_adapt(loaded.net, loaded.params, demo, steps);

  fs::create_directories(out);
  autodiff::save_checkpoint(out / "adapted.json", report.adapted, loaded.config);

  json j;
  j["steps"] = report.steps;
  j["pre_loss"] = report.pre_loss;
  j["step_losses"] = report.step_losses;
  j["final_loss"] = report.step_losses.empty() ? report.pre_loss
                                               : report.step_losses.back();
  j["config"] = loaded.config;
  write_json(out / "adapt_report.json", j);
  std::cout << "adapted " << report.steps << " steps, demo loss " << report.pre_loss
            << " -> " << j["final_loss"].get<double>() << "\n";
}

void cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  const fs::path ck_path = required_path(cfg, "checkpoint", "simulate");
  const fs::path demo_path = required_path(cfg, "demo", "simulate");
  LoadedNet loaded = net_from_checkpoint(ck_path);
  const Trajectory demo = dataset::read_trajectory_csv(demo_path);

  const Trajectory ref =
      rollout_reference(loaded.net, loaded.params, demo,
                        static_cast<int>(cfg.get_int("rollout_steps")));
  simcontrol::SimState init;
  init.q = ref.samples.front().angle;
  init.qd = ref.samples.front().velocity;
  const simcontrol::SimTrace trace =
      simcontrol::simulate_tracking(plant_from(cfg), gains_from(cfg), comp_from(cfg),
                                    ref, init, cfg.get_double("sim_dt"));

  fs::create_directories(out);
  dataset::write_trajectory_csv(out / "reference.csv", ref);
  simcontrol::write_trace_csv(out / "trace.csv", trace);
  std::vector<double> ts, qd_series, qr_series;
  for (const simcontrol::TraceSample& s : trace.samples) {
    ts.push_back(s.t);
    qd_series.push_back(s.q_d);
    qr_series.push_back(s.q_r);
  }
  simcontrol::write_series(out / "plot_reference.txt", ts, qd_series);
  simcontrol::write_series(out / "plot_tracked.txt", ts, qr_series);

  double max_tau = 0.0;
  for (const simcontrol::TraceSample& s : trace.samples)
    max_tau = std::max(max_tau, std::abs(s.tau));
  json j;
  j["samples"] = trace.samples.size();
  j["dt"] = trace.dt;
  j["rms"] = simcontrol::rms_error(trace);
  j["final_abs_error"] = std::abs(trace.samples.back().e);
  j["max_abs_torque"] = max_tau;
  write_json(out / "sim_report.json", j);
  std::cout << "simulated " << trace.samples.size() << " samples, rms "
            << j["rms"].get<double>() << " rad\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& out) {
  const fs::path ck_path = required_path(cfg, "checkpoint", "eval");
  const fs::path dataset_dir = required_path(cfg, "dataset_dir", "eval");
  const LoadedNet loaded = net_from_checkpoint(ck_path);
  const dataset::MetaDataset data = dataset::read_dataset(dataset_dir);
  if (data.tasks.empty()) throw TooFewTrajectoriesError("eval dataset has no tasks");

  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const int steps = static_cast<int>(cfg.get_int("inner_steps_deploy"));
  const auto n_tracked = std::min<std::size_t>(
      data.tasks.size(), static_cast<std::size_t>(cfg.get_int("eval_tracking_tasks")));
  const simcontrol::PlantModel plant = plant_from(cfg);
  const simcontrol::ControllerGains gains = gains_from(cfg);
  const simcontrol::GravityCompensator comp = comp_from(cfg);

  struct TaskOutcome {
    std::string id;
    double adapted_mse = 0.0;
    double random_mse = 0.0;
    double ratio = 0.0;
    bool win = false;
    bool tracked = false;
    double rms = 0.0;
  };
  std::vector<TaskOutcome> outcomes(data.tasks.size());

  run_indexed(static_cast<int>(cfg.get_int("workers")), data.tasks.size(),
              [&](std::size_t i) {
    const dataset::TaskDataset& task = data.tasks[i];
    if (task.trajectories.size() < 2)
      throw TooFewTrajectoriesError("eval task " + task.task_id +
                                    " needs a demo and at least one query trajectory");
    const Trajectory& demo = task.trajectories.front();
    const std::vector<Trajectory> queries(task.trajectories.begin() + 1,
                                          task.trajectories.end());

    const ParamSet adapted =
        meta::online_adapt(loaded.net, loaded.params, demo, steps).adapted;
    const ParamSet random_init =
        loaded.net.init_params(Rng::derive(seed, {0x5EEDu, i}));
    const ParamSet random_adapted =
        meta::online_adapt(loaded.net, random_init, demo, steps).adapted;

    TaskOutcome& o = outcomes[i];
    o.id = task.task_id;
    o.adapted_mse = query_mse(loaded.net, adapted, demo, queries);
    o.random_mse = query_mse(loaded.net, random_adapted, demo, queries);
    o.ratio = o.adapted_mse / o.random_mse;
    o.win = o.adapted_mse < o.random_mse;

    if (i < n_tracked) {
      const Trajectory ref = rollout_reference(loaded.net, adapted, demo, 0);
      simcontrol::SimState init;
      init.q = ref.samples.front().angle;
      init.qd = ref.samples.front().velocity;
      const simcontrol::SimTrace trace = simcontrol::simulate_tracking(
          plant, gains, comp, ref, init, cfg.get_double("sim_dt"));
      o.tracked = true;
      o.rms = simcontrol::rms_error(trace);
    }
  });

  std::size_t wins = 0;
  double ratio_sum = 0.0, rms_sum = 0.0, rms_max = 0.0;
  for (const TaskOutcome& o : outcomes) {
    wins += o.win ? 1 : 0;
    ratio_sum += o.ratio;
    if (o.tracked) {
      rms_sum += o.rms;
      rms_max = std::max(rms_max, o.rms);
    }
  }
  const double win_fraction = static_cast<double>(wins) /
                              static_cast<double>(outcomes.size());
  const double mean_ratio = ratio_sum / static_cast<double>(outcomes.size());
  const double mean_rms =
      n_tracked > 0 ? rms_sum / static_cast<double>(n_tracked) : 0.0;

  json j;
  j["instances"] = outcomes.size();
  j["adaptation"] = {{"wins", wins},
                     {"win_fraction", win_fraction},
                     {"mean_loss_ratio", mean_ratio}};
  j["tracking"] = {{"tasks", n_tracked}, {"mean_rms", mean_rms}, {"max_rms", rms_max}};
  json per_task = json::array();
  for (const TaskOutcome& o : outcomes) {
    json row;
    row["task_id"] = o.id;
    row["adapted_mse"] = o.adapted_mse;
    row["random_mse"] = o.random_mse;
    row["loss_ratio"] = o.ratio;
    row["win"] = o.win;
    if (o.tracked) row["rms"] = o.rms;
    per_task.push_back(std::move(row));
  }
  j["per_task"] = std::move(per_task);
  j["config"] = echo_json(cfg);
  fs::create_directories(out);
  write_json(out / "eval.json", j);

  std::string md;
  md += "# Evaluation report\n\n";
  md += "## Adaptation gain\n\n";
  md += "Adaptation from the meta-initialization beat adaptation from a random\n";
  md += "initialization on " + std::to_string(wins) + " of " +
        std::to_string(outcomes.size()) + " held-out tasks (win fraction " +
        format_double(win_fraction) + ", mean query-loss ratio " +
        format_double(mean_ratio) + ").\n\n";
  md += "## Tracking\n\n";
  md += "Mean RMS tracking error over " + std::to_string(n_tracked) +
        " simulated rollout references: " + format_double(mean_rms) + " rad (max " +
        format_double(rms_max) + " rad).\n\n";
  md += "## Per-task results\n\n";
  md += "| task | adapted MSE | random MSE | ratio | win | RMS (rad) |\n";
  md += "|------|-------------|------------|-------|-----|-----------|\n";
  for (const TaskOutcome& o : outcomes) {
    md += "| " + o.id + " | " + format_double(o.adapted_mse) + " | " +
          format_double(o.random_mse) + " | " + format_double(o.ratio) + " | " +
          (o.win ? "yes" : "no") + " | " + (o.tracked ? format_double(o.rms) : "-") +
          " |\n";
  }
  write_text_file(out / "eval.md", md);
  std::cout << "evaluated " << outcomes.size() << " tasks: win fraction "
            << win_fraction << ", mean ratio " << mean_ratio << ", mean rms "
            << mean_rms << " rad\n";
}

void cmd_export_latents(const RunConfig& cfg, const fs::path& out) {
  const fs::path ck_path = required_path(cfg, "checkpoint", "export-latents");
  const fs::path dataset_dir = required_path(cfg, "dataset_dir", "export-latents");
  const LoadedNet loaded = net_from_checkpoint(ck_path);
  const dataset::MetaDataset data = dataset::read_dataset(dataset_dir);

  const int latent_dim = loaded.net.config().latent_dim;
  std::string csv = "task_id,subject_id";
  for (int d = 0; d < latent_dim; ++d) csv += ",z" + std::to_string(d);
  csv += '\n';
  std::size_t rows = 0;
  for (const dataset::TaskDataset& task : data.tasks) {
    for (const Trajectory& traj : task.trajectories) {
      const std::vector<double> z = latent_of(loaded.net, loaded.params, traj);
      csv += task.task_id + ',' + traj.subject_id;
      for (double v : z) {
        csv += ',';
        csv += format_double(v);
      }
      csv += '\n';
      ++rows;
    }
  }
  fs::create_directories(out);
  write_text_file(out / "latents.csv", csv);
  std::cout << "exported " << rows << " latent codes\n";
}

namespace {

void append_log(const fs::path& out, const std::string& line) {
  std::ofstream f(out / "run.log", std::ios::app);
  // timestamps live here and nowhere else
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  f << buf << ' ' << line << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"meta-imitation learning toolkit for a single-joint exoskeleton"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_file, out_dir = "out", seed, workers;
  std::string motion, skeleton, dataset_dir, checkpoint, demo;
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--seed", seed, "override the run seed");
  app.add_option("--out", out_dir, "output directory (default: out)");

  CLI::App* retarget =
      app.add_subcommand("retarget", "turn a keypoint motion into an elbow trajectory");
  retarget->add_option("--motion", motion, "keypoint motion JSON file");
  retarget->add_option("--skeleton", skeleton, "skeleton parameter JSON file");
  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic task corpora");
  CLI::App* train = app.add_subcommand("train", "meta-train the task network");
  train->add_option("--dataset", dataset_dir, "dataset directory");
  CLI::App* adapt =
      app.add_subcommand("adapt", "adapt a checkpoint to a demonstration");
  adapt->add_option("--checkpoint", checkpoint, "checkpoint JSON file");
  adapt->add_option("--demo", demo, "demonstration trajectory CSV");
  CLI::App* simulate =
      app.add_subcommand("simulate", "track an adapted rollout on the simulated joint");
  simulate->add_option("--checkpoint", checkpoint, "adapted checkpoint JSON file");
  simulate->add_option("--demo", demo, "demonstration trajectory CSV");
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "held-out adaptation and tracking report");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint JSON file");
  eval_cmd->add_option("--dataset", dataset_dir, "held-out dataset directory");
  CLI::App* latents =
      app.add_subcommand("export-latents", "write per-trajectory latent codes");
  latents->add_option("--checkpoint", checkpoint, "checkpoint JSON file");
  latents->add_option("--dataset", dataset_dir, "dataset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const fs::path out = out_dir;
  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    cfg.apply_env();
    if (!seed.empty()) cfg.set("seed", seed);
    if (!motion.empty()) cfg.set("motion", motion);
    if (!skeleton.empty()) cfg.set("skeleton_config", skeleton);
    if (!dataset_dir.empty()) cfg.set("dataset_dir", dataset_dir);
    if (!checkpoint.empty()) cfg.set("checkpoint", checkpoint);
    if (!demo.empty()) cfg.set("demo", demo);
    cfg.validate_paths();
    fs::create_directories(out);

    if (app.got_subcommand(retarget)) cmd_retarget(cfg, out);
    else if (app.got_subcommand(synth)) cmd_synth(cfg, out);
    else if (app.got_subcommand(train)) cmd_train(cfg, out);
    else if (app.got_subcommand(adapt)) cmd_adapt(cfg, out);
    else if (app.got_subcommand(simulate)) cmd_simulate(cfg, out);
    else if (app.got_subcommand(eval_cmd)) cmd_eval(cfg, out);
    else if (app.got_subcommand(latents)) cmd_export_latents(cfg, out);

    append_log(out, name + " ok");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!ec) append_log(out, name + " failed: " + std::string(e.what()));
    return 1;
  }
}

}  // namespace metaexo::cli
