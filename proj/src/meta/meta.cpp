#include "metaexo/meta/meta.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <thread>
#include <utility>

#include "metaexo/common/error.hpp"
#include "metaexo/common/rng.hpp"

namespace metaexo::meta {

namespace {

std::vector<Var> vars_of(const ParamVars& p) {
  std::vector<Var> out;
  out.reserve(p.items.size());
  for (const auto& [name, v] : p.items) out.push_back(v);
  return out;
}

struct TaskOutcome {
  std::vector<Tensor> grads;
  double query_loss = 0.0;
  double support_loss = 0.0;
  std::exception_ptr error;
};

TaskOutcome run_task(const ParamSet& theta, const TaskLoss& task, double alpha,
                     int inner_steps, bool second_order) {
  TaskOutcome out;
  try {
    Tape t;
    ParamVars p = autodiff::lift(t, theta, true);
    std::vector<double> step_losses;
    ParamVars adapted =
        inner_adapt(t, p, task.support, alpha, inner_steps, second_order, &step_losses);
    out.support_loss = step_losses.front();
    Var query = task.query(t, adapted);
    out.query_loss = t.value(query);
    if (!std::isfinite(out.query_loss))
      throw NaNDetectedError("query loss is non-finite");
    const std::vector<Var> gs = t.grad(query, vars_of(p));
    out.grads.reserve(gs.size());
    for (Var g : gs) out.grads.push_back(t.tensor(g));
  } catch (...) {
    out.error = std::current_exception();
  }
  return out;
}

}  // namespace

ParamVars inner_adapt(Tape& t, const ParamVars& theta, const LossFn& loss, double alpha,
                      int steps, bool second_order, std::vector<double>* step_losses) {
  if (!(alpha > 0.0)) throw Error("inner_adapt needs alpha > 0");
  if (steps < 1) throw Error("inner_adapt needs steps >= 1");
  ParamVars cur = theta;
  for (int s = 0; s < steps; ++s) {
    Var l = loss(t, cur);
    const double lv = t.value(l);
    if (!std::isfinite(lv))
      throw NaNDetectedError("inner adaptation step " + std::to_string(s) +
                             " produced a non-finite loss");
    if (step_losses) step_losses->push_back(lv);
    const std::vector<Var> gs = t.grad(l, vars_of(cur), second_order);
    ParamVars next;
    next.items.reserve(cur.items.size());
    for (std::size_t i = 0; i < cur.items.size(); ++i)
      next.items.emplace_back(cur.items[i].first,
                              t.sub(cur.items[i].second, t.mul_scalar(gs[i], alpha)));
    cur = std::move(next);
  }
  return cur;
}

MetaGrad meta_gradient(const ParamSet& theta, const std::vector<TaskLoss>& batch,
                       double alpha, int inner_steps, bool second_order, int workers) {
  if (batch.empty()) throw Error("meta_gradient needs a non-empty task batch");
  if (workers < 1) throw Error("meta_gradient needs workers >= 1");

  std::vector<TaskOutcome> outcomes(batch.size());
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), batch.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i)
      outcomes[i] = run_task(theta, batch[i], alpha, inner_steps, second_order);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t tid = 0; tid < n_threads; ++tid)
      pool.emplace_back([&, tid] {
        for (std::size_t i = tid; i < batch.size(); i += n_threads)
          outcomes[i] = run_task(theta, batch[i], alpha, inner_steps, second_order);
      });
    for (std::thread& th : pool) th.join();
  }
  for (const TaskOutcome& o : outcomes)
    if (o.error) std::rethrow_exception(o.error);

  // reduce in batch order; worker count must not change the result
  MetaGrad out;
  out.grads = outcomes[0].grads;
  out.query_loss_sum = outcomes[0].query_loss;
  out.support_loss_mean = outcomes[0].support_loss;
  for (std::size_t i = 1; i < outcomes.size(); ++i) {
    for (std::size_t j = 0; j < out.grads.size(); ++j)
      for (std::size_t k = 0; k < out.grads[j].data.size(); ++k)
        out.grads[j].data[k] += outcomes[i].grads[j].data[k];
    out.query_loss_sum += outcomes[i].query_loss;
    out.support_loss_mean += outcomes[i].support_loss;
  }
  out.query_loss_mean = out.query_loss_sum / static_cast<double>(batch.size());
  out.support_loss_mean /= static_cast<double>(batch.size());
  return out;
}

void meta_step(MetaState& state, const std::vector<TaskLoss>& batch, double alpha,
               double gamma, bool second_order, int inner_steps, int workers) {
  MetaGrad mg = meta_gradient(state.params, batch, alpha, inner_steps, second_order,
                              workers);
  for (const Tensor& g : mg.grads)
    for (double v : g.data)
      if (!std::isfinite(v)) throw NaNDetectedError("meta gradient is non-finite");
  state.outer.step(state.params, mg.grads, gamma);
  state.query_history.push_back(mg.query_loss_mean);
  state.support_history.push_back(mg.support_loss_mean);
  ++state.iteration;
}

MetaState meta_train(const tasknet::TaskNet& net, const dataset::MetaDataset& data,
                     const TrainOptions& opt) {
  if (data.tasks.size() < 2) throw TooFewTrajectoriesError("meta training needs >= 2 tasks");
  if (opt.iterations < 1) throw Error("meta training needs iterations >= 1");
  if (opt.meta_batch < 1) throw Error("meta training needs meta_batch >= 1");
  const tasknet::MetaConfig& cfg = net.config();

  struct Split {
    dataset::TaskDataset support;
    dataset::TaskDataset query;
  };
  std::vector<Split> splits;
  splits.reserve(data.tasks.size());
  for (std::size_t m = 0; m < data.tasks.size(); ++m) {
    auto [s, q] = dataset::split_support_query(data.tasks[m], opt.support_fraction,
                                               Rng::derive(opt.seed, {1, m}));
    splits.push_back({std::move(s), std::move(q)});
  }

  MetaState state;
  state.seed = opt.seed;
  state.params = net.init_params(Rng::derive(opt.seed, {0}));
  Rng sampler(Rng::derive(opt.seed, {2}));

  for (int iter = 0; iter < opt.iterations; ++iter) {
    std::vector<TaskLoss> batch;
    batch.reserve(opt.meta_batch);
    for (int b = 0; b < opt.meta_batch; ++b) {
      const std::size_t m = static_cast<std::size_t>(
          sampler.uniform_int(0, static_cast<std::int64_t>(data.tasks.size()) - 1));
      const Split& split = splits[m];
      const auto& s_traj = split.support.trajectories[static_cast<std::size_t>(
          sampler.uniform_int(0, static_cast<std::int64_t>(split.support.trajectories.size()) - 1))];
      const auto& q_traj = split.query.trajectories[static_cast<std::size_t>(
          sampler.uniform_int(0, static_cast<std::int64_t>(split.query.trajectories.size()) - 1))];
      const std::uint64_t s_seed = Rng::derive(
          opt.seed, {3, static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(b), 0});
      const std::uint64_t q_seed = Rng::derive(
          opt.seed, {3, static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(b), 1});
      batch.push_back(
          {[&net, &s_traj, &cfg, s_seed](Tape& t, const ParamVars& p) {
             return net.loss_train(t, p, s_traj, cfg.beta, cfg.denoise_sigma,
                                   tasknet::LatentMode::kStochastic, s_seed);
           },
           [&net, &q_traj, &cfg, q_seed](Tape& t, const ParamVars& p) {
             return net.loss_train(t, p, q_traj, cfg.beta, cfg.denoise_sigma,
                                   tasknet::LatentMode::kStochastic, q_seed);
           }});
    }
    meta_step(state, batch, cfg.alpha, cfg.gamma, cfg.second_order,
              cfg.inner_steps_train, opt.workers);
    if (opt.checkpoint_every > 0 && opt.on_checkpoint &&
        (state.iteration % opt.checkpoint_every == 0 || iter + 1 == opt.iterations))
      opt.on_checkpoint(state);
  }
  return state;
}

AdaptationReport online_adapt(const tasknet::TaskNet& net, const ParamSet& theta,
                              const dataset::Trajectory& demo, int steps) {
  const tasknet::MetaConfig& cfg = net.config();
  const int n = steps < 0 ? cfg.inner_steps_deploy : steps;

  const auto demo_loss = [&](const ParamSet& params) {
    Tape t;
    ParamVars p = autodiff::lift(t, params, false);
    return t.value(
        net.loss_total(t, p, demo, cfg.beta, tasknet::LatentMode::kDeterministic));
  };

  AdaptationReport report;
  report.adapted = theta;
  report.pre_loss = demo_loss(theta);
  report.steps = n;
  for (int s = 0; s < n; ++s) {
    // one first-order step per tape keeps deployment memory flat
    Tape t;
    ParamVars p = autodiff::lift(t, report.adapted, true);
    Var l = net.loss_total(t, p, demo, cfg.beta, tasknet::LatentMode::kDeterministic);
    if (!std::isfinite(t.value(l)))
      throw NaNDetectedError("adaptation step " + std::to_string(s) +
                             " produced a non-finite loss");
    const std::vector<Var> gs = t.grad(l, vars_of(p));
    std::vector<Tensor> tensors;
    tensors.reserve(gs.size());
    for (Var g : gs) tensors.push_back(t.tensor(g));
    autodiff::sgd_step(report.adapted, tensors, cfg.alpha);
    report.step_losses.push_back(demo_loss(report.adapted));
  }
  return report;
}

}  // namespace metaexo::meta
