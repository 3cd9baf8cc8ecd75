#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "metaexo/autodiff/optim.hpp"
#include "metaexo/autodiff/ops.hpp"
#include "metaexo/autodiff/paramset.hpp"
#include "metaexo/autodiff/tape.hpp"
#include "metaexo/dataset/dataset.hpp"
#include "metaexo/tasknet/tasknet.hpp"

namespace metaexo::meta {

using autodiff::ParamSet;
using autodiff::ParamVars;
using autodiff::Tape;
using autodiff::Tensor;
using autodiff::Var;

/// A scalar training objective over named parameters, built on the caller's
/// tape. Losses close over their data; they must stay valid and const while
/// shared across worker threads.
using LossFn = std::function<Var(Tape&, const ParamVars&)>;

struct TaskLoss {
  LossFn support;
  LossFn query;
};

/// `steps` on-tape gradient descent updates on `loss`. With second_order the
/// returned parameters keep graph links into `theta`, so an outer gradient
/// differentiates through the update; otherwise the update direction is
/// detached and only the identity path remains (first-order mode).
ParamVars inner_adapt(Tape& t, const ParamVars& theta, const LossFn& loss, double alpha,
                      int steps, bool second_order,
                      std::vector<double>* step_losses = nullptr);

struct MetaGrad {
  std::vector<Tensor> grads;   // aligned with the ParamSet order
  double query_loss_sum = 0.0;
  double query_loss_mean = 0.0;
  double support_loss_mean = 0.0;  // pre-update support loss, averaged over tasks
};

/// Gradient of sum_m L_query_m(adapted(theta)) with respect to theta. Each
/// task runs on its own tape; task gradients are reduced in batch order, so
/// the result is identical for any worker count.
MetaGrad meta_gradient(const ParamSet& theta, const std::vector<TaskLoss>& batch,
                       double alpha, int inner_steps, bool second_order,
                       int workers = 1);

struct MetaState {
  ParamSet params;
  autodiff::Adam outer;
  long long iteration = 0;
  std::uint64_t seed = 0;
  std::vector<double> query_history;    // mean query loss per iteration
  std::vector<double> support_history;  // mean pre-update support loss
};

/// One outer update: meta-gradient over the batch, Adam step at rate gamma,
/// history append.
void meta_step(MetaState& state, const std::vector<TaskLoss>& batch, double alpha,
               double gamma, bool second_order, int inner_steps = 1, int workers = 1);

struct TrainOptions {
  int iterations = 800;
  int meta_batch = 4;
  double support_fraction = 0.5;
  std::uint64_t seed = 42;
  int checkpoint_every = 0;  // 0 disables the callback
  std::function<void(const MetaState&)> on_checkpoint;
  int workers = 1;
};

/// MAML training over the meta-dataset. Support/query splits are fixed per
/// task up front; every iteration samples tasks and trajectories with
/// replacement from a seeded stream, so a given seed reproduces the run
/// bit for bit.
MetaState meta_train(const tasknet::TaskNet& net, const dataset::MetaDataset& data,
                     const TrainOptions& opt);

struct AdaptationReport {
  double pre_loss = 0.0;
  std::vector<double> step_losses;  // loss after each gradient step
  int steps = 0;
  ParamSet adapted;
};

/// Deployment-time adaptation: first-order full-batch gradient steps on the
/// demonstration's loss with the deterministic latent. steps < 0 selects the
/// configured inner_steps_deploy.
AdaptationReport online_adapt(const tasknet::TaskNet& net, const ParamSet& theta,
                              const dataset::Trajectory& demo, int steps = -1);

}  // namespace metaexo::meta
