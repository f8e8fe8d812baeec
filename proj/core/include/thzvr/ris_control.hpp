// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "thzvr/channel.hpp"
#include "thzvr/geometry.hpp"
#include "thzvr/nn/layers.hpp"
#include "thzvr/nn/optim.hpp"
#include "thzvr/phy.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::ris {

using phy::PhaseConfig;

// --- codebook ---------------------------------------------------------------------------------

struct ActionCodebook {
  std::vector<PhaseConfig> entries;
  bool full_space = false;  // entries enumerate every configuration
  bool truncated = false;   // fewer steering entries than users fit

  std::size_t size() const { return entries.size(); }
  const PhaseConfig& operator[](std::size_t i) const { return entries.at(i); }
};

/// Per-element phases that co-phase user b's RIS cascade: theta_n = -arg(conj(g_b,n) (G_down r)_n)
/// with r the conjugate of G_down's strongest row. Quantized to `bits`.
PhaseConfig steering_config(const channel::ChannelSet& ch, std::size_t user, int bits);

/// Builds per-slot codebooks of a fixed size A:
///   index 0            the all-zero configuration
///   indices 1..K       one steering entry per user (recomputed every slot)
///   the rest           random configurations drawn once at construction
/// When 2^(bN) <= A every configuration is listed instead (lexicographic order) and the size is 2^(bN).
/// Duplicate steering entries are replaced by spare random configurations so entries stay distinct.
class CodebookBuilder {
 public:
  CodebookBuilder(std::size_t elements, int bits, std::size_t size, std::size_t users, Rng& rng);

  /// Codebook for the given steering entries (one per user, in user order).
  ActionCodebook build(const std::vector<PhaseConfig>& steering) const;
  /// Steering entries from the channels, then build().
  ActionCodebook build(const channel::ChannelSet& ch) const;

  std::size_t size() const { return size_; }
  bool full_space() const { return full_space_; }

 private:
  std::size_t elements_;
  int bits_;
  std::size_t size_;
  std::size_t users_;
  bool full_space_ = false;
  std::vector<PhaseConfig> pool_;  // random entries plus spares
};

// --- state, reward, cost ----------------------------------------------------------------------

struct NetworkState {
  std::vector<double> features;  // 3K positions, K flags, K QoE values

  std::size_t users() const { return features.size() / 5; }
};

/// Positions normalised by (width, width, height), LoS flags as 1/0, previous QoE clamped to
/// [q_min, q_max].
NetworkState encode_state(const std::vector<geometry::Position3>& positions,
                          const std::vector<geometry::LinkState>& predicted_flags,
                          const std::vector<double>& prev_qoe, const geometry::Room& room, double q_min,
                          double q_max);

double compute_reward(const std::vector<double>& qoe);

struct Cost {
  double violation = 0.0;  // max(0, mean latency - t_th), drives the multiplier
  double signed_form = 0.0;  // t_th - mean latency, logged only
};
Cost compute_cost(const std::vector<double>& latencies, double t_th);

/// (1 - alpha) q_eval + alpha q_target: the tabular blend of the Bellman update.
inline double blended_q(double alpha, double q_eval, double q_target) {
  return (1.0 - alpha) * q_eval + alpha * q_target;
}

// --- agent ------------------------------------------------------------------------------------

struct Transition {
  NetworkState state;
  std::size_t action = 0;
  double reward = 0.0;
  double cost = 0.0;  // violation form
  NetworkState next;
  bool terminal = false;
};

/// Bounded FIFO ring.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const;  // 0 = oldest
  double mean_cost() const;
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest element once full
  std::vector<Transition> data_;
  double cost_sum_ = 0.0;
};

struct AgentConfig {
  std::size_t hidden = 128;
  std::size_t hidden_layers = 2;
  double gamma = 0.9;
  double lr = 0.05;             // alpha_CDQN: Adam step and multiplier step
  double multiplier_lr = 0.05;
  std::size_t replay_capacity = 10000;
  std::size_t minibatch = 64;
  std::size_t warmup = 500;     // random-action slots before training
  std::size_t target_period = 50;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_horizon = 15000;  // slots after warm-up to reach epsilon_end
  double qoe_scale = 20.0;       // divides the QoE part of the state before the network
  double reward_scale = 1.0;     // divides rewards and costs inside the targets
  double grad_clip = 10.0;       // global norm; 0 disables
};

/// Constrained deep-Q agent over a fixed number of codebook actions.
class CdqnAgent {
 public:
  CdqnAgent(const AgentConfig& cfg, std::size_t state_dim, std::size_t actions, std::uint64_t seed);

  /// Q-values of every action (eval network).
  std::vector<double> q_values(const NetworkState& s) const;
  std::vector<double> target_q_values(const NetworkState& s) const;

  /// Exploration rate for the current step count.
  double epsilon() const;
  /// Epsilon-greedy choice at the current rate; advances the step counter.
  std::size_t act(const NetworkState& s, Rng& rng);
  std::size_t greedy(const NetworkState& s) const;

  void store(Transition t);
  /// One gradient step on a replay minibatch once warm-up is over; syncs the target network every
  /// target_period steps. Returns the loss, or nullopt when no step was taken.
  std::optional<double> train_step(Rng& rng);
  /// Gradient step on an explicit batch (no warm-up gate, no target sync).
  double train_on(const std::vector<const Transition*>& batch);
  /// lambda <- max(0, lambda + multiplier_lr * mean stored cost).
  void update_multiplier();
  void sync_target();

  /// Bellman target of one transition with the current target network and multiplier.
  double target(const Transition& t) const;

  double multiplier() const { return lambda_; }
  void set_multiplier(double v);
  std::size_t steps() const { return steps_; }
  std::size_t train_steps() const { return train_steps_; }
  std::size_t target_syncs() const { return syncs_; }
  std::size_t actions() const { return actions_; }
  const ReplayMemory& replay() const { return replay_; }
  nn::Sequential& eval_net() { return eval_; }
  const nn::Sequential& eval_net() const { return eval_; }
  const nn::Sequential& target_net() const { return target_; }
  const AgentConfig& config() const { return cfg_; }

  void save(const std::filesystem::path& path) const;

 private:
  nn::RowMatrix input(const NetworkState& s) const;

  AgentConfig cfg_;
  std::size_t state_dim_;
  std::size_t actions_;
  nn::Sequential eval_;
  nn::Sequential target_;
  nn::Adam adam_;
  ReplayMemory replay_;
  double lambda_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t train_steps_ = 0;
  std::size_t syncs_ = 0;
};

/// Epsilon-greedy over explicit Q-values; ties go to the lowest index.
std::size_t select_action(const std::vector<double>& q, double epsilon, Rng& rng);
std::size_t argmax_lowest(const std::vector<double>& q);

// --- baselines --------------------------------------------------------------------------------

enum class ExhaustiveScope { Auto, Full, Codebook };

struct ExhaustiveResult {
  PhaseConfig config;
  double reward = 0.0;
  std::uint64_t evaluated = 0;
  std::optional<std::size_t> codebook_index;  // set when the codebook was enumerated
};

inline constexpr std::uint64_t kExhaustiveGuard = 1ULL << 20;

/// Maximises `reward` over the full 2^(bN) space (Auto when within `guard`, or Full, which throws
/// ContractError above the guard) or over the codebook. Ties keep the first configuration seen.
ExhaustiveResult exhaustive_select(std::size_t elements, int bits, const ActionCodebook& codebook,
                                   const std::function<double(const PhaseConfig&)>& reward,
                                   ExhaustiveScope scope = ExhaustiveScope::Auto,
                                   std::uint64_t guard = kExhaustiveGuard);

/// Uniform codebook index.
std::size_t random_select(const ActionCodebook& codebook, Rng& rng);

}  // namespace thzvr::ris
