// SPDX-License-Identifier: Apache-2.0

#include "thzvr/ris_control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "thzvr/errors.hpp"

namespace thzvr::ris {

using geometry::LinkState;

// --- codebook ---------------------------------------------------------------------------------

PhaseConfig steering_config(const channel::ChannelSet& ch, std::size_t user, int bits) {
  if (user >= ch.users()) throw ContractError("steering_config: user out of range");
  const auto n = static_cast<std::size_t>(ch.g_down.rows());
  Eigen::Index strongest = 0;
  ch.g_down.rowwise().squaredNorm().maxCoeff(&strongest);
  const channel::CVector ris_side = ch.g_down * ch.g_down.row(strongest).adjoint();
  std::vector<double> phases(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = std::conj(ch.g[user][static_cast<Eigen::Index>(i)]) * ris_side[static_cast<Eigen::Index>(i)];
    phases[i] = -std::arg(c);
  }
  return phy::quantize(phases, bits);
}

namespace {

PhaseConfig random_config(std::size_t elements, int bits, Rng& rng) {
  std::uniform_int_distribution<int> level(0, (1 << bits) - 1);
  std::vector<std::uint16_t> levels(elements);
  for (auto& l : levels) l = static_cast<std::uint16_t>(level(rng));
  return PhaseConfig(bits, std::move(levels));
}

bool space_at_most(std::size_t elements, int bits, std::uint64_t limit) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < elements; ++i) {
    if (total > limit >> bits) return false;
    total <<= bits;
  }
  return total <= limit;
}

}  // namespace

CodebookBuilder::CodebookBuilder(std::size_t elements, int bits, std::size_t size, std::size_t users, Rng& rng)
    : elements_(elements), bits_(bits), size_(size), users_(users) {
  if (size < 2) throw ConfigError("codebook size must be at least 2");
  if (elements == 0) throw ConfigError("codebook needs at least one RIS element");
  phy::discrete_phase_set(bits);  // validates bits
  if (space_at_most(elements, bits, size)) {
    full_space_ = true;
    phy::enumerate_configs(elements, bits, size, [&](const PhaseConfig& c) { pool_.push_back(c); });
    size_ = pool_.size();
    return;
  }
  // size - 1 - K random entries plus K + 1 spares for duplicate steering entries.
  const std::size_t want = size;
  const PhaseConfig zero = PhaseConfig::zeros(elements, bits);
  std::set<PhaseConfig> seen{zero};
  while (pool_.size() < want) {
    PhaseConfig c = random_config(elements, bits, rng);
    if (seen.insert(c).second) pool_.push_back(std::move(c));
  }
}

ActionCodebook CodebookBuilder::build(const std::vector<PhaseConfig>& steering) const {
  ActionCodebook cb;
  if (full_space_) {
    cb.entries = pool_;
    cb.full_space = true;
    return cb;
  }
  const std::size_t steer = std::min(steering.size(), size_ - 1);
  cb.truncated = steer < steering.size() || steering.size() < users_;
  cb.entries.reserve(size_);
  cb.entries.push_back(PhaseConfig::zeros(elements_, bits_));
  std::set<PhaseConfig> used{cb.entries.front()};
  const std::size_t fill = size_ - 1 - steer;
  // pool_[0, fill) are the regular random entries, pool_[fill, end) the spares.
  std::size_t spare = fill;
  const auto next_spare = [&]() {
    while (spare < pool_.size() && used.count(pool_[spare])) ++spare;
    if (spare >= pool_.size()) throw ContractError("codebook: ran out of spare configurations");
    return pool_[spare++];
  };
  for (std::size_t k = 0; k < steer; ++k) {
    if (steering[k].size() != elements_ || steering[k].bits() != bits_) {
      throw ContractError("codebook: steering entry has the wrong shape");
    }
    PhaseConfig c = used.count(steering[k]) ? next_spare() : steering[k];
    used.insert(c);
    cb.entries.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < fill; ++i) {
    PhaseConfig c = used.count(pool_[i]) ? next_spare() : pool_[i];
    used.insert(c);
    cb.entries.push_back(std::move(c));
  }
  return cb;
}

ActionCodebook CodebookBuilder::build(const channel::ChannelSet& ch) const {
  if (full_space_) return build(std::vector<PhaseConfig>{});
  std::vector<PhaseConfig> steering;
  for (std::size_t k = 0; k < std::min(ch.users(), size_ - 1); ++k) steering.push_back(steering_config(ch, k, bits_));
  ActionCodebook cb = build(steering);
  cb.truncated = ch.users() > size_ - 1;
  return cb;
}

// --- state, reward, cost ----------------------------------------------------------------------

NetworkState encode_state(const std::vector<geometry::Position3>& positions,
                          const std::vector<LinkState>& predicted_flags, const std::vector<double>& prev_qoe,
                          const geometry::Room& room, double q_min, double q_max) {
  const std::size_t k = positions.size();
  if (predicted_flags.size() != k || prev_qoe.size() != k) throw ContractError("encode_state: inconsistent K");
  if (!(q_max > q_min)) throw ConfigError("encode_state: q_max must exceed q_min");
  NetworkState s;
  s.features.reserve(5 * k);
  for (const auto& p : positions) {
    s.features.push_back(p.x / room.width);
    s.features.push_back(p.y / room.width);
    s.features.push_back(p.z / room.height);
  }
  for (const auto f : predicted_flags) s.features.push_back(f == LinkState::LoS ? 1.0 : 0.0);
  for (const double q : prev_qoe) s.features.push_back(std::clamp(q, q_min, q_max));
  return s;
}

double compute_reward(const std::vector<double>& qoe) {
  double sum = 0.0;
  for (const double q : qoe) sum += q;
  return sum;
}

Cost compute_cost(const std::vector<double>& latencies, double t_th) {
  if (latencies.empty()) return {};
  double mean = 0.0;
  for (const double l : latencies) mean += l;
  mean /= static_cast<double>(latencies.size());
  return {std::max(0.0, mean - t_th), t_th - mean};
}

// --- replay -----------------------------------------------------------------------------------

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayMemory::push(Transition t) {
  cost_sum_ += t.cost;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  cost_sum_ -= data_[head_].cost;
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t i) const {
  if (i >= data_.size()) throw ContractError("replay index out of range");
  return data_[(head_ + i) % data_.size()];
}

double ReplayMemory::mean_cost() const {
  if (data_.empty()) return 0.0;
  return cost_sum_ / static_cast<double>(data_.size());
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  std::vector<const Transition*> out;
  if (data_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&data_[pick(rng)]);
  return out;
}

// --- agent ------------------------------------------------------------------------------------

std::size_t argmax_lowest(const std::vector<double>& q) {
  if (q.empty()) throw ContractError("argmax over an empty action set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

std::size_t select_action(const std::vector<double>& q, double epsilon, Rng& rng) {
  if (q.empty()) throw ContractError("select_action: no actions");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (epsilon > 0.0 && u(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, q.size() - 1);
    return pick(rng);
  }
  return argmax_lowest(q);
}

namespace {

nn::Sequential make_q_net(const AgentConfig& cfg, std::size_t state_dim, std::size_t actions, std::uint64_t seed) {
  nn::Sequential net(seed);
  net.input_features(state_dim);
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) net.dense(cfg.hidden).relu();
  net.dense(actions);
  return net;
}

}  // namespace

CdqnAgent::CdqnAgent(const AgentConfig& cfg, std::size_t state_dim, std::size_t actions, std::uint64_t seed)
    : cfg_(cfg),
      state_dim_(state_dim),
      actions_(actions),
      eval_(make_q_net(cfg, state_dim, actions, seed)),
      target_(eval_),
      adam_(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}),
      replay_(cfg.replay_capacity) {
  if (state_dim == 0 || actions == 0) throw ConfigError("agent needs a non-empty state and action set");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (cfg.minibatch == 0 || cfg.target_period == 0) throw ConfigError("minibatch and target period must be positive");
  if (!(cfg.epsilon_end >= 0.0 && cfg.epsilon_start <= 1.0 && cfg.epsilon_end <= cfg.epsilon_start)) {
    throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
  if (!(cfg.qoe_scale > 0) || !(cfg.reward_scale > 0)) throw ConfigError("agent scales must be positive");
}

nn::RowMatrix CdqnAgent::input(const NetworkState& s) const {
  if (s.features.size() != state_dim_) throw ContractError("agent: state has the wrong size");
  nn::RowMatrix x(1, static_cast<Eigen::Index>(state_dim_));
  const std::size_t k = state_dim_ / 5;
  for (std::size_t i = 0; i < state_dim_; ++i) {
    x(0, static_cast<Eigen::Index>(i)) = i >= 4 * k ? s.features[i] / cfg_.qoe_scale : s.features[i];
  }
  return x;
}

std::vector<double> CdqnAgent::q_values(const NetworkState& s) const {
  const nn::RowMatrix q = eval_.forward(input(s));
  return {q.data(), q.data() + q.size()};
}

std::vector<double> CdqnAgent::target_q_values(const NetworkState& s) const {
  const nn::RowMatrix q = target_.forward(input(s));
  return {q.data(), q.data() + q.size()};
}

double CdqnAgent::epsilon() const {
  if (steps_ < cfg_.warmup) return 1.0;
  if (steps_ - cfg_.warmup >= cfg_.epsilon_horizon) return cfg_.epsilon_end;
  const double frac = static_cast<double>(steps_ - cfg_.warmup) / static_cast<double>(cfg_.epsilon_horizon);
  return cfg_.epsilon_start + frac * (cfg_.epsilon_end - cfg_.epsilon_start);
}

std::size_t CdqnAgent::act(const NetworkState& s, Rng& rng) {
  const double eps = epsilon();
  ++steps_;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (eps > 0.0 && u(rng) < eps) {
    std::uniform_int_distribution<std::size_t> pick(0, actions_ - 1);
    return pick(rng);
  }
  return greedy(s);
}

std::size_t CdqnAgent::greedy(const NetworkState& s) const { return argmax_lowest(q_values(s)); }

void CdqnAgent::store(Transition t) {
  if (t.action >= actions_) throw ContractError("transition action index out of range");
  replay_.push(std::move(t));
}

double CdqnAgent::target(const Transition& t) const {
  const double r = t.reward / cfg_.reward_scale;
  if (t.terminal) return r;
  const auto q = target_q_values(t.next);
  const double best = *std::max_element(q.begin(), q.end());
  return r + cfg_.gamma * best - lambda_ * t.cost / cfg_.reward_scale;
}

double CdqnAgent::train_on(const std::vector<const Transition*>& batch) {
  if (batch.empty()) return 0.0;
  const auto rows = static_cast<Eigen::Index>(batch.size());
  nn::RowMatrix x(rows, static_cast<Eigen::Index>(state_dim_));
  nn::RowMatrix x_next(rows, static_cast<Eigen::Index>(state_dim_));
  for (Eigen::Index r = 0; r < rows; ++r) {
    x.row(r) = input(batch[static_cast<std::size_t>(r)]->state);
    x_next.row(r) = input(batch[static_cast<std::size_t>(r)]->next);
  }
  const nn::RowMatrix q_next = target_.forward(x_next);

  eval_.params().zero_grad();
  const nn::RowMatrix q = eval_.forward_train(x);
  nn::RowMatrix grad = nn::RowMatrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Transition& t = *batch[static_cast<std::size_t>(r)];
    double y = t.reward / cfg_.reward_scale;
    if (!t.terminal) y += cfg_.gamma * q_next.row(r).maxCoeff() - lambda_ * t.cost / cfg_.reward_scale;
    const auto a = static_cast<Eigen::Index>(t.action);
    const double diff = q(r, a) - y;
    loss += diff * diff;
    grad(r, a) = 2.0 * diff / static_cast<double>(rows);
  }
  eval_.backward(grad);
  if (cfg_.grad_clip > 0) eval_.params().clip_grad_norm(cfg_.grad_clip);
  adam_.step(eval_.params());
  return loss / static_cast<double>(rows);
}

std::optional<double> CdqnAgent::train_step(Rng& rng) {
  if (replay_.size() < std::max(cfg_.minibatch, cfg_.warmup) || replay_.size() == 0) return std::nullopt;
  const double loss = train_on(replay_.sample(cfg_.minibatch, rng));
  if (++train_steps_ % cfg_.target_period == 0) sync_target();
  return loss;
}

void CdqnAgent::update_multiplier() {
  if (replay_.size() == 0) return;
  lambda_ = std::max(0.0, lambda_ + cfg_.multiplier_lr * replay_.mean_cost());
}

void CdqnAgent::set_multiplier(double v) { lambda_ = std::max(0.0, v); }

void CdqnAgent::sync_target() {
  target_.params().copy_values_from(eval_.params());
  ++syncs_;
}

void CdqnAgent::save(const std::filesystem::path& path) const { eval_.params().save(path); }

// --- baselines --------------------------------------------------------------------------------

ExhaustiveResult exhaustive_select(std::size_t elements, int bits, const ActionCodebook& codebook,
                                   const std::function<double(const PhaseConfig&)>& reward, ExhaustiveScope scope,
                                   std::uint64_t guard) {
  const bool fits = space_at_most(elements, bits, guard);
  if (scope == ExhaustiveScope::Full && !fits) {
    throw ContractError("exhaustive_select: full space exceeds the enumeration guard");
  }
  ExhaustiveResult best;
  best.reward = -std::numeric_limits<double>::infinity();
  const auto consider = [&](const PhaseConfig& c, std::optional<std::size_t> idx) {
    const double r = reward(c);
    ++best.evaluated;
    if (best.evaluated == 1 || r > best.reward) {
      best.reward = r;
      best.config = c;
      best.codebook_index = idx;
    }
  };
  if (scope == ExhaustiveScope::Full || (scope == ExhaustiveScope::Auto && fits)) {
    phy::enumerate_configs(elements, bits, guard, [&](const PhaseConfig& c) { consider(c, std::nullopt); });
    return best;
  }
  if (codebook.size() == 0) throw ContractError("exhaustive_select: empty codebook");
  for (std::size_t i = 0; i < codebook.size(); ++i) consider(codebook[i], i);
  return best;
}

std::size_t random_select(const ActionCodebook& codebook, Rng& rng) {
  if (codebook.size() == 0) throw ContractError("random_select: empty codebook");
  std::uniform_int_distribution<std::size_t> pick(0, codebook.size() - 1);
  return pick(rng);
}

}  // namespace thzvr::ris
