#include "ppob/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ppob {

namespace {

class CorridorEnv : public Env {
 public:
  CorridorEnv() {
    spec_.id = "corridor";
    spec_.observation_dim = kCells;
    spec_.action_space.discrete = true;
    spec_.action_space.n = 2;  // 0 = left, 1 = right
    spec_.max_episode_steps = 20;
  }

  const EnvSpec& spec() const override { return spec_; }

  std::vector<double> reset(std::uint64_t) override {
    cell_ = 0;
    steps_ = 0;
    done_ = false;
    return observe();
  }

  Transition step(const Action& action) override {
    if (done_) throw UsageError("corridor: step on finished episode");
    if (action.index < 0 || action.index > 1) throw UsageError("corridor: invalid action");
    Transition tr;
    tr.state = observe();
    tr.action = action;
    if (action.index == 1) {
      cell_ = std::min(cell_ + 1, kCells - 1);
    } else {
      cell_ = std::max(cell_ - 1, 0);
    }
    ++steps_;
    const bool terminal = (cell_ == kCells - 1);
    tr.reward = terminal ? 1.0 : 0.0;
    tr.next_state = observe();
    tr.done = terminal || steps_ >= spec_.max_episode_steps;
    tr.timeout = tr.done && !terminal;
    done_ = tr.done;
    return tr;
  }

  bool episode_done() const override { return done_; }

  std::vector<double> observe() const override {
    std::vector<double> obs(kCells, 0.0);
    obs[cell_] = 1.0;
    return obs;
  }

 private:
  static constexpr int kCells = 5;

  EnvSpec spec_;
  int cell_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

class CartPoleEnv : public Env {
 public:
  CartPoleEnv() {
    spec_.id = "cartpole";
    spec_.observation_dim = 4;
    spec_.action_space.discrete = true;
    spec_.action_space.n = 2;  // 0 = push left, 1 = push right
    spec_.max_episode_steps = 500;
  }

  const EnvSpec& spec() const override { return spec_; }

  std::vector<double> reset(std::uint64_t seed) override {
    Rng rng(seed);
    for (auto& v : state_) v = rng.uniform(-0.05, 0.05);
    steps_ = 0;
    done_ = false;
    return {state_.begin(), state_.end()};
  }

  Transition step(const Action& action) override {
    if (done_) throw UsageError("cartpole: step on finished episode");
    if (action.index < 0 || action.index > 1) throw UsageError("cartpole: invalid action");
    Transition tr;
    tr.state = {state_.begin(), state_.end()};
    tr.action = action;

    auto [x, x_dot, theta, theta_dot] = state_;
    const double force = action.index == 1 ? kForceMag : -kForceMag;
    const double costheta = std::cos(theta);
    const double sintheta = std::sin(theta);
    const double temp =
        (force + kPoleMassLength * theta_dot * theta_dot * sintheta) / kTotalMass;
    const double theta_acc =
        (kGravity * sintheta - costheta * temp) /
        (kHalfLength * (4.0 / 3.0 - kMassPole * costheta * costheta / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * costheta / kTotalMass;

    // Explicit Euler on the pre-step derivatives.
    state_[0] = x + kTau * x_dot;
    state_[1] = x_dot + kTau * x_acc;
    state_[2] = theta + kTau * theta_dot;
    state_[3] = theta_dot + kTau * theta_acc;
    ++steps_;

    const bool failed = state_[0] < -kXThreshold || state_[0] > kXThreshold ||
                        state_[2] < -kThetaThreshold || state_[2] > kThetaThreshold;
    tr.reward = 1.0;
    tr.next_state = {state_.begin(), state_.end()};
    tr.done = failed || steps_ >= spec_.max_episode_steps;
    tr.timeout = tr.done && !failed;
    done_ = tr.done;
    return tr;
  }

  bool episode_done() const override { return done_; }

  std::vector<double> observe() const override { return {state_.begin(), state_.end()}; }

 private:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * M_PI / 180.0;

  EnvSpec spec_;
  std::array<double, 4> state_{};
  int steps_ = 0;
  bool done_ = true;
};

class PendulumEnv : public Env {
 public:
  PendulumEnv() {
    spec_.id = "pendulum";
    spec_.observation_dim = 3;  // cos(theta), sin(theta), vel / 8
    spec_.action_space.discrete = false;
    spec_.action_space.dim = 1;
    spec_.action_space.low = -kMaxTorque;
    spec_.action_space.high = kMaxTorque;
    spec_.max_episode_steps = 200;
  }

  const EnvSpec& spec() const override { return spec_; }

  std::vector<double> reset(std::uint64_t seed) override {
    Rng rng(seed);
    theta_ = rng.uniform(-M_PI, M_PI);
    theta_dot_ = rng.uniform(-1.0, 1.0);
    steps_ = 0;
    done_ = false;
    return observe();
  }

  Transition step(const Action& action) override {
    if (done_) throw UsageError("pendulum: step on finished episode");
    if (action.vec.size() != 1) throw UsageError("pendulum: invalid action");
    Transition tr;
    tr.state = observe();
    tr.action = action;

    const double torque = std::clamp(action.vec[0], -kMaxTorque, kMaxTorque);
    const double angle = normalize_angle(theta_);
    tr.reward = -(angle * angle + 0.1 * theta_dot_ * theta_dot_ + 0.001 * torque * torque);

    theta_dot_ += (3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                   3.0 / (kMass * kLength * kLength) * torque) *
                  kDt;
    theta_dot_ = std::clamp(theta_dot_, -kMaxSpeed, kMaxSpeed);
    theta_ += theta_dot_ * kDt;
    ++steps_;

    tr.next_state = observe();
    tr.done = steps_ >= spec_.max_episode_steps;
    tr.timeout = tr.done;  // no terminal failure
    done_ = tr.done;
    return tr;
  }

  bool episode_done() const override { return done_; }

  std::vector<double> observe() const override {
    return {std::cos(theta_), std::sin(theta_), theta_dot_ / kMaxSpeed};
  }

 private:
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  static double normalize_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
  }

  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
};

// 4x4 Gaussian elimination with partial pivoting; plenty for the corridor.
std::array<double, 4> solve4(std::array<std::array<double, 5>, 4> aug) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
    std::swap(aug[col], aug[pivot]);
    if (std::fabs(aug[col][col]) < 1e-14) throw NumericFault("corridor solve: singular system");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = aug[r][col] / aug[col][col];
      for (int c = col; c < 5; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  std::array<double, 4> x{};
  for (int r = 0; r < 4; ++r) x[r] = aug[r][4] / aug[r][r];
  return x;
}

}  // namespace

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "corridor") return std::make_unique<CorridorEnv>();
  if (id == "cartpole") return std::make_unique<CartPoleEnv>();
  if (id == "pendulum") return std::make_unique<PendulumEnv>();
  throw ConfigError("unknown environment id: " + id);
}

std::array<double, 5> corridor_optimal_values(double gamma) {
  std::array<double, 5> v{};
  for (int k = 0; k <= 3; ++k) v[k] = std::pow(gamma, 3 - k);
  v[4] = 0.0;
  return v;
}

std::array<double, 5> corridor_policy_values(const std::array<double, 4>& p_right, double gamma) {
  // Non-terminal cells 0..3. Right from cell 3 terminates with reward 1;
  // the terminal cell contributes value 0.
  std::array<std::array<double, 5>, 4> aug{};
  for (int s = 0; s < 4; ++s) {
    aug[s][s] += 1.0;
    const double pr = p_right[s];
    const double pl = 1.0 - pr;
    const int left = std::max(s - 1, 0);
    if (s < 3) aug[s][s + 1] -= gamma * pr;  // right into a non-terminal cell
    aug[s][left] -= gamma * pl;
    aug[s][4] = (s == 3) ? pr * 1.0 : 0.0;  // expected immediate reward
  }
  const auto v = solve4(aug);
  return {v[0], v[1], v[2], v[3], 0.0};
}

std::array<double, 5> exact_values(const Env& env, double gamma) {
  if (env.spec().id != "corridor") throw UsageError("exact_values: corridor only");
  return corridor_optimal_values(gamma);
}

std::array<double, 5> exact_values(const Env& env, const std::array<double, 4>& p_right,
                                   double gamma) {
  if (env.spec().id != "corridor") throw UsageError("exact_values: corridor only");
  return corridor_policy_values(p_right, gamma);
}

void write_trace_csv(const std::vector<Transition>& episode, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw UsageError("write_trace_csv: cannot open " + path);
  if (!episode.empty()) {
    std::fprintf(f, "t");
    for (std::size_t i = 0; i < episode.front().state.size(); ++i)
      std::fprintf(f, ",state%zu", i);
    std::fprintf(f, ",action,reward,done\n");
  }
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const auto& tr = episode[t];
    std::fprintf(f, "%zu", t);
    for (double s : tr.state) std::fprintf(f, ",%s", fmt_double(s).c_str());
    if (tr.action.index >= 0) {
      std::fprintf(f, ",%d", tr.action.index);
    } else {
      std::string joined;
      for (std::size_t i = 0; i < tr.action.vec.size(); ++i)
        joined += (i ? ";" : "") + fmt_double(tr.action.vec[i]);
      std::fprintf(f, ",%s", joined.c_str());
    }
    std::fprintf(f, ",%s,%d\n", fmt_double(tr.reward).c_str(), tr.done ? 1 : 0);
  }
  std::fclose(f);
}

}  // namespace ppob
