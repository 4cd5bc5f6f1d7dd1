#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adeu {

struct DiscreteState {
  std::size_t index = 0;
  friend bool operator==(const DiscreteState&, const DiscreteState&) = default;
};

struct ContinuousState {
  std::vector<double> vector;
  friend bool operator==(const ContinuousState&, const ContinuousState&) = default;
};

template <class State>
struct StepResult {
  State next_state{};
  double reward = 0.0;
  bool terminated = false;  // hole, unsafe region, or goal
  bool truncated = false;   // step limit
};

/// Row/column extent of a discrete environment, used by state encoders.
struct GridGeometry {
  std::size_t rows = 1;
  std::size_t cols = 1;
};

// ---------------------------------------------------------------------------
// Serpentine path grid (Frozen Lake variant)
// ---------------------------------------------------------------------------

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kGridActionCount = 4;

struct PathGridConfig {
  int side = 8;
  double beta_reward_scale = 1.0;
  int max_steps = 128;
  std::uint64_t layout_seed = 0;
};

/// Number of path tiles on a serpentine grid of the given side: every even
/// row is traversed fully, every odd row holds one connector tile.
constexpr std::size_t serpentine_length(std::size_t side) noexcept {
  return ((side + 1) / 2) * side + side / 2;
}

/// A side x side grid with a single boustrophedon corridor from (0,0) to the
/// goal. Off-path cells are holes. Moving onto the path tile with progress
/// index i for the first time pays scale*(i+1); the goal additionally pays
/// scale*L. Bumping the border leaves the agent in place with zero reward.
///
/// Every path tile only touches its predecessor, its successor and holes, so
/// the tiles visited in an episode always form a prefix of the path and a
/// single frontier index replaces a per-cell visited mask.
class PathGrid {
 public:
  static constexpr std::uint8_t kHole = 0;
  static constexpr std::uint8_t kPath = 1;

  explicit PathGrid(const PathGridConfig& config) : config_(config) {
    if (config.side < 4) throw std::invalid_argument("path grid: side must be >= 4");
    if (config.max_steps <= 0) throw std::invalid_argument("path grid: max_steps must be positive");
    if (!(config.beta_reward_scale > 0.0) || !std::isfinite(config.beta_reward_scale))
      throw std::invalid_argument("path grid: reward scale must be positive");
    side_ = static_cast<std::size_t>(config.side);
    transposed_ = (config.layout_seed & 1U) != 0;
    length_ = serpentine_length(side_);
    mask_.assign(side_ * side_, kHole);
    for (std::size_t p = 0; p < length_; ++p) mask_[cell_of(p)] = kPath;
    goal_ = cell_of(length_ - 1);
  }

  const PathGridConfig& config() const noexcept { return config_; }
  std::size_t side() const noexcept { return side_; }
  std::size_t state_count() const noexcept { return side_ * side_; }
  int action_count() const noexcept { return kGridActionCount; }
  int max_steps() const noexcept { return config_.max_steps; }
  std::size_t path_length() const noexcept { return length_; }
  std::size_t start_cell() const noexcept { return 0; }
  std::size_t goal_cell() const noexcept { return goal_; }
  GridGeometry geometry() const noexcept { return {side_, side_}; }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }
  bool is_path(std::size_t cell) const { return mask_.at(cell) == kPath; }

  /// First-visit reward for reaching progress index i (goal bonus excluded).
  double tile_reward(std::size_t progress) const noexcept {
    return config_.beta_reward_scale * static_cast<double>(progress + 1);
  }
  double goal_bonus() const noexcept {
    return config_.beta_reward_scale * static_cast<double>(length_);
  }

  /// Row-major cell id of the path tile with the given progress index.
  std::size_t cell_of(std::size_t progress) const {
    if (progress >= length_) throw std::out_of_range("path grid: progress index");
    const std::size_t stride = side_ + 1;
    const std::size_t k = progress / stride;
    const std::size_t rem = progress % stride;
    std::size_t major = 0;
    std::size_t minor = 0;
    if (rem < side_) {
      major = 2 * k;
      minor = (k % 2 == 0) ? rem : side_ - 1 - rem;
    } else {
      major = 2 * k + 1;
      minor = (k % 2 == 0) ? side_ - 1 : 0;
    }
    return transposed_ ? minor * side_ + major : major * side_ + minor;
  }

  /// Progress index of a path cell, or -1 for a hole.
  long progress_of(std::size_t cell) const {
    if (cell >= mask_.size()) throw std::out_of_range("path grid: cell");
    if (mask_[cell] != kPath) return -1;
    std::size_t major = cell / side_;
    std::size_t minor = cell % side_;
    if (transposed_) std::swap(major, minor);
    const std::size_t k = major / 2;
    const std::size_t base = k * (side_ + 1);
    if (major % 2 == 0) return static_cast<long>(base + ((k % 2 == 0) ? minor : side_ - 1 - minor));
    return static_cast<long>(base + side_);
  }

  DiscreteState reset(std::uint64_t /*episode_seed*/ = 0) {
    cell_ = 0;
    frontier_ = 0;
    steps_ = 0;
    done_ = false;
    return {cell_};
  }

  StepResult<DiscreteState> step(int action) {
    if (done_) throw std::logic_error("path grid: step called on a finished episode");
    if (action < 0 || action >= kGridActionCount) throw std::invalid_argument("path grid: invalid action");
    auto result = transition(cell_, frontier_, action);
    cell_ = result.next_state.index;
    if (const long p = progress_of(cell_); p > static_cast<long>(frontier_)) frontier_ = static_cast<std::size_t>(p);
    ++steps_;
    if (!result.terminated && steps_ >= config_.max_steps) result.truncated = true;
    done_ = result.terminated || result.truncated;
    return result;
  }

  /// Deterministic transition from `cell` when tiles up to `frontier` have been
  /// visited. Does not touch the episode state.
  StepResult<DiscreteState> transition(std::size_t cell, std::size_t frontier, int action) const {
    StepResult<DiscreteState> out;
    const std::size_t row = cell / side_;
    const std::size_t col = cell % side_;
    std::size_t next = cell;
    switch (action) {
      case kUp: if (row > 0) next = cell - side_; break;
      case kDown: if (row + 1 < side_) next = cell + side_; break;
      case kLeft: if (col > 0) next = cell - 1; break;
      case kRight: if (col + 1 < side_) next = cell + 1; break;
      default: throw std::invalid_argument("path grid: invalid action");
    }
    out.next_state.index = next;
    if (mask_[next] == kHole) {
      out.terminated = true;
      return out;
    }
    const auto p = static_cast<std::size_t>(progress_of(next));
    if (p > frontier) {
      out.reward = tile_reward(p);
      if (p + 1 == length_) {
        out.reward += goal_bonus();
        out.terminated = true;
      }
    }
    return out;
  }

  /// Transition as seen by an agent standing on its own frontier tile.
  StepResult<DiscreteState> frontier_transition(std::size_t cell, int action) const {
    const long p = progress_of(cell);
    if (p < 0) throw std::invalid_argument("path grid: frontier transition from a hole");
    return transition(cell, static_cast<std::size_t>(p), action);
  }

  /// One character per cell: S start, G goal, F frozen path, H hole.
  std::string mask_text() const {
    std::string out;
    out.reserve(side_ * (side_ + 1));
    for (std::size_t r = 0; r < side_; ++r) {
      for (std::size_t c = 0; c < side_; ++c) {
        const std::size_t cell = r * side_ + c;
        if (cell == 0) out += 'S';
        else if (cell == goal_) out += 'G';
        else out += mask_[cell] == kPath ? 'F' : 'H';
      }
      out += '\n';
    }
    return out;
  }

  std::size_t current_cell() const noexcept { return cell_; }
  bool episode_over() const noexcept { return done_; }

 private:
  PathGridConfig config_;
  std::size_t side_ = 0;
  bool transposed_ = false;
  std::size_t length_ = 0;
  std::size_t goal_ = 0;
  std::vector<std::uint8_t> mask_;

  std::size_t cell_ = 0;
  std::size_t frontier_ = 0;
  int steps_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Chain walk
// ---------------------------------------------------------------------------

/// States 0..n-1, actions {left, right}. Reaching the right end pays 1 and
/// terminates; moving left from state 0 stays put.
class ChainWalk {
 public:
  static constexpr int kLeftAction = 0;
  static constexpr int kRightAction = 1;

  ChainWalk(int length, int max_steps) : length_(length), max_steps_(max_steps) {
    if (length < 2) throw std::invalid_argument("chain: length must be >= 2");
    if (max_steps <= 0) throw std::invalid_argument("chain: max_steps must be positive");
  }

  std::size_t state_count() const noexcept { return static_cast<std::size_t>(length_); }
  int action_count() const noexcept { return 2; }
  int max_steps() const noexcept { return max_steps_; }
  GridGeometry geometry() const noexcept { return {1, static_cast<std::size_t>(length_)}; }

  DiscreteState reset(std::uint64_t /*episode_seed*/ = 0) {
    pos_ = 0;
    steps_ = 0;
    done_ = false;
    return {0};
  }

  StepResult<DiscreteState> transition(std::size_t state, int action) const {
    if (action != kLeftAction && action != kRightAction) throw std::invalid_argument("chain: invalid action");
    StepResult<DiscreteState> out;
    std::size_t next = state;
    if (action == kRightAction) next = state + 1;
    else if (state > 0) next = state - 1;
    out.next_state.index = next;
    if (next + 1 == static_cast<std::size_t>(length_)) {
      out.reward = 1.0;
      out.terminated = true;
    }
    return out;
  }

  StepResult<DiscreteState> step(int action) {
    if (done_) throw std::logic_error("chain: step called on a finished episode");
    auto result = transition(pos_, action);
    pos_ = result.next_state.index;
    ++steps_;
    if (!result.terminated && steps_ >= max_steps_) result.truncated = true;
    done_ = result.terminated || result.truncated;
    return result;
  }

  bool episode_over() const noexcept { return done_; }

 private:
  int length_;
  int max_steps_;
  std::size_t pos_ = 0;
  int steps_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Point mass
// ---------------------------------------------------------------------------

/// 2-D double integrator. Observation (x, y, vx, vy); action is an
/// acceleration in [-1, 1]^2. Reward is forward progress minus a small
/// action cost. Leaving the band |y| <= unsafe_band or the arena
/// |x| <= arena_half_width terminates the episode.
///
/// Integration is symplectic Euler (velocity first, then position) with
/// dt = 0.05 and velocities clamped to +-2.
class PointMass {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 2.0;
  static constexpr double kActionCost = 0.01;
  static constexpr std::size_t kObservationDim = 4;
  static constexpr std::size_t kActionDim = 2;

  PointMass(double arena_half_width, double unsafe_band, int max_steps)
      : half_width_(arena_half_width), band_(unsafe_band), max_steps_(max_steps) {
    if (!(unsafe_band > 0.0) || !(arena_half_width > unsafe_band) || !std::isfinite(arena_half_width))
      throw std::invalid_argument("point mass: need arena_half_width > unsafe_band > 0");
    if (max_steps <= 0) throw std::invalid_argument("point mass: max_steps must be positive");
  }

  int max_steps() const noexcept { return max_steps_; }
  double arena_half_width() const noexcept { return half_width_; }
  double unsafe_band() const noexcept { return band_; }
  std::array<double, kActionDim> action_low() const noexcept { return {-1.0, -1.0}; }
  std::array<double, kActionDim> action_high() const noexcept { return {1.0, 1.0}; }

  /// Per-component scale that maps observations to roughly [-1, 1].
  std::array<double, kObservationDim> observation_scale() const noexcept {
    return {half_width_, band_, kMaxSpeed, kMaxSpeed};
  }

  ContinuousState reset(std::uint64_t /*episode_seed*/ = 0) {
    state_ = {0.0, 0.0, 0.0, 0.0};
    steps_ = 0;
    done_ = false;
    return {{state_.begin(), state_.end()}};
  }

  StepResult<ContinuousState> step(std::span<const double> action) {
    if (done_) throw std::logic_error("point mass: step called on a finished episode");
    if (action.size() != kActionDim) throw std::invalid_argument("point mass: action dimension");
    const double ax = std::clamp(action[0], -1.0, 1.0);
    const double ay = std::clamp(action[1], -1.0, 1.0);
    if (!std::isfinite(ax) || !std::isfinite(ay)) throw std::invalid_argument("point mass: non-finite action");

    double& x = state_[0];
    double& y = state_[1];
    double& vx = state_[2];
    double& vy = state_[3];
    const double x_before = x;
    vx = std::clamp(vx + ax * kDt, -kMaxSpeed, kMaxSpeed);
    vy = std::clamp(vy + ay * kDt, -kMaxSpeed, kMaxSpeed);
    x += vx * kDt;
    y += vy * kDt;

    StepResult<ContinuousState> out;
    out.reward = (x - x_before) - kActionCost * (ax * ax + ay * ay) * kDt;
    out.terminated = std::abs(y) > band_ || std::abs(x) > half_width_;
    ++steps_;
    out.truncated = !out.terminated && steps_ >= max_steps_;
    done_ = out.terminated || out.truncated;
    out.next_state.vector.assign(state_.begin(), state_.end());
    return out;
  }

  bool episode_over() const noexcept { return done_; }

 private:
  double half_width_;
  double band_;
  int max_steps_;
  std::array<double, kObservationDim> state_{};
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace adeu
