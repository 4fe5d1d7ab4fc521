#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgcrl/common.hpp"

namespace sgcrl {

/// Grid coordinates of a state, row 0 at the top.
struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct EpisodeSpec {
  int max_steps = 100;
  bool terminate_on_goal = true;

  void validate() const;
};

/// Deterministic, fully enumerable MDP with a single start and goal.
///
/// Illegal moves (walls, illegal Hanoi moves) are self-transitions, so every
/// state exposes the same action set. Instances are immutable once built.
class TabularEnv {
 public:
  TabularEnv(std::string name, int num_states, int num_actions, StateId start, StateId goal,
             std::vector<StateId> transitions, std::vector<Cell> layout = {}, int rows = 0,
             int cols = 0);

  const std::string& name() const { return name_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  StateId start() const { return start_; }
  StateId goal() const { return goal_; }

  /// p(s, a). Throws ConfigError on out-of-range ids.
  StateId step(StateId s, ActionId a) const;
  /// Unchecked variant for inner loops.
  StateId next(StateId s, ActionId a) const { return transitions_[s * num_actions_ + a]; }

  bool has_layout() const { return !layout_.empty(); }
  const std::vector<Cell>& layout() const { return layout_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::optional<StateId> state_at(Cell cell) const;

  /// Same dynamics with a different start and/or goal.
  TabularEnv with_endpoints(StateId start, StateId goal) const;

 private:
  std::string name_;
  int num_states_;
  int num_actions_;
  StateId start_;
  StateId goal_;
  std::vector<StateId> transitions_;
  std::vector<Cell> layout_;
  std::vector<StateId> cell_index_;
  int rows_;
  int cols_;
};

/// Grid actions, in this order.
enum class GridAction : ActionId { Up = 0, Down = 1, Left = 2, Right = 3 };

/// Four rooms separated by one horizontal and one vertical wall through the
/// centre, each wall segment pierced by one doorway. Start in the bottom-left
/// corner, goal in the top-right corner. `grid_side` must be odd and >= 5.
TabularEnv make_fourrooms(int grid_side = 11);

/// Room index of a four-rooms state: 0 top-left, 1 top-right, 2 bottom-left,
/// 3 bottom-right, or -1 for doorway cells on the walls.
int fourrooms_room(const TabularEnv& env, StateId s);

/// Tower of Hanoi on 3 pegs. State = peg of each disk in base 3 (disk 0 is the
/// smallest and the least-significant digit). Actions are the six ordered peg
/// pairs (from, to). Start has all disks on peg 0, goal all disks on peg 2.
TabularEnv make_hanoi(int num_disks);

/// Peg assignment (index = disk, 0 smallest) of a Hanoi state.
std::vector<int> hanoi_pegs(StateId s, int num_disks);
/// (from, to) pegs of a Hanoi action.
std::pair<int, int> hanoi_action_pegs(ActionId a);

/// Grid maze from text: `#` wall, `.` free, `S` start, `G` goal; one row per
/// line. Exactly one `S` and one `G` are required; rows must be equal width.
TabularEnv load_layout(std::string_view text, std::string name = "layout");
TabularEnv load_layout_file(const std::string& path);

/// Built-in discrete analogues of the L-shaped wall and spiral mazes (11x11).
TabularEnv make_lwall();
TabularEnv make_spiral();
std::string_view lwall_layout_text();
std::string_view spiral_layout_text();

/// Dense, stable ordering of all states (0, 1, ..., |S|-1).
std::vector<StateId> enumerate_states(const TabularEnv& env);

/// Breadth-first shortest-path lengths from `from` (-1 if unreachable).
std::vector<int> bfs_distances(const TabularEnv& env, StateId from);

}  // namespace sgcrl
