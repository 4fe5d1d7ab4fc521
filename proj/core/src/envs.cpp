#include "sgcrl/envs.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

namespace sgcrl {

void EpisodeSpec::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

TabularEnv::TabularEnv(std::string name, int num_states, int num_actions, StateId start,
                       StateId goal, std::vector<StateId> transitions, std::vector<Cell> layout,
                       int rows, int cols)
    : name_(std::move(name)),
      num_states_(num_states),
      num_actions_(num_actions),
      start_(start),
      goal_(goal),
      transitions_(std::move(transitions)),
      layout_(std::move(layout)),
      rows_(rows),
      cols_(cols) {
  if (num_states_ < 1 || num_actions_ < 1) throw ConfigError("empty state or action set");
  if (transitions_.size() != static_cast<std::size_t>(num_states_) * num_actions_)
    throw ConfigError("transition table has wrong size");
  if (start_ < 0 || start_ >= num_states_ || goal_ < 0 || goal_ >= num_states_)
    throw ConfigError("start/goal out of range");
  for (StateId t : transitions_)
    if (t < 0 || t >= num_states_) throw ConfigError("transition leaves the state set");
  if (!layout_.empty()) {
    if (layout_.size() != static_cast<std::size_t>(num_states_))
      throw ConfigError("layout must have one cell per state");
    cell_index_.assign(static_cast<std::size_t>(rows_) * cols_, -1);
    for (StateId s = 0; s < num_states_; ++s) {
      const Cell c = layout_[s];
      cell_index_[c.row * cols_ + c.col] = s;
    }
  }
}

StateId TabularEnv::step(StateId s, ActionId a) const {
  if (s < 0 || s >= num_states_) throw ConfigError("state id out of range");
  if (a < 0 || a >= num_actions_) throw ConfigError("action id out of range");
  return next(s, a);
}

std::optional<StateId> TabularEnv::state_at(Cell cell) const {
  if (layout_.empty() || cell.row < 0 || cell.col < 0 || cell.row >= rows_ || cell.col >= cols_)
    return std::nullopt;
  const StateId s = cell_index_[cell.row * cols_ + cell.col];
  if (s < 0) return std::nullopt;
  return s;
}

TabularEnv TabularEnv::with_endpoints(StateId start, StateId goal) const {
  return TabularEnv(name_, num_states_, num_actions_, start, goal, transitions_, layout_, rows_,
                    cols_);
}

TabularEnv load_layout(std::string_view text, std::string name) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ConfigError("layout is empty");
  const int rows = static_cast<int>(lines.size());
  const int cols = static_cast<int>(lines.front().size());
  std::vector<Cell> cells;
  std::optional<StateId> start, goal;
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(lines[r].size()) != cols)
      throw ConfigError("layout rows must all have the same width");
    for (int c = 0; c < cols; ++c) {
      const char ch = lines[r][c];
      if (ch == '#') continue;
      if (ch != '.' && ch != 'S' && ch != 'G')
        throw ConfigError(std::string("unexpected layout character '") + ch + "'");
      const auto id = static_cast<StateId>(cells.size());
      if (ch == 'S') {
        if (start) throw ConfigError("layout has more than one S");
        start = id;
      }
      if (ch == 'G') {
        if (goal) throw ConfigError("layout has more than one G");
        goal = id;
      }
      cells.push_back({r, c});
    }
  }
  if (!start) throw ConfigError("layout has no S");
  if (!goal) throw ConfigError("layout has no G");

  std::vector<StateId> index(static_cast<std::size_t>(rows) * cols, -1);
  for (StateId s = 0; s < static_cast<StateId>(cells.size()); ++s)
    index[cells[s].row * cols + cells[s].col] = s;

  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  std::vector<StateId> transitions;
  transitions.reserve(cells.size() * 4);
  for (StateId s = 0; s < static_cast<StateId>(cells.size()); ++s) {
    for (int a = 0; a < 4; ++a) {
      const int r = cells[s].row + kDr[a];
      const int c = cells[s].col + kDc[a];
      StateId t = s;
      if (r >= 0 && c >= 0 && r < rows && c < cols && index[r * cols + c] >= 0)
        t = index[r * cols + c];
      transitions.push_back(t);
    }
  }
  const auto num_states = static_cast<int>(cells.size());
  TabularEnv env(std::move(name), num_states, 4, *start, *goal, std::move(transitions),
                 std::move(cells), rows, cols);
  if (bfs_distances(env, env.start())[env.goal()] < 0)
    throw ConfigError("goal is not reachable from start");
  return env;
}

TabularEnv load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_layout(buf.str(), path);
}

TabularEnv make_fourrooms(int grid_side) {
  if (grid_side < 5 || grid_side % 2 == 0)
    throw ConfigError("fourrooms grid_side must be odd and >= 5");
  const int n = grid_side;
  const int mid = n / 2;
  std::vector<std::string> grid(n, std::string(n, '.'));
  for (int i = 0; i < n; ++i) {
    grid[mid][i] = '#';
    grid[i][mid] = '#';
  }
  // One doorway in the middle of each of the four wall segments.
  const int near = mid / 2;
  const int far = mid + 1 + (n - mid - 1) / 2;
  grid[near][mid] = '.';
  grid[far][mid] = '.';
  grid[mid][near] = '.';
  grid[mid][far] = '.';
  grid[n - 1][0] = 'S';
  grid[0][n - 1] = 'G';
  std::string text;
  for (const auto& row : grid) text += row + "\n";
  return load_layout(text, "fourrooms" + std::to_string(n));
}

int fourrooms_room(const TabularEnv& env, StateId s) {
  if (!env.has_layout()) throw ConfigError("fourrooms_room needs a grid layout");
  const Cell c = env.layout().at(s);
  const int mid_r = env.rows() / 2;
  const int mid_c = env.cols() / 2;
  if (c.row == mid_r || c.col == mid_c) return -1;
  const bool top = c.row < mid_r;
  const bool left = c.col < mid_c;
  if (top) return left ? 0 : 1;
  return left ? 2 : 3;
}

std::vector<int> hanoi_pegs(StateId s, int num_disks) {
  std::vector<int> pegs(num_disks);
  for (int d = 0; d < num_disks; ++d) {
    pegs[d] = s % 3;
    s /= 3;
  }
  return pegs;
}

std::pair<int, int> hanoi_action_pegs(ActionId a) {
  static constexpr std::pair<int, int> kMoves[6] = {{0, 1}, {0, 2}, {1, 0},
                                                    {1, 2}, {2, 0}, {2, 1}};
  return kMoves[a];
}

TabularEnv make_hanoi(int num_disks) {
  if (num_disks < 1 || num_disks > 7) throw ConfigError("hanoi num_disks must be in [1, 7]");
  int num_states = 1;
  for (int d = 0; d < num_disks; ++d) num_states *= 3;
  std::vector<StateId> transitions;
  transitions.reserve(static_cast<std::size_t>(num_states) * 6);
  std::vector<int> pow3(num_disks, 1);
  for (int d = 1; d < num_disks; ++d) pow3[d] = pow3[d - 1] * 3;

  for (StateId s = 0; s < num_states; ++s) {
    const auto pegs = hanoi_pegs(s, num_disks);
    // Smallest disk on each peg, or num_disks when empty.
    int top[3] = {num_disks, num_disks, num_disks};
    for (int d = num_disks - 1; d >= 0; --d) top[pegs[d]] = d;
    for (ActionId a = 0; a < 6; ++a) {
      const auto [from, to] = hanoi_action_pegs(a);
      const int disk = top[from];
      StateId t = s;
      if (disk < num_disks && disk < top[to]) t = s + (to - from) * pow3[disk];
      transitions.push_back(t);
    }
  }
  const StateId goal = (num_states - 1);  // every digit = 2
  return TabularEnv("hanoi" + std::to_string(num_disks), num_states, 6, 0, goal,
                    std::move(transitions));
}

std::string_view lwall_layout_text() {
  return "..........G\n"
         "...........\n"
         "...........\n"
         "...........\n"
         "..#######..\n"
         "........#..\n"
         "........#..\n"
         "........#..\n"
         "........#..\n"
         "...........\n"
         "S..........\n";
}

std::string_view spiral_layout_text() {
  return "S..........\n"
         "#########..\n"
         "...........\n"
         "..#######..\n"
         "..#.....#..\n"
         "..#.#G#.#..\n"
         "..#.#.#.#..\n"
         "..#.#...#..\n"
         "..#.#####..\n"
         "...........\n"
         "...........\n";
}

TabularEnv make_lwall() { return load_layout(lwall_layout_text(), "lwall"); }
TabularEnv make_spiral() { return load_layout(spiral_layout_text(), "spiral"); }

std::vector<StateId> enumerate_states(const TabularEnv& env) {
  std::vector<StateId> ids(env.num_states());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

std::vector<int> bfs_distances(const TabularEnv& env, StateId from) {
  std::vector<int> dist(env.num_states(), -1);
  std::deque<StateId> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    for (ActionId a = 0; a < env.num_actions(); ++a) {
      const StateId t = env.next(s, a);
      if (dist[t] < 0) {
        dist[t] = dist[s] + 1;
        queue.push_back(t);
      }
    }
  }
  return dist;
}

}  // namespace sgcrl
