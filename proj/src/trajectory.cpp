#include "mtppo/trajectory.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace mtppo {

int Trajectory::agent_token_count() const {
  int n = 0;
  for (const auto& tok : tokens) n += tok.loss_mask ? 1 : 0;
  return n;
}

std::vector<Turn> segment_turns(const std::vector<int>& mask_bits) {
  if (mask_bits.empty()) {
    throw std::invalid_argument("segment_turns: empty mask");
  }
  std::vector<Turn> turns;
  int start = -1;
  for (int i = 0; i <= static_cast<int>(mask_bits.size()); ++i) {
    const bool set = i < static_cast<int>(mask_bits.size()) && mask_bits[i] != 0;
    if (set && start < 0) {
      start = i;
    } else if (!set && start >= 0) {
      turns.push_back(Turn{static_cast<int>(turns.size()) + 1, start, i - 1});
      start = -1;
    }
  }
  return turns;
}

namespace {

std::optional<TrajectoryViolation> fail(std::string msg, int pos) {
  return TrajectoryViolation{std::move(msg), pos};
}

}  // namespace

std::optional<TrajectoryViolation> validate_trajectory(const Trajectory& traj,
                                                       int max_turns) {
  const int n = static_cast<int>(traj.tokens.size());
  int last_agent = -1;
  // Advantages are populated in one sweep after rollout; either no agent
  // token carries one (pre-GAE) or all of them do.
  bool any_adv = false;
  for (const auto& tok : traj.tokens) any_adv |= tok.has_advantage;
  for (int i = 0; i < n; ++i) {
    if (traj.tokens[i].has_advantage && !traj.tokens[i].loss_mask) {
      return fail("advantage set at masked-out position", i);
    }
  }
  for (int i = 0; i < n; ++i) {
    const TokenRecord& tok = traj.tokens[i];
    if (tok.logp_old > 0.0) {
      return fail("logp_old > 0 (not a log-probability)", i);
    }
    if (any_adv && tok.loss_mask && !tok.has_advantage) {
      return fail("agent token missing advantage", i);
    }
    if (tok.loss_mask) last_agent = i;
  }
  for (int i = 0; i < n; ++i) {
    if (traj.tokens[i].reward != 0.0 && i != last_agent) {
      return fail("reward at a non-final position", i);
    }
  }

  // Turn structure: ordered, disjoint, covering exactly the mask-1 positions.
  std::vector<int> covered(n, 0);
  int covered_count = 0;
  for (size_t k = 0; k < traj.turns.size(); ++k) {
    const Turn& turn = traj.turns[k];
    if (turn.index != static_cast<int>(k) + 1) {
      return fail("turn index out of order", turn.index);
    }
    if (turn.t_start > turn.t_end || turn.t_start < 0 || turn.t_end >= n) {
      return fail("turn range invalid", turn.index);
    }
    for (int i = turn.t_start; i <= turn.t_end; ++i) {
      if (!traj.tokens[i].loss_mask) {
        return fail("turn spans a masked-out position", turn.index);
      }
      if (covered[i]) {
        std::ostringstream oss;
        oss << "turns " << covered[i] << " and " << turn.index
            << " overlap at position " << i;
        return fail(oss.str(), turn.index);
      }
      covered[i] = turn.index;
      ++covered_count;
    }
    if (k > 0 && traj.turns[k - 1].t_end >= turn.t_start) {
      return fail("turns not ordered", turn.index);
    }
  }
  if (covered_count != traj.agent_token_count()) {
    return fail("turns do not cover all agent positions", -1);
  }
  if (max_turns >= 0 && static_cast<int>(traj.turns.size()) > max_turns) {
    return fail("too many turns", static_cast<int>(traj.turns.size()));
  }
  if (traj.terminal_reward < 0.0 || traj.terminal_reward > 1.0) {
    return fail("terminal reward outside [0,1]", -1);
  }

  // Stored turns must equal a fresh segmentation of the mask.
  if (n > 0) {
    std::vector<int> mask(n, 0);
    for (int i = 0; i < n; ++i) mask[i] = traj.tokens[i].loss_mask ? 1 : 0;
    const std::vector<Turn> fresh = segment_turns(mask);
    if (fresh.size() != traj.turns.size()) {
      return fail("stored turns disagree with mask segmentation", -1);
    }
    for (size_t k = 0; k < fresh.size(); ++k) {
      if (fresh[k].t_start != traj.turns[k].t_start ||
          fresh[k].t_end != traj.turns[k].t_end) {
        return fail("stored turn boundaries disagree with mask", fresh[k].index);
      }
    }
  }
  return std::nullopt;
}

namespace {

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) {
    throw std::invalid_argument("trajectory_from_line: bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string trajectory_to_line(const Trajectory& traj) {
  std::ostringstream oss;
  oss << traj.query_seed << '\t';
  for (size_t i = 0; i < traj.tokens.size(); ++i) {
    if (i) oss << ',';
    oss << traj.tokens[i].token_id;
  }
  oss << '\t';
  for (size_t i = 0; i < traj.tokens.size(); ++i) {
    if (i) oss << ',';
    oss << (traj.tokens[i].loss_mask ? 1 : 0);
  }
  oss << '\t';
  for (size_t i = 0; i < traj.tokens.size(); ++i) {
    if (i) oss << ',';
    oss << hex_double(traj.tokens[i].logp_old);
  }
  oss << '\t' << hex_double(traj.terminal_reward);
  return oss.str();
}

Trajectory trajectory_from_line(const std::string& line) {
  const std::vector<std::string> fields = split(line, '\t');
  if (fields.size() != 5) {
    throw std::invalid_argument("trajectory_from_line: expected 5 fields");
  }
  Trajectory traj;
  traj.query_seed = std::strtoull(fields[0].c_str(), nullptr, 10);
  const auto ids = split(fields[1], ',');
  const auto bits = split(fields[2], ',');
  const auto logps = split(fields[3], ',');
  if (ids.size() != bits.size() || ids.size() != logps.size()) {
    throw std::invalid_argument("trajectory_from_line: list length mismatch");
  }
  traj.tokens.resize(ids.size());
  std::vector<int> mask(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    traj.tokens[i].token_id = std::atoi(ids[i].c_str());
    traj.tokens[i].loss_mask = bits[i] == "1";
    traj.tokens[i].logp_old = parse_double(logps[i]);
    mask[i] = traj.tokens[i].loss_mask ? 1 : 0;
  }
  traj.terminal_reward = parse_double(fields[4]);
  if (!mask.empty()) traj.turns = segment_turns(mask);
  // Reward sits at the final agent token.
  for (int i = static_cast<int>(traj.tokens.size()) - 1; i >= 0; --i) {
    if (traj.tokens[i].loss_mask) {
      traj.tokens[i].reward = traj.terminal_reward;
      break;
    }
  }
  return traj;
}

}  // namespace mtppo
