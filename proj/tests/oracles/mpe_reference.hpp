#pragma once

// Slow, literal port of the reference particle-world scenarios, kept
// deliberately close to the original python structure (per-entity objects,
// O(n^2) force loop, scenario callbacks).  Used only as a parity oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "marl/prng.hpp"
#include "marl/spaces.hpp"

namespace mpe_oracle {

struct Entity {
  std::string name;
  double size = 0.05;
  bool movable = false;
  bool collide = true;
  double mass = 1.0;
  double pos[2] = {0, 0};
  double vel[2] = {0, 0};
  double max_speed = -1;  // <0: unlimited
};

struct OAgent : Entity {
  bool silent = true;
  bool adversary = false;
  double accel = -1;  // <0: default sensitivity 5.0
  std::vector<double> comm;  // state.c
  double u[2] = {0, 0};      // action force
  std::vector<double> c;     // comm action
};

struct World {
  std::string scenario;
  int dim_c = 0;
  double dt = 0.1;
  double damping = 0.25;
  double contact_force = 1e2;
  double contact_margin = 1e-3;
  bool cooperative_prey = false;

  std::vector<OAgent> agents;
  std::vector<Entity> landmarks;
  int goal_landmark = -1;  // speaker_listener
  int steps = 0;
  int max_cycles = 25;
};

inline World make_world(const std::string& scenario, bool cooperative_prey = false) {
  World w;
  w.scenario = scenario;
  w.cooperative_prey = cooperative_prey;
  if (scenario == "simple_spread") {
    w.dim_c = 2;
    for (int i = 0; i < 3; ++i) {
      OAgent a;
      a.name = "agent_" + std::to_string(i);
      a.size = 0.15;
      a.movable = true;
      a.collide = true;
      a.silent = true;
      w.agents.push_back(a);
    }
    for (int i = 0; i < 3; ++i) {
      Entity lm;
      lm.name = "landmark " + std::to_string(i);
      lm.collide = false;
      lm.movable = false;
      w.landmarks.push_back(lm);
    }
  } else if (scenario == "simple_speaker_listener") {
    w.dim_c = 3;
    OAgent speaker;
    speaker.name = "speaker_0";
    speaker.movable = false;
    speaker.silent = false;
    speaker.collide = false;
    speaker.size = 0.075;
    w.agents.push_back(speaker);
    OAgent listener;
    listener.name = "listener_0";
    listener.movable = true;
    listener.silent = true;
    listener.collide = false;
    listener.size = 0.075;
    w.agents.push_back(listener);
    for (int i = 0; i < 3; ++i) {
      Entity lm;
      lm.name = "landmark " + std::to_string(i);
      lm.collide = false;
      lm.size = 0.04;
      w.landmarks.push_back(lm);
    }
  } else {  // simple_tag
    w.dim_c = 2;
    for (int i = 0; i < 3; ++i) {
      OAgent a;
      a.name = "adversary_" + std::to_string(i);
      a.adversary = true;
      a.size = 0.075;
      a.accel = 3.0;
      a.max_speed = 1.0;
      a.movable = true;
      a.collide = true;
      a.silent = true;
      w.agents.push_back(a);
    }
    OAgent prey;
    prey.name = "agent_0";
    prey.size = 0.05;
    prey.accel = 4.0;
    prey.max_speed = 1.3;
    prey.movable = true;
    prey.collide = true;
    prey.silent = true;
    w.agents.push_back(prey);
    for (int i = 0; i < 2; ++i) {
      Entity lm;
      lm.name = "landmark " + std::to_string(i);
      lm.size = 0.2;
      lm.collide = true;
      lm.movable = false;
      w.landmarks.push_back(lm);
    }
  }
  for (auto& a : w.agents) a.comm.assign(size_t(w.dim_c), 0.0);
  return w;
}

// Shared reset convention: one child key per entity (agents first), agents
// uniform in [-1,1]^2, landmarks uniform in [-0.9,0.9]^2, then one extra
// child for the goal draw where the scenario has one.
inline void reset_world(World& w, const marl::PrngKey& key) {
  size_t n = w.agents.size() + w.landmarks.size();
  auto kids = marl::prng::split(key, n + 1);
  for (size_t i = 0; i < w.agents.size(); ++i) {
    auto u = marl::prng::uniform(kids[i], 2, -1.0, 1.0);
    w.agents[i].pos[0] = u[0];
    w.agents[i].pos[1] = u[1];
    w.agents[i].vel[0] = w.agents[i].vel[1] = 0.0;
    w.agents[i].comm.assign(size_t(w.dim_c), 0.0);
  }
  for (size_t j = 0; j < w.landmarks.size(); ++j) {
    auto u = marl::prng::uniform(kids[w.agents.size() + j], 2, -0.9, 0.9);
    w.landmarks[j].pos[0] = u[0];
    w.landmarks[j].pos[1] = u[1];
  }
  w.goal_landmark = w.scenario == "simple_speaker_listener"
                        ? marl::prng::randint1(kids[n], 0, int(w.landmarks.size()))
                        : -1;
  w.steps = 0;
}

inline double logaddexp0(double z) {
  // log(1 + exp(z)), overflow-safe like np.logaddexp(0, z)
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline void set_action(World& w, OAgent& agent, const marl::Action& action) {
  agent.u[0] = agent.u[1] = 0.0;
  agent.c.assign(size_t(w.dim_c), 0.0);
  if (agent.movable) {
    if (const auto* box = std::get_if<std::vector<float>>(&action)) {
      agent.u[0] += double((*box)[1]) - double((*box)[2]);
      agent.u[1] += double((*box)[3]) - double((*box)[4]);
    } else {
      int a = std::get<int>(action);
      if (a == 1) agent.u[0] = -1.0;
      if (a == 2) agent.u[0] = +1.0;
      if (a == 3) agent.u[1] = -1.0;
      if (a == 4) agent.u[1] = +1.0;
    }
    double sensitivity = agent.accel > 0 ? agent.accel : 5.0;
    agent.u[0] *= sensitivity;
    agent.u[1] *= sensitivity;
  }
  if (!agent.silent) {
    if (const auto* box = std::get_if<std::vector<float>>(&action)) {
      for (int i = 0; i < w.dim_c; ++i) agent.c[size_t(i)] = double((*box)[size_t(i)]);
    } else {
      agent.c[size_t(std::get<int>(action))] = 1.0;
    }
  }
}

inline std::vector<Entity*> entities(World& w) {
  std::vector<Entity*> out;
  for (auto& a : w.agents) out.push_back(&a);
  for (auto& lm : w.landmarks) out.push_back(&lm);
  return out;
}

inline void collision_force(const World& w, const Entity& a, const Entity& b, double* f) {
  f[0] = f[1] = 0.0;
  if (!a.collide || !b.collide) return;
  double delta[2] = {a.pos[0] - b.pos[0], a.pos[1] - b.pos[1]};
  double dist = std::sqrt(delta[0] * delta[0] + delta[1] * delta[1]);
  if (dist < 1e-9) dist = 1e-9;
  double dist_min = a.size + b.size;
  double k = w.contact_margin;
  double penetration = logaddexp0(-(dist - dist_min) / k) * k;
  f[0] = w.contact_force * delta[0] / dist * penetration;
  f[1] = w.contact_force * delta[1] / dist * penetration;
}

inline void world_step(World& w) {
  auto ents = entities(w);
  std::vector<std::array<double, 2>> p_force(ents.size(), {0.0, 0.0});

  // action forces
  for (size_t i = 0; i < w.agents.size(); ++i) {
    if (w.agents[i].movable) {
      p_force[i][0] += w.agents[i].u[0];
      p_force[i][1] += w.agents[i].u[1];
    }
  }
  // environment (contact) forces, pairwise a < b
  for (size_t a = 0; a < ents.size(); ++a) {
    for (size_t b = a + 1; b < ents.size(); ++b) {
      double f[2];
      collision_force(w, *ents[a], *ents[b], f);
      if (ents[a]->movable) {
        p_force[a][0] += f[0];
        p_force[a][1] += f[1];
      }
      if (ents[b]->movable) {
        p_force[b][0] -= f[0];
        p_force[b][1] -= f[1];
      }
    }
  }
  // integrate
  for (size_t i = 0; i < ents.size(); ++i) {
    Entity& e = *ents[i];
    if (!e.movable) continue;
    e.vel[0] *= (1.0 - w.damping);
    e.vel[1] *= (1.0 - w.damping);
    e.vel[0] += p_force[i][0] / e.mass * w.dt;
    e.vel[1] += p_force[i][1] / e.mass * w.dt;
    if (e.max_speed > 0) {
      double speed = std::sqrt(e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]);
      if (speed > e.max_speed) {
        e.vel[0] = e.vel[0] / speed * e.max_speed;
        e.vel[1] = e.vel[1] / speed * e.max_speed;
      }
    }
    e.pos[0] += e.vel[0] * w.dt;
    e.pos[1] += e.vel[1] * w.dt;
  }
  // communication state
  for (auto& a : w.agents) {
    if (a.silent)
      a.comm.assign(size_t(w.dim_c), 0.0);
    else
      a.comm = a.c;
  }
}

inline bool is_collision(const Entity& a, const Entity& b) {
  double dx = a.pos[0] - b.pos[0], dy = a.pos[1] - b.pos[1];
  double dist = std::sqrt(dx * dx + dy * dy);
  return dist < a.size + b.size;
}

inline double bound_penalty(double x) {
  if (x < 0.9) return 0.0;
  if (x < 1.0) return (x - 0.9) * 10.0;
  return std::min(std::exp(2.0 * x - 2.0), 10.0);
}

inline double reward(World& w, size_t agent_idx) {
  OAgent& agent = w.agents[agent_idx];
  if (w.scenario == "simple_spread") {
    double rew = 0.0;
    for (const auto& lm : w.landmarks) {
      double best = 1e18;
      for (const auto& a : w.agents) {
        double dx = a.pos[0] - lm.pos[0], dy = a.pos[1] - lm.pos[1];
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
      }
      rew -= best;
    }
    if (agent.collide) {
      for (const auto& a : w.agents)
        if (&a != &agent && is_collision(a, agent)) rew -= 1.0;
    }
    return rew;
  }
  if (w.scenario == "simple_speaker_listener") {
    const OAgent& listener = w.agents[1];
    const Entity& goal = w.landmarks[size_t(w.goal_landmark)];
    double dx = listener.pos[0] - goal.pos[0], dy = listener.pos[1] - goal.pos[1];
    return -(dx * dx + dy * dy);  // squared distance
  }
  // simple_tag
  double pair_touches = 0.0;
  const OAgent& prey = w.agents[3];
  for (size_t i = 0; i < 3; ++i)
    if (is_collision(w.agents[i], prey)) pair_touches += 1.0;
  if (w.cooperative_prey || agent.adversary) return 10.0 * pair_touches;
  double rew = -10.0 * pair_touches;
  rew -= bound_penalty(std::abs(agent.pos[0]));
  rew -= bound_penalty(std::abs(agent.pos[1]));
  return rew;
}

inline std::vector<double> observe(World& w, size_t agent_idx) {
  OAgent& agent = w.agents[agent_idx];
  std::vector<double> o;
  if (w.scenario == "simple_speaker_listener") {
    if (!agent.movable) {  // speaker: goal one-hot
      for (size_t i = 0; i < w.landmarks.size(); ++i)
        o.push_back(i == size_t(w.goal_landmark) ? 1.0 : 0.0);
      return o;
    }
    o.push_back(agent.vel[0]);
    o.push_back(agent.vel[1]);
    for (const auto& lm : w.landmarks) {
      o.push_back(lm.pos[0] - agent.pos[0]);
      o.push_back(lm.pos[1] - agent.pos[1]);
    }
    for (const auto& other : w.agents) {
      if (&other == &agent || other.silent) continue;
      for (double c : other.comm) o.push_back(c);
    }
    return o;
  }
  if (w.scenario == "simple_spread") {
    o.push_back(agent.vel[0]);
    o.push_back(agent.vel[1]);
    o.push_back(agent.pos[0]);
    o.push_back(agent.pos[1]);
    for (const auto& lm : w.landmarks) {
      o.push_back(lm.pos[0] - agent.pos[0]);
      o.push_back(lm.pos[1] - agent.pos[1]);
    }
    for (const auto& other : w.agents) {
      if (&other == &agent) continue;
      o.push_back(other.pos[0] - agent.pos[0]);
      o.push_back(other.pos[1] - agent.pos[1]);
    }
    for (const auto& other : w.agents) {
      if (&other == &agent) continue;
      for (double c : other.comm) o.push_back(c);
    }
    return o;
  }
  // simple_tag
  o.push_back(agent.vel[0]);
  o.push_back(agent.vel[1]);
  o.push_back(agent.pos[0]);
  o.push_back(agent.pos[1]);
  for (const auto& lm : w.landmarks) {
    o.push_back(lm.pos[0] - agent.pos[0]);
    o.push_back(lm.pos[1] - agent.pos[1]);
  }
  for (const auto& other : w.agents) {
    if (&other == &agent) continue;
    o.push_back(other.pos[0] - agent.pos[0]);
    o.push_back(other.pos[1] - agent.pos[1]);
  }
  for (const auto& other : w.agents) {
    if (&other == &agent) continue;
    if (!other.adversary) {
      o.push_back(other.vel[0]);
      o.push_back(other.vel[1]);
    }
  }
  return o;
}

struct StepOut {
  std::vector<std::vector<double>> obs;  // per agent
  std::vector<double> rewards;
  bool done = false;
};

inline StepOut step(World& w, const std::vector<marl::Action>& actions) {
  for (size_t i = 0; i < w.agents.size(); ++i) set_action(w, w.agents[i], actions[i]);
  world_step(w);
  w.steps += 1;
  StepOut out;
  for (size_t i = 0; i < w.agents.size(); ++i) {
    out.obs.push_back(observe(w, i));
    out.rewards.push_back(reward(w, i));
  }
  out.done = w.steps >= w.max_cycles;
  return out;
}

}  // namespace mpe_oracle
