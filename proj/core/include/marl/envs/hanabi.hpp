#pragma once

#include <memory>
#include <string>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Cooperative card game with hidden own-hands: play fireworks in rank order,
// spend hint tokens to reveal colours/ranks, lose a life per misplay.
//
// Turn-based: every agent submits an action each step but only the current
// player's is applied; everyone else's legal-action mask is all-false.
// Action ids, with H = hand_size, P = n_players, C = n_colors, R = n_ranks:
//   [0, H)               discard slot                (illegal at full tokens)
//   [H, 2H)              play slot
//   [2H, 2H+(P-1)*C)     hint colour c to the player (o+1) seats ahead,
//                        id = 2H + o*C + c
//   [.., +(P-1)*R)       hint rank r, id = 2H + (P-1)*C + o*R + r
// Rewards are shared: +1 whenever a play advances a firework.  Completing a
// colour restores one hint token.  The episode ends when lives hit zero, all
// fireworks are complete, or every player has taken one turn after the deck
// ran out.  With zero_score_on_loss, losing all lives subtracts the score
// accrued so far (episode return becomes 0).
//
// Observation layout for a player (fixed length per config; I = info_tokens,
// L = life_tokens, A = action count):
//   (P-1)*H*(C+R)  other players' hands in seat order starting one ahead of
//                  the observer: per slot one-hot colour then one-hot rank,
//                  zeros for empty slots
//   P*H            card-present bits, seats in the same relative order but
//                  starting with the observer
//   H*(C+R)        observer's own per-slot knowledge: colour candidate bits
//                  then rank candidate bits (own card identities never
//                  appear anywhere in the observation)
//   C*(R+1)        fireworks: per colour, one-hot of pile height
//   I + L          hint and life tokens, thermometer-coded
//   C*R            discard pile: count per (colour, rank)
//   1              fraction of the deck remaining
//   P              last acting seat, relative to the observer; zeros at reset
//   A              last action id, one-hot; zeros at reset
//   P              current player, relative (index 0 = observer's turn)
//
// world_state uses the same blocks but with every hand visible and seats in
// absolute order (for centralised critics):
//   P*H*(C+R) hands, P*H present bits, C*(R+1) fireworks, I+L tokens,
//   C*R discards, 1 deck fraction, P last actor, A last action, P current.
//
// Config: n_players (2-5, default 2), n_colors (1-5, default 5), n_ranks
// (1-9, default 5), hand_size (default: 5 for <=3 players else 4),
// info_tokens (default 8), life_tokens (default 3), multiplicities (per-rank
// card counts, default [3,2,2,2,1]), zero_score_on_loss (default false).
// Deck size = n_colors * sum(multiplicities) and must cover the deal.
std::shared_ptr<const Env> make_hanabi(const Config& config);

// Testing aid for the hidden-hand guarantee: returns a copy of `state` where
// `agent`'s card in `slot` is replaced by (color, rank) with its knowledge
// masks kept intact.  The result is a hypothetical state (card conservation
// may not hold); the observer's own observation must not change.
StatePtr hanabi_replace_card(const Env& env, const EnvState& state, const std::string& agent,
                             int slot, int color, int rank);

}  // namespace marl::envs
