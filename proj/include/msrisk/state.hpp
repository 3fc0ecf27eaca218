#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace msrisk {

/// Loan status. Encodings follow the outcome coding used by the regression
/// models: Performing=1, Defaulted=2, Settled=3, Written-off=4.
enum class State : int { P = 1, D = 2, S = 3, W = 4 };

inline constexpr int kNumStates = 4;

inline constexpr std::array<State, kNumStates> kAllStates{State::P, State::D, State::S,
                                                          State::W};
inline constexpr std::array<State, 2> kTransientStates{State::P, State::D};

/// Zero-based index used for matrix rows/columns.
constexpr int index_of(State s) { return static_cast<int>(s) - 1; }

constexpr State state_at(int index) { return static_cast<State>(index + 1); }

/// S and W end the observation of a loan.
constexpr bool is_absorbing(State s) { return s == State::S || s == State::W; }

constexpr char state_letter(State s) {
  constexpr char letters[] = {'P', 'D', 'S', 'W'};
  return letters[index_of(s)];
}

inline std::string to_string(State s) { return std::string(1, state_letter(s)); }

/// Accepts "P","D","S","W" (case-insensitive) or "1".."4".
std::optional<State> parse_state(std::string_view token);

/// Two-letter transition tag, e.g. "PD".
inline std::string transition_tag(State from, State to) {
  return std::string{state_letter(from), state_letter(to)};
}

}  // namespace msrisk
