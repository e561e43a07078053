"""Finite normal-form games.

Dense payoff tensors over small named action spaces, plus the solution-concept
helpers the rest of the toolkit builds on: social-welfare optima, best
responses, deviation incentives, pure Nash checks, and cooperation-dilemma
detection. Games round-trip through a JSON table format whose utility keys are
comma-joined action names.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

# A pure action profile: one action index per player.
Profile = tuple[int, ...]

PROFILE_SEPARATOR = ","


class GameFormatError(ValueError):
    """A game description (JSON or constructor input) is malformed."""


class PayoffRangeWarning(UserWarning):
    """Payoffs outside [0, 1] are accepted but flagged; downstream defaults assume normalized games."""


def _validate_action_names(action_names) -> tuple[tuple[str, ...], ...]:
    names = tuple(tuple(per_player) for per_player in action_names)
    if not names:
        raise GameFormatError("a game needs at least one player")
    for i, per_player in enumerate(names):
        if not per_player:
            raise GameFormatError(f"player {i} has no actions")
        for name in per_player:
            if not isinstance(name, str) or not name:
                raise GameFormatError(f"player {i} has an empty or non-string action name")
            if PROFILE_SEPARATOR in name:
                raise GameFormatError(
                    f"action name {name!r} contains {PROFILE_SEPARATOR!r}, "
                    "which would make profile keys ambiguous"
                )
        if len(set(per_player)) != len(per_player):
            raise GameFormatError(f"player {i} has duplicate action names")
    return names


@dataclass(frozen=True, eq=False)
class FiniteGame:
    """An N-player normal-form game with named actions and a dense payoff tensor.

    The tensor has shape (|A_0|, ..., |A_{n-1}|, n): one leading axis per
    player's action set and a trailing axis selecting whose payoff. It is
    validated, copied, and frozen read-only on construction.
    """

    action_names: tuple[tuple[str, ...], ...]  # per player, position = action index
    payoffs: np.ndarray

    def __post_init__(self):
        names = _validate_action_names(self.action_names)
        payoffs = np.asarray(self.payoffs, dtype=np.float64)
        expected = tuple(len(p) for p in names) + (len(names),)
        if payoffs.shape != expected:
            raise GameFormatError(
                f"payoff tensor has shape {payoffs.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(payoffs)):
            raise GameFormatError("payoffs must be finite")
        if payoffs.min() < 0.0 or payoffs.max() > 1.0:
            warnings.warn(
                "payoffs fall outside [0, 1]; the game is kept as-is",
                PayoffRangeWarning,
                stacklevel=2,
            )
        payoffs = payoffs.copy()
        payoffs.setflags(write=False)
        object.__setattr__(self, "action_names", names)
        object.__setattr__(self, "payoffs", payoffs)

    @property
    def num_players(self) -> int:
        return len(self.action_names)

    @property
    def num_actions(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.action_names)


def game_from_table(action_names, table: Mapping[Profile, Sequence[float]]) -> FiniteGame:
    """Build a game from a {profile: payoff vector} table covering every profile."""
    names = _validate_action_names(action_names)
    counts = tuple(len(p) for p in names)
    payoffs = np.full(counts + (len(names),), np.nan)
    seen = set()
    for profile, values in table.items():
        profile = tuple(profile)
        if profile in seen:
            raise GameFormatError(f"profile {profile} listed twice")
        seen.add(profile)
        payoffs[profile] = values
    if len(seen) != int(np.prod(counts)):
        raise GameFormatError("table does not cover every action profile")
    return FiniteGame(names, payoffs)


def enumerate_profiles(game: FiniteGame) -> Iterator[Profile]:
    """All pure profiles in lexicographic order."""
    return itertools.product(*(range(c) for c in game.num_actions))


def _check_profile(game: FiniteGame, profile: Sequence[int]) -> Profile:
    profile = tuple(profile)
    if len(profile) != game.num_players:
        raise ValueError(f"profile {profile} has wrong length for {game.num_players} players")
    for i, a in enumerate(profile):
        if not 0 <= a < game.num_actions[i]:
            raise ValueError(f"action {a} out of range for player {i}")
    return profile


def payoffs_at(game: FiniteGame, profile: Sequence[int]) -> tuple[float, ...]:
    """The payoff vector at a pure profile."""
    profile = _check_profile(game, profile)
    return tuple(float(x) for x in game.payoffs[profile])


def social_welfare_optimum(game: FiniteGame) -> Profile:
    """The profile maximizing the payoff sum; ties go to the lexicographically first."""
    sums = game.payoffs.sum(axis=-1)
    # np.argmax returns the first maximum in C order, which is lexicographic order.
    flat = int(np.argmax(sums))
    return tuple(int(i) for i in np.unravel_index(flat, sums.shape))


def _own_utilities(game: FiniteGame, player: int, opponents: Sequence[int]) -> np.ndarray:
    opp = tuple(opponents)
    if not 0 <= player < game.num_players:
        raise ValueError(f"no player {player}")
    if len(opp) != game.num_players - 1:
        raise ValueError(
            f"expected {game.num_players - 1} opponent actions, got {len(opp)}"
        )
    counts = game.num_actions
    others = [i for i in range(game.num_players) if i != player]
    for i, a in zip(others, opp):
        if not 0 <= a < counts[i]:
            raise ValueError(f"action {a} out of range for player {i}")
    index = opp[:player] + (slice(None),) + opp[player:]
    return game.payoffs[index + (player,)]


def best_response_set(game: FiniteGame, player: int, opponents: Sequence[int]) -> tuple[int, ...]:
    """All payoff-maximizing actions of `player` against fixed opponents.

    `opponents` lists the other players' actions in increasing player order
    (length num_players - 1). Ties mean exact payoff equality; the result is
    ascending.
    """
    utils = _own_utilities(game, player, opponents)
    return tuple(int(a) for a in np.flatnonzero(utils == utils.max()))


def deviation_incentive(game: FiniteGame, profile: Sequence[int], player: int) -> float:
    """Best-response payoff minus current payoff for `player` at `profile` (>= 0)."""
    profile = _check_profile(game, profile)
    opp = tuple(a for j, a in enumerate(profile) if j != player)
    utils = _own_utilities(game, player, opp)
    return float(utils.max() - utils[profile[player]])


def is_nash(game: FiniteGame, profile: Sequence[int]) -> bool:
    """True when no player has a strictly improving unilateral deviation."""
    return all(
        deviation_incentive(game, profile, i) == 0.0 for i in range(game.num_players)
    )


@dataclass(frozen=True)
class PlayerIncentive:
    """One player's deviation incentive at the welfare optimum."""

    player: int
    gain: float  # best-response payoff minus the payoff at the optimum
    witness: int | None  # a maximizing deviation when gain > 0, else None


@dataclass(frozen=True)
class DilemmaReport:
    """Where the welfare optimum sits and who would defect from it."""

    sw_profile: Profile
    sw_total: float
    incentives: tuple[PlayerIncentive, ...]
    dilemma_players: tuple[int, ...]

    @property
    def has_dilemma(self) -> bool:
        return bool(self.dilemma_players)


def detect_cooperation_dilemma(game: FiniteGame) -> DilemmaReport:
    """Check whether any player strictly gains by deviating from the welfare optimum."""
    sw = social_welfare_optimum(game)
    incentives = []
    for i in range(game.num_players):
        gain = deviation_incentive(game, sw, i)
        witness = None
        if gain > 0.0:
            opp = tuple(a for j, a in enumerate(sw) if j != i)
            witness = min(best_response_set(game, i, opp))
        incentives.append(PlayerIncentive(player=i, gain=gain, witness=witness))
    return DilemmaReport(
        sw_profile=sw,
        sw_total=float(game.payoffs[sw].sum()),
        incentives=tuple(incentives),
        dilemma_players=tuple(p.player for p in incentives if p.gain > 0.0),
    )


# ---------------------------------------------------------------------------
# JSON table format
#
# {"players": 2,
#  "actions": [["C", "D"], ["C", "D"]],
#  "utilities": {"C,C": [3, 3], "C,D": [0, 5], "D,C": [5, 0], "D,D": [1, 1]}}
# ---------------------------------------------------------------------------


def _no_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise GameFormatError(f"duplicate JSON key {key!r}")
        obj[key] = value
    return obj


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def profile_key(game: FiniteGame, profile: Sequence[int]) -> str:
    """Render a profile as its comma-joined action names."""
    profile = _check_profile(game, profile)
    return PROFILE_SEPARATOR.join(
        game.action_names[i][a] for i, a in enumerate(profile)
    )


def parse_profile(game: FiniteGame, key: str) -> Profile:
    """Parse a comma-joined action-name key back into a profile."""
    parts = key.split(PROFILE_SEPARATOR)
    if len(parts) != game.num_players:
        raise GameFormatError(
            f"profile key {key!r} names {len(parts)} actions for {game.num_players} players"
        )
    profile = []
    for i, name in enumerate(parts):
        try:
            profile.append(game.action_names[i].index(name))
        except ValueError:
            raise GameFormatError(f"unknown action {name!r} for player {i}") from None
    return tuple(profile)


def parse_game(obj) -> FiniteGame:
    """Build a game from a parsed JSON object; unknown top-level keys are ignored."""
    if not isinstance(obj, Mapping):
        raise GameFormatError("game description must be a JSON object")
    players = obj.get("players")
    if not isinstance(players, int) or isinstance(players, bool) or players < 1:
        raise GameFormatError("'players' must be a positive integer")
    actions = obj.get("actions")
    if not isinstance(actions, (list, tuple)) or len(actions) != players:
        raise GameFormatError("'actions' must list one action-name array per player")
    for i, per_player in enumerate(actions):
        if not isinstance(per_player, (list, tuple)):
            raise GameFormatError(f"'actions'[{i}] must be an array of names")
    names = _validate_action_names(actions)

    utilities = obj.get("utilities")
    if not isinstance(utilities, Mapping):
        raise GameFormatError("'utilities' must be an object keyed by action profiles")
    counts = tuple(len(p) for p in names)
    expected = {
        PROFILE_SEPARATOR.join(names[i][a] for i, a in enumerate(profile))
        for profile in itertools.product(*(range(c) for c in counts))
    }
    given = set(utilities)
    missing = sorted(expected - given)
    unknown = sorted(given - expected)
    if missing:
        raise GameFormatError(f"'utilities' is missing profiles: {', '.join(missing[:5])}")
    if unknown:
        raise GameFormatError(f"'utilities' has unknown profiles: {', '.join(unknown[:5])}")

    payoffs = np.empty(counts + (players,))
    for key, values in utilities.items():
        if not isinstance(values, (list, tuple)) or len(values) != players:
            raise GameFormatError(f"'utilities'[{key!r}] must list {players} payoffs")
        if not all(_is_number(v) for v in values):
            raise GameFormatError(f"'utilities'[{key!r}] must contain finite numbers")
        profile = tuple(names[i].index(part) for i, part in enumerate(key.split(PROFILE_SEPARATOR)))
        payoffs[profile] = values
    return FiniteGame(names, payoffs)


def game_to_dict(game: FiniteGame) -> dict:
    """The JSON-ready table form of a game."""
    return {
        "players": game.num_players,
        "actions": [list(per_player) for per_player in game.action_names],
        "utilities": {
            profile_key(game, profile): [float(x) for x in game.payoffs[profile]]
            for profile in enumerate_profiles(game)
        },
    }


def load_game(path) -> FiniteGame:
    """Load a game from a JSON file, rejecting duplicate keys outright."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: invalid JSON ({exc})") from exc
    return parse_game(obj)


def save_game(game: FiniteGame, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2, sort_keys=True) + "\n")
