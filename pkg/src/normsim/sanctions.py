"""Sanction games layered on a base finite game.

Alongside its base action, each player picks a classification function from a
finite menu: a set of (profile, target) pairs it deems sanction-worthy, a cost
it imposes on each sanctioned target, and a self-cost it pays per sanction
issued. This module provides:

- the realized per-player sanction cost and the payoff transform that
  subtracts it from the base game,
- the dilemma-resolution test for a transform,
- minimax punishment values and the enforceability report (can a target
  profile be made a pure Nash equilibrium through the menus?),
- correlated advice over joint classifier profiles and its verification,
  in both the unconditional (`literal`) and recommendation-conditioned
  (`conditioned`) senses.

Sanction-game utility is the NEGATIVE of total cost throughout, so "better"
always means "less punished".
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

from . import games
from .games import FiniteGame, GameFormatError, Profile

# One menu index per player.
ClassifierProfile = tuple[int, ...]

# Slack for the weak correlated-equilibrium inequality.
CE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ClassificationFunction:
    """One player's sanctioning rule.

    `sanctions` holds (base profile, target player) pairs: whenever play lands
    on that profile, the owner imposes `cost` on the target and pays
    `self_cost` for issuing the sanction.
    """

    owner: int
    sanctions: frozenset[tuple[Profile, int]]
    cost: float  # imposed on each sanctioned target at a matching profile
    self_cost: float = 0.0  # paid by the owner per sanction issued

    def __post_init__(self):
        pairs = frozenset((tuple(profile), int(target)) for profile, target in self.sanctions)
        if self.owner < 0:
            raise ValueError("owner must be a player index")
        for profile, target in pairs:
            if target == self.owner:
                raise ValueError(
                    "self-targeting sanctions are expressed through self_cost, "
                    f"not the sanction set (player {self.owner})"
                )
        for value, label in ((self.cost, "cost"), (self.self_cost, "self_cost")):
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{label} must be finite and >= 0, got {value}")
        object.__setattr__(self, "sanctions", pairs)

    @property
    def is_never(self) -> bool:
        return not self.sanctions


def never_sanction(owner: int) -> ClassificationFunction:
    """The empty classifier: sanctions nobody, costs nothing."""
    return ClassificationFunction(owner=owner, sanctions=frozenset(), cost=0.0, self_cost=0.0)


@dataclass(frozen=True, eq=False)
class SanctionGame:
    """A base game plus one finite classifier menu per player.

    Every menu must contain a never-sanction entry, so refusing to punish is
    always an available strategy.
    """

    base: FiniteGame
    menus: tuple[tuple[ClassificationFunction, ...], ...]

    def __post_init__(self):
        menus = tuple(tuple(menu) for menu in self.menus)
        if len(menus) != self.base.num_players:
            raise ValueError(
                f"{len(menus)} menus for {self.base.num_players} players"
            )
        counts = self.base.num_actions
        for i, menu in enumerate(menus):
            if not menu:
                raise ValueError(f"player {i} has an empty classifier menu")
            if not any(c.is_never for c in menu):
                raise ValueError(f"player {i}'s menu lacks a never-sanction entry")
            for c in menu:
                if c.owner != i:
                    raise ValueError(
                        f"classifier owned by player {c.owner} placed in player {i}'s menu"
                    )
                for profile, target in c.sanctions:
                    if not 0 <= target < len(menus):
                        raise ValueError(f"sanction target {target} is not a player")
                    if len(profile) != len(counts) or any(
                        not 0 <= a < counts[j] for j, a in enumerate(profile)
                    ):
                        raise ValueError(f"sanctioned profile {profile} not in the base game")
        object.__setattr__(self, "menus", menus)

    @property
    def num_players(self) -> int:
        return self.base.num_players


def _check_classifiers(sg: SanctionGame, classifiers: Sequence[int]) -> ClassifierProfile:
    cls = tuple(classifiers)
    if len(cls) != sg.num_players:
        raise ValueError(f"classifier profile {cls} has wrong length")
    for i, c in enumerate(cls):
        if not 0 <= c < len(sg.menus[i]):
            raise ValueError(f"classifier index {c} not in player {i}'s menu")
    return cls


def enumerate_classifier_profiles(sg: SanctionGame) -> Iterator[ClassifierProfile]:
    """All joint menu selections in lexicographic order."""
    return itertools.product(*(range(len(menu)) for menu in sg.menus))


def sanction_cost(
    sg: SanctionGame, classifiers: Sequence[int], base_profile: Sequence[int], player: int
) -> float:
    """Total sanction cost borne by `player` at a profile: own issuing self-costs
    plus every other player's sanction that names `player` there."""
    base_profile = games._check_profile(sg.base, base_profile)
    cls = _check_classifiers(sg, classifiers)
    own = sg.menus[player][cls[player]]
    cost = own.self_cost * sum(1 for profile, _ in own.sanctions if profile == base_profile)
    for j, idx in enumerate(cls):
        if j == player:
            continue
        other = sg.menus[j][idx]
        if (base_profile, player) in other.sanctions:
            cost += other.cost
    return cost


def sanction_utility(
    sg: SanctionGame, classifiers: Sequence[int], base_profile: Sequence[int], player: int
) -> float:
    """Sanction-game payoff: negated total cost."""
    return -sanction_cost(sg, classifiers, base_profile, player)


def apply_transform(sg: SanctionGame, classifiers: Sequence[int]) -> FiniteGame:
    """The base game with each player's realized sanction cost subtracted everywhere."""
    cls = _check_classifiers(sg, classifiers)
    payoffs = np.array(sg.base.payoffs)
    for profile in games.enumerate_profiles(sg.base):
        for i in range(sg.num_players):
            payoffs[profile + (i,)] -= sanction_cost(sg, cls, profile, i)
    with warnings.catch_warnings():
        # sanctioned payoffs legitimately go negative; the range note is for inputs
        warnings.simplefilter("ignore", games.PayoffRangeWarning)
        return FiniteGame(sg.base.action_names, payoffs)


def is_dilemma_resolving(base: FiniteGame, transformed: FiniteGame, player: int) -> bool:
    """True iff `player` has a profitable deviation from the base welfare optimum
    and every such deviation is strictly losing in the transformed game."""
    if base.num_actions != transformed.num_actions:
        raise ValueError("base and transformed games have different shapes")
    sw = games.social_welfare_optimum(base)
    opp = tuple(a for j, a in enumerate(sw) if j != player)
    base_u = games._own_utilities(base, player, opp)
    trans_u = games._own_utilities(transformed, player, opp)
    profitable = [a for a in range(base.num_actions[player]) if base_u[a] > base_u[sw[player]]]
    if not profitable:
        return False
    return all(trans_u[a] < trans_u[sw[player]] for a in profitable)


def sanction_minimax(sg: SanctionGame, base_profile: Sequence[int], player: int) -> float:
    """min over the others' classifiers of the best sanction utility `player`
    can still secure at `base_profile`, by full menu enumeration."""
    base_profile = games._check_profile(sg.base, base_profile)
    others = [j for j in range(sg.num_players) if j != player]
    worst = math.inf
    for combo in itertools.product(*(range(len(sg.menus[j])) for j in others)):
        assignment = dict(zip(others, combo))
        best = -math.inf
        for own in range(len(sg.menus[player])):
            assignment[player] = own
            cls = tuple(assignment[j] for j in range(sg.num_players))
            best = max(best, sanction_utility(sg, cls, base_profile, player))
        worst = min(worst, best)
    return worst


@dataclass(frozen=True)
class PlayerFeasibility:
    """Enforceability numbers for one player at a target profile."""

    player: int
    delta: float  # deviation incentive at the target, in the base game
    minimax: float  # sanction-game minimax utility at the punishing profile
    punish_profile: Profile
    enforceable: bool  # delta == 0, or -delta > minimax


@dataclass(frozen=True)
class FeasibilityReport:
    target: Profile
    players: tuple[PlayerFeasibility, ...]
    enforceable: bool
    witness: ClassifierProfile | None  # transform making the target Nash, when found


def find_nash_witness(sg: SanctionGame, target: Sequence[int]) -> ClassifierProfile | None:
    """Exhaustively search the menus for a classifier profile whose transform
    makes `target` a pure Nash equilibrium. The all-never profile is tried
    first so an already-stable target gets the zero-sanction witness."""
    target = games._check_profile(sg.base, target)
    never = non_resolving_witness(sg)
    candidates = itertools.chain(
        [never], (c for c in enumerate_classifier_profiles(sg) if c != never)
    )
    for cls in candidates:
        if games.is_nash(apply_transform(sg, cls), target):
            return cls
    return None


def theorem1_feasibility(sg: SanctionGame, target: Sequence[int]) -> FeasibilityReport:
    """Can the menus make `target` a Nash equilibrium?

    Per player: delta is the base-game deviation incentive at the target;
    minimax is the punishment floor the others can force at that player's
    punishing profile (its cheapest profitable deviation, or the target itself
    when there is none). The player is enforceable when delta == 0 or the
    required punishment payoff -delta strictly exceeds the floor. When every
    player is enforceable the report carries a brute-force witness.
    """
    target = games._check_profile(sg.base, target)
    players = []
    for i in range(sg.num_players):
        delta = games.deviation_incentive(sg.base, target, i)
        if delta == 0.0:
            punish = target
        else:
            opp = tuple(a for j, a in enumerate(target) if j != i)
            best = min(games.best_response_set(sg.base, i, opp))
            punish = target[:i] + (best,) + target[i + 1 :]
        minimax = sanction_minimax(sg, punish, i)
        enforceable = delta == 0.0 or -delta > minimax
        players.append(
            PlayerFeasibility(
                player=i,
                delta=delta,
                minimax=minimax,
                punish_profile=punish,
                enforceable=enforceable,
            )
        )
    all_enforceable = all(p.enforceable for p in players)
    witness = find_nash_witness(sg, target) if all_enforceable else None
    return FeasibilityReport(
        target=target, players=tuple(players), enforceable=all_enforceable, witness=witness
    )


def non_resolving_witness(sg: SanctionGame) -> ClassifierProfile:
    """The all-never-sanction profile: its transform is the identity, so it never
    resolves a dilemma (and never changes any Nash verdict)."""
    profile = []
    for menu in sg.menus:
        profile.append(next(i for i, c in enumerate(menu) if c.is_never))
    return tuple(profile)


def declaration_classifier(
    base: FiniteGame, owner: int, target_profile: Sequence[int], cost: float, self_cost: float = 0.0
) -> ClassificationFunction:
    """A classifier that sanctions every other player at every profile where that
    player's own component deviates from `target_profile`."""
    target_profile = games._check_profile(base, target_profile)
    pairs = set()
    for profile in games.enumerate_profiles(base):
        for t in range(base.num_players):
            if t != owner and profile[t] != target_profile[t]:
                pairs.add((profile, t))
    return ClassificationFunction(owner=owner, sanctions=frozenset(pairs), cost=cost, self_cost=self_cost)


def exhaustive_menu(
    base: FiniteGame, owner: int, cost: float, self_cost: float = 0.0, limit: int = 4096
) -> tuple[ClassificationFunction, ...]:
    """Classifiers over the (profile, target) pairs available to `owner`, in
    smallest-sanction-set-first (then lexicographic) order, truncated to the
    first `limit` entries. The full set has 2^(|profiles| * (players - 1))
    members, so the cap is what keeps tiny-game searches tiny."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    pairs = sorted(
        (profile, t)
        for profile in games.enumerate_profiles(base)
        for t in range(base.num_players)
        if t != owner
    )
    menu = []
    for size in range(len(pairs) + 1):
        for combo in itertools.combinations(pairs, size):
            menu.append(
                ClassificationFunction(
                    owner=owner, sanctions=frozenset(combo), cost=cost, self_cost=self_cost
                )
            )
            if len(menu) == limit:
                return tuple(menu)
    return tuple(menu)


# ---------------------------------------------------------------------------
# Correlated advice
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdviceDistribution:
    """A distribution over joint classifier profiles (menu indices)."""

    support: tuple[tuple[ClassifierProfile, float], ...]

    def __post_init__(self):
        support = tuple((tuple(profile), float(p)) for profile, p in self.support)
        for profile, p in support:
            if not math.isfinite(p) or p < 0.0:
                raise ValueError(f"probability {p} for {profile} must be finite and >= 0")
        total = sum(p for _, p in support)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"advice probabilities sum to {total}, expected 1")
        object.__setattr__(self, "support", support)

    def validate_for(self, sg: SanctionGame) -> None:
        for profile, _ in self.support:
            _check_classifiers(sg, profile)


def advice_point_mass(classifiers: Sequence[int]) -> AdviceDistribution:
    return AdviceDistribution(support=((tuple(classifiers), 1.0),))


@dataclass(frozen=True)
class CEReport:
    """Outcome of a correlated-equilibrium check over sanction advice."""

    mode: str
    holds: bool
    worst_violation: float  # largest positive margin; 0.0 when the advice holds
    violating_player: int | None
    violating_deviation: int | None  # menu index of the profitable alternative
    violating_recommendation: int | None  # conditioned mode only


def verify_correlated_equilibrium(
    sg: SanctionGame,
    advice: AdviceDistribution,
    base_profile: Sequence[int],
    mode: str = "literal",
) -> CEReport:
    """Check that no player gains by deviating from advised classifiers.

    `literal` compares obedience against each fixed alternative classifier,
    unconditionally (the printed, coarse-correlated form). `conditioned`
    runs the standard correlated-equilibrium check: the deviation may depend
    on the recommended classifier. Inequalities are weak with CE_TOLERANCE
    slack; utilities are sanction-game utilities at `base_profile`.
    """
    if mode not in ("literal", "conditioned"):
        raise ValueError(f"unknown mode {mode!r}")
    base_profile = games._check_profile(sg.base, base_profile)
    advice.validate_for(sg)

    def util(player: int, cls: ClassifierProfile) -> float:
        return sanction_utility(sg, cls, base_profile, player)

    worst = 0.0
    who: int | None = None
    dev: int | None = None
    rec: int | None = None
    for i in range(sg.num_players):
        alternatives = range(len(sg.menus[i]))
        if mode == "literal":
            groups = [(None, advice.support)]
        else:
            by_rec: dict[int, list[tuple[ClassifierProfile, float]]] = {}
            for profile, p in advice.support:
                if p > 0.0:
                    by_rec.setdefault(profile[i], []).append((profile, p))
            groups = sorted(by_rec.items())
        for recommended, mass in groups:
            for d in alternatives:
                margin = sum(
                    p * (util(i, profile[:i] + (d,) + profile[i + 1 :]) - util(i, profile))
                    for profile, p in mass
                )
                if margin > worst:
                    worst, who, dev, rec = margin, i, d, recommended
    if worst <= CE_TOLERANCE:
        return CEReport(mode, True, 0.0, None, None, None)
    return CEReport(mode, False, worst, who, dev, rec)


def institution_environment_check(
    sg: SanctionGame, institutions: Sequence[AdviceDistribution], base_profile: Sequence[int]
) -> bool:
    """True iff at least one advice distribution passes the literal check."""
    return any(
        verify_correlated_equilibrium(sg, advice, base_profile, mode="literal").holds
        for advice in institutions
    )


# ---------------------------------------------------------------------------
# JSON format: the game file plus a "classifiers" menu array, and advice files
# holding menu-index profiles with probabilities.
# ---------------------------------------------------------------------------


def parse_sanction_game(obj) -> SanctionGame:
    base = games.parse_game(obj)
    raw_menus = obj.get("classifiers")
    if not isinstance(raw_menus, (list, tuple)) or len(raw_menus) != base.num_players:
        raise GameFormatError("'classifiers' must list one menu per player")
    menus = []
    for i, raw_menu in enumerate(raw_menus):
        if not isinstance(raw_menu, (list, tuple)) or not raw_menu:
            raise GameFormatError(f"'classifiers'[{i}] must be a non-empty array")
        menu = []
        for k, raw in enumerate(raw_menu):
            where = f"'classifiers'[{i}][{k}]"
            if not isinstance(raw, Mapping):
                raise GameFormatError(f"{where} must be an object")
            raw_sanctions = raw.get("sanctions")
            if not isinstance(raw_sanctions, (list, tuple)):
                raise GameFormatError(f"{where} needs a 'sanctions' array")
            pairs = set()
            for entry in raw_sanctions:
                if not isinstance(entry, Mapping) or "profile" not in entry or "target" not in entry:
                    raise GameFormatError(f"{where} sanctions need 'profile' and 'target'")
                profile = games.parse_profile(base, entry["profile"])
                target = entry["target"]
                if not isinstance(target, int) or isinstance(target, bool):
                    raise GameFormatError(f"{where} target must be a player index")
                pairs.add((profile, target))
            cost = raw.get("cost", 0.0)
            self_cost = raw.get("self_cost", 0.0)
            if not games._is_number(cost) or not games._is_number(self_cost):
                raise GameFormatError(f"{where} costs must be finite numbers")
            try:
                menu.append(
                    ClassificationFunction(
                        owner=i, sanctions=frozenset(pairs), cost=float(cost), self_cost=float(self_cost)
                    )
                )
            except ValueError as exc:
                raise GameFormatError(f"{where}: {exc}") from exc
        menus.append(tuple(menu))
    try:
        return SanctionGame(base=base, menus=tuple(menus))
    except ValueError as exc:
        raise GameFormatError(str(exc)) from exc


def sanction_game_to_dict(sg: SanctionGame) -> dict:
    out = games.game_to_dict(sg.base)
    out["classifiers"] = [
        [
            {
                "sanctions": [
                    {"profile": games.profile_key(sg.base, profile), "target": target}
                    for profile, target in sorted(c.sanctions)
                ],
                "cost": c.cost,
                "self_cost": c.self_cost,
            }
            for c in menu
        ]
        for menu in sg.menus
    ]
    return out


def load_sanction_game(path) -> SanctionGame:
    text = Path(path).read_text()
    try:
        obj = json.loads(text, object_pairs_hook=games._no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: invalid JSON ({exc})") from exc
    return parse_sanction_game(obj)


def parse_advice(obj) -> AdviceDistribution:
    if not isinstance(obj, Mapping) or not isinstance(obj.get("support"), (list, tuple)):
        raise GameFormatError("advice must be an object with a 'support' array")
    support = []
    for k, entry in enumerate(obj["support"]):
        where = f"'support'[{k}]"
        if not isinstance(entry, Mapping):
            raise GameFormatError(f"{where} must be an object")
        indices = entry.get("profile_indices")
        p = entry.get("p")
        if not isinstance(indices, (list, tuple)) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in indices
        ):
            raise GameFormatError(f"{where} needs integer 'profile_indices'")
        if not games._is_number(p):
            raise GameFormatError(f"{where} needs a numeric probability 'p'")
        support.append((tuple(indices), float(p)))
    try:
        return AdviceDistribution(support=tuple(support))
    except ValueError as exc:
        raise GameFormatError(str(exc)) from exc


def advice_to_dict(advice: AdviceDistribution) -> dict:
    return {
        "support": [
            {"profile_indices": list(profile), "p": p} for profile, p in advice.support
        ]
    }


def load_advice(path) -> AdviceDistribution:
    text = Path(path).read_text()
    try:
        obj = json.loads(text, object_pairs_hook=games._no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: invalid JSON ({exc})") from exc
    return parse_advice(obj)
