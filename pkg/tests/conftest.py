"""Shared fixtures: the classic two-player dilemma, a three-player effort
game, and declaration-style sanction menus over them."""
import itertools

import pytest

from normsim import games, sanctions


@pytest.fixture
def pd() -> games.FiniteGame:
    return games.game_from_table(
        [["C", "D"], ["C", "D"]],
        {(0, 0): [3, 3], (0, 1): [0, 5], (1, 0): [5, 0], (1, 1): [1, 1]},
    )


@pytest.fixture
def effort() -> games.FiniteGame:
    # u_i = 2/3 * (total effort) - own effort; working is socially optimal,
    # shirking is individually optimal.
    def u(profile):
        total = sum(profile)
        return [2.0 * total / 3.0 - x for x in profile]

    table = {p: u(p) for p in itertools.product((0, 1), repeat=3)}
    return games.game_from_table([["rest", "work"]] * 3, table)


def declaration_menus(game, target, cost, self_cost=0.1):
    """Per-player menus [never, declare-target] used across the sanction tests."""
    menus = []
    for owner in range(game.num_players):
        menus.append(
            (
                sanctions.never_sanction(owner),
                sanctions.declaration_classifier(game, owner, target, cost, self_cost),
            )
        )
    return tuple(menus)


@pytest.fixture
def pd_sg3(pd) -> sanctions.SanctionGame:
    return sanctions.SanctionGame(base=pd, menus=declaration_menus(pd, (0, 0), 3.0))


@pytest.fixture
def pd_sg1(pd) -> sanctions.SanctionGame:
    return sanctions.SanctionGame(base=pd, menus=declaration_menus(pd, (0, 0), 1.0))
