"""Classification institutions: the village Chieftains.

Each institution declares a crop at the start of every timestep and renders it
as a fixed-template signal. For game-level analysis, a declaration maps to the
joint classifier profile that sanctions exactly the deviations from the
declared crop, wrapped as point-mass advice.

The `authoritative` flag is ground truth for the environment and harness only;
nothing observable by an agent carries it.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import sanctions
from .sanctions import AdviceDistribution, SanctionGame

# Fixed name pool, indexed by institution id.
INSTITUTION_NAMES = ("Ophilia", "Bram", "Cyra", "Dorn", "Elia")

# Canonical crop list; environments use a prefix of it.
CROP_NAMES = ("apples", "bananas", "peaches", "oranges", "plums")

SIGNAL_TEMPLATE = (
    "Valued citizens of Skymeadow, let's focus on harvesting {crop}. "
    "It is important for the prosperity of our community!"
)


@dataclass(frozen=True)
class ConstantDeclaration:
    """Declare the same crop every step."""

    crop: int

    def crop_at(self, t: int) -> int:
        return self.crop


@dataclass(frozen=True)
class RotatingDeclaration:
    """Cycle through a crop list, one entry per step."""

    crops: tuple[int, ...]

    def __post_init__(self):
        crops = tuple(self.crops)
        if not crops:
            raise ValueError("rotation needs at least one crop")
        object.__setattr__(self, "crops", crops)

    def crop_at(self, t: int) -> int:
        return self.crops[t % len(self.crops)]


@dataclass(frozen=True)
class Institution:
    id: int
    name: str
    policy: ConstantDeclaration | RotatingDeclaration
    authoritative: bool = False  # environment/harness ground truth, never observed


@dataclass(frozen=True)
class InstitutionSignal:
    institution_id: int
    name: str  # public knowledge; carries no authority information
    timestep: int
    crop: int
    text: str


def institution_name(idx: int) -> str:
    if 0 <= idx < len(INSTITUTION_NAMES):
        return INSTITUTION_NAMES[idx]
    return f"Chieftain{idx}"


def make_institution(idx: int, crop: int, authoritative: bool = False) -> Institution:
    """An id-named institution with a constant declaration."""
    return Institution(
        id=idx, name=institution_name(idx), policy=ConstantDeclaration(crop), authoritative=authoritative
    )


def declare(inst: Institution, t: int, crop_names: tuple[str, ...] = CROP_NAMES) -> InstitutionSignal:
    """The institution's signal at step t. Pure: same inputs, same bytes."""
    if t < 0:
        raise ValueError("timestep must be >= 0")
    crop = inst.policy.crop_at(t)
    if not 0 <= crop < len(crop_names):
        raise ValueError(f"{inst.name} declared crop {crop}, outside the crop list")
    return InstitutionSignal(
        institution_id=inst.id,
        name=inst.name,
        timestep=t,
        crop=crop,
        text=SIGNAL_TEMPLATE.format(crop=crop_names[crop]),
    )


def advice_profile(inst: Institution, sg: SanctionGame, t: int) -> AdviceDistribution:
    """Point-mass advice on the per-player classifiers that sanction exactly
    the profiles where some target deviates from the declared crop.

    Raises LookupError when a player's menu has no such classifier.
    """
    declared = inst.policy.crop_at(t)
    target = (declared,) * sg.num_players
    indices = []
    for player in range(sg.num_players):
        required = sanctions.declaration_classifier(sg.base, player, target, cost=0.0).sanctions
        found = next(
            (k for k, c in enumerate(sg.menus[player]) if c.sanctions == required), None
        )
        if found is None:
            raise LookupError(
                f"player {player}'s menu has no classifier sanctioning exactly "
                f"deviations from crop {declared} ({inst.name}'s declaration)"
            )
        indices.append(found)
    return sanctions.advice_point_mass(indices)


def parse_institution(obj, idx: int, crop_names: tuple[str, ...]) -> Institution:
    """Build an institution from its config entry.

    Accepts {"name": ..., "crop": "<crop name>", "authoritative": bool} or a
    "rotation" list of crop names in place of "crop".
    """
    if not isinstance(obj, dict):
        raise ValueError(f"institutions[{idx}] must be an object")
    name = obj.get("name", institution_name(idx))
    if not isinstance(name, str) or not name:
        raise ValueError(f"institutions[{idx}].name must be a non-empty string")

    def crop_index(label) -> int:
        if not isinstance(label, str) or label not in crop_names:
            raise ValueError(
                f"institutions[{idx}] names unknown crop {label!r}; "
                f"expected one of {', '.join(crop_names)}"
            )
        return crop_names.index(label)

    if "rotation" in obj:
        rotation = obj["rotation"]
        if not isinstance(rotation, (list, tuple)) or not rotation:
            raise ValueError(f"institutions[{idx}].rotation must be a non-empty array")
        policy = RotatingDeclaration(tuple(crop_index(label) for label in rotation))
    elif "crop" in obj:
        policy = ConstantDeclaration(crop_index(obj["crop"]))
    else:
        raise ValueError(f"institutions[{idx}] needs 'crop' or 'rotation'")
    authoritative = obj.get("authoritative", False)
    if not isinstance(authoritative, bool):
        raise ValueError(f"institutions[{idx}].authoritative must be a boolean")
    return Institution(id=idx, name=name, policy=policy, authoritative=authoritative)
