"""Agent policies for the orchard.

Three kinds of villager:

- Background agents are hard-coded community members. In follow mode they
  harvest their institution's declared crop and criticize anyone who strayed
  from it last step. In defy mode they harvest a fixed defiance crop and
  criticize anyone who OBEYED the institution last step.
- The baseline newcomer obeys an institution signal (picked uniformly at
  random when there are several) and never criticizes.
- The normative newcomer keeps one expert per institution plus a
  community-majority expert, each predicting whether a given crop draws
  criticism. Expert weights update by the Weighted Majority rule (wrong,
  non-abstaining experts are multiplied by beta). The agent harvests the crop
  with the lowest weighted criticism vote and, once a single institution
  expert holds more than `sanction_threshold` of the total weight, criticizes
  deviations from that institution's declaration itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .orchard import Criticism, EnvConfig, Observation, modal_crop

INSTITUTION_CRITICISM = (
    "{target}, I'm extremely disappointed in your continued disobedience of "
    "Chieftain {institution}'s guidance!"
)
COMMUNITY_CRITICISM = (
    "{target}, I saw you harvested {crop}; you know that in this community we "
    "are supposed to harvest {expected}."
)

# Idle utterances, fixed so transcripts stay byte-stable.
FOLLOW_IDLE = "Chieftain {institution} has spoken; let's all harvest {crop} for the good of Skymeadow."
DEFY_IDLE = "Remember what the elders taught us; in Skymeadow we harvest {crop} together."
BASELINE_IDLE = "I'm still getting to know Skymeadow; I'll follow the guidance I hear."
NORMATIVE_ARRIVAL = "I'm new to Skymeadow and eager to be a good citizen."
NORMATIVE_IDLE = "I'm watching what the community values before committing to a crop."


# ---------------------------------------------------------------------------
# Normative module: experts, weighted votes, updates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expert:
    """A predictor of community criticism: one institution's declaration, or
    the majority crop of the other agents."""

    kind: str  # "institution" | "community"
    institution_id: int | None = None

    def __post_init__(self):
        if self.kind not in ("institution", "community"):
            raise ValueError(f"unknown expert kind {self.kind!r}")
        if (self.kind == "institution") != (self.institution_id is not None):
            raise ValueError("institution experts (and only they) need an institution_id")


def _expert_vote(expert: Expert, obs: Observation, action: int) -> bool | None:
    """True = predicts criticism of `action`, False = predicts none, None = abstain."""
    if expert.kind == "institution":
        sig = next(
            (s for s in obs.signals if s.institution_id == expert.institution_id), None
        )
        if sig is None:
            return None
        return action != sig.crop
    others = [a for i, a in enumerate(obs.last_step_actions) if i != obs.agent_index]
    if not others:
        return None
    return action != modal_crop(others)


@dataclass(frozen=True)
class NormativeState:
    """The learned institutional parameters: positive per-expert weights."""

    experts: tuple[Expert, ...]
    weights: tuple[float, ...]
    beta: float = 0.5  # multiplicative penalty for a wrong prediction
    sanction_threshold: float = 0.6  # weight share above which the agent sanctions

    def __post_init__(self):
        experts = tuple(self.experts)
        weights = tuple(float(w) for w in self.weights)
        if len(experts) != len(weights):
            raise ValueError("one weight per expert")
        if any(not math.isfinite(w) or w <= 0.0 for w in weights):
            raise ValueError("weights must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if not 0.0 < self.sanction_threshold <= 1.0:
            raise ValueError("sanction_threshold must be in (0, 1]")
        object.__setattr__(self, "experts", experts)
        object.__setattr__(self, "weights", weights)


def initial_state(
    institution_ids: Iterable[int], beta: float = 0.5, sanction_threshold: float = 0.6
) -> NormativeState:
    """Unit weights over one expert per institution plus the community expert."""
    experts = tuple(Expert("institution", i) for i in institution_ids) + (Expert("community"),)
    return NormativeState(
        experts=experts,
        weights=(1.0,) * len(experts),
        beta=beta,
        sanction_threshold=sanction_threshold,
    )


@dataclass(frozen=True)
class SanctionPrediction:
    action: int
    probability: float  # weighted vote that the community will criticize this action


def predict_sanction(ns: NormativeState, obs: Observation, action: int) -> SanctionPrediction:
    """Weighted share of non-abstaining experts predicting criticism; 0 when all abstain."""
    voting = 0.0
    saying_sanction = 0.0
    for expert, weight in zip(ns.experts, ns.weights):
        vote = _expert_vote(expert, obs, action)
        if vote is None:
            continue
        voting += weight
        if vote:
            saying_sanction += weight
    probability = saying_sanction / voting if voting > 0.0 else 0.0
    return SanctionPrediction(action=action, probability=probability)


def leading_institution(ns: NormativeState) -> tuple[Expert | None, float]:
    """The heaviest institution expert (first on ties) and its share of ALL weight."""
    total = sum(ns.weights)
    best: Expert | None = None
    best_weight = -math.inf
    for expert, weight in zip(ns.experts, ns.weights):
        if expert.kind == "institution" and weight > best_weight:
            best, best_weight = expert, weight
    if best is None:
        return None, 0.0
    return best, best_weight / total


def sanction_criticisms(ns: NormativeState, obs: Observation) -> tuple[Criticism, ...]:
    """Criticisms of deviations from the leading institution's declaration, emitted
    only when that expert's weight share clears the threshold."""
    expert, share = leading_institution(ns)
    if expert is None or share <= ns.sanction_threshold or not obs.last_step_actions:
        return ()
    sig = next((s for s in obs.signals if s.institution_id == expert.institution_id), None)
    if sig is None:
        return ()
    criticisms = []
    for j, crop in enumerate(obs.last_step_actions):
        if j == obs.agent_index or crop == sig.crop:
            continue
        criticisms.append(
            Criticism(
                sender=obs.agent_index,
                target=j,
                criticized_crop=crop,
                basis=expert.institution_id,
                text=INSTITUTION_CRITICISM.format(
                    target=obs.agent_names[j], institution=sig.name
                ),
            )
        )
    return tuple(criticisms)


def normative_action(ns: NormativeState, obs: Observation) -> tuple[int, tuple[Criticism, ...]]:
    """The crop minimizing the criticism vote (ties: previous own action, then
    lowest index), plus any threshold-gated criticisms."""
    num_crops = len(obs.crop_names)
    probs = [predict_sanction(ns, obs, c).probability for c in range(num_crops)]
    best = min(probs)
    tied = [c for c in range(num_crops) if probs[c] == best]
    if obs.last_step_actions and obs.last_step_actions[obs.agent_index] in tied:
        action = obs.last_step_actions[obs.agent_index]
    else:
        action = tied[0]
    return action, sanction_criticisms(ns, obs)


def wm_update(
    ns: NormativeState, obs: Observation, observed: Sequence[tuple[int, bool]]
) -> NormativeState:
    """Weighted Majority update: for each observed (action, sanctioned) pair,
    every non-abstaining expert that mispredicted is multiplied by beta.
    Weights are never renormalized; shares are computed on demand."""
    weights = list(ns.weights)
    for action, sanctioned in observed:
        for k, expert in enumerate(ns.experts):
            vote = _expert_vote(expert, obs, action)
            if vote is not None and vote != bool(sanctioned):
                weights[k] *= ns.beta
    return replace(ns, weights=tuple(weights))


def derive_outcomes(obs: Observation, observe_others: bool = True) -> tuple[tuple[int, bool], ...]:
    """(last-step action, was it criticized this step?) pairs, the learning signal
    for wm_update. The observer's own sent criticisms are excluded so its
    sanctioning cannot feed back into its own learning."""
    if not obs.last_step_actions:
        return ()
    sanctioned_targets = {
        c.target
        for entry in obs.discussion_so_far
        for c in entry.criticisms
        if c.sender != obs.agent_index
    }
    if observe_others:
        indices: Sequence[int] = range(len(obs.last_step_actions))
    else:
        indices = (obs.agent_index,)
    return tuple(
        (obs.last_step_actions[j], j in sanctioned_targets) for j in indices
    )


def run_weighted_majority(
    predictions: Sequence[Sequence[bool | None]],
    outcomes: Sequence[bool],
    beta: float,
) -> tuple[int, tuple[float, ...]]:
    """Framework-free Weighted Majority over a fixed prediction table.

    Per round the weighted vote predicts True when the True-side weight is at
    least half of the non-abstaining weight (ties predict True); wrong,
    non-abstaining experts are multiplied by beta. Returns (vote mistakes,
    final weights). Used to check the mistake bound directly.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    num_experts = len(predictions[0]) if predictions else 0
    weights = [1.0] * num_experts
    mistakes = 0
    for preds, outcome in zip(predictions, outcomes):
        voting = sum(w for w, p in zip(weights, preds) if p is not None)
        saying_true = sum(w for w, p in zip(weights, preds) if p is True)
        vote = voting > 0.0 and saying_true >= voting / 2.0
        if vote != outcome:
            mistakes += 1
        for k, p in enumerate(preds):
            if p is not None and p != outcome:
                weights[k] *= beta
    return mistakes, tuple(weights)


# ---------------------------------------------------------------------------
# Policy functions
# ---------------------------------------------------------------------------


def _signal_for(obs: Observation, institution_id: int):
    sig = next((s for s in obs.signals if s.institution_id == institution_id), None)
    if sig is None:
        raise ValueError(f"no signal from institution {institution_id}")
    return sig


def background_policy(
    obs: Observation,
    mode: str,
    my_institution: int | None = None,
    defy_crop: int | None = None,
) -> tuple[int, tuple[Criticism, ...]]:
    """Hard-coded villager behavior. Follow mode harvests the declaration and
    criticizes last step's strays; defy mode harvests `defy_crop` and
    criticizes last step's obeyers on community grounds."""
    if my_institution is None:
        raise ValueError(f"{mode} mode needs an institution to react to")
    sig = _signal_for(obs, my_institution)
    declared = sig.crop
    criticisms: list[Criticism] = []
    if mode == "follow_authoritative":
        action = declared
        for j, crop in enumerate(obs.last_step_actions):
            if j == obs.agent_index or crop == declared:
                continue
            criticisms.append(
                Criticism(
                    sender=obs.agent_index,
                    target=j,
                    criticized_crop=crop,
                    basis=my_institution,
                    text=INSTITUTION_CRITICISM.format(
                        target=obs.agent_names[j], institution=sig.name
                    ),
                )
            )
    elif mode == "defy_institution":
        if defy_crop is None or defy_crop == declared:
            raise ValueError("defy mode needs a defy_crop different from the declaration")
        action = defy_crop
        for j, crop in enumerate(obs.last_step_actions):
            if j == obs.agent_index or crop != declared:
                continue
            criticisms.append(
                Criticism(
                    sender=obs.agent_index,
                    target=j,
                    criticized_crop=crop,
                    basis=None,
                    text=COMMUNITY_CRITICISM.format(
                        target=obs.agent_names[j],
                        crop=obs.crop_names[crop],
                        expected=obs.crop_names[defy_crop],
                    ),
                )
            )
    else:
        raise ValueError(f"unknown background mode {mode!r}")
    return action, tuple(criticisms)


def baseline_policy(obs: Observation, rng: np.random.Generator) -> int:
    """Obey a signal: the only one, or a uniformly drawn one. Crop 0 without signals."""
    if not obs.signals:
        return 0
    if len(obs.signals) == 1:
        return obs.signals[0].crop
    return obs.signals[int(rng.integers(len(obs.signals)))].crop


# ---------------------------------------------------------------------------
# Episode-scoped agent handles
# ---------------------------------------------------------------------------


def _agent_rng(seed: int, agent_index: int) -> np.random.Generator:
    # Explicit entropy + spawn key; never Python hash().
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(agent_index,)))


class BackgroundAgent:
    """Scripted villager running background_policy every phase."""

    def __init__(self, index: int, mode: str, institution_id: int, defy_crop: int | None = None):
        self.index = index
        self.mode = mode
        self.institution_id = institution_id
        self.defy_crop = defy_crop

    def _policy(self, obs: Observation):
        return background_policy(obs, self.mode, self.institution_id, self.defy_crop)

    def discuss(self, obs: Observation) -> tuple[str, tuple[Criticism, ...]]:
        _, criticisms = self._policy(obs)
        if criticisms:
            return " ".join(c.text for c in criticisms), criticisms
        sig = _signal_for(obs, self.institution_id)
        if self.mode == "follow_authoritative":
            text = FOLLOW_IDLE.format(institution=sig.name, crop=obs.crop_names[sig.crop])
        else:
            text = DEFY_IDLE.format(crop=obs.crop_names[self.defy_crop])
        return text, ()

    def act(self, obs: Observation) -> int:
        action, _ = self._policy(obs)
        return action


class BaselineAgent:
    """Module-free newcomer: obeys a (possibly random) signal, never criticizes."""

    def __init__(self, index: int, seed: int):
        self.index = index
        self._rng = _agent_rng(seed, index)

    def discuss(self, obs: Observation) -> tuple[str, tuple[Criticism, ...]]:
        return BASELINE_IDLE, ()

    def act(self, obs: Observation) -> int:
        return baseline_policy(obs, self._rng)


class NormativeAgent:
    """Newcomer with the normative module, learning whom to obey from criticisms."""

    def __init__(
        self,
        index: int,
        institution_ids: Iterable[int],
        beta: float = 0.5,
        sanction_threshold: float = 0.6,
        observe_others: bool = True,
    ):
        self.index = index
        self.observe_others = observe_others
        self._state = initial_state(institution_ids, beta, sanction_threshold)

    @property
    def state(self) -> NormativeState:
        return self._state

    def discuss(self, obs: Observation) -> tuple[str, tuple[Criticism, ...]]:
        criticisms = sanction_criticisms(self._state, obs)
        if criticisms:
            return " ".join(c.text for c in criticisms), criticisms
        return (NORMATIVE_ARRIVAL if obs.t == 0 else NORMATIVE_IDLE), ()

    def act(self, obs: Observation) -> int:
        outcomes = derive_outcomes(obs, self.observe_others)
        if outcomes:
            self._state = wm_update(self._state, obs, outcomes)
        action, _ = normative_action(self._state, obs)
        return action


def build_roster(
    cfg: EnvConfig,
    focal_kind: str,
    beta: float = 0.5,
    sanction_threshold: float = 0.6,
    observe_others: bool = True,
    focal_override=None,
) -> list:
    """The episode's agent handles: the focal agent at index 0, then backgrounds.

    Follow-mode backgrounds track the authoritative institution; defy-mode
    backgrounds defy the first institution with the smallest crop that differs
    from its initial declaration. `focal_override` swaps in a prebuilt focal
    handle (e.g. a chat-backed one).
    """
    institution_ids = [inst.id for inst in cfg.institutions]
    if focal_override is not None:
        focal = focal_override
    elif focal_kind == "normative":
        focal = NormativeAgent(
            0,
            institution_ids,
            beta=beta,
            sanction_threshold=sanction_threshold,
            observe_others=observe_others,
        )
    elif focal_kind == "baseline":
        focal = BaselineAgent(0, cfg.seed)
    else:
        raise ValueError(f"unknown focal kind {focal_kind!r}")

    agents: list = [focal]
    if cfg.num_background > 0:
        if cfg.background_mode == "follow_authoritative":
            authoritative = [inst for inst in cfg.institutions if inst.authoritative]
            if len(authoritative) != 1:
                raise ValueError(
                    "follow_authoritative needs exactly one authoritative institution"
                )
            target_id = authoritative[0].id
            for i in range(cfg.num_background):
                agents.append(BackgroundAgent(1 + i, cfg.background_mode, target_id))
        else:
            if not cfg.institutions:
                raise ValueError("defy_institution needs an institution to defy")
            defied = cfg.institutions[0]
            declared = defied.policy.crop_at(0)
            defy_crop = 0 if declared != 0 else 1
            for i in range(cfg.num_background):
                agents.append(
                    BackgroundAgent(1 + i, cfg.background_mode, defied.id, defy_crop)
                )
    return agents
