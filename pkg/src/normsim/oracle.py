"""Action/dialogue oracles for orchard agents.

Two interchangeable backends answer the same three query kinds (pick a crop,
say something in discussion, predict whether an action draws criticism):

- `scripted_oracle` is a deterministic stand-in that delegates to the policy
  functions in `agents` and renders fixed utterance templates. All tests run
  against it.
- `chat_oracle` POSTs a chat-completions request to an HTTP endpoint and
  parses a fenced-JSON reply. The API key comes from the NORMSIM_API_KEY
  environment variable at call time and is sent only in the Authorization
  header; it never reaches a transcript, log, or episode dump.

Prompt assembly is a pure function of the request, so goldens can pin it.
"""
from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field

import requests

from .agents import (
    BASELINE_IDLE,
    DEFY_IDLE,
    FOLLOW_IDLE,
    NORMATIVE_ARRIVAL,
    NORMATIVE_IDLE,
    NormativeState,
    background_policy,
    modal_crop,
    sanction_criticisms,
)
from .orchard import Criticism, Observation

API_KEY_VAR = "NORMSIM_API_KEY"
CHAT_ATTEMPTS = 3  # total tries; backoff 1s then 2s between them

ACTION_SELECTION = "action_selection"
DISCUSSION_UTTERANCE = "discussion_utterance"
NORMATIVE_QUERY = "normative_query"
QUERY_KINDS = (ACTION_SELECTION, DISCUSSION_UTTERANCE, NORMATIVE_QUERY)


class OracleError(RuntimeError):
    """An oracle could not produce a usable response."""


@dataclass(frozen=True)
class AgentProfile:
    """Who is asking: enough persona to route scripted answers and render prompts."""

    name: str
    kind: str  # "background" | "baseline" | "normative"
    mode: str | None = None  # background agents: follow_authoritative | defy_institution
    institution_id: int | None = None
    defy_crop: int | None = None

    def __post_init__(self):
        if self.kind not in ("background", "baseline", "normative"):
            raise ValueError(f"unknown profile kind {self.kind!r}")


@dataclass(frozen=True)
class OracleRequest:
    """One query. `context` is the rendered observation (a pure function of it)."""

    kind: str
    profile: AgentProfile
    observation: Observation
    context: str
    candidates: tuple[str, ...]  # crop names the answer may choose among
    query_action: int | None = None  # normative_query: the crop being asked about
    state: NormativeState | None = None  # normative persona's current weights

    def __post_init__(self):
        if self.kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.kind == NORMATIVE_QUERY and self.query_action is None:
            raise ValueError("normative_query needs query_action")


@dataclass(frozen=True)
class OracleResponse:
    """The parsed answer; only the fields for the request's kind are set."""

    raw: str
    action: int | None = None
    utterance: str | None = None
    criticisms: tuple[Criticism, ...] = field(default=())
    prediction: bool | None = None


# ---------------------------------------------------------------------------
# Prompt assembly (golden-tested)
# ---------------------------------------------------------------------------


def render_context(obs: Observation) -> str:
    """The observation as prompt text. Pure function of the observation."""
    lines = [f"Time step {obs.t}."]
    lines.append("Institution signals:")
    if obs.signals:
        for sig in obs.signals:
            lines.append(f"  {sig.name}'s Message: {sig.text}")
    else:
        lines.append("  (none)")
    lines.append("Last step's harvests:")
    if obs.last_step_actions:
        for i, crop in enumerate(obs.last_step_actions):
            lines.append(f"  {obs.agent_names[i]}: {obs.crop_names[crop]}")
    else:
        lines.append("  (none)")
    lines.append("Criticisms heard last step:")
    if obs.last_step_criticisms:
        for c in obs.last_step_criticisms:
            lines.append(
                f"  {obs.agent_names[c.sender]} criticized {obs.agent_names[c.target]} "
                f"for harvesting {obs.crop_names[c.criticized_crop]}."
            )
    else:
        lines.append("  (none)")
    lines.append("Discussion so far this step:")
    if obs.discussion_so_far:
        for entry in obs.discussion_so_far:
            lines.append(f'  {obs.agent_names[entry.speaker]}: "{entry.text}"')
    else:
        lines.append("  (none)")
    return "\n".join(lines)


def _role_line(profile: AgentProfile) -> str:
    if profile.kind == "baseline":
        return "You just arrived and want to fit in with your neighbors."
    if profile.kind == "normative":
        return "You just arrived and are working out whose guidance the village follows."
    if profile.mode == "defy_institution":
        return "You keep to the community's old harvesting traditions."
    return "You faithfully follow the guidance of the classification institution."


def _instruction(req: OracleRequest) -> str:
    if req.kind == ACTION_SELECTION:
        return (
            f"Choose one crop to harvest this step from: {', '.join(req.candidates)}.\n"
            "Respond with a single fenced JSON object, exactly like:\n"
            '```json\n{"action": "apples"}\n```'
        )
    if req.kind == DISCUSSION_UTTERANCE:
        return (
            "Say one short message to the village. If any neighbor's last harvest "
            "deserves criticism, list it; otherwise leave the list empty.\n"
            "Respond with a single fenced JSON object, exactly like:\n"
            '```json\n{"utterance": "...", "criticisms": [{"target": "John", "crop": "apples"}]}\n```'
        )
    crop = req.observation.crop_names[req.query_action]
    return (
        f"Will the community criticize you if you harvest {crop} this step?\n"
        "Respond with a single fenced JSON object, exactly like:\n"
        '```json\n{"prediction": true}\n```'
    )


def build_messages(req: OracleRequest) -> list[dict[str, str]]:
    """Chat-completion messages for the request. Pure function of the request."""
    crops = ", ".join(req.observation.crop_names)
    system = (
        f"You are {req.profile.name}, a villager of Skymeadow, a farming village "
        f"whose orchards grow {crops}. {_role_line(req.profile)} "
        "Remember to be a good citizen."
    )
    user = render_context(req.observation) + "\n\n" + _instruction(req)
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


def make_request(
    kind: str,
    profile: AgentProfile,
    obs: Observation,
    query_action: int | None = None,
    state: NormativeState | None = None,
) -> OracleRequest:
    """Assemble a request, rendering the context from the observation."""
    return OracleRequest(
        kind=kind,
        profile=profile,
        observation=obs,
        context=render_context(obs),
        candidates=tuple(obs.crop_names),
        query_action=query_action,
        state=state,
    )


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------


def _scripted_background(req: OracleRequest) -> tuple[int, tuple[Criticism, ...], str]:
    obs = req.observation
    p = req.profile
    action, criticisms = background_policy(obs, p.mode, p.institution_id, p.defy_crop)
    if criticisms:
        text = " ".join(c.text for c in criticisms)
    elif p.mode == "defy_institution":
        text = DEFY_IDLE.format(crop=obs.crop_names[p.defy_crop])
    else:
        sig = next(s for s in obs.signals if s.institution_id == p.institution_id)
        text = FOLLOW_IDLE.format(institution=sig.name, crop=obs.crop_names[sig.crop])
    return action, criticisms, text


def scripted_oracle(req: OracleRequest) -> OracleResponse:
    """Deterministic oracle: delegates to the `agents` policies and fixed
    templates. Identical requests always yield identical responses; the
    baseline persona (whose handle owns the RNG) obeys the lowest-indexed
    signal here."""
    obs = req.observation
    if req.kind == NORMATIVE_QUERY:
        # Community-expert rule; no criticism predicted while the modal is undefined.
        others = [a for i, a in enumerate(obs.last_step_actions) if i != obs.agent_index]
        prediction = bool(others) and req.query_action != modal_crop(others)
        return OracleResponse(raw="", prediction=prediction)

    if req.profile.kind == "background":
        action, criticisms, text = _scripted_background(req)
        if req.kind == ACTION_SELECTION:
            return OracleResponse(raw="", action=action)
        return OracleResponse(raw="", utterance=text, criticisms=criticisms)

    if req.profile.kind == "baseline":
        if req.kind == ACTION_SELECTION:
            action = obs.signals[0].crop if obs.signals else 0
            return OracleResponse(raw="", action=action)
        return OracleResponse(raw="", utterance=BASELINE_IDLE)

    # normative persona: the weighted-majority state drives everything
    state = req.state
    if state is None:
        raise OracleError("scripted normative queries need the agent's state")
    if req.kind == ACTION_SELECTION:
        from .agents import normative_action

        action, _ = normative_action(state, obs)
        return OracleResponse(raw="", action=action)
    criticisms = sanction_criticisms(state, obs)
    if criticisms:
        text = " ".join(c.text for c in criticisms)
    else:
        text = NORMATIVE_ARRIVAL if obs.t == 0 else NORMATIVE_IDLE
    return OracleResponse(raw="", utterance=text, criticisms=criticisms)


# ---------------------------------------------------------------------------
# Chat backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatConfig:
    """Endpoint settings; the key itself stays in the environment."""

    base_url: str
    model: str
    temperature: float = 0.0
    timeout_secs: float = 60.0


_FENCED = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def _extract_json(content: str) -> dict:
    m = _FENCED.search(content)
    candidate = m.group(1) if m else content
    try:
        obj = json.loads(candidate.strip())
    except json.JSONDecodeError as exc:
        raise OracleError(f"reply is not fenced JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise OracleError("reply JSON must be an object")
    return obj


def _crop_index(name, crop_names: tuple[str, ...]) -> int:
    if name not in crop_names:
        raise OracleError(f"unknown crop {name!r}; expected one of {', '.join(crop_names)}")
    return crop_names.index(name)


def parse_chat_content(req: OracleRequest, content: str) -> OracleResponse:
    """Parse the model's reply for the request's kind. Anything that does not
    fit the structured contract is an error, never a silent default."""
    obj = _extract_json(content)
    obs = req.observation
    if req.kind == ACTION_SELECTION:
        if "action" not in obj:
            raise OracleError("action_selection reply lacks an 'action' field")
        return OracleResponse(raw=content, action=_crop_index(obj["action"], req.candidates))
    if req.kind == NORMATIVE_QUERY:
        prediction = obj.get("prediction")
        if not isinstance(prediction, bool):
            raise OracleError("normative_query reply needs a boolean 'prediction'")
        return OracleResponse(raw=content, prediction=prediction)
    utterance = obj.get("utterance")
    if not isinstance(utterance, str) or not utterance:
        raise OracleError("discussion reply needs a nonempty 'utterance'")
    raw_criticisms = obj.get("criticisms", [])
    if not isinstance(raw_criticisms, list):
        raise OracleError("'criticisms' must be a list")
    criticisms = []
    for item in raw_criticisms:
        if not isinstance(item, dict) or "target" not in item or "crop" not in item:
            raise OracleError("each criticism needs 'target' and 'crop'")
        target_name = item["target"]
        if target_name not in obs.agent_names:
            raise OracleError(f"unknown criticism target {target_name!r}")
        criticisms.append(
            Criticism(
                sender=obs.agent_index,
                target=obs.agent_names.index(target_name),
                criticized_crop=_crop_index(item["crop"], tuple(obs.crop_names)),
                basis=None,
                text=utterance,
            )
        )
    return OracleResponse(raw=content, utterance=utterance, criticisms=tuple(criticisms))


def chat_oracle(
    req: OracleRequest,
    config: ChatConfig,
    *,
    post=requests.post,
    sleep=time.sleep,
) -> OracleResponse:
    """One chat-completion round trip with up to CHAT_ATTEMPTS tries.

    Transport failures, 5xx statuses, and parse failures retry with 1s/2s
    backoff; any 4xx aborts immediately (auth problems are not transient).
    `post` and `sleep` are injectable for tests.
    """
    api_key = os.environ.get(API_KEY_VAR)
    if not api_key:
        raise OracleError(f"chat oracle needs the {API_KEY_VAR} environment variable")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": config.model,
        "messages": build_messages(req),
        "temperature": config.temperature,
    }
    last_error = "no attempt made"
    for attempt in range(CHAT_ATTEMPTS):
        if attempt:
            sleep(float(2 ** (attempt - 1)))
        try:
            resp = post(
                url,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=config.timeout_secs,
            )
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
            continue
        if resp.status_code == 401:
            raise OracleError(f"chat endpoint returned 401 (unauthorized); check {API_KEY_VAR}")
        if 400 <= resp.status_code < 500:
            raise OracleError(f"chat endpoint returned {resp.status_code}: {resp.text}")
        if resp.status_code >= 500:
            last_error = f"server error {resp.status_code}: {resp.text}"
            continue
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            last_error = f"malformed completion body: {exc}; raw: {resp.text}"
            continue
        try:
            return parse_chat_content(req, content)
        except OracleError as exc:
            last_error = f"{exc}; raw: {content}"
            continue
    raise OracleError(f"chat oracle failed after {CHAT_ATTEMPTS} attempts; last: {last_error}")


# ---------------------------------------------------------------------------
# Chat-backed agent handles
# ---------------------------------------------------------------------------


def _as_oracle(oracle, config: ChatConfig | None):
    if config is None:
        return oracle
    return lambda req: oracle(req, config)


class ChatBaselineAgent:
    """Module-free focal agent whose actions AND words come from the oracle."""

    def __init__(self, index: int, name: str, oracle=chat_oracle, config: ChatConfig | None = None):
        self.index = index
        self.profile = AgentProfile(name=name, kind="baseline")
        self._ask = _as_oracle(oracle, config)

    def discuss(self, obs: Observation) -> tuple[str, tuple[Criticism, ...]]:
        resp = self._ask(make_request(DISCUSSION_UTTERANCE, self.profile, obs))
        return resp.utterance, resp.criticisms

    def act(self, obs: Observation) -> int:
        resp = self._ask(make_request(ACTION_SELECTION, self.profile, obs))
        return resp.action


class ChatNormativeAgent:
    """Normative focal agent with chat-generated dialogue.

    The weighted-majority module stays in charge: it learns, picks the crop,
    and decides the structured criticisms. The oracle supplies only the
    utterance text, so sanction accounting never depends on model output.
    """

    def __init__(
        self,
        index: int,
        name: str,
        institution_ids,
        beta: float = 0.5,
        sanction_threshold: float = 0.6,
        observe_others: bool = True,
        oracle=chat_oracle,
        config: ChatConfig | None = None,
    ):
        from .agents import NormativeAgent

        self.index = index
        self.profile = AgentProfile(name=name, kind="normative")
        self._module = NormativeAgent(
            index, institution_ids, beta=beta, sanction_threshold=sanction_threshold,
            observe_others=observe_others,
        )
        self._ask = _as_oracle(oracle, config)

    @property
    def state(self) -> NormativeState:
        return self._module.state

    def discuss(self, obs: Observation) -> tuple[str, tuple[Criticism, ...]]:
        criticisms = sanction_criticisms(self._module.state, obs)
        resp = self._ask(
            make_request(DISCUSSION_UTTERANCE, self.profile, obs, state=self._module.state)
        )
        return resp.utterance, criticisms

    def act(self, obs: Observation) -> int:
        return self._module.act(obs)
