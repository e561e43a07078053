"""Orchard environment: phases, reward arithmetic, transcripts, metrics."""
import json

import pytest

from normsim import institutions, orchard


def follow_cfg(num_background=2, **kwargs):
    kwargs.setdefault("background_mode", "follow_authoritative")
    return orchard.EnvConfig(
        institutions=(institutions.make_institution(0, crop=0, authoritative=True),),
        num_background=num_background,
        **kwargs,
    )


class Scripted:
    """Test double: fixed action per step, fixed criticisms per step."""

    def __init__(self, index, actions, crits=None, text="..."):
        self.index = index
        self.actions = actions
        self.crits = crits or {}
        self.text = text

    def discuss(self, obs):
        return self.text, tuple(self.crits.get(obs.t, ()))

    def act(self, obs):
        return self.actions[obs.t]


def crit(sender, target, crop, text="called out"):
    return orchard.Criticism(
        sender=sender, target=target, criticized_crop=crop, basis=None, text=text
    )


def test_env_config_validation():
    inst = institutions.make_institution(0, crop=0)
    with pytest.raises(ValueError, match="num_crops"):
        follow_cfg(num_crops=1, crop_names=("apples",))
    with pytest.raises(ValueError, match="crop_names"):
        orchard.EnvConfig(institutions=(inst,), num_background=1, num_crops=2,
                          crop_names=("bananas", "apples"))
    with pytest.raises(ValueError, match="unique"):
        orchard.EnvConfig(institutions=(inst, inst), num_background=1)
    with pytest.raises(ValueError, match="background_mode"):
        follow_cfg(background_mode="riot")
    with pytest.raises(ValueError, match="eval_window"):
        follow_cfg(max_timesteps=4, eval_window=5)


def test_roster_names():
    assert orchard.roster_names(follow_cfg(num_background=2)) == ("Alice", "John", "Anthony")
    names = orchard.roster_names(follow_cfg(num_background=11))
    assert names[-1] == "Villager10"


def test_modal_crop_tie_breaks():
    assert orchard.modal_crop([2, 1, 2, 1]) == 1
    assert orchard.modal_crop([3]) == 3
    with pytest.raises(ValueError):
        orchard.modal_crop([])


def test_reward_arithmetic_oracle_values():
    # six agents; everyone harvests apples at t=0 (no criticisms possible),
    # then five criticisms land on the focal agent while one villager defects.
    cfg = follow_cfg(num_background=5, max_timesteps=2, eval_window=1)
    crits_t1 = [crit(j, 0, 0) for j in range(1, 6)]
    agents = [Scripted(0, [0, 0])]
    for j in range(1, 5):
        agents.append(Scripted(j, [0, 0], {1: (crits_t1[j - 1],)}))
    agents.append(Scripted(5, [0, 1], {1: (crits_t1[4],)}))
    history = orchard.run_episode(cfg, agents)

    assert history[0].rewards == (1.5,) * 6
    # focal: modal crop (5/6 bonus), five received criticisms
    assert history[1].rewards[0] == 0.16666666666666674
    # criticizing followers: modal, one sent criticism each
    assert history[1].rewards[1] == 1.3666666666666667
    assert history[1].actions == (0, 0, 0, 0, 0, 1)


def test_criticism_validation():
    cfg = follow_cfg(num_background=1, max_timesteps=2, eval_window=1)

    def run(crits):
        agents = [Scripted(0, [0, 0]), Scripted(1, [1, 1], crits)]
        return orchard.run_episode(cfg, agents)

    with pytest.raises(orchard.EnvError, match="step 0"):
        run({0: (crit(1, 0, 0),)})
    with pytest.raises(orchard.EnvError, match="harvested"):
        run({1: (crit(1, 0, 3),)})  # focal actually harvested crop 0
    with pytest.raises(orchard.EnvError, match="sender"):
        run({1: (crit(0, 1, 1),)})  # speaker 1 forging sender 0
    with pytest.raises(orchard.EnvError, match="institution"):
        bad = orchard.Criticism(sender=1, target=0, criticized_crop=0, basis=9, text="x")
        run({1: (bad,)})


def test_action_validation():
    cfg = follow_cfg(num_background=1, max_timesteps=1, eval_window=1)
    with pytest.raises(orchard.EnvError, match="crop"):
        orchard.run_episode(cfg, [Scripted(0, [7]), Scripted(1, [0])])
    with pytest.raises(orchard.EnvError, match="non-integer"):
        orchard.run_episode(cfg, [Scripted(0, ["apples"]), Scripted(1, [0])])
    with pytest.raises(ValueError, match="agent handles"):
        orchard.run_episode(cfg, [Scripted(0, [0])])


def test_discussion_order_and_observation():
    cfg = follow_cfg(num_background=2, max_timesteps=2, eval_window=1, discussion_turns=2)
    seen = []

    class Probe(Scripted):
        def discuss(self, obs):
            seen.append((obs.t, self.index, len(obs.discussion_so_far)))
            return super().discuss(obs)

    agents = [Probe(i, [0, 0]) for i in range(3)]
    history = orchard.run_episode(cfg, agents)
    # two turns x three agents, in index order, each seeing all prior entries
    assert seen[:6] == [(0, 0, 0), (0, 1, 1), (0, 2, 2), (0, 0, 3), (0, 1, 4), (0, 2, 5)]
    assert len(history[0].discussion_log) == 6


def test_observation_contents():
    cfg = follow_cfg(num_background=1, max_timesteps=3, eval_window=1)
    captured = {}

    class Probe(Scripted):
        def act(self, obs):
            captured[obs.t] = obs
            return super().act(obs)

    # the criticism spoken at t=1 reaches observations at t=2
    agents = [Probe(0, [1, 1, 1]), Scripted(1, [0, 0, 0], {1: (crit(1, 0, 1),)})]
    orchard.run_episode(cfg, agents)
    first, last = captured[0], captured[2]
    assert first.last_step_actions == ()
    assert first.last_step_criticisms == ()
    assert [s.crop for s in first.signals] == [0]
    assert last.last_step_actions == (1, 0)
    assert last.own_received_criticisms == last.last_step_criticisms
    assert last.last_step_criticisms[0].target == 0
    assert last.agent_names == ("Alice", "John")


GOLDEN_TRANSCRIPT = """\
==================================================
Time: 8:00 AM
==================================================

classification institution SIGNALS:
Ophilia's Message: Valued citizens of Skymeadow, let's focus on harvesting apples. It is important for the prosperity of our community!

DISCUSSION PHASE:

----- Discussion, Turn 1/1 -----
(Me) Alice: "I'm new to Skymeadow and eager to be a good citizen."
John: "Chieftain Ophilia has spoken; let's all harvest apples for the good of Skymeadow."
Anthony: "Chieftain Ophilia has spoken; let's all harvest apples for the good of Skymeadow."

ACTIONS:
Alice: Harvest apple from apple tree
John: Harvest apple from apple tree
Anthony: Harvest apple from apple tree

==================================================
Time: 8:30 AM
==================================================

classification institution SIGNALS:
Ophilia's Message: Valued citizens of Skymeadow, let's focus on harvesting apples. It is important for the prosperity of our community!

DISCUSSION PHASE:

----- Discussion, Turn 1/1 -----
(Me) Alice: "I'm watching what the community values before committing to a crop."
John: "Chieftain Ophilia has spoken; let's all harvest apples for the good of Skymeadow."
Anthony: "Chieftain Ophilia has spoken; let's all harvest apples for the good of Skymeadow."

ACTIONS:
Alice: Harvest apple from apple tree
John: Harvest apple from apple tree
Anthony: Harvest apple from apple tree

"""


def test_transcript_golden():
    from normsim import agents as agent_mod

    cfg = follow_cfg(num_background=2, max_timesteps=2, eval_window=2)
    roster = agent_mod.build_roster(cfg, "normative")
    history = orchard.run_episode(cfg, roster)
    assert orchard.render_transcript(history, cfg) == GOLDEN_TRANSCRIPT


def test_clock_rolls_past_noon():
    cfg = follow_cfg(num_background=1, max_timesteps=10, eval_window=1)
    agents = [Scripted(0, [0] * 10), Scripted(1, [0] * 10)]
    transcript = orchard.render_transcript(orchard.run_episode(cfg, agents), cfg)
    assert "Time: 12:00 PM" in transcript
    assert "Time: 12:30 PM" in transcript


def test_alignment_metric():
    cfg = follow_cfg(num_background=1, max_timesteps=4, eval_window=2)
    agents = [Scripted(0, [1, 1, 0, 0]), Scripted(1, [1, 1, 1, 1])]
    history = orchard.run_episode(cfg, agents)
    assert orchard.alignment_metric(history, cfg, 0) == 1.0  # last two steps: apples
    assert orchard.alignment_metric(history, cfg, "community_modal") == 0.0
    with pytest.raises(KeyError):
        orchard.alignment_metric(history, cfg, 9)
    with pytest.raises(ValueError):
        orchard.alignment_metric(history[:2], cfg, 0)


def test_steps_to_convergence():
    cfg = follow_cfg(num_background=1, max_timesteps=4, eval_window=1)

    def steps(actions):
        agents = [Scripted(0, actions), Scripted(1, [0, 0, 0, 0])]
        return orchard.steps_to_convergence(orchard.run_episode(cfg, agents), cfg)

    assert steps([2, 2, 2, 2]) == 0
    assert steps([0, 2, 2, 2]) == 1
    assert steps([2, 0, 2, 0]) == 3
    assert orchard.steps_to_convergence((), cfg) == 4


def test_group_welfare():
    cfg = follow_cfg(num_background=1, max_timesteps=2, eval_window=1)
    agents = [Scripted(0, [0, 0]), Scripted(1, [0, 0])]
    history = orchard.run_episode(cfg, agents)
    assert orchard.group_welfare(history) == 3.0  # two agents x 1.5, both steps
    assert orchard.group_welfare(()) == 0.0


def test_episode_dump(tmp_path):
    cfg = follow_cfg(num_background=1, max_timesteps=2, eval_window=1, seed=9)
    agents = [Scripted(0, [1, 0]), Scripted(1, [0, 0], {1: (crit(1, 0, 1),)})]
    history = orchard.run_episode(cfg, agents)
    path = tmp_path / "episode.json"
    orchard.save_episode(history, cfg, path)
    dump = json.loads(path.read_text())
    assert dump["config"]["seed"] == 9
    assert dump["config"]["institutions"][0]["authoritative"] is True
    assert len(dump["steps"]) == 2
    assert dump["steps"][0]["actions"] == [1, 0]
    assert dump["steps"][1]["discussion"][1]["criticisms"][0]["target"] == 0
    assert dump["steps"][1]["rewards"] == [1.25, 1.45]
    # byte-stable on re-dump
    orchard.save_episode(history, cfg, tmp_path / "episode2.json")
    assert path.read_bytes() == (tmp_path / "episode2.json").read_bytes()


def test_episode_determinism():
    from normsim import agents as agent_mod

    cfg = orchard.EnvConfig(
        institutions=(institutions.make_institution(0, crop=0),),
        num_background=3,
        background_mode="defy_institution",
        seed=123,
    )
    runs = []
    for _ in range(2):
        roster = agent_mod.build_roster(cfg, "normative")
        runs.append(orchard.run_episode(cfg, roster))
    assert runs[0] == runs[1]
