"""Control/treatment harness for the social-reflection prompt preamble.

Agents with a toxic post are split into two arms.  Both arms are asked
whether they would share their most toxic post again; the treatment prompt
is prefixed with a short preamble asking the agent to consider how the
post affects others.  The harness reports willingness per arm, the
relative reduction and two significance tests.
"""

from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .adapters import bounded_map, env_transport, with_retries
from .core import PostRecord
from .errors import BalanceFailure, InsufficientAgents, NoToxicPost, PolicyFailure, TransportError
from .ideology import load_prompt
from .stats import StatResult, fisher_exact, two_proportion_z
from .toxicity import TOXIC_THRESHOLD, ToxicityProfile

CONTROL, TREATMENT = "control", "treatment"
PREAMBLE = load_prompt("cost_preamble").strip()
QUESTION = load_prompt("cost_question")
_PROBE_ID = re.compile(r"\(id: (\S+)\):")


@dataclass(frozen=True)
class ArmMember:
    agent_id: str
    probe_post_id: str
    probe_text: str
    probe_toxicity: float


@dataclass(frozen=True)
class CostTrial:
    agent_id: str
    arm: str
    probe_post_id: str
    willingness: bool | None
    prompt_used: str


@dataclass
class CostReport:
    n_control: int
    n_treatment: int
    rate_control: float
    rate_treatment: float
    relative_reduction: float
    reduction_ci: tuple[float, float]
    balance: dict[str, float]
    test: StatResult
    fisher_p: float
    n_dropped: int = 0
    trials: list[CostTrial] = field(default_factory=list, repr=False)


def select_and_split(profiles: Mapping[str, ToxicityProfile], posts: Mapping[str, PostRecord],
                     scores: Mapping[str, float], n: int = 500, seed: int = 0,
                     tolerance: float = 0.05, max_attempts: int = 20) -> tuple[list[ArmMember], list[ArmMember]]:
    """Sample ``n`` agents with a toxic post and split them evenly.

    Each agent's probe is its highest-scoring toxic post.  The split is
    redrawn until the arms' mean probe toxicity differs by at most
    ``tolerance``.
    """
    eligible = []
    for a in sorted(profiles):
        toxic = [pid for pid, flag in profiles[a].toxic_posts.items() if flag]
        if toxic:
            best = min(toxic, key=lambda pid: (-scores[pid], pid))
            eligible.append(ArmMember(a, best, posts[best].text, float(scores[best])))
    if len(eligible) < n:
        raise InsufficientAgents(f"{len(eligible)} eligible agents, need {n}")
    rng = np.random.default_rng(seed)
    chosen = [eligible[i] for i in sorted(rng.choice(len(eligible), size=n, replace=False))]
    half = n // 2
    for _ in range(max_attempts):
        order = rng.permutation(n)
        control = sorted((chosen[i] for i in order[:half]), key=lambda m: m.agent_id)
        treatment = sorted((chosen[i] for i in order[half:]), key=lambda m: m.agent_id)
        mc = np.mean([m.probe_toxicity for m in control]) if control else 0.0
        mt = np.mean([m.probe_toxicity for m in treatment]) if treatment else 0.0
        if abs(mc - mt) <= tolerance:
            return control, treatment
    raise BalanceFailure(f"arms unbalanced after {max_attempts} attempts")


def build_probe(member: ArmMember, arm: str) -> str:
    if member.probe_toxicity <= TOXIC_THRESHOLD:
        raise NoToxicPost(f"probe {member.probe_post_id} of {member.agent_id} is not toxic")
    question = QUESTION.format(post_id=member.probe_post_id, text=member.probe_text)
    if arm == CONTROL:
        return question
    if arm == TREATMENT:
        return PREAMBLE + "\n\n" + question
    raise ValueError(f"unknown arm {arm!r}")


def probe_post_id(prompt: str) -> str | None:
    m = _PROBE_ID.search(prompt)
    return m.group(1) if m else None


def parse_willingness(answer: str) -> bool | None:
    m = re.match(r"\W*(yes|no)\b", answer or "", re.I)
    if not m:
        return None
    return m.group(1).lower() == "yes"


class WillingnessPort(Protocol):
    def answer(self, prompt: str) -> str: ...


class StubWillingness:
    """Says yes with probability ``p_control``, or ``p_treatment`` when the
    prompt contains the preamble.  Draws are keyed on the prompt text, so
    answers do not depend on call order."""

    def __init__(self, p_control: float = 0.8, p_treatment: float = 0.456, seed: int = 0):
        self.p_control = p_control
        self.p_treatment = p_treatment
        self.seed = seed

    def answer(self, prompt: str) -> str:
        h = int.from_bytes(hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).digest(), "big")
        u = np.random.default_rng([self.seed, h]).random()
        p = self.p_treatment if PREAMBLE in prompt else self.p_control
        return "yes" if u < p else "no"


class RemoteWillingness:
    """HTTP adapter: POST ``{"prompt": ...}`` -> ``{"answer": ...}``."""

    def __init__(self, url: str | None = None, transport=None, token_env: str = "LLMSOCIAL_LLM_TOKEN",
                 retries: int = 3):
        if transport is None:
            if url is None:
                raise ValueError("RemoteWillingness needs a url or a transport")
            transport = env_transport(url, token_env)
        self.transport = transport
        self.retries = retries

    def answer(self, prompt: str) -> str:
        try:
            return str(with_retries(lambda: self.transport({"prompt": prompt}), self.retries)["answer"])
        except TransportError as exc:
            raise PolicyFailure(str(exc)) from exc


def _ask(port, prompt):
    try:
        return parse_willingness(port.answer(prompt))
    except PolicyFailure:
        return None


def run_cost_experiment(control: Sequence[ArmMember], treatment: Sequence[ArmMember],
                        policy_port: WillingnessPort, max_in_flight: int = 4) -> CostReport:
    jobs = [(m, CONTROL, build_probe(m, CONTROL)) for m in control]
    jobs += [(m, TREATMENT, build_probe(m, TREATMENT)) for m in treatment]
    answers = bounded_map(lambda j: _ask(policy_port, j[2]), jobs, max_in_flight)
    trials = sorted((CostTrial(m.agent_id, arm, m.probe_post_id, w, prompt)
                     for (m, arm, prompt), w in zip(jobs, answers)),
                    key=lambda t: (t.arm, t.agent_id))
    return cost_report(trials, control, treatment)


def cost_report(trials: Sequence[CostTrial], control=(), treatment=()) -> CostReport:
    """Pure summary of trial records; trials without an answer are dropped."""
    def arm(name):
        got = [t.willingness for t in trials if t.arm == name and t.willingness is not None]
        return sum(got), len(got)

    yc, nc = arm(CONTROL)
    yt, nt = arm(TREATMENT)
    if nc == 0 or nt == 0:
        raise PolicyFailure("an arm has no answered trials")
    rc, rt = yc / nc, yt / nt
    reduction = 1 - rt / rc if rc > 0 else float("nan")
    if rc > 0:
        # delta method on log(rt / rc)
        if yt > 0:
            se = math.sqrt((1 - rt) / (nt * rt) + (1 - rc) / (nc * rc))
            ratio = rt / rc
            ci = (1 - ratio * math.exp(1.96 * se), 1 - ratio * math.exp(-1.96 * se))
        else:
            ci = (1.0, 1.0)
    else:
        ci = (float("nan"), float("nan"))
    balance = {
        CONTROL: float(np.mean([m.probe_toxicity for m in control])) if control else float("nan"),
        TREATMENT: float(np.mean([m.probe_toxicity for m in treatment])) if treatment else float("nan"),
    }
    return CostReport(
        n_control=nc, n_treatment=nt, rate_control=rc, rate_treatment=rt,
        relative_reduction=reduction, reduction_ci=ci, balance=balance,
        test=two_proportion_z(yc, nc, yt, nt),
        fisher_p=fisher_exact([[yc, nc - yc], [yt, nt - yt]]),
        n_dropped=sum(t.willingness is None for t in trials), trials=list(trials),
    )


def write_trials_csv(trials: Sequence[CostTrial], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent_id", "arm", "probe_post_id", "willingness"])
        for t in trials:
            w.writerow([t.agent_id, t.arm, t.probe_post_id, "" if t.willingness is None else int(t.willingness)])
