"""Optimal assignment of remaining plan steps to the human or the robot.

The objective for an assignment g over remaining steps t is

    sum_t ( [g_t = H] * alpha / p_t  +  [g_t = R] ) * Q_{g_t}(t)

maximized by exhaustive enumeration subject to dialog-derived constraints,
with newest-first constraint relaxation when nothing is feasible. Ties prefer
the robot at the earliest differing step, minimizing human effort.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import IncompleteAssignment, InfeasibleAllocation, TooManySteps

HUMAN = "H"
ROBOT = "R"

ENUMERATION_BOUND = 16
P_HELP_FLOOR = 0.01


@dataclass(frozen=True)
class Constraint:
    """A dialog-derived restriction on the assignment.

    kinds:
      assign  - every step in `steps` goes to `agent`
      forbid  - no step in `steps` goes to `agent`
      split   - within `steps`, indices <= boundary go to R, the rest to H
    """

    kind: str
    steps: tuple[int, ...]
    agent: str | None = None
    boundary: int | None = None
    origin: str = ""

    def __post_init__(self):
        if self.kind not in ("assign", "forbid", "split"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind in ("assign", "forbid") and self.agent not in (HUMAN, ROBOT):
            raise ValueError(f"{self.kind} constraint needs agent H or R")
        if self.kind == "split" and self.boundary is None:
            raise ValueError("split constraint needs a boundary")

    def describe(self) -> str:
        span = f"{min(self.steps)}..{max(self.steps)}" if self.steps else "-"
        if self.kind == "split":
            return f"split {span} at {self.boundary}"
        return f"{self.kind} {span} {self.agent}"


@dataclass(frozen=True)
class AllocationProblem:
    steps: tuple[int, ...]
    q_robot: Mapping[int, float]
    q_human: Mapping[int, float]
    alpha: float
    p_help: Mapping[int, float]
    constraints: tuple[Constraint, ...] = ()
    bundles: tuple[tuple[int, int], ...] = ()
    infeasible_steps: frozenset[int] = frozenset()
    strict: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for t in self.steps:
            if self.q_robot[t] > 0 or self.q_human[t] > 0:
                raise ValueError(f"step {t}: costs must be <= 0")

    def p_at(self, step: int) -> float:
        return min(1.0, max(P_HELP_FLOOR, float(self.p_help[step])))

    def weighted_human(self, step: int) -> float:
        return (self.alpha / self.p_at(step)) * self.q_human[step]

    @classmethod
    def build(
        cls,
        steps,
        q_robot,
        q_human,
        alpha,
        p_help,
        constraints=(),
        bundles=(),
        infeasible_steps=frozenset(),
        strict=False,
    ) -> "AllocationProblem":
        """Convenience constructor accepting scalar p_help and list costs."""
        steps = tuple(steps)
        if not isinstance(p_help, Mapping):
            p_help = {t: float(p_help) for t in steps}
        if not isinstance(q_robot, Mapping):
            q_robot = dict(zip(steps, q_robot))
        if not isinstance(q_human, Mapping):
            q_human = dict(zip(steps, q_human))
        return cls(
            steps=steps,
            q_robot=q_robot,
            q_human=q_human,
            alpha=alpha,
            p_help=p_help,
            constraints=tuple(constraints),
            bundles=tuple(bundles),
            infeasible_steps=frozenset(infeasible_steps),
            strict=strict,
        )


@dataclass(frozen=True)
class AllocationResult:
    assignment: Mapping[int, str]
    objective: float
    relaxed: tuple[Constraint, ...] = ()

    def pattern(self, steps=None) -> tuple[str, ...]:
        steps = sorted(self.assignment) if steps is None else steps
        return tuple(self.assignment[t] for t in steps)


def score(problem: AllocationProblem, assignment: Mapping[int, str]) -> float:
    """Objective value of a complete assignment (recomputable from the result)."""
    total = 0.0
    for t in problem.steps:
        if t not in assignment:
            raise IncompleteAssignment(f"step {t} unassigned")
        if assignment[t] == HUMAN:
            total += problem.weighted_human(t)
        else:
            total += problem.q_robot[t]
    return total


def _range_mask(problem: AllocationProblem, steps, n: int) -> int:
    mask = 0
    pos = {t: i for i, t in enumerate(problem.steps)}
    for s in steps:
        if s in pos:
            mask |= 1 << (n - 1 - pos[s])
    return mask


def _valid_masks(problem: AllocationProblem, constraints, n: int) -> np.ndarray:
    """Boolean validity per candidate mask; bit 1 at a step means H."""
    masks = np.arange(1 << n, dtype=np.uint32)
    valid = np.ones(masks.shape, dtype=bool)
    if problem.strict and problem.infeasible_steps:
        m = _range_mask(problem, problem.infeasible_steps, n)
        valid &= (masks & m) == m
    for c in constraints:
        if c.kind == "assign":
            m = _range_mask(problem, c.steps, n)
            if c.agent == HUMAN:
                valid &= (masks & m) == m
            else:
                valid &= (masks & m) == 0
        elif c.kind == "forbid":
            m = _range_mask(problem, c.steps, n)
            if c.agent == HUMAN:
                valid &= (masks & m) == 0
            else:
                valid &= (masks & m) == m
        else:  # split
            robot_part = [s for s in c.steps if s <= c.boundary]
            human_part = [s for s in c.steps if s > c.boundary]
            mr = _range_mask(problem, robot_part, n)
            mh = _range_mask(problem, human_part, n)
            valid &= (masks & mr) == 0
            valid &= (masks & mh) == mh
    return valid


def _enumerate_best(problem: AllocationProblem, constraints) -> dict[int, str] | None:
    """Lexicographically-first maximizer over all constraint-valid assignments.

    Step order maps to bit significance so that np.argmax's first-occurrence
    tie handling realizes the prefer-R-at-earliest-step rule.
    """
    n = len(problem.steps)
    valid = _valid_masks(problem, constraints, n)
    if not valid.any():
        return None
    masks = np.arange(1 << n, dtype=np.uint32)
    scores = np.zeros(masks.shape, dtype=float)
    for pos, t in enumerate(problem.steps):
        bit = (masks >> (n - 1 - pos)) & 1
        scores += np.where(bit, problem.weighted_human(t), problem.q_robot[t])
    scores[~valid] = -np.inf
    best = int(np.argmax(scores))
    return {
        t: (HUMAN if (best >> (n - 1 - pos)) & 1 else ROBOT)
        for pos, t in enumerate(problem.steps)
    }


def solve(problem: AllocationProblem) -> AllocationResult:
    """Exhaustive constrained maximization; relaxes newest-first if infeasible."""
    n = len(problem.steps)
    if n > ENUMERATION_BOUND:
        raise TooManySteps(f"{n} remaining steps exceeds bound {ENUMERATION_BOUND}")
    if n == 0:
        return AllocationResult(assignment={}, objective=0.0)
    active = list(problem.constraints)
    relaxed: list[Constraint] = []
    while True:
        assignment = _enumerate_best(problem, active)
        if assignment is not None:
            return AllocationResult(
                assignment=assignment,
                objective=score(problem, assignment),
                relaxed=tuple(relaxed),
            )
        if not active:
            raise InfeasibleAllocation("no feasible assignment with all constraints relaxed")
        relaxed.append(active.pop())  # constraints are oldest-first; drop newest


def relax_and_solve(problem: AllocationProblem) -> AllocationResult:
    """Alias for the relaxation path; identical to solve with no constraints."""
    return solve(problem)
