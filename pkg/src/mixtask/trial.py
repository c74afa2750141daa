"""Trial engine: the environment-step loop with termination rules, method
dispatch (full pipeline, baselines, ablations), and event logging.

One environment step = one robot decision plus the human's response window.
Trials are pure functions of (config, seed) when the adapter is disabled, so
reruns reproduce logs byte for byte.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .allocation import HUMAN, ROBOT, AllocationProblem, solve
from .costs import (
    HumanCostModel,
    RobotQTable,
    build_robot_table,
    human_q,
    load_table,
    robot_q_or_floor,
)
from .dialog import (
    DialogAct,
    DialogEvent,
    PendingContext,
    classify_incoming,
    realize_utterance,
    update_p_help,
)
from .errors import ConfigError, SessionClosed
from .humans import (
    FixtureHuman,
    HumanObservation,
    HumanTurn,
    InteractiveHuman,
    ParametricHuman,
    PendingView,
    SimulatedHumanParams,
)
from .llm import AdapterConfig, FallbackSignal, LlmAdapter
from .logs import TrialLog
from .metrics import Metrics, compute_metrics
from .scenarios import TaskScenario, builtin_scenario, load_scenario
from .strategy import (
    PendingRequest,
    PlannerState,
    Policy,
    RobotDecision,
    derive_program,
    select_next_action,
)
from .world import apply_effect, rollout_primitive

PIPELINE_METHODS = ("mixed_init", "h_init", "r_init", "no_phelp", "no_hierarchy")
BUILTIN_METHODS = PIPELINE_METHODS + ("random", "recb", "llm_proxy")

# Extension hook: name -> callable(trial) -> RobotDecision, consulted for
# method names outside the built-in set.
METHOD_REGISTRY: dict = {}


def register_method(name: str, decide) -> None:
    METHOD_REGISTRY[name] = decide


@dataclass(frozen=True)
class TrialConfig:
    scenario: str = "pour_package"
    method: str = "mixed_init"
    human_p: float = 1.0
    mood: str = "positive"
    human_script: str | None = None  # script text; overrides the parametric human
    alpha: float = 10.0
    seed: int = 0
    max_step_multiplier: int = 4
    recb_p: float = 0.5
    q_samples: int = 100
    qtable_path: str | None = None
    adapter: AdapterConfig = field(default_factory=AdapterConfig.disabled)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.max_step_multiplier < 1:
            raise ConfigError("max-step multiplier must be >= 1")
        if not (0.0 <= self.recb_p <= 1.0):
            raise ConfigError("recb_p must be in [0, 1]")

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["adapter"]["capabilities"] = sorted(self.adapter.capabilities)
        return raw


def _load(config: TrialConfig) -> TaskScenario:
    if config.scenario.endswith(".scenario"):
        with open(config.scenario) as fh:
            return load_scenario(fh.read(), name=config.scenario)
    return builtin_scenario(config.scenario)


class _Trial:
    """Single-trial state machine; one instance per run, single-threaded."""

    def __init__(self, config: TrialConfig, human=None, adapter=None, log=None):
        self.config = config
        self.scenario = _load(config)
        self.plan = self.scenario.plan
        self.T = len(self.plan)
        self.max_steps = config.max_step_multiplier * self.T

        seeds = np.random.SeedSequence(config.seed).spawn(4)
        self.method_rng = np.random.default_rng(seeds[0])
        self.exec_rng = np.random.default_rng(seeds[1])
        human_seed = int(seeds[2].generate_state(1)[0])
        if human is not None:
            self.human = human
        elif config.human_script is not None:
            self.human = FixtureHuman(config.human_script, plan=self.plan)
        else:
            self.human = ParametricHuman(
                SimulatedHumanParams(
                    p_tilde=config.human_p, mood=config.mood, seed=human_seed
                ),
                plan=self.plan,
            )
        if config.qtable_path:
            self.qtable: RobotQTable = load_table(config.qtable_path)
        else:
            self.qtable = build_robot_table(
                self.scenario, config.q_samples, np.random.default_rng(seeds[3])
            )
        self.cost_model = HumanCostModel.for_scenario(self.scenario)
        self.adapter = adapter if adapter is not None else LlmAdapter(config.adapter)

        self.state = self.scenario.initial_state
        self.pstate = PlannerState(plan=self.plan)
        self.log = log if log is not None else TrialLog()
        self.events: list[DialogEvent] = []
        self.env_step = 0
        self.terminated = False
        self.last_robot_text: str | None = None

    # --- helpers -----------------------------------------------------------

    @property
    def completed(self) -> frozenset[int]:
        return frozenset(self.pstate.completed)

    @property
    def current_step(self):
        return self.pstate.current_step

    def done(self) -> bool:
        return len(self.pstate.completed) == self.T

    def terminate(self, reason: str) -> None:
        self.log.append(self.env_step, "sys", "termination", {"reason": reason})
        self.terminated = True

    def remaining(self) -> list[int]:
        return [i for i in range(self.T) if i not in self.pstate.completed]

    def projected_costs(self):
        """Per remaining step: (robot Q, human Q) at the forward-projected state."""
        q_r, q_h = {}, {}
        state = self.state
        for idx in self.remaining():
            prim = self.plan.steps[idx]
            q_r[idx] = robot_q_or_floor(self.qtable, state, prim)
            q_h[idx] = human_q(self.cost_model, state, prim)
            state = apply_effect(state, prim)
        return q_r, q_h

    def p_value(self) -> float:
        if self.config.method == "no_phelp":
            return 1.0
        return self.pstate.estimate.value

    def _log_phelp(self) -> None:
        # the estimate is the robot's belief about the human, hence actor R
        estimate = self.pstate.estimate
        self.log.append(
            self.env_step,
            "R",
            "phelp",
            {
                "value": self.p_value(),
                "accepts": estimate.accepts,
                "rejects": estimate.rejects,
                "offset": estimate.offset,
            },
        )

    def check_rule_c(self, assignment) -> bool:
        """Infeasible step allocated to the robot twice consecutively."""
        current = self.current_step
        infeasible = self.plan.infeasible_steps()
        if current is not None and current in infeasible and assignment.get(current) == ROBOT:
            self.pstate.consecutive_infeasible_robot += 1
        else:
            self.pstate.consecutive_infeasible_robot = 0
        if self.pstate.consecutive_infeasible_robot >= 2:
            self.terminate("infeasible_allocation")
            return True
        return False

    def log_allocation(self, assignment, objective, relaxed, p_used, program=None) -> None:
        payload = {
            "assignment": [[t, assignment[t]] for t in sorted(assignment)],
            "objective": objective,
            "p_help": p_used,
            "relaxed": [c.describe() for c in relaxed],
        }
        if program is not None:
            payload["program"] = program.serialize()  # audit trail for the turn
        self.log.append(self.env_step, "R", "allocation", payload)

    # --- robot phase -------------------------------------------------------

    def robot_decision(self) -> RobotDecision | None:
        method = self.config.method
        if method in PIPELINE_METHODS:
            return self._pipeline_decision(method)
        if method == "random":
            return self._random_decision()
        if method == "recb":
            return self._recb_decision()
        if method == "llm_proxy":
            return self._llm_proxy_decision()
        if method in METHOD_REGISTRY:
            return METHOD_REGISTRY[method](self)
        raise ConfigError(f"unknown method {self.config.method!r}")

    def _pipeline_decision(self, method: str) -> RobotDecision | None:
        events, self.events = self.events, []
        program = derive_program(
            events,
            self.pstate,
            self.plan,
            adapter=self.adapter if method == "mixed_init" else None,
        )
        if self.pstate.pending is not None and any(
            e.act is DialogAct.REJECT for e in events
        ):
            self.pstate.pending = None  # rejection consumed by this program
        for sel in program.removes:
            self.pstate.constraints = [
                c for c in self.pstate.constraints if not sel.matches(c)
            ]
        for c in program.adds:
            # normalization: an assign displaces forbids on the same steps, and
            # vice versa, so contradictory pairs never co-exist
            opposite = "forbid" if c.kind == "assign" else "assign"
            if c.kind in ("assign", "forbid"):
                self.pstate.constraints = [
                    k
                    for k in self.pstate.constraints
                    if not (
                        k.kind == opposite
                        and k.agent == c.agent
                        and set(k.steps) & set(c.steps)
                    )
                ]
            self.pstate.constraints.append(c)

        remaining = self.remaining()
        q_r, q_h = self.projected_costs()
        p_used = self.p_value()
        problem = AllocationProblem.build(
            remaining,
            q_r,
            q_h,
            self.config.alpha,
            p_used,
            constraints=tuple(self.pstate.constraints),
            bundles=tuple(r for _, r in self.plan.abstract_steps),
            infeasible_steps=self.plan.infeasible_steps(),
        )
        result = solve(problem)
        if result.relaxed:
            self.pstate.constraints = [
                c for c in self.pstate.constraints if c not in result.relaxed
            ]
        self.log_allocation(
            result.assignment, result.objective, result.relaxed, p_used, program=program
        )
        if self.check_rule_c(result.assignment):
            return None
        return select_next_action(
            self.pstate,
            result.assignment,
            self.plan,
            program,
            low_level_asks=(method == "no_hierarchy"),
            suppress_robot_verbal=(method == "h_init"),
        )

    def _random_decision(self) -> RobotDecision | None:
        current = self.current_step
        self.events = []  # coin flips ignore dialog
        agent = HUMAN if self.method_rng.random() < 0.5 else ROBOT
        self.log_allocation({current: agent}, 0.0, (), self.p_value())
        if self.check_rule_c({current: agent}):
            return None
        if agent == ROBOT:
            return RobotDecision(
                kind="physical", step=current, primitive=self.plan.steps[current]
            )
        return RobotDecision(kind="verbal", act=DialogAct.ASK_HELP, step_refs=(current,))

    def _recb_decision(self) -> RobotDecision:
        # effort-controlled baseline: human w.p. p_c with guaranteed compliance,
        # oracle robot primitives otherwise
        current = self.current_step
        agent = HUMAN if self.method_rng.random() < self.config.recb_p else ROBOT
        self.log_allocation({current: agent}, 0.0, (), self.config.recb_p)
        prim = self.plan.steps[current]
        if agent == HUMAN:
            seconds = -human_q(self.cost_model, self.state, prim)
            self.log.append(
                self.env_step,
                "H",
                "physical",
                {"step": current, "primitive": str(prim), "duration_seconds": seconds},
            )
        else:
            model = self.scenario.robot_profile.duration_model(prim)
            duration = int(round(model[0] if isinstance(model, tuple) else model))
            self.log.append(
                self.env_step,
                "R",
                "physical",
                {
                    "step": current,
                    "primitive": str(prim),
                    "succeeded": True,
                    "duration": max(1, duration),
                    "terminal": False,
                },
            )
        self.state = apply_effect(self.state, prim)
        self.pstate.completed.add(current)
        return RobotDecision(kind="wait")

    def _llm_proxy_decision(self) -> RobotDecision | None:
        remaining = self.remaining()
        assignment = None
        if self.adapter.enabled("allocate"):
            response = self.adapter.call(
                "allocate",
                {
                    "state": dict(self.state.object_locations),
                    "plan": [str(p) for p in self.plan.steps],
                    "remaining": remaining,
                    "dialog": [e.surface_text for e in self.events],
                    "alpha": self.config.alpha,
                    "completed": sorted(self.pstate.completed),
                },
            )
            if not isinstance(response, FallbackSignal) and len(response) == len(remaining):
                assignment = dict(zip(remaining, response))
        if assignment is None:
            # offline fallback: keep every step unless it is outright impossible
            infeasible = self.plan.infeasible_steps()
            assignment = {t: (HUMAN if t in infeasible else ROBOT) for t in remaining}
        self.events = []
        self.log_allocation(assignment, 0.0, (), self.p_value())
        if self.check_rule_c(assignment):
            return None
        current = self.current_step
        if assignment.get(current) == ROBOT:
            return RobotDecision(
                kind="physical", step=current, primitive=self.plan.steps[current]
            )
        return RobotDecision(kind="verbal", act=DialogAct.ASK_HELP, step_refs=(current,))

    # --- execution ---------------------------------------------------------

    def execute_robot(self, decision: RobotDecision) -> None:
        if decision.kind == "wait":
            return
        if decision.kind == "physical":
            outcome = rollout_primitive(
                self.state, decision.primitive, self.scenario.robot_profile, self.exec_rng
            )
            self.log.append(
                self.env_step,
                "R",
                "physical",
                {
                    "step": decision.step,
                    "primitive": str(decision.primitive),
                    "succeeded": outcome.succeeded,
                    "duration": outcome.duration,
                    "terminal": outcome.terminal_failure,
                },
            )
            if outcome.succeeded:
                self.state = apply_effect(self.state, decision.primitive)
                self.pstate.completed.add(decision.step)
            elif outcome.terminal_failure:
                self.terminate("primitive_failure")
            return
        # verbal
        text = self._realize(decision)
        turn_id = self.pstate.next_turn_id()
        self.log.append(
            self.env_step,
            "R",
            "verbal",
            {
                "turn": turn_id,
                "act": decision.act.value,
                "refs": list(decision.step_refs),
                "text": text,
                "split_at": decision.split_at,
            },
        )
        self.last_robot_text = text
        if decision.act in (
            DialogAct.ASK_HELP,
            DialogAct.PROPOSE_SPLIT,
            DialogAct.INFORM_LIMITATION,
        ):
            self.pstate.pending = PendingRequest(
                act=decision.act,
                step_refs=decision.step_refs,
                turn_id=turn_id,
                negotiated=decision.act is not DialogAct.ASK_HELP,
                split_at=decision.split_at,
            )

    def _realize(self, decision: RobotDecision) -> str:
        text = realize_utterance(
            decision.act,
            decision.step_refs,
            self.plan,
            tone="warm",
            completed=self.completed,
            split_at=decision.split_at,
        )
        if self.adapter.enabled("realize"):
            response = self.adapter.call(
                "realize",
                {"act": decision.act.value, "refs": list(decision.step_refs), "template": text},
            )
            if isinstance(response, str) and response.strip():
                return response.strip()
        return text

    # --- human phase -------------------------------------------------------

    def human_phase(self) -> None:
        pending = self.pstate.pending
        if self.config.method == "r_init" and pending is None:
            return  # proactive human turns suppressed
        observation = HumanObservation(
            state=self.state,
            current_step=self.current_step,
            completed=self.completed,
            robot_text=self.last_robot_text,
        )
        view = (
            PendingView(act=pending.act, step_refs=pending.step_refs, split_at=pending.split_at)
            if pending is not None
            else None
        )
        turn = self.human.turn(observation, view)
        if turn.utterance:
            event = self._classify(turn.utterance)
            self.log.append(
                self.env_step,
                "H",
                "verbal",
                {
                    "turn": event.turn_id,
                    "act": event.act.value,
                    "refs": list(event.step_refs),
                    "text": turn.utterance,
                    "split_at": event.split_at,
                    "replying_to": pending.turn_id if pending else None,
                },
            )
            if event.act is not DialogAct.SILENCE:
                self.events.append(event)
                sentiment = None
                if event.act is DialogAct.SMALLTALK and self.adapter.enabled("sentiment"):
                    response = self.adapter.call("sentiment", {"text": turn.utterance})
                    if isinstance(response, float):
                        sentiment = response
                estimate = update_p_help(self.pstate.estimate, event, sentiment_delta=sentiment)
                if estimate != self.pstate.estimate:
                    self.pstate.estimate = estimate
                    self._log_phelp()
            if pending is not None and event.act is DialogAct.REJECT:
                for s in pending.step_refs:
                    if s in self.plan.infeasible_steps() and s not in self.pstate.completed:
                        self.pstate.refusals[s] = self.pstate.refusals.get(s, 0) + 1
            if pending is not None and event.act is DialogAct.ACCEPT:
                pending.accepted = True
            if pending is not None and event.act is DialogAct.CONDITIONAL_ACCEPT:
                self.pstate.pending = None  # agreement reached; constraint lands next turn

        for step in sorted(set(turn.perform_steps)):
            if step != self.current_step or self.terminated:
                continue  # steps execute in plan order only
            prim = self.plan.steps[step]
            seconds = -human_q(self.cost_model, self.state, prim)
            self.log.append(
                self.env_step,
                "H",
                "physical",
                {"step": step, "primitive": str(prim), "duration_seconds": seconds},
            )
            self.state = apply_effect(self.state, prim)
            self.pstate.completed.add(step)

        if pending is not None and turn.decision == "accept" and self.pstate.pending is pending:
            self.pstate.pending = None  # fulfilled

        if any(count >= 2 for count in self.pstate.refusals.values()):
            self.terminate("refused_infeasible")

    def _classify(self, text: str) -> DialogEvent:
        pending = self.pstate.pending
        context = PendingContext(
            plan=self.plan,
            completed=self.completed,
            pending_act=pending.act if pending else None,
            pending_refs=pending.step_refs if pending else (),
            turn_id=self.pstate.next_turn_id(),
        )
        if self.adapter.enabled("classify"):
            response = self.adapter.call("classify", {"text": text})
            if not isinstance(response, FallbackSignal):
                try:
                    act = DialogAct(response["act"])
                    refs = tuple(
                        s for s in response["steps"] if 0 <= s < len(self.plan)
                    )
                    return DialogEvent(
                        turn_id=context.turn_id,
                        initiator="H",
                        act=act,
                        step_refs=refs,
                        surface_text=text,
                        split_at=response.get("split_at"),
                    )
                except (ValueError, KeyError):
                    pass
        return classify_incoming(text, context)

    # --- main loop ----------------------------------------------------------

    def run(self) -> tuple[Metrics, TrialLog]:
        if self.config.method in PIPELINE_METHODS:
            self._log_phelp()  # starting estimate, so gauge traces are complete
        while self.env_step < self.max_steps and not self.terminated:
            decision = self.robot_decision()
            if self.terminated:
                break
            if decision is not None:
                self.execute_robot(decision)
            if self.terminated:
                break
            if self.done():
                self.terminate("complete")
                break
            try:
                if self.config.method != "recb":  # recb runs without a human in the loop
                    self.human_phase()
            except SessionClosed:
                self.terminate("aborted")
                break
            if self.terminated:
                break
            if self.done():
                self.terminate("complete")
                break
            self.env_step += 1
        if not self.terminated:
            self.env_step = self.max_steps
            self.terminate("step_cap")
        self.log.validate()
        return compute_metrics(self.log, self.T), self.log


def run_trial(
    config: TrialConfig, human=None, adapter=None, log: TrialLog | None = None
) -> tuple[Metrics, TrialLog]:
    """Run one trial to termination; deterministic for a given (config, seed)
    when no live adapter or interactive human is attached."""
    return _Trial(config, human=human, adapter=adapter, log=log).run()


def replay_check(config_dict: dict, log: TrialLog) -> bool:
    """Re-run the logged config and compare event lines byte for byte."""
    adapter_raw = dict(config_dict.get("adapter", {}))
    adapter_raw["capabilities"] = frozenset(adapter_raw.get("capabilities", []))
    config = TrialConfig(
        **{
            **{k: v for k, v in config_dict.items() if k != "adapter"},
            "adapter": AdapterConfig(**adapter_raw),
        }
    )
    _, rerun = run_trial(config)
    return rerun.to_lines() == log.to_lines()
