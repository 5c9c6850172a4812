"""Online planners: POUCT tree search, the multi-resolution coordinator
that races one search per abstraction level under a shared budget, and the
particle-filter POMCP baseline.

Every planner replans from scratch each step (fresh tree). The engine
kernels do the simulation work; this module builds their inputs, splits
the per-step wall-clock budget across instances, picks the best root
action across levels (ties go to the lowest level) and expands MoveOps for
execution. Fixing num_sims in the config replaces the wall-clock stop with
an exact simulation count, which makes planning fully deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._impl import IMPL_NAME, kernels
from .abstraction import (
    AbstractInstance,
    MoveOpPlan,
    expand_moveop,
    make_instance,
)
from .belief import OctreeBelief
from .domain import (
    PRIMITIVE_ACTIONS,
    FactoredObservation,
    Find,
    Look,
    MosAction,
    Move,
    MoveOp,
    RewardSpec,
    RobotState,
    SensorModel,
    belief_update_all,
)
from .engine import belief_pyramid, build_problem, run_plan
from .geometry import Cell, frustum_geom

derive_seed = kernels.derive_seed


@dataclass
class PlannerConfig:
    time_budget_per_step: float = 3.0
    max_depth: int = 10
    ucb_constant: float = 1000.0
    discount: float | None = None  # None: use the reward spec's gamma
    num_sims: int | None = None    # exact simulation count (deterministic mode)
    k_samples: int = 10
    rollout: str = "uniform"

    def __post_init__(self) -> None:
        if self.rollout != "uniform":
            raise ValueError(f"only the uniform rollout policy exists: {self.rollout}")
        if self.time_budget_per_step <= 0:
            raise ValueError("time budget must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass
class PlanDecision:
    action: MosAction
    plan: MoveOpPlan | None
    flagged_random: bool
    charged: bool     # whether search actually consumed planning budget
    level: int | None
    sims: int
    impl: str
    diagnostics: dict = field(default_factory=dict)


# -- generic reference POUCT ---------------------------------------------------


def pouct_plan(
    generative: Callable,
    root_belief_sampler: Callable,
    actions: Sequence,
    config: PlannerConfig,
    rng,
) -> tuple[object, dict]:
    """Reference POUCT over an arbitrary generative model.

    generative(state, action, rng) -> (next_state, observation, reward,
    done) with a hashable observation; root_belief_sampler(rng) -> state;
    rng needs only .random(). Runs config.num_sims simulations when set,
    otherwise until the wall-clock budget expires. Returns the greedy root
    action and the root Q-table; with zero completed simulations the action
    is uniformly random and the table comes back empty (the caller's flag).
    """
    A = len(actions)
    gamma = config.discount if config.discount is not None else 0.99
    max_depth = config.max_depth
    c = config.ucb_constant

    nh: list[int] = []
    nq: list[list[int]] = []
    q: list[list[float]] = []
    children: list[dict] = []

    def new_node() -> int:
        nh.append(0)
        nq.append([0] * A)
        q.append([0.0] * A)
        children.append({})
        return len(nh) - 1

    def select(node: int) -> int:
        counts = nq[node]
        for a in range(A):
            if counts[a] == 0:
                return a
        logn = math.log(nh[node])
        best, besta = -math.inf, 0
        qs = q[node]
        for a in range(A):
            val = qs[a] + c * math.sqrt(logn / counts[a])
            if val > best:
                best, besta = val, a
        return besta

    def rollout(state, depth: int) -> float:
        total, disc = 0.0, 1.0
        while depth < max_depth:
            a = int(rng.random() * A)
            state, _, r, done = generative(state, actions[a], rng)
            total += disc * r
            if done:
                break
            disc *= gamma
            depth += 1
        return total

    def simulate(state, node: int, depth: int) -> float:
        if depth >= max_depth:
            return 0.0
        a = select(node)
        state2, obs, r, done = generative(state, actions[a], rng)
        if done or depth + 1 >= max_depth:
            total = r
        else:
            key = (a, obs)
            child = children[node].get(key)
            if child is None:
                child = new_node()
                children[node][key] = child
                total = r + gamma * rollout(state2, depth + 1)
            else:
                total = r + gamma * simulate(state2, child, depth + 1)
        nh[node] += 1
        nq[node][a] += 1
        q[node][a] += (total - q[node][a]) / nq[node][a]
        return total

    new_node()
    sims = 0
    deadline = (None if config.num_sims is not None
                else time.perf_counter() + config.time_budget_per_step)
    while True:
        if config.num_sims is not None:
            if sims >= config.num_sims:
                break
        elif time.perf_counter() >= deadline:
            break
        simulate(root_belief_sampler(rng), 0, 0)
        sims += 1

    table = {actions[a]: q[0][a] for a in range(A) if nq[0][a] > 0}
    if not table:
        return actions[int(rng.random() * A)], {}
    best_a = None
    best_q = -math.inf
    for a in range(A):
        if nq[0][a] > 0 and q[0][a] > best_q:
            best_q = q[0][a]
            best_a = a
    return actions[best_a], table


def select_best(results: Sequence[Mapping]) -> int | None:
    """Index of the result with the highest best-root-Q; earlier entries
    win ties, so ordering instances by level makes the lowest level win.
    Flagged (zero-simulation) results never win; None if all are flagged."""
    best_idx = None
    best_q = -math.inf
    for i, res in enumerate(results):
        if res["flagged"]:
            continue
        qa = res["q"][res["action"]]
        if qa > best_q:
            best_q = qa
            best_idx = i
    return best_idx


# -- engine-backed planners --------------------------------------------------


class MrPouctPlanner:
    """Multi-resolution POUCT: one search per abstraction level per step,
    sharing the per-step budget, best root Q wins. levels=(0,) is plain
    POUCT; passing moveop_levels plans flat (ground models) with MoveOp
    actions instead of primitive moves."""

    def __init__(
        self,
        *,
        m: int,
        object_ids: Sequence[int],
        sensor: SensorModel,
        rewards: RewardSpec,
        config: PlannerConfig | None = None,
        levels: Sequence[int] | None = None,
        obstacles: Sequence[Cell] = (),
        seed: int = 0,
        moveop_levels: Sequence[int] | None = None,
        name: str = "mr-pouct",
    ) -> None:
        self.m = m
        self.object_ids = tuple(sorted(object_ids))
        self.sensor = sensor
        self.rewards = rewards
        self.config = config or PlannerConfig()
        lmax = m.bit_length() - 1
        if levels is None:
            levels = (0, 1) if m <= 8 else (0, 1, 2)
        self.levels = tuple(sorted({min(lev, lmax) for lev in levels}))
        self.moveop_levels = tuple(moveop_levels) if moveop_levels else None
        self.obstacles = tuple(obstacles)
        self.seed = seed
        self.name = name
        self._step = 0

    def plan(self, robot_state: RobotState,
             beliefs: Mapping[int, OctreeBelief]) -> PlanDecision:
        self._step += 1
        cfg = self.config
        pose = robot_state.pose
        found_mask = 0
        for i, oid in enumerate(self.object_ids):
            if oid in robot_state.found:
                found_mask |= 1 << i
        pyramids = {oid: belief_pyramid(beliefs[oid]) for oid in self.object_ids}
        instances = [
            make_instance(lev, pose, self.m, cfg.k_samples,
                          self.moveop_levels if lev == 0 else None)
            for lev in self.levels
        ]
        problems = [
            build_problem(
                level=inst.level,
                actions=inst.actions,
                pose_xyz=pose.position,
                pose_dir=pose.direction,
                found_mask=found_mask,
                object_order=self.object_ids,
                pyramids=pyramids,
                sensor=self.sensor,
                rewards=self.rewards,
                m=self.m,
                max_depth=cfg.max_depth,
                ucb_c=cfg.ucb_constant,
                k_samples=inst.k_samples,
                discount=cfg.discount,
                obstacle_cells=self.obstacles,
            )
            for inst in instances
        ]
        results = []
        if cfg.num_sims is not None:
            for i, prob in enumerate(problems):
                results.append(run_plan(prob, derive_seed(self.seed, self._step, i),
                                        num_sims=cfg.num_sims))
        else:
            # sequential equal slices of the shared per-step budget
            start = time.perf_counter()
            L = len(problems)
            for i, prob in enumerate(problems):
                slice_end = start + cfg.time_budget_per_step * (i + 1) / L
                results.append(run_plan(prob, derive_seed(self.seed, self._step, i),
                                        deadline=slice_end))
        idx = select_best(results)
        sims_total = sum(r["sims"] for r in results)
        diagnostics = {
            "step": self._step,
            "planner": self.name,
            "impl": results[0]["impl"],
            "instances": [
                {
                    "level": inst.level,
                    "sims": res["sims"],
                    "flagged": res["flagged"],
                    "q": {
                        str(inst.actions[a]): res["q"][a]
                        for a in range(len(inst.actions)) if res["n"][a] > 0
                    },
                }
                for inst, res in zip(instances, results)
            ],
        }
        if idx is None:
            rngf = np.random.default_rng(derive_seed(self.seed, self._step, 0xFA11))
            action = PRIMITIVE_ACTIONS[int(rngf.integers(len(PRIMITIVE_ACTIONS)))]
            diagnostics["chosen"] = str(action)
            return PlanDecision(action, None, True, True, None, sims_total,
                                results[0]["impl"], diagnostics)
        inst = instances[idx]
        action = inst.actions[results[idx]["action"]]
        plan = (expand_moveop(pose, action.goal, self.rewards)
                if isinstance(action, MoveOp) else None)
        diagnostics["chosen"] = str(action)
        diagnostics["chosen_level"] = inst.level
        return PlanDecision(action, plan, False, True, inst.level, sims_total,
                            results[idx]["impl"], diagnostics)


@dataclass
class ParticleBelief:
    """Ground-state particles (flat cell index per object, one row each)."""

    particles: np.ndarray  # int32[P, n]
    capacity: int = 1000
    deprived: bool = False

    def __len__(self) -> int:
        return int(self.particles.shape[0])


class PomcpPlanner:
    """POUCT with a particle root belief, filtered by exact observation
    match after each Look. No reinvigoration: once no particle reproduces
    an observation, the planner is deprived and acts uniformly at random."""

    name = "pomcp"

    def __init__(
        self,
        *,
        m: int,
        object_ids: Sequence[int],
        sensor: SensorModel,
        rewards: RewardSpec,
        config: PlannerConfig | None = None,
        obstacles: Sequence[Cell] = (),
        seed: int = 0,
        capacity: int = 1000,
    ) -> None:
        self.m = m
        self.object_ids = tuple(sorted(object_ids))
        self.sensor = sensor
        self.rewards = rewards
        self.config = config or PlannerConfig()
        self.obstacles = tuple(obstacles)
        self.seed = seed
        rng = np.random.default_rng(derive_seed(seed, 0x9A127))
        particles = rng.integers(
            0, m ** 3, size=(capacity, len(self.object_ids))
        ).astype(np.int32)
        self.belief = ParticleBelief(particles, capacity)
        self._step = 0
        self._updates = 0
        self._rng_fallback = np.random.default_rng(derive_seed(seed, 0xDE9D))

    def plan(self, robot_state: RobotState, beliefs=None) -> PlanDecision:
        self._step += 1
        cfg = self.config
        if self.belief.deprived:
            action = PRIMITIVE_ACTIONS[
                int(self._rng_fallback.integers(len(PRIMITIVE_ACTIONS)))
            ]
            return PlanDecision(action, None, True, False, 0, 0, IMPL_NAME,
                                {"step": self._step, "deprived": True,
                                 "chosen": str(action)})
        if len(self.belief) == 0:
            raise ValueError("particle set is empty")
        found_mask = 0
        for i, oid in enumerate(self.object_ids):
            if oid in robot_state.found:
                found_mask |= 1 << i
        pose = robot_state.pose
        problem = build_problem(
            level=0,
            actions=PRIMITIVE_ACTIONS,
            pose_xyz=pose.position,
            pose_dir=pose.direction,
            found_mask=found_mask,
            object_order=self.object_ids,
            pyramids={},
            sensor=self.sensor,
            rewards=self.rewards,
            m=self.m,
            max_depth=cfg.max_depth,
            ucb_c=cfg.ucb_constant,
            k_samples=cfg.k_samples,
            discount=cfg.discount,
            obstacle_cells=self.obstacles,
            particles=self.belief.particles,
        )
        seed_i = derive_seed(self.seed, self._step, 0)
        if cfg.num_sims is not None:
            res = run_plan(problem, seed_i, num_sims=cfg.num_sims)
        else:
            res = run_plan(problem, seed_i,
                           deadline=time.perf_counter() + cfg.time_budget_per_step)
        action = PRIMITIVE_ACTIONS[res["action"]]
        diag = {
            "step": self._step,
            "planner": self.name,
            "impl": res["impl"],
            "particles": len(self.belief),
            "sims": res["sims"],
            "chosen": str(action),
            "q": {str(PRIMITIVE_ACTIONS[a]): res["q"][a]
                  for a in range(len(PRIMITIVE_ACTIONS)) if res["n"][a] > 0},
        }
        return PlanDecision(action, None, res["flagged"], True, 0,
                            res["sims"], res["impl"], diag)

    def update(self, action: MosAction, obs: FactoredObservation,
               robot_state: RobotState) -> None:
        """Filter particles against the observed labels (exact match)."""
        if self.belief.deprived:
            return
        if not isinstance(action, Look) or obs.is_empty():
            return  # empty observation: every particle predicts it
        self._updates += 1
        geom = frustum_geom(self.sensor.frustum)
        d = obs.pose.direction
        obst = np.array(self.obstacles, dtype=np.int32).reshape(len(self.obstacles), 3)
        obj_ids = np.array(self.object_ids, dtype=np.int32)
        keep = kernels.match_particles(
            obs.pose.position[0], obs.pose.position[1], obs.pose.position[2],
            geom.offsets[d], geom.pixels[d], geom.depths[d],
            np.ascontiguousarray(geom.lut_pix[d]),
            np.ascontiguousarray(geom.lut_dep[d]),
            self.sensor.frustum.far, geom.side,
            obst, self.belief.particles, obj_ids,
            self.m, geom.r, obs.codes, self.sensor.p_hit,
            derive_seed(self.seed, self._updates, 0xF117),
        )
        survivors = self.belief.particles[keep.astype(bool)]
        self.belief.particles = np.ascontiguousarray(survivors)
        if len(self.belief) == 0:
            self.belief.deprived = True


def execute_step(env, action: MosAction,
                 beliefs: dict[int, OctreeBelief] | None,
                 sensor: SensorModel, rng: np.random.Generator):
    """Apply one decided action to the environment.

    A MoveOp (or a prepared MoveOpPlan) expands into its primitive moves,
    each stepping the environment and accruing its discounted step cost at
    the episode's running discount index. After the last primitive, octree
    beliefs (when given) are updated from the resulting observation.
    Returns (undiscounted reward sum, last observation, beliefs).
    """
    if isinstance(action, MoveOp):
        plan = expand_moveop(env.state.robot.pose, action.goal, env.rewards)
        prims: Sequence[MosAction] = plan.primitive_moves
    elif isinstance(action, MoveOpPlan):
        prims = action.primitive_moves
    else:
        prims = (action,)
    total = 0.0
    obs = FactoredObservation.empty()
    for prim in prims:
        if env.done:
            break
        obs, r = env.step(prim, rng)
        total += r
    if beliefs is not None and not obs.is_empty():
        belief_update_all(beliefs, action, obs, sensor,
                          found=env.state.robot.found)
    return total, obs, beliefs
