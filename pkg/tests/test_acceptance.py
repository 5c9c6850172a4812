"""Acceptance gate: one test per shipping criterion, each printing a single
PASS/FAIL line with the measured numbers (run with -s to see them live).

The desk-scale trend test (criterion 5) runs three planner groups under real
0.5 s/step wall-clock budgets and dominates the runtime; everything else
finishes in seconds. Criteria and tolerances are asserted exactly as stated,
never loosened.
"""

import time

import numpy as np

from octsearch.abstraction import abstract_generative, make_instance
from octsearch.belief import OctreeBelief
from octsearch.domain import (
    PRIMITIVE_ACTIONS,
    Look,
    MosState,
    RewardSpec,
    RobotState,
    SensorModel,
    belief_update_all,
    generative,
    sample_observation,
)
from octsearch.geometry import CameraPose, FrustumParams, max_coverage_fraction
from octsearch.harness import ExperimentConfig, derive_seed, run_batch, run_experiment
from octsearch.planners import (
    MrPouctPlanner,
    PlannerConfig,
    PomcpPlanner,
    execute_step,
    pouct_plan,
)
from octsearch.sim import Episode, generate_world

from _oracles import TwoCellPomdp, dense_bayes_filter

REWARDS = RewardSpec()


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _filter_runs(alpha, beta):
    """Shared machinery for criteria 1 and 2: octree vs dense filter over 20
    sampled Look observations per grid size, yielding per-update snapshots."""
    for m in (2, 4, 8):
        true_cell = (0, m - 1, m // 2)
        sensor = SensorModel(alpha=alpha, beta=beta,
                             frustum=FrustumParams(far=4))
        rng = np.random.default_rng(derive_seed(m, int(alpha)))
        belief = OctreeBelief(m)
        observations = []
        while len(observations) < 20:
            pos = tuple(int(v) for v in rng.integers(0, m, 3))
            robot = RobotState(CameraPose(pos, int(rng.integers(6))),
                               frozenset())
            state = MosState(robot, {1: true_cell})
            obs = sample_observation(state, Look(robot.pose.direction),
                                     sensor, m, rng)
            voxels = obs.labeled_voxels_for(1)
            if not voxels:
                continue
            belief.update(voxels, alpha=alpha, beta=beta, object_id=1)
            observations.append(voxels)
            yield m, belief, observations


def test_criterion_1_bayes_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha, beta in ((1e5, 0.0), (100.0, 0.3)):
        for m, belief, observations in _filter_runs(alpha, beta):
            flat = [v for voxels in observations for v in voxels]
            dense, _ = dense_bayes_filter(m, flat, alpha, beta, 1)
            probs = np.array([[[belief.prob_at((x, y, z))
                                for z in range(m)] for y in range(m)]
                              for x in range(m)])
            worst = max(worst, float(np.max(np.abs(probs - dense))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    _report("criterion-1 bayes-oracle-equivalence", ok,
            f"max-abs-diff={worst:.2e} (tol 1e-9), runtime={elapsed:.2f}s (<5s)")


def test_criterion_2_incremental_normalizer():
    worst = 0.0
    for alpha, beta in ((1e5, 0.0), (100.0, 0.3)):
        for m, belief, _ in _filter_runs(alpha, beta):
            total = float(belief.ground_array().sum())
            worst = max(worst, abs(belief.normalizer - total) / total)
    ok = worst <= 1e-9
    _report("criterion-2 incremental-normalizer", ok,
            f"max-rel-err={worst:.2e} (tol 1e-9)")


def test_criterion_3_sampling_fidelity():
    m = 8
    rng_w = np.random.default_rng(5)
    prior = {(x, y, z): 0.0 for x in range(m) for y in range(m)
             for z in range(m)}
    for x in range(2, 5):
        for y in range(2, 5):
            for z in range(2, 5):
                prior[(x, y, z)] = 1000.0 * (1.0 + float(rng_w.random()))
    belief = OctreeBelief.with_prior(m, prior)
    rng = np.random.default_rng(0)
    n = 100_000
    counts = {}
    max_visits = 0
    t0 = time.perf_counter()
    for _ in range(n):
        stats = {}
        cell = belief.sample(0, rng, stats=stats).cell
        counts[cell] = counts.get(cell, 0) + 1
        max_visits = max(max_visits, stats["visits"])
    elapsed = time.perf_counter() - t0
    tv = 0.5 * sum(
        abs(counts.get((x, y, z), 0) / n - belief.prob_at((x, y, z)))
        for x in range(m) for y in range(m) for z in range(m))
    ok = tv < 0.01 and elapsed < 2.0 and max_visits <= belief.lmax
    _report("criterion-3 sampling-fidelity", ok,
            f"tv={tv:.4f} (<0.01), runtime={elapsed:.2f}s (<2s), "
            f"max-visits={max_visits} (<= {belief.lmax})")


def test_criterion_4_frustum_coverage():
    targets = ((4, 4, 0.172), (8, 6, 0.088), (16, 10, 0.047), (32, 16, 0.026))
    details = []
    ok = True
    for m, d, expect in targets:
        got = max_coverage_fraction(m, FrustumParams(far=d))
        details.append(f"m={m},d={d}: {100 * got:.2f}% vs {100 * expect:.1f}%")
        ok = ok and abs(got - expect) <= 0.02
    _report("criterion-4 frustum-coverage", ok,
            "; ".join(details) + " (tol +-2pp)")


def test_criterion_6_sensor_noise_behavior():
    def looks_before_first_find(log):
        looks = 0
        for entry in log:
            if entry["action"] == "find" and entry["reward"] > 0:
                break
            if entry["action"].startswith("look"):
                looks += 1
        return looks

    def batch(alpha, beta):
        cfg = ExperimentConfig(m=8, n=2, d=6, alpha=alpha, beta=beta,
                               planner="mr-pouct", trials=20, seed=0,
                               serial=True, total_time=None, max_steps=120)
        results, logs = run_batch(cfg)
        assert not any(r.failed for r in results)
        return results, logs

    _, logs_lo = batch(10.0, 0.0)
    _, logs_hi = batch(1e5, 0.0)
    looks_lo = float(np.mean([looks_before_first_find(lg) for lg in logs_lo]))
    looks_hi = float(np.mean([looks_before_first_find(lg) for lg in logs_hi]))

    res_b3, _ = batch(100.0, 0.3)
    res_b8, _ = batch(100.0, 0.8)
    from octsearch.harness import _t_ci95

    r3 = [r.reward for r in res_b3]
    r8 = [r.reward for r in res_b8]
    diff = abs(float(np.mean(r3)) - float(np.mean(r8)))
    width = 2.0 * max(_t_ci95(r3), _t_ci95(r8))
    ok = looks_lo > looks_hi and diff < width
    _report("criterion-6 sensor-noise-behavior", ok,
            f"mean looks before first find: alpha=10 {looks_lo:.2f} > "
            f"alpha=1e5 {looks_hi:.2f}; beta 0.3 vs 0.8 reward diff "
            f"{diff:.1f} < ci-width {width:.1f}")


def test_criterion_7_level0_abstraction_degeneracy():
    m = 8
    sensor = SensorModel(alpha=1e3, beta=0.2, frustum=FrustumParams(far=6))
    occupied = {(4, 4, 4): -1, (2, 5, 3): 1, (6, 1, 6): 2}
    object_cells = {1: ((2, 5, 3),), 2: ((6, 1, 6),)}

    def fresh_state():
        return MosState(RobotState(CameraPose((1, 2, 2), 0), frozenset()),
                        {1: (2, 5, 3), 2: (6, 1, 6)})

    beliefs = {1: OctreeBelief(m), 2: OctreeBelief(m)}
    instance = make_instance(0, CameraPose((1, 2, 2), 0), m)
    rng_a = np.random.default_rng(77)
    rng_g = np.random.default_rng(77)
    act_rng = np.random.default_rng(3)
    sg, sa = fresh_state(), fresh_state()
    steps = 0
    for _ in range(1000):
        action = PRIMITIVE_ACTIONS[int(act_rng.integers(13))]
        sg2, og, rg = generative(sg, action, sensor, REWARDS, m, rng_g,
                                 occupied=occupied, object_cells=object_cells)
        sa2, oa, ra = abstract_generative(
            instance, sa, action, beliefs, sensor, REWARDS, m, rng_a,
            obstacles=((4, 4, 4),))
        if not (sg2 == sa2 and og == oa and rg == ra):
            break
        sg, sa = sg2, sa2
        steps += 1
        if len(sg.robot.found) == 2:
            sg, sa = fresh_state(), fresh_state()
    ok = steps == 1000
    _report("criterion-7 level0-abstraction-degeneracy", ok,
            f"{steps}/1000 seeded steps identical (state, obs, reward)")


def test_criterion_8_pouct_sanity_oracle():
    toy = TwoCellPomdp()
    exact = toy.exact_root_values(depth=4)
    oracle_action = max(exact, key=exact.get)
    cfg = PlannerConfig(num_sims=2000, max_depth=4, ucb_constant=100.0,
                        discount=toy.gamma)
    wins = 0
    for seed in range(100):
        action, _ = pouct_plan(toy.generative, toy.sample_root, toy.actions,
                               cfg, np.random.default_rng(seed))
        wins += action == oracle_action
    ok = wins >= 95
    _report("criterion-8 pouct-sanity-oracle", ok,
            f"{wins}/100 runs matched the exact solver (need >=95)")


def test_criterion_9_serial_determinism(tmp_path):
    csvs = []
    for name in ("first", "second"):
        cfg = ExperimentConfig(m=8, n=2, d=6, planner="mr-pouct", trials=5,
                               seed=0, serial=True, total_time=None,
                               max_steps=80, out=str(tmp_path / name))
        run_experiment(cfg)
        csvs.append((tmp_path / name / "results.csv").read_bytes())
    ok = csvs[0] == csvs[1]
    _report("criterion-9 serial-determinism", ok,
            f"results.csv byte-identical across reruns ({len(csvs[0])} bytes)")


def _pomcp_wall_trial(trial: int, seed: int = 0) -> tuple[float, int, bool]:
    world = generate_world(16, 2, 10, seed + trial)
    sensor = SensorModel(alpha=1e5, beta=0.0, frustum=FrustumParams(far=10))
    env = Episode(world, sensor, REWARDS, max_steps=500, total_time=60.0)
    rng = np.random.default_rng(derive_seed(seed, trial, 1))
    planner = PomcpPlanner(m=16, object_ids=tuple(world.objects),
                           sensor=sensor, rewards=REWARDS,
                           config=PlannerConfig(time_budget_per_step=0.5),
                           seed=derive_seed(seed, trial, 2))
    while not env.done:
        t0 = time.perf_counter()
        decision = planner.plan(env.state.robot)
        env.charge_time(time.perf_counter() - t0)
        if env.done:
            break
        u0 = time.perf_counter()
        _, obs, _ = execute_step(env, decision.action, None, sensor, rng)
        planner.update(decision.action, obs, env.state.robot)
        env.charge_time(time.perf_counter() - u0)
    return env.discounted_reward, env.found_count, planner.belief.deprived


def test_criterion_5_desk_scale_trends():
    t0 = time.perf_counter()

    def batch(planner, m, n, d):
        cfg = ExperimentConfig(m=m, n=n, d=d, planner=planner,
                               time_per_step=0.5, total_time=60.0, trials=20,
                               seed=0)
        results, _ = run_batch(cfg)
        assert not any(r.failed for r in results)
        return (float(np.mean([r.reward for r in results])),
                float(np.mean([r.found for r in results])))

    _, exh_found = batch("exhaustive", 4, 2, 4)
    _, mr4_found = batch("mr-pouct", 4, 2, 4)

    mr_reward, mr_found = batch("mr-pouct", 16, 2, 10)
    pouct_reward, pouct_found = batch("pouct", 16, 2, 10)
    pomcp = [_pomcp_wall_trial(t) for t in range(20)]
    pomcp_reward = float(np.mean([r for r, _, _ in pomcp]))
    dep_rate = float(np.mean([float(d) for _, _, d in pomcp]))

    elapsed = time.perf_counter() - t0
    a = exh_found >= mr4_found - 0.3
    b = mr_reward > pomcp_reward and dep_rate >= 0.8
    c = mr_found >= pouct_found - 0.3
    ok = a and b and c and elapsed <= 3600.0
    _report("criterion-5 desk-scale-trends", ok,
            f"(a) exhaustive found {exh_found:.2f} >= mr {mr4_found:.2f}-0.3; "
            f"(b) mr reward {mr_reward:.1f} > pomcp {pomcp_reward:.1f}, "
            f"deprivation {dep_rate:.0%} >= 80%; "
            f"(c) mr found {mr_found:.2f} >= pouct {pouct_found:.2f}-0.3; "
            f"runtime {elapsed / 60:.1f} min (<=60)")
