"""Tabular Q-learning for the exchange and the MM.

Training alternates per episode: even episodes update the exchange's
table, odd episodes the MM's, while the frozen learner keeps acting
epsilon-greedily from its current table. Learning rate and exploration
follow a three-phase schedule with geometric decay between published
anchor values. States are normalized to [-1, 1] and discretized into
bins calibrated from a random-policy sample run.
"""

from dataclasses import dataclass, field
import bisect
import json

import numpy as np

from . import mechanism as mech
from .config import ExperimentConfig, ScheduleCfg
from .kernel import MarketSim, run_episode
from .mechanism import (EX_STATE_COMPONENTS, MM_STATE_COMPONENTS,
                        EXCHANGE_ACTIONS, MM_ACTIONS, Normalizer)

CALIBRATION_VERSION = 1

# anchor positions as fractions of the 2000-episode reference layout
_ALPHA_ANCHOR_FRACS = ((599 / 1999, "alpha_high"), (999 / 1999, "alpha_final"))
_EPS_ANCHOR_FRACS = ((399 / 1999, "epsilon_high"), (599 / 1999, "epsilon_mid"),
                     (999 / 1999, "epsilon_final"))


class ScheduleError(Exception):
    pass


def _anchor_indices(fracs, schedule: ScheduleCfg):
    total = schedule.total_episodes
    return [(round(f * (total - 1)), getattr(schedule, name))
            for f, name in fracs]


def _piecewise_geometric(anchors, n: int) -> float:
    """Constant before the first anchor and after the last; log-linear
    interpolation between consecutive anchors."""
    if n <= anchors[0][0]:
        return anchors[0][1]
    for (i0, v0), (i1, v1) in zip(anchors, anchors[1:]):
        if n <= i1:
            frac = (n - i0) / (i1 - i0)
            return float(v0 * (v1 / v0) ** frac)
    return anchors[-1][1]


def schedule_value(schedule: ScheduleCfg, n: int) -> tuple[float, float]:
    """(alpha_n, epsilon_n) for episode n."""
    if not 0 <= n < schedule.total_episodes:
        raise ScheduleError(f"episode {n} outside [0, {schedule.total_episodes})")
    alpha = _piecewise_geometric(_anchor_indices(_ALPHA_ANCHOR_FRACS, schedule), n)
    eps = _piecewise_geometric(_anchor_indices(_EPS_ANCHOR_FRACS, schedule), n)
    return alpha, eps


# -- calibration and discretization -------------------------------------

@dataclass
class Calibration:
    """Normalization bounds and bin edges learned from a sample run.

    `edges[name]` holds the interior bin edges in normalized space; a
    component with zero observed variance gets no edges (a single bin)
    and is listed in `degenerate`.
    """
    bounds: dict[str, tuple[float, float]]
    edges: dict[str, list[float]]
    reward_bounds: dict[str, tuple[float, float]]
    degenerate: list[str] = field(default_factory=list)
    version: int = CALIBRATION_VERSION

    def normalizer(self) -> Normalizer:
        return Normalizer(dict(self.bounds))

    def bin_counts(self, components) -> tuple[int, ...]:
        return tuple(len(self.edges[c]) + 1 for c in components)

    def save(self, path: str) -> None:
        payload = {"version": self.version,
                   "bounds": {k: list(v) for k, v in self.bounds.items()},
                   "edges": self.edges,
                   "reward_bounds": {k: list(v) for k, v in self.reward_bounds.items()},
                   "degenerate": self.degenerate}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Calibration":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("version") != CALIBRATION_VERSION:
            raise ValueError(f"{path}: unsupported calibration version")
        return cls(bounds={k: tuple(v) for k, v in data["bounds"].items()},
                   edges=data["edges"],
                   reward_bounds={k: tuple(v) for k, v in data["reward_bounds"].items()},
                   degenerate=data["degenerate"])


def _bounds_from_sample(values: np.ndarray) -> tuple[tuple[float, float], bool]:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        # zero variance: widen artificially so normalization stays defined
        return (lo - 0.5, hi + 0.5), True
    pad = 0.1 * (hi - lo)
    return (lo - pad, hi + pad), False


def calibrate(config: ExperimentConfig, seed: int,
              episodes: int | None = None) -> Calibration:
    """Observe state/reward ranges under uniform-random play and derive
    normalization bounds (observed range widened 10%) plus quantile bin
    edges balancing expected visitation per bin."""
    episodes = episodes if episodes is not None else config.calibration_episodes
    if episodes < 1:
        raise ValueError("need at least one calibration episode")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xCA1)))
    samples: dict[str, list[float]] = {c: [] for c in MM_STATE_COMPONENTS}
    rewards: dict[str, list[float]] = {"mm_reward": [], "ex_reward": []}

    for ep in range(episodes):
        result = run_episode(
            config, seed + ep,
            ex_policy=lambda s, t: int(rng.integers(len(EXCHANGE_ACTIONS))),
            mm_policy=lambda s, t: int(rng.integers(len(MM_ACTIONS))))
        for rec in result.steps:
            for c in MM_STATE_COMPONENTS:
                samples[c].append(rec.mm_state[c])
            rewards["mm_reward"].append(rec.mm_reward)
            rewards["ex_reward"].append(rec.ex_reward)

    bin_counts = config.bins.counts()
    bounds, edges, degenerate = {}, {}, []
    for c in MM_STATE_COMPONENTS:
        vals = np.asarray(samples[c])
        bounds[c], degen = _bounds_from_sample(vals)
        if degen:
            edges[c] = []
            degenerate.append(c)
            continue
        lo, hi = bounds[c]
        norm = np.clip(2.0 * (vals - lo) / (hi - lo) - 1.0, -1.0, 1.0)
        k = bin_counts[c]
        qs = np.quantile(norm, np.linspace(0, 1, k + 1)[1:-1])
        # deduplicate near-equal quantiles so bins stay well-defined
        uniq = []
        for q in qs:
            if not uniq or q - uniq[-1] > 1e-9:
                uniq.append(float(q))
        edges[c] = uniq
    reward_bounds = {}
    for name, vals in rewards.items():
        reward_bounds[name], degen = _bounds_from_sample(np.asarray(vals))
        if degen:
            degenerate.append(name)
    return Calibration(bounds=bounds, edges=edges,
                       reward_bounds=reward_bounds, degenerate=degenerate)


class Discretizer:
    """Maps raw state dicts to bin-index tuples via a calibration."""

    def __init__(self, calibration: Calibration, components):
        self.components = tuple(components)
        self.norm = calibration.normalizer()
        self.edges = [calibration.edges[c] for c in self.components]
        self.counts = calibration.bin_counts(self.components)

    def __call__(self, state: dict) -> tuple[int, ...]:
        out = []
        for c, e in zip(self.components, self.edges):
            x = self.norm.normalize(c, state[c])
            out.append(bisect.bisect_right(e, x))
        return tuple(out)

    def all_cells(self):
        grids = [range(k) for k in self.counts]
        idx = [0] * len(grids)
        # plain odometer to avoid materialising the full product
        while True:
            yield tuple(idx)
            for i in reversed(range(len(grids))):
                idx[i] += 1
                if idx[i] < self.counts[i]:
                    break
                idx[i] = 0
            else:
                return


# -- Q-table -------------------------------------------------------------

class QTable:
    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.values: dict[tuple, np.ndarray] = {}
        self.visits: dict[tuple, np.ndarray] = {}

    def q(self, s) -> np.ndarray:
        row = self.values.get(s)
        if row is None:
            row = np.zeros(self.n_actions)
            self.values[s] = row
            self.visits[s] = np.zeros(self.n_actions, dtype=np.int64)
        return row

    def greedy(self, s) -> int:
        row = self.values.get(s)
        if row is None:
            return 0
        return int(np.argmax(row))   # first max: lowest-index tie-break

    def update(self, s, a: int, r: float, s_next, alpha: float,
               gamma: float) -> None:
        row = self.q(s)
        target = r + gamma * float(np.max(self.q(s_next)))
        row[a] += alpha * (target - row[a])
        self.visits[s][a] += 1

    def content_hash(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for s in sorted(self.values):
            h.update(repr((s, self.values[s].tolist(),
                           self.visits[s].tolist())).encode())
        return h.hexdigest()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for s in sorted(self.values):
                for a in range(self.n_actions):
                    fh.write(json.dumps({
                        "state": list(s), "action": a,
                        "value": self.values[s][a],
                        "visits": int(self.visits[s][a])}) + "\n")

    @classmethod
    def load(cls, path: str, n_actions: int) -> "QTable":
        table = cls(n_actions)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                s = tuple(row["state"])
                table.q(s)[row["action"]] = row["value"]
                table.visits[s][row["action"]] = row["visits"]
        return table


def epsilon_greedy(table: QTable, s, eps: float, rng) -> int:
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(table.n_actions))
    return table.greedy(s)


# -- training ------------------------------------------------------------

@dataclass
class EpisodeCurvePoint:
    episode: int
    alpha: float
    epsilon: float
    updated: str              # "exchange" | "mm"
    mm_reward: float          # cumulative raw reward over the episode
    ex_reward: float
    ex_profit: float
    ex_equity: float


@dataclass
class TrainResult:
    q_mm: QTable
    q_ex: QTable
    curve: list[EpisodeCurvePoint]
    calibration: Calibration
    avg_mm_action: tuple[float, float]        # (half-spread cents, depth)
    avg_ex_action: tuple[float, float]        # (fee cents, incentive cents)


def _norm_reward(value: float, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    return max(-1.0, min(1.0, 2.0 * (value - lo) / (hi - lo) - 1.0))


def train(config: ExperimentConfig, seed: int,
          calibration: Calibration | None = None,
          episodes: int | None = None) -> TrainResult:
    """Alternating two-learner tabular Q-learning over the market game."""
    if calibration is None:
        if config.calibration_path is None:
            raise ValueError(
                "no calibration available: run calibrate first or set "
                "calibration_path in the config")
        calibration = Calibration.load(config.calibration_path)
    schedule = config.schedule
    total = schedule.total_episodes if episodes is None else episodes
    gamma = config.gamma
    disc_mm = Discretizer(calibration, MM_STATE_COMPONENTS)
    disc_ex = Discretizer(calibration, EX_STATE_COMPONENTS)
    q_mm = QTable(len(MM_ACTIONS))
    q_ex = QTable(len(EXCHANGE_ACTIONS))
    mm_rb = calibration.reward_bounds["mm_reward"]
    ex_rb = calibration.reward_bounds["ex_reward"]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7A)))
    sim = MarketSim(config)
    curve = []

    for n in range(total):
        alpha, eps = schedule_value(schedule, n)
        update_ex = (n % 2 == 0)
        mm_state, ex_state = sim.reset(seed * 100_003 + n)
        s_mm, s_ex = disc_mm(mm_state), disc_ex(ex_state)
        tot_mm = tot_ex = tot_profit = tot_equity = 0.0
        for t in range(config.T):
            a_ex = epsilon_greedy(q_ex, s_ex, eps, rng)
            a_mm = epsilon_greedy(q_mm, s_mm, eps, rng)
            rec = sim.step(a_ex, a_mm)
            s_mm2, s_ex2 = disc_mm(rec.mm_state), disc_ex(rec.ex_state)
            if update_ex:
                q_ex.update(s_ex, a_ex, _norm_reward(rec.ex_reward, ex_rb),
                            s_ex2, alpha, gamma)
            else:
                q_mm.update(s_mm, a_mm, _norm_reward(rec.mm_reward, mm_rb),
                            s_mm2, alpha, gamma)
            s_mm, s_ex = s_mm2, s_ex2
            tot_mm += rec.mm_reward
            tot_ex += rec.ex_reward
            tot_profit += rec.ex_profit_reward
            tot_equity += rec.ex_equity_reward
        curve.append(EpisodeCurvePoint(
            episode=n, alpha=alpha, epsilon=eps,
            updated="exchange" if update_ex else "mm",
            mm_reward=tot_mm, ex_reward=tot_ex,
            ex_profit=tot_profit, ex_equity=tot_equity))

    avg_mm = average_policy(q_mm, disc_mm,
                            [(h, float(d)) for h, d in MM_ACTIONS])
    avg_ex = average_policy(q_ex, disc_ex,
                            [(a.fee_cents, a.incentive_cents)
                             for a in EXCHANGE_ACTIONS])
    return TrainResult(q_mm=q_mm, q_ex=q_ex, curve=curve,
                       calibration=calibration,
                       avg_mm_action=avg_mm, avg_ex_action=avg_ex)


def average_policy(table: QTable, discretizer: Discretizer,
                   action_values: list[tuple[float, float]]
                   ) -> tuple[float, float]:
    """Greedy action components averaged uniformly over all state cells."""
    total = np.zeros(2)
    count = 0
    for cell in discretizer.all_cells():
        total += action_values[table.greedy(cell)]
        count += 1
    avg = total / count
    return (float(avg[0]), float(avg[1]))


def greedy_policy(table: QTable, discretizer: Discretizer):
    def policy(state, t):
        return table.greedy(discretizer(state))
    return policy
