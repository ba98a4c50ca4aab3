"""Experiment configuration: defaults, JSON round-trip, validation.

The config file is plain JSON mirroring the dataclass tree below. Unknown
keys are rejected with their path so typos fail loudly; omitted keys take
the documented defaults.
"""

from dataclasses import MISSING, dataclass, field, fields, asdict, is_dataclass
import json

from .agents import (ConsumerInvestorCfg, FundamentalInvestorCfg,
                     MomentumInvestorCfg)
from .mechanism import ConfigError

T_DEFAULT = 390          # minutes, 9:30am to 4:00pm
GAMMA_DEFAULT = 0.9999


@dataclass
class MMCfg:
    size: int = 25           # shares per quoted level
    lam: float = 1.0         # weight on exchange incentives in the MM reward


@dataclass
class FundamentalSourceCfg:
    kind: str = "synthetic"          # "synthetic" | "file"
    path: str | None = None          # CSV path when kind == "file"
    p0: int = 100_000                # tenth-cents (= $100.00... i.e. 10000 cents)
    reversion_rate: float = 0.05
    volatility: float = 20.0         # price units per step


@dataclass
class ScheduleCfg:
    """Three-phase learning schedule with geometric decay between anchors.

    Anchor indices follow the published 2000-episode layout and rescale
    proportionally when the phase lengths are shrunk.
    """
    explore_episodes: int = 800
    exploit_episodes: int = 400
    converge_episodes: int = 800
    alpha_high: float = 0.9
    alpha_final: float = 1e-5
    epsilon_high: float = 0.9
    epsilon_mid: float = 0.1
    epsilon_final: float = 1e-5

    @property
    def total_episodes(self) -> int:
        return self.explore_episodes + self.exploit_episodes + self.converge_episodes


@dataclass
class BinsCfg:
    inventory: int = 8
    fee: int = 3
    incentive: int = 3
    imbalance: int = 5
    spread: int = 4
    midprice: int = 5

    def counts(self) -> dict[str, int]:
        return asdict(self)


@dataclass
class RewardWeights:
    lam: float = 1.0
    eta: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.eta < 0 or not 0.0 <= self.beta <= 1.0:
            raise ConfigError("require lam >= 0, eta >= 0, beta in [0, 1]")


@dataclass
class ExperimentConfig:
    T: int = T_DEFAULT
    gamma: float = GAMMA_DEFAULT
    mm: MMCfg = field(default_factory=MMCfg)
    fundamental_investors: FundamentalInvestorCfg = field(default_factory=FundamentalInvestorCfg)
    momentum_investors: MomentumInvestorCfg = field(default_factory=MomentumInvestorCfg)
    consumer_investors: ConsumerInvestorCfg = field(default_factory=ConsumerInvestorCfg)
    fundamental: FundamentalSourceCfg = field(default_factory=FundamentalSourceCfg)
    schedule: ScheduleCfg = field(default_factory=ScheduleCfg)
    bins: BinsCfg = field(default_factory=BinsCfg)
    weights: RewardWeights = field(default_factory=RewardWeights)
    seeds: list[int] = field(default_factory=lambda: [0])
    calibration_episodes: int = 5
    eval_episodes: int = 5       # greedy-policy episodes averaged per cell
    calibration_path: str | None = None
    output_dir: str = "runs"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        value = data[name]
        default = f.default_factory() if f.default_factory is not MISSING else f.default
        field_cls = type(default) if is_dataclass(default) else None
        if field_cls is not None:
            kwargs[name] = _build(field_cls, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
