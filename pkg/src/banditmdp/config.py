"""Experiment configuration: a TOML file with ``[env]``, ``[run]``, ``[learner]``,
``[sweep]``, ``[output]`` and ``[verify]`` sections.

Every key is checked; unknown keys and wrong types raise :class:`ConfigError`
naming the offending field. Omitted keys take the defaults below, and the
fully resolved config is echoed into every output file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import tomli

from .envs import DEFAULTS as ENV_DEFAULTS
from .envs import ENV_KINDS, ENV_PARAMS, EnvSpec
from .learners import LearnerSpec
from .checks import VerifySettings


class ConfigError(ValueError):
    pass


@dataclass
class RunSettings:
    T: int = 20000
    doubling: bool = False
    seeds: tuple = (0,)
    snapshot_every: int = 1
    initial_state: int = 0
    raw_discount: bool = False
    workers: int = 1


@dataclass
class SweepSettings:
    T: tuple = (2000, 8000, 32000)


@dataclass
class OutputSettings:
    dir: str = ""
    plot: bool = False


@dataclass
class ExperimentConfig:
    env: EnvSpec = field(default_factory=lambda: EnvSpec("random_ergodic", dict(ENV_DEFAULTS["random_ergodic"])))
    run: RunSettings = field(default_factory=RunSettings)
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)

    def to_dict(self) -> dict:
        env = {"kind": self.env.kind, **ENV_DEFAULTS[self.env.kind], **self.env.params}
        out = {"env": env}
        for name in ("run", "learner", "sweep", "output", "verify"):
            d = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def parse_seeds(value, where="seeds") -> tuple:
    """Accepts an int, a list of ints, or ``"N..M"`` (inclusive)."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected int, list or 'N..M'")
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        lo, sep, hi = value.partition("..")
        try:
            if not sep:
                return (int(lo),)
            a, b = int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse {value!r}; use N or N..M") from None
        if b < a:
            raise ConfigError(f"{where}: empty range {value!r}")
        return tuple(range(a, b + 1))
    if isinstance(value, list) and value and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return tuple(value)
    raise ConfigError(f"{where}: expected int, non-empty int list or 'N..M'")


_NUMBER = (int, float)


def _typed(where, value, kind):
    if kind is float:
        ok = isinstance(value, _NUMBER) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {type(value).__name__} {value!r}")
    return value


_ENV_TYPES = {"num_states": int, "num_actions": int, "epsilon": float, "gamma": float, "seed": int,
              "big_reward": float, "reward_kind": str, "path": str}


def _section(data: dict, name: str, cls, types: dict, special=None):
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}]: expected a table")
    known = {f.name for f in dataclasses.fields(cls)}
    values = {}
    for key, value in raw.items():
        where = f"{name}.{key}"
        if key not in known:
            raise ConfigError(f"{where}: unknown key (known: {', '.join(sorted(known))})")
        if special and key in special:
            values[key] = special[key](value, where)
        else:
            values[key] = _typed(where, value, types[key])
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def _int_list(value, where):
    if isinstance(value, list) and value and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return tuple(value)
    raise ConfigError(f"{where}: expected a non-empty list of integers")


def _str_list(value, where):
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise ConfigError(f"{where}: expected a list of strings")


def _optional_float(value, where):
    return None if value is None else _typed(where, value, float)


def from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - {"env", "run", "learner", "sweep", "output", "verify"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    env_raw = dict(data.get("env", {"kind": "random_ergodic"}))
    kind = env_raw.pop("kind", "random_ergodic")
    if kind not in ENV_KINDS:
        raise ConfigError(f"env.kind: {kind!r} is not one of {', '.join(ENV_KINDS)}")
    params = {}
    for key, value in env_raw.items():
        if key not in _ENV_TYPES:
            raise ConfigError(f"env.{key}: unknown key")
        params[key] = _typed(f"env.{key}", value, _ENV_TYPES[key])
    bad = set(params) - ENV_PARAMS[kind]
    if bad:
        raise ConfigError(f"env.{sorted(bad)[0]}: not a parameter of {kind}")
    env = EnvSpec(kind, params)
    run = _section(data, "run", RunSettings, {"T": int, "doubling": bool, "snapshot_every": int,
                                                "initial_state": int, "raw_discount": bool, "workers": int},
                   {"seeds": parse_seeds})
    if run.T < 1:
        raise ConfigError("run.T: must be >= 1")
    if run.snapshot_every < 1 or run.workers < 1:
        raise ConfigError("run: snapshot_every and workers must be >= 1")
    learner = _section(data, "learner", LearnerSpec, {"kind": str, "wrapper": bool}, {"eta": _optional_float})
    sweep = _section(data, "sweep", SweepSettings, {}, {"T": _int_list})
    output = _section(data, "output", OutputSettings, {"dir": str, "plot": bool})
    verify = _section(data, "verify", VerifySettings,
                      {"trials": int, "run_T": int, "run_seeds": int, "probes": int, "exp3_streams": int,
                       "exp3_steps": int, "seed": int}, {"only": _str_list})
    return ExperimentConfig(env, run, learner, sweep, output, verify)


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    return from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def blob_sha1(data: bytes) -> str:
    """Git-style content hash: sha1 over ``b"blob <len>\\0" + data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def input_hash(config: ExperimentConfig, mdp_text: str) -> str:
    return blob_sha1((config.to_json() + "\n" + mdp_text).encode("utf-8"))
