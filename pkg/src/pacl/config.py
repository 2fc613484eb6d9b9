"""Experiment configuration files.

A config is an INI document with the sections ``experiment``, ``dynamics``,
``principal``, ``init``, ``data`` and ``output``. Unknown sections or keys are
rejected so that typos fail loudly. The schema is listed in README.md.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from pacl.data import (
    BY_RANGE,
    GAUSE_TIMES,
    PARTITION_MODES,
    Dataset,
    PartitionSpec,
    concat,
    generate_logistic,
    load_csv,
    load_gause_fixture,
    logistic_initial_guess,
    partition,
    recipient_labels,
)
from pacl.dynamics import DynamicsParams
from pacl.errors import InvalidArgument
from pacl.model import LogisticGrowthParams, ModelSpec, make_model
from pacl.orchestrator import RunConfig
from pacl.principal import PrincipalParams, PrincipalState

BUILTIN_GAUSE = "builtin:gause_synthetic"
GENERATE = "generate"

# section -> key -> required
SCHEMA: Dict[str, Dict[str, bool]] = {
    "experiment": {
        "model": True,
        "model_degree": False,
        "model_intercept": False,
        "param_box_lower": False,
        "param_box_upper": False,
        "use_param_box": False,
        "K": True,
        "T": True,
        "N": True,
        "seed": False,
        "tol": False,
        "record_stride": False,
        "L_lip": False,
        "threads": False,
    },
    "dynamics": {"gamma": True, "eta": True, "c": True},
    "principal": {"beta": True, "mu": True, "alpha0": False},
    "init": {"theta0": True, "p0": False},
    "data": {
        "source": False,
        "train": False,
        "test": False,
        "partition": False,
        "ranges": False,
        "sizes": False,
        "partition_seed": False,
        "generate_params": False,
        "generate_times": False,
        "generate_noise_sd": False,
        "generate_seed": False,
    },
    "output": {"out_dir": False},
}


class ConfigError(InvalidArgument):
    pass


def _reader() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep K, T, N, L_lip as written
    return cp


def read_config(path) -> Dict[str, Dict[str, str]]:
    """Parse a config file into ``{section: {key: raw string}}`` and check keys."""
    path = Path(path)
    cp = _reader()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    check_keys(raw)
    return raw


def check_keys(raw: Dict[str, Dict[str, str]]) -> None:
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, keys in SCHEMA.items():
        for key, required in keys.items():
            if required and key not in raw.get(section, {}):
                raise ConfigError(f"missing required key {section}.{key}")


def write_config(raw: Dict[str, Dict[str, str]], path) -> None:
    cp = _reader()
    for section, keys in raw.items():
        cp[section] = {k: str(v) for k, v in keys.items()}
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def _get(raw, section, key, conv, default=None):
    value = raw.get(section, {}).get(key)
    if value is None or value.strip() == "":
        return default
    try:
        return conv(value.strip())
    except (ValueError, InvalidArgument) as exc:
        raise ConfigError(f"invalid value for {section}.{key}: {value!r} ({exc})") from None


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(s: str) -> np.ndarray:
    return np.array([float(v) for v in s.split(",")], dtype=float)


def _matrix(s: str) -> np.ndarray:
    """``a,b,c`` for one shared vector or ``a,b,c; d,e,f`` for one per agent."""
    rows = [_floats(part) for part in s.split(";") if part.strip()]
    return rows[0] if len(rows) == 1 else np.array(rows)


def _int(s: str) -> int:
    return int(s)


def _ranges(s: str):
    out = []
    for part in s.split(";"):
        a, _, b = part.strip().partition("-")
        out.append((int(a), int(b or a)))
    return tuple(out)


def _ints(s: str):
    return tuple(int(v) for v in s.split(","))


def _times(s: str) -> np.ndarray:
    """``start:stop[:step]`` (stop exclusive) or an explicit comma list."""
    if ":" in s:
        parts = [float(v) for v in s.split(":")]
        return np.arange(*parts)
    return _floats(s)


@dataclass
class Experiment:
    raw: Dict[str, Dict[str, str]]
    model: ModelSpec
    run_config: RunConfig
    train_sets: List[Dataset]
    test_set: Dataset
    source: Optional[Dataset]
    theta0_mode: str


def _model(raw) -> ModelSpec:
    name = _get(raw, "experiment", "model", str)
    kwargs = {}
    degree = _get(raw, "experiment", "model_degree", _int)
    intercept = _get(raw, "experiment", "model_intercept", _bool)
    if degree is not None:
        if name != "polynomial":
            raise ConfigError("experiment.model_degree only applies to the polynomial model")
        kwargs["degree"] = degree
    elif name == "polynomial":
        raise ConfigError("missing required key experiment.model_degree")
    if intercept is not None:
        if name != "linear":
            raise ConfigError("experiment.model_intercept only applies to the linear model")
        kwargs["intercept"] = intercept
    lo = _get(raw, "experiment", "param_box_lower", _floats)
    hi = _get(raw, "experiment", "param_box_upper", _floats)
    if (lo is None) != (hi is None):
        raise ConfigError("param_box_lower and param_box_upper must be given together")
    if lo is not None:
        kwargs["param_box"] = (lo, hi)
    try:
        return make_model(name, **kwargs)
    except InvalidArgument as exc:
        raise ConfigError(f"invalid value for experiment.model: {exc}") from None


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _datasets(raw, base: Path, K: int):
    train = _get(raw, "data", "train", str)
    test = _get(raw, "data", "test", str)
    source_spec = _get(raw, "data", "source", str)
    if (train is None) != (test is None):
        raise ConfigError("data.train and data.test must be given together")
    if train is not None:
        if source_spec is not None:
            raise ConfigError("give either data.source or data.train/data.test, not both")
        paths = [s.strip() for s in train.split(";") if s.strip()]
        if len(paths) != K:
            raise ConfigError(f"data.train lists {len(paths)} files but K={K}")
        labels = recipient_labels(K + 1)
        trains = [load_csv(_resolve(base, p), lab) for p, lab in zip(paths, labels)]
        return trains, load_csv(_resolve(base, test), "principal-test"), None

    if source_spec is None:
        raise ConfigError("missing required key data.source (or data.train/data.test)")
    if source_spec == BUILTIN_GAUSE:
        source = load_gause_fixture()
    elif source_spec == GENERATE:
        params = _get(raw, "data", "generate_params", _floats)
        if params is None:
            raise ConfigError("missing required key data.generate_params")
        try:
            lp = LogisticGrowthParams.from_array(params)
        except (InvalidArgument, ValueError) as exc:
            raise ConfigError(f"invalid value for data.generate_params: {exc}") from None
        times = _get(raw, "data", "generate_times", _times, np.array(GAUSE_TIMES))
        noise = _get(raw, "data", "generate_noise_sd", float, 0.0)
        seed = _get(raw, "data", "generate_seed", _int, 0)
        if noise < 0:
            raise ConfigError("invalid value for data.generate_noise_sd: must be >= 0")
        source = generate_logistic(lp, times, noise, seed)
    else:
        source = load_csv(_resolve(base, source_spec))

    mode = _get(raw, "data", "partition", str, BY_RANGE)
    if mode not in PARTITION_MODES:
        raise ConfigError(f"invalid value for data.partition: {mode!r}")
    spec = PartitionSpec(
        mode=mode,
        assignments=_get(raw, "data", "ranges", _ranges, ()),
        sizes=_get(raw, "data", "sizes", _ints, ()),
        seed=_get(raw, "data", "partition_seed", _int, 0),
    )
    if spec.n_recipients != K + 1:
        key = "ranges" if mode == BY_RANGE else "sizes"
        raise ConfigError(f"data.{key} must list K+1={K + 1} recipients")
    try:
        parts = partition(source, spec)
    except InvalidArgument as exc:
        raise ConfigError(f"invalid partition: {exc}") from None
    return parts[:K], parts[K], source


def build_experiment(
    raw: Dict[str, Dict[str, str]],
    base_dir=".",
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> Experiment:
    """Validate a parsed config and materialise the model, datasets and run config."""
    check_keys(raw)
    base = Path(base_dir)
    model = _model(raw)

    K = _get(raw, "experiment", "K", _int)
    T = _get(raw, "experiment", "T", float)
    N = _get(raw, "experiment", "N", _int)
    if K < 1:
        raise ConfigError("invalid value for experiment.K: must be >= 1")
    if N < 1:
        raise ConfigError("invalid value for experiment.N: must be >= 1")
    train_sets, test_set, source = _datasets(raw, base, K)

    theta0_raw = raw["init"]["theta0"].strip()
    if theta0_raw == "auto":
        if model.name != "logistic_growth":
            raise ConfigError("init.theta0 = auto is only available for logistic_growth")
        theta0 = logistic_initial_guess(concat(train_sets))
    else:
        theta0 = _get(raw, "init", "theta0", _matrix)

    fields = {}
    for section, cls, keys in (
        ("dynamics", DynamicsParams, ("gamma", "eta", "c")),
        ("principal", PrincipalParams, ("beta", "mu")),
    ):
        values = {k: _get(raw, section, k, float) for k in keys}
        if cls is DynamicsParams:
            values["delta"] = T / N
        try:
            fields[section] = cls(**values)
        except InvalidArgument as exc:
            raise ConfigError(f"invalid [{section}] value: {exc}") from None

    kwargs = dict(
        tol=_get(raw, "experiment", "tol", float, 1e-8),
        seed=seed if seed is not None else _get(raw, "experiment", "seed", _int, 0),
        record_stride=_get(raw, "experiment", "record_stride", _int, 1),
        L_lip=_get(raw, "experiment", "L_lip", float),
        use_param_box=_get(raw, "experiment", "use_param_box", _bool, False),
        theta0=theta0,
        p0=_get(raw, "init", "p0", _matrix),
        alpha0=_get(raw, "principal", "alpha0", _floats),
        threads=threads if threads is not None else _get(raw, "experiment", "threads", _int, 1),
    )
    try:
        cfg = RunConfig(
            K=K, T=T, N=N, dynamics=fields["dynamics"], principal=fields["principal"], **kwargs
        )
        cfg.initial_states(model.param_dim)
        PrincipalState.initial(K, cfg.principal, cfg.alpha0)
    except InvalidArgument as exc:
        raise ConfigError(f"invalid [experiment]/[init] value: {exc}") from None
    return Experiment(raw, model, cfg, train_sets, test_set, source, theta0_raw)


def load_experiment(path, seed=None, threads=None) -> Experiment:
    path = Path(path)
    return build_experiment(read_config(path), path.parent, seed=seed, threads=threads)
