"""Experiment configuration: JSON in, validated objects out.

Unknown keys are an error at every level.  The hash is the SHA-256 of the
canonical JSON of the normalised config (defaults filled in, sorted keys),
so load -> dump -> load reproduces it.  Environment overrides
(``HAWKES_STAB_SEED``, ``HAWKES_STAB_REPLICAS``, ``HAWKES_STAB_THREADS``,
``HAWKES_STAB_HORIZON``) are applied to the raw document before validation.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

from .errors import ConfigError
from .intensity import IntensityFn, Modulator, Modulus
from .kernels import Kernel
from .multitype import MultiTypeModel, TypedIntensity
from .samplers import SimConfig
from .state import initial_from_dict

ENV_PREFIX = "HAWKES_STAB_"
ENV_OVERRIDES = {"SEED": ("seed", int), "REPLICAS": ("replicas", int),
                 "THREADS": ("threads", int), "HORIZON": ("horizon", float)}

TOP_KEYS = {"model", "run", "analysis", "output"}
MODEL_KEYS = {"kernel", "lambda", "phi", "initial", "modulators", "multitype"}
MULTITYPE_KEYS = {"d", "kernels", "lambdas", "init", "normalized"}
RUN_DEFAULTS = {"horizon": None, "seed": None, "replicas": 1, "sampler": "thinning", "max_events": 1_000_000,
                "threads": 1, "burn_in": 0.0, "envelope": None, "window": 1.0, "stream": 0}
ANALYSIS_DEFAULTS = {
    "s_grid": [0.0, 0.5, 1.0, 2.0, 4.0],
    "thetas": [0.05, 0.1],
    "grid_step": 0.02,
    "grid_len": 2000,
    "t_grid": [1.0, 2.0, 5.0, 10.0],
    "forest_replicas": 10000,
    "overlap_f": None,
    "K": None,
    "budget": 100,
    "mgf_step": 0.01,
    "mgf_len": 4000,
    "sample_step": 1.0,
}
OUTPUT_DEFAULTS = {"dir": ".", "prefix": ""}
SAMPLERS = ("thinning", "cluster")


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def canonical_json(d) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)


def apply_env_overrides(raw: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    raw = copy.deepcopy(raw)
    for name, (key, typ) in ENV_OVERRIDES.items():
        v = environ.get(ENV_PREFIX + name)
        if v is not None:
            try:
                raw.setdefault("run", {})[key] = typ(v)
            except ValueError as exc:
                raise ConfigError(f"{ENV_PREFIX}{name}={v!r}: {exc}") from None
    return raw


@dataclass
class ExperimentConfig:
    doc: dict
    kernel: Kernel | None
    intensity: IntensityFn | None
    phi: Modulus
    initial: object
    multitype: MultiTypeModel | None
    run: dict
    analysis: dict
    output: dict
    hash: str = field(default="")

    def sim_config(self, **overrides) -> SimConfig:
        if self.kernel is None:
            raise ConfigError("this config has no single-type model")
        kw = dict(kernel=self.kernel, intensity=self.intensity, initial=self.initial,
                  horizon=self.run["horizon"], max_events=self.run["max_events"],
                  envelope=self.run["envelope"], window=self.run["window"])
        kw.update(overrides)
        return SimConfig(**kw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, indent=2) + "\n"

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.hash == other.hash and self.doc == other.doc


def _model(m: dict):
    _check_keys(m, MODEL_KEYS, "model")
    doc = {}
    mt = None
    kernel = intensity = None
    if "multitype" in m:
        mt, doc["multitype"] = _multitype(m["multitype"])
    if "kernel" in m or "lambda" in m:
        try:
            kernel = Kernel.from_dict(m["kernel"])
        except KeyError:
            raise ConfigError("model.kernel is required") from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"model.kernel: {exc}") from None
        mods = {}
        if "modulators" in m:
            _check_keys(m["modulators"], {"p", "q"}, "model.modulators")
            try:
                mods = {k: Modulator.from_dict(v) for k, v in m["modulators"].items()}
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"model.modulators: {exc}") from None
            doc["modulators"] = {k: v.to_dict() for k, v in mods.items()}
        try:
            intensity = IntensityFn.from_dict(m["lambda"], mods)
        except KeyError as exc:
            raise ConfigError(f"model.lambda: missing {exc}") from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"model.lambda: {exc}") from None
        doc["kernel"] = kernel.to_dict()
        doc["lambda"] = intensity.to_dict()
    elif mt is None:
        raise ConfigError("model needs kernel + lambda or a multitype block")
    try:
        phi = Modulus.from_dict(m.get("phi", {"family": "identity", "params": {"L": 1.0}}))
        initial = initial_from_dict(m.get("initial", {"family": "zero"}))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from None
    checks = phi.validate()
    if not checks["valid"]:
        raise ConfigError(f"model.phi is not a valid modulus: {checks}")
    doc["phi"] = phi.to_dict()
    doc["initial"] = initial.to_dict()
    return doc, kernel, intensity, phi, initial, mt


def _multitype(d: dict):
    _check_keys(d, MULTITYPE_KEYS, "model.multitype")
    try:
        n = int(d["d"])
        kernels = [[Kernel.from_dict(k) for k in row] for row in d["kernels"]]
        lams = []
        for lam in d["lambdas"]:
            _check_keys(lam, {"c", "k"}, "model.multitype.lambdas[]")
            lams.append(TypedIntensity(lam["c"], lam["k"]))
        init = None
        if "init" in d:
            init = [[initial_from_dict(g) for g in row] for row in d["init"]]
        model = MultiTypeModel(kernels, lams, init, bool(d.get("normalized", False)))
    except KeyError as exc:
        raise ConfigError(f"model.multitype: missing {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model.multitype: {exc}") from None
    if model.d != n:
        raise ConfigError(f"model.multitype: d={n} but {model.d} lambdas given")
    doc = {"d": n, "kernels": [[k.to_dict() for k in row] for row in kernels],
           "lambdas": [{"c": lam.c, "k": lam.k.tolist()} for lam in lams],
           "init": [[g.to_dict() for g in row] for row in model.initial],
           "normalized": model.normalized}
    return model, doc


def _block(raw, defaults, where):
    raw = raw or {}
    _check_keys(raw, defaults, where)
    out = dict(defaults)
    out.update(raw)
    return out


def from_dict(raw: dict, *, environ=None) -> ExperimentConfig:
    _check_keys(raw, TOP_KEYS, "config")
    raw = apply_env_overrides(raw, environ)
    if "model" not in raw:
        raise ConfigError("config: missing model block")
    mdoc, kernel, intensity, phi, initial, mt = _model(raw["model"])
    run = _block(raw.get("run"), RUN_DEFAULTS, "run")
    if run["seed"] is None:
        raise ConfigError("run.seed is required (no wall-clock seeding)")
    if run["horizon"] is None or not float(run["horizon"]) > 0:
        raise ConfigError("run.horizon must be a positive number")
    run["seed"] = int(run["seed"])
    run["horizon"] = float(run["horizon"])
    for key in ("replicas", "threads", "max_events", "stream"):
        run[key] = int(run[key])
        if run[key] < (0 if key == "stream" else 1):
            raise ConfigError(f"run.{key} must be positive")
    run["burn_in"] = float(run["burn_in"])
    run["window"] = float(run["window"])
    if run["sampler"] not in SAMPLERS:
        raise ConfigError(f"run.sampler must be one of {SAMPLERS}")
    if run["sampler"] == "cluster":
        if intensity is None or intensity.family != "linear" or intensity.has_modulators:
            raise ConfigError("run.sampler=cluster needs an unmodulated linear lambda")
        mu = intensity.params["B"] * kernel.mass
        if mu >= 1:
            raise ConfigError(f"run.sampler=cluster refused: B*|h|_1 = {mu:g} >= 1 is not subcritical")
    analysis = _block(raw.get("analysis"), ANALYSIS_DEFAULTS, "analysis")
    if analysis["overlap_f"] is not None:
        try:
            analysis["overlap_f"] = initial_from_dict(analysis["overlap_f"]).to_dict()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"analysis.overlap_f: {exc}") from None
    output = _block(raw.get("output"), OUTPUT_DEFAULTS, "output")
    doc = {"model": mdoc, "run": run, "analysis": analysis, "output": output}
    try:
        canon = canonical_json(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config is not serialisable: {exc}") from None
    h = hashlib.sha256(canon.encode()).hexdigest()
    return ExperimentConfig(doc, kernel, intensity, phi, initial, mt, run, analysis, output, h)


def load_config(path, *, environ=None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw, environ=environ)


def atomic_write(path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
