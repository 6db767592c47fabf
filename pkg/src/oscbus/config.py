"""Experiment configuration documents (TOML) and built-in figure presets.

Document layout::

    preset = "fig3"            # optional, expanded first; the document overrides it

    [system]
    network = "chain"          # chain | triangle | momentum_coupled | custom
    N = 10
    omega = 1.0
    kappa = 20.0
    kappa_prime = 0.0          # triangle only
    gamma = 0.0                # momentum_coupled only
    custom_hessian = [[...]]   # custom only, 2N x 2N
    Omega = 1.0                # optional, defaults to the resonant frequency
    hbar = 1.0
    attachments = [["a", 10, 0.03], ["b", 1, 0.03]]   # (oscillator, 1-based site, eps)

    [initial]                  # optional, vacuum when absent
    n_b = 1.0
    n_network = 0.0

    [baths]                    # optional, closed system when absent
    zeta = 0.01
    n_th = 1.0

    [run]
    resonant_mode = 1          # or resonant_frequency = 1.0 (+ resonance_tol)
    t_max = 2000.0             # in units of 1/omega
    samples = 2001
    outputs = ["occupation_exact", "occupation_effective"]
    naive_modes = []           # extra single-group reduction for contrast
    allow_large_n = false
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib
import tomli_w

from .errors import ConfigError, OscbusError
from .networks import Attachment, NetworkSpec
from .observables import InitialStateSpec

__all__ = [
    "OUTPUT_KINDS",
    "PRESETS",
    "SystemConfig",
    "BathConfig",
    "RunConfig",
    "ExperimentConfig",
    "parse_config",
    "parse_config_dict",
    "serialize_config",
    "preset_document",
    "apply_override",
]

OUTPUT_KINDS = (
    "occupation_exact",
    "occupation_effective",
    "occupation_closed_form",
    "occupation_naive",
    "fidelity",
    "transfer_function",
    "cm_dump",
    "bath_classification",
    "rwa_report",
)

MAX_EXACT_N = 200

_SCHEMA = {
    "system": {
        "network": str,
        "N": int,
        "omega": float,
        "kappa": float,
        "kappa_prime": float,
        "gamma": float,
        "custom_hessian": list,
        "Omega": float,
        "hbar": float,
        "attachments": list,
    },
    "initial": {"n_b": float, "n_network": float},
    "baths": {"zeta": float, "n_th": float},
    "run": {
        "resonant_mode": int,
        "resonant_frequency": float,
        "resonance_tol": float,
        "t_max": float,
        "samples": int,
        "outputs": list,
        "naive_modes": list,
        "allow_large_n": bool,
    },
}
_REQUIRED = {
    "system": ("network", "attachments"),
    "run": ("t_max", "samples", "outputs"),
}

_FIG3 = {
    "system": {
        "network": "chain",
        "N": 10,
        "omega": 1.0,
        "kappa": 20.0,
        "Omega": 1.0,
        "hbar": 1.0,
        "attachments": [["a", 10, 0.03], ["b", 1, 0.03]],
    },
    "initial": {"n_b": 1.0, "n_network": 0.0},
    "run": {
        "resonant_mode": 1,
        "t_max": 2000.0,
        "samples": 2001,
        "outputs": ["occupation_exact", "occupation_effective"],
    },
}


def _variant(base, **sections):
    doc = copy.deepcopy(base)
    for section, values in sections.items():
        if values is None:
            doc.pop(section, None)
        else:
            doc.setdefault(section, {}).update(values)
    return doc


PRESETS: Dict[str, Dict[str, Any]] = {
    "fig3": _FIG3,
    "fig4": _variant(_FIG3, initial={"n_b": 0.0}, run={"outputs": ["occupation_exact"]}),
    "fig5": _variant(
        {k: ({kk: vv for kk, vv in v.items() if kk != "Omega"} if k == "system" else v) for k, v in _FIG3.items()},
        run={"resonant_mode": 2, "outputs": ["transfer_function"]},
    ),
    "fig6": _variant(
        _FIG3,
        initial={"n_b": 0.0, "n_network": 1.0},
        run={"outputs": ["occupation_exact", "occupation_effective", "occupation_closed_form"]},
    ),
    "fig7": _variant(
        _FIG3,
        baths={"zeta": 0.01, "n_th": 1.0},
        run={"t_max": 1500.0, "samples": 1501},
    ),
    "fig8": _variant(_FIG3, run={"outputs": ["fidelity"]}),
    "fig10": {
        "system": {
            "network": "triangle",
            "N": 3,
            "omega": 1.0,
            "kappa": 1.0 / 3.0,
            "kappa_prime": 1.0 / 3.0,
            "hbar": 1.0,
            "attachments": [["a", 2, 1.0 / 600.0], ["b", 3, 1.0 / 600.0]],
        },
        "initial": {"n_b": 1.0, "n_network": 0.0},
        "run": {
            "resonant_mode": 2,
            "t_max": 10000.0,
            "samples": 10001,
            "outputs": ["occupation_exact", "occupation_effective", "occupation_naive"],
            "naive_modes": [3],
        },
    },
    "fig12": {
        "system": {
            "network": "momentum_coupled",
            "N": 3,
            "omega": 1.0,
            "kappa": 0.5,
            "gamma": 0.2,
            "hbar": 1.0,
            "attachments": [["a", 1, 0.001], ["b", 3, 0.001]],
        },
        "initial": {"n_b": 1.0, "n_network": 0.0},
        "run": {
            "resonant_mode": 1,
            "t_max": 20000.0,
            "samples": 20001,
            "outputs": ["occupation_exact", "occupation_effective"],
        },
    },
}


@dataclass(frozen=True, eq=False)
class SystemConfig:
    network: NetworkSpec
    attachments: Tuple[Attachment, ...]
    Omega: Optional[float] = None
    hbar: float = 1.0


@dataclass(frozen=True)
class BathConfig:
    zeta: float
    n_th: float


@dataclass(frozen=True)
class RunConfig:
    t_max: float
    samples: int
    outputs: Tuple[str, ...]
    resonant_mode: Optional[int] = None
    resonant_frequency: Optional[float] = None
    resonance_tol: Optional[float] = None
    naive_modes: Tuple[int, ...] = ()
    allow_large_n: bool = False

    def time_grid(self, omega: float) -> np.ndarray:
        """Sample times in physical units (the config uses ``omega t``)."""
        return np.linspace(0.0, self.t_max, self.samples) / omega


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    system: SystemConfig
    initial: InitialStateSpec
    run: RunConfig
    baths: Optional[BathConfig] = None
    preset: Optional[str] = None
    document: Dict[str, Any] = field(default_factory=dict)


def preset_document(name: str) -> Dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}", path="preset")
    return copy.deepcopy(PRESETS[name])


def _merge(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _coerce(value, kind, path):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        value = float(value)
        if not np.isfinite(value):
            raise ConfigError("value must be finite", path)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", path)
    return value


def _check_keys(doc: Dict[str, Any]) -> Dict[str, Any]:
    clean: Dict[str, Any] = {}
    for key, value in doc.items():
        if key == "preset":
            if not isinstance(value, str):
                raise ConfigError("preset must be a string", "preset")
            clean["preset"] = value
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown section; expected one of {', '.join(_SCHEMA)}", key)
        if not isinstance(value, dict):
            raise ConfigError("expected a section", key)
        section = {}
        for sub, v in value.items():
            path = f"{key}.{sub}"
            if sub not in _SCHEMA[key]:
                raise ConfigError(f"unknown key; expected one of {', '.join(_SCHEMA[key])}", path)
            section[sub] = _coerce(v, _SCHEMA[key][sub], path)
        clean[key] = section
    return clean


def _attachments(raw, path) -> Tuple[Attachment, ...]:
    out = []
    for i, item in enumerate(raw):
        p = f"{path}[{i}]"
        if not isinstance(item, list) or len(item) != 3:
            raise ConfigError("attachment must be [oscillator, site, epsilon]", p)
        x, site, eps = item
        if not isinstance(x, str):
            raise ConfigError("oscillator id must be 'a' or 'b'", p)
        site = _coerce(site, int, p + "[1]")
        eps = _coerce(eps, float, p + "[2]")
        try:
            out.append(Attachment(x, site, eps))
        except OscbusError as exc:
            raise ConfigError(str(exc), p) from exc
    if not out:
        raise ConfigError("at least one attachment is required", path)
    return tuple(out)


def parse_config_dict(doc: Dict[str, Any]) -> ExperimentConfig:
    """Validate a configuration mapping (already loaded from TOML)."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a table")
    doc = _check_keys(doc)
    preset = doc.get("preset")
    if preset is not None:
        doc = _merge(preset_document(preset), doc)
    missing = [
        f"{section}.{key}" if key else section
        for section, keys in _REQUIRED.items()
        for key in (keys or ("",))
        if section not in doc or (key and key not in doc[section])
    ]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    sysd = doc["system"]
    try:
        kind = sysd["network"]
        hess = sysd.get("custom_hessian")
        if hess is not None:
            hess = np.array(hess, dtype=float)
        network = NetworkSpec(
            kind=kind,
            N=sysd.get("N", 0),
            omega=sysd.get("omega", 1.0),
            kappa=sysd.get("kappa", 0.0),
            kappa_prime=sysd.get("kappa_prime", 0.0),
            gamma=sysd.get("gamma", 0.0),
            custom_hessian=hess,
        )
    except (OscbusError, ValueError) as exc:
        raise ConfigError(str(exc), "system") from exc
    attachments = _attachments(sysd["attachments"], "system.attachments")
    for i, att in enumerate(attachments):
        if att.site > network.N:
            raise ConfigError(f"site {att.site} outside the network sites 1..{network.N}", f"system.attachments[{i}]")
    Omega = sysd.get("Omega")
    if Omega is not None and Omega <= 0:
        raise ConfigError("must be positive", "system.Omega")
    hbar = sysd.get("hbar", 1.0)
    if hbar <= 0:
        raise ConfigError("must be positive", "system.hbar")
    try:
        initial = InitialStateSpec(**doc.get("initial", {}))
    except OscbusError as exc:
        raise ConfigError(str(exc), "initial") from exc
    baths = None
    if "baths" in doc:
        b = doc["baths"]
        if "zeta" not in b or "n_th" not in b:
            raise ConfigError("both zeta and n_th are required", "baths")
        if b["zeta"] < 0 or b["n_th"] < 0:
            raise ConfigError("zeta and n_th must be nonnegative", "baths")
        baths = BathConfig(b["zeta"], b["n_th"])
    r = doc["run"]
    if r["samples"] < 2:
        raise ConfigError("at least 2 samples are required", "run.samples")
    if r["t_max"] <= 0:
        raise ConfigError("must be positive", "run.t_max")
    outputs = []
    for i, o in enumerate(r["outputs"]):
        if o not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output {o!r}; expected one of {', '.join(OUTPUT_KINDS)}", f"run.outputs[{i}]")
        if o not in outputs:
            outputs.append(o)
    if not outputs:
        raise ConfigError("no outputs requested", "run.outputs")
    if "resonant_mode" in r and "resonant_frequency" in r:
        raise ConfigError("give either resonant_mode or resonant_frequency, not both", "run")
    if "resonant_mode" not in r and "resonant_frequency" not in r:
        raise ConfigError("resonant_mode or resonant_frequency is required", "run")
    if "resonant_mode" in r and not 1 <= r["resonant_mode"] <= network.N:
        raise ConfigError(f"mode outside 1..{network.N}", "run.resonant_mode")
    naive = []
    for i, m in enumerate(r.get("naive_modes", [])):
        m = _coerce(m, int, f"run.naive_modes[{i}]")
        if not 1 <= m <= network.N:
            raise ConfigError(f"mode outside 1..{network.N}", f"run.naive_modes[{i}]")
        naive.append(m)
    if "occupation_naive" in outputs and not naive:
        raise ConfigError("occupation_naive needs run.naive_modes", "run.naive_modes")
    if r.get("resonance_tol", 0.0) < 0:
        raise ConfigError("must be nonnegative", "run.resonance_tol")
    allow = r.get("allow_large_n", False)
    if network.N > MAX_EXACT_N and not allow and any(o in outputs for o in ("occupation_exact", "fidelity", "cm_dump")):
        raise ConfigError(
            f"exact model with N = {network.N} > {MAX_EXACT_N} sites refused; set run.allow_large_n = true to override",
            "system.N",
        )
    run = RunConfig(
        t_max=r["t_max"],
        samples=r["samples"],
        outputs=tuple(outputs),
        resonant_mode=r.get("resonant_mode"),
        resonant_frequency=r.get("resonant_frequency"),
        resonance_tol=r.get("resonance_tol"),
        naive_modes=tuple(naive),
        allow_large_n=allow,
    )
    return ExperimentConfig(
        system=SystemConfig(network=network, attachments=attachments, Omega=Omega, hbar=hbar),
        initial=initial,
        run=run,
        baths=baths,
        preset=preset,
        document=doc,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML configuration document.

    Raises:
        ConfigError: with the dotted key path of the offending entry
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed document: {exc}") from exc
    return parse_config_dict(doc)


def _canonical(doc: Dict[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if doc.get("preset") is not None:
        out["preset"] = doc["preset"]
    for section in _SCHEMA:
        if section in doc:
            out[section] = {k: doc[section][k] for k in sorted(doc[section])}
    return out


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical TOML text of the fully expanded configuration."""
    return tomli_w.dumps(_canonical(config.document))


def _parse_scalar(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(doc: Dict[str, Any], key: str, raw_value) -> Dict[str, Any]:
    """Return an expanded copy of ``doc`` with the dotted ``key`` set.

    Integer path components index into lists, e.g. ``system.attachments.1.1``
    is the site of the second attachment. String values are parsed as TOML
    scalars when possible.
    """
    value = _parse_scalar(raw_value) if isinstance(raw_value, str) else raw_value
    out = copy.deepcopy(doc)
    if isinstance(out.get("preset"), str):
        out = _merge(preset_document(out["preset"]), out)
    parts = key.split(".")
    if not all(parts):
        raise ConfigError("empty path component", key)
    node: Any = out
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        where = ".".join(parts[: i + 1])
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError) as exc:
                raise ConfigError("invalid list index", where) from exc
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[part] = value
            else:
                node = node.setdefault(part, {})
        else:
            raise ConfigError("cannot descend into a scalar", where)
    return out
