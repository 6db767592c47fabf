"""Run configured experiments and write their data series and manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from . import __version__
from .config import ExperimentConfig, apply_override, parse_config_dict, serialize_config
from .dynamics import (
    classify_mode_baths,
    drift_and_diffusion,
    propagate_cm,
    thermal_bath_noise,
)
from .effective import (
    build_effective_model,
    match_resonant_modes,
    occupation_closed_form,
    propagate_effective,
    transfer_function_F,
)
from .errors import ConfigError, InvalidArgumentError
from .networks import SystemSpec, assemble_system_hessian, network_williamson
from .observables import (
    build_initial_cm,
    gaussian_fidelity,
    occupation_number,
    reduce_to_oscillator,
    rotate_reduced,
)
from .symplectic import group_degenerate_modes, symplectic_form

__all__ = ["RunResult", "run_experiment", "emit_series", "run_sweep", "TOLERANCES"]

logger = logging.getLogger(__name__)

COLUMN_ORDER = (
    "t_omega",
    "n_exact_a",
    "n_exact_b",
    "n_eff_a",
    "n_closed_a",
    "n_closed_network_a",
    "n_naive_a",
    "one_minus_fidelity",
    "tau",
    "F",
)

TOLERANCES = {
    "symmetry": 1e-12,
    "positive_definite": 1e-12,
    "degeneracy_relative": 1e-9,
    "symplectic": 1e-10,
    "closed_form_crosscheck": 1e-9,
    "hurwitz_relative": 1e-12,
    "bath_locality": 1e-10,
    "fidelity_sqrt_floor": 1e-12,
    "csv_significant_digits": 15,
}


@dataclass
class RunResult:
    """In-memory outcome of a run: named columns, auxiliary documents and manifest data."""

    columns: Dict[str, np.ndarray]
    extras: Dict[str, Any] = field(default_factory=dict)
    manifest: Dict[str, Any] = field(default_factory=dict)

    def column_names(self) -> List[str]:
        return [c for c in COLUMN_ORDER if c in self.columns]


def _resonant_group(config: ExperimentConfig, W) -> Tuple[int, ...]:
    run = config.run
    grouping = group_degenerate_modes(W.spectrum)
    if run.resonant_mode is not None:
        return grouping.group_of(run.resonant_mode)
    tol = run.resonance_tol
    return match_resonant_modes(W, run.resonant_frequency, tol)


def _occupations(states, label):
    return np.array([occupation_number(reduce_to_oscillator(s, label)) for s in states])


def _closed_form_columns(config, spec, W, model, times):
    if len(model.mode_set) != 1:
        raise ConfigError("closed-form occupation needs a non-degenerate resonant mode", "run.outputs")
    if config.baths is not None and config.baths.zeta > 0:
        raise ConfigError("closed-form occupation is only available for closed systems", "run.outputs")
    if np.abs(model.C_qp).max() > 0:
        raise ConfigError("closed-form occupation needs real mode couplings (no position-momentum cross terms)", "run.outputs")
    if sum(1 for a in spec.attachments if a.external_id == "a") > 1 or sum(1 for a in spec.attachments if a.external_id == "b") > 1:
        raise ConfigError("closed-form occupation supports one attachment per oscillator", "run.outputs")
    eps = {a.epsilon for a in spec.attachments}
    if len(eps) != 1:
        raise ConfigError("closed-form occupation needs a common coupling strength", "run.outputs")
    eps = eps.pop()
    m = model.mode_set[0]
    N = W.n_modes
    J = symplectic_form(N)
    S_inv_T = -J @ W.S @ J
    weight = float((S_inv_T @ S_inv_T.T)[m - 1, m - 1])
    coeff = model.coefficients[0]
    n_b, n_net = config.initial.n_b, config.initial.n_network
    total = occupation_closed_form(n_b, n_net, coeff, eps, times, mode_weight=weight)
    network = occupation_closed_form(0.0, n_net, coeff, eps, times, mode_weight=weight)
    return total, network


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Execute every pipeline needed by the requested outputs.

    Args:
        config (ExperimentConfig): validated configuration

    Returns:
        RunResult: columns on the shared time grid plus auxiliary documents
    """
    start = time.perf_counter()
    outputs = set(config.run.outputs)
    net = config.system.network
    columns: Dict[str, np.ndarray] = {}
    extras: Dict[str, Any] = {}
    caught: List[str] = []
    with warnings.catch_warnings(record=True) as records:
        warnings.simplefilter("always")
        W = network_williamson(net)
        group = _resonant_group(config, W)
        Omega = config.system.Omega
        if Omega is None:
            Omega = float(np.mean(W.spectrum[[k - 1 for k in group]]))
        spec = SystemSpec(net, Omega, config.system.attachments, config.system.hbar)
        times = config.run.time_grid(net.omega)
        columns["t_omega"] = np.linspace(0.0, config.run.t_max, config.run.samples)
        zeta = config.baths.zeta if config.baths else 0.0
        n_th = config.baths.n_th if config.baths else 0.0

        exact = None
        if outputs & {"occupation_exact", "fidelity", "cm_dump"}:
            H = assemble_system_hessian(spec)
            noise = thermal_bath_noise(spec, zeta, n_th) if config.baths else None
            Gamma, D = drift_and_diffusion(H, noise)
            V0 = build_initial_cm(config.initial, net.N, "full", hbar=spec.hbar)
            exact = propagate_cm(Gamma, D, V0, times)
            if "occupation_exact" in outputs:
                columns["n_exact_a"] = _occupations(exact.states, "a")
                columns["n_exact_b"] = _occupations(exact.states, "b")

        model = eff = None
        if outputs & {"occupation_effective", "fidelity", "cm_dump", "rwa_report", "occupation_closed_form", "transfer_function"}:
            model = build_effective_model(spec, W, group, zeta, n_th)
        if outputs & {"occupation_effective", "fidelity", "cm_dump"}:
            V0e = build_initial_cm(config.initial, net.N, "effective", group, W.S, hbar=spec.hbar)
            eff = propagate_effective(model, V0e, times)
            if "occupation_effective" in outputs:
                columns["n_eff_a"] = _occupations(eff.states, "a")
            extras.setdefault("checks", {})["closed_form_discrepancy"] = eff.closed_form_discrepancy
            extras["checks"]["closed_form_exact"] = eff.closed_form_exact

        if "occupation_closed_form" in outputs:
            total, network = _closed_form_columns(config, spec, W, model, times)
            columns["n_closed_a"] = total
            columns["n_closed_network_a"] = network

        if "occupation_naive" in outputs:
            naive_modes = config.run.naive_modes
            naive = build_effective_model(spec, W, naive_modes, zeta, n_th)
            V0n = build_initial_cm(config.initial, net.N, "effective", naive_modes, W.S, hbar=spec.hbar)
            res = propagate_effective(naive, V0n, times)
            columns["n_naive_a"] = _occupations(res.states, "a")

        if "fidelity" in outputs:
            infid = []
            for s_ex, s_ef, t in zip(exact.states, eff.states, times):
                ra = reduce_to_oscillator(s_ex, "a")
                rb = rotate_reduced(reduce_to_oscillator(s_ef, "a"), Omega, t)
                infid.append(1.0 - gaussian_fidelity(ra, rb))
            columns["one_minus_fidelity"] = np.array(infid)

        if "transfer_function" in outputs:
            if len(group) != 1:
                raise ConfigError("transfer function needs a non-degenerate resonant mode", "run.outputs")
            c = model.coefficients[0]
            eps = max(a.epsilon for a in spec.attachments)
            tau = c.tau(eps, times)
            columns["tau"] = tau
            columns["F"] = transfer_function_F(c.chi, tau, c.s_alpha**2, c.s_beta**2)

        if "cm_dump" in outputs:
            extras["cm_dump.json"] = {
                "t_omega": columns["t_omega"].tolist(),
                "exact_a": [reduce_to_oscillator(s, "a").V2.tolist() for s in exact.states],
                "exact_b": [reduce_to_oscillator(s, "b").V2.tolist() for s in exact.states],
                "effective_labels": list(model.labels),
                "effective": [s.V.tolist() for s in eff.states],
                "exact_final": exact.states[-1].V.tolist(),
            }

        if "bath_classification" in outputs:
            n = spec.n_modes
            S0 = np.eye(2 * n)
            S0[2:n, 2:n] = W.S[: net.N, : net.N]
            S0[2:n, n + 2 :] = W.S[: net.N, net.N :]
            S0[n + 2 :, 2:n] = W.S[net.N :, : net.N]
            S0[n + 2 :, n + 2 :] = W.S[net.N :, net.N :]
            z, nt = (zeta, n_th) if config.baths and zeta > 0 else (1.0, 0.0)
            noise = thermal_bath_noise(spec, z, nt)
            labels = ["a", "b"] + [f"mode{k}" for k in range(1, net.N + 1)]
            extras["bath_classification.json"] = [
                dict(b.to_dict(), label=labels[b.mode - 1]) for b in classify_mode_baths(noise, S0)
            ]

        if "rwa_report" in outputs:
            extras["rwa_report.json"] = dict(model.validity.to_dict(), mode_set=list(model.mode_set), Omega=Omega)

    for rec in records:
        caught.append(f"{rec.category.__name__}: {rec.message}")
    manifest = {
        "engine": "oscbus",
        "engine_version": __version__,
        "config": serialize_config(config),
        "resonant_modes": list(group),
        "Omega": Omega,
        "spectrum": W.spectrum.tolist(),
        "tolerances": dict(TOLERANCES),
        "warnings": caught,
        "wall_time_s": time.perf_counter() - start,
    }
    if "checks" in extras:
        manifest["checks"] = extras.pop("checks")
    return RunResult(columns=columns, extras=extras, manifest=manifest)


def _csv_text(result: RunResult) -> str:
    names = result.column_names()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*(result.columns[n] for n in names)):
        writer.writerow([format(float(v), ".15g") for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False, allow_nan=True) + "\n"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def emit_series(result: RunResult, out_dir, fmt: str = "csv") -> List[Path]:
    """Write the series, auxiliary documents and ``manifest.json`` to ``out_dir``.

    Data files are deterministic; only ``manifest.json`` carries the wall time.
    """
    if fmt not in ("csv", "json"):
        raise InvalidArgumentError(f"format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stable_manifest = {k: v for k, v in result.manifest.items() if k != "wall_time_s"}
    files: Dict[str, bytes] = {}
    if fmt == "csv":
        files["series.csv"] = _csv_text(result).encode("utf-8")
    else:
        doc = {
            "columns": result.column_names(),
            "data": {n: [float(v) for v in result.columns[n]] for n in result.column_names()},
            "manifest": stable_manifest,
        }
        files["series.json"] = _json_text(doc).encode("utf-8")
    for name, obj in result.extras.items():
        files[name] = _json_text(obj).encode("utf-8")
    written = []
    for name, data in files.items():
        path = out / name
        path.write_bytes(data)
        written.append(path)
    manifest = dict(result.manifest)
    manifest["files"] = {name: {"sha256": _digest(data), "bytes": len(data)} for name, data in files.items()}
    path = out / "manifest.json"
    path.write_bytes(_json_text(manifest).encode("utf-8"))
    written.append(path)
    return written


def _thread_cap() -> int:
    raw = os.environ.get("OSCBUS_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"OSCBUS_THREADS must be an integer, got {raw!r}")
        if value < 1:
            raise ConfigError("OSCBUS_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def _point_dir_name(key: str, value: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in value)
    return f"{key}={safe}"


def _sweep_point(job):
    document, key, value, target, fmt = job
    emit_series(run_experiment(parse_config_dict(apply_override(document, key, value))), target, fmt)
    return value, target


def run_sweep(document: Dict[str, Any], key: str, values: Sequence[str], out_dir, fmt: str = "csv") -> Dict[str, Path]:
    """Run one experiment per value of ``key``; each point writes to its own directory.

    Points run in separate worker processes (at most ``OSCBUS_THREADS``) so
    that warnings recorded for one point never leak into another's manifest.
    Every point is validated before any of them runs.
    """
    if not values:
        raise ConfigError("sweep needs at least one value", key)
    for v in values:
        parse_config_dict(apply_override(document, key, v))
    out = Path(out_dir)
    jobs = [(document, key, v, out / _point_dir_name(key, v), fmt) for v in values]
    workers = max(1, min(_thread_cap(), len(jobs)))
    if workers == 1:
        return dict(_sweep_point(job) for job in jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(_sweep_point, jobs))
