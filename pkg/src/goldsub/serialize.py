"""Deterministic JSON encoding for certificates, traces, and manifests.

One schema per document kind, field names frozen here.  Reals are emitted
with Python's shortest round-trip repr, keys are sorted, and NaN/inf are
rejected, so equal in-memory objects serialize to identical bytes.  Wall
time never enters a trace document: replaying the same manifest must give a
byte-identical file.  The run manifest has an optional ``created`` stamp
that is only written to the standalone manifest file, never to the copies
embedded in traces and certificates.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .core import Branch, Vector, WeightedSubgradient
from .errors import UsageError
from .solver import GoldsteinCertificate, SolverConfig, SolveTrace

CERTIFICATE_SCHEMA = "goldsub.certificate/1"
TRACE_SCHEMA = "goldsub.trace/1"
MANIFEST_SCHEMA = "goldsub.manifest/1"
UNDEFINED = "undefined"


def to_jsonable(value):
    """Recursively convert numpy scalars/arrays so json can emit them."""
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def dumps(data) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def write_json(path: str, data) -> None:
    """Serialize atomically: no partially written documents on disk."""
    text = dumps(data)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str):
    with open(path) as handle:
        return json.load(handle)


def manifest_data(problem_name: str, problem_params: dict,
                  config: SolverConfig, version: str,
                  created: bool = False) -> dict:
    data = {
        "schema": MANIFEST_SCHEMA,
        "problem": {"name": problem_name, "params": dict(problem_params)},
        "config": dataclasses.asdict(config),
        "version": version,
        "seed": config.seed,
    }
    if created:
        data["created"] = datetime.now(timezone.utc).isoformat()
    return data


def _branch_data(branch: Branch) -> dict:
    data = {"kind": branch.kind}
    if branch.index is not None:
        data["index"] = branch.index
    return data


def _branch_from(data: dict) -> Branch:
    if data.get("kind") == "objective":
        return Branch("objective")
    return Branch.constraint(int(data["index"]))


def _vec(value) -> Vector:
    return np.asarray(value, dtype=float)


def certificate_data(cert: GoldsteinCertificate, manifest: dict | None = None) -> dict:
    return {
        "schema": CERTIFICATE_SCHEMA,
        "anchor": cert.anchor,
        "zeta": cert.zeta,
        "zeta_norm": cert.zeta_norm,
        "combination": [
            {
                "point": w.point,
                "vector": w.vector,
                "branch": _branch_data(w.branch),
                "weight": w.weight,
                "direction": w.direction,
            }
            for w in cert.combination
        ],
        "gamma0": cert.gamma0,
        "gamma": cert.gamma,
        "lambda": UNDEFINED if cert.lam is None else cert.lam,
        "eps_effective": cert.eps_effective,
        "fj_eta_bound": cert.fj_eta_bound,
        "delta": cert.delta,
        "lipschitz_m": cert.lipschitz_m,
        "f_anchor": cert.f_anchor,
        "g_anchor": cert.g_anchor,
        "per_constraint_g": cert.per_constraint_g,
        "kkt_eps": cert.kkt_eps,
        "kkt_eta": cert.kkt_eta,
        "kkt_lambda_bound": cert.kkt_lambda_bound,
        "gcq_sigma": cert.gcq_sigma,
        "slack_samples": cert.slack_samples,
        "slack_max": cert.slack_max,
        "slack_bound": cert.slack_bound,
        "warnings": list(cert.warnings),
        "manifest": manifest,
    }


def certificate_from_data(data: dict) -> tuple[GoldsteinCertificate, dict | None]:
    if data.get("schema") != CERTIFICATE_SCHEMA:
        raise UsageError("not a certificate document (schema %r)"
                         % data.get("schema"))
    lam = data["lambda"]
    combination = [
        WeightedSubgradient(
            point=_vec(entry["point"]),
            vector=_vec(entry["vector"]),
            branch=_branch_from(entry["branch"]),
            weight=float(entry["weight"]),
            direction=None if entry.get("direction") is None
            else _vec(entry["direction"]),
        )
        for entry in data["combination"]
    ]
    cert = GoldsteinCertificate(
        anchor=_vec(data["anchor"]),
        zeta=_vec(data["zeta"]),
        zeta_norm=float(data["zeta_norm"]),
        combination=combination,
        gamma0=float(data["gamma0"]),
        gamma=float(data["gamma"]),
        lam=None if lam == UNDEFINED else float(lam),
        eps_effective=float(data["eps_effective"]),
        fj_eta_bound=float(data["fj_eta_bound"]),
        delta=float(data["delta"]),
        lipschitz_m=float(data["lipschitz_m"]),
        f_anchor=float(data["f_anchor"]),
        g_anchor=float(data["g_anchor"]),
        per_constraint_g=[float(v) for v in data["per_constraint_g"]],
        kkt_eps=None if data["kkt_eps"] is None else float(data["kkt_eps"]),
        kkt_eta=None if data["kkt_eta"] is None else float(data["kkt_eta"]),
        kkt_lambda_bound=None if data["kkt_lambda_bound"] is None
        else float(data["kkt_lambda_bound"]),
        gcq_sigma=None if data["gcq_sigma"] is None else float(data["gcq_sigma"]),
        slack_samples=int(data["slack_samples"]),
        slack_max=float(data["slack_max"]),
        slack_bound=float(data["slack_bound"]),
        warnings=[str(w) for w in data.get("warnings", [])],
    )
    return cert, data.get("manifest")


def trace_data(trace: SolveTrace, manifest: dict | None = None) -> dict:
    # wall_time_s deliberately left out: byte-identical replays
    return {
        "schema": TRACE_SCHEMA,
        "records": trace.records,
        "totals": {
            "outer_steps": trace.outer_steps,
            "oracle_calls": trace.oracle_calls,
            "value_calls": trace.value_calls,
        },
        "eps_effective": trace.eps_effective,
        "delta": trace.delta,
        "inner": trace.inner,
        "descent_fraction": trace.descent_fraction,
        "lemma_bound": trace.lemma_bound,
        "tau_prime": trace.tau_prime,
        "call_cap": trace.call_cap,
        "manifest": manifest,
    }


def trace_from_data(data: dict) -> tuple[SolveTrace, dict | None]:
    if data.get("schema") != TRACE_SCHEMA:
        raise UsageError("not a trace document (schema %r)" % data.get("schema"))
    trace = SolveTrace(
        records=list(data["records"]),
        outer_steps=int(data["totals"]["outer_steps"]),
        oracle_calls=int(data["totals"]["oracle_calls"]),
        value_calls=int(data["totals"]["value_calls"]),
        eps_effective=float(data["eps_effective"]),
        delta=float(data["delta"]),
        inner=str(data["inner"]),
        descent_fraction=float(data["descent_fraction"]),
        lemma_bound=None if data["lemma_bound"] is None else int(data["lemma_bound"]),
        tau_prime=None if data["tau_prime"] is None else float(data["tau_prime"]),
        call_cap=int(data["call_cap"]),
        wall_time_s=0.0,
    )
    return trace, data.get("manifest")


def config_from_data(data: dict) -> SolverConfig:
    """Build a SolverConfig from a parsed config mapping; unknown keys fail."""
    known = {f.name for f in dataclasses.fields(SolverConfig)}
    extra = set(data) - known
    if extra:
        raise UsageError("unknown config keys: %s" % ", ".join(sorted(extra)))
    try:
        return SolverConfig(**data)
    except TypeError as exc:
        raise UsageError("bad config: %s" % exc) from None
