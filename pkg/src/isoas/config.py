"""Problem-file loading.

A problem file is JSON with the plant, the feedback (explicit K or LQR
weights), the input range, the output constraints and the tightening
parameter:

    {
      "A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]],
      "K": [[...]]            -- or --  "lqr": {"Q": [[...]], "R": [[...]]},
      "u_min": -1.0, "u_max": 1.0,
      "H": [[...]], "h": [...],
      "epsilon": 0.01,
      "tolerances": {"feas": ..., "red": ..., "geom": ...},   (optional)
      "caps": {"k_max": ..., "i_max": ..., "row_max": ...}    (optional)
    }

Schema checking is done by hand and collects every offending field
before raising, so a bad file is fixed in one round trip.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import SchemaError
from .model import OutputConstraints, Plant, SaturatedLoop
from .oracle import lqr_gain
from .propagation import Caps, Options


def _matrix(raw, field, problems, rows=None, cols=None):
    try:
        M = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{field}: not a numeric matrix")
        return None
    if M.ndim == 1:
        M = M.reshape(1, -1) if rows == 1 else M.reshape(-1, 1)
    if M.ndim != 2:
        problems.append(f"{field}: expected a matrix, got ndim {M.ndim}")
        return None
    if rows is not None and M.shape[0] != rows:
        problems.append(f"{field}: expected {rows} rows, got {M.shape[0]}")
        return None
    if cols is not None and M.shape[1] != cols:
        problems.append(f"{field}: expected {cols} columns, got {M.shape[1]}")
        return None
    if not np.all(np.isfinite(M)):
        problems.append(f"{field}: entries must be finite")
        return None
    return M


def _scalar(raw, field, problems):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        problems.append(f"{field}: expected a number, got {type(raw).__name__}")
        return None
    return float(raw)


def load_problem(path, overrides=None):
    """-> (Plant, SaturatedLoop, OutputConstraints, Options).

    `overrides` may carry tolerance/cap/toggle replacements from the
    command line; they win over the file.
    """
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise SchemaError([f"cannot read problem file: {e}"])
    except json.JSONDecodeError as e:
        raise SchemaError([f"not valid JSON: {e}"])
    if not isinstance(raw, dict):
        raise SchemaError(["top level must be an object"])
    problems = []
    for key in ("A", "B", "C", "D", "u_min", "u_max", "H", "h", "epsilon"):
        if key not in raw:
            problems.append(f"{key}: missing")
    if ("K" in raw) == ("lqr" in raw):
        problems.append("exactly one of K / lqr must be given")
    if problems:
        raise SchemaError(problems)

    A = _matrix(raw["A"], "A", problems)
    n = A.shape[0] if A is not None else None
    if A is not None and A.shape[0] != A.shape[1]:
        problems.append(f"A: must be square, got {A.shape}")
    B = _matrix(raw["B"], "B", problems, rows=n, cols=1)
    C = _matrix(raw["C"], "C", problems, cols=n)
    l = C.shape[0] if C is not None else None
    D = _matrix(raw["D"], "D", problems, rows=l, cols=1)
    u_min = _scalar(raw["u_min"], "u_min", problems)
    u_max = _scalar(raw["u_max"], "u_max", problems)
    if u_min is not None and u_max is not None and not u_min < 0.0 < u_max:
        problems.append(f"u_min/u_max: need u_min < 0 < u_max, "
                        f"got [{u_min}, {u_max}]")
    Hy = _matrix(raw["H"], "H", problems, cols=l)
    hy = None
    try:
        hy = np.asarray(raw["h"], dtype=float).reshape(-1)
        if Hy is not None and hy.shape[0] != Hy.shape[0]:
            problems.append(f"h: {hy.shape[0]} entries for {Hy.shape[0]} rows of H")
        if np.any(hy <= 0.0):
            problems.append("h: offsets must be strictly positive")
    except (TypeError, ValueError):
        problems.append("h: not a numeric vector")
    eps = _scalar(raw["epsilon"], "epsilon", problems)
    if eps is not None and not 0.0 < eps < 1.0:
        problems.append(f"epsilon: must be in (0, 1), got {eps}")

    K = None
    if "K" in raw:
        K = _matrix(raw["K"], "K", problems, rows=1, cols=n)
    else:
        lqr = raw["lqr"]
        if not isinstance(lqr, dict) or "Q" not in lqr or "R" not in lqr:
            problems.append("lqr: must be an object with Q and R")
        else:
            Q = _matrix(lqr["Q"], "lqr.Q", problems, rows=n, cols=n)
            Rw = _matrix(lqr["R"], "lqr.R", problems, rows=1, cols=1)
            if Q is not None and Rw is not None and problems == []:
                pass  # gain computed after the plant is built

    opts = _options(raw, problems, overrides or {})
    if problems:
        raise SchemaError(problems)

    plant = Plant(A=A, B=B, C=C, D=D)
    if K is None:
        K, _ = lqr_gain(plant, np.asarray(raw["lqr"]["Q"], dtype=float),
                        np.asarray(raw["lqr"]["R"], dtype=float))
    outc = OutputConstraints(H=Hy, h=hy)
    loop = SaturatedLoop.build(plant, K, u_min, u_max, eps, outc)
    return plant, loop, outc, opts


_TOL_KEYS = {"feas": "tol_feas", "red": "tol_red", "geom": "tol_geom"}
_CAP_KEYS = ("k_max", "i_max", "row_max")


def _options(raw, problems, overrides):
    kw = {}
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        problems.append("tolerances: must be an object")
        tols = {}
    for key, attr in _TOL_KEYS.items():
        if key in tols:
            v = _scalar(tols[key], f"tolerances.{key}", problems)
            if v is not None and v <= 0:
                problems.append(f"tolerances.{key}: must be positive")
            elif v is not None:
                kw[attr] = v
    caps_raw = raw.get("caps", {})
    if not isinstance(caps_raw, dict):
        problems.append("caps: must be an object")
        caps_raw = {}
    cap_kw = {}
    for key in _CAP_KEYS:
        if key in caps_raw:
            v = caps_raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                problems.append(f"caps.{key}: must be a positive integer")
            else:
                cap_kw[key] = v
    unknown = set(caps_raw) - set(_CAP_KEYS)
    unknown |= set(tols) - set(_TOL_KEYS)
    for k in sorted(unknown):
        problems.append(f"unknown tolerance/cap key: {k}")
    for attr in ("tol_feas", "tol_red", "tol_geom"):
        if attr in overrides and overrides[attr] is not None:
            kw[attr] = overrides[attr]
    for key in _CAP_KEYS:
        if key in overrides and overrides[key] is not None:
            cap_kw[key] = overrides[key]
    kw["caps"] = Caps(**cap_kw)
    for flag in ("empty_set_prevention", "erosion_prevention", "trace"):
        if flag in overrides and overrides[flag] is not None:
            kw[flag] = overrides[flag]
    return Options(**kw)
