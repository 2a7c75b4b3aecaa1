"""Deterministic file formats for records, FRFs, models, and manifests.

All JSON is emitted through one canonical writer: keys sorted, no
locale-dependent formatting, floats printed with 17 significant digits so
every double round-trips exactly. Identical objects therefore always
produce byte-identical files, which is what makes pipeline replay
verifiable by hashing.
"""

import hashlib
import json
import os

import numpy as np

from .dataset import ConcatenatedRecord, DataRecord
from .exceptions import DataFormatError
from .frf import FrfEstimate
from .linear import LinearStateSpace
from .model import PnlssModel
from .basis import MonomialBasis
from .optimize import FrequencyWeighting


def format_float(v):
    """Decimal text of a double with 17 significant digits."""
    v = float(v)
    if not np.isfinite(v):
        raise DataFormatError("cannot serialize a non-finite number")
    return format(v, ".17g")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, 17-digit floats."""
    out = []
    _write_json(obj, out)
    return "".join(out)


def _write_json(obj, out):
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise DataFormatError("JSON object keys must be strings")
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _write_json(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write_json(item, out)
        out.append("]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, np.ndarray):
        _write_json(obj.tolist(), out)
    else:
        raise DataFormatError(f"cannot serialize {type(obj).__name__}")


def config_hash(config):
    """sha256 hex digest of the canonical JSON of a configuration dict."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_json_file(path, obj):
    text = canonical_json(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def read_json_file(path, kind=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if kind is not None:
        found = obj.get("kind") if isinstance(obj, dict) else None
        if found != kind:
            raise DataFormatError(f"{path}: expected kind={kind!r}, found {found!r}")
    return obj


def _csv_rows(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise DataFormatError(f"{path}: empty CSV")
        names = header.split(",")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataFormatError(f"{path}: malformed CSV ({exc})") from exc
    if data.size == 0:
        data = data.reshape(0, len(names))
    if data.shape[1] != len(names):
        raise DataFormatError(f"{path}: row width does not match header")
    return names, data


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header))
        fh.write("\n")
        for row in rows:
            fh.write(",".join(row))
            fh.write("\n")


# ---------------------------------------------------------------- records

def save_record(directory, rec):
    """DataRecord or ConcatenatedRecord as record.csv + record.json."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "record.csv")
    json_path = os.path.join(directory, "record.json")
    if isinstance(rec, DataRecord):
        R, P, N, m = rec.u.shape
        p = rec.n_outputs
        header = (
            ["realization", "period", "sample"]
            + [f"u_{i+1}" for i in range(m)]
            + [f"y_{i+1}" for i in range(p)]
        )

        def rows():
            for r in range(R):
                for q in range(P):
                    for s in range(N):
                        yield (
                            [str(r), str(q), str(s)]
                            + [format_float(v) for v in rec.u[r, q, s]]
                            + [format_float(v) for v in rec.y[r, q, s]]
                        )

        _write_csv(csv_path, header, rows())
        write_json_file(
            json_path,
            {
                "kind": "data-record",
                "fs": rec.fs,
                "N": N,
                "R": R,
                "P": P,
                "excited_lines": rec.excited_lines,
                "periodic": rec.periodic,
            },
        )
    elif isinstance(rec, ConcatenatedRecord):
        m, p = rec.n_inputs, rec.n_outputs
        header = (
            ["sample"]
            + [f"u_{i+1}" for i in range(m)]
            + [f"y_{i+1}" for i in range(p)]
        )

        def rows():
            for s in range(rec.n_samples):
                yield (
                    [str(s)]
                    + [format_float(v) for v in rec.u[s]]
                    + [format_float(v) for v in rec.y[s]]
                )

        _write_csv(csv_path, header, rows())
        write_json_file(
            json_path,
            {
                "kind": "concatenated-record",
                "fs": rec.fs,
                "segment_starts": rec.segment_starts,
                "t1_prepend": int(rec.t1[0]),
                "t1_starts": np.asarray(rec.t1[1], dtype=int),
                "t2": rec.t2,
                "excited_lines": rec.excited_lines,
                "period_length": rec.period_length,
            },
        )
    else:
        raise DataFormatError(f"cannot save {type(rec).__name__} as a record")


def load_record(directory):
    """Read back whatever save_record wrote in `directory`."""
    json_path = os.path.join(directory, "record.json")
    csv_path = os.path.join(directory, "record.csv")
    meta = read_json_file(json_path)
    kind = meta.get("kind")
    names, data = _csv_rows(csv_path)
    m = sum(1 for c in names if c.startswith("u_"))
    p = sum(1 for c in names if c.startswith("y_"))
    if kind == "data-record":
        R, P, N = int(meta["R"]), int(meta["P"]), int(meta["N"])
        if data.shape[0] != R * P * N:
            raise DataFormatError(f"{csv_path}: expected {R * P * N} rows")
        u = data[:, 3 : 3 + m].reshape(R, P, N, m)
        y = data[:, 3 + m : 3 + m + p].reshape(R, P, N, p)
        return DataRecord(
            u=u, y=y, fs=float(meta["fs"]),
            excited_lines=np.asarray(meta["excited_lines"], dtype=int),
            periodic=bool(meta["periodic"]),
        )
    if kind == "concatenated-record":
        u = data[:, 1 : 1 + m]
        y = data[:, 1 + m : 1 + m + p]
        return ConcatenatedRecord(
            u=u, y=y,
            segment_starts=np.asarray(meta["segment_starts"], dtype=int),
            t1=(int(meta["t1_prepend"]), np.asarray(meta["t1_starts"], dtype=int)),
            t2=int(meta["t2"]),
            fs=float(meta["fs"]),
            excited_lines=np.asarray(meta["excited_lines"], dtype=int),
            period_length=int(meta["period_length"]),
        )
    raise DataFormatError(f"{json_path}: unknown record kind {kind!r}")


# -------------------------------------------------------------------- FRF

def _complex_out(arr):
    arr = np.asarray(arr)
    return arr.real, arr.imag


def save_frf(path, frf):
    G_re, G_im = _complex_out(frf.G)
    ml_re, ml_im = _complex_out(frf.covGML)
    n_re, n_im = _complex_out(frf.covGn)
    write_json_file(
        path,
        {
            "kind": "frf",
            "lines": frf.lines,
            "n_samples": frf.n_samples,
            "fs": frf.fs,
            "dof": [int(frf.dof[0]), int(frf.dof[1])],
            "G_re": G_re, "G_im": G_im,
            "covGML_re": ml_re, "covGML_im": ml_im,
            "covGn_re": n_re, "covGn_im": n_im,
            "excluded_lines": np.asarray(
                frf.meta.get("excluded_lines", np.array([], dtype=int)), dtype=int
            ),
        },
    )


def load_frf(path):
    obj = read_json_file(path, kind="frf")
    G = np.asarray(obj["G_re"], dtype=float) + 1j * np.asarray(obj["G_im"], dtype=float)
    covGML = np.asarray(obj["covGML_re"], dtype=float) + 1j * np.asarray(
        obj["covGML_im"], dtype=float
    )
    covGn = np.asarray(obj["covGn_re"], dtype=float) + 1j * np.asarray(
        obj["covGn_im"], dtype=float
    )
    return FrfEstimate(
        lines=np.asarray(obj["lines"], dtype=int),
        G=G, covGML=covGML, covGn=covGn,
        dof=(int(obj["dof"][0]), int(obj["dof"][1])),
        n_samples=int(obj["n_samples"]),
        fs=float(obj["fs"]),
        meta={"excluded_lines": np.asarray(obj["excluded_lines"], dtype=int)},
    )


# ------------------------------------------------------------------ models

def _linear_dict(model, fit_cost=None):
    d = {
        "n": model.n, "m": model.m, "p": model.p, "fs": model.fs,
        "A": model.A, "B": model.B, "C": model.C, "D": model.D,
        "stable": bool(model.stable),
    }
    if fit_cost is not None:
        d["fit_cost"] = float(fit_cost)
    return d


def _linear_from_dict(d):
    return LinearStateSpace(
        A=np.asarray(d["A"], dtype=float),
        B=np.asarray(d["B"], dtype=float),
        C=np.asarray(d["C"], dtype=float),
        D=np.asarray(d["D"], dtype=float),
        fs=float(d["fs"]),
    )


def save_linear_models(path, results):
    """Map of order -> OrderFit (or (model, cost) pairs) as one JSON file."""
    orders = {}
    for n, fit in results.items():
        if getattr(fit, "error", None):
            orders[str(int(n))] = {"error": fit.error}
        else:
            model = fit.model if hasattr(fit, "model") else fit[0]
            cost = fit.cost if hasattr(fit, "cost") else fit[1]
            entry = _linear_dict(model, fit_cost=cost)
            entry["ambiguous_order"] = bool(model.meta.get("ambiguous_order", False))
            orders[str(int(n))] = entry
    write_json_file(path, {"kind": "linear-models", "orders": orders})


def load_linear_models(path):
    """Order -> (model or None, fit_cost, error) from save_linear_models."""
    obj = read_json_file(path, kind="linear-models")
    out = {}
    for key, entry in obj["orders"].items():
        if "error" in entry:
            out[int(key)] = (None, np.inf, entry["error"])
        else:
            out[int(key)] = (_linear_from_dict(entry), float(entry["fit_cost"]), None)
    return out


def save_model(path, model):
    """PnlssModel as self-describing JSON (exponent vectors included)."""
    write_json_file(
        path,
        {
            "kind": "pnlss-model",
            "n": model.n, "m": model.m, "p": model.p, "fs": model.fs,
            "A": model.linear.A, "B": model.linear.B,
            "C": model.linear.C, "D": model.linear.D,
            "E": model.E, "F": model.F,
            "state_exponents": model.basis_state.exponents.astype(int),
            "output_exponents": model.basis_output.exponents.astype(int),
            "active_state": model.active_state,
            "active_output": model.active_output,
            "x0": model.x0,
        },
    )


def load_model(path):
    obj = read_json_file(path, kind="pnlss-model")
    n, m = int(obj["n"]), int(obj["m"])
    lin = _linear_from_dict(obj)

    def basis_from(exps):
        exps = np.asarray(exps, dtype=int)
        if exps.size == 0:
            exps = exps.reshape(0, n + m)
        degrees = tuple(sorted(set(int(e.sum()) for e in exps)))
        return MonomialBasis(n_states=n, n_inputs=m, degrees=degrees, exponents=exps)

    return PnlssModel(
        linear=lin,
        E=np.asarray(obj["E"], dtype=float),
        F=np.asarray(obj["F"], dtype=float),
        basis_state=basis_from(obj["state_exponents"]),
        basis_output=basis_from(obj["output_exponents"]),
        active_state=np.asarray(obj["active_state"], dtype=bool),
        active_output=np.asarray(obj["active_output"], dtype=bool),
        x0=np.asarray(obj["x0"], dtype=float),
    )


# --------------------------------------------------------------- weighting

def save_weighting(path, weighting):
    w_re, w_im = _complex_out(weighting.inverse_covariance)
    write_json_file(
        path,
        {
            "kind": "frequency-weighting",
            "lines": weighting.lines,
            "period_length": weighting.period_length,
            "inverse_covariance_re": w_re,
            "inverse_covariance_im": w_im,
        },
    )


def load_weighting(path):
    obj = read_json_file(path, kind="frequency-weighting")
    W = np.asarray(obj["inverse_covariance_re"], dtype=float) + 1j * np.asarray(
        obj["inverse_covariance_im"], dtype=float
    )
    return FrequencyWeighting(
        lines=np.asarray(obj["lines"], dtype=int),
        inverse_covariance=W,
        period_length=int(obj["period_length"]),
    )


# ---------------------------------------------------------------- manifest

def save_manifest(path, steps, tool_version):
    write_json_file(
        path, {"kind": "manifest", "tool_version": tool_version, "steps": steps}
    )


def load_manifest(path):
    obj = read_json_file(path, kind="manifest")
    return obj["steps"], obj["tool_version"]
