"""JSON encodings for matrices, states, witnesses and decompositions.

Complex numbers are stored as ``[re, im]`` pairs; Python's float repr makes
the round trip bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .decomp import PseudoMixture, Setting, SettingDecomposition
from .opalg import as_dims
from .states import BipartiteState
from .witness import Witness


class SchemaError(ValueError):
    pass


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex).ravel()
    return [[float(z.real), float(z.imag)] for z in a]


def _complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SchemaError("complex entries must be [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def ket_to_json(v: np.ndarray) -> list:
    return _pairs(v)


def ket_from_json(obj) -> np.ndarray:
    return _complex(obj)


def matrix_to_json(m: np.ndarray, dims=None) -> dict:
    m = np.asarray(m, dtype=complex)
    out = {"dim": int(m.shape[0])}
    if dims is not None:
        out["dims"] = [int(dims[0]), int(dims[1])]
    out["entries"] = _pairs(m)
    return out


def matrix_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, int] | None]:
    try:
        dim = int(obj["dim"])
        entries = _complex(obj["entries"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed matrix object: {exc}") from exc
    if entries.size != dim * dim:
        raise SchemaError(f"expected {dim * dim} entries, got {entries.size}")
    dims = obj.get("dims")
    if dims is not None:
        dims = as_dims(dims)
        if dims.total != dim:
            raise SchemaError(f"dims {list(dims)} do not multiply to dim {dim}")
    return entries.reshape(dim, dim), dims


def state_to_json(state: BipartiteState) -> dict:
    return matrix_to_json(state.rho, state.dims)


def state_from_json(obj: dict) -> BipartiteState:
    rho, dims = matrix_from_json(obj)
    if dims is None:
        raise SchemaError("state files require a 'dims' field")
    return BipartiteState(rho, dims)


def witness_to_json(w: Witness) -> dict:
    out = matrix_to_json(w.op, w.dims)
    out["kind"] = w.kind
    out["provenance"] = w.provenance
    return out


def witness_from_json(obj: dict) -> Witness:
    op, dims = matrix_from_json(obj)
    if dims is None:
        raise SchemaError("witness files require a 'dims' field")
    return Witness(op, dims, obj.get("kind", "npt_eigvec"), dict(obj.get("provenance", {})))


def pseudomixture_to_json(pm: PseudoMixture) -> dict:
    return {"dims": list(pm.dims),
            "terms": [{"c": c, "a": ket_to_json(a), "b": ket_to_json(b)} for c, a, b in pm.terms]}


def setting_decomposition_to_json(sd: SettingDecomposition) -> dict:
    return {"dims": list(sd.dims),
            "settings": [{"basis_a": [ket_to_json(k) for k in s.basis_a.T],
                          "basis_b": [ket_to_json(k) for k in s.basis_b.T],
                          "weights": s.weights.tolist()} for s in sd.settings]}


def decomposition_to_json(d) -> dict:
    if isinstance(d, PseudoMixture):
        return pseudomixture_to_json(d)
    return setting_decomposition_to_json(d)


def decomposition_from_json(obj: dict):
    try:
        dims = as_dims(obj["dims"])
        if "terms" in obj:
            return PseudoMixture([(float(t["c"]), ket_from_json(t["a"]), ket_from_json(t["b"]))
                                  for t in obj["terms"]], dims)
        if "settings" in obj:
            settings = [Setting(np.column_stack([ket_from_json(k) for k in s["basis_a"]]),
                                np.column_stack([ket_from_json(k) for k in s["basis_b"]]),
                                np.asarray(s["weights"], dtype=float))
                        for s in obj["settings"]]
            return SettingDecomposition(settings, dims)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed decomposition: {exc}") from exc
    raise SchemaError("decomposition needs either 'terms' or 'settings'")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
