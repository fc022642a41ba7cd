"""JSON / CSV serialization of matrices, beamformer pairs and reports.

Matrix JSON: ``{"rows": int, "cols": int, "entries": [[re, im], ...]}`` with
entries in column-major order.
"""

import csv
import json

import numpy as np

from .kron import BeamformerPair


class FormatError(ValueError):
    pass


def matrix_to_json(A):
    A = np.atleast_2d(np.asarray(A, dtype=np.complex128))
    flat = A.reshape(-1, order="F")
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]),
            "entries": [[float(v.real), float(v.imag)] for v in flat]}


def matrix_from_json(obj):
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        ent = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"not a matrix object: {exc}") from exc
    if rows < 1 or cols < 1 or ent.shape != (rows * cols, 2):
        raise FormatError(f"expected {rows * cols} [re, im] entries, got array of shape {ent.shape}")
    if not np.all(np.isfinite(ent)):
        raise FormatError("matrix entries must be finite")
    return (ent[:, 0] + 1j * ent[:, 1]).reshape((rows, cols), order="F")


def write_matrix(path, A):
    with open(path, "w") as fh:
        json.dump(matrix_to_json(A), fh)


def read_matrix(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return matrix_from_json(obj)


def matrix_to_csv(path, A):
    """One row per entry: ``row_idx, col_idx, re, im`` (column-major order)."""
    A = np.asarray(A)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_idx", "col_idx", "re", "im"])
        for j in range(A.shape[1]):
            for i in range(A.shape[0]):
                v = A[i, j]
                w.writerow([i, j, f"{v.real:.17g}", f"{v.imag:.17g}"])


def matrix_from_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FormatError("empty matrix CSV")
    r = np.array([int(x["row_idx"]) for x in rows])
    c = np.array([int(x["col_idx"]) for x in rows])
    A = np.zeros((r.max() + 1, c.max() + 1), dtype=np.complex128)
    A[r, c] = [float(x["re"]) + 1j * float(x["im"]) for x in rows]
    return A


def pair_to_json(pair):
    return {"U": matrix_to_json(pair.U), "V": matrix_to_json(pair.V),
            "sigma": float(pair.sigma), "approx_error": float(pair.approx_error)}


def pair_from_json(obj):
    try:
        return BeamformerPair(U=matrix_from_json(obj["U"]), V=matrix_from_json(obj["V"]),
                              sigma=float(obj["sigma"]), approx_error=float(obj["approx_error"]))
    except KeyError as exc:
        raise FormatError(f"beamformer pair missing {exc}") from exc


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def channel_to_json(ch):
    return {"gains": matrix_to_json(ch.gains[:, None]), "aoa": [float(a) for a in ch.aoa],
            "aod": [float(a) for a in ch.aod], "H": matrix_to_json(ch.H),
            "sparse_x": matrix_to_json(ch.sparse_x[:, None]), "on_grid": bool(ch.on_grid)}


def observation_to_json(obs):
    return {"y": matrix_to_json(obs.y[:, None]), "noise_sigma": obs.noise_sigma,
            "snr_db": obs.snr_db if np.isfinite(obs.snr_db) else None,
            "Phi_used": matrix_to_json(obs.Phi_used.matrix)}
