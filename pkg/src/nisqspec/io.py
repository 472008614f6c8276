"""File formats for maps, spectra, SPAM models and tomography datasets.

Floats are written with ``repr`` so every artifact round-trips bit-exactly.
Complex matrices are nested lists of ``[re, im]`` pairs.

Dataset files: the first line is a JSON header
``{"n", "N_s", "gate_convention", "qubit_order", ...}``; the rest is a
``;``-separated table ``s;b;f_0;...;f_{d-1}`` with ``s`` like ``+x-z+y`` and
``b`` like ``xzy``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channels import KrausMap, Spectrum
from .errors import BadDataset
from .spam import PovmSet, SpamModel
from .tomography import GATE_CONVENTION, QUBIT_ORDER, TomographyDataset, decode_mode, encode_mode, PauliMode


def complex_to_list(a: np.ndarray):
    a = np.asarray(a, dtype=np.complex128)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def list_to_complex(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != 2:
        raise BadDataset("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj) + "\n")


def _load(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BadDataset(f"{path}: not valid JSON ({exc})") from exc


# -- maps and spectra ----------------------------------------------------------------


def kraus_to_json(m: KrausMap) -> dict:
    return {"d": m.d, "r": m.r, "kraus": complex_to_list(m.kraus)}


def kraus_from_json(obj: dict, check: bool = True) -> KrausMap:
    try:
        k = list_to_complex(obj["kraus"])
        d, r = int(obj["d"]), int(obj["r"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadDataset(f"malformed map: {exc}") from exc
    if k.shape != (r, d, d):
        raise BadDataset(f"kraus array has shape {k.shape}, header says ({r}, {d}, {d})")
    return KrausMap(k, check=check)


def save_map(m: KrausMap, path) -> None:
    _dump(kraus_to_json(m), path)


def load_map(path, check: bool = True) -> KrausMap:
    return kraus_from_json(_load(path), check=check)


def save_spectrum(spec: Spectrum, path) -> None:
    lines = ["re,im"] + [f"{z.real!r},{z.imag!r}" for z in spec.values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_spectrum(path) -> Spectrum:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "re,im":
        raise BadDataset(f"{path}: expected a 're,im' header")
    try:
        vals = [complex(float(a), float(b)) for a, b in (r.split(",") for r in rows[1:])]
    except ValueError as exc:
        raise BadDataset(f"{path}: {exc}") from exc
    return Spectrum(np.array(vals))


# -- SPAM ---------------------------------------------------------------------------


def spam_to_json(model: SpamModel) -> dict:
    out = {"d": model.d, "rho0": complex_to_list(model.rho0), "corruption": model.corruption.tolist()}
    if model.povm is not None:
        out["povm"] = complex_to_list(model.povm.elements)
    return out


def spam_from_json(obj: dict) -> SpamModel:
    try:
        rho = list_to_complex(obj["rho0"])
        c = np.asarray(obj["corruption"], dtype=np.float64)
        povm = PovmSet(list_to_complex(obj["povm"])) if obj.get("povm") is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise BadDataset(f"malformed SPAM model: {exc}") from exc
    return SpamModel(rho, c, povm)


def save_spam(model: SpamModel, path) -> None:
    _dump(spam_to_json(model), path)


def load_spam(path) -> SpamModel:
    return spam_from_json(_load(path))


# -- datasets ---------------------------------------------------------------------


def dataset_to_text(ds: TomographyDataset) -> str:
    header = {"n": ds.n, "N_s": ds.shots, "gate_convention": GATE_CONVENTION,
              "qubit_order": QUBIT_ORDER, "n_modes": len(ds)}
    if ds.meta:
        header["meta"] = ds.meta
    lines = [json.dumps(header), ";".join(["s", "b"] + [f"f_{j}" for j in range(ds.d)])]
    nb = 3 ** ds.n
    for p, b, f in zip(ds.prep_idx.tolist(), ds.basis_idx.tolist(), ds.freqs.tolist()):
        s_str, b_str = decode_mode(p * nb + b, ds.n).encode()
        lines.append(";".join([s_str, b_str] + [repr(x) for x in f]))
    return "\n".join(lines) + "\n"


def dataset_from_text(text: str) -> TomographyDataset:
    lines = text.strip("\n").split("\n")
    try:
        header = json.loads(lines[0])
        n, shots = int(header["n"]), int(header["N_s"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise BadDataset(f"bad dataset header: {exc}") from exc
    if header.get("gate_convention") != GATE_CONVENTION:
        raise BadDataset(f"unsupported gate convention {header.get('gate_convention')!r}")
    if header.get("qubit_order", QUBIT_ORDER) != QUBIT_ORDER:
        raise BadDataset(f"unsupported qubit order {header.get('qubit_order')!r}")
    d = 2 ** n
    prep, basis, freqs = [], [], []
    nb = 3 ** n
    for k, line in enumerate(lines[2:], start=3):
        parts = line.split(";")
        if len(parts) != d + 2:
            raise BadDataset(f"line {k}: expected {d + 2} fields, got {len(parts)}")
        try:
            mode = PauliMode.parse(parts[0], parts[1])
            if mode.n != n:
                raise ValueError("mode length does not match n")
            freqs.append([float(x) for x in parts[2:]])
        except ValueError as exc:
            raise BadDataset(f"line {k}: {exc}") from exc
        idx = encode_mode(mode)
        prep.append(idx // nb)
        basis.append(idx % nb)
    if "n_modes" in header and int(header["n_modes"]) != len(prep):
        raise BadDataset(f"header lists {header['n_modes']} modes, body has {len(prep)}")
    freqs_arr = np.array(freqs, dtype=np.float64).reshape(len(prep), d)
    return TomographyDataset(n, shots, np.array(prep, dtype=np.int64), np.array(basis, dtype=np.int64),
                             freqs_arr, header.get("meta", {}))


def save_dataset(ds: TomographyDataset, path) -> None:
    Path(path).write_text(dataset_to_text(ds))


def load_dataset(path) -> TomographyDataset:
    return dataset_from_text(Path(path).read_text())
