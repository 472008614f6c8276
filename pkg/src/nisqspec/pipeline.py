"""Config-driven end-to-end runs: truth -> data -> SPAM fit -> map fit -> spectral fit.

Configs are YAML. Every section has a fixed key set and unknown keys are
rejected. Each stage draws from its own seed, derived from the global seed and
the stage name, so editing one stage never shifts another stage's randomness.
"""
from __future__ import annotations

import copy
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import SCHEMA_VERSION, __version__
from . import channels as ch
from . import circuits, ensembles, io, retrieval, spam, spectral, tomography
from .errors import ConfigError, NisqSpecError

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "experiment": "experiment",
    "seed": 0,
    "output_dir": None,
    "truth": {"kind": "lindblad", "n": 3, "alpha": 1.0, "beta": 0.1, "rank": 1, "p": 0.5, "depth": 4},
    "spam": {"c1": 0.9, "c2": 0.8},
    "data": {"modes": 1784, "shots": 1024, "train_fraction": 0.9},
    "fit": {"spam_model": "corruption", "rank": "full", "lr": 0.01, "max_iters": 5000, "init_scale": 0.1},
    "spectral": {"m_samples": 5, "search": "refine", "metric": "sd"},
}
STAGES = ("truth", "data", "fit-spam", "fit-map", "kl-eval", "spectrum", "fit-du")


def stage_seed(global_seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([int(global_seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _merge(base: dict, over: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}{key} must be a mapping")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


@dataclass
class PipelineConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a mapping")
        cfg = _merge(DEFAULTS, obj, "")
        if cfg["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {cfg['schema_version']}")
        if cfg["truth"]["kind"] not in ("lindblad", "du", "circuit"):
            raise ConfigError(f"unknown truth kind {cfg['truth']['kind']!r}")
        if cfg["fit"]["spam_model"] not in ("corruption", "povm"):
            raise ConfigError("fit.spam_model must be corruption or povm")
        if not 0.0 < float(cfg["data"]["train_fraction"]) < 1.0:
            raise ConfigError("data.train_fraction must lie in (0, 1)")
        return cls(cfg)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            obj = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(obj or {})

    @property
    def name(self) -> str:
        return str(self.raw["experiment"])

    def seeds(self) -> dict:
        return {s: stage_seed(self.raw["seed"], s) for s in STAGES}


def bundled_config(name: str) -> Path:
    path = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not path.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_truth(t: dict, seed: int):
    n = int(t["n"])
    d = 2 ** n
    if t["kind"] == "lindblad":
        params = ensembles.LindbladParams(d, int(t["rank"]), float(t["alpha"]), float(t["beta"]), seed)
        return ensembles.lindblad_map(ensembles.random_lindbladian(params), params.beta)[1]
    if t["kind"] == "du":
        return ensembles.sample_diluted_unitary(ensembles.DUParams(d, float(t["p"]), int(t["rank"])), seed)
    spec = circuits.sample_angles(n, int(t["depth"]), seed)
    return ch.unitary_channel(circuits.build_unitary(spec))


def _report_json(report: retrieval.FitReport) -> dict:
    # wall time is excluded so reruns hash identically
    out = report.to_dict()
    out.pop("wall_time")
    return out


def run_pipeline(config: PipelineConfig, out_dir) -> tuple[int, dict]:
    """Run every stage in order; returns ``(exit_status, manifest)``.

    The manifest (``manifest.json`` in ``out_dir``) lists each artifact with
    its SHA-256. On failure it is still written, with the failing stage.
    """
    c = config.raw
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = config.seeds()
    manifest = {
        "experiment": config.name,
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "gate_convention": tomography.GATE_CONVENTION,
        "seeds": seeds,
        "config": c,
        "artifacts": [],
        "status": "running",
    }

    def record(stage, name, path):
        manifest["artifacts"].append({"stage": stage, "name": name, "path": Path(path).name,
                                      "sha256": sha256_file(path)})

    def write_json(stage, name, obj):
        path = out / f"{name}.json"
        path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
        record(stage, name, path)

    stage = STAGES[0]
    try:
        n = int(c["truth"]["n"])
        d = 2 ** n
        truth = make_truth(c["truth"], seeds["truth"])
        io.save_map(truth, out / "truth_map.json")
        record(stage, "truth_map", out / "truth_map.json")
        spam_truth = spam.synthetic_spam(d, float(c["spam"]["c1"]), float(c["spam"]["c2"]), seeds["truth"] + 1)
        io.save_spam(spam_truth, out / "truth_spam.json")
        record(stage, "truth_spam", out / "truth_spam.json")

        stage = "data"
        dcfg = c["data"]
        shots = int(dcfg["shots"])
        modes = tomography.sample_modes(n, int(dcfg["modes"]), seeds["data"])
        ds = tomography.simulate_frequencies(truth, spam_truth, modes, shots, seeds["data"] + 1)
        ds_spam = tomography.simulate_frequencies(ch.identity_map(d), spam_truth, tomography.spam_modes(n),
                                                  shots, seeds["data"] + 2)
        train, test = tomography.split(ds, float(dcfg["train_fraction"]), seeds["data"] + 3)
        manifest["split"] = {"train": len(train), "test": len(test)}
        for name, obj in (("data_spam", ds_spam), ("data_train", train), ("data_test", test)):
            io.save_dataset(obj, out / f"{name}.txt")
            record(stage, name, out / f"{name}.txt")

        stage = "fit-spam"
        fcfg = c["fit"]
        fit_cfg = retrieval.FitConfig(lr=float(fcfg["lr"]), max_iters=int(fcfg["max_iters"]),
                                      init_scale=float(fcfg["init_scale"]), seed=seeds["fit-spam"])
        spam_fit, spam_report = retrieval.fit_spam(ds_spam, fit_cfg, fcfg["spam_model"], return_report=True)
        io.save_spam(spam_fit, out / "spam.json")
        record(stage, "spam", out / "spam.json")
        write_json(stage, "spam_report", _report_json(spam_report))

        stage = "fit-map"
        rank = d * d if fcfg["rank"] == "full" else int(fcfg["rank"])
        fit_cfg.seed = seeds["fit-map"]
        fitted, map_report = retrieval.fit_map(train, spam_fit, rank, fit_cfg)
        io.save_map(fitted, out / "map.json")
        record(stage, "map", out / "map.json")
        write_json(stage, "map_report", _report_json(map_report))

        stage = "kl-eval"
        kl = retrieval.kl_eval(fitted, spam_fit, test)
        write_json(stage, "kl", {"kl": kl, "inverse_kl": 1.0 / kl if kl > 0 else None})

        stage = "spectrum"
        s_fit, s_true = ch.spectrum(fitted), ch.spectrum(truth)
        io.save_spectrum(s_fit, out / "spectrum.csv")
        record(stage, "spectrum", out / "spectrum.csv")
        io.save_spectrum(s_true, out / "truth_spectrum.csv")
        record(stage, "truth_spectrum", out / "truth_spectrum.csv")

        stage = "fit-du"
        scfg = c["spectral"]
        cache = spectral.DUSpectraCache()
        kw = dict(m_samples=int(scfg["m_samples"]), seed=seeds["fit-du"], search=scfg["search"],
                  metric=scfg["metric"], cache=cache)
        fit_ret = spectral.fit_du(s_fit, d, **kw)
        fit_true = spectral.fit_du(s_true, d, **kw)
        write_json(stage, "fit_du", {"retrieved": fit_ret.to_dict(), "truth": fit_true.to_dict()})
        manifest["status"] = "ok"
        status = 0
    except (NisqSpecError, ValueError) as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        status = 1
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return status, manifest
