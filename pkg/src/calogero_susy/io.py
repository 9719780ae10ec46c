"""Run configuration, manifests and deterministic CSV output."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "RunConfig",
    "RunManifest",
    "file_sha256",
    "fmt",
    "write_csv",
    "write_eigen_csv",
    "write_trajectory_csv",
    "load_manifests",
]

_SECTIONS = {
    "model": ("alpha", "gamma", "n_particles"),
    "grid": ("box", "n", "condition"),
    "solver": ("k", "tol", "max_iter", "sigma"),
    "task": ("task", "sector"),
    "profile": ("profile", "amplitude", "profile_0", "profile_1", "profile_2"),
    "time": ("dt", "t_end"),
    "output": ("out", "seed"),
}


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.  Empty strings mean "not set"."""

    alpha: float = 1.0 / 12.0
    gamma: float = 1.5
    n_particles: int = 3
    box: float = 7.5
    n: int = 128
    condition: str = "auto"
    k: int = 20
    tol: float = 1e-8
    max_iter: int = 0
    sigma: float = -1.0
    task: str = "spectrum"
    sector: int = 0
    profile: str = "smooth"
    amplitude: float = 0.05
    profile_0: str = ""
    profile_1: str = ""
    profile_2: str = ""
    dt: float = 1e-3
    t_end: float = 1.0
    out: str = "runs"
    seed: int = 0

    def profile_for(self, sector: int) -> str:
        """Per-sector override, falling back to the shared profile."""
        return getattr(self, f"profile_{sector}", "") or self.profile

    def emit(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        values = asdict(self)
        for sec, keys in _SECTIONS.items():
            cp[sec] = {key: _to_text(values[key]) for key in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for sec, keys in _SECTIONS.items():
            if sec not in cp:
                continue
            for key in keys:
                if key in cp[sec]:
                    kwargs[key] = _from_text(cp[sec][key], types[key])
        unknown = [(s, k) for s in cp.sections() for k in cp[s] if k not in _SECTIONS.get(s, ())]
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.parse(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.emit())

    def identity(self) -> str:
        """Emitted form without the output location."""
        return replace(self, out="").emit()

    def digest(self) -> str:
        """sha256 of :meth:`identity`; equal for runs that differ only in ``out``."""
        return hashlib.sha256(self.identity().encode()).hexdigest()


def _to_text(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _from_text(text: str, typ) -> object:
    name = typ if isinstance(typ, str) else typ.__name__
    if name == "float":
        return float(text)
    if name == "int":
        return int(text)
    return text


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str = __version__
    command: str = ""
    timings: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def add_file(self, path, root) -> None:
        rel = str(Path(path).relative_to(root))
        self.files[rel] = file_sha256(path)

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=float))
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))

    def verify(self, directory) -> dict:
        """Map each listed file to True when its current hash matches."""
        out = {}
        for rel, digest in self.files.items():
            p = Path(directory) / rel
            out[rel] = p.exists() and file_sha256(p) == digest
        return out


def fmt(x) -> str:
    """Shortest round-trip representation; integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return path


def write_eigen_csv(path, es) -> Path:
    rows = [(i, lam, res) for i, (lam, res) in enumerate(zip(es.eigenvalues, es.residuals))]
    return write_csv(path, ["index", "eigenvalue", "residual"], rows)


def write_trajectory_csv(path, traj) -> Path:
    rows = zip(traj.t, traj.norm, traj.energy, traj.invariant)
    return write_csv(path, ["t", "norm", "energy", "invariant"], rows)


def load_manifests(root) -> list:
    """All ``manifest.json`` files below ``root`` as ``(directory, manifest)``."""
    out = []
    for p in sorted(Path(root).rglob("manifest.json")):
        try:
            out.append((p.parent, RunManifest.read(p)))
        except (json.JSONDecodeError, TypeError):
            continue
    return out
