"""Presets, configuration, artifact writers (CSV/JSON/SVG) and run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .params import PARAM_KEYS, ModelParams

MODULE_SECTIONS = {
    "mode": {"half_width", "T_final", "dxi", "dt", "k", "variant", "snapshot_every", "schedule"},
    "semigroup": {"half_width", "T_final", "dt", "dt_check", "snapshot_every"},
    "rayleigh": {"c_r_grid", "scan_embedded", "n_edge", "semigroup_T"},
    "nonlinear": {"L_y", "N_x", "N_y", "T_final", "dt", "half_width", "snapshot_every", "linear_check",
                  "amplitude_variant"},
}
TOP_KEYS = set(PARAM_KEYS) | set(MODULE_SECTIONS) | {"preset", "output", "seed"}


class ConfigError(ValueError):
    pass


PRESETS: dict[str, dict[str, Any]] = {
    "figure1": {"M": 5, "gamma": 0.01, "delta0": 0.05, "regime": "ViscousCoupled",
                "mode": {"half_width": 200, "T_final": 400, "dxi": 0.25, "snapshot_every": 50}},
    "couette": {"M": 0, "gamma": 0.01, "nu": 0.0, "regime": "Free", "eps1": 0.1,
                "mode": {"half_width": 5, "T_final": 50, "dxi": 0.25, "snapshot_every": 5}},
    "transport": {"M": 0, "gamma": 0.05, "nu": 1e-3, "regime": "Free", "eps1": 0.1,
                  "mode": {"variant": "TransportViscous", "half_width": 1, "T_final": 40, "snapshot_every": 0.5}},
    "transport-bump": {"M": 0.1, "gamma": 0.1, "nu": 1e-3, "regime": "Free", "eps1": 0.1,
                       "mode": {"variant": "TransportViscous", "half_width": 1, "T_final": 20,
                                "snapshot_every": 0.25}},
    "certify-desk": {"M": 10, "gamma": 0.1, "regime": "Inviscid",
                     "mode": {"half_width": 60, "T_final": 50, "schedule": "blocks"}},
    "certify-compliant": {"M": 5, "gamma": 0.01, "regime": "Inviscid",
                          "mode": {"half_width": 600, "T_final": 500, "schedule": "blocks"}},
    "semigroup": {"M": 5, "gamma": 0.05, "regime": "ViscousCoupled",
                  "semigroup": {"half_width": 40, "T_final": 200, "dt": 0.1, "dt_check": 0.05,
                                "snapshot_every": 0.5}},
    "rayleigh": {"M": 20, "gamma": 0.02, "nu": 0.0, "regime": "Free", "eps1": 1.0,
                 "rayleigh": {"c_r_grid": 21, "semigroup_T": 200}},
    "rayleigh-couette": {"M": 0, "gamma": 0.02, "nu": 0.0, "regime": "Free", "eps1": 1.0,
                         "rayleigh": {"c_r_grid": 11, "semigroup_T": 100}},
    "nonlinear": {"M": 10, "gamma": 0.1, "delta0": 0.05, "regime": "ViscousCoupled", "eps0": 1e-10, "eps1": 0.4,
                  "nonlinear": {"L_y": 4 * math.pi, "N_x": 16, "N_y": 1024, "T_final": 30, "dt": 0.025,
                                "half_width": 20, "snapshot_every": 40, "linear_check": True}},
}


@dataclass
class ExperimentConfig:
    params: ModelParams
    sections: dict[str, dict[str, Any]]
    output: Path
    seed: int = 0
    preset: str | None = None

    def section(self, name: str) -> dict[str, Any]:
        return dict(self.sections.get(name, {}))

    def resolved(self) -> dict[str, Any]:
        return {"preset": self.preset, "params": self.params.to_dict(), "sections": self.sections,
                "seed": self.seed}


def _merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> dict[str, Any]:
    out = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in base.items()}
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def parse_config(data: Mapping[str, Any], output: str | Path | None = None) -> ExperimentConfig:
    """Validate a flat config (optionally layered on a preset) and build ModelParams."""
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    preset = data.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = _merge(PRESETS[preset], {k: v for k, v in data.items() if k != "preset"})
    for name, allowed in MODULE_SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, Mapping):
            raise ConfigError(f"section {name!r} must be a mapping")
        bad = set(sec) - allowed
        if bad:
            raise ConfigError(f"unknown keys in section {name!r}: {sorted(bad)}")
    try:
        params = ModelParams.from_mapping({k: data[k] for k in PARAM_KEYS if k in data})
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(output or data.get("output") or "runs")
    sections = {name: dict(data.get(name, {})) for name in MODULE_SECTIONS if name in data}
    return ExperimentConfig(params, sections, out, int(data.get("seed", 0)), preset)


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


# ---------------------------------------------------------------- serialization

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and not isinstance(obj, (int, str)):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1) + "\n"


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps(obj))
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(f"{float(v):.12e}" for v in r))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    files: list[Path] = field(default_factory=list)
    criteria: dict[str, dict[str, Any]] = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    def add(self, path: Path) -> Path:
        self.files.append(path)
        return path

    def criterion(self, number: int, passed: bool, detail: str) -> None:
        self.criteria[str(number)] = {"passed": bool(passed), "detail": detail}

    def write(self, outdir: Path, status: str = "ok") -> Path:
        body = {
            "tool": "shearlab", "version": __version__, "command": self.command, "status": status,
            "config": self.config, "criteria": self.criteria,
            "wall_clock_s": round(time.perf_counter() - self.started, 3),
            "files": {p.name: sha256(p) for p in sorted(self.files, key=lambda q: q.name)},
        }
        return write_json(outdir / "manifest.json", body)


# ---------------------------------------------------------------- SVG

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
            "#7f7f7f", "#bcbd22"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def svg_lines(series: Sequence[tuple[Sequence[float], Sequence[float], str]], title: str = "",
              xlabel: str = "", ylabel: str = "", logy: bool = False, width: int = 720, height: int = 440,
              markers: Sequence[tuple[float, float, str]] = (), rects: Sequence[tuple[float, float, float, float]] = (),
              ) -> str:
    """Minimal deterministic line chart."""
    ml, mr, mt, mb = 70, 20, 36, 50
    xs, ys = [], []
    prepared = []
    for x, y, label in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if logy:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        keep = np.isfinite(x) & np.isfinite(y)
        x, y = x[keep], y[keep]
        prepared.append((x, y, label))
        xs.append(x)
        ys.append(y)
    for cx, cy, _ in markers:
        xs.append(np.array([cx]))
        ys.append(np.array([math.log10(cy) if logy else cy]))
    for a, b, c, d in rects:
        xs.append(np.array([a, c]))
        ys.append(np.array([b, d]))
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    W, H = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * W

    def Y(v):
        return mt + (1 - (v - y0) / (y1 - y0)) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
           f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="none" stroke="black"/>']
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{X(tx):.2f}" y1="{mt + H}" x2="{X(tx):.2f}" y2="{mt + H + 4}" stroke="black"/>')
        out.append(f'<text x="{X(tx):.2f}" y="{mt + H + 16}" text-anchor="middle">{tx:g}</text>')
    for ty in _ticks(y0, y1):
        lab = f"1e{ty:g}" if logy else f"{ty:g}"
        out.append(f'<line x1="{ml - 4}" y1="{Y(ty):.2f}" x2="{ml}" y2="{Y(ty):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{Y(ty) + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + W / 2:.1f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + H / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + H / 2:.1f})">{ylabel}</text>')
    for a, b, c, d in rects:
        out.append(f'<rect x="{X(a):.2f}" y="{Y(d):.2f}" width="{X(c) - X(a):.2f}" height="{Y(b) - Y(d):.2f}" '
                   f'fill="none" stroke="#555" stroke-dasharray="4 3"/>')
    for i, (x, y, label) in enumerate(prepared):
        if x.size == 0:
            continue
        col = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        if label:
            ly = mt + 14 + 14 * i
            out.append(f'<line x1="{ml + W - 110}" y1="{ly - 4}" x2="{ml + W - 92}" y2="{ly - 4}" stroke="{col}"/>')
            out.append(f'<text x="{ml + W - 88}" y="{ly}">{label}</text>')
    for cx, cy, label in markers:
        vy = math.log10(cy) if logy else cy
        out.append(f'<circle cx="{X(cx):.2f}" cy="{Y(vy):.2f}" r="3.5" fill="black"/>')
        if label:
            out.append(f'<text x="{X(cx) + 6:.2f}" y="{Y(vy) - 6:.2f}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: Path, svg: str) -> Path:
    path.write_text(svg)
    return path


# ---------------------------------------------------------------- summary

CRITERIA_TITLES = {
    1: "profile identities", 2: "Couette oracle", 3: "sup-norm ceiling", 4: "growth certificate",
    5: "Fibonacci ledger", 6: "ghost-weight monotonicity", 7: "Rayleigh M=0 oracles",
    8: "eigenvalue existence and location", 9: "no embedded eigenvalue", 10: "limit consistency",
    11: "nonlinear growth window", 12: "transport decay", 13: "determinism",
}


def collect_manifests(root: Path) -> list[dict]:
    found = []
    for p in sorted(root.rglob("manifest.json")):
        try:
            body = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        body["_dir"] = str(p.parent.relative_to(root)) if p.parent != root else "."
        found.append(body)
    return found


def summary_markdown(manifests: list[dict]) -> str:
    lines = ["# shearlab run summary", ""]
    lines.append("| run | command | status | files |")
    lines.append("|---|---|---|---|")
    for m in manifests:
        lines.append(f"| {m['_dir']} | {m['command']} | {m.get('status', '?')} | {len(m.get('files', {}))} |")
    lines += ["", "## Acceptance criteria", ""]
    seen: dict[int, list[tuple[str, dict]]] = {}
    for m in manifests:
        for k, v in m.get("criteria", {}).items():
            seen.setdefault(int(k), []).append((m["_dir"], v))
    for n in sorted(CRITERIA_TITLES):
        title = CRITERIA_TITLES[n]
        if n not in seen:
            lines.append(f"- {n}. {title}: not run")
            continue
        for d, v in seen[n]:
            tag = "PASS" if v["passed"] else "FAIL"
            lines.append(f"- {n}. {title}: {tag} ({d}) {v['detail']}")
    return "\n".join(lines) + "\n"
