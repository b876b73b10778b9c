"""``shearlab`` command line: presets in, static artifacts out.

Exit codes: 0 success, 1 module error (error.json written), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import certify, modes, nonlinear2d, rayleigh, semigroup
from .params import ModelParams, ShearProfile, ProfileKind
from .reports import (PRESETS, ConfigError, ExperimentConfig, RunManifest, collect_manifests, dumps,
                      load_config, parse_config, sha256, summary_markdown, svg_lines, write_csv, write_json, write_svg)

EXIT_OK, EXIT_MODULE, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------- helpers

def _outdir(cfg: ExperimentConfig) -> Path:
    cfg.output.mkdir(parents=True, exist_ok=True)
    return cfg.output


def _uniform(T: float, every: float) -> list[float]:
    n = max(1, int(round(T / every)))
    return [round(T * i / n, 12) for i in range(n + 1)]


# ---------------------------------------------------------------- evolve-mode / certify

def _mode_settings(cfg: ExperimentConfig) -> dict[str, Any]:
    p = cfg.params
    s = cfg.section("mode")
    s.setdefault("half_width", 6.0 / p.gamma)
    s.setdefault("T_final", 5.0 / p.gamma)
    s.setdefault("dxi", 0.25)
    s.setdefault("k", 1)
    s.setdefault("variant", None)
    s.setdefault("dt", None)
    s.setdefault("schedule", "uniform")
    s.setdefault("snapshot_every", s["T_final"] / 8)
    return s


def _run_mode(cfg: ExperimentConfig, blocks: bool):
    p = cfg.params
    s = _mode_settings(cfg)
    T = float(s["T_final"])
    if blocks or s["schedule"] == "blocks":
        cells = certify.CellDecomposition(p.gamma)
        sched = certify.block_schedule(p.gamma, int(round(T / cells.width)))
    else:
        sched = _uniform(T, float(s["snapshot_every"]))
    traj = modes.run_band(p, float(s["half_width"]), T, k=int(s["k"]), dxi=float(s["dxi"]), dt=s["dt"],
                          variant=s["variant"], snapshot_times=sched)
    return traj, s


def _norm_rows(traj: modes.Trajectory):
    p = traj.params
    return [(st.t, st.l2_norm(), st.sup_norm(), st.l1_norm(), modes.ceiling(p, traj.k, st.t))
            for st in traj.snapshots]


def _certificate(traj: modes.Trajectory, half_width: float) -> dict:
    p = traj.params
    if p.M == 0:
        T = float(traj.times[-1])
        lo = min(2.0 / p.gamma, max(0.0, T - 3.0 / p.gamma))
        c0, c1, rel = certify.fit_growth_rate(traj, (lo, T))
        return {"skipped": "M = 0 has no growth mechanism", "fit": {"c0": c0, "c1": c1, "window": [lo, T],
                                                                     "reliable": rel}}
    return certify.certify_run(traj, half_width)


def _ceiling_ok(traj: modes.Trajectory) -> tuple[bool, float]:
    p, dxi = traj.params, traj.grid.dxi
    sup0 = traj.snapshots[0].sup_norm()
    worst = max(st.sup_norm() / (sup0 * modes.ceiling(p, traj.k, st.t) * (1 + 10 * dxi)) for st in traj.snapshots)
    return worst <= 1.0, worst


def cmd_evolve_mode(cfg: ExperimentConfig, man: RunManifest) -> None:
    out = _outdir(cfg)
    traj, s = _run_mode(cfg, blocks=False)
    rows = []
    for st in traj.snapshots:
        rows += [(st.t, x, v.real, v.imag) for x, v in zip(st.grid.xi, st.values)]
    man.add(write_csv(out / "snapshots.csv", ["t", "xi", "re", "im"], rows))
    man.add(write_csv(out / "norms.csv", ["t", "l2", "sup", "l1", "ceiling"], _norm_rows(traj)))
    cert = _certificate(traj, float(s["half_width"]))
    man.add(write_json(out / "certificate.json", cert))
    man.add(write_json(out / "fit.json", cert["fit"]))
    p = cfg.params
    series = [(st.grid.xi, np.abs(st.values), f"t={st.t:g}") for st in traj.snapshots]
    man.add(write_svg(out / "profiles.svg", svg_lines(
        series, title=f"|h(t, xi)|  M={p.M:g}, gamma={p.gamma:g}", xlabel="xi", ylabel="|h|", logy=True)))
    if traj.config.variant is modes.Variant.TRANSPORT_VISCOUS:
        fit = modes.transport_decay_check(traj)
        man.add(write_json(out / "decay.json", fit.to_dict()))
        if p.M == 0:
            target = p.nu * traj.k ** 2 / 3
            ok = abs(fit.a - target) <= 0.05 * target
            man.criterion(12, ok, f"a={fit.a:.6g} vs nu k^2/3={target:.6g}")
        else:
            man.criterion(12, fit.a > 0, f"a={fit.a:.6g}")
    elif traj.config.variant in (modes.Variant.MODIFIED_VISCOUS, modes.Variant.MODIFIED_INVISCID):
        ok, worst = _ceiling_ok(traj)
        man.criterion(3, ok, f"max sup/ceiling ratio {worst:.6g}")


def cmd_certify(cfg: ExperimentConfig, man: RunManifest) -> None:
    out = _outdir(cfg)
    traj, s = _run_mode(cfg, blocks=True)
    man.add(write_csv(out / "norms.csv", ["t", "l2", "sup", "l1", "ceiling"], _norm_rows(traj)))
    cert = _certificate(traj, float(s["half_width"]))
    man.add(write_json(out / "certificate.json", cert))
    if "ledger" in cert:
        led = cert["ledger"]
        c1 = cert["fit"]["c1"]
        p = cfg.params
        ok = led["passed"] and led["certified_J"] >= 3 and 0.3 <= c1 <= p.M * math.pi
        man.criterion(4, ok, f"induction={led['passed']} certified j<={led['certified_J']} c1={c1:.4g}")
        man.criterion(5, certify.fibonacci(4) == (12, 8)
                      and abs(certify.fibonacci_ratio(40) - certify.GOLDEN) < 1e-6, "exact values and ratio")


# ---------------------------------------------------------------- semigroup

def cmd_semigroup(cfg: ExperimentConfig, man: RunManifest) -> None:
    out = _outdir(cfg)
    p = cfg.params
    s = cfg.section("semigroup")
    T = float(s.get("T_final", 5.0 / p.gamma))
    hw = float(s.get("half_width", 2.0 / p.gamma))
    every = float(s.get("snapshot_every", 0.5))
    dt = float(s.get("dt", modes.max_dt(p)))
    sched = _uniform(T, every)
    runs = {}
    for label, step in (("dt", dt), ("dt_check", float(s.get("dt_check", dt / 2)))):
        traj = modes.run_band(p, hw, T, dt=step, snapshot_times=sched)
        runs[label] = (traj, semigroup.calibrate_C0(traj))
    traj, C0 = runs["dt"]
    C0b = runs["dt_check"][1]
    t, e = semigroup.energy_series(traj)
    w = semigroup.weighted_energies(traj, C0)
    man.add(write_csv(out / "ghost_energy.csv", ["t", "energy", "weighted"], zip(t, e, w)))
    stable = abs(C0 - C0b) <= 0.05 * max(abs(C0), 1e-300) if C0 > 0 else C0b == 0
    body = {"C0": C0, "C0_dt_check": C0b, "closed_form_C0": semigroup.closed_form_C0(traj),
            "stable_under_dt_halving": stable, "monotone": bool(np.all(w[1:] <= w[:-1] * (1 + 1e-10)))}
    man.add(write_json(out / "ghost_weight.json", body))
    man.add(write_svg(out / "ghost_energy.svg", svg_lines(
        [(t, e, "ghost energy"), (t, w, "weighted")], title="ghost-weight energy", xlabel="t", logy=True)))
    man.criterion(6, body["monotone"] and stable, f"C0={C0:.4g}, dt/2 gives {C0b:.4g}")


# ---------------------------------------------------------------- rayleigh

def cmd_rayleigh(cfg: ExperimentConfig, man: RunManifest, scan_embedded: bool = False) -> None:
    out = _outdir(cfg)
    p = cfg.params
    s = cfg.section("rayleigh")
    scan_embedded = scan_embedded or bool(s.get("scan_embedded", False))
    rc = rayleigh.RayleighConfig(M=p.M, gamma=p.gamma)
    reg = rayleigh.ExclusionRegions(p.M, p.gamma)
    n_cr = int(s.get("c_r_grid", 21))
    edge = reg.cr_edge
    grid = np.linspace(-edge, edge, n_cr)
    res = rayleigh.count_and_refine(rc, n_edge=int(s.get("n_edge", 16)), oracle=p.M > 0)
    report = {"regions": {"cr_edge": edge, "ci_bottom": reg.ci_bottom, "ci_top": reg.ci_top},
              "eigen": res.to_dict()}
    Ts = float(s.get("semigroup_T", 200))
    sg = rayleigh.semigroup_growth(rc, Ts)
    report["semigroup_rate"] = sg["rate"]
    man.add(write_csv(out / "semigroup.csv", ["t", "norm"], zip(sg["times"], sg["norms"])))
    jrows = [rayleigh.j_functions(rc, float(c)) for c in grid]
    man.add(write_csv(out / "j_functions.csv", ["c_r", "y_c", "J1", "J2", "Pi1", "Pi2"],
                      [(j.c_r, j.y_c, j.J1, j.J2, j.Pi1, j.Pi2) for j in jrows]))
    limits = []
    for j in jrows:
        up = rayleigh.D_value(rc, complex(j.c_r, 1e-4))
        down = rayleigh.D_value(rc, complex(j.c_r, -1e-4))
        target = complex(j.J1, -j.J2)
        tol = 1e-2 * (1 + abs(j.J1) + abs(j.J2))
        limits.append((j.c_r, up.real, up.imag, down.real, down.imag, abs(up - target) / tol))
    man.add(write_csv(out / "limits.csv", ["c_r", "D_up_re", "D_up_im", "D_down_re", "D_down_im", "err_over_tol"],
                      limits))
    if p.M == 0:
        # c_i = 1e-5 sits where -2/(1+c_i^2) and -2 agree to 2e-10
        samples = [complex(a, b) for a in (-0.3, -0.1, 0.0, 0.1, 0.3) for b in (1e-5, 0.05, 0.5, 1.0)]
        D = [rayleigh.D_value(rc, c) for c in samples]
        errs = [abs(d + 2 / (1 + c.imag ** 2)) for c, d in zip(samples, D)]
        near_axis = max(abs(d + 2) for c, d in zip(samples, D) if c.imag < 1e-4)
        report["m0"] = {"max_D_error": max(errs), "max_near_axis_error": near_axis,
                        "samples": [[c.real, c.imag, d.real, d.imag] for c, d in zip(samples, D)],
                        "J1": jrows[n_cr // 2].J1, "J2": jrows[n_cr // 2].J2}
        ok = max(errs) < 1e-7 and res.count == 0 and abs(report["m0"]["J1"] + 2) < 1e-6 \
            and abs(report["m0"]["J2"]) < 1e-12
        man.criterion(7, ok, f"count={res.count}, max|D - D_exact|={max(errs):.2e}")
    else:
        roots = res.roots
        ok = res.count >= 1 and bool(roots)
        detail = f"count={res.count}"
        if roots:
            r = max(roots, key=lambda q: q["c"].imag)
            c = r["c"]
            ok = ok and r["residual"] < 1e-8 and reg.in_E(c) and r.get("oracle_rel_err", 1.0) < 1e-3 \
                and abs(sg["rate"] - c.imag) <= 0.05 * c.imag
            detail += f", c*={c.real:.3e}{c.imag:+.6e}i, semigroup rate {sg['rate']:.6g}"
        man.criterion(8, ok, detail)
        lim_ok = all(row[5] <= 1 for row in limits) and all(row[2] * row[4] <= 0 for row in limits
                                                             if abs(row[2]) > 0)
        man.criterion(10, lim_ok, f"max err/tol {max(r[5] for r in limits):.3g}")
    if scan_embedded:
        scan = rayleigh.embedded_scan(rc, grid)
        j0 = rayleigh.j_functions(rc, 0.0)
        scan["J2_at_zero"] = j0.J2
        man.add(write_json(out / "embedded_scan.json", scan))
        if p.M > 0:
            man.criterion(9, scan["min"] > 0 and j0.J2 == 0.0, f"min J1^2+J2^2={scan['min']:.4g}")
    man.add(write_json(out / "spectrum.json", report))
    contour = res.contour
    rect = [(-edge, reg.ci_bottom, edge, max(reg.ci_top, 10 * reg.ci_bottom))]
    marks = [(r["c"].real, r["c"].imag, "root") for r in res.roots]
    man.add(write_svg(out / "regions.svg", svg_lines(
        [([z.real for z, _ in contour] + [contour[0][0].real], [z.imag for z, _ in contour] + [contour[0][0].imag],
          "contour")], title="eigenvalue search region", xlabel="Re c", ylabel="Im c",
        markers=marks, rects=rect)))
    man.add(write_svg(out / "d_image.svg", svg_lines(
        [([d.real for _, d in contour], [d.imag for _, d in contour], "D(contour)")],
        title="image of the contour under D", xlabel="Re D", ylabel="Im D", markers=[(0.0, 0.0, "0")])))


# ---------------------------------------------------------------- nonlinear

def cmd_nonlinear(cfg: ExperimentConfig, man: RunManifest) -> None:
    out = _outdir(cfg)
    p = cfg.params
    s = cfg.section("nonlinear")
    dom = nonlinear2d.Domain2D(float(s.get("L_y", 4 * math.pi)), int(s.get("N_x", 16)), int(s.get("N_y", 1024)))
    T, dt = float(s.get("T_final", 30)), float(s.get("dt", 0.025))
    hw = float(s.get("half_width", 20))
    every = int(s.get("snapshot_every", 40))
    av = s.get("amplitude_variant", "gamma")
    diag = nonlinear2d.run_growth_experiment(p, dom, T, dt, hw, snapshot_every=every, amplitude_variant=av)
    fit = nonlinear2d.fit_growth(diag)
    cons = nonlinear2d.conservation_checks(diag)
    duh = nonlinear2d.duhamel_residuals(diag)
    nonlinear2d.write_diagnostics_csv(diag, out / "diagnostics.csv")
    man.add(out / "diagnostics.csv")
    body = {"domain": dom.to_dict(), "fit": fit.to_dict(), "conservation": cons, "duhamel": duh,
            "remaps": diag.remaps}
    ok = fit.positive and fit.below_ceiling and cons["passed"]
    detail = f"rate={fit.rate:.4g}, ceiling margin {fit.ceiling_margin:.3g}"
    if s.get("linear_check", False):
        lin = nonlinear2d.run_growth_experiment(p, dom, T, dt, hw, nonlinear2d.Solver2DConfig(nonlinear=False),
                                                snapshot_every=every, record_forcing=False, amplitude_variant=av)
        a, b = diag.mode_norms[1], lin.mode_norms[1]
        dev = float(np.max(np.abs(a / a[0] - b / b[0]) / (b / b[0])))
        body["linear_deviation"] = dev
        ok = ok and dev <= 0.02
        detail += f", linear deviation {dev:.2e}"
    man.add(write_json(out / "nonlinear.json", body))
    man.add(write_svg(out / "mode_norms.svg", svg_lines(
        [(diag.times, v, f"k={k}") for k, v in sorted(diag.mode_norms.items()) if k > 0],
        title="mode norms", xlabel="t", logy=True)))
    man.criterion(11, ok, detail)


# ---------------------------------------------------------------- pipeline and report

def quick_checks(out: Path, man: RunManifest) -> None:
    """Profile identities, the Couette oracle and the Fibonacci ledger."""
    p = ModelParams.viscous(5, 0.05)
    prof = ShearProfile(p, ProfileKind.STATIC)
    y = np.linspace(-1, 1, 200001)
    sup_err = abs(np.max(np.abs(prof.deviation(y))) - math.pi * p.M * p.gamma ** 2) / (math.pi * p.M * p.gamma ** 2)
    yy = np.linspace(-40 * p.gamma, 40 * p.gamma, 400001)
    dev1 = prof.derivative(yy, 1) - 1.0
    quad = math.sqrt(float(np.sum((dev1[1:] ** 2 + dev1[:-1] ** 2) / 2 * np.diff(yy))))
    h1_err = abs(quad - prof.hdot1_deviation()) / prof.hdot1_deviation()
    pe = ModelParams.viscous(5, 0.05)
    r1, r2 = ShearProfile(pe).heat_residual(1.0, 0.01, 1e-2), ShearProfile(pe).heat_residual(1.0, 0.01, 5e-3)
    order = math.log2(abs(r1) / abs(r2)) if r2 else math.inf
    man.criterion(1, sup_err < 1e-6 and h1_err < 1e-6 and order > 1.8,
                  f"sup err {sup_err:.1e}, H1 err {h1_err:.1e}, heat order {order:.2f}")
    pc = ModelParams.free(0, 0.05, 1e-3, eps1=0.1)
    traj = modes.run_band(pc, 5.0, 5.0, snapshot_times=[5.0])
    end = traj.snapshots[-1]
    start = modes.init_band(end.grid, 5.0)
    exact = modes.couette_exact(pc, 1, end.grid.xi, 5.0, start.values)
    cerr = float(np.max(np.abs(end.values - exact)) / np.max(np.abs(exact)))
    man.criterion(2, cerr < 1e-9, f"relative error {cerr:.2e}")
    fib = [certify.fibonacci(j) for j in range(5)]
    ratio = certify.fibonacci_ratio(40)
    man.criterion(5, fib == [(1, 1), (2, 2), (4, 3), (7, 5), (12, 8)] and abs(ratio - certify.GOLDEN) < 1e-6,
                  f"ratio(40)-golden={ratio - certify.GOLDEN:.1e}")
    man.add(write_json(out / "checks.json", {"sup_rel_err": sup_err, "hdot1_rel_err": h1_err,
                                             "heat_order": order, "couette_rel_err": cerr, "fibonacci": fib,
                                             "ratio_40": ratio}))


QUICK_STEPS = [("checks", None, {}), ("couette", "evolve-mode", {"preset": "couette"}),
               ("rayleigh-couette", "rayleigh", {"preset": "rayleigh-couette"})]
FULL_STEPS = QUICK_STEPS + [
    ("figure1", "evolve-mode", {"preset": "figure1"}),
    ("transport", "evolve-mode", {"preset": "transport"}),
    ("transport-bump", "evolve-mode", {"preset": "transport-bump"}),
    ("certify-desk", "certify", {"preset": "certify-desk"}),
    ("certify-compliant", "certify", {"preset": "certify-compliant"}),
    ("semigroup", "semigroup", {"preset": "semigroup"}),
    ("rayleigh", "rayleigh", {"preset": "rayleigh", "rayleigh": {"scan_embedded": True}}),
    ("nonlinear", "nonlinear", {"preset": "nonlinear"}),
]


def artifact_hashes(root: Path) -> dict[str, str]:
    """sha256 of every CSV/JSON below root except manifests (they carry wall-clock time)."""
    out = {}
    for p in sorted(root.rglob("*")):
        if p.suffix in (".csv", ".json") and p.name != "manifest.json":
            out[str(p.relative_to(root))] = sha256(p)
    return out


def cmd_report(root: Path) -> int:
    found = collect_manifests(root) if root.is_dir() else []
    if not found:
        print("no runs found", file=sys.stderr)
        return EXIT_USAGE
    text = summary_markdown(found)
    (root / "summary.md").write_text(text)
    print(text, end="")
    return EXIT_OK


def _run_steps(root: Path, steps) -> int:
    status = EXIT_OK
    for name, command, data in steps:
        out = root / name
        if command is None:
            out.mkdir(parents=True, exist_ok=True)
            man = RunManifest("checks", {})
            try:
                quick_checks(out, man)
                man.write(out)
            except Exception as exc:  # noqa: BLE001
                status = _module_error(out, "checks", exc)
            continue
        status = max(status, run_command(command, parse_config(data, out)))
    return status


def cmd_pipeline(root: Path, quick: bool) -> int:
    steps = QUICK_STEPS if quick else FULL_STEPS
    status = _run_steps(root, steps)
    # determinism: replay the same steps elsewhere and compare artifact hashes
    with tempfile.TemporaryDirectory() as tmp:
        status = max(status, _run_steps(Path(tmp), steps))
        again = artifact_hashes(Path(tmp))
    first = {k: v for k, v in artifact_hashes(root).items() if k in again}
    out = root / "determinism"
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest("determinism", {"steps": [s[0] for s in steps]})
    diff = sorted(k for k in again if first.get(k) != again[k])
    man.add(write_json(out / "determinism.json", {"compared": sorted(again), "mismatched": diff}))
    man.criterion(13, not diff and bool(again), f"{len(again)} files compared, {len(diff)} differ")
    man.write(out)
    return max(status, cmd_report(root))


COMMANDS: dict[str, Callable[..., None]] = {
    "evolve-mode": cmd_evolve_mode, "certify": cmd_certify, "semigroup": cmd_semigroup,
    "rayleigh": cmd_rayleigh, "nonlinear": cmd_nonlinear,
}


def _module_error(out: Path, command: str, exc: BaseException) -> int:
    body = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "error.json").write_text(dumps(body))
    print(json.dumps(body, sort_keys=True), file=sys.stderr)
    return EXIT_MODULE


def run_command(command: str, cfg: ExperimentConfig, **kw: Any) -> int:
    man = RunManifest(command, cfg.resolved())
    try:
        COMMANDS[command](cfg, man, **kw)
    except Exception as exc:  # noqa: BLE001 - every module failure maps to exit 1
        man.write(_outdir(cfg), status="error")
        return _module_error(cfg.output, command, exc)
    man.write(cfg.output)
    return EXIT_OK


# ---------------------------------------------------------------- argparse

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    sp.add_argument("--config", type=Path, help="JSON config file (ModelParams keys plus module sections)")
    sp.add_argument("--out", type=Path, help="output directory")
    sp.add_argument("--M", type=float, help="bump amplitude")
    sp.add_argument("--gamma", type=float, help="bump width")
    sp.add_argument("--nu", type=float, help="viscosity (Free regime)")
    sp.add_argument("--delta0", type=float)
    sp.add_argument("--eps0", type=float)
    sp.add_argument("--eps1", type=float)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--inviscid", action="store_const", const="Inviscid", dest="regime")
    g.add_argument("--viscous", action="store_const", const="ViscousCoupled", dest="regime")
    g.add_argument("--free", action="store_const", const="Free", dest="regime")
    sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override a module-section key, value parsed as JSON")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shearlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("evolve-mode", "evolve one band-limited mode; snapshots, certificate, SVG"),
                           ("certify", "evolve on the block schedule and assemble the growth certificate"),
                           ("semigroup", "calibrate the ghost-weight constant and check monotonicity"),
                           ("rayleigh", "count and refine unstable eigenvalues, J tables, region plot"),
                           ("nonlinear", "2D vorticity run in the growth window")):
        sp = sub.add_parser(name, help=helptext)
        _add_common(sp)
        if name == "rayleigh":
            sp.add_argument("--scan-embedded", action="store_true", help="also tabulate min J1^2+J2^2")
    rp = sub.add_parser("report", help="aggregate every manifest under --out into summary.md")
    rp.add_argument("--out", type=Path, default=Path("runs"))
    pp = sub.add_parser("pipeline", help="one-shot reproduction of all presets, then report")
    pp.add_argument("--out", type=Path, default=Path("runs"))
    pp.add_argument("--quick", action="store_true", help="only the fast steps")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = load_config(args.config) if args.config else {}
    if args.preset:
        data["preset"] = args.preset
    for key in ("M", "gamma", "nu", "delta0", "eps0", "eps1", "regime"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.regime == "Inviscid":
        data["nu"] = 0.0
    elif args.regime == "ViscousCoupled":
        data.pop("nu", None)
    if "preset" in data and args.regime is not None:
        # a regime switch invalidates the preset's coupled nu
        base = dict(PRESETS[data.pop("preset")])
        base.pop("nu", None)
        data = {**base, **data}
    for item in args.set:
        key, sep, raw = item.partition("=")
        section, dot, field = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        data.setdefault(section, {})
        if not isinstance(data[section], dict):
            raise ConfigError(f"{section!r} is not a section")
        data[section] = {**data[section], field: value}
    if not data:
        raise ConfigError("give --preset, --config or at least --M and --gamma")
    if "regime" not in data and "preset" not in data:
        data["regime"] = "Free" if "nu" in data else "ViscousCoupled"
    out = args.out or Path("runs") / (args.preset or args.command)
    return parse_config(data, out)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "report":
        return cmd_report(args.out)
    if args.command == "pipeline":
        try:
            return cmd_pipeline(args.out, args.quick)
        except ConfigError as exc:
            print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    kw = {"scan_embedded": args.scan_embedded} if args.command == "rayleigh" else {}
    return run_command(args.command, cfg, **kw)


if __name__ == "__main__":
    sys.exit(main())
