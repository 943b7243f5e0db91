"""Command-line surface: experiment drivers, configuration, run manifests.

Exit codes: 0 success, 1 I/O error, 2 usage error, 3 config validation error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .deconv import (
    CGDivergence,
    PhantomSpec,
    SolverConfig,
    add_rician,
    exp_response,
    simulate_crossing,
    solve_fod,
)
from .evolution import (
    DivergenceError,
    EvolutionConfig,
    advection_reference_1d,
    gaussian_pulse_field,
    euler_integrate,
    translation_profile,
)
from .fields import (
    GridSpec,
    SphericalField,
    pack_real_even,
    read_shv,
    scalar_field,
    sph_channels,
    unpack_real_even,
    wig_channels,
    write_shv,
)
from .hough import (
    HoughConfig,
    find_centers,
    gaussian_smooth,
    gradient_field,
    hough_transform,
    init_hough,
    render_shell_phantom,
)
from .maxima import detect_maxima, electrostatic_directions, match_and_score, ScoreReport
from .operators import GeneratorSpec

FMT = "%.17g"


def _fnum(v) -> str:
    return FMT % float(v)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fnum(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad config JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


class ConfigError(ValueError):
    pass


class _Manifest:
    def __init__(self, command: str, config: dict, seed, outdir: Path):
        self.t0 = time.monotonic()
        self.data = {
            "command": command,
            "config": config,
            "seed": seed,
            "code_version": __version__,
            "inputs": {},
            "outputs": {},
        }
        self.outdir = outdir

    def add_input(self, path):
        p = Path(path)
        self.data["inputs"][str(p)] = _sha256(p)

    def add_output(self, path):
        p = Path(path)
        self.data["outputs"][p.name] = _sha256(p)

    def write(self):
        self.data["wall_clock_s"] = round(time.monotonic() - self.t0, 3)
        with open(self.outdir / "manifest.json", "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _merge(defaults: dict, config: dict, args, keys) -> dict:
    """defaults <- config file <- explicit CLI flags."""
    cfg = dict(defaults)
    for k, v in config.items():
        if k not in defaults:
            raise ConfigError(f"unknown config key {k!r}")
        cfg[k] = v
    for k in keys:
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            cfg[k] = v
    return cfg


# ---------------------------------------------------------------------------
# info


def cmd_info(args) -> int:
    obj = read_shv(args.file)
    kind = type(obj).__name__
    grid = obj.grid
    if hasattr(obj, "coeffs"):
        nch = obj.coeffs.shape[0]
    else:
        nch = obj.data.shape[0]
    flags = []
    if getattr(obj, "parity", None) == "even":
        flags.append("even-only")
    if kind == "PackedRealEvenField":
        flags.extend(["even-only", "real-packed"])
    if kind == "WignerField":
        flags.append("wigner-full")
    print(f"file:        {args.file}")
    print(f"kind:        {kind}")
    print(f"dims:        {grid.dims[0]} x {grid.dims[1]} x {grid.dims[2]}")
    print(f"voxel size:  {grid.voxel_size:g}")
    print(f"band limit:  {obj.L}")
    print(f"flags:       {', '.join(sorted(set(flags))) or '(none)'}")
    print(f"channels:    {nch}")
    return 0


# ---------------------------------------------------------------------------
# translate-test


def cmd_translate_test(args) -> int:
    defaults = {
        "L": 12,
        "l_sweep": "",
        "grid": 32,
        "dt": 0.05,
        "steps": 150,
        "diffusion": 0.0,
        "dirs": 256,
        "pulse_width": 1.0,
        "snapshot_stride": 0,
    }
    cfg = _merge(defaults, _load_config(args.config), args,
                 ["L", "l_sweep", "grid", "dt", "steps", "diffusion", "dirs",
                  "snapshot_stride"])
    out = _outdir(args)
    man = _Manifest("translate-test", cfg, args.seed, out)
    grid = GridSpec((cfg["grid"],) * 3)
    dirs = electrostatic_directions(int(cfg["dirs"]), seed=args.seed)
    sweep = [int(s) for s in str(cfg["l_sweep"]).split(",") if s] or [int(cfg["L"])]

    runs = []
    for L in sweep:
        runs.append((f"L={L}", L, 0.0))
    if cfg["diffusion"]:
        runs.append((f"L={max(sweep)} diff={cfg['diffusion']:g}", max(sweep), float(cfg["diffusion"])))

    rows = []
    curves_max, curves_f0 = {}, {}
    z = None
    for label, L, diffusion in runs:
        f0 = gaussian_pulse_field(grid, L, (0, 0, 1), float(cfg["pulse_width"]))
        terms = [("T0", -1.0)]
        if diffusion:
            terms.append(("T0_sq", diffusion))
        ev = EvolutionConfig(float(cfg["dt"]), int(cfg["steps"]), GeneratorSpec(terms),
                             snapshot_stride=int(cfg["snapshot_stride"]))
        final, snaps = euler_integrate(f0, ev)
        for step, snap in snaps:
            p = out / f"snapshot_{label.replace(' ', '_').replace('=', '')}_{step:04d}.shv"
            write_shv(p, snap)
            man.add_output(p)
        z, max_phi, fz0 = translation_profile(final, dirs)
        curves_max[label], curves_f0[label] = max_phi, fz0
        for zi, mp, f0i in zip(z, max_phi, fz0):
            rows.append((label, L, diffusion, zi, mp, f0i))

    # 1-D central-difference reference from the same initial j=0 z-profile
    ref0 = np.exp(-(z**2) / (2.0 * float(cfg["pulse_width"]) ** 2))
    init_ref = gaussian_pulse_field(grid, 0, (0, 0, 1), float(cfg["pulse_width"]))
    f0_amp = init_ref.coeffs[0, (grid.dims[0] - 1) // 2, (grid.dims[1] - 1) // 2,
                             (grid.dims[2] - 1) // 2].real
    ref = advection_reference_1d(ref0, float(cfg["dt"]), int(cfg["steps"])) * f0_amp

    _write_csv(out / "profiles.csv", ["run", "L", "diffusion", "z", "max_phi", "f0"], rows)
    man.add_output(out / "profiles.csv")
    _write_csv(out / "reference.csv", ["z", "f0_ref"], list(zip(z, ref)))
    man.add_output(out / "reference.csv")
    if not args.no_plots:
        from .report import plot_translation_profiles

        plot_translation_profiles(out / "profiles.png", z, curves_max, curves_f0, ref)
        man.add_output(out / "profiles.png")
    man.write()
    return 0


# ---------------------------------------------------------------------------
# phantom


from functools import lru_cache


@lru_cache(maxsize=8)
def _gradient_set(n: int, seed: int):
    return electrostatic_directions(n, seed=seed)


def cmd_phantom(args) -> int:
    defaults = {"angle": 90.0, "alpha": 0.0, "snr": 50.0, "bD": 1.0,
                "gradients": 64, "thickness": 5.0, "grid": 24}
    cfg = _merge(defaults, _load_config(args.config), args,
                 ["angle", "alpha", "snr", "bD", "gradients", "thickness", "grid"])
    out = _outdir(args)
    man = _Manifest("phantom", cfg, args.seed, out)
    spec = PhantomSpec(
        GridSpec((int(cfg["grid"]), int(cfg["grid"]), 1)),
        float(cfg["angle"]), float(cfg["alpha"]), float(cfg["bD"]),
        float(cfg["thickness"]), float(cfg["snr"]),
    )
    grads = _gradient_set(int(cfg["gradients"]), seed=args.seed)
    signal, truths, mask = simulate_crossing(spec, grads)
    rng = np.random.default_rng(args.seed)
    noisy = add_rician(signal, 1.0 / float(cfg["snr"]), rng)

    nx, ny, nz = spec.grid.dims
    rows = []
    for gidx in range(len(grads)):
        for ix in range(nx):
            for iy in range(ny):
                for iz in range(nz):
                    rows.append((ix, iy, iz, gidx, noisy[gidx, ix, iy, iz]))
    _write_csv(out / "signal.csv", ["ix", "iy", "iz", "grad", "value"], rows)
    _write_csv(out / "gradients.csv", ["index", "x", "y", "z"],
               [(i, *v) for i, v in enumerate(grads.vectors)])
    trows = []
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                for t in truths[ix, iy, iz]:
                    trows.append((ix, iy, iz, *t))
    _write_csv(out / "truth.csv", ["ix", "iy", "iz", "x", "y", "z"], trows)
    write_shv(out / "mask.shv", scalar_field(mask))
    for name in ("signal.csv", "gradients.csv", "truth.csv", "mask.shv"):
        man.add_output(out / name)
    man.write()
    return 0


# ---------------------------------------------------------------------------
# deconvolve


def _read_signal_csv(path, n_grad, dims):
    signal = np.zeros((n_grad, *dims))
    with open(path) as fh:
        r = csv.DictReader(fh)
        for row in r:
            signal[int(row["grad"]), int(row["ix"]), int(row["iy"]), int(row["iz"])] = float(
                row["value"]
            )
    return signal


def _read_gradients_csv(path):
    vecs = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            vecs.append((float(row["x"]), float(row["y"]), float(row["z"])))
    from .fields import DirectionSet

    return DirectionSet(np.asarray(vecs))


def cmd_deconvolve(args) -> int:
    defaults = {"lambda": 0.005, "lambda_mask": 1.0, "L": 8, "cg_iterations": 100,
                "response": {"model": "exp_bd", "bD": 1.0}}
    cfg = _merge(defaults, _load_config(args.config), args, [])
    if args.lam is not None:
        cfg["lambda"] = args.lam
    if args.lam_mask is not None:
        cfg["lambda_mask"] = args.lam_mask
    if args.L is not None:
        cfg["L"] = args.L
    if args.cg_iterations is not None:
        cfg["cg_iterations"] = args.cg_iterations
    resp_cfg = cfg["response"]
    if resp_cfg.get("model") != "exp_bd":
        raise ConfigError(f"unknown response model {resp_cfg.get('model')!r}")
    out = _outdir(args)
    man = _Manifest("deconvolve", cfg, args.seed, out)
    for p in (args.signal, args.gradients, args.mask):
        man.add_input(p)
    maskf = read_shv(args.mask)
    mask = maskf.coeffs[0].real
    grads = _read_gradients_csv(args.gradients)
    signal = _read_signal_csv(args.signal, len(grads), maskf.grid.dims)
    scfg = SolverConfig(float(cfg["lambda"]), float(cfg["lambda_mask"]),
                        int(cfg["cg_iterations"]), int(cfg["L"]))
    resp = exp_response(float(resp_cfg.get("bD", 1.0)), scfg.L + 2)
    fod = solve_fod(signal, grads, resp, mask, maskf.grid, scfg)
    write_shv(out / "fod.shv", pack_real_even(fod, tol=1e-6))
    man.add_output(out / "fod.shv")
    man.write()
    return 0


# ---------------------------------------------------------------------------
# score


def _read_truth_csv(path):
    truths: dict[tuple[int, int, int], list] = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            key = (int(row["ix"]), int(row["iy"]), int(row["iz"]))
            truths.setdefault(key, []).append(
                np.array([float(row["x"]), float(row["y"]), float(row["z"])])
            )
    return truths


def _score_field(fod, truths, dirs, tolerance):
    dets_all = detect_maxima(fod, dirs)
    nx, ny, nz = fod.grid.dims
    per_voxel = []
    total = ScoreReport(0, 0, 0)
    detections = {}
    for key, tr in sorted(truths.items()):
        vox = (key[0] * ny + key[1]) * nz + key[2]
        dets = dets_all[vox]
        rep = match_and_score(dets, tr, tolerance)
        per_voxel.append((key, rep))
        detections[key] = dets
        total = total + rep
    return per_voxel, total, detections


def cmd_score(args) -> int:
    out = _outdir(args)
    cfg = {"dirs": int(args.dirs), "tolerance": float(args.tolerance)}
    man = _Manifest("score", cfg, args.seed, out)
    man.add_input(args.fod)
    man.add_input(args.truth)
    obj = read_shv(args.fod)
    fod = unpack_real_even(obj) if hasattr(obj, "data") else obj
    truths = _read_truth_csv(args.truth)
    dirs = electrostatic_directions(int(args.dirs), seed=args.seed)
    per_voxel, total, detections = _score_field(fod, truths, dirs, float(args.tolerance))
    _write_csv(
        out / "score_voxels.csv",
        ["ix", "iy", "iz", "tp", "fp", "fn", "precision", "recall", "fscore"],
        [(k[0], k[1], k[2], r.tp, r.fp, r.fn, r.precision, r.recall, r.fscore)
         for k, r in per_voxel],
    )
    _write_csv(
        out / "score_total.csv",
        ["tp", "fp", "fn", "precision", "recall", "fscore"],
        [(total.tp, total.fp, total.fn, total.precision, total.recall, total.fscore)],
    )
    drows = []
    for key, dets in sorted(detections.items()):
        for d in dets:
            theta = np.degrees(np.arccos(np.clip(d.direction[2], -1, 1)))
            phi = np.degrees(np.arctan2(d.direction[1], d.direction[0])) % 360.0
            drows.append((key[0], key[1], key[2], *d.direction, d.value, phi, theta))
    _write_csv(out / "detections.csv",
               ["ix", "iy", "iz", "x", "y", "z", "value", "phi_deg", "theta_deg"], drows)
    for name in ("score_voxels.csv", "score_total.csv", "detections.csv"):
        man.add_output(out / name)
    if not args.no_plots and drows:
        from .report import plot_detection_scatter

        tangles = []
        for tr in truths.values():
            for t in tr:
                tangles.append((np.degrees(np.arctan2(t[1], t[0])) % 360.0,
                                np.degrees(np.arccos(np.clip(t[2], -1, 1)))))
        plot_detection_scatter(out / "scatter.png",
                               [(r[7], r[8]) for r in drows], sorted(set(tangles)))
        man.add_output(out / "scatter.png")
    man.write()
    print(f"precision {total.precision:.4f}  recall {total.recall:.4f}  "
          f"f-score {total.fscore:.4f}")
    return 0


# ---------------------------------------------------------------------------
# experiment-crossing


def _run_repetition(payload):
    (angle, alpha, rep_seed, snr, bD, n_grad, L, lam, lam_mask, iters, tol, dirs_n) = payload
    grads = _gradient_set(n_grad, seed=0)
    spec = PhantomSpec(crossing_angle_deg=angle, absolute_angle_deg=alpha, bD=bD, snr=snr)
    signal, truths, mask = simulate_crossing(spec, grads)
    rng = np.random.default_rng(rep_seed)
    noisy = add_rician(signal, 1.0 / snr, rng)
    scfg = SolverConfig(lam, lam_mask, iters, L)
    resp = exp_response(bD, L + 2)
    fod = solve_fod(noisy, grads, resp, mask, spec.grid, scfg)
    dirs = _gradient_set(dirs_n, 0)
    tmap = {}
    nx, ny, nz = spec.grid.dims
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                if truths[ix, iy, iz]:
                    tmap[(ix, iy, iz)] = truths[ix, iy, iz]
    _, total, _ = _score_field(fod, tmap, dirs, tol)
    return angle, alpha, total.tp, total.fp, total.fn


def _parse_angles(text: str):
    if ":" in text:
        a, step, b = (float(x) for x in text.split(":"))
        n = int(round((b - a) / step)) + 1
        return [a + k * step for k in range(n)]
    return [float(x) for x in text.split(",") if x]


def cmd_experiment_crossing(args) -> int:
    defaults = {"angles": "30:5:90", "alphas": "0,15,30,45,60", "reps": 100,
                "snr": 50.0, "bD": 1.0, "gradients": 64, "L": 8, "lambda": 0.005,
                "lambda_mask": 1.0, "cg_iterations": 100, "tolerance": 10.0,
                "dirs": 512}
    cfg = _merge(defaults, _load_config(args.config), args,
                 ["angles", "alphas", "reps", "snr", "gradients", "dirs"])
    out = _outdir(args)
    man = _Manifest("experiment-crossing", cfg, args.seed, out)
    angles = _parse_angles(str(cfg["angles"]))
    alphas = [float(x) for x in str(cfg["alphas"]).split(",") if x != ""]
    reps = int(cfg["reps"])
    seeds = np.random.SeedSequence(args.seed).spawn(len(angles) * len(alphas) * reps)
    payloads = []
    i = 0
    for angle in angles:
        for alpha in alphas:
            for _ in range(reps):
                payloads.append((angle, alpha, seeds[i], float(cfg["snr"]),
                                 float(cfg["bD"]), int(cfg["gradients"]), int(cfg["L"]),
                                 float(cfg["lambda"]), float(cfg["lambda_mask"]),
                                 int(cfg["cg_iterations"]), float(cfg["tolerance"]),
                                 int(cfg["dirs"])))
                i += 1
    workers = int(os.environ.get("SE3H_THREADS", "0")) or (os.cpu_count() or 1)
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_repetition, payloads, chunksize=1))
    else:
        results = [_run_repetition(p) for p in payloads]

    detail = [(a, al, tp, fp, fn) for a, al, tp, fp, fn in results]
    _write_csv(out / "repetitions.csv", ["angle", "alpha", "tp", "fp", "fn"], detail)
    agg_rows = []
    for angle in angles:
        for alpha in alphas:
            reports = [ScoreReport(tp, fp, fn) for a, al, tp, fp, fn in results
                       if a == angle and al == alpha]
            fscores = [r.fscore for r in reports]
            precisions = [r.precision for r in reports]
            recalls = [r.recall for r in reports]
            agg_rows.append({"angle": angle, "alpha": alpha,
                             "precision": float(np.mean(precisions)),
                             "recall": float(np.mean(recalls)),
                             "fscore": float(np.mean(fscores)),
                             "fscore_std": float(np.std(fscores))})
    _write_csv(out / "scores.csv", ["angle", "alpha", "precision", "recall",
                                    "fscore", "fscore_std"],
               [(r["angle"], r["alpha"], r["precision"], r["recall"], r["fscore"],
                 r["fscore_std"]) for r in agg_rows])
    man.add_output(out / "repetitions.csv")
    man.add_output(out / "scores.csv")
    if not args.no_plots:
        from .report import plot_crossing_scores

        plot_crossing_scores(out / "scores.png", agg_rows)
        man.add_output(out / "scores.png")
    man.write()
    return 0


# ---------------------------------------------------------------------------
# hough


def cmd_hough(args) -> int:
    defaults = {"L": 4, "drho": 0.1, "rho_max": 10.0, "orientation": "inward",
                "diffusion_eps": 0.1, "sigma": 1.0, "min_score": 0.0,
                "nms_radius": 4.0, "record_stride": 0.5}
    cfg = _merge(defaults, _load_config(args.config), args,
                 ["L", "drho", "rho_max", "orientation", "diffusion_eps", "sigma",
                  "min_score", "nms_radius", "record_stride"])
    out = _outdir(args)
    man = _Manifest("hough", cfg, args.seed, out)
    man.add_input(args.input)
    vol_field = read_shv(args.input)
    if vol_field.L != 0:
        raise ConfigError("hough expects a scalar (L=0) SHV volume")
    vol = vol_field.coeffs[0].real
    hcfg = HoughConfig(int(cfg["L"]), float(cfg["drho"]), float(cfg["rho_max"]),
                       str(cfg["orientation"]), float(cfg["diffusion_eps"]),
                       float(cfg["sigma"]), float(cfg["record_stride"]))
    smoothed = gaussian_smooth(vol, hcfg.sigma)
    gf = gradient_field(smoothed)
    h0 = init_hough(gf, hcfg.L, vol_field.grid.voxel_size)
    rhos, stack = hough_transform(h0, hcfg)
    for rho, vmap in zip(rhos, stack):
        p = out / f"voting_rho_{rho:05.2f}.shv"
        write_shv(p, scalar_field(vmap))
        man.add_output(p)
    if cfg["min_score"]:
        min_score = float(cfg["min_score"])
    else:
        min_score = 0.5 * float(stack[rhos >= 1.0].max()) if (rhos >= 1.0).any() else 0.0
    centers = find_centers(rhos, stack, min_score, float(cfg["nms_radius"]))
    _write_csv(out / "detections.csv", ["x", "y", "z", "rho", "score"],
               [(idx[0], idx[1], idx[2], rho, score) for idx, rho, score in centers])
    man.add_output(out / "detections.csv")
    if not args.no_plots:
        from .report import plot_voting_maps

        plot_voting_maps(out / "voting.png", rhos, stack)
        man.add_output(out / "voting.png")
    man.write()
    return 0


def cmd_render_toy(args) -> int:
    defaults = {"dims": 32, "radius": 7.0, "keep_fraction": 0.5, "noise": 0.3,
                "rotate_deg": 0.0}
    cfg = _merge(defaults, _load_config(args.config), args,
                 ["dims", "radius", "keep_fraction", "noise", "rotate_deg"])
    out = _outdir(args)
    man = _Manifest("render-toy", cfg, args.seed, out)
    rot = None
    if cfg["rotate_deg"]:
        t = np.deg2rad(float(cfg["rotate_deg"]))
        c, s = np.cos(t), np.sin(t)
        axis = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        rot = np.eye(3) + s * K + (1 - c) * (K @ K)
    vol, center = render_shell_phantom(
        (int(cfg["dims"]),) * 3, None, float(cfg["radius"]),
        float(cfg["keep_fraction"]), float(cfg["noise"]), rot, args.seed)
    write_shv(out / "toy.shv", scalar_field(vol))
    with open(out / "toy_truth.json", "w") as fh:
        json.dump({"center": list(center), "radius": float(cfg["radius"])}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    man.add_output(out / "toy.shv")
    man.add_output(out / "toy_truth.json")
    man.write()
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="se3harm",
                                description="Harmonic-space transport/diffusion "
                                            "experiments on R^3 x S2")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, outdir=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--no-plots", action="store_true")
        if outdir:
            sp.add_argument("--outdir", required=True)

    sp = sub.add_parser("info", help="print SHV header")
    sp.add_argument("file")
    sp.set_defaults(fn=cmd_info)

    sp = sub.add_parser("translate-test", help="pulse transport experiment")
    common(sp)
    sp.add_argument("--L", type=int)
    sp.add_argument("--l-sweep", dest="l_sweep", help="e.g. 4,8,12")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--diffusion", type=float)
    sp.add_argument("--dirs", type=int)
    sp.add_argument("--snapshot-stride", dest="snapshot_stride", type=int)
    sp.set_defaults(fn=cmd_translate_test)

    sp = sub.add_parser("phantom", help="simulate the crossing phantom")
    common(sp)
    sp.add_argument("--angle", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--snr", type=float)
    sp.add_argument("--bD", type=float)
    sp.add_argument("--gradients", type=int)
    sp.add_argument("--thickness", type=float)
    sp.add_argument("--grid", type=int)
    sp.set_defaults(fn=cmd_phantom)

    sp = sub.add_parser("deconvolve", help="regularized spherical deconvolution")
    common(sp)
    sp.add_argument("--signal", required=True)
    sp.add_argument("--gradients", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--lambda-mask", dest="lam_mask", type=float)
    sp.add_argument("--L", type=int)
    sp.add_argument("--cg-iterations", dest="cg_iterations", type=int)
    sp.set_defaults(fn=cmd_deconvolve)

    sp = sub.add_parser("score", help="score an FOD against ground truth")
    common(sp)
    sp.add_argument("--fod", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--dirs", type=int, default=512)
    sp.add_argument("--tolerance", type=float, default=10.0)
    sp.set_defaults(fn=cmd_score)

    sp = sub.add_parser("experiment-crossing", help="angle/pose sweep with repetitions")
    common(sp)
    sp.add_argument("--angles")
    sp.add_argument("--alphas")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--snr", type=float)
    sp.add_argument("--gradients", type=int)
    sp.add_argument("--dirs", type=int)
    sp.set_defaults(fn=cmd_experiment_crossing)

    sp = sub.add_parser("hough", help="spherical Hough transform")
    common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--L", type=int)
    sp.add_argument("--drho", type=float)
    sp.add_argument("--rho-max", dest="rho_max", type=float)
    sp.add_argument("--orientation", choices=["inward", "outward"])
    sp.add_argument("--diffusion-eps", dest="diffusion_eps", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--min-score", dest="min_score", type=float)
    sp.add_argument("--nms-radius", dest="nms_radius", type=float)
    sp.add_argument("--record-stride", dest="record_stride", type=float)
    sp.set_defaults(fn=cmd_hough)

    sp = sub.add_parser("render-toy", help="synthesize the shell phantom")
    common(sp)
    sp.add_argument("--dims", type=int)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--keep-fraction", dest="keep_fraction", type=float)
    sp.add_argument("--noise", type=float)
    sp.add_argument("--rotate-deg", dest="rotate_deg", type=float)
    sp.set_defaults(fn=cmd_render_toy)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DivergenceError, CGDivergence) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
