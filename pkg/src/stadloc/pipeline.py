"""Stage orchestration for the CLI: work items, manifests and resume.

Layout: ``<out>/<run_id>/<stage>/`` with a ``manifest.json`` per stage and one
run manifest at ``<out>/<run_id>/manifest.json``. Manifests are rewritten
atomically after every work item, so an interrupted stage leaves a partial
manifest with ``complete: false``.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .config import RunConfig
from .errors import (ConfigError, DegenerateSpan, InputError, NonConvergence, SampleExceedsA0,
                     StadlocError, TooFewLevels, WindowTooLarge)
from .eigensolver import SpectrumWindow, solve_range, weyl_count
from .fitting import beta_moments, fit_beta, fit_rational, fit_sigma_curve, write_beta_table
from .geometry import StadiumShape
from .husimi import husimi_grid
from .io import (read_bndf, read_csv, read_json, read_levels, sha256, write_bndf, write_csv, write_husg,
                 write_json, write_levels)
from .localization import (block_average, distribution, entropy_measure, read_records, windowed_stats,
                           write_distribution, write_records)
from .spectral import fit_brody, unfold, write_brody_table
from .transport import CRITERIA, alpha, diffuse, loglog_slope, write_curve

log = logging.getLogger("stadloc")

STAGES = ("transport", "solve", "husimi", "localize", "fit")
WEYL_TOLERANCE = 2.0
MAX_COLLISIONS = 2 ** 21


@dataclass(frozen=True)
class Cell:
    """One (epsilon, k-window) work item."""

    epsilon: float
    k_lo: float
    k_hi: float
    n_states: int | None
    key: str


def cells(cfg: RunConfig):
    out = []
    for eps in cfg.epsilons:
        for c, hw in cfg.windows:
            out.append(Cell(float(eps), c - hw, c + hw, None, f"eps{eps:g}_k{c:g}"))
        for k0 in cfg.k0:
            out.append(Cell(float(eps), float(k0), _weyl_upper(eps, k0, cfg.states_per_window), cfg.states_per_window,
                            f"eps{eps:g}_k{k0:g}"))
    return out


def _weyl_upper(eps, k0, n):
    """A wavenumber whose Weyl window above ``k0`` holds ``n`` states plus a margin."""
    shape = StadiumShape(eps)
    target = weyl_count(shape, k0) + 1.05 * n + 5
    hi = 2 * k0 + 10
    while weyl_count(shape, hi) < target:
        hi *= 2
    return float(brentq(lambda k: weyl_count(shape, k) - target, k0, hi, xtol=1e-10))


def _cell_dict(cell: Cell):
    return asdict(cell)


# work items; top level so a process pool can pickle them
def _solve_item(args):
    cfg, cell, d = args
    cell = Cell(**cell)
    shape = StadiumShape(cell.epsilon)
    opts = RunConfig(**cfg).scaling_options()
    hi = cell.k_hi
    while True:
        win, funcs = solve_range(shape, cell.k_lo, hi, opts)
        if cell.n_states is None or len(win) >= cell.n_states:
            break
        hi = cell.k_lo + 1.25 * (hi - cell.k_lo)  # Weyl margin was not enough
    expected = float(weyl_count(shape, hi) - weyl_count(shape, cell.k_lo))
    audit = {"k_lo": cell.k_lo, "k_hi": hi, "count": len(win), "weyl": expected,
             "deviation": len(win) - expected, "flagged": abs(len(win) - expected) > WEYL_TOLERANCE}
    if cell.n_states is not None:
        n = cell.n_states
        top = win.levels[n - 1] if len(win) == n else 0.5 * (win.levels[n - 1] + win.levels[n])
        win = SpectrumWindow(win.epsilon, win.k_lo, float(top), win.levels[:n], win.method,
                             window_ids=win.window_ids[:n], meta=win.meta)
        funcs = funcs[:n]
    d = Path(d)
    lv = write_levels(d / f"levels_{cell.key}.csv", win)
    bf = write_bndf(d / f"bndf_{cell.key}.bndf", funcs)
    side = write_json(d / f"bndf_{cell.key}.json", {
        "epsilon": cell.epsilon, "k_lo": win.k_lo, "k_hi": win.k_hi, "count": len(win),
        "solver": "scaling", "options": asdict(opts), "windows": win.meta.get("windows"),
        "weyl_audit": audit, "spreads": [f.meta.get("spread") for f in funcs],
    })
    return [lv.name, bf.name, side.name], (["weyl audit flagged for " + cell.key] if audit["flagged"] else [])


def _husimi_item(args):
    cfg, cell, d, src = args
    cell = Cell(**cell)
    funcs = read_bndf(Path(src) / f"bndf_{cell.key}.bndf", cell.epsilon)
    nq, np_ = cfg["grid"]
    names = []
    for i in cfg["husimi_states"]:
        if not -len(funcs) <= i < len(funcs):
            continue
        idx = i % len(funcs)
        g = husimi_grid(funcs[idx], nq, np_)
        p = write_husg(Path(d) / f"{cell.key}_s{idx}.husg", g)
        q = write_json(p.with_suffix(".json"), {
            "epsilon": cell.epsilon, "k": g.k, "state_index": idx, "grid": [nq, np_],
            "p_range": g.p_range, "images": g.meta["images"], "samples": g.meta["samples"],
            "source": f"solve/bndf_{cell.key}.bndf",
        })
        names += [p.name, q.name]
    return names, []


def _localize_item(args):
    cfg, cell, d, src = args
    cell = Cell(**cell)
    funcs = read_bndf(Path(src) / f"bndf_{cell.key}.bndf", cell.epsilon)
    nq, np_ = cfg["grid"]
    recs = [entropy_measure(husimi_grid(f, nq, np_)) for f in funcs]
    return [write_records(Path(d) / f"records_{cell.key}.csv", recs).name], []


class Stage:
    """Runs work items of one stage and keeps its manifest current."""

    def __init__(self, run: "Run", name: str):
        self.run = run
        self.name = name
        self.dir = run.root / name
        self.path = self.dir / "manifest.json"
        self.items = {}
        self.files = {}
        self.notes = []
        self.started = datetime.now(timezone.utc).isoformat()
        self.t0 = time.perf_counter()
        self.prior = self._load()

    def _load(self):
        if not self.path.exists():
            return None
        try:
            m = read_json(self.path)
        except (OSError, ValueError):
            return None
        return m if m.get("config_digest") == self.run.digest else None

    def verified(self, files) -> bool:
        return all((self.dir / f).is_file() and sha256(self.dir / f) == h for f, h in files.items())

    def is_complete(self) -> bool:
        return bool(self.prior and self.prior.get("complete") and self.verified(self.prior["files"]))

    def manifest(self, complete: bool, error: str | None = None) -> dict:
        return {
            "tool": "stadloc", "version": __version__, "stage": self.name,
            "config": self.run.cfg.snapshot(), "config_digest": self.run.digest,
            "started": self.started, "seconds": time.perf_counter() - self.t0,
            "complete": complete, "error": error, "notes": self.notes,
            "items": self.items, "files": dict(sorted(self.files.items())),
        }

    def save(self, complete=False, error=None):
        write_json(self.path, self.manifest(complete, error))

    def add(self, *paths):
        for p in paths:
            p = Path(p)
            self.files[p.name] = sha256(p)

    def note(self, msg):
        log.warning("%s: %s", self.name, msg)
        self.notes.append(msg)

    def reuse(self, key) -> bool:
        if not (self.run.resume and self.prior):
            return False
        files = self.prior.get("items", {}).get(key)
        if files is None or not self.verified(files):
            return False
        self.items[key] = files
        self.files.update(files)
        return True

    def map(self, fn, work):
        """Run ``fn`` over ``(key, args)`` pairs; results are recorded in input order."""
        pending = [(k, a) for k, a in work if not self.reuse(k)]
        if pending and self.run.jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=self.run.jobs) as ex:
                results = ex.map(fn, [a for _, a in pending])
                for (key, _), res in zip(pending, results):
                    self._record(key, res)
        else:
            for key, args in pending:
                self._record(key, fn(args))

    def _record(self, key, res):
        names, notes = res
        files = {n: sha256(self.dir / n) for n in names}
        self.items[key] = files
        self.files.update(files)
        for n in notes:
            self.note(n)
        log.info("%s: %s done", self.name, key)
        self.save()


class Run:
    def __init__(self, cfg: RunConfig, resume: bool = False, force: bool = False):
        self.cfg = cfg
        self.resume = resume
        self.force = force
        self.jobs = cfg.jobs
        self.root = Path(cfg.out) / cfg.run_id
        self.digest = cfg.digest()
        self.cells = cells(cfg)
        self.status = {}

    def _args(self, cell, *extra):
        return (self.cfg.snapshot(), _cell_dict(cell), *map(str, extra))

    def stage(self, name: str) -> dict:
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}")
        st = Stage(self, name)
        if not self.force and st.is_complete():
            log.info("%s: complete and verified, skipped", name)
            self.status[name] = {"complete": True, "skipped": True, "seconds": 0.0}
            return self.status[name]
        st.dir.mkdir(parents=True, exist_ok=True)
        st.save()
        try:
            getattr(self, "_" + name)(st)
        except StadlocError as exc:
            st.save(False, f"{type(exc).__name__}: {exc}")
            self.status[name] = {"complete": False, "skipped": False, "error": str(exc)}
            raise
        st.save(True)
        self.status[name] = {"complete": True, "skipped": False, "seconds": time.perf_counter() - st.t0}
        return self.status[name]

    def pipeline(self):
        for name in STAGES:
            self.stage(name)

    def write_manifest(self):
        files = {}
        for name in STAGES:
            m = self.root / name / "manifest.json"
            if m.exists():
                files[f"{name}/manifest.json"] = sha256(m)
        complete = bool(self.status) and all(s.get("complete") for s in self.status.values())
        write_json(self.root / "manifest.json", {
            "tool": "stadloc", "version": __version__, "config": self.cfg.snapshot(),
            "config_digest": self.digest, "stages": self.status, "files": files, "complete": complete,
        })

    def _upstream(self, name, path) -> Path:
        p = self.root / name / path
        if not p.exists():
            raise ConfigError(f"missing {p}; run the {name} stage first")
        return p

    # stages
    def _transport(self, st: Stage):
        cfg = self.cfg
        rows, best = [], {c: [] for c in CRITERIA}
        for eps in cfg.epsilons:
            key = f"eps{eps:g}"
            if st.reuse(key):
                side = read_json(st.dir / f"curve_{key}.json")
                ests = side["criteria"]
            else:
                curve, ests = self._diffuse(float(eps))
                p = write_curve(st.dir / f"curve_{key}.csv", curve, ests.values())
                st.items[key] = {n: sha256(st.dir / n) for n in (p.name, p.with_suffix(".json").name)}
                st.files.update(st.items[key])
                st.save()
                ests = {c: {"N_T": e.N_T, "fit_residual": e.fit_residual} for c, e in ests.items()}
            for c in CRITERIA:
                rows.append((eps, c, ests[c]["N_T"], ests[c]["fit_residual"]))
                best[c].append(ests[c]["N_T"])
        st.add(write_csv(st.dir / "nt_summary.csv", ["epsilon", "criterion", "N_T", "fit_residual"], rows))
        scaling = {"epsilons": cfg.epsilons}
        if len(set(cfg.epsilons)) >= 2:
            scaling["slopes"] = {c: loglog_slope(cfg.epsilons, best[c]) for c in CRITERIA}
        else:
            st.note("one epsilon only; no scaling exponent")
        st.add(write_json(st.dir / "scaling.json", scaling))

    def _diffuse(self, eps):
        cfg = self.cfg
        return diffuse(StadiumShape(eps), cfg.n_particles, cfg.seed, cfg.jobs, cfg.n_collisions, MAX_COLLISIONS)

    def _solve(self, st: Stage):
        st.map(_solve_item, [(c.key, self._args(c, st.dir)) for c in self.cells])

    def _husimi(self, st: Stage):
        src = self._upstream("solve", "manifest.json").parent
        st.map(_husimi_item, [(c.key, self._args(c, st.dir, src)) for c in self.cells])

    def _localize(self, st: Stage):
        cfg = self.cfg
        src = self._upstream("solve", "manifest.json").parent
        st.map(_localize_item, [(c.key, self._args(c, st.dir, src)) for c in self.cells])
        n_grid = cfg.grid[0] * cfg.grid[1]
        points = []
        for c in self.cells:
            recs = read_records(st.dir / f"records_{c.key}.csv", n_grid)
            try:
                mean, sd = windowed_stats(recs, cfg.stats_window)
                A, I = block_average([r.A for r in recs], [r.nIPR for r in recs], cfg.stats_window)
                st.add(write_csv(st.dir / f"stats_{c.key}.csv", ["block", "mean_A", "sigma_A"],
                                 zip(range(mean.size), mean, sd)))
                points += [(c.key, c.epsilon, a, i) for a, i in zip(A, I)]
            except WindowTooLarge as exc:
                st.note(f"{c.key}: {exc}")
            try:
                dist = distribution(recs, cfg.A0, cfg.nbins, epsilon=c.epsilon, k0=c.k_lo)
            except SampleExceedsA0:
                raise
            except InputError as exc:
                st.note(f"{c.key}: {exc}")
                continue
            st.add(write_distribution(st.dir / f"dist_{c.key}.json", dist))
            st.add(write_csv(st.dir / f"pa_hist_{c.key}.csv", ["A_lo", "A_hi", "density"],
                             zip(dist.edges[:-1], dist.edges[1:], dist.density)))
            xs, w = dist.cumulative()
            st.add(write_csv(st.dir / f"wa_cum_{c.key}.csv", ["A", "W"], zip(xs, w)))
        st.add(write_csv(st.dir / "nipr_vs_A.csv", ["cell", "epsilon", "A", "nIPR"], points))

    def _fit(self, st: Stage):
        cfg = self.cfg
        nt = {}
        for r in read_csv(self._upstream("transport", "nt_summary.csv")):
            if r["criterion"] == cfg.criterion:
                nt[float(r["epsilon"])] = float(r["N_T"])
        loc = self._upstream("localize", "manifest.json").parent
        sol = self._upstream("solve", "manifest.json").parent
        n_grid = cfg.grid[0] * cfg.grid[1]
        beta_rows, brody_rows, cellpts = [], [], []
        for i, c in enumerate(self.cells):
            if c.epsilon not in nt:
                raise ConfigError(f"no transport time for epsilon={c.epsilon}")
            recs = read_records(loc / f"records_{c.key}.csv", n_grid)
            if not recs:
                st.note(f"{c.key}: no states")
                continue
            ks = np.array([r.k for r in recs])
            A = np.array([r.A for r in recs])
            k_mid = 0.5 * (ks.min() + ks.max())
            a_val = alpha(k_mid, nt[c.epsilon])
            seed = int(np.random.SeedSequence([cfg.seed, i]).generate_state(1)[0])
            pt = {"key": c.key, "epsilon": c.epsilon, "k0": c.k_lo, "alpha": a_val,
                  "mean_A": float(A.mean()), "sigma_A": float(A.std()), "beta": math.nan}
            try:
                bfit = fit_beta(np.minimum(A, cfg.A0 * (1 - 1e-12)), cfg.A0, cfg.bootstrap, seed,
                                min_samples=cfg.beta_min_samples)
                beta_rows.append({"epsilon": c.epsilon, "k0": c.k_lo, "alpha": a_val, "fit": bfit})
                pt["a"], pt["b"] = bfit.a, bfit.b
            except (InputError, NonConvergence) as exc:
                st.note(f"{c.key}: beta fit skipped ({exc})")
            win = read_levels(sol / f"levels_{c.key}.csv", c.epsilon)
            try:
                sp = unfold(win, i).spacings
                br = fit_brody(sp, cfg.bootstrap, seed, min_spacings=cfg.brody_min_spacings)
                brody_rows.append({"epsilon": c.epsilon, "k_lo": win.k_lo, "k_hi": win.k_hi, "fit": br,
                                   "alpha": a_val})
                pt["beta"] = br.beta
            except (TooFewLevels, NonConvergence) as exc:
                st.note(f"{c.key}: Brody fit skipped ({exc})")
            cellpts.append(pt)
        st.add(write_beta_table(st.dir / "table_beta.csv", beta_rows))
        st.add(write_brody_table(st.dir / "brody.csv", brody_rows))
        st.add(write_csv(st.dir / "ab_vs_alpha.csv", ["epsilon", "k0", "alpha", "a", "b"],
                         [(r["epsilon"], r["k0"], r["alpha"], r["fit"].a, r["fit"].b) for r in beta_rows]))
        st.add(write_csv(st.dir / "cells.csv", ["cell", "epsilon", "k0", "alpha", "mean_A", "sigma_A", "beta"],
                         [(p["key"], p["epsilon"], p["k0"], p["alpha"], p["mean_A"], p["sigma_A"], p["beta"])
                          for p in cellpts]))
        rat = []
        summary = {}
        for kind, field_ in (("A", "mean_A"), ("beta", "beta")):
            pts = [(p["alpha"], p[field_]) for p in cellpts if math.isfinite(p[field_])]
            try:
                fit = fit_rational([x for x, _ in pts], [y for _, y in pts]) if pts else None
                if fit is None:
                    raise DegenerateSpan("no points")
            except (DegenerateSpan, InputError) as exc:
                st.note(f"rational fit of {kind} skipped ({exc})")
                rat += [(kind, x, y, "", "", "") for x, y in pts]
                continue
            summary[kind] = {"limit": fit.limit, "s": fit.s, "residual": fit.residual}
            rat += [(kind, x, y, float(fit(x)), fit.limit, fit.s) for x, y in pts]
        st.add(write_csv(st.dir / "rational_fit.csv", ["kind", "alpha", "y", "fitted", "limit", "s"], rat))
        sb = [(p["beta"], p["sigma_A"]) for p in cellpts if math.isfinite(p["beta"])]
        fitted = [""] * len(sb)
        try:
            if not sb:
                raise DegenerateSpan("no Brody exponents")
            sfit = fit_sigma_curve(np.clip([b for b, _ in sb], 0, 1), [s for _, s in sb])
            fitted = [float(sfit(min(max(b, 0.0), 1.0))) for b, _ in sb]
            summary["sigma_curve"] = {"C": sfit.C, "a": sfit.a, "b": sfit.b, "residual": sfit.residual}
        except (DegenerateSpan, InputError) as exc:
            st.note(f"sigma(beta) fit skipped ({exc})")
        st.add(write_csv(st.dir / "sigma_beta.csv", ["beta", "sigma_A", "fitted"],
                         [(b, s, f) for (b, s), f in zip(sb, fitted)]))
        summary["beta_moments"] = {f"{r['epsilon']:g}_{r['k0']:g}": dict(zip(("mean", "second", "sigma"),
                                                                           beta_moments(r["fit"])))
                                   for r in beta_rows}
        st.add(write_json(st.dir / "fits.json", summary))
