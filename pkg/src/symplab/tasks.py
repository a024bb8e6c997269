"""Task pipelines behind ``symplab run``: each writes its artifacts into a directory."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import io
from .cocycle import check_r_normal, cone_dominated_check, finite_time_rates, orbit_sample
from .config import ExperimentConfig
from .errors import PreconditionError
from .gates import (
    closing_alarm, closing_curve, concatenate, first_gate_entry, fundamental_domain_check,
    homology_class, intersection_number, make_gate,
)
from .manifolds import STABLE, UNSTABLE, branch_csv_rows, detect_crossings, grow_branch
from .maps import SPHERE, TORUS, check_symplectic, make_family
from .normal_form import birkhoff_a1
from .periodic import find_periodic_points, orbit_at
from .perturbation import tune_a1

log = logging.getLogger(__name__)


def build_map(table):
    table = dict(table)
    family = table.pop("family")
    if "fiber" in table:
        table["fiber"] = dict(table["fiber"])
    return make_family(family, **table)


def _bounds(f, *point_sets):
    if f.domain_kind == TORUS:
        return ((0.0, 1.0), (0.0, 1.0))
    pts = np.vstack(point_sets)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo) + 1e-9)
    return ((lo[0] - pad, hi[0] + pad), (lo[1] - pad, hi[1] + pad))


def _period(f):
    return np.asarray(f.period, float)


def periodic_search(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    orbits = find_periodic_points(
        f, int(p["n"]), seed_grid=int(p["seed_grid"]), tol=p["tol"], m_max=int(p["m_max"]),
        tol_hyp=p["tol_hyp"], tol_res=p["tol_res"], n_max=int(p["n_max"]),
    )
    return [io.write_jsonl(out / "orbits.jsonl", orbits)]


def normal_form(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    files = []
    nf = birkhoff_a1(f, p["point"], int(p["k"]), tol_res=p["tol_res"], tol_hyp=p["tol_hyp"])
    files.append(io.write_json(out / "normal_form.json", nf))
    if p["sweep_param"]:
        name = p["sweep_param"]
        rows = []
        for value in p["sweep_values"]:
            g = build_map({**cfg.map, name: value})
            rows.append((float(value), birkhoff_a1(g, p["point"], int(p["k"]), p["tol_res"], p["tol_hyp"]).a1))
        files.append(io.write_csv(out / "a1_sweep.csv", [name, "a1"], rows))
    return files


def _orbit(f, p):
    return orbit_at(f, p["point"], int(p["k"]))


def grow(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    o = _orbit(f, p)
    b = grow_branch(f, o, p["stability"], int(p["side"]), budget=p["budget"], max_gap=p["max_gap"],
                    max_angle=p["max_angle"])
    color = io.ARC_COLOR if p["stability"] == UNSTABLE else io.STABLE_COLOR
    return [
        io.write_csv(out / "branch.csv", ["arclength", "x", "y"], branch_csv_rows(b)),
        io.write_svg(out / "branch.svg", [{"points": b.points, "color": color, "period": _period(f)}],
                     bounds=_bounds(f, b.points)),
    ]


def detect_homoclinic(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    o = _orbit(f, p)
    kw = dict(max_gap=p["max_gap"], max_angle=p["max_angle"])
    u = grow_branch(f, o, UNSTABLE, int(p["side_u"]), budget=p["budget_u"], **kw)
    s = grow_branch(f, o, STABLE, int(p["side_s"]), budget=p["budget_s"], **kw)
    crossings = detect_crossings(u, s, min_angle=p["min_angle"])
    layers = [
        {"points": u.points, "color": io.ARC_COLOR, "width": 0.5, "period": _period(f)},
        {"points": s.points, "color": io.STABLE_COLOR, "width": 0.5, "period": _period(f)},
    ]
    return [
        io.write_jsonl(out / "crossings.jsonl", crossings),
        io.write_svg(out / "branches.svg", layers, bounds=_bounds(f, u.points, s.points)),
    ]


def gates(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    o = _orbit(f, p)
    su, ss = int(p["side_u"]), int(p["side_s"])
    gate = make_gate(f, o, eps=p["eps"] or None, side_u=su, side_s=ss, rho=p["rho"])
    u = grow_branch(f, o, UNSTABLE, su, budget=p["budget"])
    s = grow_branch(f, o, STABLE, ss, budget=p["budget"])
    eu = first_gate_entry(u, gate)
    es = first_gate_entry(s, gate.rotated())
    cu = closing_curve(u, eu, gate)
    cs = closing_curve(s, es, gate.rotated())
    sweep = intersection_number(cu, cs, check=False)
    crossings = detect_crossings(u.truncated(eu.arclength), s.truncated(es.arclength))
    report = {
        "gate_eps": eu.eps,
        "class_u": homology_class(cu),
        "class_s": homology_class(cs),
        "sweep": int(sweep),
        "crossings_before_entry": len(crossings),
        "alarm": closing_alarm(crossings, sweep),
        "entries": [eu.chart_point, es.chart_point],
    }
    per = _period(f)
    layers = io.curve_layers(cu, per) + io.curve_layers(cs, per)
    for layer in layers[2:]:
        if layer["color"] == io.ARC_COLOR:
            layer["color"] = io.STABLE_COLOR
    nu, ns = report["class_u"].n, report["class_s"].n
    if f.domain_kind == TORUS and nu is not None and abs(nu[0] * ns[1] - nu[1] * ns[0]) == 1:
        g1 = concatenate(cu, cs.translated(nu), cu.translated(ns).reversed(), cs.reversed())
        dom = fundamental_domain_check(nu, ns, g1.points, samples=int(p["samples"]), seed=cfg.seed)
        report["domain"] = dom
    files = [io.write_json(out / "gates.json", report)]
    files.append(io.write_svg(out / "closing_curves.svg", layers, bounds=_bounds(f, cu.points, cs.points)))
    return files


def ph_check(cfg: ExperimentConfig, system, out: Path):
    p = cfg.params
    if getattr(system, "dim", 2) != 4:
        raise PreconditionError("ph-check needs a product system (map.family = 'product' or 'skew-standard')")
    rows, summary = [], []
    for i, x0 in enumerate(p["starts"]):
        orbit = orbit_sample(system, x0, int(p["length"]))
        rates = finite_time_rates(system, orbit, int(p["n"]))
        ok, margin = check_r_normal(rates, p["r"])
        cone = cone_dominated_check(system, orbit, p["cone_angle"])
        rows.extend(rates.csv_rows(i, p["r"]))
        summary.append({"orbit": i, "r_normal": ok, "margin": margin, "cone": cone.result,
                        "cone_margins": [cone.margin_cu, cone.margin_s],
                        "symmetry_defect": rates.symmetry_defect, "naive_overflow": rates.naive_overflow})
    return [
        io.write_csv(out / "rates.csv", ["orbit", "n", "log_nu_n_over_n", "log_gamma_n_over_n", "margin"], rows),
        io.write_json(out / "ph_check.json", summary),
    ]


def perturb_sweep(cfg: ExperimentConfig, f, out: Path):
    p = cfg.params
    base = birkhoff_a1(f, p["point"], int(p["k"])).a1
    rows = []
    for c in p["shifts"]:
        tuned = tune_a1(f, p["point"], c, int(p["k"]), radius=p["radius"] or None, mode=p["mode"])
        a1 = birkhoff_a1(tuned.map, p["point"], int(p["k"])).a1
        rep = check_symplectic(tuned.map, int(p["samples"]), seed=cfg.seed)
        rows.append((float(c), a1, a1 - base, tuned.radius, rep.max_defect))
    return [io.write_csv(out / "perturb_sweep.csv", ["c", "a1", "shift", "radius", "det_defect"], rows)]


PIPELINES = {
    "periodic-search": periodic_search,
    "normal-form": normal_form,
    "grow": grow,
    "detect-homoclinic": detect_homoclinic,
    "gates": gates,
    "ph-check": ph_check,
    "perturb-sweep": perturb_sweep,
}


def run_task(cfg: ExperimentConfig, out_dir):
    """Run one configured task and write its artifacts plus the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f = build_map(cfg.map)
    if cfg.task != "ph-check" and getattr(f, "dim", 2) != 2:
        raise PreconditionError(f"task {cfg.task} needs a surface map")
    if cfg.task == "gates" and f.domain_kind not in (TORUS, SPHERE):
        raise PreconditionError("closing gates need a torus or sphere map")
    files = PIPELINES[cfg.task](cfg, f, out)
    io.write_json(out / "config.json", {"task": cfg.task, "map": cfg.map, "params": cfg.params, "seed": cfg.seed})
    io.write_manifest(out)
    return files
