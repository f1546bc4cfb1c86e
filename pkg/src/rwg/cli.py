"""Command-line driver: ``rwg <subcommand> [--config FILE] [--out DIR] ...``.

Exit codes: 0 success, 2 validation error (bad config, flag or input),
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .asymptotics import AsymptoticsError, asymptotic_peak, write_asymptotic_csv
from .comparison import CONDITIONING_FLOOR, compare, ill_conditioned, write_report_csv, write_report_json
from .constants import ConstantsError, FemOptions, TunnelingConstants, compute_constants
from .fem import FemError, FemSolution, assemble, solve_eigen
from .geometry import (GeometryError, WaveguideGeometry, build_halfstrip, build_omega, build_resonator,
                       build_waveguide)
from .mesh import MeshError, triangulate, write_mesh
from .modes import ModeError, mode_basis, threshold
from .peaks import NumericsOptions, PeakError, SweepError, find_peak, sweep_transmission, write_sweep_csv
from .scattering import ScatteringError, default_R_trunc, transmission

log = logging.getLogger("rwg")

SCHEMA = "rwg-1"
VALIDATION_ERRORS = (GeometryError, ModeError, SweepError, AsymptoticsError)
NUMERICAL_ERRORS = (FemError, MeshError, ConstantsError, PeakError, ScatteringError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    geometry: WaveguideGeometry = field(default_factory=WaveguideGeometry)
    numerics: NumericsOptions = field(default_factory=NumericsOptions)
    constants: FemOptions = field(default_factory=FemOptions)
    R_list: list = field(default_factory=lambda: [4.0, 6.0, 8.0])
    heights: list = field(default_factory=lambda: [0.2, 0.5, 0.7])
    eps_list: list = field(default_factory=lambda: [0.25, 0.3, 0.35, 0.4])
    tol: float = 1e-3
    conditioning_floor: float = CONDITIONING_FLOOR

    def to_dict(self) -> dict:
        c = asdict(self.constants)
        c["n_samples"] = list(c["n_samples"])
        c["window"] = list(c["window"])
        return {"schema": SCHEMA, "geometry": asdict(self.geometry), "numerics": asdict(self.numerics),
                "constants": c, "R_list": self.R_list, "heights": self.heights, "eps_list": self.eps_list,
                "tol": self.tol, "conditioning_floor": self.conditioning_floor}

    def refined(self, n: int) -> "Config":
        """Halve every mesh size ``n`` times."""
        f = 0.5 ** n
        num = NumericsOptions(**{**asdict(self.numerics), "h_max": self.numerics.h_max * f})
        return Config(self.geometry, num, self.constants.refined(f), self.R_list, self.heights, self.eps_list,
                      self.tol, self.conditioning_floor)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"'{where}' must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in '{where}': {sorted(unknown)}")
    data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**data)


def load_config(path: str | None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be '{SCHEMA}', got {raw.get('schema')!r}")
    allowed = {"schema", "geometry", "numerics", "constants", "R_list", "heights", "eps_list", "tol",
               "conditioning_floor"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = Config(
        geometry=_build(WaveguideGeometry, raw.get("geometry", {}), "geometry"),
        numerics=_build(NumericsOptions, raw.get("numerics", {}), "numerics"),
        constants=_build(FemOptions, raw.get("constants", {}), "constants"),
    )
    for key in ("R_list", "heights", "eps_list"):
        if key in raw:
            setattr(cfg, key, [float(v) for v in raw[key]])
    for key in ("tol", "conditioning_floor"):
        if key in raw:
            setattr(cfg, key, float(raw[key]))
    cfg.geometry.validate()
    for h in cfg.heights:
        if not 0 < h < 1:
            raise ConfigError(f"heights must lie in (0, 1), got {h}")
    return cfg


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid(text: str) -> list[float]:
    """``lo:hi:n`` (inclusive, n points) or a comma list."""
    if ":" in text:
        try:
            lo, hi, n = text.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}") from exc
    return _floats(text)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_solution_csv(path: Path, sol: FemSolution) -> None:
    """Vertex values: ``node_index, x, y, re, im``."""
    nodes = sol.space.mesh.nodes
    vals = np.asarray(sol.values[: len(nodes)], dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_index", "x", "y", "re", "im"])
        for i, ((x, y), v) in enumerate(zip(nodes, vals)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])


def _constants(cfg: Config, args) -> TunnelingConstants:
    if getattr(args, "constants", None):
        p = Path(args.constants)
        if not p.is_file():
            raise ConfigError(f"constants file not found: {p}")
        return TunnelingConstants.from_json(p.read_text())
    return compute_constants(cfg.geometry, cfg.constants, cfg.R_list)


def cmd_mesh(cfg: Config, args, out: Path) -> None:
    g = cfg.geometry
    # truncation sized for the middle of the one-mode window
    R = cfg.numerics.R_trunc or default_R_trunc(g.l, 0.5 * (threshold(1, g.l) + threshold(2, g.l)))
    h = cfg.numerics.h_max
    items = {
        "waveguide": (build_waveguide(g, R, h), [(0.0, 0.0), (g.d, 0.0)]),
        "resonator": (build_resonator(g), None),
        "halfstrip": (build_halfstrip(g, R), None),
        "omega": (build_omega(g.r0, g.omega, cfg.R_list[0], cfg.constants.omega_h_max), [(0.0, 0.0)]),
    }
    summary = {}
    for name, (b, extra) in items.items():
        hm = cfg.constants.omega_h_max if name == "omega" else h
        m = triangulate(b, hm, cfg.numerics.gamma_mesh, r_ref=max(g.l, g.r0) if name == "omega" else g.l,
                        extra_corners=extra)
        write_mesh(m, out / f"{name}.mesh")
        summary[name] = {"nodes": int(len(m.nodes)), "triangles": int(len(m.triangles)), "h_max": hm}
    _write_json(out / "mesh_summary.json", summary)


def cmd_eigen(cfg: Config, args, out: Path) -> None:
    g = cfg.geometry
    m = triangulate(build_resonator(g), cfg.constants.h_max, cfg.constants.gamma_mesh, r_ref=g.l)
    forms = assemble(m, cfg.constants.order)
    pairs = solve_eigen(forms, args.n)
    with open(out / "eigen.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "k_sq", "residual"])
        for i, p in enumerate(pairs):
            w.writerow([i, repr(p.eigenvalue), repr(p.residual)])
    write_solution_csv(out / "eigenfunction.csv", pairs[0].eigenfunction)


def cmd_constants(cfg: Config, args, out: Path) -> None:
    c = compute_constants(cfg.geometry, cfg.constants, cfg.R_list, mesh_check=args.mesh_check)
    (out / "constants.json").write_text(c.to_json())


def cmd_scatter(cfg: Config, args, out: Path) -> None:
    if args.k2 is None or len(args.k2) != 1:
        raise ConfigError("scatter needs exactly one --k2 value")
    k_sq = args.k2[0]
    g = cfg.geometry.with_epsilon(args.eps[0]) if args.eps else cfg.geometry
    basis = mode_basis(g.l, k_sq)
    model = cfg.numerics.model(g, k_sq)
    S = model.scattering_matrix(k_sq)
    R, T = transmission(S)
    _write_json(out / "scatter.json", {
        "k_sq": k_sq, "epsilon": g.epsilon, "M": S.M, "R": R, "T": T,
        "s_re": S.s.real.tolist(), "s_im": S.s.imag.tolist(),
        "unitarity_defect": S.unitarity_defect, "symmetry_defect": S.symmetry_defect,
        "R_trunc": S.R_trunc, "h_max": S.h_max, "n_dofs": model.forms.space.n_dofs,
    })
    # field of the wave incident in mode 1 from the left
    vpm = model.radiation_solutions(basis, -basis.nus[0])
    u = vpm.plus[0] + sum(S.s[0, j] * vpm.minus[j] for j in range(2 * S.M))
    write_solution_csv(out / "solution.csv", FemSolution(model.forms.space, u, k_sq))


def cmd_sweep(cfg: Config, args, out: Path) -> None:
    from .plotting import plot_sweep

    if not args.k2:
        raise ConfigError("sweep needs --k2 lo:hi:n or a comma list")
    g = cfg.geometry.with_epsilon(args.eps[0]) if args.eps else cfg.geometry
    from .peaks import check_one_mode_grid

    check_one_mode_grid(args.k2, g.l)
    model = cfg.numerics.model(g, max(args.k2))
    rows = sweep_transmission(model, args.k2)
    write_sweep_csv(out / "sweep.csv", rows)
    plot_sweep(rows, out / "sweep.png")


def cmd_peak(cfg: Config, args, out: Path) -> None:
    from .plotting import plot_peak

    consts = _constants(cfg, args)
    (out / "constants.json").write_text(consts.to_json())
    heights = args.h_list or cfg.heights
    result = []
    for eps in (args.eps or [cfg.geometry.epsilon]):
        a = asymptotic_peak(consts, eps)
        if ill_conditioned(a, cfg.conditioning_floor):
            result.append({"epsilon": eps, "flag": "ill-conditioned; skipped"})
            continue
        peak = find_peak(cfg.geometry.with_epsilon(eps), a.k_res_sq_a, a.width_half, heights, cfg.numerics,
                         cfg.tol, k_sq_ref=consts.k0_sq)
        d = peak.to_dict()
        d["samples"] = peak.samples
        d["k_res_sq_a"] = a.k_res_sq_a
        d["upsilon_a"] = a.width_half
        result.append(d)
        plot_peak(peak, out / f"peak_eps{eps:g}.png", a)
    _write_json(out / "peak.json", result)


def cmd_compare(cfg: Config, args, out: Path) -> None:
    from .plotting import plot_comparison, plot_peak

    consts = _constants(cfg, args)
    (out / "constants.json").write_text(consts.to_json())
    eps_list = args.eps or cfg.eps_list
    heights = args.h_list or cfg.heights
    write_asymptotic_csv(out / "asymptotic.csv", [asymptotic_peak(consts, e) for e in sorted(eps_list)], heights)
    rep = compare(cfg.geometry, consts, eps_list, heights, cfg.numerics, cfg.tol, cfg.conditioning_floor)
    write_report_csv(out / "report.csv", rep)
    write_report_json(out / "report.json", rep)
    plot_comparison(rep, out)
    for r in rep.good_rows():
        plot_peak(r.peak, out / f"peak_eps{r.epsilon:g}.png", asymptotic_peak(consts, r.epsilon))


COMMANDS = {
    "mesh": (cmd_mesh, "write the waveguide and limit-domain meshes"),
    "eigen": (cmd_eigen, "Dirichlet spectrum of the resonator"),
    "constants": (cmd_constants, "limit constants as JSON"),
    "scatter": (cmd_scatter, "scattering matrix at one k^2"),
    "sweep": (cmd_sweep, "transmission over a k^2 grid"),
    "peak": (cmd_peak, "locate the resonance peak for given epsilons"),
    "compare": (cmd_compare, "asymptotic versus numerical resonance report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (schema rwg-1); defaults apply when omitted")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--eps", type=_floats, help="comma-separated epsilon values")
    common.add_argument("--k2", type=_grid, help="k^2 value, comma list, or lo:hi:n")
    common.add_argument("--h-list", type=_floats, help="comma-separated heights in (0, 1)")
    common.add_argument("--refine", type=int, default=0, metavar="N", help="halve all mesh sizes N times")
    common.add_argument("--constants", help="reuse a constants JSON instead of recomputing")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="rwg", description="Resonant tunnelling in a waveguide with two narrows.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "eigen":
            p.add_argument("--n", type=int, default=4, help="number of eigenvalues")
        if name == "constants":
            p.add_argument("--mesh-check", action="store_true", help="repeat on a halved mesh and record deltas")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.refine < 0:
            raise ConfigError("--refine must be non-negative")
        if args.h_list:
            for h in args.h_list:
                if not 0 < h < 1:
                    raise ConfigError(f"heights must lie in (0, 1), got {h}")
        cfg = load_config(args.config)
        if args.refine:
            cfg = cfg.refined(args.refine)
        if args.eps:
            for e in args.eps:
                cfg.geometry.with_epsilon(e).validate()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", cfg.to_dict())
        COMMANDS[args.command][0](cfg, args, out)
    except (ConfigError, *VALIDATION_ERRORS, TypeError) as exc:
        print(f"rwg: error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"rwg: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
