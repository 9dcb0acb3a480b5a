#!/usr/bin/env python3
"""
Command-Line Interface
Runs phi, pc-bound, pack, verify-bound and simulate with reproducible configuration

Features:
- YAML experiment files overridden by flags
- JSON result plus frozen-column CSV tables per run
- Exit codes: 0 success, 1 parameter or usage error, 2 truncation or resource
  error, 3 violation candidate
"""

import argparse
import logging
import sys
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .bound_verifier import default_grid, verify_disconnection
from .config import RunConfig, load_config_file, merge_overrides, settings
from .errors import ExactCapError, InvariantViolation, ParameterError, PercoboundError, TruncationError
from .graph_core import GraphFamily, GraphSpec, GraphView, build_view, segment
from .models import CtdMode, Method, PercolationParams, SupercriticalParams, Verdict
from .packing_certifier import PackingRequest, certify_packing
from .pc_estimator import pc_lower_bound
from .percolation_engine import disconnection_profile
from .phi_functional import ball_query, phi
from .report_writer import Table, save_report
from .workers import get_worker_pool

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARAMETER = 1
EXIT_TRUNCATION = 2
EXIT_VIOLATION = 3

# Probe views grow at most this many times while locating a vertex
MAX_PROBES = 8


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the parameter-error code"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAMETER, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_packing_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps", type=float, help="Packing parameter eps")
    parser.add_argument("--c", type=float, help="Packing parameter c")
    parser.add_argument("--dmin", type=int, help="Smallest dependency radius D")
    parser.add_argument("--dmax", type=int, help="Largest dependency radius D")
    parser.add_argument("--rproxy", type=int, help="Proxy radius for disconnection from infinity")
    parser.add_argument("--segment-length", dest="segment_length", type=int, help="Lattice segment S length")
    parser.add_argument("--spacing", type=int, help="Take every n-th vertex of S as candidate")
    parser.add_argument("--ctd-mode", dest="ctd_mode", choices=[m.value for m in CtdMode])
    parser.add_argument("--p1", type=float, help="Supercritical witness parameter p1 < p")
    parser.add_argument("--eps1", type=float, help="Supercritical witness parameter eps1")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file")
    common.add_argument("--graph", help="lattice:<d> | tree:<b> | file:<path>")
    common.add_argument("--origin", type=int, help="Origin vertex id (file graphs)")
    common.add_argument("--rmax", type=int, help="Truncation radius R_max")
    common.add_argument("--p", type=float, help="Site open probability")
    common.add_argument("--seed", type=int, help="Generator key")
    common.add_argument("--replicas", type=int, help="Monte Carlo replicas")
    common.add_argument("--confidence", type=float, help="Two-sided CI level")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--log-level", dest="log_level", help="Logging level (default from PERCOBOUND_LOG_LEVEL)")

    parser = UsageParser(
        prog="percobound",
        description="Local percolation functional, packing certificates and disconnection bounds",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=UsageParser)

    p_phi = sub.add_parser("phi", parents=[common], help="phi_p^v(B(v, r))")
    p_phi.add_argument("--ball", type=int, help="Ball radius r")
    p_phi.add_argument("--vertex", type=int, help="Center vertex v (default: origin)")
    p_phi.add_argument("--method", choices=[m.value for m in Method])
    p_phi.add_argument("--exact-cap", dest="exact_cap", type=int, help="Largest interior enumerated exactly")
    p_phi.add_argument("--endpoint-exterior", dest="endpoint_interior", action="store_const", const=False,
                       help="Let the path end on a neighbor outside S")
    p_phi.add_argument("--source-closed-ok", dest="requires_source_open", action="store_const", const=False,
                       help="Do not require v itself to be open")

    p_pc = sub.add_parser("pc-bound", parents=[common], help="Certified lower bound on p_c")
    p_pc.add_argument("--eps0", type=float, help="Required margin: phi <= 1 - eps0")
    p_pc.add_argument("--rmax-search", dest="rmax_search", type=int, help="Largest witness radius")
    p_pc.add_argument("--tolerance", type=float, help="Bisection tolerance")
    p_pc.add_argument("--vertex", dest="vertices", type=int, action="append", help="Vertex of the family (repeatable)")
    p_pc.add_argument("--method", choices=[m.value for m in Method])
    p_pc.add_argument("--exact-cap", dest="exact_cap", type=int)

    p_pack = sub.add_parser("pack", parents=[common], help="Certify a packing number")
    _add_packing_flags(p_pack)
    p_pack.add_argument("--pc", type=float, help="Threshold estimate p~_c for the analytic check")

    p_verify = sub.add_parser("verify-bound", parents=[common], help="Empirical disconnection against the bounds")
    _add_packing_flags(p_verify)
    p_verify.add_argument("--pc", type=float, help="Threshold estimate p~_c < p")
    p_verify.add_argument("--grid-p1", dest="grid_p1", type=int, help="Number of p1 grid values")
    p_verify.add_argument("--delta", dest="delta_values", type=_float_list, help="Comma-separated delta grid")
    p_verify.add_argument("--eps-grid", dest="eps_values", type=_float_list, help="Comma-separated eps grid")

    p_sim = sub.add_parser("simulate", parents=[common], help="Truncated disconnection over radii")
    p_sim.add_argument("--radii", type=_int_list, help="Comma-separated radii")
    p_sim.add_argument("--segment-length", dest="segment_length", type=int)

    return parser


# flag dest -> run config section, per subcommand
_SECTION_FLAGS: Dict[str, Dict[str, Tuple[str, ...]]] = {
    "graph": {"*": ("graph", "origin", "rmax")},
    "run": {"*": ("p", "seed", "replicas", "confidence", "out")},
    "phi": {"phi": ("ball", "vertex", "method", "exact_cap", "endpoint_interior", "requires_source_open")},
    "pc_bound": {"pc-bound": ("eps0", "rmax_search", "tolerance", "vertices", "method", "exact_cap")},
    "pack": {
        "pack": ("eps", "c", "dmin", "dmax", "rproxy", "segment_length", "spacing", "ctd_mode", "p1", "eps1", "pc"),
        "verify-bound": ("eps", "c", "dmin", "dmax", "rproxy", "segment_length", "spacing", "ctd_mode", "p1", "eps1"),
    },
    "verify_bound": {"verify-bound": ("pc", "grid_p1", "delta_values", "eps_values")},
    "simulate": {"simulate": ("radii", "segment_length")},
}


def flag_overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    overrides: Dict[str, Dict[str, Any]] = {}
    for section, by_command in _SECTION_FLAGS.items():
        keys = by_command.get("*") or by_command.get(args.subcommand) or ()
        values = {key: getattr(args, key, None) for key in keys}
        overrides[section] = {k: v for k, v in values.items() if v is not None}
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    sections = merge_overrides(load_config_file(args.config), flag_overrides(args))
    return RunConfig(subcommand=args.subcommand, **sections)


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------

def _reach(cfg: RunConfig) -> Tuple[int, List[int]]:
    """Radius needed around the origin, and vertices whose depth adds to it"""
    sub = cfg.subcommand
    if sub == "phi":
        return cfg.phi.ball, [] if cfg.phi.vertex is None else [cfg.phi.vertex]
    if sub == "pc-bound":
        return cfg.pc_bound.rmax_search, list(cfg.pc_bound.vertices)
    if sub == "simulate":
        return max([*cfg.simulate.radii, cfg.simulate.segment_length // 2 + 1]), []
    return cfg.pack.segment_length // 2 + 2 * cfg.pack.rproxy, []


def view_for(cfg: RunConfig) -> GraphView:
    """Build the truncation, deriving R_max from the subcommand when it is not given"""
    section = cfg.graph
    family = section.graph.partition(":")[0]
    if section.rmax is not None or family == GraphFamily.FILE.value:
        return build_view(GraphSpec.from_flag(section.graph, section.rmax, section.origin))

    reach, vertices = _reach(cfg)
    radius = max(reach, 1)
    for _ in range(MAX_PROBES):
        view = build_view(GraphSpec.from_flag(section.graph, radius, section.origin))
        if all(v in view.base.depth for v in vertices):
            needed = max([reach] + [view.depth(v) + reach for v in vertices])
            if needed <= radius:
                return view
            radius = needed
        else:
            radius *= 2
    raise ParameterError(f"vertices {vertices} are not within reach of the origin", constraint="vertex near origin")


def lattice_segment(view: GraphView, length: int) -> Tuple[int, ...]:
    if length == 0:
        return ()
    if length == 1:
        return (view.origin,)
    if view.spec.family != GraphFamily.LATTICE:
        raise ParameterError("segment sets need a lattice graph", constraint="lattice graph")
    return segment(view, length)


def _params(cfg: RunConfig) -> PercolationParams:
    run = cfg.run
    return PercolationParams(p=run.p, seed=run.seed, replicas=run.replicas, confidence=run.confidence)


def _supercritical(cfg: RunConfig, pc_tilde: Optional[float]) -> Optional[SupercriticalParams]:
    pack = cfg.pack
    if pack.p1 is None:
        return None
    return SupercriticalParams(p=cfg.run.p, p1=pack.p1, eps1=pack.eps1 or 0.0, eps=pack.eps, pc_tilde=pc_tilde)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

Outcome = Tuple[Any, Dict[Table, List[Dict[str, Any]]], int]


def run_phi(cfg: RunConfig) -> Outcome:
    view = view_for(cfg)
    section = cfg.phi
    v = view.origin if section.vertex is None else section.vertex
    query = ball_query(
        view, v, section.ball, Fraction(str(cfg.run.p)),
        method=Method(section.method),
        params=_params(cfg),
        exact_cap=section.exact_cap,
        endpoint_interior=section.endpoint_interior,
        requires_source_open=section.requires_source_open,
    )
    result = phi(query, get_worker_pool())
    print(f"phi = {float(result.value):.10g} ({result.method.value}, |S°|={result.interior_size})")
    return result.to_dict(), {Table.PHI: [t.to_row(result.exact) for t in result.terms]}, EXIT_OK


def run_pc_bound(cfg: RunConfig) -> Outcome:
    view = view_for(cfg)
    section = cfg.pc_bound
    bound = pc_lower_bound(
        view, section.vertices or [view.origin], section.eps0, section.rmax_search, section.tolerance,
        params=_params(cfg), method=Method(section.method), exact_cap=section.exact_cap, pool=get_worker_pool(),
    )
    print(f"p_c >= {bound.p_lower:.4f}")
    return bound.to_dict(), {Table.PC_BOUND: [e.to_row() for e in bound.evaluations]}, EXIT_OK


def run_pack(cfg: RunConfig) -> Outcome:
    view = view_for(cfg)
    pack = cfg.pack
    request = PackingRequest(
        view=view,
        S=lattice_segment(view, pack.segment_length),
        p=cfg.run.p,
        eps=pack.eps,
        c=pack.c,
        d_min=pack.dmin,
        d_max=pack.dmax,
        r_proxy=pack.rproxy,
        params=_params(cfg),
        spacing=pack.spacing,
        ctd_mode=CtdMode(pack.ctd_mode),
        supercritical=_supercritical(cfg, pack.pc),
    )
    certificate = certify_packing(request, pool=get_worker_pool())
    print(f"k = {certificate.k} (family confidence >= {certificate.family_confidence:.4f})")
    return certificate.to_dict(), {Table.PACK: [s.to_row() for s in certificate.steps]}, EXIT_OK


def run_verify_bound(cfg: RunConfig) -> Outcome:
    view = view_for(cfg)
    pack, verify = cfg.pack, cfg.verify_bound
    S = lattice_segment(view, pack.segment_length)
    grid = None
    if S:
        grid = default_grid(cfg.run.p, verify.pc, verify.grid_p1, verify.eps_values, verify.delta_values)
    report = verify_disconnection(
        view, S, _params(cfg), verify.pc,
        eps=pack.eps, c=pack.c, d_min=pack.dmin, d_max=pack.dmax,
        r_proxy=pack.rproxy, spacing=pack.spacing, ctd_mode=CtdMode(pack.ctd_mode),
        grid=grid, supercritical=_supercritical(cfg, verify.pc), pool=get_worker_pool(),
    )
    tables = {
        Table.VERIFY_GRID: [row.to_row() for row in report.grid],
        Table.VERIFY_RADII: [dict(radius=r, **e.to_row()) for r, e in zip(report.radii, report.profile)],
    }
    print(format_report(report))

    if report.verdict == Verdict.DEGENERATE:
        logger.error(f"Degenerate input: {'; '.join(report.diagnostics)}")
        return report, tables, EXIT_PARAMETER
    if report.verdict == Verdict.VIOLATION_CANDIDATE:
        return report, tables, EXIT_VIOLATION
    return report, tables, EXIT_OK


def format_report(report) -> str:
    lines = [f"verdict: {report.verdict.value}"]
    if report.empirical is not None:
        e = report.empirical
        lines.append(f"empirical disconnection: {e.point:.6g} [{e.ci_low:.6g}, {e.ci_high:.6g}] at R={report.radii[-1]}")
        lines.append(f"packing number k: {report.k}")
        lines.append(f"lemma bound: {report.lemma_rhs:.6g}")
        lines.append(f"theorem bound: {report.theorem_rhs:.6g}")
        lines.append(f"margin: {report.margin:.6g} (slack {report.slack:.3g})")
    lines.extend(f"note: {d}" for d in report.diagnostics)
    return "\n".join(lines)


def run_simulate(cfg: RunConfig) -> Outcome:
    view = view_for(cfg)
    S = lattice_segment(view, cfg.simulate.segment_length)
    if not S:
        raise ParameterError("S must be nonempty", constraint="S nonempty")
    radii = sorted(cfg.simulate.radii)
    _, estimates = disconnection_profile(view, S, radii, _params(cfg), get_worker_pool())
    rows = [dict(radius=r, **e.to_row()) for r, e in zip(radii, estimates)]
    for row in rows:
        print(f"R={row['radius']}: {row['point']:.6g} [{row['ci_low']:.6g}, {row['ci_high']:.6g}]")
    result = {"S_size": len(S), "radii": radii, "estimates": estimates, "pathwise_monotone": True}
    return result, {Table.SIMULATE: rows}, EXIT_OK


HANDLERS: Dict[str, Callable[[RunConfig], Outcome]] = {
    "phi": run_phi,
    "pc-bound": run_pc_bound,
    "pack": run_pack,
    "verify-bound": run_verify_bound,
    "simulate": run_simulate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand and return its exit code"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        cfg = resolve_config(args)
        result, tables, code = HANDLERS[cfg.subcommand](cfg)
        save_report(cfg.run.out, cfg.subcommand, cfg.model_dump(mode="json"), result, tables)
        return code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_PARAMETER
    except ParameterError as e:
        logger.error(f"Parameter error: {e}")
        return EXIT_PARAMETER
    except (TruncationError, ExactCapError) as e:
        logger.error(f"Resource error: {e}")
        return EXIT_TRUNCATION
    except InvariantViolation as e:
        logger.error(f"Invariant violated: {e}")
        return EXIT_TRUNCATION
    except PercoboundError as e:
        logger.error(f"Error: {e}")
        return EXIT_PARAMETER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
