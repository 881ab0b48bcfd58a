"""Command-line entry point: ``hdqkd {rate,sweep,visibility,holevo,validate}``."""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings

from .config import RunConfig, resolve_config
from .errors import DomainError, NumericalError
from .pipeline import CSV_COLUMNS, build_scenario, evaluate_point, row_from_breakdown, sweep
from .validation import cross_validation_matrix, format_matrix

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _emit_csv(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args) -> RunConfig:
    cfg = resolve_config(args.config)
    if getattr(args, "distance_km", None) is not None:
        cfg = cfg.with_updates(link={"distance_km": args.distance_km})
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_updates(montecarlo={"seed": args.seed})
    return cfg


def _human(stream, text: str) -> None:
    print(text, file=stream)


def cmd_rate(args) -> int:
    cfg = _load(args)
    scn = build_scenario(cfg)
    if scn.aborted:
        _human(sys.stderr, f"protocol abort: {scn.holevo.reason}")
        return EXIT_ABORT
    r = evaluate_point(scn, cfg.link.distance_km)
    row = row_from_breakdown(r)
    info = sys.stderr if args.out is None else sys.stdout
    _human(
        info,
        f"{cfg.name}: {row['distance_km']:g} km  I(A;B) = {r.I_AB:.4f} bits  chi_UB = {r.chi_UB:.4f} bits  "
        f"F = {r.F:.5f}  bits/frame = {r.bits_per_frame:.4f}  SKR = {r.SKR:.6g} bit/s  PIE = {r.PIE:.4f}"
        + ("  (clamped)" if r.clamped else ""),
    )
    _emit_csv(rows_to_csv([row]), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    scn = build_scenario(cfg)
    rows = sweep(scn, cfg.distances())
    _emit_csv(rows_to_csv(rows), args.out)
    if scn.aborted:
        _human(sys.stderr, f"protocol abort: {scn.holevo.reason}")
        return EXIT_ABORT
    return EXIT_OK


def cmd_visibility(args) -> int:
    cfg = _load(args)
    from .pipeline import noise_report

    nr = noise_report(cfg)
    print(f"V_FI  ideal = {nr.v_fi_ideal:.6f}  measured = {nr.v_fi:.6f}")
    print(f"V_CFI ideal = {nr.v_cfi_ideal:.6f}  measured = {nr.v_cfi:.6f}")
    print(f"xi_omega = {nr.xi_w:.6g} (clamped {nr.xi_w_clamped:.6g})")
    print(f"xi_t (conjugate Franson) = {nr.xi_t_cfi:.6g}")
    print(f"xi_t (raw jittered timing) = {nr.xi_t_raw_timing:.6g}")
    print(f"xi_t used [{nr.xi_t_source}] = {nr.xi_t:.6g} (clamped {nr.xi_t_clamped:.6g})")
    return EXIT_OK


def cmd_holevo(args) -> int:
    cfg = _load(args)
    scn = build_scenario(cfg)
    h = scn.holevo
    if h.aborted:
        print(f"protocol abort: {h.reason}")
        return EXIT_ABORT
    p = h.family_params_star
    print(f"xi_t = {scn.noise.xi_t:.6g}  xi_omega = {scn.noise.xi_w:.6g}")
    print(f"chi_UB = {h.chi:.6f} bits")
    print(f"arg sup: eta_t = {p.eta_t:.6g}  eta_omega = {p.eta_w:.6g}  eps_t = {p.eps_t:.6g}  eps_omega = {p.eps_w:.6g}")
    print(f"on heuristic search boundary: {'yes' if h.on_search_boundary else 'no'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    scn = build_scenario(cfg)
    if scn.aborted:
        print(f"protocol abort: {scn.holevo.reason}")
        return EXIT_ABORT
    checks = cross_validation_matrix(scn, cfg.montecarlo.seed)
    print(format_matrix(checks))
    ok = all(c.passed for c in checks)
    print("all checks passed" if ok else "SOME CHECKS FAILED")
    return EXIT_OK if ok else EXIT_ABORT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdqkd", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config path or builtin name (default: builtin 'default')")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed override")
    common.add_argument("--distance-km", type=float, help="single-point distance override")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("rate", cmd_rate, "secure-key rate at one distance"),
        ("sweep", cmd_sweep, "rate versus distance as CSV"),
        ("visibility", cmd_visibility, "visibilities and excess-noise factors"),
        ("holevo", cmd_holevo, "worst-case Holevo information"),
        ("validate", cmd_validate, "Monte-Carlo cross-validation of the closed forms"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except DomainError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
