"""Command line entry point ``dirichlet-ops``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import carleson, counting, operators, spaces
from .dirichlet_core import DEFAULT_CUTOFF, DirichletPolynomial, Symbol, compose
from .suite import ConfigError, ExperimentConfig, csv_text, run_suite, write_report


def _load_json(arg: str):
    """Inline JSON or a path to a JSON file."""
    text = arg.strip()
    if text.startswith("{") or text.startswith("["):
        return json.loads(text)
    with open(arg) as fh:
        return json.load(fh)


def _floats(arg: str) -> List[float]:
    return [float(x) for x in arg.split(",") if x.strip()]


def _complexes(arg: str) -> List[complex]:
    return [complex(x.strip().replace(" ", "")) for x in arg.split(",") if x.strip()]


def _ints(arg: str) -> List[int]:
    return [int(x) for x in arg.split(",") if x.strip()]


def _measure(arg: Optional[str]):
    if arg is None or arg == "none":
        return None if arg == "none" else spaces.AlphaFamily(0.0)
    return spaces.measure_from_json(_load_json(arg))


def _symbol(arg: str, eta: float = 0.0) -> Symbol:
    raw = Symbol.from_json(_load_json(arg))
    mode = "c0_pos" if raw.c0 >= 1 else "c0_zero"
    return operators.certify(raw, mode, eta=eta if mode == "c0_zero" else 0.0)


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _require_valid(Phi: Symbol):
    if not Phi.validity.valid:
        raise operators.ValidationError(f"symbol failed validation (witness t={Phi.validity.witness_t})")


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.corpus:
            cfg.corpus = dict(cfg.corpus, seed=args.seed)
    out_dir = args.out or cfg.output.get("dir", "out")
    report = run_suite(cfg)
    write_report(report, out_dir)
    if not args.quiet:
        print(report.summary())
    return 1 if report.failed else 0


def cmd_norm(args) -> int:
    f = DirichletPolynomial.from_json(_load_json(args.poly))
    mu = _measure(args.measure)
    rows = [{"space": "H2", "k": 1, "value": spaces.norm_H2(f)}]
    if mu is not None:
        rows.append({"space": "A_mu2", "k": 1, "value": spaces.norm_Amu2(f, mu)})
    for k in _ints(args.k):
        if k > 1:
            rows.append({"space": "H2k", "k": k, "value": spaces.norm_H2k(f, k, args.cutoff)})
            if mu is not None:
                rows.append({"space": "A_mu2k", "k": k, "value": spaces.norm_Amu2k(f, k, mu, args.cutoff)})
    _emit(csv_text(rows, ["space", "k", "value"]), args.out)
    return 0


def cmd_compose(args) -> int:
    P = DirichletPolynomial.from_json(_load_json(args.poly))
    Phi = Symbol.from_json(_load_json(args.symbol))
    comp = compose(P, Phi, args.cutoff, return_tail=True)
    rows = [{"n": n, "re": c.real, "im": c.imag} for n, c in comp.poly]
    _emit(csv_text(rows, ["n", "re", "im"]), args.out)
    print(f"tail_l1_bound={comp.tail_l1:.6e} cutoff={comp.cutoff}", file=sys.stderr)
    return 0


def cmd_counting(args) -> int:
    Phi = _symbol(args.symbol)
    _require_valid(Phi)
    mu = _measure(args.measure) or spaces.AlphaFamily(0.0)
    rows, failed = [], False
    for s in _complexes(args.s_grid):
        ps = counting.preimages(Phi, s, args.delta, args.tol)
        nb = ps.n_beta(mu)
        l1 = counting.N_beta_via_lemma1(Phi, s, mu, args.delta, args.tol).value
        margin = float(mu.beta(s.real)) / Phi.c0 - nb
        failed |= margin < -args.margin_tol
        rows.append({"re_s": s.real, "im_s": s.imag, "n_phi": ps.n_phi(), "n_beta": nb, "n_beta_translates": l1,
                     "margin": margin, "root_count": ps.count})
    _emit(csv_text(rows, ["re_s", "im_s", "n_phi", "n_beta", "n_beta_translates", "margin", "root_count"]), args.out)
    return 1 if failed else 0


def cmd_carleson(args) -> int:
    Phi = _symbol(args.symbol)
    _require_valid(Phi)
    mu = _measure(args.measure)
    hs = sorted(_floats(args.h_grid), reverse=True)
    t_grid = _floats(args.t_grid) if args.t_grid else carleson.default_t_grid(Phi)
    th8 = carleson.theorem8_check(Phi, mu, hs, args.t)
    rows = []
    for r in th8.rows:
        h, sup_n, lam, ri, sup_b, lam_mu, rii, _ = r
        rows.append({"h": h, "t": args.t, "lambda": lam, "lambda_mu": lam_mu,
                     "rho": carleson.rho(Phi, None, h, t_grid).value,
                     "rho_mu": carleson.rho(Phi, mu, h, t_grid).value if mu is not None else None,
                     "sup_N": sup_n, "sup_Nbeta": sup_b, "ratio_i": ri, "ratio_ii": rii})
    _emit(csv_text(rows, ["h", "t", "lambda", "lambda_mu", "rho", "rho_mu", "sup_N", "sup_Nbeta", "ratio_i",
                          "ratio_ii"]), args.out)
    print(f"window counting check: {th8.status}", file=sys.stderr)
    return 1 if th8.status == "fail" else 0


def cmd_essnorm(args) -> int:
    Phi = _symbol(args.symbol)
    _require_valid(Phi)
    mu = _measure(args.measure) or spaces.AlphaFamily(0.0)
    sig = _floats(args.sigma_grid) if args.sigma_grid else operators.default_sigma_grid()
    ts = _floats(args.t_grid) if args.t_grid else operators.default_t_window(Phi)
    up = operators.essnorm_upper(Phi, mu, sig, ts, args.delta)
    lo = operators.essnorm_lower(Phi, mu, args.l, sig, ts)
    kr = {(r[0], r[1]): r for r in lo.rows}
    rows = [{"sigma": s, "t": t, "n_beta": nb, "beta": b, "n_ratio": ratio, "kernel_ratio": kr[(s, t)][2],
             "re_ratio": kr[(s, t)][3], "upper": up.value, "lower": lo.value} for s, t, nb, b, ratio in up.rows]
    _emit(csv_text(rows, ["sigma", "t", "n_beta", "beta", "n_ratio", "kernel_ratio", "re_ratio", "upper",
                          "lower"]), args.out)
    gap = operators.essnorm_gap(up, lo)
    print(f"upper limit={up.limit:.9g}+-{up.limit_error:.3g} lower limit={lo.limit:.9g}+-{lo.limit_error:.3g}",
          file=sys.stderr)
    return 1 if gap < -1e-6 else 0


def cmd_hsnorm(args) -> int:
    Phi = _symbol(args.symbol, eta=args.eta)
    _require_valid(Phi)
    mu = _measure(args.measure)
    rows = []
    for N in sorted(_ints(args.N)):
        r = operators.hs_norm(Phi, mu, N)
        rows.append({"N": N, "partial": r.partial, "tail_bound": r.tail_bound, "upper": r.partial + r.tail_bound})
    _emit(csv_text(rows, ["N", "partial", "tail_bound", "upper"]), args.out)
    return 0


def cmd_opnorm(args) -> int:
    Phi = _symbol(args.symbol, eta=args.eta)
    _require_valid(Phi)
    mu = _measure(args.measure)
    rows = [{"N": N, "norm": v} for N, v in operators.norms_over_truncations(Phi, mu, _ints(args.N))]
    _emit(csv_text(rows, ["N", "norm"]), args.out)
    return 0


def cmd_compactness(args) -> int:
    Phi = _symbol(args.symbol)
    _require_valid(Phi)
    mu = _measure(args.measure) or spaces.AlphaFamily(0.0)
    sig = _floats(args.sigma_grid) if args.sigma_grid else operators.default_sigma_grid()
    ts = _floats(args.t_grid) if args.t_grid else operators.default_t_window(Phi)
    rep = operators.compactness_report(Phi, mu, sig, ts, args.delta)
    rows = [{"sigma": r[0], "t": r[1], "re_ratio": r[2], "n_beta_ratio": r[3], "n_phi_ratio": r[4],
             "re_trend": rep.re_trend, "n_beta_trend": rep.n_beta_trend, "n_phi_trend": rep.n_phi_trend,
             "verdict": rep.verdict} for r in rep.rows]
    _emit(csv_text(rows, ["sigma", "t", "re_ratio", "n_beta_ratio", "n_phi_ratio", "re_trend", "n_beta_trend",
                          "n_phi_trend", "verdict"]), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirichlet-ops", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, symbol=True, measure=True):
        if symbol:
            sp.add_argument("--symbol", required=True, help='symbol JSON or file: {"c0": k, "phi": {"coeffs": ...}}')
        if measure:
            sp.add_argument("--measure", help='measure JSON or file (default {"kind":"alpha","alpha":0})')
        sp.add_argument("--out", help="write CSV here instead of stdout")

    sp = sub.add_parser("verify", help="run the verification suite from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory (overrides the config)")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("norm", help="H2, A_mu2 and H^{2k} norms of a polynomial")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--k", default="1")
    sp.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    common(sp, symbol=False)
    sp.set_defaults(fn=cmd_norm)

    sp = sub.add_parser("compose", help="coefficients of P o Phi up to a cutoff")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    common(sp, measure=False)
    sp.set_defaults(fn=cmd_compose)

    sp = sub.add_parser("counting", help="preimages and counting functions on an s-grid")
    common(sp)
    sp.add_argument("--s-grid", required=True, help="comma separated complex numbers, e.g. 0.5+1j,2")
    sp.add_argument("--delta", type=float, default=1e-6)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--margin-tol", type=float, default=1e-9)
    sp.set_defaults(fn=cmd_counting)

    sp = sub.add_parser("carleson", help="pullback window measures and counting sups")
    common(sp)
    sp.add_argument("--h-grid", required=True)
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--t-grid")
    sp.set_defaults(fn=cmd_carleson)

    sp = sub.add_parser("essnorm", help="essential-norm upper and lower grid estimates")
    common(sp)
    sp.add_argument("--sigma-grid")
    sp.add_argument("--t-grid")
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--delta", type=float, default=1e-6)
    sp.set_defaults(fn=cmd_essnorm)

    sp = sub.add_parser("hsnorm", help="Hilbert-Schmidt partial sums for c0 = 0")
    common(sp)
    sp.add_argument("--N", default="100,1000,10000")
    sp.add_argument("--eta", type=float, default=0.5)
    sp.set_defaults(fn=cmd_hsnorm)

    sp = sub.add_parser("opnorm", help="norms of truncated operator matrices")
    common(sp)
    sp.add_argument("--N", default="64,256,1024")
    sp.add_argument("--eta", type=float, default=0.5)
    sp.set_defaults(fn=cmd_opnorm)

    sp = sub.add_parser("compactness", help="grid trends of the compactness indicators")
    common(sp)
    sp.add_argument("--sigma-grid")
    sp.add_argument("--t-grid")
    sp.add_argument("--delta", type=float, default=1e-6)
    sp.set_defaults(fn=cmd_compactness)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, operators.ValidationError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
