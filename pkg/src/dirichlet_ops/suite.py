"""Experiment configuration, symbol corpora and the verification suite."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import carleson, counting, operators, spaces
from .dirichlet_core import DirichletPolynomial, Symbol, compose, is_smooth, first_primes

SCHEMA = "dirichlet-ops/experiment@1"
THREADS_ENV = "DIRICHLET_OPS_THREADS"

# reference labels attached to every check; they name the result being exercised
REFERENCES = {
    "validation": "mapping condition Re phi >= 0 (c0 >= 1) / Re Phi >= 1/2 + eta (c0 = 0)",
    "contraction": "C_Phi is a contraction for c0 >= 1",
    "norm_path": "||P o Phi||_{A^{2k}} = ||P^k o Phi||_{A^2}^{1/k}",
    "hilbert_schmidt": "Hilbert-Schmidt sufficiency for c0 = 0",
    "lp_identity": "Littlewood-Paley formula, per-index weight identity",
    "lp_monte_carlo": "Littlewood-Paley formula, character/t average of |f'_chi|^2",
    "littlewood": "Littlewood inequality N_beta(s) <= beta(Re s)/c0",
    "translate_integral": "N_beta(s) = int_0^{Re s} N_{Phi_u}(s) h(u) du",
    "kappa": "condition (kappa) on G = beta/sigma",
    "essnorm": "essential-norm upper bound (counting) vs lower bound (partial kernels)",
    "compactness": "compactness criteria: Re s/Re Phi(s), N_beta/beta, N_Phi/Re s",
    "carleson_counting": "sup_{H(t,h/2)} N <= K lambda(H(t, 2 c0 h))",
    "carleson_rho": "essential norm controlled by limsup rho(h)/h and rho_mu(h)/beta(h)",
    "routes_agree": "counting-side and Carleson-side compactness verdicts agree",
}

STATUSES = ("pass", "fail", "vacuous", "heuristic", "skipped")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

def _default_tolerances() -> dict:
    return {
        "contraction": 1e-6,
        "norm_path": 1e-10,
        "lp_identity": 1e-8,
        "mc_z": 3.0,
        "littlewood": 1e-9,
        "translate_integral": 1e-6,
        "essnorm": 1e-6,
        "counting": 1e-10,
        "delta": 1e-6,
    }


@dataclass
class ExperimentConfig:
    symbols: List[dict]  # explicit {"name", "c0", "phi"} entries
    measure: dict = field(default_factory=lambda: {"kind": "alpha", "alpha": 0.0})
    corpus: Optional[dict] = None  # generate_corpus arguments; appended to symbols
    sigma_grid: List[float] = field(default_factory=lambda: [2.0 ** -j for j in range(1, 9)])
    t_grid: List[float] = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    h_grid: List[float] = field(default_factory=lambda: [2.0 ** -j for j in range(2, 7)])
    s_grid: List[List[float]] = field(default_factory=lambda: [[0.25, 0.0], [0.5, 1.0], [1.0, -0.5], [2.0, 3.0]])
    truncations: List[int] = field(default_factory=lambda: [64, 256])
    hs_truncations: List[int] = field(default_factory=lambda: [100, 1000])
    lp_indices: List[int] = field(default_factory=lambda: list(range(2, 51)))
    mc_samples: int = 20_000
    mc_polys: int = 2
    norm_path_trials: int = 3
    eta: float = 0.5
    partial_l: int = 1
    kappa_eta: List[float] = field(default_factory=lambda: [0.5, 0.1, 0.01])
    carleson_t_points: int = 4
    tolerances: dict = field(default_factory=_default_tolerances)
    seed: int = 0
    output: dict = field(default_factory=lambda: {"dir": "out"})
    schema: str = SCHEMA

    def __post_init__(self):
        if self.schema != SCHEMA:
            raise ConfigError(f"unsupported schema {self.schema!r}; expected {SCHEMA!r}")
        tol = _default_tolerances()
        tol.update(self.tolerances or {})
        self.tolerances = tol
        for name in ("sigma_grid", "t_grid", "h_grid", "s_grid", "truncations", "lp_indices", "kappa_eta"):
            if not getattr(self, name):
                raise ConfigError(f"grid {name!r} must be nonempty")
        if not self.symbols and not self.corpus:
            raise ConfigError("config lists no symbols and no corpus")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ConfigError(f"tolerance {k!r} must be positive")
        if int(self.seed) != self.seed:
            raise ConfigError("seed must be an integer")
        if any(s[0] <= 0 for s in self.s_grid):
            raise ConfigError("s_grid points need positive real parts")

    @classmethod
    def from_json(cls, data: Mapping) -> "ExperimentConfig":
        if "schema" not in data:
            raise ConfigError("config is missing the 'schema' field")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# corpus

def generate_corpus(seed: int, count: int, c0_choices: Sequence[int] = (1, 2),
                    support: Sequence[int] = (2, 3, 4, 6, 8, 9), l: Optional[int] = None,
                    scale: float = 0.5, margin: float = 0.1, max_terms: int = 3) -> List[Symbol]:
    """Random symbols with a coefficient-bound certificate by construction.

    Re c_1 = sum_{n>=2} |c_n| + margin * (1 + u), u uniform on [0, 1).
    """
    if count < 0:
        raise ConfigError("count must be nonnegative")
    if margin < 0 or scale <= 0:
        raise ConfigError("margin must be >= 0 and scale > 0")
    if not c0_choices or any(int(c) != c or c < 0 for c in c0_choices):
        raise ConfigError("c0 choices must be nonnegative integers")
    supp = sorted({int(n) for n in support if int(n) >= 2})
    if l is not None:
        bound = first_primes(l)[-1]
        supp = [n for n in supp if is_smooth(n, bound)]
    if not supp and count > 0:
        raise ConfigError("no admissible support indices under the constraints")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c0 = int(rng.choice(list(c0_choices)))
        k = int(rng.integers(1, min(max_terms, len(supp)) + 1))
        idx = sorted(int(n) for n in rng.choice(supp, size=k, replace=False))
        coeffs = {n: scale * complex(rng.normal(), rng.normal()) / math.sqrt(2) for n in idx}
        re1 = sum(abs(c) for c in coeffs.values()) + margin * (1.0 + rng.uniform())
        coeffs[1] = complex(re1, scale * rng.normal())
        sym = operators.certify(Symbol(c0, DirichletPolynomial(coeffs)),
                                mode="c0_pos" if c0 >= 1 else "c0_zero", eta=max(margin, 1e-3))
        out.append(sym)
    return out


# ---------------------------------------------------------------------------
# report

@dataclass
class CheckResult:
    symbol: str
    name: str
    reference: str
    status: str
    value: float = float("nan")
    detail: str = ""
    runtime: float = 0.0


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)
    tables: Dict[str, List[dict]] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.checks)

    def add_rows(self, table: str, rows: List[dict]):
        self.tables.setdefault(table, []).extend(rows)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            lines.append(f"[{c.status:9s}] {c.symbol:12s} {c.name:18s} {c.detail}")
        counts = {s: sum(c.status == s for c in self.checks) for s in STATUSES}
        lines.append("totals: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    if v is None:
        return ""
    return str(v)


def csv_text(rows: List[dict], header: Optional[Sequence[str]] = None) -> str:
    header = list(header or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in header])
    return buf.getvalue()


def write_report(report: VerificationReport, out_dir) -> List[Path]:
    """CSV tables (deterministic), report.json (includes runtimes) and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    checks = [{k: v for k, v in asdict(c).items() if k != "runtime"} for c in report.checks]
    p = out / "checks.csv"
    p.write_text(csv_text(checks, ["symbol", "name", "reference", "status", "value", "detail"]))
    written.append(p)
    for name, rows in sorted(report.tables.items()):
        p = out / f"{name}.csv"
        p.write_text(csv_text(rows))
        written.append(p)
    p = out / "report.json"
    p.write_text(json.dumps({"checks": [asdict(c) for c in report.checks], "failed": report.failed}, indent=1,
                            default=float))
    written.append(p)
    p = out / "summary.txt"
    p.write_text(report.summary() + "\n")
    written.append(p)
    return written


# ---------------------------------------------------------------------------
# suite

def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Sequence) -> list:
    """map preserving order; threaded when DIRICHLET_OPS_THREADS > 1."""
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


class _Runner:
    def __init__(self, cfg: ExperimentConfig, report: VerificationReport):
        self.cfg = cfg
        self.report = report
        self.mu = spaces.measure_from_json(cfg.measure)
        self.tol = cfg.tolerances

    def check(self, symbol: str, name: str, fn: Callable[[], tuple]):
        """Run ``fn`` -> (status, value, detail); exceptions become failures."""
        t0 = time.perf_counter()
        try:
            status, value, detail = fn()
        except Exception as exc:  # recorded, suite continues
            status, value, detail = "fail", float("nan"), f"{type(exc).__name__}: {exc}"
        assert status in STATUSES, status
        res = CheckResult(symbol, name, REFERENCES[name], status, float(value), detail, time.perf_counter() - t0)
        self.report.checks.append(res)
        return res

    def skip(self, symbol: str, name: str, why: str):
        self.report.checks.append(CheckResult(symbol, name, REFERENCES[name], "skipped", float("nan"), why))

    # -- per-symbol checks --------------------------------------------------
    def s_points(self) -> List[complex]:
        return [complex(a, b) for a, b in self.cfg.s_grid]

    def contraction(self, name, Phi):
        norms = operators.norms_over_truncations(Phi, self.mu, self.cfg.truncations)
        self.report.add_rows("opnorm", [{"symbol": name, "N": N, "norm": v} for N, v in norms])
        vals = [v for _, v in norms]
        ok = max(vals) <= 1 + self.tol["contraction"] and all(b >= a for a, b in zip(vals, vals[1:]))
        return ("pass" if ok else "fail", max(vals), f"norms={[round(v, 12) for v in vals]}")

    def norm_path(self, name, Phi, rng):
        worst = 0.0
        N = max(self.cfg.truncations)
        for trial in range(self.cfg.norm_path_trials):
            k = 1 + trial % 3
            P = _random_poly(rng, support=8)
            a = spaces.norm_Amu2k(compose(P, Phi, N), k, self.mu, N, strict=False)
            b = spaces.norm_Amu2(compose(P ** k, Phi, N), self.mu) ** (1.0 / k)
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
        return ("pass" if worst <= self.tol["norm_path"] else "fail", worst, f"max rel diff={worst:.3e}")

    def hilbert_schmidt(self, name, Phi):
        rows, partial, upper = [], [], []
        for N in sorted(self.cfg.hs_truncations):
            r = operators.hs_norm(Phi, self.mu, N)
            rows.append({"symbol": name, "N": N, "partial": r.partial, "tail_bound": r.tail_bound,
                         "upper": r.partial + r.tail_bound})
            partial.append(r.partial)
            upper.append(r.partial + r.tail_bound + r.term_error)
        self.report.add_rows("hsnorm", rows)
        mono = all(b >= a for a, b in zip(partial, partial[1:]))
        upper_ok = all(b <= a for a, b in zip(upper, upper[1:]))
        ok = mono and upper_ok
        return ("pass" if ok else "fail", rows[-1]["tail_bound"] / partial[-1],
                f"monotone={mono} upper_nonincreasing={upper_ok}")

    def littlewood(self, name, Phi):
        rep = counting.littlewood_check(Phi, self.s_points(), self.mu, self.tol["delta"], self.tol["littlewood"])
        return rep

    def translate_integral(self, name, Phi, lw):
        rows, worst = [], 0.0
        l1s = ordered_map(lambda r: counting.N_beta_via_lemma1(Phi, r[0], self.mu, self.tol["delta"]).value, lw.rows)
        for (s, nb, bound, margin, cnt), l1 in zip(lw.rows, l1s):
            diff = abs(nb - l1)
            worst = max(worst, diff / max(1.0, nb))
            rows.append({"symbol": name, "re_s": s.real, "im_s": s.imag, "n_beta": nb,
                         "n_beta_translates": l1, "abs_diff": diff})
        self.report.add_rows("translate_integral", rows)
        return ("pass" if worst <= self.tol["translate_integral"] else "fail", worst, f"max scaled diff={worst:.3e}")

    def essnorm(self, name, Phi, opnorm_value):
        sig = self.cfg.sigma_grid
        up = operators.essnorm_upper(Phi, self.mu, sig, self.cfg.t_grid, self.tol["delta"])
        lo = operators.essnorm_lower(Phi, self.mu, self.cfg.partial_l, sig, self.cfg.t_grid)
        kr = {(r[0], r[1]): r for r in lo.rows}
        rows = []
        for s_re, t, nb, b, ratio in up.rows:
            k = kr.get((s_re, t))
            rows.append({"symbol": name, "sigma": s_re, "t": t, "n_beta": nb, "beta": b, "n_ratio": ratio,
                         "kernel_ratio": k[2] if k else None, "re_ratio": k[3] if k else None})
        self.report.add_rows("essnorm", rows)
        tol = self.tol["essnorm"]
        gap = operators.essnorm_gap(up, lo)
        ok = gap >= -tol
        # every kernel ratio is a norm of C_Phi* on a unit vector, hence below the operator norm
        if opnorm_value is not None:
            ok = ok and lo.value <= opnorm_value + tol
        return ("pass" if ok else "fail", gap,
                f"lower_limit={lo.limit:.9g}+-{lo.limit_error:.3g} "
                f"upper_limit={up.limit:.9g}+-{up.limit_error:.3g} "
                f"lower_max={lo.value:.9g} opnorm={opnorm_value}")

    def compactness(self, name, Phi):
        return operators.compactness_report(Phi, self.mu, self.cfg.sigma_grid, self.cfg.t_grid, self.tol["delta"])

    def carleson(self, name, Phi):
        t_grid = carleson.default_t_grid(Phi, self.cfg.carleson_t_points)
        hs = sorted(self.cfg.h_grid, reverse=True)
        th8 = carleson.theorem8_check(Phi, self.mu, hs, 0.0, delta=self.tol["delta"])
        c_h = carleson.corollary4_estimate(Phi, None, hs, t_grid)
        c_mu = carleson.corollary4_estimate(Phi, self.mu, hs, t_grid)
        rows = []
        for r8, rh, rm in zip(th8.rows, c_h.rows, c_mu.rows):
            h, sup_n, lam, ri, sup_b, lam_mu, rii, _ = r8
            rows.append({"symbol": name, "h": h, "t": 0.0, "lambda": lam, "lambda_mu": lam_mu, "rho": rh[1],
                         "rho_mu": rm[1], "sup_N": sup_n, "sup_Nbeta": sup_b, "ratio_i": ri, "ratio_ii": rii})
        self.report.add_rows("carleson", rows)
        return th8, c_h, c_mu


def _random_poly(rng, support: int = 8) -> DirichletPolynomial:
    k = int(rng.integers(1, 4))
    idx = rng.choice(np.arange(1, support + 1), size=k, replace=False)
    return DirichletPolynomial({int(n): complex(rng.normal(), rng.normal()) for n in idx})


def _load_symbols(cfg: ExperimentConfig) -> List[tuple]:
    out = []
    for i, entry in enumerate(cfg.symbols):
        name = entry.get("name", f"symbol{i}")
        out.append((name, Symbol.from_json(entry)))
    if cfg.corpus:
        args = dict(cfg.corpus)
        args.setdefault("seed", cfg.seed)
        for i, sym in enumerate(generate_corpus(**args)):
            out.append((f"corpus{i:02d}", sym))
    return out


def run_suite(cfg: ExperimentConfig) -> VerificationReport:
    """Run every applicable check on every symbol of the config, in a fixed order."""
    report = VerificationReport()
    R = _Runner(cfg, report)
    rng = np.random.default_rng(cfg.seed)

    # measure-level checks
    def lp_identity():
        if not isinstance(R.mu, spaces.MeasureDensity):
            return ("skipped", float("nan"), "")
        worst = max(spaces.lp_weight_identity(n, R.mu).rel_error for n in cfg.lp_indices)
        return ("pass" if worst <= R.tol["lp_identity"] else "fail", worst, f"max rel error={worst:.3e}")

    R.check("measure", "lp_identity", lp_identity)

    def lp_mc():
        zs = []
        rows = []
        for i in range(cfg.mc_polys):
            f = _random_poly(rng, support=20)
            sigma = float(rng.uniform(0.05, 1.0))
            r = spaces.mc_derivative_energy(f, sigma, cfg.mc_samples, seed=cfg.seed + i)
            zs.append(abs(r.z_score))
            rows.append({"poly": i, "sigma": sigma, "estimate": r.estimate, "closed_form": r.closed_form,
                         "stderr": r.stderr, "z": r.z_score})
        report.add_rows("monte_carlo", rows)
        worst = max(zs)
        return ("pass" if worst <= R.tol["mc_z"] else "fail", worst, f"max |z|={worst:.3f}")

    R.check("measure", "lp_monte_carlo", lp_mc)

    def kappa():
        rep = spaces.kappa_check(R.mu, cfg.kappa_eta, cfg.sigma_grid)
        report.add_rows("kappa", [{"eta": e, "limsup": v} for e, v in zip(rep.eta_grid, rep.limsup)])
        return ("heuristic", rep.limsup[-1], rep.verdict)

    R.check("measure", "kappa", kappa)

    for name, raw in _load_symbols(cfg):
        mode = "c0_pos" if raw.c0 >= 1 else "c0_zero"
        holder = {}

        def validation():
            Phi = operators.certify(raw, mode, eta=cfg.eta if mode == "c0_zero" else 0.0)
            holder["Phi"] = Phi
            cert = Phi.validity
            status = "pass" if cert.valid else "fail"
            return (status, cert.margin, f"{cert.kind} margin={cert.margin:.6g} witness_t={cert.witness_t}")

        res = R.check(name, "validation", validation)
        Phi = holder.get("Phi")
        if res.status != "pass" or Phi is None:
            for dep in ("contraction", "norm_path", "littlewood", "translate_integral", "essnorm", "compactness",
                        "carleson_counting", "carleson_rho", "routes_agree"):
                R.skip(name, dep, "symbol failed validation")
            continue

        opnorm_holder = {}
        if Phi.c0 >= 1:
            def contraction():
                out = R.contraction(name, Phi)
                opnorm_holder["v"] = out[1]
                return out

            R.check(name, "contraction", contraction)
        R.check(name, "norm_path", lambda: R.norm_path(name, Phi, rng))
        if Phi.c0 == 0:
            R.check(name, "hilbert_schmidt", lambda: R.hilbert_schmidt(name, Phi))
            continue

        lw_holder = {}

        def littlewood():
            rep = R.littlewood(name, Phi)
            lw_holder["rep"] = rep
            report.add_rows("littlewood", [
                {"symbol": name, "re_s": s.real, "im_s": s.imag, "n_beta": nb, "bound": b, "margin": m,
                 "root_count": c} for s, nb, b, m, c in rep.rows])
            return ("pass" if rep.passed else "fail", rep.min_margin, f"violations={len(rep.violations)}")

        R.check(name, "littlewood", littlewood)
        if "rep" in lw_holder:
            R.check(name, "translate_integral", lambda: R.translate_integral(name, Phi, lw_holder["rep"]))
        else:
            R.skip(name, "translate_integral", "no counting data")

        try:
            operators._check_smooth(Phi, cfg.partial_l)
            smooth = True
        except operators.ValidationError as exc:
            smooth = False
            R.skip(name, "essnorm", str(exc))
        if smooth:
            R.check(name, "essnorm", lambda: R.essnorm(name, Phi, opnorm_holder.get("v")))

        comp = {}

        def compactness():
            rep = R.compactness(name, Phi)
            comp["rep"] = rep
            report.add_rows("compactness", [
                {"symbol": name, "sigma": r[0], "t": r[1], "re_ratio": r[2], "n_beta_ratio": r[3],
                 "n_phi_ratio": r[4]} for r in rep.rows])
            return ("heuristic", float("nan"),
                    f"verdict={rep.verdict} re={rep.re_trend} n_beta={rep.n_beta_trend} n_phi={rep.n_phi_trend}")

        R.check(name, "compactness", compactness)

        car = {}

        def carleson_counting():
            th8, c_h, c_mu = R.carleson(name, Phi)
            car.update(th8=th8, c_h=c_h, c_mu=c_mu)
            return (th8.status, max(th8.max_ratio_i, th8.max_ratio_ii),
                    f"max ratio_i={th8.max_ratio_i:.6g} ratio_ii={th8.max_ratio_ii:.6g} K={th8.K}")

        R.check(name, "carleson_counting", carleson_counting)
        if car:
            R.check(name, "carleson_rho", lambda: ("heuristic", car["c_mu"].value,
                                                   f"rho/h trend={car['c_h'].trend} rho_mu/beta trend={car['c_mu'].trend}"))
        else:
            R.skip(name, "carleson_rho", "no Carleson data")

        def routes():
            if "rep" not in comp or not car:
                return ("skipped", float("nan"), "missing inputs")
            counting_route = comp["rep"].n_beta_trend
            carleson_route = car["c_mu"].trend
            if comp["rep"].verdict == "inconclusive":
                return ("heuristic", float("nan"), f"counting={counting_route} carleson={carleson_route} (inconclusive)")
            status = "pass" if counting_route == carleson_route else "fail"
            return (status, float("nan"), f"counting={counting_route} carleson={carleson_route}")

        R.check(name, "routes_agree", routes)
    return report
