"""Experiment runner: the convergence check, the inequality suites, and CSV reports."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from folnerlab.config import TAIL_WINDOW, ExperimentConfig
from folnerlab.cstar import (
    apply_iota,
    check_equivariance,
    pullback_state,
    pushforward_state,
    quotient_model,
)
from folnerlab.dynamics import (
    SUPEROP_MAX_DIM,
    AverageSweep,
    ValidationReport,
    norm_sequence,
    validate_system,
)
from folnerlab.matrix import (
    BlockElement,
    is_psd,
    norming_state,
    operator_norm,
    random_hermitian,
    random_positive,
    random_state,
    state_eval,
)
from folnerlab.optimize import m_value, sample_invariant_states

__all__ = [
    "CSV_HEADER",
    "fmt",
    "csv_text",
    "Row",
    "SuiteResult",
    "RunReport",
    "validate_config",
    "run_experiment",
    "check_inequalities",
    "emit_csv",
    "read_csv",
    "theorem_verdict",
    "LIPSCHITZ_KMAX",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("k", "folner_size", "norm_avg", "m_target", "abs_gap", "max_defect")
LIPSCHITZ_KMAX = 200
LIPSCHITZ_SAMPLES = 20
SANDWICH_STATES = 100
NORMING_SAMPLES = 100


def fmt(v: float) -> str:
    """Decimal with 15 significant digits."""
    return f"{v:.15g}"


@dataclass
class Row:
    k: int
    folner_size: int
    norm_avg: float
    m_target: float
    abs_gap: float
    max_defect: float

    @classmethod
    def make(cls, k: int, size: int, norm: float, m: float, defect: float) -> Row:
        # fields are stored at CSV precision so the gap is reproducible from the file
        n, mt = float(fmt(norm)), float(fmt(m))
        return cls(k, size, n, mt, float(fmt(abs(n - mt))), float(fmt(defect)))

    def cells(self) -> list[str]:
        return [
            str(self.k),
            str(self.folner_size),
            fmt(self.norm_avg),
            fmt(self.m_target),
            fmt(self.abs_gap),
            fmt(self.max_defect),
        ]


@dataclass
class SuiteResult:
    name: str
    passed: bool | None  # None: skipped
    worst: float = 0.0
    tol: float = 0.0
    detail: str = ""

    def line(self) -> str:
        verdict = "SKIP" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return f"{verdict} {self.name}: worst {self.worst:.3g} (tol {self.tol:.1g}) {self.detail}".rstrip()


@dataclass
class RunReport:
    name: str
    rows: list[Row] = field(default_factory=list)
    m_fixed_point: float = float("nan")
    m_frank_wolfe: float = float("nan")
    m_full: float = float("nan")
    witness_residuals: dict[str, float] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    suites: list[SuiteResult] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-3
    raw_norms: dict[int, float] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        ok = all(self.verdicts.values())
        return ok and all(s.passed for s in self.suites)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rows": [r.__dict__ for r in self.rows],
            "m_fixed_point": self.m_fixed_point,
            "m_frank_wolfe": self.m_frank_wolfe,
            "m_full": self.m_full,
            "witness_residuals": self.witness_residuals,
            "verdicts": self.verdicts,
            "suites": [s.__dict__ for s in self.suites],
            "timings": self.timings,
        }


def theorem_verdict(rows: list[Row], tol: float, window: int = TAIL_WINDOW) -> tuple[bool, float]:
    """Pass iff the largest ``abs_gap`` over the last ``window`` rows is at most ``tol``."""
    tail = sorted(rows, key=lambda r: r.k)[-window:]
    worst = max(r.abs_gap for r in tail)
    return worst <= tol, worst


def validate_config(cfg: ExperimentConfig) -> ValidationReport:
    """System invariants, C*-model equivariance, and positivity of the element."""
    rep = validate_system(cfg.system, np.random.default_rng(cfg.seed))
    eq = check_equivariance(cfg.model, seed=cfg.seed)
    from folnerlab.dynamics import Check

    rep.checks.append(Check("equivariance", eq.residual, eq.tol, "Xi_g iota = iota Theta_g"))
    # kernel blocks are Theta-invariant by construction (Theta acts blockwise)
    try:
        pos = is_psd(cfg.element)
        rep.checks.append(Check("element_positive", 0.0 if pos else 1.0, 0.0, "a >= 0"))
    except ValueError as exc:
        rep.checks.append(Check("element_positive", 1.0, 0.0, str(exc)))
    return rep


def _timed(timings: dict, key: str, fn: Callable):
    t0 = time.perf_counter()
    out = fn()
    timings[key] = time.perf_counter() - t0
    return out


def run_experiment(cfg: ExperimentConfig, report: ValidationReport | None = None) -> RunReport:
    """Norm sequence over the schedule against ``m(a | Ann(ker iota))`` from both backends.

    Raises :class:`folnerlab.dynamics.ValidationError` before any computation
    if the config fails validation.
    """
    rep = report if report is not None else validate_config(cfg)
    rep.raise_if_failed()
    tol = cfg.tolerances
    out = RunReport(cfg.name, tolerance=tol["theorem"])
    model = cfg.model
    fp = _timed(out.timings, "m_fixed_point", lambda: m_value(model, cfg.element, "annihilator", "fixed_point"))
    fw = _timed(out.timings, "m_frank_wolfe", lambda: m_value(model, cfg.element, "annihilator", "frank_wolfe"))
    full = m_value(model, cfg.element, "full", "fixed_point")
    out.m_fixed_point, out.m_frank_wolfe, out.m_full = fp.value, fw.value, full.value
    out.witness_residuals = {f"fixed_point.{k}": v for k, v in fp.residuals.items()}
    out.witness_residuals.update({f"frank_wolfe.{k}": v for k, v in fw.residuals.items()})

    x = apply_iota(model, cfg.element)
    seq = _timed(out.timings, "norm_sequence", lambda: norm_sequence(cfg.system, x, cfg.schedule))
    F = cfg.system.folner
    out.raw_norms = {k: norm for k, _, norm in seq}
    out.rows = [Row.make(k, size, norm, fp.value, float(F.max_generator_defect(k))) for k, size, norm in seq]
    ok, worst = theorem_verdict(out.rows, tol["theorem"])
    out.verdicts["theorem"] = ok
    out.verdicts["oracle_equivalence"] = abs(fp.value - fw.value) <= tol["oracle"]
    out.verdicts["witness"] = max(fp.residuals["invariance"], fp.residuals["value"]) <= tol["witness"]
    log.info("%s: tail gap %.3g, m = %.12g (fw %.12g)", cfg.name, worst, fp.value, fw.value)
    return out


# ---------------------------------------------------------------------------
# inequality suites


def _suite(name: str, worst: float, tol: float, detail: str = "") -> SuiteResult:
    return SuiteResult(name, bool(worst <= tol), float(worst), tol, detail)


class _Averager:
    """Følner averages on ``M`` for many elements and increasing ``k``."""

    def __init__(self, cfg: ExperimentConfig):
        action = cfg.system.action
        self.action = action
        self.sweep = AverageSweep(action) if max(action.dims) <= SUPEROP_MAX_DIM else None

    def at(self, k: int) -> Callable[[BlockElement], BlockElement]:
        if self.sweep is not None:
            supers = self.sweep.superoperators(k)
            return lambda x: AverageSweep.apply(supers, x)
        return lambda x: self.action.average(x, k)


def suite_folner(cfg: ExperimentConfig) -> SuiteResult:
    F = cfg.system.folner
    group = F.model
    worst = 0.0
    e = group.identity
    for k in range(1, 21):
        worst = max(worst, float(F.defect(k, e)))
    # two independent counts on small sets, against the closed form
    for k in range(1, 6):
        if F.size(k) > 20_000:
            break
        for g in group.generators:
            a = F.defect_by_enumeration(k, g, "symdiff")
            b = F.defect_by_enumeration(k, g, "inclusion")
            worst = max(worst, float(abs(a - b)), float(abs(a - F.defect(k, g))))
    mono = 0.0
    for k in range(1, 101):
        for g in group.generators:
            mono = max(mono, float(F.defect(2 * k, g) - F.defect(k, g)))
    return _suite("folner_defect", max(worst, mono - 1e-12 if mono > 1e-12 else 0.0), 0.0,
                  "identity defect 0, counts agree, defect(2k) <= defect(k)")


def suite_norming(cfg: ExperimentConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed + 1)
    dims = cfg.system.dims
    tol = cfg.tolerances["norming"]
    worst = 0.0
    for i in range(NORMING_SAMPLES):
        x = random_positive(dims, rng, rank=1 + i % max(dims))
        nrm = operator_norm(x)
        worst = max(worst, abs(state_eval(norming_state(x), x).real - nrm))
        if i < 10:
            for _ in range(10):
                s = random_state(dims, rng)
                worst = max(worst, state_eval(s, x).real - nrm)
    return _suite("norming_identity", worst, tol, f"{NORMING_SAMPLES} positive x")


def suite_lipschitz(cfg: ExperimentConfig, kmax: int = LIPSCHITZ_KMAX) -> SuiteResult:
    """``|sigma_k(avg_k(Xi_g0 x)) - sigma_k(avg_k(x))| <= defect(k, g0) ||x||`` for all ``k <= kmax``."""
    rng = np.random.default_rng(cfg.seed + 2)
    sys = cfg.system
    tol = cfg.tolerances["lipschitz"]
    ia = apply_iota(cfg.model, cfg.element)
    xs = [random_hermitian(sys.dims, rng) for _ in range(LIPSCHITZ_SAMPLES)]
    norms = [operator_norm(x) for x in xs]
    shifted = [[sys.action.act_generator(i, x) for x in xs] for i in range(len(sys.group.generators))]
    avg = _Averager(cfg)
    worst_slack = -np.inf
    where = ""
    for k in range(1, kmax + 1):
        f = avg.at(k)
        sigma = norming_state(f(ia))
        base = [state_eval(sigma, f(x)) for x in xs]
        for i, g in enumerate(sys.group.generators):
            d = float(sys.folner.defect(k, g))
            for j, y in enumerate(shifted[i]):
                lhs = abs(state_eval(sigma, f(y)) - base[j])
                slack = lhs - d * norms[j]
                if slack > worst_slack:
                    worst_slack, where = slack, f"k={k}, generator {i}"
    return _suite("defect_lipschitz", max(worst_slack, 0.0), tol, f"k<={kmax}; tightest at {where}")


def suite_sandwich(cfg: ExperimentConfig, norms: dict[int, float]) -> SuiteResult:
    """``psi(a) <= ||avg_k(iota a)|| <= ||a||`` for sampled invariant ``psi`` vanishing on the kernel."""
    rng = np.random.default_rng(cfg.seed + 3)
    model = cfg.model
    a = cfg.element
    ia = apply_iota(model, a)
    lo_tol, hi_tol = cfg.tolerances["sandwich_low"], cfg.tolerances["sandwich_high"]
    states = sample_invariant_states(model.target.action, rng, SANDWICH_STATES)
    values = [state_eval(pullback_state(model, s), a).real for s in states]
    # psi(a) through the pullback equals psi~(iota(a))
    consistency = max(abs(v - state_eval(s, ia).real) for v, s in zip(values, states))
    top = max(values)
    a_norm = operator_norm(a)
    low = max(top - n for n in norms.values())
    high = max(n - a_norm for n in norms.values())
    worst = max(low - lo_tol, high - hi_tol, consistency - lo_tol, 0.0)
    return SuiteResult("sandwich", worst <= 0.0, max(low, high, 0.0), lo_tol,
                       f"{SANDWICH_STATES} invariant states, {len(norms)} scheduled k")


def suite_rho(cfg: ExperimentConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed + 4)
    sys = cfg.system
    xs = [random_hermitian(sys.dims, rng) for _ in range(5)]
    avg = _Averager(cfg)
    worst_rho = worst_contr = 0.0
    for k in cfg.schedule[:50]:
        f = avg.at(k)
        for x in xs:
            y = f(x)
            worst_rho = max(worst_rho, abs(state_eval(sys.rho, y) - state_eval(sys.rho, x)))
            worst_contr = max(worst_contr, operator_norm(y) - operator_norm(x))
    tol = cfg.tolerances["rho_compat"]
    ok = worst_rho <= tol and worst_contr <= cfg.tolerances["sandwich_high"]
    return SuiteResult("rho_compatibility", ok, max(worst_rho, worst_contr), tol,
                       "rho(avg x) = rho(x), ||avg x|| <= ||x||")


def suite_projection(cfg: ExperimentConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed + 5)
    sys = cfg.system
    E = sys.action.projector
    idem = comm = pos = 0.0
    for _ in range(10):
        x = random_hermitian(sys.dims, rng)
        ex = E(x)
        idem = max(idem, (E(ex) - ex).frobenius())
        for i in range(len(sys.group.generators)):
            comm = max(comm, (E(sys.action.act_generator(i, x)) - ex).frobenius())
            comm = max(comm, (sys.action.act_generator(i, ex) - ex).frobenius())
        p = random_positive(sys.dims, rng)
        pos = max(pos, -min(float(np.linalg.eigvalsh(b)[0]) for b in E(p).blocks))
    unital = (E(BlockElement.identity(sys.dims)) - BlockElement.identity(sys.dims)).frobenius()
    tol_i, tol_c = cfg.tolerances["idempotence"], cfg.tolerances["commutation"]
    ok = idem <= tol_i and comm <= tol_c and pos <= 1e-9 and unital <= tol_i
    return SuiteResult("mean_ergodic_projection", ok, max(idem, comm, pos, unital), tol_c,
                       "idempotent, unital, positive, commutes with the action")


def suite_quotient(cfg: ExperimentConfig) -> SuiteResult:
    rng = np.random.default_rng(cfg.seed + 6)
    model = cfg.model
    q = quotient_model(model)
    tol = cfg.tolerances["round_trip"]
    trip = inv = 0.0
    for _ in range(20):
        s = random_state(q.dims, rng)
        back = pushforward_state(model, pullback_state(model, s))
        trip = max(trip, back.distance(s))
        t = random_state(model.dims, rng, support=model.surviving)
        again = pullback_state(model, pushforward_state(model, t))
        trip = max(trip, again.distance(t))
    for s in sample_invariant_states(q.theta, rng, 10):
        p = pullback_state(model, s)
        inv = max(inv, model.theta.state_pullback_residual(p), q.theta.state_pullback_residual(pushforward_state(model, p)))
    worst = max(trip - tol, inv - 1e-8, 0.0)
    detail = "round trips, invariance both ways"
    if model.faithful:
        ann = m_value(model, cfg.element, "annihilator").value
        full = m_value(model, cfg.element, "full").value
        worst = max(worst, abs(ann - full) - cfg.tolerances["faithful_m"])
        a = cfg.element
        worst = max(worst, abs(operator_norm(apply_iota(model, a)) - operator_norm(a)))
        detail += ", faithful: m(annihilator) = m(full), iota isometric"
    return SuiteResult("quotient_correspondence", worst <= 0.0, max(trip, inv), tol, detail)


def suite_oracles(cfg: ExperimentConfig, run: RunReport) -> SuiteResult:
    tol = cfg.tolerances["oracle"]
    diff = abs(run.m_fixed_point - run.m_frank_wolfe)
    wit = max(run.witness_residuals.get("fixed_point.invariance", 0.0),
              run.witness_residuals.get("fixed_point.value", 0.0),
              run.witness_residuals.get("frank_wolfe.invariance", 0.0))
    mono = run.m_fixed_point - run.m_full
    ok = diff <= tol and wit <= cfg.tolerances["witness"] and mono <= 1e-9
    return SuiteResult("oracle_equivalence", ok, diff, tol,
                       f"m={run.m_fixed_point:.12g}, frank-wolfe={run.m_frank_wolfe:.12g}, full={run.m_full:.12g}")


def check_inequalities(cfg: ExperimentConfig, lipschitz_kmax: int = LIPSCHITZ_KMAX) -> RunReport:
    """Run every invariant suite; failures are verdicts, not exceptions.

    A config that fails validation gets a failed validation suite and every
    other suite skipped.
    """
    rep = validate_config(cfg)
    worst = max((c.residual - c.tol for c in rep.checks), default=0.0)
    vsuite = SuiteResult("validation", rep.ok, max(worst, 0.0), 0.0,
                         "; ".join(f"{c.name} [{c.where}] {c.residual:.3g}" for c in rep.failures()))
    if not rep.ok:
        out = RunReport(cfg.name)
        out.suites = [vsuite] + [
            SuiteResult(n, None, detail="skipped: validation failed")
            for n in ("folner_defect", "norming_identity", "defect_lipschitz", "sandwich", "rho_compatibility",
                      "mean_ergodic_projection", "quotient_correspondence", "oracle_equivalence", "theorem")
        ]
        return out
    run = run_experiment(cfg, rep)
    norms = run.raw_norms
    suites = [vsuite]
    for name, fn in (
        ("folner_defect", lambda: suite_folner(cfg)),
        ("norming_identity", lambda: suite_norming(cfg)),
        ("defect_lipschitz", lambda: suite_lipschitz(cfg, lipschitz_kmax)),
        ("sandwich", lambda: suite_sandwich(cfg, norms)),
        ("rho_compatibility", lambda: suite_rho(cfg)),
        ("mean_ergodic_projection", lambda: suite_projection(cfg)),
        ("quotient_correspondence", lambda: suite_quotient(cfg)),
        ("oracle_equivalence", lambda: suite_oracles(cfg, run)),
    ):
        suites.append(_timed(run.timings, name, fn))
    ok, tail = theorem_verdict(run.rows, cfg.tolerances["theorem"])
    suites.append(SuiteResult("theorem", ok, tail, cfg.tolerances["theorem"], f"last {TAIL_WINDOW} scheduled k"))
    run.suites = suites
    return run


# ---------------------------------------------------------------------------
# CSV


def csv_text(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(report.rows, key=lambda r: r.k):
        w.writerow(r.cells())
    return buf.getvalue()


def emit_csv(report: RunReport, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(report))
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows
