"""Convergence study: solve along a kernel sequence and check the bounds.

Given kernels G_m -> G in L1 and weighted L1, each member problem is solved
under a uniform certificate (2 pi)^(d/2) gain_m lip <= 1 - eps, and each
solution distance is compared against the explicit bound

    ||u_m - u||_2 <= (2 pi)^(d/2) / eps * ratio_dist(G_m, G) * ||F(u, .)||_2,

where ratio_dist is the sup of |G_m^ - G^| / |ln|p| - shift| over the same
evaluation set as the gains.  At the discrete level the bound is provable,
so every row must come out bound_ok; a failure indicates a bug, not noise.

``verify_lemmaA2`` checks the kernel-level limit statements separately: the
symbol-ratio distance vanishes along the sequence, the gains converge, the
per-member admissibility (without which the gains diverge as the annulus
shrinks), and persistence of the uniform certificate in the limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RealField, SymbolSpec, TWO_PI, norms, reciprocal_grid
from .kernels import (
    ADMISSIBLE_RTOL,
    GainEval,
    Kernel,
    KernelSequence,
    gain_eval,
    gain_from_eval,
    hat_on_sphere,
    ratio_distance_from_evals,
)
from .nonlinearity import Nonlinearity, estimate_lipschitz, eval_F
from .solver import (
    CertificateError,
    ContractionCertificate,
    SolveReport,
    picard_solve,
    ORTH_RTOL,
)

__all__ = [
    "SequenceRow",
    "SequenceStudy",
    "LemmaRow",
    "LemmaTable",
    "MemberCertificateError",
    "run_sequence",
    "verify_lemmaA2",
]


class MemberCertificateError(CertificateError):
    """A member (or the limit) kernel fails the uniform certificate."""

    def __init__(self, message: str, member: int | None):
        super().__init__(message)
        self.member = member


@dataclass(frozen=True)
class SequenceRow:
    m: int
    l1_dist: float
    wl1_dist: float
    ratio_dist: float
    gain: float
    q: float
    sol_dist: float
    bound_rhs: float
    bound_ok: bool


@dataclass(frozen=True)
class SequenceStudy:
    rows: tuple[SequenceRow, ...]
    limit_report: SolveReport
    limit_gain: float
    rhs_scale: float  # ||F(u, .)||_2 of the limit solution
    eps: float


@dataclass(frozen=True)
class LemmaRow:
    m: int
    ratio_dist: float
    gain: float
    orth_residual: float
    divergence_indicator: float
    admissible: bool
    cert_ok: bool


@dataclass(frozen=True)
class LemmaTable:
    rows: tuple[LemmaRow, ...]
    limit_gain: float
    limit_residual: float
    scale: float
    ratio_vanishes: bool
    gains_converge: bool
    members_admissible: bool
    certificate_persists: bool

    @property
    def passed(self) -> bool:
        return (
            self.ratio_vanishes
            and self.gains_converge
            and self.members_admissible
            and self.certificate_persists
        )


def _certificate_from_parts(
    G: Kernel,
    N: Nonlinearity,
    spec: SymbolSpec,
    ev: GainEval,
    residual: float,
    eps: float,
    lip_sampled: float,
    masked_modes: int,
) -> ContractionCertificate:
    gain, grid_gain, _ = gain_from_eval(ev)
    pref = TWO_PI ** (G.grid.d / 2.0)
    threshold = ORTH_RTOL * G.l1
    q = pref * gain * N.lip
    return ContractionCertificate(
        gain=gain,
        grid_gain=grid_gain,
        q=q,
        q_grid=pref * grid_gain * N.lip,
        lip=N.lip,
        lip_sampled=lip_sampled,
        orth_residual=residual,
        orth_threshold=threshold,
        divergence_indicator=residual / spec.eta,
        masked_modes=masked_modes,
        eps_user=eps,
        shift=spec.shift,
        eta=spec.eta,
        passed=bool(q <= 1.0 - eps and residual <= threshold),
    )


def run_sequence(
    seq: KernelSequence,
    N: Nonlinearity,
    spec: SymbolSpec,
    eps: float,
    tol: float = 1e-10,
    max_iter: int = 500,
    nsamples: int = 128,
) -> SequenceStudy:
    """Solve the limit problem and every member problem; fill the table.

    Refuses with the offending member index as soon as any certificate
    fails the uniform bound.  The limit problem is solved first because the
    rows reference ||F(u, .)||_2 of its solution.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    grid = seq.limit.grid
    _, masked = reciprocal_grid(grid, spec)
    masked_modes = int(np.count_nonzero(masked))
    lip_sampled = estimate_lipschitz(N, 4096, 0)

    ev_limit = gain_eval(seq.limit, spec, nsamples)
    res_limit = hat_on_sphere(seq.limit, spec.shift, nsamples).residual
    cert_limit = _certificate_from_parts(
        seq.limit, N, spec, ev_limit, res_limit, eps, lip_sampled, masked_modes
    )
    if not cert_limit.passed:
        raise MemberCertificateError(
            f"limit kernel fails the uniform certificate (q = {cert_limit.q:.6g}, "
            f"residual = {cert_limit.orth_residual:.3e})",
            member=None,
        )
    limit_report = picard_solve(
        seq.limit, N, spec, tol=tol, max_iter=max_iter, certificate=cert_limit
    )
    rhs_scale = norms(eval_F(N, limit_report.final)).l2
    pref = TWO_PI ** (grid.d / 2.0)

    rows: list[SequenceRow] = []
    floor = 10.0 * tol * max(1.0, norms(limit_report.final).l2)
    for i, member in enumerate(seq.members):
        m = i + 1
        ev_m = gain_eval(member, spec, nsamples)
        res_m = hat_on_sphere(member, spec.shift, nsamples).residual
        cert_m = _certificate_from_parts(
            member, N, spec, ev_m, res_m, eps, lip_sampled, masked_modes
        )
        if not cert_m.passed:
            raise MemberCertificateError(
                f"member {m} fails the uniform certificate (q = {cert_m.q:.6g}, "
                f"residual = {cert_m.orth_residual:.3e})",
                member=m,
            )
        report_m = picard_solve(member, N, spec, tol=tol, max_iter=max_iter, certificate=cert_m)
        sol_dist = norms(
            RealField(report_m.final.values - limit_report.final.values, grid)
        ).l2
        ratio = ratio_distance_from_evals(ev_m, ev_limit)
        bound_rhs = pref / eps * ratio * rhs_scale
        l1_dist, wl1_dist = seq.distances[i]
        rows.append(
            SequenceRow(
                m=m,
                l1_dist=l1_dist,
                wl1_dist=wl1_dist,
                ratio_dist=ratio,
                gain=cert_m.gain,
                q=cert_m.q,
                sol_dist=sol_dist,
                bound_rhs=bound_rhs,
                bound_ok=bool(sol_dist <= bound_rhs + 1e-10),
            )
        )

    for row in rows:
        if not row.bound_ok:
            raise RuntimeError(
                f"member {row.m} violates the convergence bound: "
                f"sol_dist {row.sol_dist:.3e} > bound {row.bound_rhs:.3e}"
            )
    for prev, cur in zip(rows, rows[1:]):
        # Diagnostic, not a theorem claim: distances may wobble once they
        # hit the solver tolerance floor.
        if cur.sol_dist > 1.5 * prev.sol_dist + floor:
            raise RuntimeError(
                f"solution distances increase from member {prev.m} to {cur.m}: "
                f"{prev.sol_dist:.3e} -> {cur.sol_dist:.3e}"
            )
    return SequenceStudy(
        rows=tuple(rows),
        limit_report=limit_report,
        limit_gain=cert_limit.gain,
        rhs_scale=rhs_scale,
        eps=eps,
    )


def verify_lemmaA2(
    seq: KernelSequence,
    spec: SymbolSpec,
    lip: float,
    eps: float,
    nsamples: int = 128,
) -> LemmaTable:
    """Kernel-level convergence checks along the sequence.

    Verifies that the symbol-ratio distance to the limit vanishes, that the
    gains converge (each gap bounded by the ratio distance exactly), that
    every member satisfies the solvability conditions, and that the uniform
    certificate persists in the limit.  Failures are carried in the table,
    not raised; a member skipped by the projection shows up with a large
    divergence indicator.
    """
    grid = seq.limit.grid
    pref = TWO_PI ** (grid.d / 2.0)
    ev_limit = gain_eval(seq.limit, spec, nsamples)
    limit_gain = gain_from_eval(ev_limit)[0]
    limit_residual = hat_on_sphere(seq.limit, spec.shift, nsamples).residual
    scale = seq.limit.l1 / pref

    rows: list[LemmaRow] = []
    for i, member in enumerate(seq.members):
        m = i + 1
        ev_m = gain_eval(member, spec, nsamples)
        gain_m = gain_from_eval(ev_m)[0]
        res_m = hat_on_sphere(member, spec.shift, nsamples).residual
        rows.append(
            LemmaRow(
                m=m,
                ratio_dist=ratio_distance_from_evals(ev_m, ev_limit),
                gain=gain_m,
                orth_residual=res_m,
                divergence_indicator=res_m / spec.eta,
                admissible=bool(res_m <= ADMISSIBLE_RTOL * max(1.0, member.l1)),
                cert_ok=bool(pref * gain_m * lip <= 1.0 - eps),
            )
        )

    tiny = 1e-14 * max(1.0, scale)
    ratio_vanishes = bool(
        rows
        and rows[-1].ratio_dist <= 1e-6 * scale + tiny
        and all(b.ratio_dist <= 1.5 * a.ratio_dist + tiny for a, b in zip(rows, rows[1:]))
    )
    gains_converge = bool(
        rows
        and all(
            abs(r.gain - limit_gain) <= r.ratio_dist + 1e-12 * max(1.0, limit_gain)
            for r in rows
        )
        and abs(rows[-1].gain - limit_gain) <= 1e-6 * scale + tiny
    )
    members_admissible = all(r.admissible for r in rows)
    certificate_persists = (not all(r.cert_ok for r in rows)) or (
        pref * limit_gain * lip <= 1.0 - eps + 1e-12
    )
    return LemmaTable(
        rows=tuple(rows),
        limit_gain=limit_gain,
        limit_residual=limit_residual,
        scale=scale,
        ratio_vanishes=ratio_vanishes,
        gains_converge=gains_converge,
        members_admissible=members_admissible,
        certificate_persists=certificate_persists,
    )
