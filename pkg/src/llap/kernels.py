"""Integral kernels, solvability diagnostics and convergent kernel sequences.

The solvability theory for the nonlocal equation hinges on the behaviour of
the kernel's Fourier transform near the sphere |p| = exp(shift) where the
logarithmic symbol vanishes:

* ``hat_on_sphere`` samples |G^(p)| on that sphere by direct nonuniform
  quadrature; its maximum is the orthogonality residual.  Admissible kernels
  have residual ~0, and only for those is the inverse-symbol gain stable
  under refinement of the masked annulus.
* ``inverse_symbol_gain`` computes sup |G^(p) / (ln|p| - shift)| over the
  unmasked grid modes, refined by off-grid rings just outside the masked
  annulus.  The orthogonality residual divided by eta accompanies the gain
  as a divergence indicator: on a fixed grid the sup is always finite, and
  only that indicator distinguishes a genuinely bounded ratio from a
  1/eta divergence.
* ``project_orthogonal`` repairs an inadmissible kernel by subtracting
  analytic atoms whose transforms concentrate in an annulus of half-width
  taper_width * exp(shift) / 2 around the sphere, chosen so the sampled
  sphere values cancel exactly.  The construction is idempotent to roundoff.
* ``make_sequence`` builds kernel families converging in L1 and weighted L1
  to an admissible limit, re-projecting every member so the per-member
  solvability conditions hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jv, spherical_jn

from .grid import (
    GridSpec,
    RealField,
    SymbolSpec,
    TWO_PI,
    forward_ft,
    norms,
    nudft,
    periodic_convolution,
    symbol_grid,
)

__all__ = [
    "Kernel",
    "OrthogonalityReport",
    "GainEstimate",
    "BoundCheck",
    "Schedule",
    "KernelSequence",
    "make_kernel",
    "kernel_from_field",
    "sphere_points",
    "hat_on_sphere",
    "project_orthogonal",
    "inverse_symbol_gain",
    "symbol_ratio_distance",
    "verify_hat_bound",
    "verify_derivative_bound",
    "make_sequence",
    "ADMISSIBLE_RTOL",
]

# Relative orthogonality-residual threshold below which a kernel is treated
# as satisfying the solvability conditions.
ADMISSIBLE_RTOL = 1e-8


@dataclass(frozen=True)
class Kernel:
    """Kernel samples with cached quadrature norms and an analytic tag."""

    samples: RealField
    family: str
    params: dict
    l1: float
    weighted_l1: float

    @property
    def grid(self) -> GridSpec:
        return self.samples.grid


@dataclass(frozen=True)
class OrthogonalityReport:
    """|G^| sampled on the singular sphere; residual = max of the samples."""

    shift: float
    points: np.ndarray
    values: np.ndarray
    residual: float


@dataclass(frozen=True)
class GainEstimate:
    """Inverse-symbol gain with its grid/ring split and divergence indicator."""

    gain: float
    grid_gain: float
    ring_gain: float
    orth_residual: float
    divergence_indicator: float
    eta: float


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    observed: float
    bound: float
    margin: float
    where: tuple


@dataclass(frozen=True)
class Schedule:
    """How to build a convergent kernel family.

    truncate: smooth radial cutoff at radii increasing linearly from
    r_start to r_stop over the members, taper width cutoff_width.
    mollify: convolution with a unit-mass Gaussian of width moll_scale / m.
    """

    kind: str
    members: int
    r_start: float = 6.0
    r_stop: float = 14.0
    cutoff_width: float = 2.0
    moll_scale: float = 0.5

    def __post_init__(self):
        if self.kind not in ("truncate", "mollify"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.members < 1:
            raise ValueError("schedule needs at least one member")
        if self.kind == "truncate" and not (0 < self.r_start <= self.r_stop):
            raise ValueError("truncation radii must satisfy 0 < r_start <= r_stop")
        if self.kind == "mollify" and self.moll_scale <= 0:
            raise ValueError("mollifier scale must be positive")


@dataclass(frozen=True)
class KernelSequence:
    """Members G_m with their limit G and per-member (L1, weighted L1) gaps."""

    members: tuple[Kernel, ...]
    limit: Kernel
    distances: tuple[tuple[float, float], ...]


def _build(samples: RealField, family: str, params: dict) -> Kernel:
    n = norms(samples)
    return Kernel(
        samples=samples,
        family=family,
        params=dict(params),
        l1=n.l1,
        weighted_l1=n.weighted_l1,
    )


def kernel_from_field(samples: RealField, family: str = "file", params: dict | None = None) -> Kernel:
    return _build(samples, family, params or {})


def difference_coefficient(width1: float, width2: float, shift: float) -> float:
    """Weight on the second unit-mass Gaussian that zeroes G^ at exp(shift).

    Unit-mass Gaussians of width w transform to (2 pi)^(-d/2) exp(-w^2 p^2 / 2),
    so c1 exp(-w1^2 r^2 / 2) = c2 exp(-w2^2 r^2 / 2) at r = exp(shift) fixes
    c2 / c1 independent of dimension.
    """
    r2 = math.exp(2.0 * shift)
    return math.exp((width2**2 - width1**2) * r2 / 2.0)


def make_kernel(family: str, params: dict, grid: GridSpec) -> Kernel:
    """Build a kernel from one of the analytic families.

    gaussian:   amplitude * exp(-|x|^2 / (2 width^2))
    bump:       amplitude * exp(1 - 1/(1 - (|x|/radius)^2)) inside |x| < radius
    difference: amplitude * N(width1) - c2 * N(width2) with N(w) the unit-mass
                Gaussian and c2 tuned so G^ vanishes on |p| = exp(shift)
    """
    params = dict(params)
    r = grid.radius_mesh()
    if family == "gaussian":
        w = float(params.get("width", 1.0))
        c = float(params.get("amplitude", 1.0))
        if not (w > 0 and np.isfinite(w) and np.isfinite(c)):
            raise ValueError(f"gaussian kernel needs positive width and finite amplitude, got {params}")
        vals = c * np.exp(-(r * r) / (2.0 * w * w))
        return _build(RealField(vals, grid), family, {"width": w, "amplitude": c})
    if family == "bump":
        R = float(params.get("radius", 1.0))
        c = float(params.get("amplitude", 1.0))
        if not (R > 0 and np.isfinite(R) and np.isfinite(c)):
            raise ValueError(f"bump kernel needs positive radius and finite amplitude, got {params}")
        vals = np.zeros(grid.shape)
        inside = r < R
        s = r[inside] / R
        vals[inside] = c * np.exp(1.0 - 1.0 / (1.0 - s * s))
        return _build(RealField(vals, grid), family, {"radius": R, "amplitude": c})
    if family == "difference":
        w1 = float(params.get("width1", 1.0))
        w2 = float(params.get("width2", 2.0))
        c1 = float(params.get("amplitude", 1.0))
        shift = float(params.get("shift", 0.0))
        if not (w1 > 0 and w2 > 0 and np.isfinite(c1) and np.isfinite(shift)):
            raise ValueError(f"difference kernel needs positive widths, got {params}")
        if w1 == w2:
            raise ValueError("difference kernel needs two distinct widths")
        c2 = c1 * difference_coefficient(w1, w2, shift)
        vals = c1 * _unit_gaussian(r, w1, grid.d) - c2 * _unit_gaussian(r, w2, grid.d)
        return _build(
            RealField(vals, grid),
            family,
            {"width1": w1, "width2": w2, "amplitude": c1, "shift": shift},
        )
    raise ValueError(f"unknown kernel family {family!r}")


def _unit_gaussian(r: np.ndarray, width: float, d: int) -> np.ndarray:
    return np.exp(-(r * r) / (2.0 * width * width)) / (width * math.sqrt(TWO_PI)) ** d


def sphere_points(d: int, radius: float, nsamples: int) -> np.ndarray:
    """Evaluation points on the sphere of the given radius.

    d = 1: the two points +-radius.  d = 2: uniform angles.  d = 3: a
    Fibonacci lattice, near-uniform coverage with a single count parameter.
    """
    if d == 1:
        return np.array([[radius], [-radius]])
    if d == 2:
        theta = TWO_PI * np.arange(nsamples) / nsamples
        return radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    i = np.arange(nsamples)
    z = 1.0 - (2.0 * i + 1.0) / nsamples
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return radius * np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _check_resolved(grid: GridSpec, radius: float) -> None:
    if radius >= grid.nyquist_radius:
        raise ValueError(
            f"sphere radius {radius:.6g} lies outside the resolved frequency band "
            f"(Nyquist {grid.nyquist_radius:.6g}); enlarge n or L"
        )


def hat_on_sphere(G: Kernel, shift: float, nsamples: int = 128) -> OrthogonalityReport:
    """Sample |G^| on the singular sphere by nonuniform quadrature.

    The transform is evaluated at off-grid points directly from the samples,
    so the report reflects the quadrature convention exactly rather than an
    interpolation of the DFT.
    """
    if nsamples < 2:
        raise ValueError("need at least two sphere samples")
    radius = math.exp(shift)
    _check_resolved(G.grid, radius)
    pts = sphere_points(G.grid.d, radius, nsamples)
    vals = np.abs(nudft(G.samples, pts))
    return OrthogonalityReport(
        shift=shift,
        points=pts,
        values=vals,
        residual=float(vals.max()),
    )


# ---------------------------------------------------------------------------
# Annular projection


# Minimum envelope decay rate, in units of 1/L.  One dimension solves the
# sphere constraints exactly, so wraparound of the atom tails is harmless
# there; in higher dimensions the tails leak into angular directions the
# atom basis does not span and must die out inside the box.
_ENVELOPE_FLOOR = {1: 2.0, 2: 7.5, 3: 7.5}


def _atom_fields(grid: GridSpec, radius: float, sigma: float) -> list[RealField]:
    """Analytic atoms whose transforms concentrate near |p| = radius.

    The Gaussian envelope exp(-sigma^2 |x|^2 / 2) sets the spectral bump
    half-width.  One dimension needs a cosine and a sine atom for the real
    and imaginary parts on the two-point sphere.  For d >= 2 the basis is a
    radial atom plus atoms modulated by the angular harmonics the Cartesian
    grid itself excites (fourfold harmonics for d = 2, cubic invariants for
    d = 3), each paired with the matching Bessel radial profile.
    """
    r = grid.radius_mesh()
    env = np.exp(-(sigma * r) ** 2 / 2.0)
    if grid.d == 1:
        x = grid.coord_meshes()[0]
        return [
            RealField(env * np.cos(radius * x), grid),
            RealField(env * np.sin(radius * x), grid),
        ]
    if grid.d == 2:
        X, Y = grid.coord_meshes()
        theta = np.arctan2(Y, X)
        return [
            RealField(env * jv(k, radius * r) * np.cos(k * theta), grid)
            for k in (0, 4, 8, 12)
        ]
    X, Y, Z = grid.coord_meshes()
    rr = np.where(r > 0, r, 1.0)
    invariants = [
        (0, np.ones(grid.shape)),
        (4, (X**4 + Y**4 + Z**4) / rr**4),
        (6, (X**2 * Y**2 * Z**2) / rr**6),
        (8, (X**8 + Y**8 + Z**8) / rr**8),
        (8, (X**4 * Y**4 + Y**4 * Z**4 + Z**4 * X**4) / rr**8),
        (10, (X**2 * Y**2 * Z**2 * (X**4 + Y**4 + Z**4)) / rr**10),
    ]
    return [
        RealField(env * spherical_jn(ell, radius * r) * c, grid)
        for ell, c in invariants
    ]


def project_orthogonal(G: Kernel, spec: SymbolSpec, taper_width: float, nsamples: int = 128) -> Kernel:
    """Remove the kernel's spectral content on the singular sphere.

    Subtracts atoms whose transforms concentrate in the annulus
    ||p| - exp(shift)| <~ taper_width * exp(shift) / 2, with coefficients
    solved (least squares over the sampled sphere points) so the sampled
    values cancel.  A second application sees a right side orthogonal to
    the atom span, so the projection is idempotent to roundoff.

    The achieved residual is re-measured and must come out below
    1e-10 * ||G||_1; coarse grids in d = 3 can pin the floor above that,
    in which case the projection refuses and a finer grid is needed.
    """
    if taper_width < spec.eta:
        raise ValueError(
            f"taper_width {taper_width:.6g} is narrower than the masked annulus eta {spec.eta:.6g}"
        )
    grid = G.grid
    radius = spec.sphere_radius
    _check_resolved(grid, radius)
    nominal = taper_width * radius / 2.0
    sigma = max(nominal, _ENVELOPE_FLOOR[grid.d] / grid.L)
    pr = grid.mode_radius_mesh()
    affected = int(np.count_nonzero(np.abs(pr - radius) <= nominal))
    if affected < 2:
        raise ValueError(
            f"taper too narrow for the grid: only {affected} modes within "
            f"{nominal:.6g} of the sphere radius {radius:.6g}"
        )

    pts = sphere_points(grid.d, radius, nsamples)
    target = nudft(G.samples, pts)
    if float(np.max(np.abs(target))) == 0.0:
        return G
    atoms = _atom_fields(grid, radius, sigma)
    A = np.stack([nudft(a, pts) for a in atoms], axis=1)
    system = np.vstack([A.real, A.imag])
    rhs = np.concatenate([target.real, target.imag])
    coeffs, *_ = np.linalg.lstsq(system, rhs, rcond=None)

    vals = G.samples.values - sum(c * a.values for c, a in zip(coeffs, atoms))
    projected = _build(
        RealField(vals, grid),
        f"projected:{G.family}",
        {**G.params, "taper_width": taper_width, "shift": spec.shift},
    )
    achieved = hat_on_sphere(projected, spec.shift, nsamples).residual
    limit = max(1e-10 * G.l1, 1e-13 * max(1.0, G.l1))
    if achieved > limit:
        raise ValueError(
            f"projection left residual {achieved:.3e} above target {limit:.3e}; "
            "the grid is too coarse to represent the annular correction"
        )
    return projected


# ---------------------------------------------------------------------------
# Inverse-symbol gain and spectral distances

RING_MULTIPLES = (1.0, -1.0, 2.0, -2.0)


@dataclass(frozen=True)
class GainEval:
    """Shared evaluation sets behind gains and ratio distances.

    Gains of two kernels and the distance between them are taken over
    identical point sets, so |gain(G1) - gain(G2)| <= ratio_distance(G1, G2)
    holds exactly as a max-norm triangle inequality.
    """

    grid_hat: np.ndarray
    grid_denom: np.ndarray
    ring_hat: np.ndarray
    ring_denom: np.ndarray


def gain_eval(G: Kernel, spec: SymbolSpec, nsamples: int = 128) -> GainEval:
    grid = G.grid
    radius = spec.sphere_radius
    _check_resolved(grid, radius * math.exp(2.0 * spec.eta))
    t = symbol_grid(grid, spec.shift)
    active = np.isfinite(t) & (np.abs(t) >= spec.eta)
    ghat = forward_ft(G.samples).coeffs
    ring_vals = []
    ring_den = []
    for mult in RING_MULTIPLES:
        rho = radius * math.exp(mult * spec.eta)
        pts = sphere_points(grid.d, rho, nsamples)
        ring_vals.append(nudft(G.samples, pts))
        ring_den.append(np.full(len(pts), abs(mult) * spec.eta))
    return GainEval(
        grid_hat=ghat[active],
        grid_denom=np.abs(t[active]),
        ring_hat=np.concatenate(ring_vals),
        ring_denom=np.concatenate(ring_den),
    )


def _max_ratio(hat: np.ndarray, denom: np.ndarray) -> float:
    if hat.size == 0:
        return 0.0
    return float(np.max(np.abs(hat) / denom))


def gain_from_eval(ev: GainEval) -> tuple[float, float, float]:
    grid_gain = _max_ratio(ev.grid_hat, ev.grid_denom)
    ring_gain = _max_ratio(ev.ring_hat, ev.ring_denom)
    return max(grid_gain, ring_gain), grid_gain, ring_gain


def ratio_distance_from_evals(ev1: GainEval, ev2: GainEval) -> float:
    if ev1.grid_hat.shape != ev2.grid_hat.shape or ev1.ring_hat.shape != ev2.ring_hat.shape:
        raise ValueError("gain evaluations come from different grids or sample counts")
    return max(
        _max_ratio(ev1.grid_hat - ev2.grid_hat, ev1.grid_denom),
        _max_ratio(ev1.ring_hat - ev2.ring_hat, ev1.ring_denom),
    )


def inverse_symbol_gain(G: Kernel, spec: SymbolSpec, nsamples: int = 128) -> GainEstimate:
    """sup |G^(p) / (ln|p| - shift)| over unmasked modes plus off-grid rings.

    The rings sit at radii exp(shift +- eta) and exp(shift +- 2 eta), just
    outside the masked annulus, and catch the near-sphere behaviour that the
    grid modes may miss.  The masked annulus itself is excluded; instead the
    orthogonality residual divided by eta is reported, which is the size the
    excluded contribution would have.
    """
    ev = gain_eval(G, spec, nsamples)
    gain, grid_gain, ring_gain = gain_from_eval(ev)
    residual = hat_on_sphere(G, spec.shift, nsamples).residual
    return GainEstimate(
        gain=gain,
        grid_gain=grid_gain,
        ring_gain=ring_gain,
        orth_residual=residual,
        divergence_indicator=residual / spec.eta,
        eta=spec.eta,
    )


def symbol_ratio_distance(G1: Kernel, G2: Kernel, spec: SymbolSpec, nsamples: int = 128) -> float:
    """sup |G1^(p) - G2^(p)| / |ln|p| - shift| over the gain evaluation set."""
    if G1.grid != G2.grid:
        raise ValueError("kernels live on different grids")
    return ratio_distance_from_evals(
        gain_eval(G1, spec, nsamples), gain_eval(G2, spec, nsamples)
    )


# ---------------------------------------------------------------------------
# Transform bounds


def verify_hat_bound(G: Kernel) -> BoundCheck:
    """max |G^| <= (2 pi)^(-d/2) ||G||_1, checked over all grid modes."""
    grid = G.grid
    ghat = np.abs(forward_ft(G.samples).coeffs)
    bound = G.l1 / TWO_PI ** (grid.d / 2.0)
    idx = np.unravel_index(int(np.argmax(ghat)), grid.shape)
    observed = float(ghat[idx])
    where = tuple(float(grid.mode_axis()[i]) for i in idx)
    return BoundCheck(
        passed=observed <= bound + 1e-10,
        observed=observed,
        bound=bound,
        margin=bound - observed,
        where=where,
    )


def verify_derivative_bound(
    G: Kernel,
    step: float = 1e-5,
    naxis: int = 96,
    nrays: int = 6,
    nradii: int = 48,
    seed: int = 0,
) -> BoundCheck:
    """|d G^ / d|p|| <= (2 pi)^(-d/2) || |x| G ||_1 along axes and random rays.

    Central differences of the nonuniform quadrature with a discretization
    slack of 1e-6 on the bound.  Radii are geometrically spaced so the
    low-frequency region, where kernel transforms vary fastest, is sampled
    densely.
    """
    grid = G.grid
    bound = G.weighted_l1 / TWO_PI ** (grid.d / 2.0)
    rng = np.random.default_rng(seed)
    dirs = [np.eye(grid.d)[i] for i in range(grid.d)]
    for _ in range(nrays):
        v = rng.normal(size=grid.d)
        dirs.append(v / np.linalg.norm(v))
    radii_axis = np.geomspace(grid.mode_spacing, 0.9 * grid.nyquist_radius, naxis)
    radii_ray = np.geomspace(grid.mode_spacing, 0.9 * grid.nyquist_radius, nradii)
    observed = 0.0
    where: tuple = ()
    for i, u in enumerate(dirs):
        radii = radii_axis if i < grid.d else radii_ray
        plus = np.outer(radii + step / 2.0, u)
        minus = np.outer(radii - step / 2.0, u)
        deriv = np.abs(nudft(G.samples, plus) - nudft(G.samples, minus)) / step
        j = int(np.argmax(deriv))
        if deriv[j] > observed:
            observed = float(deriv[j])
            where = tuple(float(c) for c in radii[j] * u)
    return BoundCheck(
        passed=observed <= bound + 1e-6,
        observed=observed,
        bound=bound,
        margin=bound + 1e-6 - observed,
        where=where,
    )


# ---------------------------------------------------------------------------
# Convergent kernel sequences


def _smoothstep(t: np.ndarray) -> np.ndarray:
    # C-infinity monotone ramp, 0 for t <= 0 and 1 for t >= 1; the smooth
    # cutoff keeps the truncated kernel's aliasing anisotropy small.
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        lo = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        hi = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return lo / (lo + hi)


def _truncation_cutoff(r: np.ndarray, R: float, width: float) -> np.ndarray:
    return _smoothstep((R + width - r) / width)


def _unit_mass_gaussian_field(grid: GridSpec, width: float) -> RealField:
    r = grid.radius_mesh()
    vals = np.exp(-(r * r) / (2.0 * width * width))
    mass = grid.h**grid.d * float(np.sum(vals))
    return RealField(vals / mass, grid)


def make_sequence(
    G: Kernel,
    schedule: Schedule,
    spec: SymbolSpec,
    taper_width: float,
    nsamples: int = 128,
) -> KernelSequence:
    """Kernels G_m -> G in L1 and weighted L1, each re-projected.

    The limit kernel must already satisfy the solvability conditions
    (orthogonality residual at most 1e-8 relative); every member is passed
    through project_orthogonal so the per-member conditions hold as well.
    """
    residual = hat_on_sphere(G, spec.shift, nsamples).residual
    if residual > ADMISSIBLE_RTOL * max(1.0, G.l1):
        raise ValueError(
            f"limit kernel is inadmissible: orthogonality residual {residual:.3e} "
            f"exceeds {ADMISSIBLE_RTOL:.1e} * max(1, ||G||_1)"
        )
    grid = G.grid
    members = []
    distances = []
    r = grid.radius_mesh()
    radii = np.linspace(schedule.r_start, schedule.r_stop, schedule.members)
    for m in range(1, schedule.members + 1):
        if schedule.kind == "truncate":
            cut = _truncation_cutoff(r, float(radii[m - 1]), schedule.cutoff_width)
            raw = RealField(cut * G.samples.values, grid)
        else:
            moll = _unit_mass_gaussian_field(grid, schedule.moll_scale / m)
            raw = periodic_convolution(G.samples, moll)
        member = kernel_from_field(raw, family=f"{schedule.kind}:{G.family}", params={"m": m})
        if member.l1 > 0:
            member = project_orthogonal(member, spec, taper_width, nsamples)
        diff = RealField(member.samples.values - G.samples.values, grid)
        dn = norms(diff)
        members.append(member)
        distances.append((dn.l1, dn.weighted_l1))
    return KernelSequence(members=tuple(members), limit=G, distances=tuple(distances))
