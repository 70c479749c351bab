"""Integral functionals F(u, A) = integral over A of f(grad_G u) dx.

Integrands come from a small convex menu (powers, quadratic forms,
max-affine, tabulated) and may carry a growth certificate (a, b, p) with
f(eta) <= a + b |eta|^p.  Functionals are either built from an integrand
with midpoint quadrature, or opaque black boxes supplied by callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .groups import StratifiedGroup
from .fields import GridDomain, ScalarField, DomainError, horizontal_gradient, translate_field, translate_domain
from .mollify import MollifierFamily, convolve

__all__ = [
    "Integrand",
    "PowerIntegrand",
    "QuadraticIntegrand",
    "MaxAffineIntegrand",
    "TabulatedIntegrand",
    "OffsetIntegrand",
    "ShiftedArgIntegrand",
    "integrand_from_config",
    "Functional",
    "IntegrandFunctional",
    "BlackBoxFunctional",
    "convexity_violation",
    "check_left_invariance",
    "check_set_function",
    "jensen_check",
    "sandwich_check",
    "lsc_check",
]


class Integrand:
    """Extended-real convex integrand on R^m."""

    m: int
    growth: Optional[tuple] = None  # (a, b, p) with f(eta) <= a + b |eta|^p

    def __call__(self, eta) -> np.ndarray:
        raise NotImplementedError

    def grad(self, eta) -> np.ndarray:
        """A subgradient at each row of eta."""
        raise NotImplementedError

    def _coerce(self, eta) -> np.ndarray:
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        if eta.shape[-1] != self.m:
            raise ValueError(f"integrand argument must have {self.m} components")
        return eta


@dataclass(frozen=True)
class PowerIntegrand(Integrand):
    """f(eta) = |eta|^p for p >= 1."""

    m: int
    p: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("power integrands need p >= 1 for convexity")

    @property
    def growth(self):
        return (0.0, 1.0, self.p)

    def __call__(self, eta):
        return np.linalg.norm(self._coerce(eta), axis=-1) ** self.p

    def grad(self, eta):
        eta = self._coerce(eta)
        mag = np.linalg.norm(eta, axis=-1, keepdims=True)
        safe = np.where(mag > 0, mag, 1.0)
        return self.p * safe ** (self.p - 2) * np.where(mag > 0, eta, 0.0)


@dataclass(frozen=True)
class QuadraticIntegrand(Integrand):
    """f(eta) = eta^T M eta with M symmetric positive semidefinite."""

    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("quadratic integrand needs a square matrix")
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M).min() < -1e-10:
            raise ValueError("quadratic integrand matrix must be positive semidefinite")
        object.__setattr__(self, "M", M)
        M.setflags(write=False)

    @property
    def m(self):
        return self.M.shape[0]

    @property
    def growth(self):
        return (0.0, float(np.linalg.eigvalsh(self.M).max()), 2.0)

    def __call__(self, eta):
        eta = self._coerce(eta)
        return np.einsum("...i,ij,...j->...", eta, self.M, eta)

    def grad(self, eta):
        return 2.0 * self._coerce(eta) @ self.M


@dataclass(frozen=True)
class MaxAffineIntegrand(Integrand):
    """f(eta) = max(0, max_i <a_i, eta> + b_i)."""

    planes: np.ndarray   # (k, m)
    offsets: np.ndarray  # (k,)

    def __post_init__(self):
        planes = np.atleast_2d(np.asarray(self.planes, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        if len(planes) != len(offsets):
            raise ValueError("one offset per plane required")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "offsets", offsets)
        planes.setflags(write=False)
        offsets.setflags(write=False)

    @property
    def m(self):
        return self.planes.shape[1]

    @property
    def growth(self):
        a = max(0.0, float(self.offsets.max()))
        b = float(np.linalg.norm(self.planes, axis=1).max())
        return (a, b, 1.0)

    def _affine(self, eta):
        return self._coerce(eta) @ self.planes.T + self.offsets

    def __call__(self, eta):
        return np.maximum(self._affine(eta).max(axis=-1), 0.0)

    def grad(self, eta):
        vals = self._affine(eta)
        best = vals.argmax(axis=-1)
        grad = self.planes[best]
        grad[vals.max(axis=-1) <= 0] = 0.0
        return grad


@dataclass(frozen=True)
class TabulatedIntegrand(Integrand):
    """Convex values tabulated on a uniform m-grid, interpolated multilinearly.

    Midpoint convexity of the table is sampled at construction; queries
    outside the table raise."""

    axes: tuple          # per-component node arrays
    table: np.ndarray
    _interp: RegularGridInterpolator = dc_field(init=False, repr=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        table = np.asarray(self.table, dtype=float)
        if table.shape != tuple(len(a) for a in axes):
            raise ValueError("table shape must match the axis lengths")
        if (table < 0).any():
            raise ValueError("tabulated integrand must be nonnegative")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "_interp", RegularGridInterpolator(
            axes, table, method="linear", bounds_error=True))
        viol = _table_midpoint_violation(axes, table)
        if viol > 1e-10:
            raise ValueError(f"table is not midpoint convex (violation {viol:.3g})")

    @property
    def m(self):
        return len(self.axes)

    def __call__(self, eta):
        return self._interp(self._coerce(eta))

    def grad(self, eta, h: float = 1e-6):
        eta = self._coerce(eta)
        out = np.empty_like(eta)
        for j in range(self.m):
            step = np.zeros(self.m)
            step[j] = h
            out[:, j] = (self._interp(eta + step) - self._interp(eta - step)) / (2 * h)
        return out


def _table_midpoint_violation(axes, table) -> float:
    worst = 0.0
    for ax in range(len(axes)):
        a = np.moveaxis(table, ax, 0)
        if len(a) < 3:
            continue
        worst = max(worst, float((a[1:-1] - 0.5 * (a[:-2] + a[2:])).max()))
    return worst


@dataclass(frozen=True)
class OffsetIntegrand(Integrand):
    """f(eta) = inner(eta) + c for a constant c >= 0."""

    inner: Integrand
    c: float

    @property
    def m(self):
        return self.inner.m

    @property
    def growth(self):
        g = self.inner.growth
        return None if g is None else (g[0] + self.c, g[1], g[2])

    def __call__(self, eta):
        return self.inner(eta) + self.c

    def grad(self, eta):
        return self.inner.grad(eta)


@dataclass(frozen=True)
class ShiftedArgIntegrand(Integrand):
    """f(eta) = inner(eta - shift)."""

    inner: Integrand
    shift: np.ndarray

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=float).ravel()
        if shift.shape != (self.inner.m,):
            raise ValueError("shift must have m components")
        object.__setattr__(self, "shift", shift)
        shift.setflags(write=False)

    @property
    def m(self):
        return self.inner.m

    @property
    def growth(self):
        g = self.inner.growth
        if g is None:
            return None
        a, b, p = g
        scale = 2.0 ** (p - 1)
        return (a + b * scale * float(np.linalg.norm(self.shift)) ** p, b * scale, p)

    def __call__(self, eta):
        return self.inner(self._coerce(eta) - self.shift)

    def grad(self, eta):
        return self.inner.grad(self._coerce(eta) - self.shift)


def integrand_from_config(spec: dict, m: int) -> Integrand:
    """Deserialize the integrand menu: power / quadratic / max_affine /
    tabulated, with optional "offset" and "shift" wrappers."""
    kind = spec.get("kind")
    if kind == "power":
        f = PowerIntegrand(m, float(spec.get("p", 2.0)))
    elif kind == "quadratic":
        f = QuadraticIntegrand(np.asarray(spec["M"], dtype=float))
    elif kind == "max_affine":
        planes = [pl["a"] for pl in spec["planes"]]
        offsets = [pl.get("b", 0.0) for pl in spec["planes"]]
        f = MaxAffineIntegrand(np.asarray(planes, float), np.asarray(offsets, float))
    elif kind == "tabulated":
        f = TabulatedIntegrand(tuple(np.asarray(a, float) for a in spec["axes"]),
                               np.asarray(spec["table"], float))
    else:
        raise ValueError(f"unknown integrand kind {kind!r}")
    if f.m != m:
        raise ValueError(f"integrand dimension {f.m} != horizontal dimension {m}")
    if "shift" in spec:
        f = ShiftedArgIntegrand(f, np.asarray(spec["shift"], float))
    if "offset" in spec:
        f = OffsetIntegrand(f, float(spec["offset"]))
    return f


def convexity_violation(f: Integrand, rng: np.random.Generator,
                        samples: int = 200, radius: float = 4.0) -> float:
    """max over random pairs of f((a+b)/2) - (f(a)+f(b))/2 (<= 0 for convex f)."""
    a = rng.uniform(-radius, radius, size=(samples, f.m))
    b = rng.uniform(-radius, radius, size=(samples, f.m))
    return float((f(0.5 * (a + b)) - 0.5 * (f(a) + f(b))).max())


# -- functionals ---------------------------------------------------------------


class Functional:
    """Common surface: eval(u, A) -> extended nonnegative real."""

    growth: Optional[tuple] = None

    def eval(self, u: ScalarField, domain: GridDomain) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class IntegrandFunctional(Functional):
    """Midpoint-quadrature functional built from an integrand.

    refine > 1 resamples every cell into refine^n subcells before summing;
    grad_mode selects analytic or group finite-difference gradients."""

    group: StratifiedGroup
    integrand: Integrand
    grad_mode: str = "analytic"
    refine: int = 1
    fd_step: float = 1e-3

    @property
    def growth(self):
        return self.integrand.growth

    def eval(self, u: ScalarField, domain: GridDomain) -> float:
        if domain.is_empty:
            return 0.0
        dom = domain.refine(self.refine)
        mode = "analytic" if self.grad_mode == "analytic" else "group-fd"
        grads = horizontal_gradient(self.group, u, dom.centers(), mode=mode, h=self.fd_step)
        vals = self.integrand(grads)
        total = float(np.sum(vals) * dom.cell_volume)
        return float("inf") if not np.isfinite(total) else total


@dataclass(frozen=True)
class BlackBoxFunctional(Functional):
    """Opaque (u, A) -> value evaluator; property checks can only sample it."""

    fn: Callable
    name: str = "blackbox"
    growth: Optional[tuple] = None

    def eval(self, u: ScalarField, domain: GridDomain) -> float:
        return float(self.fn(u, domain))


# -- property checkers ---------------------------------------------------------


def check_left_invariance(group: StratifiedGroup, functional: Functional,
                          u: ScalarField, domain: GridDomain, y_samples) -> dict:
    """Residuals |F(tau_y u, tau_y A) - F(u, A)| over the given translations."""
    base = functional.eval(u, domain)
    residuals = []
    for y in np.atleast_2d(np.asarray(y_samples, dtype=float)):
        shifted = functional.eval(translate_field(group, y, u),
                                  translate_domain(group, y, domain))
        residuals.append(abs(shifted - base))
    return {"base": base, "residuals": residuals, "max_residual": max(residuals)}


def check_set_function(functional: Functional, u: ScalarField,
                       domain: GridDomain, tol: float = 1e-10,
                       max_rings: int = 4) -> dict:
    """Sample-based report on the set-function properties of F(u, .):
    monotone, additive on disjoint splits, subadditive on overlapping covers,
    superadditive, and inner regular along the cell-ring exhaustion."""
    import dataclasses

    half = np.zeros(domain.shape, dtype=bool)
    half[: domain.shape[0] // 2] = True
    a1 = dataclasses.replace(domain, mask=domain.mask & half)
    a2 = dataclasses.replace(domain, mask=domain.mask & ~half)
    f_all = functional.eval(u, domain)
    f1, f2 = functional.eval(u, a1), functional.eval(u, a2)

    # overlapping cover: two thirds overlapping in the middle
    cut = 2 * domain.shape[0] // 3
    c1 = np.zeros(domain.shape, dtype=bool)
    c1[:cut] = True
    c2 = np.zeros(domain.shape, dtype=bool)
    c2[domain.shape[0] - cut:] = True
    g1 = functional.eval(u, dataclasses.replace(domain, mask=domain.mask & c1))
    g2 = functional.eval(u, dataclasses.replace(domain, mask=domain.mask & c2))

    # exhaust from the innermost rings outward so the sets grow toward A
    exhaustion = []
    for k in range(max_rings, 0, -1):
        sub = domain.erode_cells(k)
        if not sub.is_empty:
            exhaustion.append(functional.eval(u, sub))

    report = {
        "additivity_gap": abs(f_all - f1 - f2),
        "increasing": all(functional.eval(u, domain.erode_cells(k)) <= f_all + tol
                          for k in (1, 2) if not domain.erode_cells(k).is_empty),
        "subadditive": f_all <= g1 + g2 + tol,
        "superadditive": f1 + f2 <= f_all + tol,
        "inner_regular_gap": f_all - max(exhaustion) if exhaustion else float("nan"),
        "exhaustion": exhaustion,
        "value": f_all,
    }
    report["additive"] = report["additivity_gap"] <= tol
    report["monotone_exhaustion"] = all(x <= y + tol for x, y in zip(exhaustion, exhaustion[1:]))
    return report


def jensen_check(group: StratifiedGroup, functional: IntegrandFunctional,
                 u: ScalarField, inner_domain: GridDomain,
                 mollifier: MollifierFamily, eps: float, omega: GridDomain) -> tuple:
    """Both sides of the Jensen step: F(phi_eps * u, A') on the left and the
    mollifier average of F(tau_y u, A') on the right; left <= right holds
    exactly at quadrature level for convex integrands."""
    u_eps = convolve(group, mollifier, eps, u, omega)
    centers = inner_domain.refine(functional.refine).centers()
    if not u_eps.domain.contains(centers).all():
        raise DomainError("inner domain is not eroded by eps inside the field's domain")
    lhs = functional.eval(u_eps, inner_domain)
    masses = mollifier.node_masses()
    live = masses > 0
    masses = masses[live]
    y_inv = group.inverse(group.dilate(eps, mollifier.nodes[live]))
    # grad_G(tau_y u)(x) = (grad_G u)(y^{-1} . x) by left-invariance of the frame
    cellvol = inner_domain.refine(functional.refine).cell_volume
    rhs = 0.0
    for start in range(0, len(centers), 64):
        pts = group.multiply(y_inv[None, :, :], centers[start:start + 64, None, :])
        grads = horizontal_gradient(group, u, pts.reshape(-1, group.n),
                                    mode=functional.grad_mode, h=functional.fd_step)
        vals = functional.integrand(grads).reshape(pts.shape[:2])
        rhs += float(vals.sum(axis=0) @ masses) * cellvol
    return lhs, float(rhs)


def sandwich_check(group: StratifiedGroup, functional: Functional,
                   u: ScalarField, inner_domain: GridDomain, domain: GridDomain,
                   mollifier: MollifierFamily, eps_list) -> dict:
    """The three-term chain F(u, A') <= F(phi_eps * u, A') <= F(u, A) along an
    eps schedule; returns the raw values so callers apply their tolerance."""
    if inner_domain.shape == domain.shape and not inner_domain.is_subset(domain):
        raise DomainError("inner domain must sit inside the outer one")
    lower = functional.eval(u, inner_domain)
    upper = functional.eval(u, domain)
    rows = []
    for eps in sorted(eps_list, reverse=True):
        u_eps = convolve(group, mollifier, eps, u, domain)
        if not u_eps.domain.contains(inner_domain.centers()).all():
            raise DomainError(f"margin between A' and A is below eps={eps}")
        rows.append({"epsilon": float(eps), "middle": functional.eval(u_eps, inner_domain)})
    return {"lower": lower, "upper": upper, "rows": rows}


def lsc_check(functional: Functional, limit_field: ScalarField,
              sequence, domain: GridDomain) -> dict:
    """Values of F along an explicit sequence converging to `limit_field`;
    the lower-semicontinuity witness is F(u, A) <= min over the tail."""
    values = [functional.eval(v, domain) for v in sequence]
    limit_value = functional.eval(limit_field, domain)
    tail = values[len(values) // 2:]
    return {"limit_value": limit_value, "sequence_values": values,
            "tail_min": min(tail) if tail else float("nan")}
