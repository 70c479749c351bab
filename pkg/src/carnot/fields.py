"""Scalar fields and grid domains on a stratified group.

Fields are evaluator-first: a closed-form vectorized evaluator is always
present, optionally with a Euclidean gradient and/or a horizontal gradient
evaluator.  Grid-sampled fields interpolate multilinearly between cell
centers.  Domains are uniform Cartesian boxes with a boolean cell mask.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .groups import StratifiedGroup

__all__ = [
    "GridDomain",
    "ScalarField",
    "probe_field",
    "constant_field",
    "from_expression",
    "grid_field",
    "translate_field",
    "translate_domain",
    "horizontal_gradient",
    "sobolev_seminorm",
]


class DomainError(ValueError):
    """Query or construction outside the declared grid support."""


@dataclass(frozen=True)
class GridDomain:
    """A bounded open set realized as a cell mask over a uniform box grid."""

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple
    mask: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        shape = tuple(int(s) for s in self.shape)
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != shape:
            raise DomainError(f"mask shape {mask.shape} != grid shape {shape}")
        if np.any(hi <= lo):
            raise DomainError("box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "mask", mask)
        lo.setflags(write=False)
        hi.setflags(write=False)
        mask.setflags(write=False)

    # -- geometry ----------------------------------------------------------

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(self.mask.sum()) * self.cell_volume

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def axis_centers(self) -> list:
        h = self.spacing
        return [self.lo[k] + h[k] * (np.arange(self.shape[k]) + 0.5) for k in range(self.ndim)]

    def all_centers(self) -> np.ndarray:
        grids = np.meshgrid(*self.axis_centers(), indexing="ij")
        return np.stack([c.ravel() for c in grids], axis=-1)

    def centers(self) -> np.ndarray:
        """Centers of the masked cells, shape (count, n)."""
        return self.all_centers()[self.mask.ravel()]

    def cell_index(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.floor((points - self.lo) / self.spacing).astype(int)

    def contains(self, points) -> np.ndarray:
        """True where a point falls inside a masked cell."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = self.cell_index(points)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=-1)
        out = np.zeros(len(points), dtype=bool)
        if inside.any():
            sel = tuple(idx[inside].T)
            out[inside] = self.mask[sel]
        return out

    # -- constructors ------------------------------------------------------

    @classmethod
    def box(cls, lo, hi, shape) -> "GridDomain":
        shape = tuple(int(s) for s in np.broadcast_to(shape, np.shape(lo)))
        return cls(np.asarray(lo, float), np.asarray(hi, float), shape, np.ones(shape, bool))

    @classmethod
    def ball(cls, norm, center, radius: float, shape) -> "GridDomain":
        """Left-metric ball B(center, radius) masked over its bounding box."""
        g = norm.group
        center = np.asarray(center, dtype=float)
        # |z_i| <= r**d_i on the ball; higher-layer coords of center.z pick up
        # bracket corrections, bounded crudely below (a loose box only wastes cells)
        extent = radius ** g.weights.astype(float) + 1e-9
        cmax = float(np.abs(g.c).max())
        slack = cmax * (1.0 + np.abs(center).sum()) ** 2 * max(radius, radius**2)
        extent[g.weights > 1] += slack
        dom = cls.box(center - extent, center + extent, shape)
        dist = norm.dist_left(dom.all_centers(), center)
        return replace(dom, mask=(dist < radius).reshape(dom.shape))

    # -- mask algebra (same lattice only) -----------------------------------

    def _check_lattice(self, other: "GridDomain"):
        if (self.shape != other.shape or not np.allclose(self.lo, other.lo)
                or not np.allclose(self.hi, other.hi)):
            raise DomainError("set operations require domains on the same lattice")

    def union(self, other: "GridDomain") -> "GridDomain":
        self._check_lattice(other)
        return replace(self, mask=self.mask | other.mask)

    def intersect(self, other: "GridDomain") -> "GridDomain":
        self._check_lattice(other)
        return replace(self, mask=self.mask & other.mask)

    def difference(self, other: "GridDomain") -> "GridDomain":
        self._check_lattice(other)
        return replace(self, mask=self.mask & ~other.mask)

    def is_disjoint(self, other: "GridDomain") -> bool:
        self._check_lattice(other)
        return not (self.mask & other.mask).any()

    def is_subset(self, other: "GridDomain") -> bool:
        self._check_lattice(other)
        return not (self.mask & ~other.mask).any()

    def erode_cells(self, rings: int) -> "GridDomain":
        """Peel `rings` cell layers off the mask (box boundary counts as outside)."""
        if rings <= 0:
            return self
        eroded = ndimage.binary_erosion(self.mask, iterations=rings, border_value=0)
        return replace(self, mask=eroded)

    def refine(self, factor: int) -> "GridDomain":
        """Split every cell into factor**n subcells, keeping the same set."""
        if factor == 1:
            return self
        shape = tuple(s * factor for s in self.shape)
        mask = self.mask
        for ax in range(self.ndim):
            mask = np.repeat(mask, factor, axis=ax)
        return GridDomain(self.lo, self.hi, shape, mask)

    def __repr__(self):
        return (f"GridDomain(shape={self.shape}, cells={int(self.mask.sum())}, "
                f"|A|={self.volume:.6g})")


@dataclass(frozen=True)
class ScalarField:
    """A real-valued function on the group.

    values : vectorized evaluator, (N, n) -> (N,)
    egrad  : optional Euclidean gradient, (N, n) -> (N, n)
    hgrad  : optional horizontal gradient, (N, n) -> (N, m)
    domain : set on which the evaluator is guaranteed (None = everywhere)
    """

    values: Callable
    egrad: Optional[Callable] = None
    hgrad: Optional[Callable] = None
    domain: Optional[GridDomain] = None
    name: str = "field"

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.domain is not None and not self.domain.contains(points).all():
            raise DomainError(f"evaluation of {self.name!r} outside its domain")
        return np.asarray(self.values(points), dtype=float)

    def shifted(self, c: float) -> "ScalarField":
        return replace(self, values=lambda p, _v=self.values: _v(p) + c,
                       name=f"{self.name}+{c:g}")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        eg = None
        if self.egrad is not None and other.egrad is not None:
            eg = lambda p, a=self.egrad, b=other.egrad: a(p) + b(p)
        hg = None
        if self.hgrad is not None and other.hgrad is not None:
            hg = lambda p, a=self.hgrad, b=other.hgrad: a(p) + b(p)
        return ScalarField(lambda p, a=self.values, b=other.values: a(p) + b(p),
                           egrad=eg, hgrad=hg, name=f"{self.name}+{other.name}")

    def scaled(self, s: float) -> "ScalarField":
        eg = None if self.egrad is None else (lambda p, g=self.egrad: s * g(p))
        hg = None if self.hgrad is None else (lambda p, g=self.hgrad: s * g(p))
        return ScalarField(lambda p, v=self.values: s * v(p), egrad=eg, hgrad=hg,
                           name=f"{s:g}*{self.name}")


# -- field constructors ------------------------------------------------------


def constant_field(group: StratifiedGroup, c: float) -> ScalarField:
    n, m = group.n, group.m
    return ScalarField(
        values=lambda p: np.full(len(np.atleast_2d(p)), float(c)),
        egrad=lambda p: np.zeros((len(np.atleast_2d(p)), n)),
        hgrad=lambda p: np.zeros((len(np.atleast_2d(p)), m)),
        name=f"const({c:g})",
    )


def probe_field(group: StratifiedGroup, xi) -> ScalarField:
    """The linear probe <xi, P(x)> over the horizontal layer: its horizontal
    gradient is identically xi."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (group.m,):
        raise ValueError(f"probe direction must have length m={group.m}")
    n, m = group.n, group.m
    exi = np.zeros(n)
    exi[:m] = xi

    def values(p):
        return np.atleast_2d(p)[..., :m] @ xi

    return ScalarField(
        values=values,
        egrad=lambda p: np.broadcast_to(exi, np.atleast_2d(p).shape).copy(),
        hgrad=lambda p: np.broadcast_to(xi, (len(np.atleast_2d(p)), m)).copy(),
        name=f"probe({np.array2string(xi, precision=3)})",
    )


def from_expression(group: StratifiedGroup, expr) -> ScalarField:
    """Closed-form field from a sympy expression in x1..xn.

    The Euclidean gradient is differentiated symbolically; the horizontal
    gradient then comes from the frame coefficient matrix.
    """
    syms = sp.symbols(f"x1:{group.n + 1}")
    expr = sp.sympify(expr, locals={s.name: s for s in syms})
    fv = sp.lambdify(syms, expr, modules="numpy")
    fg = [sp.lambdify(syms, sp.diff(expr, s), modules="numpy") for s in syms]

    def values(p):
        p = np.atleast_2d(p)
        return np.broadcast_to(np.asarray(fv(*p.T), dtype=float), (len(p),)).copy()

    def egrad(p):
        p = np.atleast_2d(p)
        cols = [np.broadcast_to(np.asarray(g(*p.T), dtype=float), (len(p),))
                for g in fg]
        return np.stack(cols, axis=-1)

    field = ScalarField(values=values, egrad=egrad, name=str(expr))
    return replace(field, hgrad=_hgrad_from_egrad(group, egrad))


def _hgrad_from_egrad(group: StratifiedGroup, egrad: Callable) -> Callable:
    def hgrad(p):
        p = np.atleast_2d(p)
        coeffs = group.vector_field_coeffs(p)  # (N, n, m)
        return np.einsum("...nj,...n->...j", coeffs, egrad(p))

    return hgrad


def quadratic_field(group: StratifiedGroup, const: float, lin, quad=None,
                    name: str = "poly2") -> ScalarField:
    """c + <l, x> + x^T Q x with numpy evaluators (faster than sympy for
    randomized property checks)."""
    n = group.n
    lin = np.asarray(lin, dtype=float).reshape(n)
    quad = np.zeros((n, n)) if quad is None else np.asarray(quad, dtype=float).reshape(n, n)
    sym = quad + quad.T

    def values(p):
        p = np.atleast_2d(p)
        return const + p @ lin + np.einsum("...i,ij,...j->...", p, quad, p)

    def egrad(p):
        return lin + np.atleast_2d(p) @ sym

    field = ScalarField(values=values, egrad=egrad, name=name)
    return replace(field, hgrad=_hgrad_from_egrad(group, egrad))


def grid_field(group: StratifiedGroup, domain: GridDomain, samples,
               name: str = "grid") -> ScalarField:
    """Field carried by samples at the cell centers of `domain`, with
    multilinear interpolation off nodes.  Queries outside the node hull
    raise.  Horizontal gradients must be taken in group-fd mode."""
    samples = np.asarray(samples, dtype=float).reshape(domain.shape)
    interp = RegularGridInterpolator(domain.axis_centers(), samples,
                                     method="linear", bounds_error=True)
    return ScalarField(values=lambda p: interp(np.atleast_2d(p)), name=name)


# -- translation operators ----------------------------------------------------


def translate_field(group: StratifiedGroup, y, u: ScalarField) -> ScalarField:
    """Left translation of a field: (tau_y u)(x) = u(y^{-1} . x)."""
    y_inv = group.inverse(y)

    def pull(p):
        return group.multiply(y_inv, np.atleast_2d(p))

    values = lambda p: u.values(pull(p))
    egrad = None
    hgrad = None
    if u.egrad is not None:
        # chain rule through the translation diffeomorphism
        def egrad(p):
            p = np.atleast_2d(p)
            jac = group.translation_jacobian(y_inv, p)
            return np.einsum("...ij,...i->...j", jac, u.egrad(pull(p)))

        hgrad = _hgrad_from_egrad(group, egrad)
    elif u.hgrad is not None:
        # left-invariance of the frame: X_j(tau_y u) = tau_y(X_j u)
        hgrad = lambda p: u.hgrad(pull(p))
    return ScalarField(values=values, egrad=egrad, hgrad=hgrad,
                       name=f"tau[{np.array2string(np.asarray(y, float), precision=3)}]{u.name}")


def translate_domain(group: StratifiedGroup, y, domain: GridDomain) -> GridDomain:
    """Left translation of a set: tau_y A = {x : y^{-1} . x in A}, re-boxed
    on the same spacing and masked by indicator pullback of cell centers."""
    if domain.is_empty:
        raise DomainError("cannot translate an empty domain")
    y = np.asarray(y, dtype=float)
    h = domain.spacing
    # snap the new box so translated cell centers land on cell centers again
    images = group.multiply(y, domain.centers())
    lo = images.min(axis=0) - 1.5 * h
    hi_target = images.max(axis=0) + 1.5 * h
    shape = tuple(int(np.ceil(v - 1e-12)) for v in (hi_target - lo) / h)
    hi = lo + h * np.asarray(shape)
    boxed = GridDomain.box(lo, hi, shape)
    pulled = group.multiply(group.inverse(y), boxed.all_centers())
    mask = domain.contains(pulled).reshape(shape)
    out = GridDomain(lo, hi, shape, mask)
    if out.is_empty:
        raise DomainError("translated domain has an empty mask")
    return out


# -- horizontal differentiation ----------------------------------------------


def horizontal_gradient(group: StratifiedGroup, u: ScalarField, points,
                        mode: str = "analytic", h: float = 1e-3) -> np.ndarray:
    """Horizontal gradient (X_1 u, .., X_m u) at the given points.

    analytic mode uses the field's closed-form gradient data; group-fd mode
    takes central differences along the group exponential directions
    x . (t e_j), which is what X_j means off the horizontal layer.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if mode == "analytic":
        if u.hgrad is not None:
            return np.atleast_2d(np.asarray(u.hgrad(points), dtype=float))
        if u.egrad is not None:
            return _hgrad_from_egrad(group, u.egrad)(points)
        raise ValueError(f"field {u.name!r} has no closed-form gradient; use mode='group-fd'")
    if mode != "group-fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    out = np.empty((len(points), group.m))
    for j in range(group.m):
        step = np.zeros(group.n)
        step[j] = h
        fwd = u(group.multiply(points, step))
        bwd = u(group.multiply(points, -step))
        out[:, j] = (fwd - bwd) / (2.0 * h)
    return out


def sobolev_seminorm(group: StratifiedGroup, u: ScalarField, domain: GridDomain,
                     p: float, mode: str = "analytic", h: float = 1e-3) -> float:
    """(integral over A of |grad_G u|^p)^(1/p) by midpoint quadrature."""
    if domain.is_empty:
        raise DomainError("seminorm over an empty domain")
    grads = horizontal_gradient(group, u, domain.centers(), mode=mode, h=h)
    mags = np.linalg.norm(grads, axis=-1)
    return float((np.sum(mags**p) * domain.cell_volume) ** (1.0 / p))
