"""Mollifier families and the group-local convolution.

The convolution is evaluated through its unit-ball form
    (phi_eps * u)(x) = integral over B(0,1) of phi(z) u((delta_eps z)^{-1} . x) dz
with a fixed midpoint product rule, so convolving a constant is exact and
the node set is symmetric under negation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace, field as dc_field

import numpy as np

from .groups import StratifiedGroup, HomogeneousNorm
from .fields import GridDomain, ScalarField, DomainError, horizontal_gradient

__all__ = [
    "MollifierFamily",
    "erode_domain",
    "convolve",
    "commutation_residual",
    "convergence_table",
]

_CHUNK = 256


@dataclass(frozen=True)
class MollifierFamily:
    """A radial bump profile on the unit ball of a homogeneous norm.

    The base profile is exp(-1/(1 - rho(x)^2)) inside the unit ball, zero
    outside, normalized so that the fixed quadrature rule integrates it to
    exactly one.  Radiality in rho makes the profile symmetric, since
    rho(-x) = rho(x).
    """

    norm: HomogeneousNorm
    resolution: int = 17
    nodes: np.ndarray = dc_field(init=False, repr=False)
    node_weight: float = dc_field(init=False, repr=False)
    normalization: float = dc_field(init=False, repr=False)

    def __post_init__(self):
        g = self.group
        if g.n > 4:
            raise ValueError("product-rule quadrature is capped at n <= 4 axes")
        if self.resolution < 3:
            raise ValueError("quadrature resolution must be at least 3")
        axes = [-1.0 + (np.arange(self.resolution) + 0.5) * (2.0 / self.resolution)] * g.n
        grids = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([a.ravel() for a in grids], axis=-1)
        weight = (2.0 / self.resolution) ** g.n
        raw = self._raw(nodes)
        total = float(raw.sum() * weight)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "node_weight", weight)
        object.__setattr__(self, "normalization", total)
        nodes.setflags(write=False)

    @property
    def group(self) -> StratifiedGroup:
        return self.norm.group

    @property
    def symmetric(self) -> bool:
        return True  # radial in the homogeneous norm by construction

    def _raw(self, points) -> np.ndarray:
        rho = self.norm(np.atleast_2d(points))
        out = np.zeros_like(rho)
        inside = rho < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
        return out

    def profile(self, points) -> np.ndarray:
        """The normalized base profile phi, supported in B(0, 1)."""
        return self._raw(points) / self.normalization

    def scaled(self, eps: float, points) -> np.ndarray:
        """phi_eps(x) = eps^{-Q} phi(delta_{1/eps} x), supported in B(0, eps)."""
        if eps <= 0:
            raise ValueError("mollifier scale must be positive")
        g = self.group
        shrunk = g.dilate(1.0 / eps, np.atleast_2d(points))
        return self.profile(shrunk) / eps ** g.homogeneous_dimension()

    def node_masses(self) -> np.ndarray:
        """Quadrature masses w * phi(z_k); they sum to one by normalization."""
        return self.profile(self.nodes) * self.node_weight

    def unit_mass(self, eps: float = 1.0, resolution: int | None = None) -> float:
        """Quadrature of phi_eps over B(0, eps), optionally at another resolution."""
        fam = self if resolution in (None, self.resolution) else replace(self, resolution=resolution)
        scale = self.group.dilate(eps, fam.nodes)
        jac = eps ** self.group.homogeneous_dimension()
        return float(np.sum(self.scaled(eps, scale)) * fam.node_weight * jac)


_ERODE_CACHE: dict = {}


def erode_domain(group: StratifiedGroup, norm: HomogeneousNorm,
                 omega: GridDomain, eps: float) -> GridDomain:
    """Right-distance erosion: cells whose center is farther than eps (in d^R)
    from every complement cell center, including a ring outside the box.

    Results are memoized; convolving the same domain at the same scale reuses
    the mask."""
    if eps <= 0:
        raise ValueError("erosion radius must be positive")
    key = (group.layer_dims, group.c.tobytes(), norm.kind, float(eps),
           omega.lo.tobytes(), omega.hi.tobytes(), omega.shape, omega.mask.tobytes())
    cached = _ERODE_CACHE.get(key)
    if cached is not None:
        return cached
    h = omega.spacing
    pad = np.ceil(eps ** group.weights.astype(float) / h).astype(int) + 1
    padded = GridDomain.box(omega.lo - pad * h, omega.hi + pad * h,
                            tuple(s + 2 * p for s, p in zip(omega.shape, pad)))
    inner = np.zeros(padded.shape, dtype=bool)
    inner[tuple(slice(p, p + s) for p, s in zip(pad, omega.shape))] = omega.mask
    complement = padded.all_centers()[~inner.ravel()]

    centers = omega.centers()
    keep = np.empty(len(centers), dtype=bool)
    comp_inv = group.inverse(complement)
    for start in range(0, len(centers), _CHUNK):
        block = centers[start:start + _CHUNK]
        alive = np.ones(len(block), dtype=bool)
        for cstart in range(0, len(comp_inv), 32 * _CHUNK):
            csl = comp_inv[cstart:cstart + 32 * _CHUNK]
            prod = group.multiply(block[alive][:, None, :], csl[None, :, :])
            alive[np.flatnonzero(alive)[norm(prod).min(axis=1) <= eps]] = False
            if not alive.any():
                break
        keep[start:start + len(block)] = alive
    mask = np.zeros(omega.shape, dtype=bool)
    mask.ravel()[np.flatnonzero(omega.mask.ravel())[keep]] = True
    out = replace(omega, mask=mask)
    if len(_ERODE_CACHE) > 64:
        _ERODE_CACHE.clear()
    _ERODE_CACHE[key] = out
    return out


def convolve(group: StratifiedGroup, mollifier: MollifierFamily, eps: float,
             u: ScalarField, omega: GridDomain) -> ScalarField:
    """Local convolution phi_eps * u, defined on the eroded domain.

    The returned field's horizontal gradient, when u carries one, is the
    convolution of the gradient node-by-node, which is the commutation
    identity X_j(phi_eps * u) = phi_eps * (X_j u)."""
    eroded = erode_domain(group, mollifier.norm, omega, eps)
    if eroded.is_empty:
        raise DomainError(f"erosion by eps={eps} empties the domain")
    masses = mollifier.node_masses()
    live = masses > 0
    masses = masses[live]
    y_inv = group.inverse(group.dilate(eps, mollifier.nodes[live]))

    def pulled(points):
        points = np.atleast_2d(points)
        if not eroded.contains(points).all():
            raise DomainError("convolution queried outside the eroded domain")
        return group.multiply(y_inv[None, :, :], points[:, None, :])

    def values(points):
        points = np.atleast_2d(points)
        out = np.empty(len(points))
        for start in range(0, len(points), _CHUNK):
            pts = pulled(points[start:start + _CHUNK])
            vals = u.values(pts.reshape(-1, group.n)).reshape(pts.shape[:2])
            out[start:start + len(pts)] = vals @ masses
        return out

    hgrad = None
    if u.hgrad is not None or u.egrad is not None:
        def hgrad(points):
            points = np.atleast_2d(points)
            out = np.empty((len(points), group.m))
            for start in range(0, len(points), _CHUNK):
                pts = pulled(points[start:start + _CHUNK])
                grads = horizontal_gradient(group, u, pts.reshape(-1, group.n))
                grads = grads.reshape(pts.shape[:2] + (group.m,))
                out[start:start + len(pts)] = np.einsum("k,pkj->pj", masses, grads)
            return out

    return ScalarField(values=values, hgrad=hgrad, domain=eroded,
                       name=f"phi_{eps:g}*{u.name}")


def commutation_residual(group: StratifiedGroup, mollifier: MollifierFamily,
                         eps: float, u: ScalarField, omega: GridDomain, j: int,
                         fd_step: float = 1e-3, max_points: int = 64) -> float:
    """max |X_j(phi_eps * u) - phi_eps * (X_j u)| over interior sample points,
    the left side taken by a central group difference of the convolved values."""
    if not 0 <= j < group.m:
        raise ValueError(f"horizontal direction j={j} out of range")
    u_eps = convolve(group, mollifier, eps, u, omega)
    # stay a ring of cells inside the eroded mask so fd queries remain legal
    interior = u_eps.domain.erode_cells(1)
    if interior.is_empty:
        raise DomainError("eroded domain too small for a finite-difference check")
    pts = interior.centers()
    if len(pts) > max_points:
        idx = np.linspace(0, len(pts) - 1, max_points).astype(int)
        pts = pts[idx]
    step = np.zeros(group.n)
    step[j] = fd_step
    lhs = (u_eps.values(group.multiply(pts, step))
           - u_eps.values(group.multiply(pts, -step))) / (2.0 * fd_step)
    rhs = u_eps.hgrad(pts)[:, j]
    return float(np.abs(lhs - rhs).max())


def convergence_table(group: StratifiedGroup, mollifier: MollifierFamily,
                      u: ScalarField, omega: GridDomain, inner: GridDomain,
                      p: float, eps_list) -> list:
    """Rows (eps, Lp_err, W1p_err) of the mollification errors over `inner`.

    Requires `inner` to sit inside the eroded domain for every eps."""
    rows = []
    pts = inner.centers()
    vol = inner.cell_volume
    base_vals = u.values(pts)
    base_grad = horizontal_gradient(group, u, pts)
    for eps in sorted(eps_list, reverse=True):
        u_eps = convolve(group, mollifier, eps, u, omega)
        if not u_eps.domain.contains(pts).all():
            raise DomainError(f"inner set is not compactly inside the domain at eps={eps}")
        dv = np.abs(u_eps.values(pts) - base_vals)
        dg = np.linalg.norm(u_eps.hgrad(pts) - base_grad, axis=-1)
        rows.append({
            "epsilon": float(eps),
            "Lp_err": float((np.sum(dv**p) * vol) ** (1.0 / p)),
            "W1p_err": float((np.sum(dg**p) * vol) ** (1.0 / p)),
        })
    return rows
