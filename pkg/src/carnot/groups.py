"""Arithmetic of stratified nilpotent groups in exponential coordinates.

Points are plain numpy arrays of length n.  The group law is the
Baker-Campbell-Hausdorff series truncated at third order, which is exact
for nilpotency step <= 3.  All operations broadcast over leading axes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StratifiedGroup",
    "HomogeneousNorm",
    "GroupAxiomError",
    "euclidean",
    "heisenberg",
    "engel",
    "from_config",
    "preset",
]

MAX_STEP = 3


class GroupAxiomError(ValueError):
    """Structure constants violate a stratified Lie algebra axiom."""


@dataclass(frozen=True)
class StratifiedGroup:
    """A Carnot group given by layer dimensions and structure constants.

    ``c[i, j, l]`` is the coefficient of e_l in [e_i, e_j].  The weights
    d_i assign each coordinate to its layer, so d_1 = ... = d_m = 1 for
    m = dim V_1.
    """

    layer_dims: tuple
    c: np.ndarray
    name: str = "custom"
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if not dims or any(d <= 0 for d in dims):
            raise GroupAxiomError(f"layer dims must be positive: {dims}")
        if len(dims) > MAX_STEP:
            raise GroupAxiomError(
                f"step {len(dims)} not supported (truncated BCH is exact only up to step {MAX_STEP})"
            )
        object.__setattr__(self, "layer_dims", dims)
        w = np.repeat(np.arange(1, len(dims) + 1), dims)
        object.__setattr__(self, "weights", w)
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.n, self.n, self.n):
            raise GroupAxiomError(f"structure constants must be {(self.n,) * 3}, got {c.shape}")
        object.__setattr__(self, "c", c)
        c.setflags(write=False)
        self._check_axioms()

    # -- basic attributes -------------------------------------------------

    @property
    def n(self) -> int:
        return int(sum(self.layer_dims))

    @property
    def m(self) -> int:
        """Dimension of the horizontal layer V_1."""
        return int(self.layer_dims[0])

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    def homogeneous_dimension(self) -> int:
        """Q = sum_i i * dim(V_i), the volume-scaling exponent."""
        return int(sum((i + 1) * d for i, d in enumerate(self.layer_dims)))

    # -- axiom checks ------------------------------------------------------

    def _check_axioms(self):
        for msg in self.axiom_violations():
            raise GroupAxiomError(msg)

    def axiom_violations(self, tol: float = 1e-12) -> list:
        """Witness strings for every violated Lie algebra axiom (empty = valid)."""
        out = []
        c, w = self.c, self.weights
        anti = c + np.swapaxes(c, 0, 1)
        if np.abs(anti).max() > tol:
            i, j, l = np.unravel_index(np.abs(anti).argmax(), anti.shape)
            out.append(f"antisymmetry fails at c[{i},{j},{l}]: {c[i, j, l]} vs {-c[j, i, l]}")
        bad_weight = w[None, None, :] != w[:, None, None] + w[None, :, None]
        graded = np.where(bad_weight, c, 0.0)
        if np.abs(graded).max() > tol:
            i, j, l = np.unravel_index(np.abs(graded).argmax(), graded.shape)
            out.append(f"grading fails: c[{i},{j},{l}]={c[i, j, l]} but d_{l} != d_{i}+d_{j}")
        # Jacobi on basis triples: [e_i,[e_j,e_k]] + cyclic = 0.
        t = np.einsum("jks,isl->ijkl", c, c)
        jac = t + np.einsum("ijkl->jkil", t) + np.einsum("ijkl->kijl", t)
        if np.abs(jac).max() > tol:
            i, j, k, _ = np.unravel_index(np.abs(jac).argmax(), jac.shape)
            out.append(f"Jacobi identity fails on basis triple ({i},{j},{k})")
        return out

    # -- Lie algebra -------------------------------------------------------

    def bracket(self, x, y) -> np.ndarray:
        """[x, y] from the structure constants; broadcasts over leading axes."""
        return np.einsum("...i,...j,ijl->...l", np.asarray(x), np.asarray(y), self.c)

    def ad(self, z) -> np.ndarray:
        """Matrix of v -> [z, v]."""
        return np.einsum("...i,ijl->...lj", np.asarray(z), self.c)

    # -- group operations --------------------------------------------------

    def multiply(self, x, y) -> np.ndarray:
        """Group product via BCH: x + y + [x,y]/2 + ([x,[x,y]] + [y,[y,x]])/12."""
        x = self._coerce(x)
        y = self._coerce(y)
        b = self.bracket(x, y)
        out = x + y + 0.5 * b
        if self.step >= 3:
            out = out + (self.bracket(x, b) - self.bracket(y, b)) / 12.0
        return out

    def inverse(self, x) -> np.ndarray:
        """x^{-1} = -x, exact in exponential coordinates."""
        return -self._coerce(x)

    def dilate(self, lam, x) -> np.ndarray:
        """Anisotropic dilation: coordinate i scaled by lam**d_i."""
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0):
            raise ValueError(f"dilation factor must be positive, got {lam}")
        return self._coerce(x) * lam[..., None] ** self.weights

    def translate(self, y, x) -> np.ndarray:
        """Left translation y . x."""
        return self.multiply(y, x)

    def translation_jacobian(self, z, x) -> np.ndarray:
        """d(z.x)/dx, the Jacobian of left translation by z at x."""
        z = self._coerce(z)
        x = self._coerce(x)
        eye = np.eye(self.n)
        adz = self.ad(z)
        jac = eye + 0.5 * adz
        if self.step >= 3:
            jac = jac + (adz @ adz - self.ad(self.bracket(x, z)) - self.ad(x) @ adz) / 12.0
        # broadcast against the point batch even when z is a single point
        return jac + np.zeros(x.shape[:-1] + (1, 1))

    def vector_field_coeffs(self, x) -> np.ndarray:
        """Coefficient matrix A(x) of the horizontal frame X_1..X_m.

        Column j is d/dt (x . t e_j) at t = 0, so X_j u = A(x)[:, j] . grad u.
        """
        x = self._coerce(x)
        eye = np.eye(self.n)[:, : self.m]
        adx = self.ad(x)
        coeffs = eye + 0.5 * adx[..., : self.m]
        if self.step >= 3:
            coeffs = coeffs + (adx @ adx)[..., : self.m] / 12.0
        return coeffs

    def horizontal_project(self, x) -> np.ndarray:
        """Projection onto the horizontal layer (first m coordinates)."""
        return self._coerce(x)[..., : self.m]

    def norm(self, kind: str = "weighted-max") -> "HomogeneousNorm":
        return HomogeneousNorm(self, kind)

    def origin(self) -> np.ndarray:
        return np.zeros(self.n)

    def _coerce(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"point has {x.shape[-1]} coordinates, group needs {self.n}")
        return x

    def __repr__(self):
        return f"StratifiedGroup({self.name!r}, layers={self.layer_dims})"


class HomogeneousNorm:
    """A homogeneous norm: vanishes only at 0, even, 1-homogeneous under dilations.

    kinds:
      weighted-max   rho(x) = max_i |x_i|**(1/d_i), valid on every group
      koranyi        (|x_(1)|^4 + |x_(2)|^2)^(1/4), step-2 groups only
    """

    KINDS = ("weighted-max", "koranyi")

    def __init__(self, group: StratifiedGroup, kind: str = "weighted-max"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown norm kind {kind!r}, expected one of {self.KINDS}")
        if kind == "koranyi" and group.step > 2:
            raise ValueError("koranyi norm is only provided for groups of step <= 2")
        self.group = group
        self.kind = kind

    def __call__(self, x) -> np.ndarray:
        g = self.group
        x = g._coerce(x)
        if self.kind == "weighted-max":
            return np.max(np.abs(x) ** (1.0 / g.weights), axis=-1)
        horiz = np.sum(x[..., : g.m] ** 2, axis=-1)
        vert = np.sum(x[..., g.m:] ** 2, axis=-1)
        return (horiz**2 + vert) ** 0.25

    def dist_left(self, x, y) -> np.ndarray:
        """d(x, y) = |y^{-1} . x|, invariant under left translation."""
        g = self.group
        return self(g.multiply(g.inverse(y), x))

    def dist_right(self, x, y) -> np.ndarray:
        """d^R(x, y) = |x . y^{-1}|, invariant under right translation."""
        g = self.group
        return self(g.multiply(x, g.inverse(y)))

    def __repr__(self):
        return f"HomogeneousNorm({self.kind!r} on {self.group.name})"


# -- presets and config ----------------------------------------------------


def _empty_constants(n: int) -> np.ndarray:
    return np.zeros((n, n, n))


def euclidean(n: int) -> StratifiedGroup:
    """(R^n, +): the only Abelian Carnot group."""
    return StratifiedGroup((n,), _empty_constants(n), name=f"euclidean:{n}")


def heisenberg(n: int = 1) -> StratifiedGroup:
    """H^n: coordinates (x_1..x_n, y_1..y_n, t) with [X_i, Y_i] = T."""
    dim = 2 * n + 1
    c = _empty_constants(dim)
    for i in range(n):
        c[i, n + i, 2 * n] = 1.0
        c[n + i, i, 2 * n] = -1.0
    return StratifiedGroup((2 * n, 1), c, name=f"heisenberg:{n}")


def engel() -> StratifiedGroup:
    """The Engel group: step 3, layers (2, 1, 1), [e1,e2]=e3, [e1,e3]=e4."""
    c = _empty_constants(4)
    c[0, 1, 2], c[1, 0, 2] = 1.0, -1.0
    c[0, 2, 3], c[2, 0, 3] = 1.0, -1.0
    return StratifiedGroup((2, 1, 1), c, name="engel")


def preset(name: str) -> StratifiedGroup:
    """Resolve a preset name: "euclidean:n", "heisenberg:n" or "engel"."""
    if name == "engel":
        return engel()
    base, _, arg = name.partition(":")
    if base == "euclidean" and arg:
        return euclidean(int(arg))
    if base == "heisenberg":
        return heisenberg(int(arg) if arg else 1)
    raise ValueError(f"unknown group preset {name!r}")


def from_config(spec) -> StratifiedGroup:
    """Build a group from a preset name, a config dict, or a JSON file path.

    Dict form: {"layer_dims": [...], "brackets": [{"i": 1, "j": 2, "out": {"3": 1.0}}]}
    with 1-based coordinate indices.
    """
    if isinstance(spec, str):
        if spec.endswith(".json"):
            with open(spec) as fh:
                spec = json.load(fh)
        else:
            return preset(spec)
    dims = tuple(spec["layer_dims"])
    n = int(sum(dims))
    c = _empty_constants(n)
    for entry in spec.get("brackets", []):
        i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
        for l, val in entry["out"].items():
            c[i, j, int(l) - 1] = float(val)
            c[j, i, int(l) - 1] = -float(val)
    return StratifiedGroup(dims, c, name=str(spec.get("name", "custom")))
