import numpy as np

from carnot.fields import horizontal_gradient
from carnot.functionals import BlackBoxFunctional


def x_weighted_functional(group):
    """Deliberately non-left-invariant fixture: F(u, A) = sum over A of
    (1 + x1^2) |grad_G u|^2, the detector target for the constancy probe."""

    def fn(u, domain):
        pts = domain.centers()
        grads = horizontal_gradient(group, u, pts)
        weight = 1.0 + pts[:, 0] ** 2
        return float(np.sum(weight * np.sum(grads**2, axis=-1)) * domain.cell_volume)

    return BlackBoxFunctional(fn, name="x_weighted_energy")
