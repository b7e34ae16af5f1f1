"""spherevar: numerical variational calculus for maps between spheres.

Energies (Dirichlet, p-energy, second elementary symmetric, symplectic
Dirichlet and their couplings), Euler-Lagrange residuals, second variations,
averaged-Hessian trace identities, stability thresholds, and the tensor
identities backing them, all evaluated on product quadrature grids over round
spheres.
"""

from .sphere_geometry import (
    Chart,
    ConformalGradientField,
    QuadratureGrid,
    SpherePoint,
    TangentVector,
    build_grid,
    conformal_field,
    covariant_derivative,
    integrate,
    sphere_exp,
    sphere_volume,
    tangent_frames,
)

__version__ = "0.1.0"
