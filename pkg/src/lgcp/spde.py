"""Matérn field machinery for the alpha = 2 SPDE construction.

Covers the (range, sigma) <-> (kappa, tau) transforms, sparse precision
assembly, penalized-complexity priors on (range, sigma), and a direct
Matérn covariance evaluator used as an independent oracle in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .errors import AssemblyError, InvalidGeometryError
from .meshing import FemMatrices, Mesh1d, Mesh2d

ALPHA = 2  # the only supported operator power; nu = ALPHA - d/2


def smoothness(d: int) -> float:
    """nu for alpha = 2 in dimension d (1 in 2D, 3/2 in 1D)."""
    if d not in (1, 2):
        raise InvalidGeometryError("dimension must be 1 or 2")
    return ALPHA - d / 2.0


@dataclass(frozen=True)
class MaternParams:
    """Matérn field parameters on the natural (range, sigma) scale."""

    range: float
    sigma: float
    d: int = 2

    def __post_init__(self):
        if self.range <= 0 or self.sigma <= 0:
            raise InvalidGeometryError("range and sigma must be positive")

    @property
    def nu(self) -> float:
        return smoothness(self.d)

    @property
    def kappa(self) -> float:
        return math.sqrt(8 * self.nu) / self.range

    @property
    def tau(self) -> float:
        return _tau_from(self.kappa, self.sigma, self.nu, self.d)


def _tau_from(kappa: float, sigma: float, nu: float, d: int) -> float:
    # sigma^2 = Gamma(nu) / (Gamma(nu + d/2) (4 pi)^(d/2) kappa^(2 nu) tau^2)
    num = gamma_fn(nu)
    den = gamma_fn(nu + d / 2.0) * (4 * math.pi) ** (d / 2.0) * kappa ** (2 * nu)
    return math.sqrt(num / den) / sigma


def params_from_range_sigma(r: float, sigma: float, d: int = 2):
    """(kappa, tau) from nominal range and marginal standard deviation."""
    p = MaternParams(range=r, sigma=sigma, d=d)
    return p.kappa, p.tau


def range_sigma_from_params(kappa: float, tau: float, d: int = 2):
    """Inverse of :func:`params_from_range_sigma`."""
    nu = smoothness(d)
    r = math.sqrt(8 * nu) / kappa
    sigma = _tau_from(kappa, 1.0, nu, d) / tau
    return r, sigma


def matern_cov(dist, params: MaternParams):
    """Matérn covariance at separation ``dist`` (km); sigma^2 at zero lag."""
    dist = np.asarray(dist, dtype=float)
    nu = params.nu
    kd = params.kappa * dist
    with np.errstate(invalid="ignore"):
        corr = (2 ** (1 - nu) / gamma_fn(nu)) * kd**nu * kv(nu, kd)
    corr = np.where(dist == 0, 1.0, corr)
    return params.sigma**2 * corr


def precision_alpha2(fem: FemMatrices, kappa: float, tau: float) -> sp.csr_matrix:
    """Q = tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G), sparse SPD."""
    if kappa <= 0 or tau <= 0:
        raise AssemblyError("kappa and tau must be positive")
    q = tau**2 * (
        kappa**4 * sp.diags(fem.c) + 2 * kappa**2 * fem.g + fem.g2
    )
    return q.tocsr()


@dataclass(frozen=True)
class PcPrior:
    """PC-prior calibration: P(range < r0) = alpha_r, P(sigma > sigma0) = alpha_sigma.

    With ``fixed_range`` set the range is not a hyperparameter (the RW2
    construction) and the range factor of the density is omitted.
    """

    r0: float
    alpha_r: float
    sigma0: float
    alpha_sigma: float
    fixed_range: bool = False

    def __post_init__(self):
        if self.r0 <= 0 or self.sigma0 <= 0:
            raise InvalidGeometryError("r0 and sigma0 must be positive")
        if not (0 < self.alpha_r < 1 and 0 < self.alpha_sigma < 1):
            raise InvalidGeometryError("tail probabilities must be in (0, 1)")

    def lambda_range(self, d: int) -> float:
        return -math.log(self.alpha_r) * self.r0 ** (d / 2.0)

    @property
    def lambda_sigma(self) -> float:
        return -math.log(self.alpha_sigma) / self.sigma0


def pc_prior_logdens(r: float, sigma: float, prior: PcPrior, d: int = 2) -> float:
    """log pi(r, sigma) for the PC prior; range factor dropped in RW2 mode."""
    if r <= 0 or sigma <= 0:
        return -math.inf
    lam_s = prior.lambda_sigma
    out = math.log(lam_s) - lam_s * sigma
    if not prior.fixed_range:
        lam_r = prior.lambda_range(d)
        out += (
            math.log(d / 2.0)
            + math.log(lam_r)
            + (-d / 2.0 - 1.0) * math.log(r)
            - lam_r * r ** (-d / 2.0)
        )
    return out


@dataclass
class SpdeModel:
    """A Matérn field over a mesh: FEM matrices, prior, constraint flag."""

    mesh: object  # Mesh2d or Mesh1d
    fem: FemMatrices
    prior: PcPrior
    constrain_sum_to_zero: bool = False
    d: int = 2

    @property
    def size(self) -> int:
        return self.fem.size

    @property
    def n_hyper(self) -> int:
        return 1 if self.prior.fixed_range else 2

    def precision(self, r: float, sigma: float) -> sp.csr_matrix:
        kappa, tau = params_from_range_sigma(r, sigma, d=self.d)
        return precision_alpha2(self.fem, kappa, tau)

    def hyper_logprior(self, r: float, sigma: float) -> float:
        return pc_prior_logdens(r, sigma, self.prior, d=self.d)


def matern_2d(mesh: Mesh2d, fem: FemMatrices, prior: PcPrior,
              constrain: bool = False) -> SpdeModel:
    return SpdeModel(mesh=mesh, fem=fem, prior=prior,
                     constrain_sum_to_zero=constrain, d=2)


def matern_1d(mesh: Mesh1d, fem: FemMatrices, prior: PcPrior,
              constrain: bool = True) -> SpdeModel:
    return SpdeModel(mesh=mesh, fem=fem, prior=prior,
                     constrain_sum_to_zero=constrain, d=1)


def rw2_model(mesh1d: Mesh1d, fem: FemMatrices, fixed_range: float = 10.0,
              sigma_prior=(1.0, 0.01)) -> SpdeModel:
    """Second-order random walk as the fixed-large-range 1D SPDE limit.

    Only sigma remains a hyperparameter; the sum-to-zero constraint is on.
    """
    if fixed_range <= 0:
        raise InvalidGeometryError("fixed_range must be positive")
    prior = PcPrior(
        r0=fixed_range,
        alpha_r=0.5,  # unused: range is fixed
        sigma0=sigma_prior[0],
        alpha_sigma=sigma_prior[1],
        fixed_range=True,
    )
    return SpdeModel(mesh=mesh1d, fem=fem, prior=prior,
                     constrain_sum_to_zero=True, d=1)
