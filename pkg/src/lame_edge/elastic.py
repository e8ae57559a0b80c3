"""Isotropic elastic tensor algebra, admissibility checks and depth profiles.

All moduli are treated as dimensionless. Profiles depend on depth y3 >= 0 only;
tangentially varying coefficients are out of scope for the whole package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AdmissibilityError",
    "AdmissibilityReport",
    "DisplacementJet",
    "IsotropicTensor",
    "LameProfile",
    "TruncatedProfile",
    "check_admissible",
    "energy_density",
    "taylor_truncate",
    "tensor_components",
    "validate_admissibility",
    "voigt_matrix",
]


class AdmissibilityError(ValueError):
    """Raised when (lambda, mu) violate mu > 0 or 3*lambda + 2*mu > 0."""


def check_admissible(lam: float, mu: float) -> None:
    """Reject inadmissible moduli, naming the violated condition."""
    if not mu > 0.0:
        raise AdmissibilityError(f"shear modulus must be positive: mu = {mu}")
    if not 3.0 * lam + 2.0 * mu > 0.0:
        raise AdmissibilityError(
            f"bulk condition violated: 3*lambda + 2*mu = {3.0 * lam + 2.0 * mu}"
        )


def tensor_components(lam: float, mu: float) -> np.ndarray:
    """Full rank-4 components C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk).

    Parameters
    ----------
    lam, mu : float
        Admissible moduli (checked).

    Returns
    -------
    (3, 3, 3, 3) float array with both minor and major symmetries exact.
    """
    check_admissible(lam, mu)
    d = np.eye(3)
    return (
        lam * np.einsum("ij,kl->ijkl", d, d)
        + mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
    )


def voigt_matrix(lam: float, mu: float) -> np.ndarray:
    """6x6 Voigt matrix of the isotropic tensor (order 11, 22, 33, 23, 13, 12).

    Its smallest eigenvalue is min(2*mu, 3*lam + 2*mu), which is the sharp
    strong-convexity constant over symmetric strains.
    """
    check_admissible(lam, mu)
    V = np.zeros((6, 6))
    V[:3, :3] = lam
    V[np.diag_indices(3)] += 2.0 * mu
    V[3, 3] = V[4, 4] = V[5, 5] = 2.0 * mu
    return V


@dataclass(frozen=True)
class IsotropicTensor:
    """Pointwise isotropic elastic tensor."""

    lam: float
    mu: float

    def __post_init__(self) -> None:
        check_admissible(self.lam, self.mu)

    @property
    def components(self) -> np.ndarray:
        return tensor_components(self.lam, self.mu)

    def convexity_constant(self) -> float:
        return min(2.0 * self.mu, 3.0 * self.lam + 2.0 * self.mu)


@dataclass(frozen=True)
class DisplacementJet:
    """Gradient of a displacement field at a point (complex allowed)."""

    gradient: np.ndarray  # (3, 3), entry [k, l] = d u_k / d y_l

    def __post_init__(self) -> None:
        g = np.asarray(self.gradient, dtype=complex)
        if g.shape != (3, 3):
            raise ValueError(f"gradient must be 3x3, got {g.shape}")
        object.__setattr__(self, "gradient", g)

    @property
    def strain(self) -> np.ndarray:
        return 0.5 * (self.gradient + self.gradient.T)

    @property
    def div(self) -> complex:
        return complex(np.trace(self.gradient))


def energy_density(C: IsotropicTensor, ju: DisplacementJet, jv: DisplacementJet) -> complex:
    """Sesquilinear energy density lam div(u) conj(div v) + 2 mu eps(u):conj(eps(v))."""
    eu, ev = ju.strain, jv.strain
    return C.lam * ju.div * np.conj(jv.div) + 2.0 * C.mu * np.sum(eu * np.conj(ev))


class LameProfile:
    """Depth-dependent Lame moduli lambda(y3), mu(y3) with exact derivatives.

    The canonical representation is a pair of polynomials in y3 (ascending
    coefficients); closed-form profiles are supported in-process through
    callables f(y3, order) returning the order-th derivative.

    Parameters
    ----------
    lam, mu : callable
        f(y3, order) -> value; y3 may be an array.
    max_derivative_order : int
        m >= 0; derivatives up to this order must evaluate at y3 = 0.
    holder_exponent : float
        p in (0, 1), metadata used by probe validation.
    lam_coeffs, mu_coeffs : optional ascending coefficient lists when the
        profile is polynomial (the on-disk form).
    """

    def __init__(
        self,
        lam: Callable[[np.ndarray, int], np.ndarray],
        mu: Callable[[np.ndarray, int], np.ndarray],
        max_derivative_order: int = 2,
        holder_exponent: float = 0.9,
        lam_coeffs: Sequence[float] | None = None,
        mu_coeffs: Sequence[float] | None = None,
        name: str = "profile",
    ) -> None:
        if max_derivative_order < 0:
            raise ValueError("max_derivative_order must be >= 0")
        if not 0.0 < holder_exponent < 1.0:
            raise ValueError("holder_exponent must lie in (0, 1)")
        self._lam = lam
        self._mu = mu
        self.max_derivative_order = int(max_derivative_order)
        self.holder_exponent = float(holder_exponent)
        self.lam_coeffs = None if lam_coeffs is None else [float(c) for c in lam_coeffs]
        self.mu_coeffs = None if mu_coeffs is None else [float(c) for c in mu_coeffs]
        self.name = name
        # derivatives up to m must evaluate at the surface
        for order in range(self.max_derivative_order + 1):
            float(np.asarray(self._lam(np.asarray(0.0), order)))
            float(np.asarray(self._mu(np.asarray(0.0), order)))

    @staticmethod
    def from_polynomial(
        lam_coeffs: Sequence[float],
        mu_coeffs: Sequence[float],
        max_derivative_order: int = 2,
        holder_exponent: float = 0.9,
        name: str = "profile",
    ) -> "LameProfile":
        """Profile from ascending polynomial coefficients in y3."""
        lp = np.polynomial.Polynomial(list(lam_coeffs))
        mp = np.polynomial.Polynomial(list(mu_coeffs))

        def lam(y3, order=0):
            return lp.deriv(order)(y3) if order else lp(y3)

        def mu(y3, order=0):
            return mp.deriv(order)(y3) if order else mp(y3)

        return LameProfile(
            lam,
            mu,
            max_derivative_order,
            holder_exponent,
            lam_coeffs=list(lam_coeffs),
            mu_coeffs=list(mu_coeffs),
            name=name,
        )

    @staticmethod
    def constant(lam: float, mu: float, name: str = "homogeneous") -> "LameProfile":
        return LameProfile.from_polynomial([lam], [mu], name=name)

    @property
    def is_polynomial(self) -> bool:
        return self.lam_coeffs is not None and self.mu_coeffs is not None

    def lam(self, y3, order: int = 0):
        return self._lam(np.asarray(y3, dtype=float), order)

    def mu(self, y3, order: int = 0):
        return self._mu(np.asarray(y3, dtype=float), order)

    def at(self, y3: float) -> IsotropicTensor:
        return IsotropicTensor(float(self.lam(y3)), float(self.mu(y3)))

    def taylor_coefficients(self, order: int) -> tuple[np.ndarray, np.ndarray]:
        """(lam_b, mu_b) with f(y3) ~ sum_b f_b y3^b up to the given order."""
        fact = 1.0
        lam_b, mu_b = [], []
        for b in range(order + 1):
            if b > 0:
                fact *= b
            lam_b.append(float(self.lam(0.0, b)) / fact)
            mu_b.append(float(self.mu(0.0, b)) / fact)
        return np.array(lam_b), np.array(mu_b)

    def __repr__(self) -> str:  # pragma: no cover
        return f"LameProfile({self.name}, m={self.max_derivative_order})"


@dataclass(frozen=True)
class TruncatedProfile:
    """Degree-(m-1) Taylor truncation of a profile at the surface."""

    base: LameProfile
    order: int
    result: LameProfile


def taylor_truncate(profile: LameProfile, m: int) -> TruncatedProfile:
    """Replace lambda, mu by their degree-(m-1) Taylor polynomials at y3 = 0.

    Exact for polynomial inputs of degree < m; idempotent at fixed m.
    """
    if m < 1:
        raise ValueError("truncation order m must be >= 1")
    if m - 1 > profile.max_derivative_order:
        raise ValueError(
            f"profile provides derivatives up to order {profile.max_derivative_order}, "
            f"truncation at m = {m} needs order {m - 1}"
        )
    lam_b, mu_b = profile.taylor_coefficients(m - 1)
    result = LameProfile.from_polynomial(
        lam_b,
        mu_b,
        max_derivative_order=profile.max_derivative_order,
        holder_exponent=profile.holder_exponent,
        name=f"{profile.name}|trunc{m}",
    )
    return TruncatedProfile(base=profile, order=m, result=result)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Sampled admissibility of a profile on [0, H]."""

    H: float
    n_samples: int
    min_mu: float
    min_bulk: float  # min of 3*lambda + 2*mu
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", self.min_mu > 0.0 and self.min_bulk > 0.0)


def validate_admissibility(
    profile: LameProfile, H: float, n_samples: int = 1024
) -> AdmissibilityReport:
    """Dense-sampling admissibility check of mu > 0 and 3*lambda + 2*mu > 0 on [0, H]."""
    if H <= 0.0:
        raise ValueError("H must be positive")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    y = np.linspace(0.0, H, n_samples)
    lam = np.asarray(profile.lam(y), dtype=float)
    mu = np.asarray(profile.mu(y), dtype=float)
    return AdmissibilityReport(
        H=float(H),
        n_samples=int(n_samples),
        min_mu=float(mu.min()),
        min_bulk=float((3.0 * lam + 2.0 * mu).min()),
    )
