"""Oscillating boundary probes and the approximate-solution corrector cascade.

A probe is phi^N(y') = N^{1/2-rho} eta(N^{1-rho} y') exp(i N y'.omega) a with a
smooth cutoff eta normalized to unit L2 mass, so the probe itself carries L2
mass |a|^2 / N. The interior extension is

    Phi^N(y) = e^{i N y'.omega} e^{-N y3} sum_n N^{-n rho} V^n(z', z3),

z' = N^{1-rho} y', z3 = N y3, where each V^n is exp(-z3) times a polynomial in
z3 whose coefficients are finite combinations of derivatives of eta. V^0 is the
decaying solution family of the frozen-coefficient operator; higher V^n are
produced by a cascade of constant-coefficient ODE solves in z3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .elastic import LameProfile
from .stroh import acoustic_bracket, sigma_basis

__all__ = [
    "AnsatzSolution",
    "BumpCutoff",
    "CascadeError",
    "DecayFit",
    "GaussianCutoff",
    "ProbeSpec",
    "boundary_datum",
    "build_correctors",
    "cascade_r1",
    "cascade_r2",
    "evaluate_ansatz",
    "leading_profile",
    "residual_decay",
    "sigma_expand",
]

_E3 = np.array([0.0, 0.0, 1.0])
_E = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), _E3]


# ---------------------------------------------------------------------------
# cutoff profiles
# ---------------------------------------------------------------------------


class CutoffProfile:
    """Smooth cutoff eta on R^2 with unit L2 mass and analytic derivatives.

    Subclasses provide ``_derivative_factory(beta)`` returning a vectorized
    callable for d^beta eta, a radial Fourier transform, and the spectral
    half-width needed to capture all but a given fraction of |eta_hat|^2 mass.
    """

    def __init__(self) -> None:
        self._deriv_cache: dict[tuple[int, int], Callable] = {}

    # -- spatial side

    def value(self, pts: np.ndarray) -> np.ndarray:
        return self.derivative((0, 0))(pts)

    def derivative(self, beta: tuple[int, int]) -> Callable[[np.ndarray], np.ndarray]:
        beta = (int(beta[0]), int(beta[1]))
        if beta not in self._deriv_cache:
            self._deriv_cache[beta] = self._derivative_factory(beta)
        return self._deriv_cache[beta]

    def _derivative_factory(self, beta):  # pragma: no cover - abstract
        raise NotImplementedError

    # -- Fourier side (radial)

    def fourier_radial(self, k: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def spectral_halfwidth(self, tail_tol: float) -> float:  # pragma: no cover
        raise NotImplementedError

    def l2_mass(self, n: int = 800) -> float:
        """Quadrature check of the normalization integral of eta^2."""
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (x + 1.0) * self.support_radius
        wr = 0.5 * self.support_radius * w
        pts = np.column_stack([r, np.zeros_like(r)])
        vals = self.value(pts)
        return float(2.0 * np.pi * np.sum(wr * r * vals**2))

    support_radius: float = 1.0


class GaussianCutoff(CutoffProfile):
    """Gaussian surrogate cutoff, L2-normalized, default sigma = 1/3.

    Not compactly supported: eta(|z'| = 1)/eta(0) = exp(-1/(2 sigma^2))
    (about 1.1e-2 at sigma = 1/3) and the L2 mass outside the unit disc is
    exp(-1/sigma^2) (about 1.2e-4). Used where compact support is immaterial
    and a closed-form Fourier transform pays: the pairing quadrature.
    """

    def __init__(self, sigma: float = 1.0 / 3.0) -> None:
        super().__init__()
        self.sigma = float(sigma)
        self.amplitude = 1.0 / (self.sigma * math.sqrt(math.pi))
        # effective radius only used for quadrature bounds
        self.support_radius = 8.0 * self.sigma

    def _derivative_factory(self, beta):
        s2 = math.sqrt(2.0) * self.sigma

        def herm(order: int):
            c = np.zeros(order + 1)
            c[order] = 1.0
            return c

        hx, hy = herm(beta[0]), herm(beta[1])

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            x, y = pts[..., 0], pts[..., 1]
            gx = np.polynomial.hermite.hermval(x / s2, hx) * (-1.0 / s2) ** beta[0]
            gy = np.polynomial.hermite.hermval(y / s2, hy) * (-1.0 / s2) ** beta[1]
            return self.amplitude * gx * gy * np.exp(-(x**2 + y**2) / (2.0 * self.sigma**2))

        return fn

    def fourier_radial(self, k):
        k = np.asarray(k, dtype=float)
        return self.amplitude * 2.0 * np.pi * self.sigma**2 * np.exp(-(self.sigma**2) * k**2 / 2.0)

    def spectral_halfwidth(self, tail_tol: float) -> float:
        # fraction of |eta_hat|^2 mass beyond radius W is exp(-sigma^2 W^2)
        return math.sqrt(-math.log(tail_tol)) / self.sigma


class BumpCutoff(CutoffProfile):
    """Mollifier bump exp(-s/(1-|z'|^2)) on the open unit disc, L2-normalized.

    The classic mollifier (s = 1) exceeds 1 by about 7% once its L2 mass is
    normalized; the default sharpness 0.7 keeps 0 <= eta <= 1, unit L2 mass
    and unit-disc support simultaneously. Derivatives are generated
    symbolically once per multi-index and evaluated only strictly inside the
    disc (exactly zero outside). The Fourier transform is tabulated once by a
    high-resolution Hankel quadrature.
    """

    def __init__(self, sharpness: float = 0.7, n_fourier: int = 2048,
                 k_max: float = 400.0) -> None:
        super().__init__()
        self.sharpness = float(sharpness)
        # L2 normalization constant, radially exact quadrature
        x, w = np.polynomial.legendre.leggauss(600)
        r = 0.5 * (x + 1.0)
        wr = 0.5 * w
        core = np.exp(-self.sharpness / (1.0 - r**2))
        mass = 2.0 * np.pi * np.sum(wr * r * core**2)
        self.amplitude = 1.0 / math.sqrt(mass)
        self._r_nodes = r
        self._r_weights = wr
        self._core = core
        self._k_grid = np.linspace(0.0, k_max, n_fourier)
        self._fourier_table = self._hankel(self._k_grid)
        self._spline = None

    def _hankel(self, k: np.ndarray) -> np.ndarray:
        from scipy.special import j0

        r, wr = self._r_nodes, self._r_weights
        vals = self.amplitude * self._core
        return 2.0 * np.pi * np.array(
            [np.sum(wr * r * vals * j0(kk * r)) for kk in np.atleast_1d(k)]
        )

    def _derivative_factory(self, beta):
        import sympy as sp

        x, y = sp.symbols("x y", real=True)
        expr = sp.exp(-sp.Rational(self.sharpness).limit_denominator(10**9)
                      / (1 - x**2 - y**2))
        expr = sp.diff(expr, x, beta[0], y, beta[1])
        f = sp.lambdify((x, y), sp.simplify(expr), modules="numpy")
        amp = self.amplitude

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            x_, y_ = pts[..., 0], pts[..., 1]
            r2 = x_**2 + y_**2
            out = np.zeros_like(r2)
            mask = r2 < 1.0 - 1e-12
            if np.any(mask):
                out[mask] = amp * np.asarray(f(x_[mask], y_[mask]), dtype=float)
            return out

        return fn

    def fourier_radial(self, k):
        from scipy.interpolate import CubicSpline

        if self._spline is None:
            self._spline = CubicSpline(self._k_grid, self._fourier_table)
        k = np.abs(np.asarray(k, dtype=float))
        out = np.where(k <= self._k_grid[-1], self._spline(np.minimum(k, self._k_grid[-1])), 0.0)
        return out

    def spectral_halfwidth(self, tail_tol: float) -> float:
        k = self._k_grid
        dens = np.abs(self._fourier_table) ** 2 * k
        cum = np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(k))
        total = cum[-1]
        frac = 1.0 - cum / total
        idx = np.searchsorted(-frac, -tail_tol)
        if idx >= len(k) - 1:
            raise ValueError(f"tabulated spectrum too short for tail {tail_tol}")
        return float(k[idx + 1])


# ---------------------------------------------------------------------------
# probe specification
# ---------------------------------------------------------------------------


def smallness_ok(m: int, rho_tilde: int, p: float) -> bool:
    rho = 1.0 / rho_tilde
    return rho < p and (1.0 - rho) * (m + p) >= m + rho


@dataclass(frozen=True)
class ProbeSpec:
    """Probe (a, omega', N, rho, m, cutoff) defining phi^N and all exponents."""

    a: np.ndarray
    omega: np.ndarray
    N: int
    rho_tilde: int
    m: int
    cutoff: CutoffProfile
    holder_exponent: float = 0.9

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=complex).ravel()
        if a.shape != (3,):
            raise ValueError("amplitude a must be a 3-vector")
        object.__setattr__(self, "a", a)
        w = np.asarray(self.omega, dtype=float).ravel()
        if w.size == 2:
            w = np.array([w[0], w[1], 0.0])
        if abs(w[2]) > 1e-14 or not np.isclose(np.linalg.norm(w), 1.0, atol=1e-12):
            raise ValueError("omega must be a unit tangent (omega_3 = 0)")
        object.__setattr__(self, "omega", w)
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.rho_tilde < 2:
            raise ValueError("rho_tilde must be an integer >= 2")
        if not smallness_ok(self.m, self.rho_tilde, self.holder_exponent):
            raise ValueError(
                f"smallness condition fails for m={self.m}, rho=1/{self.rho_tilde}, "
                f"p={self.holder_exponent}"
            )

    @property
    def rho(self) -> float:
        return 1.0 / self.rho_tilde

    @property
    def n_correctors(self) -> int:
        """m / rho, the depth of the corrector stack."""
        return self.m * self.rho_tilde

    @property
    def support_radius(self) -> float:
        """Support radius N^(rho-1) of the probe (compact cutoffs)."""
        return self.N ** (self.rho - 1.0)

    @staticmethod
    def auto_rho_tilde(m: int, p: float = 0.9, preferred: int = 4) -> int:
        """Preferred rho_tilde when admissible, else the smallest admissible one."""
        if smallness_ok(m, preferred, p):
            return preferred
        for rt in range(2, 64):
            if smallness_ok(m, rt, p):
                return rt
        raise ValueError(f"no admissible rho_tilde for m={m}, p={p}")

    def with_N(self, N: int) -> "ProbeSpec":
        return ProbeSpec(self.a, self.omega, N, self.rho_tilde, self.m, self.cutoff,
                         self.holder_exponent)


def boundary_datum(probe: ProbeSpec) -> Callable[[np.ndarray], np.ndarray]:
    """phi^N(y') = N^{1/2-rho} eta(N^{1-rho} y') exp(i N y'.omega') a."""
    N, rho = probe.N, probe.rho
    amp = N ** (0.5 - rho)
    scale = N ** (1.0 - rho)
    w2 = probe.omega[:2]
    eta = probe.cutoff.derivative((0, 0))

    def phi(yprime: np.ndarray) -> np.ndarray:
        yp = np.asarray(yprime, dtype=float)
        envelope = amp * eta(scale * yp)
        phase = np.exp(1j * N * (yp @ w2))
        return (envelope * phase)[..., None] * probe.a

    return phi


def sigma_expand(a, lam: float, mu: float, omega) -> tuple[complex, complex, complex]:
    """Coefficients of a in the sigma basis, with residual <= 1e-12 |a|."""
    a = np.asarray(a, dtype=complex).ravel()
    S = sigma_basis(lam, mu, omega)
    c = np.linalg.solve(S, a)
    resid = np.linalg.norm(S @ c - a)
    if resid > 1e-12 * max(1.0, np.linalg.norm(a)):
        raise RuntimeError(f"sigma expansion residual {resid}")
    return complex(c[0]), complex(c[1]), complex(c[2])


# ---------------------------------------------------------------------------
# z-polynomial representation: V = exp(-z3) * sum_d z3^d * combo_d(z'),
# combo = {beta: C^3 vector} standing for sum_beta v_beta * d^beta eta(z')
# ---------------------------------------------------------------------------

Combo = dict  # {(b1, b2): np.ndarray(3, complex)}
ZPoly = dict  # {degree d: Combo}


def _combo_add(dst: Combo, beta, vec) -> None:
    cur = dst.get(beta)
    dst[beta] = vec if cur is None else cur + vec


def _poly_add(dst: ZPoly, d: int, combo: Combo, factor: complex = 1.0) -> None:
    tgt = dst.setdefault(d, {})
    for beta, vec in combo.items():
        _combo_add(tgt, beta, factor * vec)


def _poly_clean(p: ZPoly, tol: float = 0.0) -> ZPoly:
    out: ZPoly = {}
    for d, combo in p.items():
        kept = {b: v for b, v in combo.items() if np.linalg.norm(v) > tol}
        if kept:
            out[d] = kept
    return out


def _poly_dz3(p: ZPoly) -> ZPoly:
    """d/dz3 of exp(-z3) * poly, expressed in the same representation."""
    out: ZPoly = {}
    for d, combo in p.items():
        _poly_add(out, d, combo, -1.0)
        if d >= 1:
            _poly_add(out, d - 1, combo, float(d))
    return out


def _poly_dzt(p: ZPoly, t: int) -> ZPoly:
    """Tangential derivative d/dz_t (t in {0, 1}) acting on the eta factors."""
    out: ZPoly = {}
    for d, combo in p.items():
        tgt = out.setdefault(d, {})
        for beta, vec in combo.items():
            nb = (beta[0] + 1, beta[1]) if t == 0 else (beta[0], beta[1] + 1)
            _combo_add(tgt, nb, vec)
    return out


def _poly_mat(p: ZPoly, M: np.ndarray, factor: complex = 1.0) -> ZPoly:
    out: ZPoly = {}
    for d, combo in p.items():
        out[d] = {beta: factor * (M @ vec) for beta, vec in combo.items()}
    return out


def _poly_shift(p: ZPoly, b: int) -> ZPoly:
    return {d + b: combo for d, combo in p.items()}


def _poly_accum(dst: ZPoly, src: ZPoly, factor: complex = 1.0) -> None:
    for d, combo in src.items():
        _poly_add(dst, d, combo, factor)


def _poly_max_norm(p: ZPoly) -> float:
    return max(
        (np.linalg.norm(v) for combo in p.values() for v in combo.values()),
        default=0.0,
    )


@dataclass(frozen=True)
class _Brackets:
    """Acoustic brackets of one (lam, mu) pair against e_t, e3 and omega."""

    T: np.ndarray
    A: np.ndarray  # <e3, omega>
    Q: np.ndarray
    Gt: tuple[np.ndarray, np.ndarray]  # <omega,e_t> + <e_t,omega>, t = 1, 2
    Ht: tuple[np.ndarray, np.ndarray]  # <e_t,e3> + <e3,e_t>
    Etu: tuple  # <e_t, e_u> for t,u = 1, 2
    E3t: tuple[np.ndarray, np.ndarray]  # <e3, e_t>


def _brackets(lam: float, mu: float, omega: np.ndarray) -> _Brackets:
    br = lambda xi, zeta: acoustic_bracket(lam, mu, xi, zeta)
    T = br(_E3, _E3)
    A = br(_E3, omega)
    Q = br(omega, omega)
    Gt = tuple(br(omega, _E[t]) + br(_E[t], omega) for t in range(2))
    Ht = tuple(br(_E[t], _E3) + br(_E3, _E[t]) for t in range(2))
    Etu = tuple(tuple(br(_E[t], _E[u]) for u in range(2)) for t in range(2))
    E3t = tuple(br(_E3, _E[t]) for t in range(2))
    return _Brackets(T, A, Q, Gt, Ht, Etu, E3t)


def _op0(B: _Brackets, p: ZPoly) -> ZPoly:
    """Frozen-coefficient depth operator T d3^2 + i(A + A^T) d3 - Q."""
    d1 = _poly_dz3(p)
    d2 = _poly_dz3(d1)
    out: ZPoly = {}
    _poly_accum(out, _poly_mat(d2, B.T))
    _poly_accum(out, _poly_mat(d1, B.A + B.A.T, 1.0j))
    _poly_accum(out, _poly_mat(p, B.Q, -1.0))
    return _poly_clean(out)


def _op1(B: _Brackets, p: ZPoly) -> ZPoly:
    """One-tangential-derivative operator (mixed z', z3 terms)."""
    out: ZPoly = {}
    d3 = _poly_dz3(p)
    for t in range(2):
        dt = _poly_dzt(p, t)
        _poly_accum(out, _poly_mat(dt, B.Gt[t], 1.0j))
        dtd3 = _poly_dzt(d3, t)
        _poly_accum(out, _poly_mat(dtd3, B.Ht[t]))
    return _poly_clean(out)


def _op2(B: _Brackets, p: ZPoly) -> ZPoly:
    """Two-tangential-derivative operator."""
    out: ZPoly = {}
    for t in range(2):
        for u in range(2):
            dtu = _poly_dzt(_poly_dzt(p, t), u)
            _poly_accum(out, _poly_mat(dtu, B.Etu[t][u]))
    return _poly_clean(out)


def _opd0(Bp: _Brackets, p: ZPoly) -> ZPoly:
    """Coefficient-gradient operator, zero tangential derivatives."""
    out: ZPoly = {}
    _poly_accum(out, _poly_mat(_poly_dz3(p), Bp.T))
    _poly_accum(out, _poly_mat(p, Bp.A, 1.0j))
    return _poly_clean(out)


def _opd1(Bp: _Brackets, p: ZPoly) -> ZPoly:
    """Coefficient-gradient operator with one tangential derivative."""
    out: ZPoly = {}
    for t in range(2):
        _poly_accum(out, _poly_mat(_poly_dzt(p, t), Bp.E3t[t]))
    return _poly_clean(out)


def cascade_r1(lam: float, mu: float, omega, d: int) -> np.ndarray:
    """d * [2 <e3,e3> - i(<omega,e3> + <e3,omega>)], invertible for d >= 1."""
    B = _brackets(lam, mu, np.asarray(omega, dtype=float))
    return d * (2.0 * B.T - 1.0j * (B.A + B.A.T)).astype(complex)


def cascade_r2(lam: float, mu: float, omega, d: int) -> np.ndarray:
    """-d(d-1) <e3,e3>."""
    B = _brackets(lam, mu, np.asarray(omega, dtype=float))
    return (-d * (d - 1)) * B.T.astype(complex)


class CascadeError(RuntimeError):
    """The stacked cascade solve failed its residual test."""


def _solve_l0(B: _Brackets, rhs: ZPoly, tol: float = 1e-10) -> ZPoly:
    """Solve op0 V = rhs for V = exp(-z3) * poly with V(0) = 0, bounded.

    The solve is one stacked linear system per eta-derivative basis element.
    Existence/uniqueness: the bounded solution with zero boundary trace is
    unique, so the stacked system is exactly consistent; the residual is
    asserted against ``tol``.
    """
    out: ZPoly = {}
    if not rhs:
        return out
    betas = sorted({beta for combo in rhs.values() for beta in combo})
    dmax = max(rhs.keys())
    for extra in (1, 2):
        dunk = dmax + extra
        # columns: op0 applied to monomial basis z3^d e_i, d = 1..dunk
        cols = []
        for d in range(1, dunk + 1):
            for i in range(3):
                basis = {d: {(0, 0): np.eye(3)[i].astype(complex)}}
                img = _op0(B, basis)
                col = np.zeros(3 * (dunk + 1), dtype=complex)
                for dd, combo in img.items():
                    col[3 * dd : 3 * dd + 3] = combo[(0, 0)]
                cols.append(col)
        M = np.column_stack(cols)
        ok = True
        sol_per_beta = {}
        for beta in betas:
            F = np.zeros(3 * (dunk + 1), dtype=complex)
            for d, combo in rhs.items():
                if beta in combo:
                    F[3 * d : 3 * d + 3] = combo[beta]
            P, *_ = np.linalg.lstsq(M, F, rcond=None)
            resid = np.linalg.norm(M @ P - F)
            if resid > tol * max(1.0, np.linalg.norm(F)):
                ok = False
                break
            sol_per_beta[beta] = P
        if ok:
            for beta, P in sol_per_beta.items():
                for d in range(1, dunk + 1):
                    vec = P[3 * (d - 1) : 3 * (d - 1) + 3]
                    if np.linalg.norm(vec) > 0.0:
                        _poly_add(out, d, {beta: vec})
            return _poly_clean(out, tol=1e-14 * max(1.0, _poly_max_norm(rhs)))
    raise CascadeError(
        f"stacked cascade solve inconsistent up to degree {dmax + 2} "
        f"(rhs degrees {sorted(rhs)})"
    )


@dataclass
class AnsatzSolution:
    """Corrector stack V^0 .. V^{m/rho} with its evaluator.

    ``stack[n]`` is the ZPoly of V^n, i.e. V^n = exp(-z3) sum_d z3^d P_n^d(z')
    with P_n^d a combination of eta derivatives.
    """

    probe: ProbeSpec
    lam0: float
    mu0: float
    c_sigma: tuple[complex, complex, complex]
    stack: list  # list[ZPoly]
    operators: list = field(default_factory=list, repr=False)  # list[callable], L_s

    def evaluate(self, y: np.ndarray, n_terms: int | None = None) -> np.ndarray:
        """Phi^N at points y (..., 3), y3 >= 0."""
        probe = self.probe
        y = np.asarray(y, dtype=float)
        yp, y3 = y[..., :2], y[..., 2]
        if np.any(y3 < -1e-15):
            raise ValueError("evaluation requires y3 >= 0")
        N, rho = probe.N, probe.rho
        zp = N ** (1.0 - rho) * yp
        z3 = N * y3
        amp = N ** (0.5 - rho)
        phase = np.exp(1j * N * (yp @ probe.omega[:2]))
        envelope = np.exp(-z3)
        total = np.zeros(y.shape[:-1] + (3,), dtype=complex)
        use = self.stack if n_terms is None else self.stack[:n_terms]
        for n, poly in enumerate(use):
            contrib = np.zeros_like(total)
            for d, combo in poly.items():
                zfac = z3**d
                for beta, vec in combo.items():
                    eta_b = probe.cutoff.derivative(beta)(zp)
                    contrib += (zfac * eta_b)[..., None] * vec
            total += N ** (-n * rho) * contrib
        return (amp * phase * envelope)[..., None] * total

    def cascade_residual(self, n: int, grid: Iterable[tuple[float, float, float]]) -> float:
        """Pointwise max of |op0 V^n + sum_s L_s V^{n-s}| on a (z1, z2, z3) grid."""
        B = _brackets(self.lam0, self.mu0, self.probe.omega)
        total: ZPoly = {}
        _poly_accum(total, _op0(B, self.stack[n]))
        for s in range(1, n + 1):
            _poly_accum(total, self.operators[s](self.stack[n - s]))
        total = _poly_clean(total)
        worst = 0.0
        for z1, z2, z3 in grid:
            zp = np.array([z1, z2])
            val = np.zeros(3, dtype=complex)
            for d, combo in total.items():
                for beta, vec in combo.items():
                    val += z3**d * float(self.probe.cutoff.derivative(beta)(zp)) * vec
            worst = max(worst, float(np.linalg.norm(val)) * math.exp(-z3))
        return worst


def leading_profile(probe: ProbeSpec, lam0: float, mu0: float) -> AnsatzSolution:
    """V^0 only: exp(-z3) eta(z') (a + i c3 z3 sigma_2)."""
    c1, c2, c3 = sigma_expand(probe.a, lam0, mu0, probe.omega)
    S = sigma_basis(lam0, mu0, probe.omega)
    v0: ZPoly = {0: {(0, 0): probe.a.astype(complex)}}
    corr = 1.0j * c3 * S[:, 1]
    if np.linalg.norm(corr) > 0.0:
        v0[1] = {(0, 0): corr}
    return AnsatzSolution(probe, lam0, mu0, (c1, c2, c3), [v0])


def _assemble_operators(probe: ProbeSpec, profile: LameProfile, s_max: int):
    """L_s, s = 0..s_max, for a depth-only profile (Taylor order m)."""
    m = probe.m
    lam_b, mu_b = profile.taylor_coefficients(m)
    rt = probe.rho_tilde
    omega = probe.omega
    B_b = [_brackets(lam_b[b], mu_b[b], omega) for b in range(m + 1)]
    ops: list[Callable[[ZPoly], ZPoly]] = []
    for s in range(s_max + 1):
        terms: list[tuple[int, Callable, _Brackets]] = []
        for b in range(m + 1):
            t = s - b * rt
            if t == 0:
                terms.append((b, _op0, B_b[b]))
            elif t == 1:
                terms.append((b, _op1, B_b[b]))
            elif t == 2:
                terms.append((b, _op2, B_b[b]))
        for b in range(m):
            tau = s - (b + 1) * rt
            if tau in (0, 1):
                scale = b + 1
                Bp = _brackets(scale * lam_b[b + 1], scale * mu_b[b + 1], omega)
                terms.append((b, _opd0 if tau == 0 else _opd1, Bp))

        def L_s(p: ZPoly, terms=tuple(terms)) -> ZPoly:
            out: ZPoly = {}
            for b, op, Bx in terms:
                _poly_accum(out, _poly_shift(op(Bx, p), b))
            return _poly_clean(out)

        ops.append(L_s)
    return ops


def build_correctors(probe: ProbeSpec, profile: LameProfile) -> AnsatzSolution:
    """Full stack V^0 .. V^{m/rho} for a depth-only profile.

    Each cascade equation op0 V^n = -sum_{s=1..n} L_s V^{n-s} is solved exactly
    (stacked linear solve per eta-derivative basis element) and the boundary
    traces V^n(z', 0) = 0 for n >= 1 hold by construction.
    """
    if probe.m > profile.max_derivative_order:
        raise ValueError(
            f"profile provides derivatives up to {profile.max_derivative_order}, "
            f"probe requires m = {probe.m}"
        )
    lam0 = float(profile.lam(0.0))
    mu0 = float(profile.mu(0.0))
    sol = leading_profile(probe, lam0, mu0)
    n_max = probe.n_correctors
    ops = _assemble_operators(probe, profile, n_max)
    B0 = _brackets(lam0, mu0, probe.omega)
    for n in range(1, n_max + 1):
        rhs: ZPoly = {}
        for s in range(1, n + 1):
            _poly_accum(rhs, ops[s](sol.stack[n - s]), -1.0)
        rhs = _poly_clean(rhs, tol=1e-15)
        sol.stack.append(_solve_l0(B0, rhs))
    sol.operators = ops
    return sol


def evaluate_ansatz(stack: AnsatzSolution, probe: ProbeSpec, y: np.ndarray) -> np.ndarray:
    """Phi^N at points y for the given probe.

    The corrector stack is N-independent; a probe differing only in N rebinds
    the stack. A probe with different amplitude or direction is rejected.
    """
    if probe is not stack.probe:
        same = (
            np.allclose(probe.a, stack.probe.a)
            and np.allclose(probe.omega, stack.probe.omega)
            and probe.rho_tilde == stack.probe.rho_tilde
            and probe.m == stack.probe.m
        )
        if not same:
            raise ValueError("stack was built for a different probe template")
        stack = AnsatzSolution(probe, stack.lam0, stack.mu0, stack.c_sigma,
                               stack.stack, stack.operators)
    return stack.evaluate(y)


# ---------------------------------------------------------------------------
# residual decay of the full operator, by finite differences
# ---------------------------------------------------------------------------

_FD1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFS = np.arange(-2, 3)


def _iso_components(lam: float, mu: float) -> np.ndarray:
    d = np.eye(3)
    return (
        lam * np.einsum("ij,kl->ijkl", d, d)
        + mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
    )


def _apply_operator_fd(
    profile: LameProfile,
    evaluator: Callable[[np.ndarray], np.ndarray],
    centers: np.ndarray,
    steps: np.ndarray,
) -> np.ndarray:
    """div(C grad u) at each center by 4th-order finite differences.

    For depth-only coefficients: (Lu)_i = C_ijkl d_j d_l u_k
    + (d3 C)_i3kl d_l u_k.
    """
    n = centers.shape[0]
    offsets = np.stack(np.meshgrid(_OFFS, _OFFS, _OFFS, indexing="ij"), axis=-1)
    pts = centers[:, None, None, None, :] + offsets[None] * steps[None, None, None, None, :]
    vals = evaluator(pts.reshape(-1, 3)).reshape(n, 5, 5, 5, 3)

    out = np.zeros((n, 3), dtype=complex)
    w1 = {ax: _FD1 / steps[ax] for ax in range(3)}
    w2 = {ax: _FD2 / steps[ax] ** 2 for ax in range(3)}
    iC = np.array([2, 2, 2])  # index of the center in each stencil axis

    def first(ax):
        sl = [iC[0], iC[1], iC[2]]
        acc = np.zeros((n, 3), dtype=complex)
        for t, o in enumerate(_OFFS):
            idx = list(sl)
            idx[ax] = iC[ax] + o
            acc += w1[ax][t] * vals[:, idx[0], idx[1], idx[2], :]
        return acc

    def second(ax):
        acc = np.zeros((n, 3), dtype=complex)
        for t, o in enumerate(_OFFS):
            idx = [iC[0], iC[1], iC[2]]
            idx[ax] = iC[ax] + o
            acc += w2[ax][t] * vals[:, idx[0], idx[1], idx[2], :]
        return acc

    def mixed(ax1, ax2):
        acc = np.zeros((n, 3), dtype=complex)
        for t1, o1 in enumerate(_OFFS):
            for t2, o2 in enumerate(_OFFS):
                idx = [iC[0], iC[1], iC[2]]
                idx[ax1] = iC[ax1] + o1
                idx[ax2] = iC[ax2] + o2
                acc += w1[ax1][t1] * w1[ax2][t2] * vals[:, idx[0], idx[1], idx[2], :]
        return acc

    hess = {}
    for j in range(3):
        for l in range(j, 3):
            hess[(j, l)] = second(j) if j == l else mixed(j, l)
    grad = {l: first(l) for l in range(3)}

    y3 = centers[:, 2]
    lam = np.asarray(profile.lam(y3), dtype=float)
    mu = np.asarray(profile.mu(y3), dtype=float)
    dlam = np.asarray(profile.lam(y3, 1), dtype=float)
    dmu = np.asarray(profile.mu(y3, 1), dtype=float)

    for p in range(n):
        C = _iso_components(lam[p], mu[p])
        dC = _iso_components(dlam[p], dmu[p])
        acc = np.zeros(3, dtype=complex)
        for j in range(3):
            for l in range(3):
                H = hess[(min(j, l), max(j, l))][p]
                acc += C[:, j, :, l] @ H
        for l in range(3):
            acc += dC[:, 2, :, l] @ grad[l][p]
        out[p] = acc
    return out


@dataclass(frozen=True)
class DecayFit:
    """Decay fit of the amplitude-normalized residual sup norm.

    ``slope`` is the leading exponent of the two-term model
    c1 N^q + c2 N^{q - rho}; the cascade produces a residual series with
    exponents spaced by rho, and at desk-scale N the subleading constant can
    exceed the leading one severalfold, which makes the raw log-log slope
    (``raw_slope``, kept as a diagnostic) sit between the two exponents.
    """

    N_values: np.ndarray
    norms: np.ndarray
    slope: float
    raw_slope: float
    coefficients: tuple[float, float]
    misfit: float
    fd_disagreement: float

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def _two_term_exponent(N: np.ndarray, norms: np.ndarray, rho: float):
    """Scan the leading exponent of c1 N^q + c2 N^{q-rho} by relative LSQ."""
    best = (math.inf, 0.0, (0.0, 0.0))
    for q in np.arange(0.0, 3.0 + 1e-9, 0.0025):
        B = np.column_stack([N**q, N ** (q - rho)]) / norms[:, None]
        c, *_ = np.linalg.lstsq(B, np.ones(N.size), rcond=None)
        mis = float(np.linalg.norm(B @ c - 1.0))
        if mis < best[0]:
            best = (mis, float(q), (float(c[0]), float(c[1])))
    return best[1], best[2], best[0]


def residual_decay(
    probes: list[ProbeSpec],
    profile: LameProfile,
    fd_delta: float = 0.08,
    n_zprime: int = 12,
    n_depth: int = 14,
) -> DecayFit:
    """Fitted decay exponent of sup |L Phi^N| over a dyadic probe ladder.

    The operator is applied by 4th-order finite differences of the ansatz
    evaluator on a graded grid resolving exp(-N y3); norms are divided by the
    probe amplitude N^{1/2 - rho} so the fitted slope is comparable with the
    unnormalized bound N^{2 - m - rho}. A step-halving disagreement at the
    largest N is reported; values above ~10% of the norm indicate the
    finite-difference error dominates.
    """
    if len(probes) < 4:
        raise ValueError("need at least 4 ladder probes")
    template = probes[0]
    stack = build_correctors(template, profile)

    rng = np.random.default_rng(7)
    radii = np.sqrt(rng.uniform(0.0, 0.8, n_zprime))
    angles = rng.uniform(0.0, 2.0 * np.pi, n_zprime)
    zp = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    z3 = np.geomspace(0.3, 6.0, n_depth)

    def sup_norm(probe: ProbeSpec, delta: float) -> float:
        sol = AnsatzSolution(probe, stack.lam0, stack.mu0, stack.c_sigma,
                             stack.stack, stack.operators)
        N, rho = probe.N, probe.rho
        yp = zp * N ** (rho - 1.0)
        y3 = z3 / N
        centers = np.column_stack(
            [np.repeat(yp, len(y3), axis=0), np.tile(y3, len(yp))]
        )
        steps = np.array(
            [delta * N ** (rho - 1.0), delta * N ** (rho - 1.0), delta / N]
        )
        Lphi = _apply_operator_fd(profile, sol.evaluate, centers, steps)
        return float(np.max(np.linalg.norm(Lphi, axis=1))) / N ** (0.5 - rho)

    Ns = np.array([p.N for p in probes], dtype=float)
    norms = np.array([sup_norm(p, fd_delta) for p in probes])
    check = sup_norm(probes[-1], fd_delta / 2.0)
    fd_disagreement = abs(check - norms[-1]) / max(norms[-1], 1e-300)
    raw_slope = float(np.polyfit(np.log(Ns), np.log(norms), 1)[0])
    q, coeffs, misfit = _two_term_exponent(Ns, norms, template.rho)
    return DecayFit(Ns, norms, q, raw_slope, coeffs, misfit, float(fd_disagreement))
