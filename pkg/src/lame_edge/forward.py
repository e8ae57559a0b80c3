"""Ground-truth DN pairings for depth-stratified profiles.

Geometry convention: the half-space is {y3 > 0}, the outward unit normal is
nu = (0, 0, -1). For tangential frequency k the displacement trace determines
a traction trace through the 3x3 symbol M(k); the sign of M is fixed by
requiring the equal-slot pairing <traction, trace> to be positive (elastic
energy), which makes M Hermitian positive definite.

The primary solver propagates the impedance (a matrix Riccati flow) from a
truncation depth H(k) = min(H_max, efolds/|k|) to the surface, initialized
with the frozen-coefficient half-space impedance built from the Jordan family
of the depth-frozen first-order system. A brute-force orthonormalized
subspace march provides an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .ansatz import ProbeSpec
from .elastic import LameProfile, taylor_truncate, validate_admissibility
from .stroh import reference_chain

__all__ = [
    "DtnSymbol",
    "ForwardError",
    "HalfSpaceFrame",
    "PairingResult",
    "QuadratureSettings",
    "RadialDtnTable",
    "depth_stroh",
    "difference_pairing",
    "dtn_symbol",
    "dtn_symbol_march",
    "half_space_impedance",
    "limit_quadrature",
    "pairing",
    "pairing_grid",
    "required_k_max",
    "warm_tables",
]


class ForwardError(RuntimeError):
    """Forward-solver diagnostic (stiff segment, admissibility, tail)."""


@dataclass(frozen=True)
class HalfSpaceFrame:
    """Domain {y3 > 0} with outward normal (0, 0, -1) and truncation policy."""

    H_max: float = 2.0
    efolds: float = 14.0

    outward_normal = np.array([0.0, 0.0, -1.0])

    def depth(self, k) -> float:
        kn = float(np.linalg.norm(k))
        if kn == 0.0:
            return self.H_max
        return min(self.H_max, self.efolds / kn)


DEFAULT_FRAME = HalfSpaceFrame()


def _unit_tangent(k) -> tuple[float, np.ndarray]:
    k = np.asarray(k, dtype=float).ravel()
    if k.size == 3:
        if abs(k[2]) > 1e-14:
            raise ValueError("tangential frequency must have k3 = 0")
        k = k[:2]
    if k.shape != (2,):
        raise ValueError("k must be a 2-vector")
    kn = float(np.hypot(k[0], k[1]))
    if kn == 0.0:
        return 0.0, np.array([1.0, 0.0, 0.0])
    return kn, np.array([k[0] / kn, k[1] / kn, 0.0])


def _coeff_blocks(lam: float, mu: float, what: np.ndarray):
    """T, A = <e3, what>, Q = <what, what> for a unit tangent ``what``."""
    T = np.diag([mu, mu, lam + 2.0 * mu])
    w = what
    A = lam * np.outer(_E3, w) + mu * np.outer(w, _E3)
    Q = (lam + mu) * np.outer(w, w) + mu * np.eye(3)
    return T, A, Q


_E3 = np.array([0.0, 0.0, 1.0])


def depth_stroh(profile: LameProfile, y3: float, k) -> np.ndarray:
    """First-order 6x6 matrix of the depth-frozen medium at (y3, k).

    Same state convention as :func:`lame_edge.stroh.stroh_matrix`; for a
    constant profile and |k| = 1 the two agree exactly.
    """
    kn, what = _unit_tangent(k)
    lam = float(profile.lam(y3))
    mu = float(profile.mu(y3))
    T, Ah, Qh = _coeff_blocks(lam, mu, what)
    A, Q = kn * Ah, kn**2 * Qh
    Ti = np.diag(1.0 / np.diag(T))
    K = np.zeros((6, 6), dtype=complex)
    K[:3, :3] = -Ti @ A
    K[:3, 3:] = Ti
    K[3:, :3] = -Q + A.T @ Ti @ A
    K[3:, 3:] = -A.T @ Ti
    return K


def half_space_impedance(lam: float, mu: float, k) -> np.ndarray:
    """Homogeneous half-space DtN symbol M with traction = M . displacement.

    Built from the decaying (+i) Jordan family: surface states q_g = [u_g; w_g]
    carry traction density tau = i w, and the traction with respect to the
    outward normal is -tau, so M = -|k| i W U^{-1}. Hermitian positive
    definite and degree-1 homogeneous in k.
    """
    kn, what = _unit_tangent(k)
    if kn == 0.0:
        return np.zeros((3, 3), dtype=complex)
    q1, q2, q3 = reference_chain(lam, mu, what)
    U = np.column_stack([q1[:3], q2[:3], q3[:3]])
    W = np.column_stack([q1[3:], q2[3:], q3[3:]])
    return -kn * 1.0j * W @ np.linalg.inv(U)


@dataclass(frozen=True)
class DtnSymbol:
    """DtN symbol at one tangential frequency, with solver metadata."""

    k: np.ndarray
    matrix: np.ndarray
    H: float
    method: str
    tol: float
    n_steps: int

    @property
    def hermiticity_defect(self) -> float:
        M = self.matrix
        s = max(1.0, float(np.abs(M).max()))
        return float(np.abs(M - M.conj().T).max()) / s


def _riccati_rhs_factory(profile: LameProfile, kn: float, what: np.ndarray):
    """d S_hat / dt on the scaled depth t = |k| y3, S_hat = S / |k|."""

    def rhs(t, y):
        S = y.reshape(3, 3)
        lam = float(profile.lam(t / kn))
        mu = float(profile.mu(t / kn))
        T, A, Q = _coeff_blocks(lam, mu, what)
        Ti = np.diag(1.0 / np.diag(T))
        AtTi = A.T @ Ti
        dS = (Q - AtTi @ A) - 1.0j * AtTi @ S + 1.0j * S @ Ti @ A - S @ Ti @ S
        return dS.ravel()

    return rhs


def dtn_symbol(
    profile: LameProfile,
    k,
    tol: float = 1e-10,
    frame: HalfSpaceFrame = DEFAULT_FRAME,
    check_admissibility: bool = True,
) -> DtnSymbol:
    """Surface DtN symbol M(k) by stable impedance marching.

    Integrates the impedance Riccati flow from the truncation depth
    (initialized with the frozen-coefficient half-space impedance) down to
    the surface. The flow contracts toward the decaying-family impedance, so
    truncation and initialization errors decay like exp(-2 |k| (H - y3)).
    """
    kn, what = _unit_tangent(k)
    H = frame.depth(k)
    if check_admissibility:
        rep = validate_admissibility(profile, H, n_samples=64)
        if not rep.passed:
            raise ForwardError(
                f"profile inadmissible on [0, {H}]: min mu = {rep.min_mu}, "
                f"min 3lam+2mu = {rep.min_bulk}"
            )
    if kn == 0.0:
        return DtnSymbol(np.zeros(2), np.zeros((3, 3), complex), H, "riccati", tol, 0)
    lamH = float(profile.lam(H))
    muH = float(profile.mu(H))
    S_init = -half_space_impedance(lamH, muH, kn * what[:2]) / kn
    rhs = _riccati_rhs_factory(profile, kn, what)
    sol = solve_ivp(
        rhs,
        (kn * H, 0.0),
        S_init.ravel(),
        method="DOP853",
        rtol=tol,
        atol=tol,
    )
    if not sol.success:
        raise ForwardError(
            f"Riccati integration failed at t = {sol.t[-1]} "
            f"(depth {sol.t[-1] / kn}): {sol.message}"
        )
    S0 = sol.y[:, -1].reshape(3, 3)
    M = -kn * S0
    M = 0.5 * (M + M.conj().T)  # flow preserves Hermiticity; discard roundoff skew
    return DtnSymbol(kn * what[:2], M, H, "riccati", tol, int(sol.t.size))


def dtn_symbol_march(
    profile: LameProfile,
    k,
    n_steps: int = 600,
    frame: HalfSpaceFrame = DEFAULT_FRAME,
) -> np.ndarray:
    """Independent oracle: orthonormalized marching of the decaying subspace.

    Fixed-grid RK4 on the full 6x3 linear system with per-step QR
    re-orthonormalization; M is recovered from the surface trace pair.
    """
    kn, what = _unit_tangent(k)
    if kn == 0.0:
        return np.zeros((3, 3), dtype=complex)
    H = frame.depth(k)

    def sys_rhs(t, Y):
        lam = float(profile.lam(t / kn))
        mu = float(profile.mu(t / kn))
        T, A, Q = _coeff_blocks(lam, mu, what)
        Ti = np.diag(1.0 / np.diag(T))
        top = -1.0j * Ti @ A @ Y[:3] + Ti @ Y[3:]
        bot = (Q - A.T @ Ti @ A) @ Y[:3] - 1.0j * A.T @ Ti @ Y[3:]
        return np.vstack([top, bot])

    lamH = float(profile.lam(H))
    muH = float(profile.mu(H))
    S_H = -half_space_impedance(lamH, muH, kn * what[:2]) / kn
    Y = np.vstack([np.eye(3, dtype=complex), S_H])
    t = kn * H
    dt = -t / n_steps
    for _ in range(n_steps):
        k1 = sys_rhs(t, Y)
        k2 = sys_rhs(t + dt / 2, Y + dt / 2 * k1)
        k3 = sys_rhs(t + dt / 2, Y + dt / 2 * k2)
        k4 = sys_rhs(t + dt, Y + dt * k3)
        Y = Y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        Y, _ = np.linalg.qr(Y)
    S0 = Y[3:] @ np.linalg.inv(Y[:3])
    return -kn * S0


def _batch_radial_symbols(
    profile: LameProfile,
    nodes: np.ndarray,
    tol: float,
    frame: HalfSpaceFrame,
) -> np.ndarray:
    """M(r e1) for every radial node, integrating all Riccati flows jointly.

    Nodes with r <= efolds/H_max share the depth span [H_max, 0] and are
    integrated in physical depth; deeper-frequency nodes share the scaled span
    [efolds, 0]. Identical truncation policy and initialization as
    :func:`dtn_symbol`, amortizing the integrator overhead across nodes.
    """
    e1 = np.array([1.0, 0.0, 0.0])
    P31 = np.outer(_E3, e1)
    P13 = np.outer(e1, _E3)
    P11 = np.outer(e1, e1)
    I3 = np.eye(3)
    split = frame.efolds / frame.H_max
    out = np.zeros((nodes.size, 3, 3), dtype=complex)

    def init_S(rs: np.ndarray, scaled: bool) -> np.ndarray:
        S0 = np.empty((rs.size, 3, 3), dtype=complex)
        for i, r in enumerate(rs):
            if r == 0.0:
                S0[i] = 0.0
                continue
            H = frame.depth((r, 0.0))
            lamH, muH = float(profile.lam(H)), float(profile.mu(H))
            M = half_space_impedance(lamH, muH, (r, 0.0))
            S0[i] = -M / (r if scaled else 1.0)
        return S0

    low = nodes[nodes <= split]
    if low.size:
        rs = low

        def rhs_low(y3, y):
            S = y.reshape(-1, 3, 3)
            lam = float(profile.lam(y3))
            mu = float(profile.mu(y3))
            Ti = np.diag([1.0 / mu, 1.0 / mu, 1.0 / (lam + 2.0 * mu)])
            Ah = lam * P31 + mu * P13
            Qh = (lam + mu) * P11 + mu * I3
            P1 = Qh - Ah.T @ Ti @ Ah
            B1 = Ah.T @ Ti
            B2 = Ti @ Ah
            r2 = (rs**2)[:, None, None]
            r1 = rs[:, None, None]
            dS = r2 * P1 - 1.0j * r1 * (B1 @ S) + 1.0j * r1 * (S @ B2) - S @ Ti @ S
            return dS.ravel()

        sol = solve_ivp(
            rhs_low, (frame.H_max, 0.0), init_S(rs, scaled=False).ravel(),
            method="DOP853", rtol=tol, atol=tol,
        )
        if not sol.success:
            raise ForwardError(f"batched Riccati (shallow band) failed: {sol.message}")
        out[nodes <= split] = -sol.y[:, -1].reshape(-1, 3, 3)

    high = nodes[nodes > split]
    if high.size:
        rs = high

        def rhs_high(t, y):
            S = y.reshape(-1, 3, 3)
            lam = np.asarray(profile.lam(t / rs), dtype=float)
            mu = np.asarray(profile.mu(t / rs), dtype=float)
            n = rs.size
            Ti = np.zeros((n, 3, 3))
            Ti[:, 0, 0] = 1.0 / mu
            Ti[:, 1, 1] = 1.0 / mu
            Ti[:, 2, 2] = 1.0 / (lam + 2.0 * mu)
            Ah = lam[:, None, None] * P31 + mu[:, None, None] * P13
            Qh = (lam + mu)[:, None, None] * P11 + mu[:, None, None] * I3
            AtTi = np.transpose(Ah, (0, 2, 1)) @ Ti
            dS = (Qh - AtTi @ Ah) - 1.0j * (AtTi @ S) + 1.0j * (S @ Ti @ Ah) - S @ Ti @ S
            return dS.ravel()

        sol = solve_ivp(
            rhs_high, (frame.efolds, 0.0), init_S(rs, scaled=True).ravel(),
            method="DOP853", rtol=tol, atol=tol,
        )
        if not sol.success:
            raise ForwardError(f"batched Riccati (deep band) failed: {sol.message}")
        out[nodes > split] = -rs[:, None, None] * sol.y[:, -1].reshape(-1, 3, 3)

    out = 0.5 * (out + np.conj(np.transpose(out, (0, 2, 1))))
    return out


# ---------------------------------------------------------------------------
# radial DtN tables (isotropy + depth-only coefficients => M(k) = R M0(|k|) R^T)
# ---------------------------------------------------------------------------


class RadialDtnTable:
    """Spline table of M0(r) := M(r e1) for one profile.

    Rotation equivariance of isotropic depth-only media reduces the 2D symbol
    to the radial table: M(k) = R(theta) M0(|k|) R(theta)^T with the in-plane
    rotation taking e1 to k/|k| (validated against direct solves in tests).
    """

    def __init__(
        self,
        profile: LameProfile,
        k_max: float,
        riccati_tol: float = 1e-10,
        frame: HalfSpaceFrame = DEFAULT_FRAME,
        low_cut: float = 48.0,
        low_step: float = 0.125,
        high_points: int = 385,
    ) -> None:
        self.profile = profile
        self.k_max = float(k_max)
        self.riccati_tol = float(riccati_tol)
        self.frame = frame
        # M0(r) varies on the scale 1/(2 H_max) near the origin; resolve it
        origin = np.linspace(0.0, min(1.0, k_max), 129)
        low = np.arange(0.0, min(low_cut, k_max) + low_step, low_step)
        if k_max > low_cut:
            high = np.geomspace(low_cut + low_step, k_max * 1.01, high_points)
            nodes = np.concatenate([origin, low, high])
        else:
            nodes = np.concatenate([origin, low])
        self.nodes = np.unique(nodes)
        rep = validate_admissibility(profile, frame.H_max, n_samples=256)
        if not rep.passed:
            raise ForwardError(
                f"profile inadmissible on [0, {frame.H_max}]: "
                f"min mu = {rep.min_mu}, min 3lam+2mu = {rep.min_bulk}"
            )
        self.values = _batch_radial_symbols(
            profile, self.nodes, self.riccati_tol, frame
        )
        self._re = CubicSpline(self.nodes, self.values.real, axis=0)
        self._im = CubicSpline(self.nodes, self.values.imag, axis=0)

    def symbol_radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.nodes[-1] + 1e-9):
            raise ForwardError(
                f"radial table covers |k| <= {self.nodes[-1]:.3f}, requested {r.max():.3f}"
            )
        return self._re(r) + 1.0j * self._im(r)

    def forms(self, kx: np.ndarray, ky: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Hermitian forms a^H M(k) a on arrays of frequency components."""
        r = np.hypot(kx, ky)
        M0 = self.symbol_radial(r)
        safe = np.where(r > 0.0, r, 1.0)
        c, s = kx / safe, ky / safe
        # b = R(theta)^T a, trailing axis 3
        b = np.empty(r.shape + (3,), dtype=complex)
        b[..., 0] = c * a[0] + s * a[1]
        b[..., 1] = -s * a[0] + c * a[1]
        b[..., 2] = a[2]
        vals = np.einsum("...ij,...i,...j->...", M0, b.conj(), b)
        return np.where(r > 0.0, vals, 0.0)


def _table_cache(profile: LameProfile) -> dict:
    cache = getattr(profile, "_dtn_table_cache", None)
    if cache is None:
        cache = {}
        setattr(profile, "_dtn_table_cache", cache)
    return cache


def _get_table(profile: LameProfile, k_max: float, settings: "QuadratureSettings") -> RadialDtnTable:
    key = (settings.riccati_tol, settings.table_low_step, settings.table_high_points)
    cache = _table_cache(profile)
    table = cache.get(key)
    if table is None or table.k_max < k_max:
        table = RadialDtnTable(
            profile,
            k_max * 1.05,
            riccati_tol=settings.riccati_tol,
            low_step=settings.table_low_step,
            high_points=settings.table_high_points,
        )
        cache[key] = table
    return table


# ---------------------------------------------------------------------------
# pairing quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSettings:
    """Pairing quadrature and table resolution knobs."""

    nodes: int = 96
    tail_tol: float = 1e-8
    riccati_tol: float = 1e-10
    table_low_step: float = 0.125
    table_high_points: int = 385


DEFAULT_QUAD = QuadratureSettings()


@dataclass(frozen=True)
class PairingResult:
    """Localized DN pairing value with quadrature diagnostics."""

    value: complex
    probe: ProbeSpec
    profile_name: str
    n_nodes: int
    halfwidth: float
    tail_estimate: float
    k_max: float

    @property
    def relative_imag(self) -> float:
        return abs(self.value.imag) / max(abs(self.value.real), 1e-300)


@dataclass(frozen=True)
class PolarGrid:
    """Polar frequency grid centered at k = 0 with cutoff spectral weights.

    The symbol M(k) = R(theta) M0(|k|) R(theta)^T is smooth in polar
    coordinates but has a conical kink at k = 0 in Cartesian ones; at desk
    scale the probe's spectral support straddles the origin, so a tensor grid
    converges slowly while the polar grid converges spectrally. ``weights``
    already carries the measure r dr dtheta, the squared cutoff transform and
    the probe normalization, so a pairing is sum(weights * F(r, theta)) with
    F the Hermitian symbol form.
    """

    r: np.ndarray
    theta: np.ndarray
    weights: np.ndarray  # (nr, ntheta)
    halfwidth: float

    def rotated_amplitudes(self, a: np.ndarray) -> np.ndarray:
        """b(theta) = R(theta)^T a for each angular node, shape (nt, 3)."""
        c, s = np.cos(self.theta), np.sin(self.theta)
        b = np.empty((self.theta.size, 3), dtype=complex)
        b[:, 0] = c * a[0] + s * a[1]
        b[:, 1] = -s * a[0] + c * a[1]
        b[:, 2] = a[2]
        return b

    def form_values(self, M0: np.ndarray, a: np.ndarray) -> np.ndarray:
        """F(r, theta) = Re b(theta)^H M0(r) b(theta), shape (nr, nt)."""
        b = self.rotated_amplitudes(np.asarray(a, dtype=complex))
        B = np.einsum("ti,tj->tij", b.conj(), b)
        return np.real(np.einsum("rij,tij->rt", M0, B))


def pairing_grid(probe: ProbeSpec, quad: QuadratureSettings) -> PolarGrid:
    """Polar quadrature grid for one probe.

    Radial Gauss-Legendre nodes cover [max(0, N - spread), N + spread] with
    spread = W N^{1-rho}; the angular range is the full circle while the
    spectral support contains the origin, otherwise the subtended wedge.
    """
    N, rho = probe.N, probe.rho
    W = probe.cutoff.spectral_halfwidth(quad.tail_tol)
    spread = W * N ** (1.0 - rho)
    r_lo, r_hi = max(0.0, N - spread), N + spread
    x, w = np.polynomial.legendre.leggauss(2 * quad.nodes)
    r = 0.5 * (r_hi - r_lo) * x + 0.5 * (r_hi + r_lo)
    wr = 0.5 * (r_hi - r_lo) * w

    theta0 = math.atan2(probe.omega[1], probe.omega[0])
    n_t = 2 * quad.nodes
    if spread >= N:
        theta = theta0 - math.pi + 2.0 * math.pi * np.arange(n_t) / n_t
        wt = np.full(n_t, 2.0 * math.pi / n_t)
    else:
        half = 1.05 * math.asin(min(1.0, spread / N))
        xt, wwt = np.polynomial.legendre.leggauss(n_t)
        theta = theta0 + half * xt
        wt = half * wwt

    dist2 = (
        r[:, None] ** 2
        + float(N) ** 2
        - 2.0 * float(N) * r[:, None] * np.cos(theta[None, :] - theta0)
    )
    kappa = N ** (rho - 1.0) * np.sqrt(np.maximum(dist2, 0.0))
    eta2 = np.abs(probe.cutoff.fourier_radial(kappa)) ** 2
    prefactor = N ** (2.0 * rho - 3.0) / (4.0 * math.pi**2)
    weights = prefactor * eta2 * (wr * r)[:, None] * wt[None, :]
    return PolarGrid(r, theta, weights, W)


def required_k_max(probe: ProbeSpec, quad: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Largest |k| the pairing quadrature of this probe can request."""
    W = probe.cutoff.spectral_halfwidth(quad.tail_tol)
    return probe.N + W * probe.N ** (1.0 - probe.rho)


def warm_tables(
    profile: LameProfile,
    probe: ProbeSpec,
    quad: QuadratureSettings = DEFAULT_QUAD,
    m: int = 0,
) -> None:
    """Build the radial tables needed by a ladder up to this probe's N.

    Calling this with the largest ladder probe first makes every subsequent
    pairing interpolate from one fixed table, so ladder values are independent
    of the order (or process) in which they are evaluated.
    """
    k_max = required_k_max(probe, quad)
    _get_table(profile, k_max, quad)
    if m >= 1:
        _get_table(_truncation_for(profile, m), k_max, quad)


def pairing(
    profile: LameProfile,
    probe: ProbeSpec,
    quad: QuadratureSettings = DEFAULT_QUAD,
) -> PairingResult:
    """<Lambda_C phi^N, conj(phi^N)> via the tangential-Fourier identity.

    value = (2 pi)^-2 N^{2 rho - 3} int |eta_hat(kappa(k))|^2 a^H M(k) a dk
    over the polar grid, wide enough that the excluded spectral tail is below
    quad.tail_tol of the cutoff mass.
    """
    grid = pairing_grid(probe, quad)
    k_max = float(grid.r.max())
    table = _get_table(profile, k_max, quad)
    M0 = table.symbol_radial(grid.r)
    value = complex(np.sum(grid.weights * grid.form_values(M0, probe.a)))
    tail = quad.tail_tol * abs(value)
    return PairingResult(value, probe, profile.name, grid.weights.size,
                         grid.halfwidth, tail, k_max)


def difference_pairing(
    profile: LameProfile,
    m: int,
    probe: ProbeSpec,
    quad: QuadratureSettings = DEFAULT_QUAD,
) -> PairingResult:
    """pairing(profile) - pairing(truncated profile), on one shared grid.

    The shared grid (same polar nodes, same radial table nodes) makes the
    correlated part of the quadrature error cancel, which matters because the
    m-th order signal is O(N^-m) relative to each term.
    """
    if m < 1:
        raise ValueError("difference pairing requires m >= 1 (m = 0 is pairing)")
    if m > profile.max_derivative_order:
        raise ValueError(
            f"profile carries derivatives to order {profile.max_derivative_order}, got m = {m}"
        )
    truncated = _truncation_for(profile, m)
    grid = pairing_grid(probe, quad)
    k_max = float(grid.r.max())
    table_full = _get_table(profile, k_max, quad)
    table_trunc = _get_table(truncated, k_max, quad)
    M0 = table_full.symbol_radial(grid.r) - table_trunc.symbol_radial(grid.r)
    value = complex(np.sum(grid.weights * grid.form_values(M0, probe.a)))
    tail = quad.tail_tol * abs(value)
    return PairingResult(value, probe, f"{profile.name}-minus-trunc{m}",
                         grid.weights.size, grid.halfwidth, tail, k_max)


def _truncation_for(profile: LameProfile, m: int) -> LameProfile:
    cache = getattr(profile, "_truncation_cache", None)
    if cache is None:
        cache = {}
        setattr(profile, "_truncation_cache", cache)
    if m not in cache:
        cache[m] = taylor_truncate(profile, m).result
    return cache[m]


# ---------------------------------------------------------------------------
# the localized limit quadrature (depth-only integrand)
# ---------------------------------------------------------------------------


def limit_quadrature(
    f,
    taylor_coeffs,
    k_order: int,
    N: int,
    cutoff=None,
    n_quad: int = 240,
) -> float:
    """N^{2+k} int_0^{1/(2 sqrt N)} int (eta^N)^2 e^{-2 N y3} (f - f^k) dy' dy3.

    ``f`` is a depth-only integrand, ``taylor_coeffs`` its surface Taylor
    coefficients of orders 0..k-1 defining f^k. The tangential factor
    integrates exactly to (cutoff L2 mass)/N under the probe normalization.
    For f in C^k the value converges to d^k f(0) / 2^{k+1} as N grows.
    """
    mass = 1.0 if cutoff is None else cutoff.l2_mass()
    upper = 0.5 / math.sqrt(N)
    x, w = np.polynomial.legendre.leggauss(n_quad)
    y3 = 0.5 * upper * (x + 1.0)
    wy = 0.5 * upper * w
    fk = np.zeros_like(y3)
    for n, c in enumerate(taylor_coeffs[:k_order]):
        fk += c * y3**n
    vals = (np.asarray(f(y3), dtype=float) - fk) * np.exp(-2.0 * N * y3)
    integral = float(np.sum(wy * vals))
    return N ** (2 + k_order) * (mass / N) * integral
