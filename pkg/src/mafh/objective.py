"""Riemann-sum sidelobe objectives and their analytic spacing gradient.

Three mismatch energies are minimized over the spacing vector d:

    f1: |chi(0, 0, theta, theta_p)|^2 over the (theta, theta_p) square;
    f2: |chi(0, v, theta, theta)|^2 over theta and v in [-f_max, f_max];
    f3: |chi(tau, 0, theta, theta)|^2 over theta and tau in [-T_w, T_w];

each as a closed Riemann sum (both endpoints sampled, n+1 points per axis)
with the weighted combination f = alpha1*f1 + alpha2*f2 + alpha3*f3.

The Doppler and delay axes enter the cell weights in subpulse units
(v*delta_t and tau/delta_t) so that all three objectives are commensurate
and a single weight triple / gradient threshold is meaningful across them;
in physical units f2 (per Hz) and f3 (per second) would differ by ~12
orders of magnitude.  The sample coordinates themselves stay in Hz / s.

The grid is fixed per run, so the hop-pair kernel tables of
:func:`mafh.ambiguity.kernel_matrix` are precomputed once; each objective or
gradient evaluation then reduces to small steering-vector contractions.  The
gradient differentiates the same cosine/sine decomposition as
:func:`mafh.ambiguity.chi_mag_sq`: only the array position phase depends on
d, through the cumulative map x_m = sum_{i<=m} d_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ambiguity import kernel_matrix, steering
from .model import AntennaLayout, FhCode, RadarConfig, ValidationError
from .theory import b_min

_HALF_PI = 0.5 * np.pi


def _ceil(x: float) -> int:
    """Ceiling with a tolerance for values that are integers up to rounding."""
    return int(math.ceil(x - 1e-9))


@dataclass(frozen=True, eq=False)
class ObjectiveGrid:
    """Sampling grids, cell weights and objective weights, fixed per run."""

    n1: int                    # angular subdivisions (n1 + 1 samples)
    n2: int                    # Doppler subdivisions
    n3: int                    # delay subdivisions
    theta_samples: np.ndarray  # rad, for the f1 square
    v_samples: np.ndarray      # Hz
    tau_samples: np.ndarray    # s
    d_theta: float             # rad per cell
    d_v: float                 # Doppler cell weight, subpulse units (Hz * delta_t)
    d_tau: float               # delay cell weight, subpulse units (s / delta_t)
    alpha: np.ndarray          # objective weights, sum to 1
    theta_eval: float | None   # single-angle mode for f2/f3 (None = full sweep)
    theta_f23: np.ndarray      # angular samples used by f2/f3
    w_theta23: float           # angular weight per f2/f3 sample

    def __post_init__(self):
        for name in ("theta_samples", "v_samples", "tau_samples", "alpha",
                     "theta_f23"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def build_grid(cfg: RadarConfig, layout: AntennaLayout, alpha,
               theta_eval: float | None = None) -> ObjectiveGrid:
    """Smallest grids satisfying the sampling inequalities.

    n1 resolves the narrowest attainable angular main lobe (evaluated at
    broadside) and the aperture's angular period: n1 >= 2*pi/b_min and
    delta_theta <= arcsin(lambda/L).  n2 and n3 sample at twice Nyquist:
    n2 >= 4*f_max*T_w, n3 >= 4*Q*delta_t*K*delta_f.

    ``theta_eval`` switches f2/f3 to a single-angle cut (weight pi, the full
    angular range): much cheaper, same minimizers in practice.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (3,):
        raise ValidationError(f"alpha: expected 3 weights, got shape {alpha.shape}")
    if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-9:
        raise ValidationError(
            f"alpha: expected nonnegative weights summing to 1, got {alpha.tolist()}"
        )
    if theta_eval is not None and abs(theta_eval) > _HALF_PI + 1e-12:
        raise ValidationError(f"theta_eval: expected |angle| <= pi/2, got {theta_eval}")

    if layout.M_t >= 2:
        n1 = _ceil(2.0 * np.pi / b_min(layout.M_t, layout.L, 0.0))
    else:
        n1 = 8  # single-element response is angle-independent
    if layout.L > 1.0:
        n1 = max(n1, _ceil(np.pi / math.asin(1.0 / layout.L)))
    n1 = max(n1, 2)
    n2 = max(_ceil(4.0 * cfg.f_max * cfg.T_w), 2)
    n3 = max(_ceil(4.0 * cfg.Q * cfg.delta_t * cfg.K * cfg.delta_f), 2)

    theta = -_HALF_PI + np.arange(n1 + 1) * (np.pi / n1)
    v = -cfg.f_max + np.arange(n2 + 1) * (2.0 * cfg.f_max / n2)
    tau = -cfg.T_w + np.arange(n3 + 1) * (2.0 * cfg.T_w / n3)

    if theta_eval is None:
        theta_f23, w23 = theta, np.pi / n1
    else:
        theta_f23, w23 = np.array([float(theta_eval)]), np.pi

    return ObjectiveGrid(
        n1=n1, n2=n2, n3=n3,
        theta_samples=theta, v_samples=v, tau_samples=tau,
        d_theta=np.pi / n1,
        d_v=2.0 * cfg.f_max / n2 * cfg.delta_t,
        d_tau=2.0 * cfg.T_w / n3 / cfg.delta_t,
        alpha=alpha, theta_eval=theta_eval, theta_f23=theta_f23, w_theta23=w23,
    )


def _abs2(z: np.ndarray) -> np.ndarray:
    return z.real * z.real + z.imag * z.imag


class ObjectiveEvaluator:
    """Grid-bound objective/gradient engine operating on raw spacing vectors.

    Kernel tables depend only on (grid, code, cfg) and are computed once;
    evaluations for different spacing vectors d reuse them.  ``d`` is not
    required to be feasible — the ambiguity surface is defined for any
    positive spacings — which the finite-difference probes rely on.
    """

    def __init__(self, grid: ObjectiveGrid, code: FhCode, cfg: RadarConfig):
        if code.Q != cfg.Q:
            raise ValidationError(f"c: expected {cfg.Q} code columns, got {code.Q}")
        self.grid = grid
        self.code = code
        self.cfg = cfg
        self.M = code.M_t
        self._g1 = None
        self._g2 = None
        self._g3 = None
        # Gamma[i, m] = 1 when element m sits beyond spacing i+1, i.e.
        # d x_m / d d_{i+1} = 1.
        self._gamma = (np.arange(self.M)[None, :]
                       >= np.arange(1, self.M)[:, None]).astype(float)

    # -- kernel tables -----------------------------------------------------

    def _G1(self) -> np.ndarray:
        if self._g1 is None:
            self._g1 = kernel_matrix(0.0, 0.0, self.code, self.cfg)
        return self._g1

    def _G2(self) -> np.ndarray:
        if self._g2 is None:
            self._g2 = kernel_matrix(0.0, self.grid.v_samples, self.code, self.cfg)
        return self._g2

    def _G3(self) -> np.ndarray:
        if self._g3 is None:
            self._g3 = kernel_matrix(self.grid.tau_samples, 0.0, self.code, self.cfg)
        return self._g3

    # -- helpers -----------------------------------------------------------

    def _positions(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.M - 1,):
            raise ValidationError(
                f"d: expected {self.M - 1} spacings for this code, got shape {d.shape}"
            )
        return np.concatenate(([0.0], np.cumsum(d)))

    # -- objective values ----------------------------------------------------

    def f1(self, d) -> float:
        x = self._positions(d)
        A = steering(self.grid.theta_samples, x)
        chi = np.einsum("mn,tm,sn->ts", self._G1(), A, np.conj(A),
                        optimize=True) / self.cfg.Q
        return float(self.grid.d_theta ** 2 * _abs2(chi).sum())

    def f2(self, d) -> float:
        x = self._positions(d)
        A = steering(self.grid.theta_f23, x)
        chi = np.einsum("vmn,tm,tn->tv", self._G2(), A, np.conj(A),
                        optimize=True) / self.cfg.Q
        return float(self.grid.w_theta23 * self.grid.d_v * _abs2(chi).sum())

    def f3(self, d) -> float:
        x = self._positions(d)
        A = steering(self.grid.theta_f23, x)
        chi = np.einsum("vmn,tm,tn->tv", self._G3(), A, np.conj(A),
                        optimize=True) / self.cfg.Q
        return float(self.grid.w_theta23 * self.grid.d_tau * _abs2(chi).sum())

    def f_weighted(self, d) -> float:
        a1, a2, a3 = self.grid.alpha
        total = 0.0
        if a1 > 0.0:
            total += a1 * self.f1(d)
        if a2 > 0.0:
            total += a2 * self.f2(d)
        if a3 > 0.0:
            total += a3 * self.f3(d)
        return total

    # -- gradients -----------------------------------------------------------

    def _grad_f1(self, x: np.ndarray) -> np.ndarray:
        G, Q = self._G1(), self.cfg.Q
        A = steering(self.grid.theta_samples, x)
        Ac = np.conj(A)
        chi = np.einsum("mn,tm,sn->ts", G, A, Ac, optimize=True) / Q
        S1 = np.einsum("xm,mn,tm,sn->xts", self._gamma, G, A, Ac, optimize=True) / Q
        S2 = np.einsum("xn,mn,tm,sn->xts", self._gamma, G, A, Ac, optimize=True) / Q
        sin_t = np.sin(self.grid.theta_samples)
        dchi = 2j * np.pi * (sin_t[None, :, None] * S1 - sin_t[None, None, :] * S2)
        inner = 2.0 * (np.conj(chi)[None, :, :] * dchi).real
        return self.grid.d_theta ** 2 * inner.sum(axis=(1, 2))

    def _grad_f23(self, x: np.ndarray, G: np.ndarray, d_axis: float) -> np.ndarray:
        Q = self.cfg.Q
        A = steering(self.grid.theta_f23, x)
        Ac = np.conj(A)
        chi = np.einsum("vmn,tm,tn->tv", G, A, Ac, optimize=True) / Q
        S1 = np.einsum("xm,vmn,tm,tn->xtv", self._gamma, G, A, Ac, optimize=True) / Q
        S2 = np.einsum("xn,vmn,tm,tn->xtv", self._gamma, G, A, Ac, optimize=True) / Q
        sin_t = np.sin(self.grid.theta_f23)
        dchi = 2j * np.pi * sin_t[None, :, None] * (S1 - S2)
        inner = 2.0 * (np.conj(chi)[None, :, :] * dchi).real
        return self.grid.w_theta23 * d_axis * inner.sum(axis=(1, 2))

    def grad_f_weighted(self, d) -> np.ndarray:
        x = self._positions(d)
        a1, a2, a3 = self.grid.alpha
        g = np.zeros(self.M - 1)
        if a1 > 0.0:
            g += a1 * self._grad_f1(x)
        if a2 > 0.0:
            g += a2 * self._grad_f23(x, self._G2(), self.grid.d_v)
        if a3 > 0.0:
            g += a3 * self._grad_f23(x, self._G3(), self.grid.d_tau)
        return g


# ---------------------------------------------------------------------------
# Layout-level entry points.
# ---------------------------------------------------------------------------

def f1_bar(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
           cfg: RadarConfig) -> float:
    """Angular mismatch energy of the layout on the grid."""
    return ObjectiveEvaluator(grid, code, cfg).f1(layout.d)


def f2_bar(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
           cfg: RadarConfig) -> float:
    """Doppler mismatch energy of the layout on the grid."""
    return ObjectiveEvaluator(grid, code, cfg).f2(layout.d)


def f3_bar(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
           cfg: RadarConfig) -> float:
    """Delay mismatch energy of the layout on the grid."""
    return ObjectiveEvaluator(grid, code, cfg).f3(layout.d)


def f_weighted(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
               cfg: RadarConfig) -> float:
    """alpha-weighted combination; zero-weight terms are skipped entirely."""
    return ObjectiveEvaluator(grid, code, cfg).f_weighted(layout.d)


def grad_f_weighted(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
                    cfg: RadarConfig) -> np.ndarray:
    """Analytic gradient of f_weighted w.r.t. the M_t - 1 spacings."""
    return ObjectiveEvaluator(grid, code, cfg).grad_f_weighted(layout.d)


def finite_diff_grad(layout: AntennaLayout, grid: ObjectiveGrid, code: FhCode,
                     cfg: RadarConfig, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient oracle, step ``h`` in wavelengths.

    Probes d +/- h*e_i directly on the spacing vector (the objective is
    defined for any positive spacings, so no feasibility clamp is needed).
    """
    if not h > 0:
        raise ValidationError(f"h: expected a positive step, got {h}")
    ev = ObjectiveEvaluator(grid, code, cfg)
    d = np.asarray(layout.d, dtype=float)
    g = np.zeros(d.size)
    for i in range(d.size):
        dp, dm = d.copy(), d.copy()
        dp[i] += h
        dm[i] -= h
        g[i] = (ev.f_weighted(dp) - ev.f_weighted(dm)) / (2.0 * h)
    return g
