"""Exact sub-flows of the conditionally-CIR splitting.

For one species with the others frozen the SDE
``dX = (a - b X) dt + sqrt(X) sum_in c_j dW_j + sum_out c_j dW_j``
is split into the additive perturbation (``r_out`` noises), and the CIR
part, which after ``z = sqrt(x)`` splits again into a Bernoulli ODE and a
constant-coefficient Brownian motion. One component step is

    x -> ((brownian o bernoulli)(sqrt(perturbation(x))))**2

Every function here broadcasts; the leading-underscore versions take raw
arrays and are what the integrators call.
"""

from __future__ import annotations

import numpy as np

from ..crn import CondCIRCoefficients

# below this |b| the Bernoulli flow switches to its b -> 0 limit
B_ZERO_TOL = 1e-10


def _bernoulli(z, a, b, s_in, h):
    """Flow of ``dz = (-b z / 2 + (a / 2 - s_in / 8) / z) dt`` over time ``h``.

    ``u = z**2`` solves the linear ODE ``du = (a - s_in / 4 - b u) dt``; a
    negative ``u(h)`` means the closed form is complex and the result is
    set to zero. Returns ``(z_new, clamped)``.
    """
    z = np.asarray(z, dtype=float)
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < B_ZERO_TOL
    b_safe = np.where(small, 1.0, b)
    drive = a - 0.25 * s_in
    bh = b_safe * h
    u_gen = z * z * np.exp(-bh) - drive * np.expm1(-bh) / b_safe
    u_lim = z * z + drive * h
    u = np.where(small, u_lim, u_gen)
    clamped = u < 0
    return np.sqrt(np.where(clamped, 0.0, u)), clamped


def _component(x, a, b, c_in, c_out, h, dw_in, dw_out):
    """One perturbed-CIR component step; returns ``(x_new, n_clamps)``."""
    y = x + np.sum(c_out * dw_out, axis=-1)
    neg = y < 0
    z = np.sqrt(np.where(neg, 0.0, y))
    z, cl = _bernoulli(z, a, b, np.sum(c_in * c_in, axis=-1), h)
    z = z + 0.5 * np.sum(c_in * dw_in, axis=-1)
    return z * z, neg.astype(np.int64) + cl


def _scalar(v):
    return v.item() if isinstance(v, np.ndarray) and v.ndim == 0 else v


def bernoulli_flow(z, coeffs: CondCIRCoefficients, h: float):
    """Closed-form Bernoulli sub-flow of the Lamperti variable ``z = sqrt(x)``.

    Returns ``(z_new, clamped)``; ``clamped`` is True when the radicand is
    negative and ``z_new`` was set to zero.
    """
    zn, cl = _bernoulli(z, coeffs.a_tilde, coeffs.b_tilde, coeffs.sum_c2_in, h)
    return _scalar(zn), _scalar(cl)


def _pick(increments, idx):
    inc = np.asarray(increments, dtype=float)
    return inc[..., list(idx)] if idx else np.zeros(inc.shape[:-1] + (0,))


def brownian_flow(z, coeffs: CondCIRCoefficients, increments):
    """``z + 1/2 sum_{r_in} c_j dW_j``; ``increments`` is indexed by reaction."""
    dw = _pick(increments, coeffs.r_in)
    return _scalar(np.asarray(z, dtype=float) + 0.5 * np.sum(coeffs.c_in * dw, axis=-1))


def perturbation_flow(x, coeffs: CondCIRCoefficients, increments):
    """``x + sum_{r_out} c_j dW_j``; may be negative."""
    dw = _pick(increments, coeffs.r_out)
    return _scalar(np.asarray(x, dtype=float) + np.sum(coeffs.c_out * dw, axis=-1))


def cir_component_step(x_i, coeffs: CondCIRCoefficients, h: float, increments):
    """Full component update of species ``coeffs.species``.

    Args:
        x_i: current level(s) of the species.
        coeffs: frozen coefficients.
        h: step size.
        increments: Brownian increments ``N(0, h)`` indexed by reaction
            (only entries in ``r_in`` and ``r_out`` are read).

    Returns:
        ``(x_new, n_clamps)``; ``n_clamps`` counts a negative perturbed value
        and a complex Bernoulli radicand.
    """
    xn, cl = _component(
        np.asarray(x_i, dtype=float),
        coeffs.a_tilde,
        coeffs.b_tilde,
        coeffs.c_in,
        coeffs.c_out,
        h,
        _pick(increments, coeffs.r_in),
        _pick(increments, coeffs.r_out),
    )
    return _scalar(xn), _scalar(cl)


def _birth_death_flow(x, s, k, h, xi):
    """Merged-noise flow of ``dX = (s - k X) dt + sqrt(s + k X) dW``.

    With ``y = s + k X`` the SDE is CIR with drift ``k (2 s - y)`` and noise
    ``k sqrt(y)``; the Lamperti variable ``sqrt(y)`` is advanced by the
    Bernoulli and Brownian flows and mapped back, flooring at zero.
    ``xi`` are standard normals.
    """
    z = np.sqrt(s + k * x)
    z, cl = _bernoulli(z, 2.0 * k * s, k, k * k, h)
    z = z + 0.5 * k * np.sqrt(h) * xi
    x_new = (z * z - s) / k
    floor = x_new < 0
    return np.where(floor, 0.0, x_new), cl.astype(np.int64) + floor


def cir_splitting_sample(alpha, beta, sigma, x0, h, n_steps, n_paths, rng, flow=None):
    """End states of ``n_paths`` splitting paths of a pure CIR process.

    ``dX = beta (alpha - X) dt + sigma sqrt(X) dW`` is advanced by the
    Bernoulli flow followed by the Brownian flow of ``z = sqrt(x)``.
    ``flow`` replaces the Bernoulli flow (same signature as the internal
    one) for negative-control checks.

    Returns:
        ``(x_end, clamps)`` with shapes ``(n_paths,)``.
    """
    flow = _bernoulli if flow is None else flow
    z = np.full(n_paths, np.sqrt(float(x0)))
    clamps = np.zeros(n_paths, dtype=np.int64)
    a, s2 = alpha * beta, sigma * sigma
    for _ in range(n_steps):
        z, cl = flow(z, a, beta, s2, h)
        z = z + 0.5 * sigma * np.sqrt(h) * rng.standard_normal(n_paths)
        clamps += cl
    return z * z, clamps
