"""Sum-rate maximization for hybrid/multi-sector BD-RIS aided MU-MISO.

Fractional-programming four-block ascent over auxiliaries ``iota`` and
``tau``, precoders ``p_k`` and the sector patterns ``theta_l``.  User ``k``
in sector ``l`` sees the effective channel ``a_k = Q_k theta_l`` (an
``N``-vector) and receives ``a_k^T sum_k' p_k' s_k' + n_k``.

All rates are in bits.  The surrogate is written with natural logarithms and
divided by ``ln 2``, so at ``iota = gamma`` with the matching ``tau`` it equals
``sum_k log2(1 + gamma_k)`` exactly.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import beam_mimo, stiefel
from .channel_model import InvalidParameterError, theta_from_blocks

_LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class MultiSectorScenario:
    """Per-user cascaded channels grouped by sector.

    Parameters
    ----------
    Q : ndarray, shape (K, N, Mbar^2 G2)
        ``Q[k]`` is the (estimated) channel of user ``k``; users are ordered
        sector by sector.
    sector_sizes : sequence of int
        ``K_l`` per sector, summing to ``K``.
    group_size : int
    P_d, noise_power : float
        BS power budget and downlink noise power.
    Q_true : ndarray, optional
        True channels used to score the final design (defaults to ``Q``).
    """

    Q: np.ndarray
    sector_sizes: tuple
    group_size: int
    P_d: float
    noise_power: float
    Q_true: np.ndarray = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=complex)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "sector_sizes", tuple(int(k) for k in self.sector_sizes))
        if Q.ndim != 3:
            raise InvalidParameterError("Q must have shape (K, N, Mbar^2 G2)")
        if any(k < 0 for k in self.sector_sizes) or sum(self.sector_sizes) != Q.shape[0]:
            raise InvalidParameterError("sector sizes must partition the users")
        if Q.shape[2] % (self.group_size ** 2):
            raise InvalidParameterError("channel width is not a multiple of Mbar^2")
        if not self.P_d > 0 or not self.noise_power > 0:
            raise InvalidParameterError("P_d and the noise power must be positive")
        if self.Q_true is not None:
            qt = np.asarray(self.Q_true, dtype=complex)
            if qt.shape != Q.shape:
                raise InvalidParameterError("Q_true must match Q in shape")
            object.__setattr__(self, "Q_true", qt)

    @property
    def K(self):
        return self.Q.shape[0]

    @property
    def N(self):
        return self.Q.shape[1]

    @property
    def L(self):
        return len(self.sector_sizes)

    @property
    def num_tiles(self):
        return self.Q.shape[2] // self.group_size ** 2

    @property
    def sector_of(self):
        return np.repeat(np.arange(self.L), self.sector_sizes)

    def scaled(self, c):
        """Same problem with channels divided by ``c`` and noise by ``c^2`` (SINRs unchanged)."""
        qt = None if self.Q_true is None else self.Q_true / c
        return replace(self, Q=self.Q / c, noise_power=self.noise_power / c ** 2, Q_true=qt)


@dataclass(frozen=True, eq=False)
class FpState:
    """Iterate of the four-block ascent.

    ``theta`` has one row per sector; ``P`` holds the precoders as columns.
    """

    theta: np.ndarray
    P: np.ndarray
    iota: np.ndarray = None
    tau: np.ndarray = None
    trace: tuple = ()


@dataclass(frozen=True)
class FpOptions:
    max_outer: int = 100
    tol: float = 1e-6
    inner_sweeps: int = 20
    inner_tol: float = 1e-4
    polar_steps: int = 1
    inner: stiefel.SolverOptions = stiefel.SolverOptions(max_iters=3)


def effective_channels(scn, theta, Q=None):
    """Rows ``a_k^T = (Q_k theta_l)^T``; shape ``(K, N)``."""
    Q = scn.Q if Q is None else Q
    return np.einsum("knm,km->kn", Q, np.asarray(theta)[scn.sector_of])


def _gains(scn, state, Q=None):
    # G[k, k'] = a_k^T p_k'
    return effective_channels(scn, state.theta, Q) @ state.P


def sinr(scn, state, k=None, Q=None):
    """SINR of user ``k`` (or all users); ``Q`` overrides the channels used."""
    g = np.abs(_gains(scn, state, Q)) ** 2
    sig = np.diagonal(g)
    gamma = sig / (g.sum(axis=1) - sig + scn.noise_power)
    return gamma if k is None else float(gamma[k])


def sum_rate(scn, state, Q=None):
    return float(np.sum(np.log2(1.0 + sinr(scn, state, Q=Q))))


def surrogate(scn, state):
    """FP surrogate in bits for the current blocks."""
    g = _gains(scn, state)
    iota, tau = state.iota, state.tau
    a = np.diagonal(g)
    b = np.sum(np.abs(g) ** 2, axis=1) + scn.noise_power
    terms = (np.log1p(iota) - iota + 2.0 * np.sqrt(1.0 + iota) * np.real(np.conj(tau) * a)
             - np.abs(tau) ** 2 * b)
    return float(np.sum(terms) / _LN2)


def update_iota(scn, state):
    """``iota_k = gamma_k``."""
    return sinr(scn, state)


def update_tau(scn, state):
    """``tau_k = sqrt(1 + iota_k) a_k^T p_k / (sum_k' |a_k^T p_k'|^2 + sigma^2)``."""
    g = _gains(scn, state)
    b = np.sum(np.abs(g) ** 2, axis=1) + scn.noise_power
    return np.sqrt(1.0 + state.iota) * np.diagonal(g) / b


def update_precoders(scn, state):
    """KKT precoders ``p_k = sqrt(1+iota_k) tau_k (C + mu I)^-1 h_k``.

    ``C = sum_k |tau_k|^2 h_k h_k^H`` with ``h_k = conj(a_k)``; ``mu >= 0`` is
    zero when the unconstrained solution fits the budget and otherwise found
    by bracketed root finding so that ``sum_k ||p_k||^2 = P_d``.
    """
    A = effective_channels(scn, state.theta)
    Hm = A.conj().T                              # columns h_k
    t2 = np.abs(state.tau) ** 2
    C = (Hm * t2) @ Hm.conj().T
    B = Hm * (np.sqrt(1.0 + state.iota) * state.tau)
    lam, U = np.linalg.eigh(C)
    lam = np.clip(lam, 0.0, None)
    Bt = U.conj().T @ B
    w = np.sum(np.abs(Bt) ** 2, axis=1)
    total = w.sum()
    if total == 0.0:
        return np.zeros_like(B)
    tiny = 1e-12 * max(lam[-1], 1e-300)

    def power(mu):
        # directions with no weight contribute nothing, even where lam + mu = 0
        with np.errstate(divide="ignore"):
            return float(np.sum(np.divide(w, (lam + mu) ** 2, out=np.zeros_like(w),
                                          where=w > 0)))

    null = (lam <= tiny) & (w > 1e-30 * total)
    if not null.any() and power(0.0) <= scn.P_d:
        mu = 0.0
    else:
        hi = np.sqrt(total / scn.P_d)
        lo = hi
        while power(lo) <= scn.P_d:
            lo *= 0.5
            if lo < 1e-300:
                raise ArithmeticError("failed to bracket the power multiplier")
        mu = brentq(lambda m: power(m) - scn.P_d, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return U @ (Bt / (lam + mu)[:, None])


def _theta_quadratics(scn, state):
    # v_l and V_l of the theta sub-problem, one per sector
    n = scn.Q.shape[2]
    S = state.P @ state.P.conj().T
    coef_v = np.sqrt(1.0 + state.iota) * np.conj(state.tau)
    t2 = np.abs(state.tau) ** 2
    v = np.zeros((scn.L, n), dtype=complex)
    V = np.zeros((scn.L, n, n), dtype=complex)
    QtP = np.einsum("knm,nk->km", scn.Q, state.P)   # Q_k^T p_k
    for k, l in enumerate(scn.sector_of):
        v[l] += coef_v[k] * QtP[k]
        qk = scn.Q[k]
        V[l] += t2[k] * (qk.T @ S @ qk.conj())
    return v, V


def theta_objective(theta, v, V):
    """``sum_l 2 Re{theta_l^T v_l} - theta_l^T V_l theta_l^*``."""
    theta = np.asarray(theta)
    return float(np.sum(2.0 * np.real(np.einsum("lm,lm->l", theta, v))
                        - np.real(np.einsum("lm,lmn,ln->l", theta, V, theta.conj()))))


def update_theta(scn, state, opts=None):
    """Tile-by-tile update of the stacked sector patterns.

    Tile ``i`` solves ``max 2 Re{theta_i^T chi_i} - theta_i^T V_i theta_i^*``
    on the ``(L Mbar) x Mbar`` Stiefel manifold, where ``theta_i`` stacks the
    sector blocks ``vec(Theta_{l,i}^T)`` and ``V_i`` is block diagonal.
    Sweeps repeat until the sub-problem objective changes by less than
    ``inner_tol`` (relative) or ``inner_sweeps`` is reached.
    """
    opts = opts or FpOptions()
    v, V = _theta_quadratics(scn, state)
    mb = scn.group_size
    m = mb * mb
    g2, L = scn.num_tiles, scn.L
    theta = np.array(state.theta, dtype=complex)
    # blkdiag(V_{l,i,i}) and its largest eigenvalue, per tile
    diag = [V[:, i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(g2)]
    Vdd = []
    for Vii in diag:
        D = np.zeros((L * m, L * m), dtype=complex)
        for l in range(L):
            D[l * m:(l + 1) * m, l * m:(l + 1) * m] = Vii[l]
        Vdd.append((D, max(0.0, float(np.linalg.eigvalsh(D)[-1]))))
    prev = theta_objective(theta, v, V)
    for _ in range(opts.inner_sweeps):
        for i in range(g2):
            sl = slice(i * m, (i + 1) * m)
            th_i = theta[:, sl]
            # chi_{l,i} = v_{l,i} - sum_{i' != i} V_{l,i,i'} theta_{l,i'}^*
            chi = (v[:, sl] - np.einsum("lan,ln->la", V[:, sl, :], theta.conj())
                   + np.einsum("lab,lb->la", diag[i], th_i.conj())).reshape(-1)
            X = th_i.reshape(L * mb, mb)
            D, shift = Vdd[i]
            for _ in range(opts.polar_steps):
                X = stiefel.mm_step(D, chi, X, shift=shift)
            X = stiefel.maximize(D, chi, X, opts.inner).X
            theta[:, sl] = X.reshape(L, m)
        cur = theta_objective(theta, v, V)
        if abs(cur - prev) <= opts.inner_tol * max(abs(cur), 1e-300):
            break
        prev = cur
    return theta


def initial_state(scn):
    """Strength-maximizing tiles and matched-filter precoders with equal power.

    Sector ``l`` starts from ``U_l / sqrt(L)``, where ``U_l`` maximizes
    ``sum_{k in l} ||Q_k theta||^2`` over unitary tiles (identity for a sector
    without users).  A single user thus starts at its optimal surface.
    """
    mb = scn.group_size
    ident = theta_from_blocks([np.eye(mb)] * scn.num_tiles).astype(complex)
    theta = np.tile(ident, (scn.L, 1))
    start = 0
    for l, kl in enumerate(scn.sector_sizes):
        q = scn.Q[start:start + kl].reshape(-1, scn.Q.shape[2])
        if kl and np.any(q):
            theta[l] = beam_mimo.optimize_theta(q, mb)[0]
        start += kl
    theta /= np.sqrt(scn.L)
    Hm = effective_channels(scn, theta).conj().T
    norms = np.linalg.norm(Hm, axis=0)
    norms[norms == 0] = 1.0
    P = np.sqrt(scn.P_d / scn.K) * Hm / norms
    return FpState(theta=theta, P=P)


def sector_blocks(scn, theta):
    """``Theta_{l,i}`` as an array of shape ``(L, G2, Mbar, Mbar)``."""
    mb = scn.group_size
    return np.asarray(theta).reshape(scn.L, scn.num_tiles, mb, mb)


def feasibility_error(scn, theta):
    """Largest ``||sum_l Theta_{l,i}^H Theta_{l,i} - I||_F`` over tiles."""
    b = sector_blocks(scn, theta)
    gram = np.einsum("liab,liac->ibc", b.conj(), b)
    return float(np.max(np.linalg.norm(gram - np.eye(scn.group_size), axis=(1, 2))))


@dataclass(frozen=True, eq=False)
class FpResult:
    state: FpState
    sum_rate: float
    se: float
    converged: bool
    iterations: int


def solve(scn, opts=None, T1=0, T2=0, T=None):
    """Four-block ascent from :func:`initial_state`.

    One outer iteration updates ``(iota, tau)``, then the precoders, then
    ``theta``; the surrogate is recorded after each of the three steps.  Stops
    when the surrogate after the ``theta`` step changes by less than ``tol``
    (relative) or after ``max_outer`` iterations.  The returned sum-rate is
    scored on ``scn.Q_true`` when given.
    """
    opts = opts or FpOptions()
    c = np.sqrt(np.mean(np.sum(np.abs(scn.Q) ** 2, axis=(1, 2))))
    if c == 0:
        raise InvalidParameterError("all user channels are zero")
    work = scn.scaled(c)
    state = initial_state(work)
    trace = []
    converged = False
    it = 0
    for it in range(1, opts.max_outer + 1):
        state = replace(state, iota=update_iota(work, state))
        state = replace(state, tau=update_tau(work, state))
        trace.append(surrogate(work, state))
        state = replace(state, P=update_precoders(work, state))
        trace.append(surrogate(work, state))
        state = replace(state, theta=update_theta(work, state, opts))
        trace.append(surrogate(work, state))
        if it > 1 and abs(trace[-1] - trace[-4]) <= opts.tol * max(abs(trace[-1]), 1e-300):
            converged = True
            break
    # tau is scale dependent; report it for the caller's (unscaled) channels
    state = replace(state, tau=state.tau / c, trace=tuple(trace))
    rate = sum_rate(scn, state, Q=scn.Q_true)
    s = None
    if T is not None:
        if T <= T1 + T2:
            raise InvalidParameterError(f"frame length T={T} does not exceed overhead {T1 + T2}")
        s = (1.0 - (T1 + T2) / T) * rate
    return FpResult(state=state, sum_rate=rate, se=s, converged=converged, iterations=it)
