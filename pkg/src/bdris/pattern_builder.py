"""MSE-optimal training patterns and pilots for group-connected BD-RIS.

The pattern matrix is ``Phi = A kron Phi_breve`` where ``A`` is a
``G2 x G2`` DFT/Hadamard matrix and every row of ``Phi_breve`` reshapes to a
unitary ``Mbar x Mbar`` block while the rows themselves are orthogonal.
Training slot ``t = s*K + k`` (0-based) uses pattern row ``s`` and pilot row
``k``.
"""

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import hadamard as _sylvester

from .channel_model import InvalidParameterError, make_rng
from .linalg import haar_unitary, unvec, vec

_TOL = 1e-10


class UnsupportedOrderError(ValueError):
    """No Hadamard construction is available for the requested order."""


class BaseKind(str, enum.Enum):
    DFT = "dft"
    HADAMARD = "hadamard"


def dft_matrix(n):
    """Unnormalized DFT matrix with entries ``exp(-2j pi p q / n)``."""
    if n < 1:
        raise InvalidParameterError("DFT order must be >= 1")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def _is_prime(n):
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n ** 0.5) + 1))


def _paley(q):
    """Paley type-I Hadamard matrix of order ``q + 1`` for prime ``q = 3 mod 4``."""
    residues = {(x * x) % q for x in range(1, q)}
    chi = np.array([0] + [1 if d in residues else -1 for d in range(1, q)])
    jac = chi[(np.arange(q)[None, :] - np.arange(q)[:, None]) % q]
    s = np.zeros((q + 1, q + 1), dtype=int)
    s[0, 1:] = 1
    s[1:, 0] = -1
    s[1:, 1:] = jac
    return s + np.eye(q + 1, dtype=int)


def hadamard_matrix(n):
    """Real +-1 matrix ``D`` with ``D^T D = n I``.

    Orders ``2^a`` use Sylvester's construction; ``2^a (q + 1)`` with ``q`` a
    prime congruent to 3 mod 4 use a Paley block (this covers 12, 20, 24, ...).
    Anything else raises :class:`UnsupportedOrderError`.
    """
    if n < 1:
        raise UnsupportedOrderError(f"no Hadamard matrix of order {n}")
    if n & (n - 1) == 0:
        return _sylvester(n)
    if n % 4:
        raise UnsupportedOrderError(f"no Hadamard matrix of order {n}")
    a = 0
    while n % 2 ** (a + 1) == 0:
        a += 1
    for b in range(a, -1, -1):
        m = n // 2 ** b
        q = m - 1
        if q % 4 == 3 and _is_prime(q):
            return np.kron(_paley(q), _sylvester(2 ** b))
    raise UnsupportedOrderError(f"no Hadamard construction implemented for order {n}")


def base_matrix(kind, n):
    kind = BaseKind(kind)
    if kind is BaseKind.DFT:
        return dft_matrix(n)
    return hadamard_matrix(n).astype(complex)


def build_bases(kind, group_size):
    """Base matrices ``(Z1, Z2)``: ``Z1 = B``, ``Z2 = B / sqrt(Mbar)`` for ``B`` DFT or Hadamard."""
    b = base_matrix(kind, group_size)
    return b, b / np.sqrt(group_size)


def check_bases(z1, z2):
    """Return ``(alpha1, alpha2)`` or raise if the bases cannot build a valid block."""
    z1, z2 = np.asarray(z1), np.asarray(z2)
    n = z1.shape[0]
    if z1.shape != (n, n) or z2.shape != (n, n):
        raise InvalidParameterError("base matrices must be square and of equal order")
    a1 = np.real(np.trace(z1.conj().T @ z1)) / n
    a2 = np.real(np.trace(z2.conj().T @ z2)) / n
    eye = np.eye(n)
    tol = _TOL * n * max(1.0, a1, a2)
    ok = (a1 != 0 and a2 != 0
          and np.linalg.norm(z1.conj().T @ z1 - a1 * eye) <= tol
          and np.linalg.norm(z1 @ z1.conj().T - a1 * eye) <= tol
          and np.linalg.norm(z2.conj().T @ z2 - a2 * eye) <= tol
          and np.linalg.norm(z2 @ z2.conj().T - a2 * eye) <= tol
          and np.max(np.abs(np.abs(z2) - np.sqrt(a2 / n))) <= tol
          and abs(a1 * a2 - n) <= tol)
    if not ok:
        raise InvalidParameterError("base matrices violate the scaled-unitary / modulus / product conditions")
    return a1, a2


def build_phi_breve(z1, z2):
    """``Mbar^2 x Mbar^2`` block whose rows are orthogonal and unvec to unitaries.

    Row ``m*Mbar + n`` (0-based) is ``roll(vec(Z1), n*Mbar) * repeat(Z2[m], Mbar)``;
    ``np.roll`` with a positive shift moves the last entries to the front.
    """
    check_bases(z1, z2)
    mb = z1.shape[0]
    v = vec(z1)
    rows = [np.roll(v, n * mb) * np.repeat(z2[m], mb)
            for m in range(mb) for n in range(mb)]
    return np.array(rows)


def build_phi(kind, group_size, num_tiles):
    """Return ``(Phi, A, Z1, Z2)`` with ``Phi = A kron Phi_breve``."""
    a = base_matrix(kind, num_tiles)
    z1, z2 = build_bases(kind, group_size)
    return np.kron(a, build_phi_breve(z1, z2)), a, z1, z2


def build_pilots(K, kind):
    """Orthogonal unit-modulus pilot block ``X`` (``X^H X = K I``)."""
    return base_matrix(kind, K)


def random_unitary_plan(group_size, num_tiles, seed):
    """Baseline pattern matrix whose every tile sub-block is ``vec^T`` of a Haar unitary."""
    rng = make_rng(seed)
    mb = group_size
    n = mb * mb * num_tiles
    phi = np.empty((n, n), dtype=complex)
    for i in range(n):
        for t in range(num_tiles):
            phi[i, t * mb * mb:(t + 1) * mb * mb] = vec(haar_unitary(rng, mb))
    return phi


@dataclass(frozen=True, eq=False)
class TrainingPlan:
    """Pattern matrix, pilots and their provenance.

    ``A``, ``Z1`` and ``Z2`` are ``None`` for the random baseline.
    """

    Phi: np.ndarray
    X: np.ndarray
    group_size: int
    num_tiles: int
    kind: str
    A: np.ndarray = None
    Z1: np.ndarray = None
    Z2: np.ndarray = None

    @property
    def K(self):
        return self.X.shape[0]

    @property
    def pattern_length(self):
        return self.Phi.shape[1]

    @property
    def T1(self):
        return self.K * self.Phi.shape[0]

    @property
    def structured(self):
        """True when built by the optimal construction (fast LS path applies)."""
        return self.A is not None

    @cached_property
    def codes(self):
        """Cached :func:`slot_codes` matrix."""
        return slot_codes(self)

    @cached_property
    def orthogonality_error(self):
        """``||S S^H - K Mbar G2 I||_F / dim``; zero up to rounding for the optimal plan."""
        s = self.codes
        scale = self.K * self.group_size * self.num_tiles
        return float(np.linalg.norm(s @ s.conj().T - scale * np.eye(s.shape[0])) / s.shape[0])

    def tile_patterns(self, s):
        """Unitary ``Mbar x Mbar`` tile patterns applied during pattern row ``s``."""
        mb = self.group_size
        n = mb * mb
        row = self.Phi[s]
        return [unvec(row[i * n:(i + 1) * n], mb, mb) for i in range(self.num_tiles)]


def make_plan(kind, group_size, num_tiles, K, seed=None):
    """Build a :class:`TrainingPlan`; ``kind`` is ``"dft"``, ``"hadamard"`` or ``"random"``.

    The random baseline keeps DFT pilots and only replaces the pattern matrix.
    """
    if kind == "random":
        phi = random_unitary_plan(group_size, num_tiles, seed)
        return TrainingPlan(Phi=phi, X=build_pilots(K, BaseKind.DFT),
                            group_size=group_size, num_tiles=num_tiles, kind="random")
    kind = BaseKind(kind)
    phi, a, z1, z2 = build_phi(kind, group_size, num_tiles)
    return TrainingPlan(Phi=phi, X=build_pilots(K, kind), group_size=group_size,
                        num_tiles=num_tiles, kind=kind.value, A=a, Z1=z1, Z2=z2)


def expand_training(Phi, X):
    """Per-slot patterns and pilots, one row per slot ``t = s*K + k``.

    Returns
    -------
    phi_slots : ndarray, shape (T1, Mbar^2 G2)
    x_slots : ndarray, shape (T1, K)
    """
    Phi, X = np.asarray(Phi), np.asarray(X)
    K = X.shape[0]
    return np.repeat(Phi, K, axis=0), np.tile(X, (Phi.shape[0], 1))


def slot_codes(plan):
    """Matrix ``S`` whose column ``t`` is ``kron(phi_t, x_t)``.

    The received block is ``Y = sqrt(Pu) * Q_r @ S + noise`` where ``Q_r`` is
    ``vec(Q)`` reshaped to ``N x (K Mbar^2 G2)``, so ``Phi_hat = S^T kron I_N``.
    """
    phis, xs = expand_training(plan.Phi, plan.X)
    return (phis[:, :, None] * xs[:, None, :]).reshape(phis.shape[0], -1).T


def assemble_phi_hat(plan, N):
    """Stacked sensing matrix with slot rows ``kron(phi_t^T, x_t^T, I_N)``."""
    phis, xs = expand_training(plan.Phi, plan.X)
    eye = np.eye(N)
    return np.vstack([np.kron(np.kron(p[None, :], x[None, :]), eye)
                      for p, x in zip(phis, xs)])


def write_matrix(f, a):
    """Write ``a`` as text: a ``rows cols`` header then row-major ``re+imj`` tokens."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
    text = "\n".join(lines) + "\n"
    if hasattr(f, "write"):
        f.write(text)
    else:
        with open(f, "w") as fh:
            fh.write(text)


def read_matrix(f):
    """Inverse of :func:`write_matrix`."""
    if hasattr(f, "read"):
        text = f.read()
    else:
        with open(f) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows, cols = (int(v) for v in lines[0].split())
    data = [complex(tok) for ln in lines[1:] for tok in ln.split()]
    if len(data) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(data)}")
    return np.array(data, dtype=complex).reshape(rows, cols)
