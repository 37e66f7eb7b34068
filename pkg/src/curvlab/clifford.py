"""Complex Clifford representations for odd n and the boundary involution chi.

Generators satisfy ``G_a G_b + G_b G_a = -2 delta_ab``. The Hermitian
product on C^m is ``<u, v> = sum_k u_k conj(v_k)``, conjugate-linear in the
second slot, so ``omega_a[alpha, beta] = <G_a e_alpha, e_beta> = G_a[beta, alpha]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
MAX_N = 11


class CliffordError(ValueError):
    pass


@dataclass(frozen=True)
class CliffordRep:
    n: int
    m: int
    gammas: np.ndarray  # (n, m, m), skew-Hermitian


def build_rep(n: int) -> CliffordRep:
    """Irreducible representation of dimension 2^((n-1)/2) by tensor recursion."""
    if n % 2 == 0 or not 3 <= n <= MAX_N:
        raise CliffordError(f"n must be odd with 3 <= n <= {MAX_N}, got {n}")
    herm = list(PAULI)  # Hermitian, squares +1, pairwise anticommuting
    while len(herm) < n:
        eye = np.eye(herm[0].shape[0], dtype=complex)
        herm = [np.kron(h, PAULI[0]) for h in herm] + [np.kron(eye, PAULI[1]), np.kron(eye, PAULI[2])]
    gam = 1j * np.stack(herm)
    return CliffordRep(n, gam.shape[1], gam)


def omega(rep: CliffordRep) -> np.ndarray:
    """omega[a, alpha, beta] = <G_a e_alpha, e_beta>."""
    return np.transpose(rep.gammas, (0, 2, 1)).copy()


def clifford_action(rep: CliffordRep, coords) -> np.ndarray:
    """Matrix of Clifford multiplication by the vector with frame coordinates ``coords``."""
    return np.einsum("a,aij->ij", np.asarray(coords, dtype=complex), rep.gammas)


def _check_frame(frame, g, tol):
    gram = frame.T @ g @ frame
    if np.max(np.abs(gram - np.eye(frame.shape[1]))) > tol:
        raise CliffordError("frame is not g-orthonormal")


def chi_at(rep: CliffordRep, N, frame, g=None, tol: float = 1e-10) -> np.ndarray:
    """The involution on (C^m)^m, index alpha outermost.

    ``frame`` holds g-orthonormal columns ``e_1 .. e_{n-1}, nu``; the unit
    normal ``nu`` acts through its coordinates in that frame.
    """
    N = np.asarray(N, dtype=float)
    frame = np.asarray(frame, dtype=float)
    g = np.eye(rep.n) if g is None else np.asarray(g, dtype=float)
    if N.shape != (rep.n,) or abs(np.linalg.norm(N) - 1.0) > tol:
        raise CliffordError("N must be a Euclidean unit vector")
    if frame.shape != (rep.n, rep.n):
        raise CliffordError(f"frame must be {rep.n}x{rep.n}")
    _check_frame(frame, g, tol)
    nu = frame[:, -1]
    nu_action = clifford_action(rep, frame.T @ g @ nu)
    A = np.einsum("a,aij->ij", N.astype(complex), omega(rep))
    return -np.kron(A, nu_action)


def boundary_integrand(rep: CliffordRep, sample, s):
    """(H - ||dN||_tr) * sum_alpha |s_alpha|^2 for an m-tuple of fiber vectors.

    ``sample`` may carry array-valued H and trN (a whole sample set), in
    which case ``s`` is either one m-tuple or one per sample.
    """
    s = np.asarray(s, dtype=complex)
    s = s.reshape(s.shape[:-2] + (rep.m, rep.m)) if s.ndim >= 2 else s.reshape(rep.m, rep.m)
    weight = np.sum((s * s.conj()).real, axis=(-2, -1))
    out = (np.asarray(sample.H) - np.asarray(sample.trN)) * weight
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------ diagnostics


def random_frame(rng, n: int):
    """Random SPD metric and a g-orthonormal frame for it."""
    A = rng.standard_normal((n, n))
    g = A @ A.T + n * np.eye(n)
    B = rng.standard_normal((n, n))
    frame = np.zeros((n, n))
    for c in range(n):
        v = B[:, c].copy()
        for _ in range(2):
            for q in range(c):
                v -= (frame[:, q] @ g @ v) * frame[:, q]
        frame[:, c] = v / np.sqrt(v @ g @ v)
    return g, frame


def residuals(n: int, pairs: int = 100, seed: int = 0) -> dict:
    """Invariant residuals for one odd dimension."""
    rep = build_rep(n)
    G = rep.gammas
    eye = np.eye(rep.m)
    anti = max(
        float(np.max(np.abs(G[a] @ G[b] + G[b] @ G[a] + 2.0 * (a == b) * eye))) for a in range(n) for b in range(n)
    )
    skew = float(max(np.max(np.abs(Ga + Ga.conj().T)) for Ga in G))
    vol = G[0]
    for Ga in G[1:]:
        vol = vol @ Ga
    scalar = vol[0, 0]
    vol_res = float(np.max(np.abs(vol - scalar * eye)))
    om = omega(rep)
    om_sum = float(np.max(np.abs(np.einsum("aij,akj->ik", om, om.conj()) - n * eye)))
    rng = np.random.default_rng(seed)
    sq = herm = iso = 0.0
    half = rep.m * rep.m // 2
    kernel_ok = True
    I2 = np.eye(rep.m * rep.m)
    for _ in range(pairs):
        N = rng.standard_normal(n)
        N /= np.linalg.norm(N)
        g, frame = random_frame(rng, n)
        chi = chi_at(rep, N, frame, g)
        sq = max(sq, float(np.max(np.abs(chi @ chi - I2))))
        herm = max(herm, float(np.max(np.abs(chi - chi.conj().T))))
        iso = max(iso, float(np.max(np.abs(chi.conj().T @ chi - I2))))
        sv = np.linalg.svd(I2 + chi, compute_uv=False)
        kernel_ok &= int(np.sum(sv < 1e-8)) == half
    return {
        "n": n,
        "m": rep.m,
        "anticommutator": anti,
        "skew_hermitian": skew,
        "volume_scalar_modulus": float(abs(scalar)),
        "volume_residual": vol_res,
        "omega_sum": om_sum,
        "chi_squared": sq,
        "chi_hermitian": herm,
        "chi_isometry": iso,
        "kernel_dimension_ok": bool(kernel_ok),
        "pairs": pairs,
    }
