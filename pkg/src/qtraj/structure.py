"""Hilbert-space structure of a Lindblad generator.

* :func:`simultaneous_block_diagonalize` finds the finest common block form
  of a set of matrices from a random Hermitian element of their commutant.
* :func:`split_decaying_asymptotic` separates the decaying subspace from the
  asymptotic one by propagating the identity.
* :func:`find_all_stationary_states` combines both to list every extremal
  stationary state; :func:`trajectory_steady_state_finder` does the same
  from time-averaged trajectories.
* :func:`detect_dfs` lists simultaneous eigenvectors of H and every L_k.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import BudgetExceeded, ConvergenceFailure, DegenerateBlock, NotAProjector
from .lindblad import (DENSE_MAX_DIM, apply_adjoint_generator, apply_generator,
                       build_liouvillian, convergence_horizon, propagate,
                       propagate_adjoint, propagator)
from .linalg import (dag, hermitian_part, is_projector, orthonormalize,
                     projector, psd_project, support, unvectorize, vectorize)
from .system import QuantumSystem

DEFAULT_EPSILON = 1e-9
SUPPORT_RTOL = 1e-8
# Relative eigenvalue floor for the support of the propagated identity.
# Decaying components sit below exp(-50) at the horizon, while physical
# steady states (e.g. high Fock levels) can carry weights of order 1e-10.
ASYMPTOTIC_RTOL = 1e-12
INVARIANCE_TOL = 1e-8
STATIONARY_RESIDUAL = 1e-7
MAX_REDRAWS = 8


# -- decomposition container ----------------------------------------------------

@dataclass
class SubspaceDecomposition:
    """Unitary `transform` whose column ranges span the blocks.

    Roles are ``"invariant"`` for raw block-diagonalization output,
    ``"minimal-asymptotic"`` and ``"decaying"`` after the asymptotic split,
    and ``"unresolved"`` for members of a family of unitarily equivalent
    blocks (listed in `families`).
    """
    transform: np.ndarray
    blocks: List[tuple]
    roles: List[str]
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    families: List[List[int]] = field(default_factory=list)
    commutant_dim: int = 0
    residual: float = 0.0

    @property
    def n_blocks(self):
        return len(self.blocks)

    def block_sizes(self):
        return [n for _, n in self.blocks]

    def block_basis(self, i):
        s, n = self.blocks[i]
        return self.transform[:, s:s + n]

    def block_projectors(self):
        return [projector(self.block_basis(i)) for i in range(self.n_blocks)]

    def indices(self, role):
        return [i for i, r in enumerate(self.roles) if r == role]


@dataclass
class StationarySet:
    states: List[np.ndarray]
    supports: List[np.ndarray]
    pairwise_overlaps: np.ndarray
    block_indices: List[int] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.states)


@dataclass
class DfsReport:
    dfs_states: List[np.ndarray]
    eigenvalue_table: List[tuple]   # (omega, c-vector) per state
    grouping: List[List[int]]

    def __len__(self):
        return len(self.dfs_states)


def _overlap_matrix(states):
    n = len(states)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            M[i, j] = np.real(np.vdot(states[i], states[j]))
    return M


# -- commutant ------------------------------------------------------------------

def _with_adjoints(ops, tol=1e-12):
    out = []
    for A in ops:
        A = np.asarray(A, dtype=complex)
        out.append(A)
        Ad = dag(A)
        if np.linalg.norm(A - Ad) > tol * max(1.0, np.linalg.norm(A)):
            out.append(Ad)
    return out


def _cluster_sorted(w, tol):
    """Split sorted values into runs separated by gaps larger than `tol`."""
    cuts = np.flatnonzero(np.diff(w) > tol) + 1
    return np.split(np.arange(len(w)), cuts)


def _kernel(C, epsilon, scale=0.0):
    """Right singular vectors with sigma < epsilon * max(sigma_max, scale)."""
    _, s, vh = np.linalg.svd(C, full_matrices=False)
    ref = max(s[0] if s.size else 0.0, scale)
    if ref == 0.0:
        return np.eye(C.shape[1], dtype=complex)
    rank = int(np.sum(s >= epsilon * ref))
    return dag(vh[rank:])


def _anchor_eigenspaces(ops, rng):
    """Eigenspaces of a random Hermitian element of the span of `ops`."""
    d = ops[0].shape[0]
    H0 = np.zeros((d, d), dtype=complex)
    for A in ops:
        a, b = rng.standard_normal(2)
        H0 += a * hermitian_part(A) + b * hermitian_part(-1j * A)
    w, v = np.linalg.eigh(H0)
    tol = 1e-9 * max(1.0, np.abs(w).max())
    return [v[:, g] for g in _cluster_sorted(w, tol)]


def commutant_basis(ops, epsilon=DEFAULT_EPSILON, rng=None, method="auto"):
    """Hilbert-Schmidt orthonormal basis of the approximate commutant.

    Matrices X with ``||[A, X]|| < epsilon * sigma_max`` for every A in
    `ops` (adjoints are appended automatically). The ``"reduced"`` route
    first restricts X to be block diagonal in the eigenspaces of a random
    Hermitian element of the family, which shrinks the linear system; the
    ``"dense"`` route works on all ``d^2`` entries.
    """
    ops = _with_adjoints(ops)
    d = ops[0].shape[0]
    scale = max(np.linalg.norm(A) for A in ops)
    rng = np.random.default_rng(0) if rng is None else rng
    spaces = _anchor_eigenspaces(ops, rng) if method != "dense" else None
    p = sum(V.shape[1] ** 2 for V in spaces) if spaces is not None else d * d
    if method == "dense" or (method == "auto" and p >= d * d / 2):
        C = np.vstack([np.kron(np.eye(d), A) - np.kron(A.T, np.eye(d)) for A in ops])
        K = _kernel(C, epsilon, scale)
        return [unvectorize(K[:, j], d) for j in range(K.shape[1])]
    # X = sum_V V E_V V^+ ; columns of C are [A, V e_ab V^+] for each A
    cols = []
    for A in ops:
        cols.append(np.hstack([np.kron(V.conj(), A @ V) - np.kron((dag(V) @ A).T, V)
                               for V in spaces]))
    K = _kernel(np.vstack(cols), epsilon, scale)
    out = []
    for j in range(K.shape[1]):
        X = np.zeros((d, d), dtype=complex)
        pos = 0
        for V in spaces:
            m = V.shape[1]
            E = unvectorize(K[pos:pos + m * m, j], m)
            X += V @ E @ dag(V)
            pos += m * m
        out.append(X)
    return out


def _random_hermitian(basis, rng):
    c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    c /= np.linalg.norm(c)
    Y = sum(cj * Xj for cj, Xj in zip(c, basis))
    return hermitian_part(Y)


def _eigen_clusters(X):
    w, v = np.linalg.eigh(X)
    spread = w[-1] - w[0]
    tol = max(1e-6, 1e-3 * spread)
    return [v[:, g] for g in _cluster_sorted(w, tol)]


def _compress(ops, V):
    return [dag(V) @ A @ V for A in ops]


def _split(ops, V, epsilon, rng, method, basis=None, depth=0):
    """Recursively split span(V) until every piece has a trivial commutant."""
    n = V.shape[1]
    if n == 1:
        return [V]
    comp = _compress(ops, V)
    K = commutant_basis(comp, epsilon, rng, method) if basis is None else basis
    if len(K) <= 1:
        return [V]
    for _ in range(MAX_REDRAWS):
        groups = _eigen_clusters(_random_hermitian(K, rng))
        if len(groups) > 1:
            break
    else:
        raise ConvergenceFailure("random commutant element failed to split a reducible block")
    out = []
    for U in groups:
        out.extend(_split(ops, V @ U, epsilon, rng, method, None, depth + 1))
    return out


def _intertwined(ops, Vi, Vj, epsilon):
    """Is there a nonzero Z with A_i Z = Z A_j for all compressed ops?"""
    n = Vi.shape[1]
    if n != Vj.shape[1]:
        return False
    rows = []
    for A in ops:
        Ai, Aj = dag(Vi) @ A @ Vi, dag(Vj) @ A @ Vj
        rows.append(np.kron(np.eye(n), Ai) - np.kron(Aj.T, np.eye(n)))
    C = np.vstack(rows)
    s = np.linalg.svd(C, compute_uv=False)
    scale = max(1.0, max(np.linalg.norm(A) for A in ops))
    return s[-1] < max(epsilon * s[0], 1e-10 * scale)


def _families(ops, bases, epsilon):
    parent = list(range(len(bases)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(bases)):
        for j in range(i + 1, len(bases)):
            if find(i) != find(j) and _intertwined(ops, bases[i], bases[j], epsilon):
                parent[find(j)] = find(i)
    groups = {}
    for i in range(len(bases)):
        groups.setdefault(find(i), []).append(i)
    return [g for g in groups.values() if len(g) > 1]


def _assemble(bases, roles, epsilon, seed, families, commutant_dim, ops):
    T = np.concatenate(bases, axis=1)
    blocks, s = [], 0
    for V in bases:
        blocks.append((s, V.shape[1]))
        s += V.shape[1]
    res = 0.0
    for V in bases:
        P = projector(V)
        for A in ops:
            res = max(res, np.linalg.norm(A @ P - P @ A) / max(1.0, np.linalg.norm(A)))
    return SubspaceDecomposition(T, blocks, list(roles), epsilon, seed, families,
                                 commutant_dim, res)


def simultaneous_block_diagonalize(ops, epsilon=DEFAULT_EPSILON, seed=0, method="auto"):
    """Finest common block-diagonal form of `ops` and their adjoints.

    A random Hermitian element of the commutant is diagonalized and its
    eigenvalue clusters (cut where the gap exceeds
    ``max(1e-6, 1e-3 * spread)``) define the blocks. Any block whose own
    compressed commutant is still nontrivial, for instance after two
    clusters collided, is split again with a fresh draw. Blocks belonging
    to a family of unitarily equivalent copies get the role
    ``"unresolved"``; all others get ``"invariant"``.
    """
    ops = [np.asarray(A, dtype=complex) for A in ops]
    if not ops:
        raise ValueError("need at least one operator")
    d = ops[0].shape[0]
    if any(A.shape != (d, d) for A in ops):
        raise ValueError("all operators must be square with the same dimension")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(seed)
    full = _with_adjoints(ops)
    K = commutant_basis(full, epsilon, rng, method)
    bases = _split(full, np.eye(d, dtype=complex), epsilon, rng, method, basis=K)
    families = _families(full, bases, epsilon) if len(K) > len(bases) else []
    roles = ["invariant"] * len(bases)
    for fam in families:
        for i in fam:
            roles[i] = "unresolved"
    return _assemble(bases, roles, epsilon, seed, families, len(K), full)


def system_operators(sys: QuantumSystem):
    return [sys.hamiltonian] + list(sys.jumps)


# -- decaying / asymptotic split ---------------------------------------------------

def _identity_limit(sys, horizon=None):
    T = convergence_horizon(sys) if horizon is None else horizon
    eye = np.eye(sys.dim, dtype=complex)
    if sys.dim <= DENSE_MAX_DIM:
        A = unvectorize(propagator(sys, T) @ vectorize(eye), sys.dim)
    else:
        A = propagate(sys, eye, T, validate=False)
    return hermitian_part(A), T


def asymptotic_support(sys: QuantumSystem, horizon=None):
    """Orthonormal bases ``(R, D)`` of the asymptotic and decaying subspaces."""
    A, _ = _identity_limit(sys, horizon)
    w, v = np.linalg.eigh(A)
    keep = w > ASYMPTOTIC_RTOL * max(w[-1], 0.0)
    R, D = v[:, keep], v[:, ~keep]
    if D.shape[1]:
        P_D = projector(D)
        for L in sys.jumps:
            leak = np.linalg.norm(P_D @ L @ R) / max(1.0, np.linalg.norm(L))
            if leak > INVARIANCE_TOL:
                raise ConvergenceFailure(f"asymptotic subspace not invariant (leak {leak:.2e})")
    return R, D


def split_decaying_asymptotic(sys: QuantumSystem, horizon=None, n_checks=3, seed=0):
    """Projectors ``(P_D, P_R)`` onto the decaying and asymptotic subspaces.

    The identity is propagated to the convergence horizon and its support
    is the asymptotic subspace. The split is checked on `n_checks` random
    states, whose decaying occupation must have dropped below 1e-6.
    """
    R, D = asymptotic_support(sys, horizon)
    P_R, P_D = projector(R), projector(D)
    if D.shape[1]:
        T = convergence_horizon(sys) if horizon is None else horizon
        rng = np.random.default_rng(seed)
        for _ in range(n_checks):
            g = rng.standard_normal((sys.dim, sys.dim)) + 1j * rng.standard_normal((sys.dim, sys.dim))
            rho = g @ dag(g)
            rho /= np.trace(rho).real
            left = np.trace(propagate(sys, rho, T, validate=False) @ P_D).real
            if left > 1e-6:
                raise ConvergenceFailure(f"decaying occupation {left:.2e} at t = {T:.3g}")
    return P_D, P_R


# -- stationary states -------------------------------------------------------------

def stationary_state_in(sys: QuantumSystem, V, epsilon=DEFAULT_EPSILON):
    """Unique stationary state supported on the invariant span of `V`.

    Raises :class:`DegenerateBlock` when the restricted generator has more
    than one null direction.
    """
    sub = sys.restricted(V)
    n = sub.dim
    Lm = build_liouvillian(sub).mat
    _, s, vh = np.linalg.svd(Lm)
    scale = max(1.0, s[0])
    nullity = int(np.sum(s < max(epsilon, 1e-10) * scale))
    if nullity > 1:
        raise DegenerateBlock(f"block of size {n} has {nullity} stationary directions")
    rho = unvectorize(vh[-1].conj(), n)
    rho = rho * np.exp(-1j * np.angle(np.trace(rho)))
    rho = psd_project(hermitian_part(rho))
    rho = rho / np.trace(rho).real
    full = V @ rho @ dag(V)
    resid = float(np.linalg.norm(apply_generator(sys, full)))
    if resid > STATIONARY_RESIDUAL:
        raise ConvergenceFailure(f"stationary residual {resid:.2e} exceeds {STATIONARY_RESIDUAL}")
    return hermitian_part(full), resid


def find_all_stationary_states(sys: QuantumSystem, epsilon=DEFAULT_EPSILON, seed=0):
    """Every extremal stationary state with its minimal supporting subspace.

    Returns ``(decomposition, stationary_set)``. The decomposition lists the
    minimal asymptotic blocks first and the decaying parts last.
    """
    ops = system_operators(sys)
    top = simultaneous_block_diagonalize(ops, epsilon, seed)
    minimal, decaying = [], []
    for i in range(top.n_blocks):
        B = top.block_basis(i)
        sub = sys.restricted(B)
        R, D = asymptotic_support(sub)
        if D.shape[1]:
            decaying.append(B @ D)
        RB = B @ R
        if RB.shape[1] == 1:
            minimal.append(RB)
            continue
        comp = [dag(RB) @ A @ RB for A in ops]
        inner = simultaneous_block_diagonalize(comp, epsilon, seed + 1 + i)
        for j in range(inner.n_blocks):
            minimal.append(RB @ inner.block_basis(j))
    states, supports, resid = [], [], []
    for V in minimal:
        rho, r = stationary_state_in(sys, V, epsilon)
        states.append(rho)
        supports.append(projector(V))
        resid.append(r)
    full_ops = _with_adjoints(ops)
    families = _families(full_ops, minimal, epsilon)
    roles = ["minimal-asymptotic"] * len(minimal) + ["decaying"] * len(decaying)
    for fam in families:
        for i in fam:
            roles[i] = "unresolved"
    decomp = _assemble(minimal + decaying, roles, epsilon, seed, families,
                       top.commutant_dim, full_ops)
    decomp.residual = top.residual  # decaying blocks feed the asymptotic ones
    sset = StationarySet(states, supports, _overlap_matrix(states),
                         list(range(len(minimal))), resid)
    return decomp, sset


def _finder_basis(sys):
    R, _ = asymptotic_support(sys)
    return orthonormalize(R @ dag(R))


def trajectory_steady_state_finder(sys: QuantumSystem, scheme="diffusive", budget=200,
                                   t_final=None, t_burn=None, dt=None, seed=0,
                                   basis=None, dup_tol=1e-4, orth_tol=1e-6,
                                   epsilon=DEFAULT_EPSILON, stride=100, resolve=True):
    """Extremal stationary states from time-averaged trajectories.

    Each basis state of the asymptotic subspace is evolved once; the joint
    support of the resulting time averages is projected out of the basis
    and the remainder evolved again until nothing is left. Averages whose
    normalized overlap exceeds ``1 - dup_tol`` are merged; pairs with a
    non-negligible but smaller overlap are resolved exactly by block
    diagonalizing their joint support and solving for the stationary state
    of each block. With ``resolve=False`` such pairs are averaged instead,
    so the result depends on trajectory data alone. `budget` caps the
    total number of trajectories.
    """
    from .unravel import default_dt, run_batch_states
    dt = default_dt(sys) if dt is None else dt
    if t_final is None:
        t_final = 2000 * dt * 100
    t_burn = 0.25 * t_final if t_burn is None else t_burn
    basis = _finder_basis(sys) if basis is None else orthonormalize(basis)
    found, used, round_ = [], 0, 0
    todo = [basis[:, j] for j in range(basis.shape[1])]
    while todo:
        used += len(todo)
        if used > budget:
            raise BudgetExceeded(f"needed more than {budget} trajectories")
        avgs = run_batch_states(sys, np.stack(todo), scheme, t_final, dt,
                                base_seed=seed + 1000 * round_, t_burn=t_burn, stride=stride)
        found.extend(avgs)
        Pj = projector(support(sum(found), ASYMPTOTIC_RTOL))
        rest = np.stack(todo, axis=1)
        rest = rest - Pj @ rest
        rest = orthonormalize(rest, rtol=1e-6)
        rest = rest - Pj @ rest
        rest = orthonormalize(rest, rtol=1e-6)
        todo = [rest[:, j] for j in range(rest.shape[1])]
        round_ += 1
    states = _reduce_states(sys, found, dup_tol, orth_tol, epsilon, resolve)
    supports = [projector(support(r, ASYMPTOTIC_RTOL)) for r in states]
    resid = [float(np.linalg.norm(apply_generator(sys, r))) for r in states]
    return StationarySet(states, supports, _overlap_matrix(states), [], resid)


def _normalized_overlap(a, b):
    return float(np.real(np.vdot(a, b)) / np.sqrt(np.real(np.vdot(a, a)) * np.real(np.vdot(b, b))))


def _resolve_exact(sys, rhos, epsilon):
    """Exact extremal states on the joint support of `rhos`."""
    V = support(sum(rhos), ASYMPTOTIC_RTOL)
    ops = system_operators(sys)
    comp = [dag(V) @ A @ V for A in ops]
    dec = simultaneous_block_diagonalize(comp, epsilon)
    out = []
    for j in range(dec.n_blocks):
        W = V @ dec.block_basis(j)
        rho, _ = stationary_state_in(sys, W, epsilon)
        out.append(rho)
    return out


def _reduce_states(sys, states, dup_tol, orth_tol, epsilon, resolve=True):
    groups = []   # lists of mutually duplicate states
    for rho in states:
        for g in groups:
            if _normalized_overlap(rho, g[0]) > 1 - dup_tol:
                g.append(rho)
                break
        else:
            groups.append([rho])
    reps = [(sum(g) / len(g), len(g)) for g in groups]
    # merge anything not orthogonal: exactly, or by a count-weighted average
    changed = True
    while changed:
        changed = False
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                (a, na), (b, nb) = reps[i], reps[j]
                if _normalized_overlap(a, b) > orth_tol:
                    if resolve:
                        merged = [(r, 1) for r in _resolve_exact(sys, [a, b], epsilon)]
                    else:
                        merged = [((na * a + nb * b) / (na + nb), na + nb)]
                    reps = [r for k, r in enumerate(reps) if k not in (i, j)] + merged
                    changed = True
                    break
            if changed:
                break
    return [_clean(r) for r, _ in reps]


def _clean(rho):
    rho = psd_project(hermitian_part(rho))
    return rho / np.trace(rho).real


# -- decoherence-free subspaces -----------------------------------------------------

def _eig_clusters_general(M, tol):
    """Representative eigenvalues of a (non-normal) matrix, merged within tol."""
    vals = []
    for z in np.linalg.eigvals(M):
        if not any(abs(z - v) <= tol for v in vals):
            vals.append(z)
    return vals


def detect_dfs(sys: QuantumSystem, tol=1e-8):
    """Simultaneous eigenvectors of H and every jump operator.

    Each eigenspace of H is intersected channel by channel with the
    eigenspaces of L_k: for a candidate eigenvalue c of the compression
    ``V^+ L_k V`` the surviving subspace is ``V null((L_k - c) V)``.
    States are grouped by their vector of jump eigenvalues.
    """
    H = sys.hamiltonian
    w, v = np.linalg.eigh(H)
    htol = 1e-9 * max(1.0, np.abs(w).max())
    cands = [(v[:, g], float(np.mean(w[g])), ()) for g in _cluster_sorted(w, htol)]
    for L in sys.jumps:
        scale = max(1.0, np.linalg.norm(L, 2))
        nxt = []
        for V, om, cs in cands:
            M = dag(V) @ L @ V
            for c in _eig_clusters_general(M, 1e-6 * scale):
                A = (L - c * np.eye(sys.dim)) @ V
                _, s, vh = np.linalg.svd(A)
                s = np.concatenate([s, np.zeros(V.shape[1] - s.size)])
                N = dag(vh[s < 1e-9 * scale])
                if N.shape[1] == 0:
                    continue
                W = orthonormalize(V @ N)
                c_ref = complex(np.vdot(W[:, 0], L @ W[:, 0]))
                nxt.append((W, om, cs + (c_ref,)))
        cands = nxt
    states, table = [], []
    for V, om, cs in cands:
        for j in range(V.shape[1]):
            q = V[:, j]
            ok = np.linalg.norm(H @ q - om * q) <= tol * max(1.0, np.linalg.norm(H, 2))
            ok = ok and all(np.linalg.norm(L @ q - c * q) <= tol * max(1.0, np.linalg.norm(L, 2))
                            for L, c in zip(sys.jumps, cs))
            if ok:
                states.append(q)
                table.append((om, np.array(cs, dtype=complex)))
    groups = []
    for i, (_, cs) in enumerate(table):
        for g in groups:
            if np.allclose(table[g[0]][1], cs, atol=1e-6):
                g.append(i)
                break
        else:
            groups.append([i])
    return DfsReport(states, table, groups)


# -- infinite-time projectors --------------------------------------------------------

def infinite_time_projector(sys: QuantumSystem, P_Q, horizon=None):
    """Heisenberg-evolved projector ``lim exp(L^+ t)(P_Q)``.

    ``tr[P_inf rho0]`` is the probability that a trajectory started in
    `rho0` ends up in the block of `P_Q`.
    """
    P_Q = np.asarray(P_Q, dtype=complex)
    if not is_projector(P_Q):
        raise NotAProjector("P_Q must be a Hermitian idempotent")
    T = convergence_horizon(sys) if horizon is None else horizon
    if sys.dim <= DENSE_MAX_DIM:
        P = unvectorize(propagator(sys, T, adjoint=True) @ vectorize(P_Q), sys.dim)
    else:
        P = propagate_adjoint(sys, P_Q, T)
    P = hermitian_part(P)
    r = np.linalg.norm(apply_adjoint_generator(sys, P))
    if r > STATIONARY_RESIDUAL:
        raise ConvergenceFailure(f"adjoint stationarity residual {r:.2e}")
    return P


# -- report ----------------------------------------------------------------------

def _cpairs(M):
    M = np.asarray(M, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in M]


def structure_report(decomp: SubspaceDecomposition, stationary: Optional[StationarySet] = None,
                     dfs: Optional[DfsReport] = None):
    """JSON-ready dictionary describing a decomposition."""
    out = {
        "blocks": [{"start": s, "size": n, "role": r}
                   for (s, n), r in zip(decomp.blocks, decomp.roles)],
        "transform": _cpairs(decomp.transform),
        "dim": int(decomp.transform.shape[0]),
        "epsilon": decomp.epsilon,
        "seed": decomp.seed,
        "families": decomp.families,
        "commutant_dim": decomp.commutant_dim,
        "stationary_states": [],
        "dfs": [],
    }
    if stationary is not None:
        out["stationary_states"] = [
            {"state": _cpairs(r), "rank": int(support(r).shape[1]), "residual": res}
            for r, res in zip(stationary.states, stationary.residuals or [None] * len(stationary))]
    if dfs is not None:
        out["dfs"] = [
            {"state": _cpairs(q), "omega": om, "c": _cpairs(np.atleast_2d(cs)),
             "group": next(g for g, members in enumerate(dfs.grouping) if i in members)}
            for i, (q, (om, cs)) in enumerate(zip(dfs.dfs_states, dfs.eigenvalue_table))]
    return out
