"""Stochastic unravelings: diffusive (homodyne) and quantum-jump trajectories.

Two layers live here.

* :func:`step_diffusive` and :func:`step_jump` are literal single-step
  Euler-Maruyama updates of the stochastic master equations acting on a
  density matrix. They take the noise as an argument, which makes them easy
  to check by hand.
* :func:`run_trajectory` and :func:`run_ensemble` use a batched integrator
  that writes each step as a measurement (Kraus) operator,
  ``rho -> M rho M^+ / tr``. For diffusion
  ``M = (1 + sum_k L_k dY_k + 1/2 L_k^2 (dY_k^2 - dt)) exp(-i H_eff dt)`` with
  ``dY_k = dW_k + <L_k + L_k^+> dt``; for jumps ``M`` is either
  ``exp(-i H_eff dt)`` (no click) or ``L_k`` (click). The scheme agrees with
  Euler-Maruyama to the same order but keeps states exactly positive and
  keeps pure states pure, so pure initial states are propagated as kets.

Randomness is counter based: trajectory ``i`` of an ensemble with base seed
``s`` uses the seed ``trajectory_seed(s, i)`` and owns its own generator, so
results do not depend on batching or thread scheduling.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DtTooLarge, NotAProjector, StepRejected
from .lindblad import apply_generator
from .linalg import dag, expm, hermitian_part, is_projector, psd_project
from .system import QuantumSystem, as_density, pure_vector, validate_density

SCHEMES = ("diffusive", "jump")
JUMP_PROB_MAX = 0.05
TRACE_REJECT = 0.1
DEFAULT_STRIDE = 100
NOISE_CHUNK = 256
TRAJ_CHUNK = 128


def default_dt(sys: QuantumSystem):
    """``1e-3 / max(||H||, sum_k ||L_k^+ L_k||)``."""
    rate = sys.max_rate()
    return 1e-3 / rate if rate > 0 else 1e-3


def trajectory_seed(base_seed, index):
    """64-bit seed of trajectory `index` derived from `base_seed`."""
    ss = np.random.SeedSequence([int(base_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- single literal steps ------------------------------------------------------

def diffusive_increment(sys: QuantumSystem, rho, dt, dW):
    """Euler-Maruyama increment of the diffusive stochastic master equation."""
    rho = np.asarray(rho, dtype=complex)
    dW = np.atleast_1d(np.asarray(dW, dtype=float))
    if dW.size != sys.n_channels:
        raise ValueError(f"need {sys.n_channels} noise increments, got {dW.size}")
    out = apply_generator(sys, rho) * dt
    for L, w in zip(sys.jumps, dW):
        Lr = L @ rho
        back = Lr + dag(Lr)
        out += (back - np.trace(back).real * rho) * w
    return out


def step_diffusive(sys: QuantumSystem, rho, dt, dW):
    """One Euler-Maruyama step, then trace renormalization and PSD clipping."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    new = np.asarray(rho, dtype=complex) + diffusive_increment(sys, rho, dt, dW)
    tr = np.trace(new).real
    if not np.isfinite(tr) or abs(tr - 1.0) > TRACE_REJECT:
        raise StepRejected(f"trace {tr!r} before renormalization")
    new = psd_project(hermitian_part(new / tr))
    return new / np.trace(new).real


def jump_no_click_drift(sys: QuantumSystem, rho):
    """Deterministic part of the jump master equation (no detection)."""
    rho = np.asarray(rho, dtype=complex)
    H = sys.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    for LdL in sys.jump_products():
        out += np.trace(LdL @ rho).real * rho - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def step_jump(sys: QuantumSystem, rho, dt, uniform_draws):
    """One fixed-dt jump step with independent Bernoulli clicks per channel.

    Returns ``(rho_new, clicked_channels)``. Raises :class:`DtTooLarge` when
    any click probability ``<L_k^+ L_k> dt`` reaches 0.05.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rho = np.asarray(rho, dtype=complex)
    u = np.atleast_1d(np.asarray(uniform_draws, dtype=float))
    if u.size != sys.n_channels:
        raise ValueError(f"need {sys.n_channels} uniform draws, got {u.size}")
    p = np.array([np.trace(LdL @ rho).real * dt for LdL in sys.jump_products()])
    if p.size and p.max() >= JUMP_PROB_MAX:
        raise DtTooLarge(f"click probability {p.max():.3g} >= {JUMP_PROB_MAX}")
    events = [k for k in range(sys.n_channels) if u[k] < p[k]]
    if events:
        for k in events:
            L = sys.jumps[k]
            rho = L @ rho @ dag(L)
            rho = rho / np.trace(rho).real
        return hermitian_part(rho), events
    new = rho + jump_no_click_drift(sys, rho) * dt
    tr = np.trace(new).real
    if abs(tr - 1.0) > TRACE_REJECT:
        raise StepRejected(f"trace {tr!r} before renormalization")
    new = psd_project(hermitian_part(new / tr))
    return new / np.trace(new).real, events


# -- batched measurement-operator integrator -------------------------------------

class _Integrator:
    """Batched propagation of kets ``(B, d)`` or densities ``(B, d, d)``."""

    def __init__(self, sys: QuantumSystem, scheme, dt):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.sys, self.scheme, self.dt = sys, scheme, float(dt)
        d, K = sys.dim, sys.n_channels
        self.d, self.K = d, K
        self.U = expm(-1j * sys.effective_hamiltonian() * self.dt)
        self.UT = self.U.T.copy()
        if K:
            Ls = np.stack(sys.jumps)
            self.Ls = Ls
            self.LcatT = np.concatenate(list(Ls), axis=0).T.copy()
            self.L2catT = np.concatenate([L @ L for L in Ls], axis=0).T.copy()
        else:
            self.Ls = np.zeros((0, d, d), complex)

    # noise consumed per step: (K,) normals or uniforms
    def draw(self, gen, n):
        if self.scheme == "diffusive":
            return gen.standard_normal((n, self.K)) * np.sqrt(self.dt)
        return gen.random((n, self.K))

    def step_kets(self, psi, noise):
        dt, K, B = self.dt, self.K, psi.shape[0]
        clicks = None
        if K == 0:
            phi = psi @ self.UT
        elif self.scheme == "diffusive":
            phi = psi @ self.UT
            Lphi = (phi @ self.LcatT).reshape(B, K, self.d)
            n2 = np.einsum("bi,bi->b", phi.conj(), phi).real
            r = np.einsum("bi,bki->bk", phi.conj(), Lphi).real / n2[:, None]
            dY = noise + 2.0 * r * dt
            L2phi = (phi @ self.L2catT).reshape(B, K, self.d)
            phi = phi + np.einsum("bk,bki->bi", dY, Lphi) \
                + 0.5 * np.einsum("bk,bki->bi", dY * dY - dt, L2phi)
        else:
            Lpsi = (psi @ self.LcatT).reshape(B, K, self.d)
            p = np.einsum("bki,bki->bk", Lpsi.conj(), Lpsi).real * dt
            if p.max() >= JUMP_PROB_MAX:
                raise DtTooLarge(f"click probability {p.max():.3g} >= {JUMP_PROB_MAX}")
            clicks = noise < p
            phi = psi @ self.UT
            rows = np.flatnonzero(clicks.any(axis=1))
            for b in rows:
                v = psi[b]
                for k in np.flatnonzero(clicks[b]):
                    v = self.Ls[k] @ v
                    v = v / np.linalg.norm(v)
                phi[b] = v
        nrm = np.linalg.norm(phi, axis=1)
        if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
            raise StepRejected("state norm vanished or diverged")
        return phi / nrm[:, None], clicks

    def step_densities(self, rho, noise):
        dt, K, d = self.dt, self.K, self.d
        U, Ud = self.U, dag(self.U)
        clicks = None
        if K == 0:
            new = U @ rho @ Ud
        elif self.scheme == "diffusive":
            sig = U @ rho @ Ud
            tr = np.einsum("bii->b", sig).real
            r = np.einsum("kij,bji->bk", self.Ls, sig).real / tr[:, None]
            dY = noise + 2.0 * r * dt
            L2 = np.einsum("kij,kjl->kil", self.Ls, self.Ls)
            M = np.eye(d)[None] + np.einsum("bk,kij->bij", dY, self.Ls) \
                + 0.5 * np.einsum("bk,kij->bij", dY * dY - dt, L2)
            new = M @ sig @ dag(M)
        else:
            LdL = np.einsum("kji,kjl->kil", self.Ls.conj(), self.Ls)
            p = np.einsum("kij,bji->bk", LdL, rho).real * dt
            if p.max() >= JUMP_PROB_MAX:
                raise DtTooLarge(f"click probability {p.max():.3g} >= {JUMP_PROB_MAX}")
            clicks = noise < p
            new = U @ rho @ Ud
            for b in np.flatnonzero(clicks.any(axis=1)):
                r_ = rho[b]
                for k in np.flatnonzero(clicks[b]):
                    L = self.Ls[k]
                    r_ = L @ r_ @ dag(L)
                    r_ = r_ / np.trace(r_).real
                new[b] = r_
        tr = np.einsum("bii->b", new).real
        if not np.all(np.isfinite(tr)) or np.any(tr <= 0):
            raise StepRejected("state trace vanished or diverged")
        new = new / tr[:, None, None]
        return 0.5 * (new + dag(new)), clicks


def _densities(states):
    if states.ndim == 2:
        return np.einsum("bi,bj->bij", states, states.conj())
    return states


def _overlaps(states, projectors):
    """tr[rho P] for each state and projector -> (B, n_proj)."""
    if not projectors:
        return np.zeros((states.shape[0], 0))
    if states.ndim == 2:
        out = [np.einsum("bi,bi->b", states.conj(), states @ P.T).real for P in projectors]
    else:
        out = [np.einsum("bij,ji->b", states, P).real for P in projectors]
    return np.clip(np.stack(out, axis=1), 0.0, 1.0)


def _sample_steps(n_steps, stride):
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.array(idx)


@dataclass
class _BatchResult:
    times: np.ndarray
    overlaps: np.ndarray          # (B, n_proj, n_samples)
    averages: np.ndarray          # (B, d, d)
    mean_sum: np.ndarray          # (n_samples, d, d) sum over batch
    final: np.ndarray             # (B, d, d)
    jump_counts: np.ndarray       # (B,)
    events: List[list]            # per trajectory [(t, k), ...]
    observables: Dict[str, np.ndarray]
    states: Optional[np.ndarray]  # (B, n_samples, d, d) when kept


def _run_batch(integ: _Integrator, state0, seeds, n_steps, stride, projectors,
               t_burn, observables, keep_states, batched=False, keep_mean=True):
    B = len(seeds)
    gens = [np.random.default_rng(s) for s in seeds]
    if batched:
        states = np.array(state0, dtype=complex)
        pure = states.ndim == 2
    else:
        pure = state0.ndim == 1
        states = np.repeat(state0[None], B, axis=0).astype(complex)
    sample_steps = _sample_steps(n_steps, stride)
    times = sample_steps * integ.dt
    ns = len(sample_steps)
    d = integ.d
    ovl = np.zeros((B, len(projectors), ns))
    obs = {name: np.zeros((B, ns)) for name in observables}
    mean_sum = np.zeros((ns if keep_mean else 0, d, d), complex)
    avg = np.zeros((B, d, d), complex)
    kept = np.zeros((B, ns, d, d), complex) if keep_states else None
    jumps = np.zeros(B, dtype=np.int64)
    events = [[] for _ in range(B)]
    prev_rho, prev_t, span = None, None, 0.0

    def record(j, t):
        nonlocal prev_rho, prev_t, span
        rho = _densities(states)
        ovl[:, :, j] = _overlaps(states, projectors)
        for name, fn in observables.items():
            obs[name][:, j] = fn(rho)
        if keep_mean:
            mean_sum[j] = rho.sum(axis=0)
        if kept is not None:
            kept[:, j] = rho
        if t >= t_burn - 1e-12:
            if prev_rho is not None:
                h = t - prev_t
                avg[...] += 0.5 * h * (prev_rho + rho)
                span += h
            prev_rho, prev_t = rho, t

    record(0, 0.0)
    K = integ.K
    buf, pos = None, NOISE_CHUNK
    j = 1
    for step in range(1, n_steps + 1):
        if pos == NOISE_CHUNK:
            buf = np.stack([integ.draw(g, NOISE_CHUNK) for g in gens], axis=0) if K else \
                np.zeros((B, NOISE_CHUNK, 0))
            pos = 0
        noise = buf[:, pos]
        pos += 1
        if pure:
            states, clicks = integ.step_kets(states, noise)
        else:
            states, clicks = integ.step_densities(states, noise)
        if clicks is not None and clicks.any():
            t_now = step * integ.dt
            for b, k in zip(*np.nonzero(clicks)):
                jumps[b] += 1
                events[b].append((t_now, int(k)))
        if j < ns and step == sample_steps[j]:
            record(j, step * integ.dt)
            j += 1
    if span > 0:
        avg /= span
    else:
        avg[...] = prev_rho
    return _BatchResult(times, ovl, avg, mean_sum, _densities(states), jumps, events, obs, kept)


def _prepare(sys, rho0, scheme, t_final, dt, projectors):
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    dt = default_dt(sys) if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    rho = as_density(rho0, sys.dim)
    psi = pure_vector(rho)
    state0 = psi if psi is not None else rho
    projectors = [np.asarray(P, dtype=complex) for P in projectors]
    for P in projectors:
        if P.shape != (sys.dim, sys.dim) or not is_projector(P):
            raise NotAProjector("registered projectors must be Hermitian idempotents")
    n_steps = max(1, int(round(t_final / dt)))
    return _Integrator(sys, scheme, dt), state0, projectors, n_steps


@dataclass
class TrajectoryRecord:
    scheme: str
    seed: int
    times: np.ndarray
    states: Optional[np.ndarray]
    jump_events: List[Tuple[float, int]]
    running_average: np.ndarray
    overlaps: np.ndarray
    dt: float = 0.0
    t_burn: float = 0.0
    observables: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def final_state(self):
        return self.states[-1]


def run_trajectory(sys: QuantumSystem, rho0, scheme, t_final, dt=None, seed=0,
                   projectors: Sequence = (), stride=DEFAULT_STRIDE, t_burn=0.0,
                   observables: Optional[Dict[str, Callable]] = None,
                   keep_states=True) -> TrajectoryRecord:
    """Integrate one trajectory.

    `projectors` are tracked as overlap series ``tr[rho(t) P]``; `observables`
    maps names to functions of a batch of density matrices ``(B, d, d)``
    returning ``(B,)`` values. The running average is the trapezoid time
    average over samples with ``t >= t_burn``.
    """
    integ, state0, projectors, n_steps = _prepare(sys, rho0, scheme, t_final, dt, projectors)
    res = _run_batch(integ, state0, [int(seed)], n_steps, int(stride), projectors,
                     float(t_burn), dict(observables or {}), keep_states)
    return TrajectoryRecord(
        scheme=scheme, seed=int(seed), times=res.times,
        states=None if res.states is None else res.states[0],
        jump_events=res.events[0], running_average=res.averages[0],
        overlaps=res.overlaps[0], dt=integ.dt, t_burn=float(t_burn),
        observables={k: v[0] for k, v in res.observables.items()})


@dataclass
class EnsembleStats:
    n_traj: int
    scheme: str
    times: np.ndarray
    mean_state_series: np.ndarray          # (n_samples, d, d)
    terminal_overlap_samples: np.ndarray   # (n_proj, n_traj)
    mean_fidelity_inputs: np.ndarray       # (n_traj, d, d) time averages
    overlap_series: np.ndarray             # (n_traj, n_proj, n_samples)
    jump_counts: np.ndarray
    seeds: np.ndarray
    final_states: np.ndarray
    observables: Dict[str, np.ndarray]
    dt: float
    t_burn: float
    base_seed: int


def run_ensemble(sys: QuantumSystem, rho0, scheme, n_traj, t_final, dt=None, base_seed=0,
                 projectors: Sequence = (), stride=DEFAULT_STRIDE, t_burn=0.0,
                 observables: Optional[Dict[str, Callable]] = None, threads=1,
                 chunk=TRAJ_CHUNK, keep_mean=True) -> EnsembleStats:
    """Run `n_traj` independent trajectories.

    Trajectories are processed in fixed-size chunks (independent of the
    thread count) and reduced in index order, so results are bit-stable
    regardless of scheduling. ``keep_mean=False`` skips the mean state
    series, which costs ``n_samples * d^2`` memory.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    integ, state0, projectors, n_steps = _prepare(sys, rho0, scheme, t_final, dt, projectors)
    seeds = [trajectory_seed(base_seed, i) for i in range(n_traj)]
    chunks = [seeds[i:i + chunk] for i in range(0, n_traj, chunk)]
    observables = dict(observables or {})

    def work(sd):
        return _run_batch(integ, state0, sd, n_steps, int(stride), projectors,
                          float(t_burn), observables, False, keep_mean=keep_mean)

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    mean = results[0].mean_sum.copy()
    for r in results[1:]:
        mean += r.mean_sum
    mean /= n_traj
    ovl = np.concatenate([r.overlaps for r in results], axis=0)
    return EnsembleStats(
        n_traj=n_traj, scheme=scheme, times=results[0].times,
        mean_state_series=mean,
        terminal_overlap_samples=ovl[:, :, -1].T.copy(),
        mean_fidelity_inputs=np.concatenate([r.averages for r in results], axis=0),
        overlap_series=ovl,
        jump_counts=np.concatenate([r.jump_counts for r in results]),
        seeds=np.array(seeds, dtype=np.uint64),
        final_states=np.concatenate([r.final for r in results], axis=0),
        observables={k: np.concatenate([r.observables[k] for r in results], axis=0)
                     for k in observables},
        dt=integ.dt, t_burn=float(t_burn), base_seed=int(base_seed))


def run_batch_states(sys: QuantumSystem, kets, scheme, t_final, dt=None, base_seed=0,
                     t_burn=0.0, stride=DEFAULT_STRIDE, chunk=TRAJ_CHUNK):
    """Time-averaged states of one trajectory per initial ket (rows of `kets`)."""
    kets = np.atleast_2d(np.asarray(kets, dtype=complex))
    kets = kets / np.linalg.norm(kets, axis=1, keepdims=True)
    integ, _, _, n_steps = _prepare(sys, kets[0], scheme, t_final, dt, ())
    out = []
    for i in range(0, len(kets), chunk):
        part = kets[i:i + chunk]
        seeds = [trajectory_seed(base_seed, i + j) for j in range(len(part))]
        res = _run_batch(integ, part, seeds, n_steps, int(stride), [], float(t_burn),
                         {}, False, batched=True)
        out.extend(hermitian_part(a) for a in res.averages)
    return out


def time_average(record: TrajectoryRecord, t_burn=0.0):
    """Trapezoid time average of the sampled states with ``t >= t_burn``."""
    if record.states is None:
        raise ValueError("record was run without keeping states")
    t = record.times
    if t_burn >= t[-1]:
        raise ValueError("t_burn must be smaller than the final time")
    sel = t >= t_burn - 1e-12
    ts, rs = t[sel], record.states[sel]
    if len(ts) == 1:
        avg = rs[0]
    else:
        avg = np.trapezoid(rs, ts, axis=0) / (ts[-1] - ts[0])
    avg = hermitian_part(avg)
    return validate_density(avg / np.trace(avg).real, avg.shape[0])
