"""Transmit-side optimization: max-min energy covariance and SINR balancing.

Max-min energy covariance
    maximize_Q  min_i tr(Q H_i)   s.t.  tr(Q) = P,  Q PSD.

    Treated as the bilinear matrix game max_Q min_{lam in simplex} sum_i lam_i
    tr(Q H_i). A short annealed multiplicative-weights phase (Gibbs covariance
    response at a rising inverse temperature, 1/sqrt(t) steps) warms the weight
    vector and yields certified bounds: every iterate gives a primal value (its
    worst-constraint energy) and a dual bound (lambda_max of the weighted
    constraint sum). Convergence to tight tolerances then comes from a
    cutting-plane exchange stage: top eigenvectors of the weighted sum
    accumulate as rank-one "cuts", and the restricted cut-vs-constraint matrix
    game is solved exactly; its row mixture is a feasible covariance and its
    column mixture drives the next cut. The restricted games for a whole batch
    of instances are solved simultaneously by a vectorized dense simplex
    (`_simplex_games`); scipy's LP solver is the per-instance fallback. The
    reported residual is always an honest relative duality gap.

SINR balancing
    maximize_W  min_i  w_i^H Rbar_i w_i / (sum_{j!=i} w_j^H Rbar_i w_j + sigma2)
    s.t. sum_i ||w_i||^2 = P.

    Alternates principal-generalized-eigenvector beam updates (virtual-uplink
    filters) with exact max-min power balancing for fixed beam directions; the
    balanced power levels solve a Perron eigenproblem of the interference
    coupling matrix, which equalizes all SINRs for the final directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from . import channel as _channel
from .montecarlo import McEstimate, estimate_from_samples, stream

_TINY = 1e-300


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one solver run; residual is a certified relative gap/spread."""

    objective: float
    iterations: int
    converged: bool
    residual: float

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError(f"residual must be >= 0, got {self.residual}")


@dataclass(frozen=True)
class TransmitCovariance:
    """Hermitian PSD transmit covariance with trace equal to the power budget."""

    matrix: np.ndarray
    power_budget: float

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=complex)
        scale = max(1.0, abs(float(np.trace(q).real)))
        if np.max(np.abs(q - q.conj().T)) > 1e-10 * scale:
            raise ValueError("covariance must be Hermitian within 1e-10")
        if np.linalg.eigvalsh(q).min() < -1e-8 * scale:
            raise ValueError("covariance must be PSD (min eigenvalue >= -1e-8)")
        tr = float(np.trace(q).real)
        if abs(tr - self.power_budget) > 1e-6 * abs(self.power_budget):
            raise ValueError(
                f"trace {tr} must equal power budget {self.power_budget} within 1e-6 relative"
            )
        object.__setattr__(self, "matrix", q)


@dataclass(frozen=True)
class PrecodingMatrix:
    """Per-user beam vectors stacked as columns of an M x U matrix."""

    columns: np.ndarray
    power_budget: float

    def __post_init__(self):
        w = np.asarray(self.columns, dtype=complex)
        if w.ndim != 2:
            raise ValueError(f"columns must be an M x U matrix, got shape {w.shape}")
        total = float(np.sum(np.abs(w) ** 2))
        if abs(total - self.power_budget) > 1e-6 * abs(self.power_budget):
            raise ValueError(
                f"total beam power {total} must equal budget {self.power_budget} within 1e-6 relative"
            )
        object.__setattr__(self, "columns", w)

    @property
    def num_users(self) -> int:
        return self.columns.shape[1]


def select_trained_devices(path_losses_db: Sequence[float], num_trained: int) -> np.ndarray:
    """Indices (0-based, ascending) of the K devices with largest path loss.

    Ties are broken toward the lowest index (stable sort on descending loss).
    """
    losses = np.asarray(path_losses_db, dtype=float)
    if not 1 <= num_trained <= losses.size:
        raise ValueError(f"K must be in [1, {losses.size}], got {num_trained}")
    order = np.argsort(-losses, kind="stable")
    return np.sort(order[:num_trained])


# ---------------------------------------------------------------------------
# max-min energy covariance
# ---------------------------------------------------------------------------

_WARM_LADDER = (32.0, 256.0)  # inverse temperatures for the warm-up phase
_INNER_ITERATIONS = 30
_MW_STEP = 3.0
_SINGLE_WARM = 240
_SINGLE_ROUNDS = 60
_BATCH_WARM = 60
_BATCH_ROUNDS = 40


@dataclass(frozen=True)
class MaxminBatchResult:
    """Vectorized solve over a batch of constraint sets."""

    covariances: np.ndarray  # (B, M, M)
    objectives: np.ndarray  # (B,)
    residuals: np.ndarray  # (B,) certified relative gaps
    converged: np.ndarray  # (B,) bool
    iterations: int


def _validate_constraints(stack: np.ndarray) -> None:
    scale = np.max(np.abs(stack)) if stack.size else 0.0
    herm_err = np.max(np.abs(stack - np.conj(np.swapaxes(stack, -1, -2))))
    if herm_err > 1e-8 * max(scale, 1e-30):
        raise ValueError("constraint matrices must be Hermitian")
    min_eig = np.linalg.eigvalsh(stack).min() if stack.size else 0.0
    if min_eig < -1e-8 * max(scale, 1e-30):
        raise ValueError(f"constraint matrices must be PSD, min eigenvalue {min_eig:.3e}")


def _mwu_phase(Hn: np.ndarray, max_iterations: int, tol: float,
               ladder: Sequence[float] = _WARM_LADDER):
    """Annealed multiplicative-weights phase on normalized constraints.

    Hn: (B, K, M, M), each instance scaled so max_k tr(Hn_k) = 1. Returns
    (Q (trace-1), primal, dual, lam, iterations) with per-instance certified
    bounds: primal = min_k tr(Q Hn_k) over iterates, dual = min over iterates
    of lambda_max(sum_k lam_k Hn_k).
    """
    B, K, M, _ = Hn.shape
    lam = np.full((B, K), 1.0 / K)
    eye = np.broadcast_to(np.eye(M, dtype=complex), (B, M, M))
    q_best = np.array(eye) / M
    best_primal = np.einsum("bij,bkji->bk", q_best, Hn).real.min(axis=1)
    best_dual = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    total_it = 0
    for mu in ladder:
        if not active.any() or total_it >= max_iterations:
            break
        for _ in range(_INNER_ITERATIONS):
            if total_it >= max_iterations:
                break
            total_it += 1
            idx = np.flatnonzero(active)
            a_mat = np.einsum("bk,bkij->bij", lam[idx], Hn[idx])
            w, v = np.linalg.eigh(a_mat)
            best_dual[idx] = np.minimum(best_dual[idx], w[:, -1])
            gibbs = np.exp(mu * (w - w[:, -1:]))
            gibbs /= gibbs.sum(axis=1, keepdims=True)
            hv = np.einsum("bkij,bjm->bkim", Hn[idx], v)
            quad = np.einsum("bim,bkim->bkm", np.conj(v), hv).real  # v_m^H H_k v_m
            grad = np.einsum("bkm,bm->bk", quad, gibbs)
            primal = grad.min(axis=1)
            improved = primal > best_primal[idx]
            if improved.any():
                sub = idx[improved]
                gi = gibbs[improved].astype(complex)
                vi = v[improved]
                q_best[sub] = np.einsum("bim,bm,bjm->bij", vi, gi, np.conj(vi))
                best_primal[sub] = primal[improved]
            gap = best_dual[idx] - best_primal[idx]
            still = gap > tol * np.maximum(best_primal[idx], _TINY)
            active[idx] = still
            if not still.any():
                break
            # multiplicative-weights descent on the simplex, step ~ 1/sqrt(t)
            eta = _MW_STEP / math.sqrt(total_it)
            shifted = grad - grad.min(axis=1, keepdims=True)
            lam_new = lam[idx] * np.exp(-eta * shifted)
            lam_new /= lam_new.sum(axis=1, keepdims=True)
            lam[idx] = lam_new
    return q_best, best_primal, best_dual, lam, total_it


def _simplex_games(payoffs: np.ndarray, counts: np.ndarray):
    """Exactly solve a batch of zero-sum matrix games by a vectorized simplex.

    payoffs[b, r, k]: payoff of cut r against constraint k; only the first
    counts[b] rows of instance b are valid. The row player (cuts) maximizes,
    the column player (constraint weights) minimizes. With payoffs shifted
    positive, the game reduces to the LP  max 1^T x  s.t.  C x <= 1, x >= 0,
    whose slack basis is feasible; all instances pivot simultaneously with
    per-instance pivot choices. Returns (lam, pi, value, ok): column and row
    mixed strategies, game value, and a per-instance success flag.
    """
    B, R, K = payoffs.shape
    shift = 1.0 - min(0.0, float(payoffs.min()) if payoffs.size else 0.0)
    row_valid = np.arange(R)[None, :] < counts[:, None]
    costs = np.where(row_valid[:, :, None], payoffs + shift, 0.0)
    tableau = np.zeros((B, R + 1, K + R + 1))
    tableau[:, 0, :K] = -1.0
    tableau[:, 1:, :K] = costs
    tableau[:, 1:, K:K + R] = np.eye(R)[None]
    tableau[:, 1:, -1] = 1.0
    basis = np.tile(np.arange(K, K + R), (B, 1))
    active = np.ones(B, dtype=bool)
    ok = np.ones(B, dtype=bool)
    for _ in range(4 * (K + R) + 20):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        obj = tableau[idx, 0, :K + R]
        col_j = np.argmin(obj, axis=1)
        entering = obj[np.arange(idx.size), col_j] < -1e-9
        active[idx[~entering]] = False
        idx, col_j = idx[entering], col_j[entering]
        if idx.size == 0:
            break
        body = tableau[idx, 1:, :]
        col = np.take_along_axis(body, col_j[:, None, None], axis=2)[:, :, 0]
        pos = col > 1e-9
        ratios = np.where(pos, body[:, :, -1] / np.where(pos, col, 1.0), np.inf)
        row_i = np.argmin(ratios, axis=1)
        unbounded = ~np.isfinite(ratios[np.arange(idx.size), row_i])
        if unbounded.any():
            ok[idx[unbounded]] = False
            active[idx[unbounded]] = False
            keep = ~unbounded
            idx, col_j, row_i = idx[keep], col_j[keep], row_i[keep]
            if idx.size == 0:
                continue
        block = tableau[idx]
        sub = np.arange(idx.size)
        piv_row = block[sub, row_i + 1, :]
        piv_val = piv_row[sub, col_j]
        piv_row = piv_row / piv_val[:, None]
        col_vec = np.take_along_axis(block, col_j[:, None, None], axis=2)[:, :, 0]
        block = block - col_vec[:, :, None] * piv_row[:, None, :]
        block[sub, row_i + 1, :] = piv_row
        tableau[idx] = block
        basis[idx, row_i] = col_j
    ok &= ~active  # instances that ran out of pivots
    lam = np.zeros((B, K))
    rhs = np.clip(tableau[:, 1:, -1], 0.0, None)
    from_x = basis < K
    b_idx, r_idx = np.nonzero(from_x)
    np.add.at(lam, (b_idx, basis[b_idx, r_idx]), rhs[b_idx, r_idx])
    total = lam.sum(axis=1)
    duals = np.clip(tableau[:, 0, K:K + R], 0.0, None) * row_valid
    dual_total = duals.sum(axis=1)
    ok &= (total > 0) & (dual_total > 0)
    safe_total = np.where(total > 0, total, 1.0)
    safe_dual = np.where(dual_total > 0, dual_total, 1.0)
    value = 1.0 / safe_total - shift
    lam = lam / safe_total[:, None]
    pi = duals / safe_dual[:, None]
    bad = ~(np.isfinite(lam).all(axis=1) & np.isfinite(pi).all(axis=1) & np.isfinite(value))
    ok &= ~bad
    return lam, pi, value, ok


def _quadratic_forms(Hn: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Re(v^H H_k v) for each constraint: Hn (b, K, M, M), vecs (b, M) -> (b, K)."""
    return np.einsum("bi,bkij,bj->bk", np.conj(vecs), Hn, vecs).real


def _append_cuts(cuts, costs, counts, new_vecs, Hn_sub, target_idx):
    """Scatter deduplicated unit-norm cuts (and their payoffs) into the buffers."""
    norms = np.linalg.norm(new_vecs, axis=1)
    keep = norms > 0
    vecs = new_vecs[keep] / norms[keep, None]
    idx = target_idx[keep]
    hn = Hn_sub[keep]
    if idx.size == 0:
        return
    overlap = np.abs(np.einsum("bri,bi->br", np.conj(cuts[idx]), vecs)) ** 2
    existing = np.arange(cuts.shape[1])[None, :] < counts[idx, None]
    duplicate = (overlap * existing > 1.0 - 1e-9).any(axis=1)
    has_room = counts[idx] < cuts.shape[1]
    keep2 = ~duplicate & has_room
    idx, vecs, hn = idx[keep2], vecs[keep2], hn[keep2]
    if idx.size == 0:
        return
    slot = counts[idx]
    cuts[idx, slot] = vecs
    costs[idx, slot] = _quadratic_forms(hn, vecs)
    counts[idx] += 1


def _kelley_batch(Hn, lam, q_best, best_primal, best_dual, tol, max_rounds, cut_budget):
    """Batched cutting-plane exchange stage; refines bounds and iterates in place.

    Returns (rounds_used, fallback_mask): instances flagged in fallback_mask
    exhausted the batched machinery (simplex failure, full cut buffer, or the
    round budget) while still above tolerance.
    """
    B, K, M, _ = Hn.shape
    r_max = K + cut_budget
    cuts = np.zeros((B, r_max, M), dtype=complex)
    costs = np.zeros((B, r_max, K))
    counts = np.zeros(B, dtype=int)
    # seed dictionary: dominant eigenvector of every constraint
    _, v0 = np.linalg.eigh(Hn)
    for k in range(K):
        _append_cuts(cuts, costs, counts, v0[:, k, :, -1], Hn, np.arange(B))
    failed = np.zeros(B, dtype=bool)
    active = (best_dual - best_primal) > tol * np.maximum(best_primal, _TINY)
    rounds = 0
    while active.any() and rounds < max_rounds:
        rounds += 1
        idx = np.flatnonzero(active)
        hn = Hn[idx]
        a_mat = np.einsum("bk,bkij->bij", lam[idx], hn)
        w, v = np.linalg.eigh(a_mat)
        best_dual[idx] = np.minimum(best_dual[idx], w[:, -1])
        v_top = v[:, :, -1]
        _append_cuts(cuts, costs, counts, v_top, hn, idx)
        if M > 1:
            v2 = v[:, :, -2]
            _append_cuts(cuts, costs, counts, v2, hn, idx)
            near = w[:, -1] - w[:, -2] < 1e-7 * np.maximum(np.abs(w[:, -1]), 1e-12)
            if near.any():
                sub, hs = idx[near], hn[near]
                v2n, v1n = v2[near], v_top[near]
                _append_cuts(cuts, costs, counts, (v1n + v2n) / math.sqrt(2.0), hs, sub)
                _append_cuts(cuts, costs, counts, (v1n + 1j * v2n) / math.sqrt(2.0), hs, sub)
        r_use = int(counts[idx].max())  # size the master to cuts actually present
        lam_new, pi, _, ok = _simplex_games(costs[idx, :r_use], counts[idx])
        good = np.flatnonzero(ok)
        if good.size:
            sub = idx[good]
            q_cand = np.einsum("br,bri,brj->bij", pi[good].astype(complex),
                               cuts[sub, :r_use], np.conj(cuts[sub, :r_use]))
            q_cand = 0.5 * (q_cand + np.conj(np.swapaxes(q_cand, 1, 2)))
            tr = np.einsum("bii->b", q_cand).real
            q_cand /= np.where(tr > 0, tr, 1.0)[:, None, None]
            p_cand = np.einsum("bij,bkji->bk", q_cand, Hn[sub]).real.min(axis=1)
            upd = p_cand > best_primal[sub]
            q_best[sub[upd]] = q_cand[upd]
            best_primal[sub[upd]] = p_cand[upd]
            # damp the weight iterate to tame cutting-plane oscillation
            lam[sub] = 0.5 * lam[sub] + 0.5 * lam_new[good]
        failed[idx[~ok]] = True
        full = counts >= r_max
        gap = best_dual - best_primal
        active = (gap > tol * np.maximum(best_primal, _TINY)) & ~failed & ~full
    fallback = (best_dual - best_primal) > tol * np.maximum(best_primal, _TINY)
    return rounds, fallback


def _cutting_plane_scipy(Hn, lam0, tol, max_rounds=_SINGLE_ROUNDS):
    """Per-instance exchange stage with LPs solved by scipy; fallback path.

    Returns (Q trace-1, primal, dual): the mixed strategy over accumulated
    rank-one cuts is always feasible, so `primal` is exact.
    """
    K, M, _ = Hn.shape
    cuts: list[np.ndarray] = []

    def add_cut(vec):
        nrm = np.linalg.norm(vec)
        if nrm <= 0:
            return
        v = vec / nrm
        for u in cuts:
            if abs(np.vdot(u, v)) ** 2 > 1.0 - 1e-12:
                return
        cuts.append(v)

    for k in range(K):
        _, v = np.linalg.eigh(Hn[k])
        add_cut(v[:, -1])
    lam = lam0.copy()
    best_primal = -np.inf
    best_dual = np.inf
    q_best = np.eye(M, dtype=complex) / M
    for _ in range(max_rounds):
        a_mat = np.einsum("k,kij->ij", lam, Hn)
        w, v = np.linalg.eigh(a_mat)
        best_dual = min(best_dual, float(w[-1]))
        top = np.flatnonzero(w > w[-1] - 1e-9 * max(abs(w[-1]), 1e-12))
        for i in top:
            add_cut(v[:, i])
        for a in range(len(top)):
            for b in range(a + 1, len(top)):
                va, vb = v[:, top[a]], v[:, top[b]]
                add_cut((va + vb) / math.sqrt(2.0))
                add_cut((va + 1j * vb) / math.sqrt(2.0))
        cut_mat = np.stack(cuts)
        payoff = np.einsum("ci,kij,cj->ck", np.conj(cut_mat), Hn, cut_mat).real
        n_cuts = payoff.shape[0]
        # column player: min t  s.t.  payoff @ lam <= t, lam in simplex
        c = np.zeros(K + 1)
        c[-1] = 1.0
        res_p = linprog(c, A_ub=np.hstack([payoff, -np.ones((n_cuts, 1))]),
                        b_ub=np.zeros(n_cuts),
                        A_eq=np.concatenate([np.ones(K), [0.0]])[None, :], b_eq=[1.0],
                        bounds=[(0.0, None)] * K + [(None, None)], method="highs")
        # row player: max u  s.t.  payoff^T @ pi >= u, pi in simplex
        c2 = np.zeros(n_cuts + 1)
        c2[-1] = -1.0
        res_d = linprog(c2, A_ub=np.hstack([-payoff.T, np.ones((K, 1))]),
                        b_ub=np.zeros(K),
                        A_eq=np.concatenate([np.ones(n_cuts), [0.0]])[None, :], b_eq=[1.0],
                        bounds=[(0.0, None)] * n_cuts + [(None, None)], method="highs")
        if not (res_p.success and res_d.success):
            break
        pi = np.clip(res_d.x[:n_cuts], 0.0, None)
        pi /= pi.sum()
        q_cand = np.einsum("c,ci,cj->ij", pi.astype(complex), cut_mat, np.conj(cut_mat))
        q_cand = 0.5 * (q_cand + q_cand.conj().T)
        q_cand /= np.trace(q_cand).real
        primal = float(np.einsum("ij,kji->k", q_cand, Hn).real.min())
        if primal > best_primal:
            best_primal = primal
            q_best = q_cand
        if best_dual - best_primal <= tol * max(best_primal, _TINY):
            break
        lam_next = np.clip(res_p.x[:K], 0.0, None)
        lam = lam_next / lam_next.sum()
    return q_best, best_primal, best_dual


def solve_maxmin_batch(
    constraints: np.ndarray,
    power_budget: float,
    tol: float = 1e-3,
    warm_iterations: int = _BATCH_WARM,
    max_rounds: int = _BATCH_ROUNDS,
    cut_budget: int = 80,
) -> MaxminBatchResult:
    """Solve max_Q min_k tr(Q H_k) for a batch of constraint sets.

    constraints: (B, K, M, M) Hermitian PSD stacks. Residuals are certified
    relative duality gaps; any instance the batched stages leave above `tol`
    is finished by the per-instance fallback.
    """
    stack = np.asarray(constraints, dtype=complex)
    if stack.ndim != 4:
        raise ValueError(f"expected (B, K, M, M) constraints, got shape {stack.shape}")
    if not power_budget > 0:
        raise ValueError(f"power budget must be > 0, got {power_budget}")
    B, K, M, _ = stack.shape
    traces = np.einsum("bkii->bk", stack).real
    scale = traces.max(axis=1)
    degenerate = traces.min(axis=1) <= 0  # a zero constraint pins the optimum at 0
    safe_scale = np.where(scale > 0, scale, 1.0)
    Hn = stack / safe_scale[:, None, None, None]

    if K == 1:
        w, v = np.linalg.eigh(stack[:, 0])
        top = v[:, :, -1]
        q = power_budget * np.einsum("bi,bj->bij", top, np.conj(top))
        obj = power_budget * w[:, -1]
        return MaxminBatchResult(q, obj, np.zeros(B), np.ones(B, dtype=bool), 0)

    q_n, primal, dual, lam, warm_used = _mwu_phase(Hn, warm_iterations, tol)
    rounds_used, fallback = _kelley_batch(Hn, lam, q_n, primal, dual, tol,
                                          max_rounds, cut_budget)
    for b in np.flatnonzero(fallback & ~degenerate):
        q_b, p_b, d_b = _cutting_plane_scipy(Hn[b], lam[b], tol)
        if p_b > primal[b]:
            primal[b] = p_b
            q_n[b] = q_b
        dual[b] = min(dual[b], d_b)
    if degenerate.any():
        idx = np.flatnonzero(degenerate)
        q_n[idx] = np.eye(M, dtype=complex) / M
        primal[idx] = 0.0
        dual[idx] = 0.0
    rel_gap = np.clip((dual - primal) / np.maximum(primal, _TINY), 0.0, None)
    rel_gap[degenerate] = 0.0

    # de-normalize, clean up, and recompute the exact objective
    q = power_budget * q_n
    q = 0.5 * (q + np.conj(np.swapaxes(q, 1, 2)))
    tr = np.einsum("bii->b", q).real
    q *= (power_budget / tr)[:, None, None]
    objectives = np.einsum("bij,bkji->bk", q, stack).real.min(axis=1)
    converged = rel_gap <= tol
    return MaxminBatchResult(q, objectives, rel_gap, converged, warm_used + rounds_used)


def maxmin_energy_covariance(
    gains: Sequence[np.ndarray] | np.ndarray,
    power_budget: float,
    tol: float = 1e-6,
    max_iterations: int = 20000,
) -> tuple[TransmitCovariance, SolverReport]:
    """Covariance maximizing the minimum of tr(Q H_i) under a trace budget.

    Each H_i is Hermitian PSD: an instantaneous outer product h h^H or a
    statistical second moment. Returns the best certified iterate; converged
    is False when the relative duality gap still exceeds `tol` after the
    iteration budget.
    """
    stack = np.stack([np.asarray(h, dtype=complex) for h in gains])
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"each gain matrix must be square, got stack shape {stack.shape}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")
    _validate_constraints(stack)
    warm = min(_SINGLE_WARM, max_iterations)
    rounds = max(1, min(_SINGLE_ROUNDS, max_iterations - warm))
    result = solve_maxmin_batch(stack[None], power_budget, tol=tol,
                                warm_iterations=warm, max_rounds=rounds,
                                cut_budget=4 * _SINGLE_ROUNDS)
    q = result.covariances[0]
    report = SolverReport(
        objective=float(result.objectives[0]),
        iterations=result.iterations,
        converged=bool(result.converged[0]),
        residual=float(result.residuals[0]),
    )
    return TransmitCovariance(matrix=q, power_budget=power_budget), report


# ---------------------------------------------------------------------------
# SINR balancing
# ---------------------------------------------------------------------------


def statistical_sinr(
    precoder: PrecodingMatrix, second_moments: Sequence[np.ndarray], noise_power: float
) -> np.ndarray:
    """Average SINR of each user: w_i^H R_i w_i / (sum_{j!=i} w_j^H R_i w_j + sigma2)."""
    w = precoder.columns
    r = np.stack([np.asarray(m, dtype=complex) for m in second_moments])
    quad = np.einsum("iu,kij,ju->ku", np.conj(w), r, w).real  # (user k, beam u)
    signal = np.diag(quad)
    interference = quad.sum(axis=1) - signal
    return signal / (interference + noise_power)


def _perron_balance(coupling: np.ndarray, signal_gains: np.ndarray,
                    noise_power: float, power_budget: float):
    """Exact max-min power balance for fixed beam directions.

    coupling[i, j] = interference gain onto user i from beam j (zero diagonal).
    Solves p_i s_i = t (sum_j coupling[i, j] p_j + sigma2) with sum p = P via
    the Perron root of the extended coupling matrix; returns (p, t)."""
    u = signal_gains.size
    d = 1.0 / signal_gains
    top = np.hstack([d[:, None] * coupling, noise_power * d[:, None]])
    bottom = top.sum(axis=0, keepdims=True) / power_budget
    ext = np.vstack([top, bottom])
    eigvals, eigvecs = np.linalg.eig(ext)
    k = int(np.argmax(eigvals.real))
    rho = float(eigvals[k].real)
    vec = eigvecs[:, k].real
    if vec[-1] < 0:
        vec = -vec
    vec = np.clip(vec, 0.0, None)
    p = vec[:u] / vec[-1]
    return p, 1.0 / rho


def sinr_balancing_precoder(
    second_moments: Sequence[np.ndarray],
    noise_power: float,
    power_budget: float,
    tol: float = 1e-6,
    max_iterations: int = 5000,
) -> tuple[PrecodingMatrix, SolverReport]:
    """Precoder maximizing the minimum average SINR under a total power budget.

    At convergence all users' average SINRs are equal within `tol` (the
    max-min optimum balances them); the report's residual is the realized
    relative spread and its objective the balanced SINR.
    """
    r = np.stack([np.asarray(m, dtype=complex) for m in second_moments])
    _validate_constraints(r)
    n_users, m = r.shape[0], r.shape[1]
    if not noise_power > 0 or not power_budget > 0:
        raise ValueError("noise_power and power_budget must be > 0")

    # deterministic init: dominant eigenvectors
    directions = np.empty((m, n_users), dtype=complex)
    for i in range(n_users):
        _, v_i = np.linalg.eigh(r[i])
        directions[:, i] = v_i[:, -1]

    if n_users == 1:
        w = math.sqrt(power_budget) * directions
        precoder = PrecodingMatrix(columns=w, power_budget=power_budget)
        sinr = float(statistical_sinr(precoder, r, noise_power)[0])
        return precoder, SolverReport(objective=sinr, iterations=0, converged=True, residual=0.0)

    eye = np.eye(m, dtype=complex)
    q_powers = np.full(n_users, power_budget / n_users)
    level_prev = -np.inf
    iterations = 0
    stalled = False
    coupling = np.zeros((n_users, n_users))
    signal_gains = np.ones(n_users)
    for iterations in range(1, max_iterations + 1):
        # virtual-uplink beam update: principal generalized eigenvector
        interf_total = noise_power * eye + np.einsum("j,jab->ab", q_powers, r)
        for i in range(n_users):
            b_i = interf_total - q_powers[i] * r[i]
            _, v_top = scipy.linalg.eigh(r[i], b_i, subset_by_index=[m - 1, m - 1])
            u = v_top[:, 0]
            directions[:, i] = u / np.linalg.norm(u)
        quad = np.einsum("iu,kij,ju->ku", np.conj(directions), r, directions).real
        signal_gains = np.diag(quad).copy()
        coupling = quad - np.diag(signal_gains)
        q_powers, level = _perron_balance(coupling.T, signal_gains, noise_power, power_budget)
        if abs(level - level_prev) <= 0.01 * tol * max(abs(level), _TINY):
            stalled = True
            break
        level_prev = level

    # exact downlink balance for the final directions
    p_powers, _ = _perron_balance(coupling, signal_gains, noise_power, power_budget)
    w = directions * np.sqrt(p_powers)[None, :]
    total = np.sum(np.abs(w) ** 2)
    w *= math.sqrt(power_budget / total)
    precoder = PrecodingMatrix(columns=w, power_budget=power_budget)
    sinrs = statistical_sinr(precoder, r, noise_power)
    spread = float((sinrs.max() - sinrs.min()) / max(sinrs.min(), _TINY))
    report = SolverReport(
        objective=float(sinrs.min()),
        iterations=iterations,
        converged=bool(stalled and spread <= tol),
        residual=spread,
    )
    return precoder, report


def average_sinr_mc(
    precoder: PrecodingMatrix,
    models: Sequence[_channel.RicianChannelModel],
    geometry: _channel.UlaGeometry,
    noise_power: float,
    trials: int,
    seed: int,
) -> list[McEstimate]:
    """Per-user Monte Carlo mean of the instantaneous SINR under the precoder.

    User i's fading draws come from stream (seed, i); the estimate list aligns
    with `models`.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    w = precoder.columns
    estimates = []
    for i, model in enumerate(models):
        h = _channel.sample_channel_block(model, geometry, stream(seed, i), trials)
        amps = np.abs(h @ np.conj(w)) ** 2  # (trials, U); entry j = |h^H w_j|^2
        signal = amps[:, i]
        interference = amps.sum(axis=1) - signal
        estimates.append(estimate_from_samples(signal / (interference + noise_power), seed))
    return estimates
