"""numba kernels shared by the local-search solvers.

The QUBO is passed as linear biases ``h`` plus the symmetric coupling matrix
in CSR form (``indptr``, ``indices``, ``data``).  Every kernel keeps the
local fields ``field[i] = h[i] + sum_j J_ij x_j`` up to date, so the energy
change of flipping bit ``i`` is ``field[i]`` if ``x_i == 0`` and
``-field[i]`` otherwise.

numba has no Generator objects; kernels draw from the module-level
``np.random`` stream, which ``seed_stream`` reseeds at the start of each read.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def seed_stream(seed):
    np.random.seed(seed)


@numba.njit(cache=True)
def random_bits(n):
    out = np.empty(n, dtype=np.int8)
    for i in range(n):
        out[i] = 1 if np.random.random() < 0.5 else 0
    return out


@numba.njit(cache=True)
def fields_and_energy(h, indptr, indices, data, state):
    n = h.shape[0]
    field = h.copy()
    energy = 0.0
    for i in range(n):
        if state[i]:
            energy += h[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                field[j] += data[k]
                if j > i and state[j]:
                    energy += data[k]
    return field, energy


@numba.njit(cache=True)
def _flip(i, state, field, indptr, indices, data):
    if state[i]:
        state[i] = 0
        s = -1.0
    else:
        state[i] = 1
        s = 1.0
    for k in range(indptr[i], indptr[i + 1]):
        field[indices[k]] += s * data[k]


@numba.njit(cache=True)
def metropolis_sweeps(h, indptr, indices, data, state, field, energy, betas, best_state, best):
    """Sequential-order Metropolis sweeps, one per entry of ``betas``.

    ``best`` is a length-1 array holding the best energy seen; ``best_state``
    is updated at the end of every sweep that improves on it.
    Returns the current energy.
    """
    n = h.shape[0]
    for t in range(betas.shape[0]):
        beta = betas[t]
        for i in range(n):
            delta = field[i] if state[i] == 0 else -field[i]
            if delta <= 0.0 or (beta * delta < 40.0 and np.random.random() < np.exp(-beta * delta)):
                _flip(i, state, field, indptr, indices, data)
                energy += delta
        if energy < best[0]:
            best[0] = energy
            best_state[:] = state
    return energy


@numba.njit(cache=True)
def tempering_sweeps(
    h, indptr, indices, data, states, fields, energies, betas, n_sweeps, swap_interval,
    counter, best_state, best,
):
    """Replica-exchange Monte Carlo.

    Replica ``r`` runs Metropolis at ``betas[r]``.  After every
    ``swap_interval``-th sweep (counted globally through ``counter[0]``)
    neighbouring replicas exchange states with probability
    ``min(1, exp((beta_r - beta_{r+1}) * (E_r - E_{r+1})))``.
    """
    R = states.shape[0]
    n = h.shape[0]
    for _ in range(n_sweeps):
        for r in range(R):
            beta = betas[r]
            state = states[r]
            field = fields[r]
            e = energies[r]
            for i in range(n):
                delta = field[i] if state[i] == 0 else -field[i]
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    _flip(i, state, field, indptr, indices, data)
                    e += delta
            energies[r] = e
            if e < best[0]:
                best[0] = e
                best_state[:] = state
        counter[0] += 1
        if counter[0] % swap_interval == 0:
            for r in range(R - 1):
                x = (betas[r] - betas[r + 1]) * (energies[r] - energies[r + 1])
                if x >= 0.0 or np.random.random() < np.exp(x):
                    for i in range(n):
                        tmp = states[r, i]
                        states[r, i] = states[r + 1, i]
                        states[r + 1, i] = tmp
                        tf = fields[r, i]
                        fields[r, i] = fields[r + 1, i]
                        fields[r + 1, i] = tf
                    te = energies[r]
                    energies[r] = energies[r + 1]
                    energies[r + 1] = te


@numba.njit(cache=True)
def tabu_moves(
    h, indptr, indices, data, state, field, energy, tenure, tabu_until, it_start, n_iter,
    best_state, best,
):
    """Steepest single-bit tabu search.

    Each iteration flips the non-tabu bit with the lowest energy change;
    a tabu bit is allowed when it would beat the best energy seen
    (aspiration).  A flipped bit stays tabu for ``tenure`` iterations.
    Ties are broken uniformly at random.  Returns the current energy.
    """
    n = h.shape[0]
    for it in range(it_start, it_start + n_iter):
        chosen = -1
        chosen_delta = np.inf
        ties = 0
        oldest = -1
        for i in range(n):
            delta = field[i] if state[i] == 0 else -field[i]
            allowed = tabu_until[i] <= it or energy + delta < best[0]
            if not allowed:
                if oldest < 0 or tabu_until[i] < tabu_until[oldest]:
                    oldest = i
                continue
            if delta < chosen_delta:
                chosen = i
                chosen_delta = delta
                ties = 1
            elif delta == chosen_delta:
                ties += 1
                if np.random.random() * ties < 1.0:
                    chosen = i
        if chosen < 0:
            chosen = oldest
            chosen_delta = field[chosen] if state[chosen] == 0 else -field[chosen]
        _flip(chosen, state, field, indptr, indices, data)
        energy += chosen_delta
        tabu_until[chosen] = it + tenure + 1
        if energy < best[0]:
            best[0] = energy
            best_state[:] = state
    return energy


@numba.njit(cache=True)
def anneal_reads(h, indptr, indices, data, betas, seeds):
    """Independent annealing reads in one call; read ``r`` reseeds with ``seeds[r]``.

    Matches a Python loop over ``metropolis_sweeps`` read by read.
    """
    n = h.shape[0]
    R = seeds.shape[0]
    out = np.empty((R, n), dtype=np.int8)
    for r in range(R):
        np.random.seed(seeds[r])
        state = random_bits(n)
        field, energy = fields_and_energy(h, indptr, indices, data, state)
        best_state = state.copy()
        best = np.array([energy])
        metropolis_sweeps(h, indptr, indices, data, state, field, energy, betas, best_state, best)
        out[r] = best_state
    return out
