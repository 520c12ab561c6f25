"""Compiled inner loops for simulated annealing over a sparse QUBO."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def symmetric_from_upper(indptr, indices, data, n, out_dtype_probe):
    """Both triangles of a strictly upper CSR matrix, as CSR arrays."""
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        counts[i + 1] += indptr[i + 1] - indptr[i]
        for p in range(indptr[i], indptr[i + 1]):
            counts[indices[p] + 1] += 1
    sym_ptr = np.cumsum(counts)
    fill = sym_ptr[:-1].copy()
    nnz = sym_ptr[-1]
    sym_idx = np.empty(nnz, dtype=np.int32)
    sym_dat = np.empty(nnz, dtype=out_dtype_probe.dtype)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            c = data[p]
            sym_idx[fill[i]] = j
            sym_dat[fill[i]] = c
            fill[i] += 1
            sym_idx[fill[j]] = i
            sym_dat[fill[j]] = c
            fill[j] += 1
    return sym_ptr, sym_idx, sym_dat


@njit(cache=True)
def _flip(a, x, h, indptr, indices, data):
    """Flip bit ``a``, update local fields, return the energy change."""
    if x[a] == 0:
        d = h[a]
        sgn = 1
        x[a] = 1
    else:
        d = -h[a]
        sgn = -1
        x[a] = 0
    for p in range(indptr[a], indptr[a + 1]):
        h[indices[p]] += sgn * data[p]
    return d


@njit(cache=True)
def anneal_sweep(
    x, h, indptr, indices, data, energy, best_energy,
    picks, uniforms, kinds, extra, temperature,
    var_block, var_slot, block_start, block_k, block_slots, log,
):
    """One sweep of Metropolis moves at a fixed temperature.

    ``kinds[s] == 1`` proposes swapping the contents of the slot of
    ``picks[s]`` with another slot of the same machine.  Every applied bit
    flip is appended to ``log``; ``best_pos`` is the log length right after
    the best state seen in this sweep (``-1`` if none beat ``best_energy``).
    """
    n_log = 0
    best_pos = -1
    for s in range(picks.shape[0]):
        i = picks[s]
        if kinds[s] == 1:
            m = var_block[i]
            T = block_slots[m]
            if T < 2:
                continue
            k = block_k[m]
            t1 = var_slot[i]
            t2 = extra[s] % (T - 1)
            if t2 >= t1:
                t2 += 1
            start = n_log
            d = energy * 0
            base = block_start[m]
            for r in range(k):
                a = base + t1 * k + r
                b = base + t2 * k + r
                if x[a] != x[b]:
                    d += _flip(a, x, h, indptr, indices, data)
                    log[n_log] = a
                    n_log += 1
                    d += _flip(b, x, h, indptr, indices, data)
                    log[n_log] = b
                    n_log += 1
            if n_log == start:
                continue
            if d <= 0 or uniforms[s] < math.exp(-d / temperature):
                energy += d
                if energy < best_energy:
                    best_energy = energy
                    best_pos = n_log
            else:
                for q in range(n_log - 1, start - 1, -1):
                    _flip(log[q], x, h, indptr, indices, data)
                n_log = start
            continue

        d = h[i] if x[i] == 0 else -h[i]
        if d <= 0 or uniforms[s] < math.exp(-d / temperature):
            _flip(i, x, h, indptr, indices, data)
            log[n_log] = i
            n_log += 1
            energy += d
            if energy < best_energy:
                best_energy = energy
                best_pos = n_log
    return energy, best_energy, n_log, best_pos
