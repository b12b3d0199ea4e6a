"""Independent reference implementations used to pin expected values.

These stay deliberately naive (exhaustive enumeration, central differences,
factorial search) so they cannot share a failure mode with the code under
test.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_ilp(problem, tol=1e-9):
    """Exhaustive 2^V scan; returns (best objective or None, best assignment)."""
    best_val, best_x = None, None
    v = problem.variable_count
    for bits in itertools.product((0, 1), repeat=v):
        x = np.asarray(bits, dtype=np.float64)
        feasible = True
        for con in problem.constraints:
            lhs = float(np.dot(con.coefficients, x))
            if con.sense == "<=" and lhs > con.rhs + tol:
                feasible = False
                break
            if con.sense == ">=" and lhs < con.rhs - tol:
                feasible = False
                break
            if con.sense == "=" and abs(lhs - con.rhs) > tol:
                feasible = False
                break
        if not feasible:
            continue
        val = float(np.dot(problem.objective, x))
        if best_val is None or val < best_val - tol:
            best_val, best_x = val, np.asarray(bits, dtype=np.int64)
    return best_val, best_x


def finite_difference(fn, x, step=1e-5):
    """Central-difference gradient of a scalar function of a flat array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += step
        hi = fn(bumped.reshape(x.shape))
        bumped[i] -= 2 * step
        lo = fn(bumped.reshape(x.shape))
        grad.ravel()[i] = (hi - lo) / (2 * step)
    return grad


def brute_force_accuracy(pred, truth):
    """Max matching fraction over every permutation of the label alphabet."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pred_labels = np.unique(pred)
    truth_labels = np.unique(truth)
    small, big = sorted((list(pred_labels), list(truth_labels)), key=len)
    best = 0.0
    for perm in itertools.permutations(big, len(small)):
        mapping = dict(zip(small, perm))
        if len(small) == len(pred_labels):
            relabeled = np.asarray([mapping[p] for p in pred])
            best = max(best, float(np.mean(relabeled == truth)))
        else:
            relabeled = np.asarray([mapping[t] for t in truth])
            best = max(best, float(np.mean(relabeled == pred)))
    return best


def model_params_flat(model):
    return np.concatenate([a.ravel() for a in model.weights + model.biases])


def set_model_params(model, flat):
    offset = 0
    for arr in model.weights + model.biases:
        arr.flat[:] = flat[offset:offset + arr.size]
        offset += arr.size


def finite_difference_model(model, loss_of_model, step=1e-5):
    """Central differences of a scalar loss with respect to all parameters."""
    flat = model_params_flat(model).copy()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (1.0, -1.0):
            bumped = flat.copy()
            bumped[i] += sign * step
            set_model_params(model, bumped)
            grad[i] += sign * loss_of_model(model)
    set_model_params(model, flat)
    return grad / (2 * step)
