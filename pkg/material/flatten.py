"""
Flattening conventions shared by the material and assembly code.

F_hat[i + 2j]          = F_ij                  (F11, F21, F12, F22)
gradF_hat[i + 2j + 4k] = dF_ij / dX_k          (T111, T211, T121, T221, T112, ...)
A state vector is [F_hat (4), gradF_hat (8)].
"""

import numpy as np

N_F = 4
N_GRAD = 8
N_STATE = N_F + N_GRAD


def f_index(i: int, j: int) -> int:
    return i + 2 * j


def grad_index(i: int, j: int, k: int) -> int:
    return i + 2 * j + 4 * k


def flatten_F(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    return np.swapaxes(F, -1, -2).reshape(F.shape[:-2] + (N_F,))


def unflatten_F(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return np.swapaxes(f.reshape(f.shape[:-1] + (2, 2)), -1, -2)


def flatten_gradF(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    lead = G.ndim - 3
    axes = tuple(range(lead)) + (lead + 2, lead + 1, lead)
    return np.transpose(G, axes).reshape(G.shape[:-3] + (N_GRAD,))


def unflatten_gradF(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    G = g.reshape(g.shape[:-1] + (2, 2, 2))
    lead = G.ndim - 3
    axes = tuple(range(lead)) + (lead + 2, lead + 1, lead)
    return np.transpose(G, axes)


def state_vector(F: np.ndarray, gradF: np.ndarray) -> np.ndarray:
    return np.concatenate([flatten_F(F), flatten_gradF(gradF)], axis=-1)


def split_state(x: np.ndarray):
    return unflatten_F(x[..., :N_F]), unflatten_gradF(x[..., N_F:])
