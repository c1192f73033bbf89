"""Pure numpy implementation of the LSTM recurrence kernels.

Gate blocks are stacked in the order (input, forget, output, candidate)
along the last axis, each ``H`` wide.
"""
import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def recurrence_forward(zx, U):
    """Run the recurrent part of an LSTM over a batch of sequences.

    Parameters
    ----------
    zx : (B, T, 4H) array
        Input projections ``x_t W^T + b`` for every step.
    U : (4H, H) array
        Recurrent weights.

    Returns
    -------
    hs, cs : (B, T+1, H) arrays
        Hidden and cell states, index 0 is the zero initial state.
    gates : (B, T, 4H) array
        Post-activation gates (sigmoid for i/f/o, tanh for the candidate).
    tcs : (B, T, H) array
        ``tanh`` of the new cell state at each step, cached for backward.
    """
    B, T, G = zx.shape
    H = G // 4
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    gates = np.empty((B, T, G))
    tcs = np.empty((B, T, H))
    Ut = np.ascontiguousarray(U.T)
    for t in range(T):
        z = zx[:, t, :] + hs[:, t, :] @ Ut
        a = gates[:, t, :]
        a[:, : 3 * H] = _sigmoid(z[:, : 3 * H])
        a[:, 3 * H :] = np.tanh(z[:, 3 * H :])
        c = a[:, H : 2 * H] * cs[:, t, :] + a[:, :H] * a[:, 3 * H :]
        cs[:, t + 1, :] = c
        tc = np.tanh(c)
        tcs[:, t, :] = tc
        hs[:, t + 1, :] = a[:, 2 * H : 3 * H] * tc
    return hs, cs, gates, tcs


def recurrence_backward(U, cs, gates, tcs, dh_last):
    """Backpropagate a gradient on the final hidden state through time.

    Returns the gradient with respect to the pre-activation gates,
    shape ``(B, T, 4H)``. Weight gradients follow from it by matmuls.
    """
    B, T, G = gates.shape
    H = G // 4
    dz = np.empty((B, T, G))
    dh = np.array(dh_last, dtype=float, copy=True)
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        a = gates[:, t, :]
        i = a[:, :H]
        f = a[:, H : 2 * H]
        o = a[:, 2 * H : 3 * H]
        g = a[:, 3 * H :]
        tc = tcs[:, t, :]
        dc = dc + dh * o * (1.0 - tc * tc)
        d = dz[:, t, :]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H : 2 * H] = dc * cs[:, t, :] * f * (1.0 - f)
        d[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        d[:, 3 * H :] = dc * i * (1.0 - g * g)
        dh = d @ U
        dc = dc * f
    return dz
