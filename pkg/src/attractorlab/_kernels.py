"""Numba-compiled inner loops.

These are the only hot paths in the library: sequential ODE stepping,
tangent-space propagation, the LSTM recurrences over long windows, and the
pairwise correlation sum.  Everything is float64 with fastmath disabled so
results are bit-reproducible for a fixed input on a fixed platform.

The LSTM layer kernels work on pre-activations ``wx`` of shape (T, B, 4H)
with the input-to-hidden product and bias already folded in; the recurrent
matvec is the only per-step matrix product.  Gate layout along the last
axis is i, f, g, o (input gate, forget gate, candidate, output gate).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _rk4_point(x, y, z, sigma, rho, beta, dt):
    k1x = sigma * (y - x)
    k1y = rho * x - y - x * z
    k1z = x * y - beta * z
    x2 = x + 0.5 * dt * k1x
    y2 = y + 0.5 * dt * k1y
    z2 = z + 0.5 * dt * k1z
    k2x = sigma * (y2 - x2)
    k2y = rho * x2 - y2 - x2 * z2
    k2z = x2 * y2 - beta * z2
    x3 = x + 0.5 * dt * k2x
    y3 = y + 0.5 * dt * k2y
    z3 = z + 0.5 * dt * k2z
    k3x = sigma * (y3 - x3)
    k3y = rho * x3 - y3 - x3 * z3
    k3z = x3 * y3 - beta * z3
    x4 = x + dt * k3x
    y4 = y + dt * k3y
    z4 = z + dt * k3z
    k4x = sigma * (y4 - x4)
    k4y = rho * x4 - y4 - x4 * z4
    k4z = x4 * y4 - beta * z4
    xn = x + dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
    yn = y + dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
    zn = z + dt * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
    return xn, yn, zn


@njit(cache=True)
def lorenz_path(s0, sigma, rho, beta, dt, skip, n):
    """Step `skip` times unrecorded, then record `n` consecutive states.

    The first recorded state is the state reached after `skip` steps
    (so skip=0 records s0 itself).
    """
    x, y, z = s0[0], s0[1], s0[2]
    for _ in range(skip):
        x, y, z = _rk4_point(x, y, z, sigma, rho, beta, dt)
    out = np.empty((n, 3))
    for i in range(n):
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = z
        if i < n - 1:
            x, y, z = _rk4_point(x, y, z, sigma, rho, beta, dt)
    return out


@njit(cache=True)
def _tangent_rhs(u, m, sigma, rho, beta, du, dm):
    x, y, z = u[0], u[1], u[2]
    du[0] = sigma * (y - x)
    du[1] = rho * x - y - x * z
    du[2] = x * y - beta * z
    # dm = J(u) @ m with J rows [-s, s, 0], [rho-z, -1, -x], [y, x, -beta]
    for j in range(3):
        m0 = m[0, j]
        m1 = m[1, j]
        m2 = m[2, j]
        dm[0, j] = sigma * (m1 - m0)
        dm[1, j] = (rho - z) * m0 - m1 - x * m2
        dm[2, j] = y * m0 + x * m1 - beta * m2


@njit(cache=True)
def lorenz_lyapunov_sums(s0, sigma, rho, beta, dt, n_steps, renorm_every):
    """Benettin tangent propagation with periodic QR reorthonormalization.

    Returns the accumulated log-stretching per tangent direction and the
    final state.  Exponents are sums / (n_steps * dt).
    """
    u = s0.copy()
    m = np.eye(3)
    sums = np.zeros(3)

    k1u = np.empty(3)
    k2u = np.empty(3)
    k3u = np.empty(3)
    k4u = np.empty(3)
    k1m = np.empty((3, 3))
    k2m = np.empty((3, 3))
    k3m = np.empty((3, 3))
    k4m = np.empty((3, 3))

    since = 0
    for i in range(n_steps):
        _tangent_rhs(u, m, sigma, rho, beta, k1u, k1m)
        _tangent_rhs(u + 0.5 * dt * k1u, m + 0.5 * dt * k1m, sigma, rho, beta, k2u, k2m)
        _tangent_rhs(u + 0.5 * dt * k2u, m + 0.5 * dt * k2m, sigma, rho, beta, k3u, k3m)
        _tangent_rhs(u + dt * k3u, m + dt * k3m, sigma, rho, beta, k4u, k4m)
        u = u + dt * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        m = m + dt * (k1m + 2.0 * k2m + 2.0 * k3m + k4m) / 6.0

        since += 1
        if since == renorm_every or i == n_steps - 1:
            q, r = np.linalg.qr(m)
            for j in range(3):
                d = r[j, j]
                if d < 0.0:
                    d = -d
                    for k in range(3):
                        q[k, j] = -q[k, j]
                sums[j] += np.log(d)
            m = q
            since = 0
    return sums, u


@njit(cache=True)
def lstm_layer_forward(wx, ut, h0, c0):
    """Run one LSTM layer over a window.

    wx : (T, B, 4H) pre-activations W @ x_t + b
    ut : (H, 4H) transposed recurrent weights, C-contiguous
    h0, c0 : (B, H) initial memory

    Returns (h_seq, c_seq, gates) with gates holding the *activated*
    i, f, g, o values needed by the backward pass.
    """
    T, B, H4 = wx.shape
    H = H4 // 4
    h_seq = np.empty((T, B, H))
    c_seq = np.empty((T, B, H))
    gates = np.empty((T, B, H4))
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        a = wx[t] + np.dot(h, ut)
        for b in range(B):
            for j in range(H):
                ig = 1.0 / (1.0 + np.exp(-a[b, j]))
                fg = 1.0 / (1.0 + np.exp(-a[b, H + j]))
                gg = np.tanh(a[b, 2 * H + j])
                og = 1.0 / (1.0 + np.exp(-a[b, 3 * H + j]))
                cv = fg * c[b, j] + ig * gg
                c[b, j] = cv
                h[b, j] = og * np.tanh(cv)
                gates[t, b, j] = ig
                gates[t, b, H + j] = fg
                gates[t, b, 2 * H + j] = gg
                gates[t, b, 3 * H + j] = og
        h_seq[t] = h
        c_seq[t] = c
    return h_seq, c_seq, gates


@njit(cache=True)
def lstm_layer_backward(dh_out, gates, c_seq, c0, u):
    """Backpropagate one LSTM layer over a window (truncated at t=0).

    dh_out : (T, B, H) upstream gradient on the hidden outputs
    gates  : activated gate values from the forward pass
    c_seq  : (T, B, H) cell states from the forward pass
    c0     : (B, H) initial cell state
    u      : (4H, H) recurrent weights

    Returns (dgates_pre, dh0, dc0) where dgates_pre holds gradients on the
    gate pre-activations; weight gradients are formed outside with matmuls.
    """
    T, B, H = dh_out.shape
    dgates = np.empty((T, B, 4 * H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                dhv = dh_out[t, b, j] + dh[b, j]
                ig = gates[t, b, j]
                fg = gates[t, b, H + j]
                gg = gates[t, b, 2 * H + j]
                og = gates[t, b, 3 * H + j]
                tc = np.tanh(c_seq[t, b, j])
                dcv = dc[b, j] + dhv * og * (1.0 - tc * tc)
                c_prev = c0[b, j] if t == 0 else c_seq[t - 1, b, j]
                dgates[t, b, j] = dcv * gg * ig * (1.0 - ig)
                dgates[t, b, H + j] = dcv * c_prev * fg * (1.0 - fg)
                dgates[t, b, 2 * H + j] = dcv * ig * (1.0 - gg * gg)
                dgates[t, b, 3 * H + j] = dhv * tc * og * (1.0 - og)
                dc[b, j] = dcv * fg
        dh = np.dot(dgates[t], u)
    return dgates, dh, dc


@njit(cache=True)
def lstm2_free_run(w1, u1, b1, w2, u2, b2, wo, bo, x0, h1, c1, h2, c2, n_steps):
    """Closed-loop iteration of the default 2-layer network.

    Feeds each sigmoid output back as the next input; returns the
    normalized outputs, shape (n_steps, 3-ish by n_out).
    """
    H1 = u1.shape[1]
    H2 = u2.shape[1]
    n_out = wo.shape[0]
    out = np.empty((n_steps, n_out))
    x = x0.copy()
    h1w = h1.copy()
    c1w = c1.copy()
    h2w = h2.copy()
    c2w = c2.copy()
    for step in range(n_steps):
        a1 = np.dot(w1, x) + np.dot(u1, h1w) + b1
        for j in range(H1):
            ig = 1.0 / (1.0 + np.exp(-a1[j]))
            fg = 1.0 / (1.0 + np.exp(-a1[H1 + j]))
            gg = np.tanh(a1[2 * H1 + j])
            og = 1.0 / (1.0 + np.exp(-a1[3 * H1 + j]))
            c1w[j] = fg * c1w[j] + ig * gg
            h1w[j] = og * np.tanh(c1w[j])
        a2 = np.dot(w2, h1w) + np.dot(u2, h2w) + b2
        for j in range(H2):
            ig = 1.0 / (1.0 + np.exp(-a2[j]))
            fg = 1.0 / (1.0 + np.exp(-a2[H2 + j]))
            gg = np.tanh(a2[2 * H2 + j])
            og = 1.0 / (1.0 + np.exp(-a2[3 * H2 + j]))
            c2w[j] = fg * c2w[j] + ig * gg
            h2w[j] = og * np.tanh(c2w[j])
        y = np.dot(wo, h2w) + bo
        for j in range(n_out):
            y[j] = 1.0 / (1.0 + np.exp(-y[j]))
            out[step, j] = y[j]
        x = y
    return out


@njit(cache=True)
def corr_counts(pts, edges, min_sep):
    """Pair counts for the correlation sum.

    counts[k] = number of pairs (i, j) with j - i > min_sep and
    ||pts_i - pts_j|| < edges[k].  `edges` must be strictly increasing.
    Also returns the total number of admissible pairs.
    """
    n = pts.shape[0]
    k_edges = edges.shape[0]
    hist = np.zeros(k_edges + 1, dtype=np.int64)
    total = 0
    for i in range(n):
        for j in range(i + 1 + min_sep, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            dz = pts[i, 2] - pts[j, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            hist[np.searchsorted(edges, d, side='right')] += 1
            total += 1
    counts = np.empty(k_edges, dtype=np.int64)
    acc = 0
    for k in range(k_edges):
        acc += hist[k]
        counts[k] = acc
    return counts, total
