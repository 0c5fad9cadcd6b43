"""Independent reference implementations used as test oracles."""

import numpy as np

LD = np.longdouble
FD_STEP = 1e-5

_ACT = {
    "identity": lambda z: z,
    "tanh": np.tanh,
    "sigmoid": lambda z: 1 / (1 + np.exp(-z)),
    "softplus": lambda z: np.log1p(np.exp(z)),
}


def naive_loss(spec, theta, x, y, dtype=LD):
    """Squared loss by explicit layer walk, in extended precision by default.

    Central differences of a float64 loss lose about ``eps * L / h`` to
    cancellation, which swamps a 1e-5 relative check on coordinates with
    |g| ~ 1e-6; 80-bit arithmetic pushes that floor down by ~1000x.
    """
    theta = np.asarray(theta, dtype=dtype)
    a = np.asarray(x, dtype=dtype)
    pos = 0
    widths = spec.widths
    for l in range(1, len(widths)):
        m_out, m_in = widths[l], widths[l - 1]
        w = theta[pos:pos + m_out * m_in].reshape(m_out, m_in)
        pos += m_out * m_in
        b = theta[pos:pos + m_out]
        pos += m_out
        z = np.einsum("ij,nj->ni", w, a) + b
        a = z if l == len(widths) - 1 else _ACT[spec.activation](z)
    r = a - np.asarray(y, dtype=dtype)
    return np.sum(r * r) / (2 * len(r))


def fd_gradient(spec, theta, x, y, h=FD_STEP, coords=None):
    theta = np.asarray(theta, dtype=LD)
    coords = range(theta.size) if coords is None else coords
    out = {}
    for i in coords:
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = float((naive_loss(spec, theta + e, x, y) - naive_loss(spec, theta - e, x, y)) / (2 * h))
    return out
