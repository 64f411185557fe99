"""Independent oracles used by the test suite.

Everything here is deliberately naive (loops, definitions, extended
precision) and shares no code with the implementation paths it checks.
"""

from __future__ import annotations

import numpy as np

from lta.autodiff import Tensor, backward, no_grad


def numerical_grad(f, tensors, which: int, h: float = 1e-6, coords=None) -> np.ndarray:
    """Central-difference gradient of the scalar ``f(*tensors)`` w.r.t.
    ``tensors[which]``. ``coords`` restricts to a list of flat indices (the
    remaining entries stay zero); None means every coordinate."""
    base = tensors[which].data
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    with no_grad():
        for k in idx:
            orig = flat[k]
            flat[k] = orig + h
            fp = float(f(*tensors).data)
            flat[k] = orig - h
            fm = float(f(*tensors).data)
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def check_gradients(f, tensors, rel_tol: float = 1e-4, h: float = 1e-6, sample=None, rng=None) -> float:
    """Assert analytic gradients of scalar ``f(*tensors)`` match central
    finite differences; returns the worst relative error seen.

    Relative error is max|a - n| / max(max|a|, max|n|, 1e-12) per tensor,
    computed over all coordinates, or over ``sample`` random coordinates per
    tensor when the full sweep would be too slow.
    """
    for t in tensors:
        t.grad = None
    out = f(*tensors)
    backward(out)
    worst = 0.0
    for i, t in enumerate(tensors):
        if not t.requires_grad:
            continue
        if sample is None or t.data.size <= sample:
            coords = None
        else:
            assert rng is not None, "sampled gradcheck needs an rng"
            coords = sorted(rng.choice(t.data.size, size=sample, replace=False).tolist())
        num = numerical_grad(f, tensors, i, h=h, coords=coords)
        ana = t.grad
        assert ana is not None, f"no gradient reached tensor {i}"
        assert ana.shape == t.data.shape
        if coords is not None:
            mask = np.zeros(t.data.size, dtype=bool)
            mask[coords] = True
            ana = np.where(mask.reshape(t.data.shape), ana, 0.0)
        scale = max(np.abs(ana).max(), np.abs(num).max(), 1e-12)
        rel = float(np.abs(ana - num).max() / scale)
        worst = max(worst, rel)
        assert rel < rel_tol, f"gradient mismatch on tensor {i}: rel err {rel:.3e} >= {rel_tol:.0e}"
    return worst


def dft2_by_definition(grid: np.ndarray) -> np.ndarray:
    """O(n^4) forward DFT straight from the definition (unnormalized)."""
    H, W = grid.shape
    out = np.zeros((H, W), dtype=np.complex128)
    for u in range(H):
        for v in range(W):
            acc = 0.0 + 0.0j
            for y in range(H):
                for x in range(W):
                    acc += grid[y, x] * np.exp(-2j * np.pi * (u * y / H + v * x / W))
            out[u, v] = acc
    return out


def softmax_ce_extended(logits: np.ndarray, label: int):
    """Cross-entropy value and gradient via softmax in extended precision."""
    L = np.asarray(logits, dtype=np.longdouble)
    e = np.exp(L)
    p = e / e.sum()
    loss = -np.log(p[label])
    g = p.copy()
    g[label] -= 1.0
    return float(loss), g.astype(np.float64)


def bilinear_resize_reference(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Direct evaluation of bilinear weights (half-pixel centers, edge clamp)."""
    H, W = src.shape
    out = np.zeros((out_h, out_w))
    for oy in range(out_h):
        for ox in range(out_w):
            sy = (oy + 0.5) * H / out_h - 0.5
            sx = (ox + 0.5) * W / out_w - 0.5
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            ty, tx = sy - y0, sx - x0
            y0c, y1c = np.clip([y0, y0 + 1], 0, H - 1)
            x0c, x1c = np.clip([x0, x0 + 1], 0, W - 1)
            out[oy, ox] = (
                (1 - ty) * (1 - tx) * src[y0c, x0c]
                + (1 - ty) * tx * src[y0c, x1c]
                + ty * (1 - tx) * src[y1c, x0c]
                + ty * tx * src[y1c, x1c]
            )
    return out


def adam_reference_quadratic(w0: float, alpha: float, beta1: float, beta2: float, eps: float, steps: int):
    """Hand-rolled Adam on f(w) = w^2, kept independent of lta.optim."""
    w, m, v = w0, 0.0, 0.0
    traj = []
    for t in range(1, steps + 1):
        g = 2.0 * w
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        w = w - alpha * mhat / (np.sqrt(vhat) + eps)
        traj.append(w)
    return traj


def ssim_reference(a: np.ndarray, b: np.ndarray, window: int = 7, c1: float = 0.01**2, c2: float = 0.03**2) -> float:
    """SSIM by direct evaluation of the formula on every valid window."""
    H, W = a.shape
    vals = []
    for y in range(H - window + 1):
        for x in range(W - window + 1):
            pa = a[y : y + window, x : x + window]
            pb = b[y : y + window, x : x + window]
            mu_a, mu_b = pa.mean(), pb.mean()
            var_a, var_b = pa.var(), pb.var()
            cov = ((pa - mu_a) * (pb - mu_b)).mean()
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            vals.append(num / den)
    return float(np.mean(vals))
