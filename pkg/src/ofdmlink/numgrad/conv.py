"""2-D convolutions (dense, depthwise, separable) with dilation and zero padding.

All convolutions use the cross-correlation convention and "same" zero
padding: with odd kernel sizes the output spatial dims equal the input's for
any dilation. Inputs are laid out (batch, height, width, channels).
"""

from __future__ import annotations

import numpy as np

import numba

from .diffarray import ShapeError, _result, as_diff, pointwise_mix


@numba.njit(parallel=True, cache=True)
def _dw_forward(x, k, dh, dw, ph, pw):
    # pad-free: tap offsets are clamped to valid ranges, and each output row
    # stays cache-resident while every tap accumulates into it
    b_n, h, w, c_n = x.shape
    kh, kw, _ = k.shape
    out = np.empty((b_n, h, w, c_n))
    for b in numba.prange(b_n):
        for i in range(h):
            out[b, i] = 0.0
            for a in range(kh):
                xr = i + a * dh - ph
                if xr < 0 or xr >= h:
                    continue
                for d in range(kw):
                    off = d * dw - pw
                    j0 = max(0, -off)
                    j1 = min(w, w - off)
                    for j in range(j0, j1):
                        for c in range(c_n):
                            out[b, i, j, c] += x[b, xr, j + off, c] * k[a, d, c]
    return out


@numba.njit(parallel=True, cache=True)
def _dw_backward(x, g, k, dh, dw, ph, pw):
    # adjoint: gather from the upstream grad with negated tap offsets
    b_n, h, w, c_n = x.shape
    kh, kw, _ = k.shape
    gx = np.empty((b_n, h, w, c_n))
    gk_part = np.zeros((b_n, kh, kw, c_n))
    for b in numba.prange(b_n):
        for i in range(h):
            gx[b, i] = 0.0
            for a in range(kh):
                gr = i - (a * dh - ph)
                xr = i + a * dh - ph
                for d in range(kw):
                    off = d * dw - pw
                    if 0 <= gr < h:
                        j0 = max(0, off)
                        j1 = min(w, w + off)
                        for j in range(j0, j1):
                            for c in range(c_n):
                                gx[b, i, j, c] += g[b, gr, j - off, c] * k[a, d, c]
                    if 0 <= xr < h:
                        j0 = max(0, -off)
                        j1 = min(w, w - off)
                        for j in range(j0, j1):
                            for c in range(c_n):
                                gk_part[b, a, d, c] += x[b, xr, j + off, c] * g[b, i, j, c]
    return gx, gk_part


def _check_spatial(kernel_shape, dilation, name):
    kh, kw = kernel_shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"{name}: kernel spatial size must be odd, got {(kh, kw)}")
    dh, dw = dilation
    if dh < 1 or dw < 1:
        raise ShapeError(f"{name}: dilation must be >= 1, got {dilation}")
    return kh, kw, dh, dw


def _pad4(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    b, h, w, c = x.shape
    out = np.zeros((b, h + 2 * ph, w + 2 * pw, c))
    out[:, ph:ph + h, pw:pw + w, :] = x
    return out


def conv2d(x, kernels, dilation=(1, 1), bias=None):
    """Dense conv: x (B,H,W,Cin) * kernels (kh,kw,Cin,Cout) -> (B,H,W,Cout).

    An optional per-output-channel bias is fused into the op.
    """
    x, kernels = as_diff(x), as_diff(kernels)
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input and kernels, got {x.shape} and {kernels.shape}")
    kh, kw, dh, dw = _check_spatial(kernels.shape[:2], dilation, "conv2d")
    if kernels.shape[2] != x.shape[3]:
        raise ShapeError(f"conv2d: input has {x.shape[3]} channels but kernels expect {kernels.shape[2]}")
    b, h, w, cin = x.shape
    cout = kernels.shape[3]
    parents = [x, kernels]
    if bias is not None:
        bias = as_diff(bias)
        if bias.shape != (cout,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({cout},)")
        parents.append(bias)
    ph, pw = dh * (kh - 1) // 2, dw * (kw - 1) // 2
    xp = _pad4(x.values, ph, pw)
    kv = kernels.values
    out = np.zeros((b, h, w, cout)) if bias is None else np.broadcast_to(bias.values, (b, h, w, cout)).copy()
    for a in range(kh):
        for c in range(kw):
            patch = xp[:, a * dh:a * dh + h, c * dw:c * dw + w, :]
            out += np.ascontiguousarray(patch).reshape(-1, cin).dot(kv[a, c]).reshape(b, h, w, cout)

    def back(g):
        gf = np.ascontiguousarray(g).reshape(-1, cout)
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kv)
        for a in range(kh):
            for c in range(kw):
                patch = np.ascontiguousarray(xp[:, a * dh:a * dh + h, c * dw:c * dw + w, :])
                gk[a, c] = patch.reshape(-1, cin).T @ gf
                gxp[:, a * dh:a * dh + h, c * dw:c * dw + w, :] += gf.dot(kv[a, c].T).reshape(b, h, w, cin)
        x.accumulate_grad(gxp[:, ph:ph + h, pw:pw + w, :] if ph or pw else gxp,
                          own=not (ph or pw))
        kernels.accumulate_grad(gk, own=True)
        if bias is not None:
            bias.accumulate_grad(gf.sum(axis=0), own=True)

    return _result(out, tuple(parents), back)


def depthwise_conv2d(x, kernels, dilation=(1, 1)):
    """Per-channel conv: x (B,H,W,C) * kernels (kh,kw,C) -> (B,H,W,C)."""
    x, kernels = as_diff(x), as_diff(kernels)
    if x.ndim != 4 or kernels.ndim != 3:
        raise ShapeError(f"depthwise_conv2d: need 4-D input and 3-D kernels, got {x.shape} and {kernels.shape}")
    kh, kw, dh, dw = _check_spatial(kernels.shape[:2], dilation, "depthwise_conv2d")
    if kernels.shape[2] != x.shape[3]:
        raise ShapeError(f"depthwise_conv2d: input has {x.shape[3]} channels but kernels have {kernels.shape[2]}")
    ph, pw = dh * (kh - 1) // 2, dw * (kw - 1) // 2
    xv = np.ascontiguousarray(x.values)
    kv = kernels.values
    out = _dw_forward(xv, kv, dh, dw, ph, pw)

    def back(g):
        gx, gk_part = _dw_backward(xv, np.ascontiguousarray(g), kv, dh, dw, ph, pw)
        x.accumulate_grad(gx, own=True)
        kernels.accumulate_grad(gk_part.sum(axis=0), own=True)

    return _result(out, (x, kernels), back)


def conv2d_separable(x, depthwise_kernels, pointwise_kernels, dilation=(1, 1), bias=None):
    """Depthwise dilated conv followed by a 1x1 pointwise mix.

    pointwise_kernels has shape (C_in, C_out); gradients are defined w.r.t.
    the input and both kernel sets (and the optional fused output bias).
    """
    depthwise_kernels = as_diff(depthwise_kernels)
    pointwise_kernels = as_diff(pointwise_kernels)
    if pointwise_kernels.ndim != 2:
        raise ShapeError(f"conv2d_separable: pointwise kernels must be 2-D, got {pointwise_kernels.shape}")
    if depthwise_kernels.shape[2] != pointwise_kernels.shape[0]:
        raise ShapeError(
            "conv2d_separable: depthwise channels "
            f"{depthwise_kernels.shape[2]} != pointwise input channels {pointwise_kernels.shape[0]}"
        )
    mid = depthwise_conv2d(x, depthwise_kernels, dilation)
    return pointwise_mix(mid, pointwise_kernels, bias=bias)
