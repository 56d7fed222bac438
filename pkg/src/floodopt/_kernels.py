"""Compiled inner loops of the finite-volume stage.

Everything here operates on padded arrays (one ghost ring) and mirrors
the scheme described in solver.py: limited reconstruction of (H, H+b, u, v),
hydrostatic interface states, HLL fluxes with per-side pressure corrections
and a centered bed term, plus per-cell rescaling of outgoing mass fluxes so
a stage cannot drain any cell below zero depth.

Exactness notes: faces with bitwise-identical reconstructed states return
the physical flux of that state (zero mass flux at rest), dry-dry faces
return exactly zero, and mirror states at closed walls cancel to an exact
zero mass flux. fastmath stays off so none of this is reassociated away.
"""

import numpy as np
from numba import njit

MINMOD, MC, VANLEER = 0, 1, 2


@njit(cache=True)
def _limited(dm, dp, limiter):
    if dm * dp <= 0.0:
        return 0.0
    if limiter == MINMOD:
        return dm if abs(dm) < abs(dp) else dp
    if limiter == MC:
        sign = 1.0 if dm > 0.0 else -1.0
        return sign * min(0.5 * abs(dm + dp), 2.0 * min(abs(dm), abs(dp)))
    return 2.0 * dm * dp / (dm + dp)


@njit(cache=True)
def _hll(hL, hR, unL, unR, utL, utR, g):
    """HLL flux (mass, normal momentum, tangential momentum) per unit length."""
    dryL = hL <= 0.0
    dryR = hR <= 0.0
    if dryL and dryR:
        return 0.0, 0.0, 0.0
    if hL == hR and unL == unR and utL == utR:
        f0 = hL * unL
        return f0, hL * unL * unL + 0.5 * g * hL * hL, f0 * utL
    cL = np.sqrt(g * hL)
    cR = np.sqrt(g * hR)
    sL = min(unL - cL, unR - cR)
    sR = max(unL + cL, unR + cR)
    if dryL:
        sL = unR - 2.0 * cR
    if dryR:
        sR = unL + 2.0 * cL
    fL0 = hL * unL
    fL1 = hL * unL * unL + 0.5 * g * hL * hL
    fL2 = fL0 * utL
    fR0 = hR * unR
    fR1 = hR * unR * unR + 0.5 * g * hR * hR
    fR2 = fR0 * utR
    if sL >= 0.0:
        return fL0, fL1, fL2
    if sR <= 0.0:
        return fR0, fR1, fR2
    inv = 1.0 / (sR - sL)
    a = sR * inv
    b = sL * inv
    w = sL * sR * inv
    m0 = a * fL0 - b * fR0 + w * (hR - hL)
    m1 = a * fL1 - b * fR1 + w * (hR * unR - hL * unL)
    m2 = a * fL2 - b * fR2 + w * (hR * utR - hL * utL)
    return m0, m1, m2


@njit(cache=True)
def _slopes(H, W, U, V, h_dry, order, limiter, closed, axis):
    """Half-increments of (H, W, U, V) along one axis of the padded arrays.

    Zero at ghosts, next to dry cells, and next to closed walls, which
    drops those faces to first order.
    """
    nyp, nxp = H.shape
    dH = np.zeros((nyp, nxp))
    dW = np.zeros((nyp, nxp))
    dU = np.zeros((nyp, nxp))
    dV = np.zeros((nyp, nxp))
    if order == 1:
        return dH, dW, dU, dV
    if axis == 1:
        for j in range(1, nyp - 1):
            for i in range(1, nxp - 1):
                if (
                    H[j, i] <= h_dry
                    or H[j, i - 1] <= h_dry
                    or H[j, i + 1] <= h_dry
                    or (closed and (i == 1 or i == nxp - 2))
                ):
                    continue
                dH[j, i] = 0.5 * _limited(H[j, i] - H[j, i - 1], H[j, i + 1] - H[j, i], limiter)
                dW[j, i] = 0.5 * _limited(W[j, i] - W[j, i - 1], W[j, i + 1] - W[j, i], limiter)
                dU[j, i] = 0.5 * _limited(U[j, i] - U[j, i - 1], U[j, i + 1] - U[j, i], limiter)
                dV[j, i] = 0.5 * _limited(V[j, i] - V[j, i - 1], V[j, i + 1] - V[j, i], limiter)
    else:
        for j in range(1, nyp - 1):
            for i in range(1, nxp - 1):
                if (
                    H[j, i] <= h_dry
                    or H[j - 1, i] <= h_dry
                    or H[j + 1, i] <= h_dry
                    or (closed and (j == 1 or j == nyp - 2))
                ):
                    continue
                dH[j, i] = 0.5 * _limited(H[j, i] - H[j - 1, i], H[j + 1, i] - H[j, i], limiter)
                dW[j, i] = 0.5 * _limited(W[j, i] - W[j - 1, i], W[j + 1, i] - W[j, i], limiter)
                dU[j, i] = 0.5 * _limited(U[j, i] - U[j - 1, i], U[j + 1, i] - U[j, i], limiter)
                dV[j, i] = 0.5 * _limited(V[j, i] - V[j - 1, i], V[j + 1, i] - V[j, i], limiter)
    return dH, dW, dU, dV


@njit(cache=True)
def hyperbolic_terms(H, HU, HV, B, dx, dy, g, h_dry, order, limiter, closed, dt):
    """Face fluxes, bed-slope terms and cell tendencies for one stage.

    H, HU, HV, B are padded (ny+2, nx+2). dt > 0 enables the positivity
    rescale of outgoing mass. Returns (rhs_h, rhs_hu, rhs_hv) interior
    tendencies and the per-unit-length face flux components
    fx0, fxn, fxt (ny, nx+1) and fy0, fyn, fyt (ny+1, nx), where "n" is
    the face-normal momentum component and "t" the tangential one.
    """
    nyp, nxp = H.shape
    ny = nyp - 2
    nx = nxp - 2

    U = np.zeros((nyp, nxp))
    V = np.zeros((nyp, nxp))
    W = np.empty((nyp, nxp))
    for j in range(nyp):
        for i in range(nxp):
            hc = H[j, i]
            if hc > h_dry:
                U[j, i] = HU[j, i] / hc
                V[j, i] = HV[j, i] / hc
            W[j, i] = hc + B[j, i]

    dHx, dWx, dUx, dVx = _slopes(H, W, U, V, h_dry, order, limiter, closed, 1)
    dHy, dWy, dUy, dVy = _slopes(H, W, U, V, h_dry, order, limiter, closed, 0)

    fx0 = np.empty((ny, nx + 1))
    fxn = np.empty((ny, nx + 1))
    fxt = np.empty((ny, nx + 1))
    xcm = np.empty((ny, nx + 1))
    xcp = np.empty((ny, nx + 1))
    xhm = np.empty((ny, nx + 1))
    xhp = np.empty((ny, nx + 1))
    xzm = np.empty((ny, nx + 1))
    xzp = np.empty((ny, nx + 1))
    for j in range(ny):
        jj = j + 1
        for f in range(nx + 1):
            h_m = H[jj, f] + dHx[jj, f]
            w_m = W[jj, f] + dWx[jj, f]
            un_m = U[jj, f] + dUx[jj, f]
            ut_m = V[jj, f] + dVx[jj, f]
            h_p = H[jj, f + 1] - dHx[jj, f + 1]
            w_p = W[jj, f + 1] - dWx[jj, f + 1]
            un_p = U[jj, f + 1] - dUx[jj, f + 1]
            ut_p = V[jj, f + 1] - dVx[jj, f + 1]
            z_m = w_m - h_m
            z_p = w_p - h_p
            z_f = max(z_m, z_p)
            hsm = max(h_m + (z_m - z_f), 0.0)
            hsp = max(h_p + (z_p - z_f), 0.0)
            f0, fn, ft = _hll(hsm, hsp, un_m, un_p, ut_m, ut_p, g)
            fx0[j, f] = f0
            fxn[j, f] = fn
            fxt[j, f] = ft
            xcm[j, f] = 0.5 * g * (h_m * h_m - hsm * hsm)
            xcp[j, f] = 0.5 * g * (h_p * h_p - hsp * hsp)
            xhm[j, f] = h_m
            xhp[j, f] = h_p
            xzm[j, f] = z_m
            xzp[j, f] = z_p

    fy0 = np.empty((ny + 1, nx))
    fyn = np.empty((ny + 1, nx))
    fyt = np.empty((ny + 1, nx))
    ycm = np.empty((ny + 1, nx))
    ycp = np.empty((ny + 1, nx))
    yhm = np.empty((ny + 1, nx))
    yhp = np.empty((ny + 1, nx))
    yzm = np.empty((ny + 1, nx))
    yzp = np.empty((ny + 1, nx))
    for f in range(ny + 1):
        for i in range(nx):
            ii = i + 1
            h_m = H[f, ii] + dHy[f, ii]
            w_m = W[f, ii] + dWy[f, ii]
            un_m = V[f, ii] + dVy[f, ii]
            ut_m = U[f, ii] + dUy[f, ii]
            h_p = H[f + 1, ii] - dHy[f + 1, ii]
            w_p = W[f + 1, ii] - dWy[f + 1, ii]
            un_p = V[f + 1, ii] - dVy[f + 1, ii]
            ut_p = U[f + 1, ii] - dUy[f + 1, ii]
            z_m = w_m - h_m
            z_p = w_p - h_p
            z_f = max(z_m, z_p)
            hsm = max(h_m + (z_m - z_f), 0.0)
            hsp = max(h_p + (z_p - z_f), 0.0)
            f0, fn, ft = _hll(hsm, hsp, un_m, un_p, ut_m, ut_p, g)
            fy0[f, i] = f0
            fyn[f, i] = fn
            fyt[f, i] = ft
            ycm[f, i] = 0.5 * g * (h_m * h_m - hsm * hsm)
            ycp[f, i] = 0.5 * g * (h_p * h_p - hsp * hsp)
            yhm[f, i] = h_m
            yhp[f, i] = h_p
            yzm[f, i] = z_m
            yzp[f, i] = z_p

    if dt > 0.0:
        # Outgoing mass per cell may not exceed the stored volume; scale
        # every flux component of a face by its donor cell's factor.
        theta = np.ones((ny, nx))
        area = dx * dy
        for j in range(ny):
            for i in range(nx):
                out = 0.0
                if fx0[j, i + 1] > 0.0:
                    out += fx0[j, i + 1] * dy
                if fx0[j, i] < 0.0:
                    out -= fx0[j, i] * dy
                if fy0[j + 1, i] > 0.0:
                    out += fy0[j + 1, i] * dx
                if fy0[j, i] < 0.0:
                    out -= fy0[j, i] * dx
                need = out * dt
                avail = H[j + 1, i + 1] * area
                if need > avail:
                    theta[j, i] = avail / need
        for j in range(ny):
            for f in range(nx + 1):
                if fx0[j, f] >= 0.0:
                    s = theta[j, f - 1] if f > 0 else 1.0
                else:
                    s = theta[j, f] if f < nx else 1.0
                if s != 1.0:
                    fx0[j, f] *= s
                    fxn[j, f] *= s
                    fxt[j, f] *= s
        for f in range(ny + 1):
            for i in range(nx):
                if fy0[f, i] >= 0.0:
                    s = theta[f - 1, i] if f > 0 else 1.0
                else:
                    s = theta[f, i] if f < ny else 1.0
                if s != 1.0:
                    fy0[f, i] *= s
                    fyn[f, i] *= s
                    fyt[f, i] *= s

    rhs_h = np.empty((ny, nx))
    rhs_hu = np.empty((ny, nx))
    rhs_hv = np.empty((ny, nx))
    for j in range(ny):
        for i in range(nx):
            rhs_h[j, i] = (fx0[j, i] - fx0[j, i + 1]) / dx + (fy0[j, i] - fy0[j + 1, i]) / dy
            xcen = 0.5 * g * (xhp[j, i] + xhm[j, i + 1]) * (xzp[j, i] - xzm[j, i + 1])
            rhs_hu[j, i] = (
                (fxn[j, i] + xcp[j, i]) - (fxn[j, i + 1] + xcm[j, i + 1]) + xcen
            ) / dx + (fyt[j, i] - fyt[j + 1, i]) / dy
            ycen = 0.5 * g * (yhp[j, i] + yhm[j + 1, i]) * (yzp[j, i] - yzm[j + 1, i])
            rhs_hv[j, i] = (fxt[j, i] - fxt[j, i + 1]) / dx + (
                (fyn[j, i] + ycp[j, i]) - (fyn[j + 1, i] + ycm[j + 1, i]) + ycen
            ) / dy

    return rhs_h, rhs_hu, rhs_hv, fx0, fxn, fxt, fy0, fyn, fyt
