"""Compiled inner loops of the Galerkin assembly.

Every gradient-type kernel here is a scalar coefficient times the separation
vector r = x - y, which reduces each quadrature update to a handful of dot
products.  Pairs are processed per test triangle; results go to a per-chunk
staging array so parallel workers never write the same memory and the final
scatter is a deterministic serial pass.
"""

import numpy as np
from numba import njit, prange

_INV4PI = 1.0 / (4.0 * np.pi)


@njit(cache=True, inline="always")
def _zexpm1(z):
    # exp(z) - 1 without cancellation for small |z|
    if abs(z) < 1e-4:
        return z * (1.0 + z * 0.5 * (1.0 + (z / 3.0) * (1.0 + z * 0.25)))
    return np.exp(z) - 1.0


@njit(cache=True, parallel=True)
def _mueller_pass(t0, nt, qp, qw, win, qph, qwh, winh,
                  coef, opp, divs, edge, nrm, cent, diam,
                  skip_ptr, skip_idx, near_ptr, near_idx, mode,
                  k1, k2, omega, mu1, mu2, eps1, eps2,
                  rswitch, tay, do_k,
                  out11, out12, out22):
    """mode 0: all disjoint well-separated pairs (skip list excluded) with the
    regular tables; mode 1: only the near-pair list with the upgraded tables.
    Staging arrays out*: (nt, 3, ncols)."""
    S = qp.shape[0]
    ik1 = 1j * k1
    ik2 = 1j * k2
    idk = ik2 - ik1
    k1sq = k1 * k1
    k2sq = k2 * k2
    dksq = k2sq - k1sq
    iw = 1j * omega
    dmu = mu2 - mu1
    deps = eps2 - eps1

    for tl in prange(nt):
        t = t0 + tl
        if mode == 0:
            nq_t = qw.shape[1]
        else:
            nq_t = qwh.shape[1]
        # test-side basis values and n x f at the test quadrature points
        ft = np.zeros((nq_t, 3, 3))
        gt = np.zeros((nq_t, 3, 3))
        nx = nrm[t, 0]
        ny = nrm[t, 1]
        nz = nrm[t, 2]
        for i in range(nq_t):
            for a in range(3):
                c = coef[t, a]
                if mode == 0:
                    fx = c * (qp[t, i, 0] - opp[t, a, 0])
                    fy = c * (qp[t, i, 1] - opp[t, a, 1])
                    fz = c * (qp[t, i, 2] - opp[t, a, 2])
                else:
                    fx = c * (qph[t, i, 0] - opp[t, a, 0])
                    fy = c * (qph[t, i, 1] - opp[t, a, 1])
                    fz = c * (qph[t, i, 2] - opp[t, a, 2])
                ft[i, a, 0] = fx
                ft[i, a, 1] = fy
                ft[i, a, 2] = fz
                gt[i, a, 0] = ny * fz - nz * fy
                gt[i, a, 1] = nz * fx - nx * fz
                gt[i, a, 2] = nx * fy - ny * fx

        acc11 = np.zeros((3, 3), dtype=np.complex128)
        acc12 = np.zeros((3, 3), dtype=np.complex128)
        acc22 = np.zeros((3, 3), dtype=np.complex128)

        if mode == 0:
            p = skip_ptr[t]
            pe = skip_ptr[t + 1]
            s_iter = S
        else:
            p = near_ptr[t]
            pe = near_ptr[t + 1]
            s_iter = pe - p

        for sc in range(s_iter):
            if mode == 0:
                s = sc
                while p < pe and skip_idx[p] < s:
                    p += 1
                if p < pe and skip_idx[p] == s:
                    p += 1
                    continue
            else:
                s = near_idx[p + sc]

            # coplanar pairs have an exactly vanishing rotated-curl kernel
            ndot = nx * nrm[s, 0] + ny * nrm[s, 1] + nz * nrm[s, 2]
            cdx = cent[s, 0] - cent[t, 0]
            cdy = cent[s, 1] - cent[t, 1]
            cdz = cent[s, 2] - cent[t, 2]
            off = abs(nx * cdx + ny * cdy + nz * cdz)
            scale = diam[t] + diam[s]
            coplanar = (abs(1.0 - ndot) < 1e-12) and (off < 1e-12 * scale)
            use_k = do_k and not coplanar

            for a in range(3):
                for b in range(3):
                    acc11[a, b] = 0.0
                    acc12[a, b] = 0.0
                    acc22[a, b] = 0.0

            if mode == 0:
                nq_s = qw.shape[1]
            else:
                nq_s = qwh.shape[1]

            for i in range(nq_t):
                if mode == 0:
                    xi0 = qp[t, i, 0]
                    xi1 = qp[t, i, 1]
                    xi2 = qp[t, i, 2]
                    wt_i = qw[t, i]
                else:
                    xi0 = qph[t, i, 0]
                    xi1 = qph[t, i, 1]
                    xi2 = qph[t, i, 2]
                    wt_i = qwh[t, i]
                for j in range(nq_s):
                    if mode == 0:
                        y0 = qp[s, j, 0]
                        y1 = qp[s, j, 1]
                        y2 = qp[s, j, 2]
                        w = wt_i * qw[s, j] * win[s, j]
                    else:
                        y0 = qph[s, j, 0]
                        y1 = qph[s, j, 1]
                        y2 = qph[s, j, 2]
                        w = wt_i * qwh[s, j] * winh[s, j]
                    if w == 0.0:
                        continue
                    r0 = xi0 - y0
                    r1 = xi1 - y1
                    r2 = xi2 - y2
                    RR = r0 * r0 + r1 * r1 + r2 * r2
                    R = np.sqrt(RR)
                    invR = 1.0 / R
                    e1 = np.exp(ik1 * R)
                    g1 = e1 * invR * _INV4PI
                    gc1 = g1 * (ik1 - invR) * invR
                    dE = e1 * _zexpm1(idk * R)
                    gdiff = dE * invR * _INV4PI  # G2 - G1
                    if R > rswitch:
                        g2 = g1 + gdiff
                        dgc = g2 * (ik2 - invR) * invR - gc1
                    else:
                        dgc = tay[0] * invR + tay[1] + R * (tay[2] + R * (tay[3] + R * tay[4]))
                    gam = k2sq * gdiff + dksq * g1
                    kmu = mu2 * dgc + dmu * gc1
                    keps = eps2 * dgc + deps * gc1

                    nr = nx * r0 + ny * r1 + nz * r2
                    c11w = iw * w * kmu
                    c22w = -iw * w * keps
                    wg = w * gam
                    wd = w * dgc
                    for b in range(3):
                        cb = coef[s, b]
                        fb0 = cb * (y0 - opp[s, b, 0])
                        fb1 = cb * (y1 - opp[s, b, 1])
                        fb2 = cb * (y2 - opp[s, b, 2])
                        nfb = nx * fb0 + ny * fb1 + nz * fb2
                        db = divs[s, b]
                        for a in range(3):
                            gf = gt[i, a, 0] * fb0 + gt[i, a, 1] * fb1 + gt[i, a, 2] * fb2
                            gar = gt[i, a, 0] * r0 + gt[i, a, 1] * r1 + gt[i, a, 2] * r2
                            acc12[a, b] -= wg * gf + wd * gar * db
                            if use_k:
                                far = ft[i, a, 0] * r0 + ft[i, a, 1] * r1 + ft[i, a, 2] * r2
                                ff = ft[i, a, 0] * fb0 + ft[i, a, 1] * fb1 + ft[i, a, 2] * fb2
                                br = far * nfb - nr * ff
                                acc11[a, b] += c11w * br
                                acc22[a, b] += c22w * br

            for b in range(3):
                col = edge[s, b]
                if col < 0:
                    continue
                for a in range(3):
                    out12[tl, a, col] += acc12[a, b]
                    if use_k:
                        out11[tl, a, col] += acc11[a, b]
                        out22[tl, a, col] += acc22[a, b]


@njit(cache=True, parallel=True)
def _mfie_pass(t0, nt, qp, qw, win, qph, qwh, winh,
               coef, opp, edge, nrm, cent, diam,
               skip_ptr, skip_idx, near_ptr, near_idx, mode,
               k1, out):
    """Rotated-curl operator of a single wavenumber (PEC path); the kernel
    vanishes identically for coplanar pairs, which skips all flat-flat work."""
    S = qp.shape[0]
    ik1 = 1j * k1

    for tl in prange(nt):
        t = t0 + tl
        if mode == 0:
            nq_t = qw.shape[1]
        else:
            nq_t = qwh.shape[1]
        ft = np.zeros((nq_t, 3, 3))
        nx = nrm[t, 0]
        ny = nrm[t, 1]
        nz = nrm[t, 2]
        for i in range(nq_t):
            for a in range(3):
                c = coef[t, a]
                if mode == 0:
                    ft[i, a, 0] = c * (qp[t, i, 0] - opp[t, a, 0])
                    ft[i, a, 1] = c * (qp[t, i, 1] - opp[t, a, 1])
                    ft[i, a, 2] = c * (qp[t, i, 2] - opp[t, a, 2])
                else:
                    ft[i, a, 0] = c * (qph[t, i, 0] - opp[t, a, 0])
                    ft[i, a, 1] = c * (qph[t, i, 1] - opp[t, a, 1])
                    ft[i, a, 2] = c * (qph[t, i, 2] - opp[t, a, 2])

        acc = np.zeros((3, 3), dtype=np.complex128)

        if mode == 0:
            p = skip_ptr[t]
            pe = skip_ptr[t + 1]
            s_iter = S
        else:
            p = near_ptr[t]
            pe = near_ptr[t + 1]
            s_iter = pe - p

        for sc in range(s_iter):
            if mode == 0:
                s = sc
                while p < pe and skip_idx[p] < s:
                    p += 1
                if p < pe and skip_idx[p] == s:
                    p += 1
                    continue
            else:
                s = near_idx[p + sc]

            ndot = nx * nrm[s, 0] + ny * nrm[s, 1] + nz * nrm[s, 2]
            cdx = cent[s, 0] - cent[t, 0]
            cdy = cent[s, 1] - cent[t, 1]
            cdz = cent[s, 2] - cent[t, 2]
            off = abs(nx * cdx + ny * cdy + nz * cdz)
            scale = diam[t] + diam[s]
            if (abs(1.0 - ndot) < 1e-12) and (off < 1e-12 * scale):
                continue

            for a in range(3):
                for b in range(3):
                    acc[a, b] = 0.0

            if mode == 0:
                nq_s = qw.shape[1]
            else:
                nq_s = qwh.shape[1]

            for i in range(nq_t):
                if mode == 0:
                    xi0 = qp[t, i, 0]
                    xi1 = qp[t, i, 1]
                    xi2 = qp[t, i, 2]
                    wt_i = qw[t, i]
                else:
                    xi0 = qph[t, i, 0]
                    xi1 = qph[t, i, 1]
                    xi2 = qph[t, i, 2]
                    wt_i = qwh[t, i]
                for j in range(nq_s):
                    if mode == 0:
                        y0 = qp[s, j, 0]
                        y1 = qp[s, j, 1]
                        y2 = qp[s, j, 2]
                        w = wt_i * qw[s, j] * win[s, j]
                    else:
                        y0 = qph[s, j, 0]
                        y1 = qph[s, j, 1]
                        y2 = qph[s, j, 2]
                        w = wt_i * qwh[s, j] * winh[s, j]
                    if w == 0.0:
                        continue
                    r0 = xi0 - y0
                    r1 = xi1 - y1
                    r2 = xi2 - y2
                    RR = r0 * r0 + r1 * r1 + r2 * r2
                    R = np.sqrt(RR)
                    invR = 1.0 / R
                    g1 = np.exp(ik1 * R) * invR * _INV4PI
                    gc1 = g1 * (ik1 - invR) * invR
                    nr = nx * r0 + ny * r1 + nz * r2
                    cw = w * gc1
                    for b in range(3):
                        cb = coef[s, b]
                        fb0 = cb * (y0 - opp[s, b, 0])
                        fb1 = cb * (y1 - opp[s, b, 1])
                        fb2 = cb * (y2 - opp[s, b, 2])
                        nfb = nx * fb0 + ny * fb1 + nz * fb2
                        for a in range(3):
                            far = ft[i, a, 0] * r0 + ft[i, a, 1] * r1 + ft[i, a, 2] * r2
                            ff = ft[i, a, 0] * fb0 + ft[i, a, 1] * fb1 + ft[i, a, 2] * fb2
                            acc[a, b] += cw * (far * nfb - nr * ff)

            for b in range(3):
                col = edge[s, b]
                if col < 0:
                    continue
                for a in range(3):
                    out[tl, a, col] += acc[a, b]
