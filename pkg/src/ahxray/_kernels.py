"""Compiled inner loops: geodesic integration, ray sampling and interpolation.

Positions are Euclidean disk coordinates ``(zx, zy)``; covectors are the
Euclidean components ``(px, py)`` of the momentum, so that for the metric
``g = exp(2 phi) |dz|^2`` the velocity is ``exp(-2 phi) p``.  The
perturbation is passed as an ``(k, 4)`` array of bumps
``(cx, cy, radius, amplitude)``.  Outside the stitch radius the metric is
exactly hyperbolic and rays are advanced by the hyperboloid closed form.
"""

import math

import numpy as np
from numba import njit, prange

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
_A21 = 1.0 / 5
_A31, _A32 = 3.0 / 40, 9.0 / 40
_A41, _A42, _A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
_A51, _A52, _A53, _A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
_D1, _D3, _D4 = -12715105075.0 / 11282082432, 87487479700.0 / 32700410799, -10690763975.0 / 1880347072
_D5, _D6, _D7 = 701980252875.0 / 199316789632, -1453857185.0 / 822651844, 69997945.0 / 29380423
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600,
    -71.0 / 16695,
    71.0 / 1920,
    -17253.0 / 339200,
    22.0 / 525,
    -1.0 / 40,
)

STATUS_OK = 0
STATUS_BUFFER = -1
STATUS_TRAPPED = -2
STATUS_UNDERFLOW = -3


@njit(cache=True)
def psi_eval(x, y, bumps):
    """Return ``psi`` and its gradient at ``(x, y)``."""
    psi = 0.0
    gx = 0.0
    gy = 0.0
    for b in range(bumps.shape[0]):
        dx = x - bumps[b, 0]
        dy = y - bumps[b, 1]
        rad = bumps[b, 2]
        q = (dx * dx + dy * dy) / (rad * rad)
        if q < 1.0:
            s = 1.0 / (1.0 - q)
            v = bumps[b, 3] * math.exp(1.0 - s)
            psi += v
            dq = -v * s * s * 2.0 / (rad * rad)
            gx += dq * dx
            gy += dq * dy
    return psi, gx, gy


@njit(cache=True)
def psi_laplacian(x, y, bumps):
    lap = 0.0
    for b in range(bumps.shape[0]):
        dx = x - bumps[b, 0]
        dy = y - bumps[b, 1]
        rad2 = bumps[b, 2] * bumps[b, 2]
        q = (dx * dx + dy * dy) / rad2
        if q < 1.0:
            s = 1.0 / (1.0 - q)
            v = bumps[b, 3] * math.exp(1.0 - s)
            d1 = -v * s * s
            d2 = v * (s**4 - 2.0 * s**3)
            lap += d2 * 4.0 * q / rad2 + d1 * 4.0 / rad2
    return lap


@njit(cache=True)
def _rhs(s, bumps, out):
    x, y, px, py = s[0], s[1], s[2], s[3]
    r2 = x * x + y * y
    psi, gx, gy = psi_eval(x, y, bumps)
    w = 1.0 - r2
    e = (w * w / 4.0) * math.exp(-2.0 * psi)
    fx = 2.0 * x / w + gx
    fy = 2.0 * y / w + gy
    pp = px * px + py * py
    out[0] = e * px
    out[1] = e * py
    out[2] = e * pp * fx
    out[3] = e * pp * fy


@njit(cache=True)
def _renormalize(s, bumps):
    psi, _, _ = psi_eval(s[0], s[1], bumps)
    w = 1.0 - s[0] * s[0] - s[1] * s[1]
    target = 2.0 * math.exp(psi) / w
    nrm = math.sqrt(s[2] * s[2] + s[3] * s[3])
    s[2] *= target / nrm
    s[3] *= target / nrm


@njit(cache=True)
def _dop_step(s, h, k1, bumps, out, err, k2, k3, k4, k5, k6, k7, tmp):
    for i in range(4):
        tmp[i] = s[i] + h * _A21 * k1[i]
    _rhs(tmp, bumps, k2)
    for i in range(4):
        tmp[i] = s[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    _rhs(tmp, bumps, k3)
    for i in range(4):
        tmp[i] = s[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _rhs(tmp, bumps, k4)
    for i in range(4):
        tmp[i] = s[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
    _rhs(tmp, bumps, k5)
    for i in range(4):
        tmp[i] = s[i] + h * (
            _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    _rhs(tmp, bumps, k6)
    for i in range(4):
        out[i] = s[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i])
    _rhs(out, bumps, k7)
    for i in range(4):
        err[i] = h * (
            _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
        )


@njit(cache=True)
def _dense(sa, sb, h, k1, k3, k4, k5, k6, k7, theta, out):
    """Fourth-order continuous extension of the Dormand-Prince step."""
    t1 = 1.0 - theta
    for i in range(4):
        ydiff = sb[i] - sa[i]
        bspl = h * k1[i] - ydiff
        r4 = ydiff - h * k7[i] - bspl
        r5 = h * (
            _D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i]
        )
        out[i] = sa[i] + theta * (ydiff + t1 * (bspl + theta * (r4 + t1 * r5)))


@njit(cache=True)
def integrate_region(s0, t0, bumps, r_stitch, tol, t_budget, dt, out, n0, max_out, emit):
    """Integrate a geodesic inside the stitch disk until it leaves outward.

    Nodes at global times ``k * dt`` in ``[t0, t_exit)`` are written to
    ``out[n0:]``.  Returns ``(n, t_exit, status)``; the final state is left
    in ``s0``.
    """
    s = s0.copy()
    snew = np.empty(4)
    err = np.empty(4)
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    tmp = np.empty(4)
    node = np.empty(4)
    _rhs(s, bumps, k1)
    t = t0
    h = 0.05
    n = n0
    k = int(math.ceil(t0 / dt - 1e-12))
    while True:
        if t - t0 > t_budget:
            s0[:] = s
            return n, t, STATUS_TRAPPED
        if h < 1e-12:
            s0[:] = s
            return n, t, STATUS_UNDERFLOW
        _dop_step(s, h, k1, bumps, snew, err, k2, k3, k4, k5, k6, k7, tmp)
        en = 0.0
        for i in range(4):
            sc = tol + tol * max(abs(s[i]), abs(snew[i]))
            en += (err[i] / sc) ** 2
        en = math.sqrt(en / 4.0)
        if en <= 1.0:
            tb = t + h
            while emit and k * dt < tb:
                if n >= max_out:
                    s0[:] = s
                    return n, t, STATUS_BUFFER
                _dense(s, snew, h, k1, k3, k4, k5, k6, k7, (k * dt - t) / h, node)
                _renormalize(node, bumps)
                for i in range(4):
                    out[n, i] = node[i]
                n += 1
                k += 1
            for i in range(4):
                s[i] = snew[i]
            _renormalize(s, bumps)
            _rhs(s, bumps, k1)
            t = tb
            r2 = s[0] * s[0] + s[1] * s[1]
            if r2 >= r_stitch * r_stitch and s[0] * k1[0] + s[1] * k1[1] > 0.0:
                s0[:] = s
                return n, t, STATUS_OK
            fac = 0.9 * en ** (-0.2) if en > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
        else:
            h *= max(0.2, 0.9 * en ** (-0.2))


@njit(cache=True)
def lift(zx, zy, vx, vy, X, V):
    """Hyperboloid point and tangent from disk position and velocity."""
    s = zx * zx + zy * zy
    d = 1.0 - s
    X[0] = (1.0 + s) / d
    X[1] = 2.0 * zx / d
    X[2] = 2.0 * zy / d
    zv = zx * vx + zy * vy
    V[0] = 4.0 * zv / (d * d)
    V[1] = 2.0 * vx / d + 4.0 * zx * zv / (d * d)
    V[2] = 2.0 * vy / d + 4.0 * zy * zv / (d * d)


@njit(cache=True)
def _hyp_node(X, V, sl, out, n):
    c = math.cosh(sl)
    sh = math.sinh(sl)
    x0 = c * X[0] + sh * V[0]
    x1 = c * X[1] + sh * V[1]
    x2 = c * X[2] + sh * V[2]
    d1 = sh * X[1] + c * V[1]
    d2 = sh * X[2] + c * V[2]
    den = 1.0 + x0
    zx = x1 / den
    zy = x2 / den
    # p = (1 + X0)^2 v; the products X0 V_i - X_i V0 are constant along the
    # segment, which avoids cancellation near the boundary
    out[n, 0] = zx
    out[n, 1] = zy
    out[n, 2] = d1 + (X[0] * V[1] - X[1] * V[0])
    out[n, 3] = d2 + (X[0] * V[2] - X[2] * V[0])


@njit(cache=True)
def _roots(X, V, c):
    """Parameters where ``cosh rho = c`` along the hyperbolic segment."""
    a = X[0]
    b = V[0]
    disc = c * c - (a * a - b * b)
    if disc <= 0.0:
        return False, 0.0, 0.0
    sq = math.sqrt(disc)
    u1 = (c - sq) / (a + b)
    u2 = (c + sq) / (a + b)
    if u1 <= 0.0:
        return True, -1e300, math.log(u2)
    return True, math.log(u1), math.log(u2)


@njit(cache=True)
def ray_nodes(zx, zy, vx, vy, dt, r_cut, bumps, r_stitch, tol, t_budget, out, extra):
    """Sample a geodesic ray at ``t = k * dt`` until it leaves ``r_cut`` outward.

    ``(vx, vy)`` is the Euclidean velocity of a unit-speed geodesic.  With
    ``extra`` one node beyond ``r_cut`` is kept.  Returns ``(count, status)``.
    """
    max_out = out.shape[0]
    X = np.empty(3)
    V = np.empty(3)
    st = np.empty(4)
    perturbed = bumps.shape[0] > 0
    c_cut = math.cosh(2.0 * math.atanh(r_cut))
    c_st = math.cosh(2.0 * math.atanh(r_stitch)) if perturbed else 0.0
    n = 0
    T0 = 0.0
    inside = perturbed and (zx * zx + zy * zy < r_stitch * r_stitch)
    if inside:
        w = 1.0 - zx * zx - zy * zy
        psi, _, _ = psi_eval(zx, zy, bumps)
        conf = 4.0 * math.exp(2.0 * psi) / (w * w)
        st[0] = zx
        st[1] = zy
        st[2] = conf * vx
        st[3] = conf * vy
    else:
        lift(zx, zy, vx, vy, X, V)
    while True:
        if inside:
            n, T1, status = integrate_region(st, T0, bumps, r_stitch, tol, t_budget, dt, out, n, max_out, True)
            if status != STATUS_OK:
                return n, status
            w = 1.0 - st[0] * st[0] - st[1] * st[1]
            lift(st[0], st[1], st[2] * w * w / 4.0, st[3] * w * w / 4.0, X, V)
            T0 = T1
            inside = False
            continue
        enter = False
        s_enter = 0.0
        if perturbed:
            ok, s1, s2 = _roots(X, V, c_st)
            # a start on the stitch circle counts as inside when heading in
            if ok and s2 > 1e-9:
                enter = True
                s_enter = max(s1, 0.0)
        if enter:
            k = int(math.ceil(T0 / dt - 1e-12))
            while k * dt < T0 + s_enter:
                if n >= max_out:
                    return n, STATUS_BUFFER
                _hyp_node(X, V, k * dt - T0, out, n)
                n += 1
                k += 1
            c = math.cosh(s_enter)
            sh = math.sinh(s_enter)
            x0 = c * X[0] + sh * V[0]
            x1 = c * X[1] + sh * V[1]
            x2 = c * X[2] + sh * V[2]
            d0 = sh * X[0] + c * V[0]
            d1 = sh * X[1] + c * V[1]
            d2 = sh * X[2] + c * V[2]
            den = 1.0 + x0
            ezx = x1 / den
            ezy = x2 / den
            evx = d1 / den - x1 * d0 / (den * den)
            evy = d2 / den - x2 * d0 / (den * den)
            w = 1.0 - ezx * ezx - ezy * ezy
            conf = 4.0 / (w * w)
            st[0] = ezx
            st[1] = ezy
            st[2] = conf * evx
            st[3] = conf * evy
            T0 = T0 + s_enter
            inside = True
            continue
        ok, s1, s2 = _roots(X, V, c_cut)
        s_end = s2 if ok else 0.0
        k = int(math.ceil(T0 / dt - 1e-12))
        while k * dt <= T0 + s_end:
            if n >= max_out:
                return n, STATUS_BUFFER
            _hyp_node(X, V, k * dt - T0, out, n)
            n += 1
            k += 1
        if extra:
            if n >= max_out:
                return n, STATUS_BUFFER
            _hyp_node(X, V, k * dt - T0, out, n)
            n += 1
        return n, STATUS_OK


@njit(cache=True)
def exit_covector(zx, zy, vx, vy, bumps, r_stitch, tol, t_budget):
    """Boundary angle and momentum where the ray from ``z`` along ``v`` ends.

    Returns ``(y, eta, status)``; ``eta`` is the conserved angular momentum
    of the final hyperbolic segment, oriented along the ray.
    """
    X = np.empty(3)
    V = np.empty(3)
    st = np.empty(4)
    dummy = np.empty((1, 4))
    perturbed = bumps.shape[0] > 0
    if perturbed:
        c_st = math.cosh(2.0 * math.atanh(r_stitch))
        inside = zx * zx + zy * zy < r_stitch * r_stitch
        if not inside:
            lift(zx, zy, vx, vy, X, V)
            ok, s1, s2 = _roots(X, V, c_st)
            if ok and s2 > 1e-9:
                s1 = max(s1, 0.0)
                c = math.cosh(s1)
                sh = math.sinh(s1)
                x0 = c * X[0] + sh * V[0]
                x1 = c * X[1] + sh * V[1]
                x2 = c * X[2] + sh * V[2]
                d0 = sh * X[0] + c * V[0]
                d1 = sh * X[1] + c * V[1]
                d2 = sh * X[2] + c * V[2]
                den = 1.0 + x0
                zx = x1 / den
                zy = x2 / den
                vx = d1 / den - x1 * d0 / (den * den)
                vy = d2 / den - x2 * d0 / (den * den)
                inside = True
        if inside:
            w = 1.0 - zx * zx - zy * zy
            psi, _, _ = psi_eval(zx, zy, bumps)
            conf = 4.0 * math.exp(2.0 * psi) / (w * w)
            st[0] = zx
            st[1] = zy
            st[2] = conf * vx
            st[3] = conf * vy
            _, _, status = integrate_region(st, 0.0, bumps, r_stitch, tol, t_budget, 1.0, dummy, 0, 0, False)
            if status != STATUS_OK:
                return 0.0, 0.0, status
            w = 1.0 - st[0] * st[0] - st[1] * st[1]
            zx, zy = st[0], st[1]
            vx = st[2] * w * w / 4.0
            vy = st[3] * w * w / 4.0
    lift(zx, zy, vx, vy, X, V)
    bx = X[1] + V[1]
    by = X[2] + V[2]
    y = math.atan2(by, bx)
    if y < 0.0:
        y += 2.0 * math.pi
    eta = X[1] * V[2] - X[2] * V[1]
    return y, eta, STATUS_OK


@njit(cache=True)
def bilinear_polar(vals, r_max, x, y):
    """Bilinear interpolation on a cell-centred polar grid.

    Rows across the origin are ghosts taken from the opposite angle; values
    beyond the outermost ring are held constant up to ``r_max`` and vanish
    outside.
    """
    nr = vals.shape[0]
    nth = vals.shape[1]
    r = math.sqrt(x * x + y * y)
    if r > r_max:
        return 0.0
    dr = r_max / nr
    th = math.atan2(y, x)
    if th < 0.0:
        th += 2.0 * math.pi
    ft = th / (2.0 * math.pi) * nth
    j0 = int(math.floor(ft))
    wt = ft - j0
    j0 = j0 % nth
    j1 = (j0 + 1) % nth
    fr = r / dr - 0.5
    if fr >= nr - 1:
        return (1.0 - wt) * vals[nr - 1, j0] + wt * vals[nr - 1, j1]
    if fr < 0.0:
        wr = fr + 1.0
        half = nth // 2
        a = (1.0 - wt) * vals[0, (j0 + half) % nth] + wt * vals[0, (j1 + half) % nth]
        b = (1.0 - wt) * vals[0, j0] + wt * vals[0, j1]
        return (1.0 - wr) * a + wr * b
    i0 = int(fr)
    wr = fr - i0
    a = (1.0 - wt) * vals[i0, j0] + wt * vals[i0, j1]
    b = (1.0 - wt) * vals[i0 + 1, j0] + wt * vals[i0 + 1, j1]
    return (1.0 - wr) * a + wr * b


@njit(cache=True)
def _lagrange6_weights(f, w):
    """Weights of the 6-point Lagrange stencil at offsets -2..3 for ``f`` in [0, 1)."""
    for a in range(6):
        xa = a - 2.0
        p = 1.0
        for b in range(6):
            if b != a:
                xb = b - 2.0
                p *= (f - xb) / (xa - xb)
        w[a] = p


@njit(cache=True)
def lagrange6_polar(vals, r_max, x, y, wr, wt):
    """Sixth-order tensor Lagrange interpolation on the cell-centred polar grid.

    Radial stencils reaching across the origin use the opposite-angle rows;
    stencils near the outer ring are shifted inward (one-sided); zero
    beyond ``r_max``.
    """
    nr = vals.shape[0]
    nth = vals.shape[1]
    r = math.sqrt(x * x + y * y)
    if r > r_max:
        return 0.0
    dr = r_max / nr
    th = math.atan2(y, x)
    if th < 0.0:
        th += 2.0 * math.pi
    ft = th / (2.0 * math.pi) * nth
    j0 = int(math.floor(ft))
    _lagrange6_weights(ft - j0, wt)
    fr = r / dr - 0.5
    i0 = int(math.floor(fr))
    if i0 > nr - 4:
        i0 = nr - 4
    _lagrange6_weights(fr - i0, wr)
    half = nth // 2
    acc = 0.0
    for a in range(6):
        i = i0 - 2 + a
        shift = 0
        if i < 0:
            i = -i - 1
            shift = half
        row = 0.0
        for b in range(6):
            j = (j0 - 2 + b + shift) % nth
            row += wt[b] * vals[i, j]
        acc += wr[a] * row
    return acc


@njit(cache=True)
def _keys(t):
    t = abs(t)
    if t < 1.0:
        return (1.5 * t - 2.5) * t * t + 1.0
    if t < 2.0:
        return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    return 0.0


@njit(cache=True)
def cubic_sinogram(vals, s0, ds, y, s):
    """Cubic-convolution interpolation in (periodic y, uniform s); zero outside the s range."""
    ny = vals.shape[0]
    ns = vals.shape[1]
    fy = y / (2.0 * math.pi) * ny
    jy = int(math.floor(fy))
    ty = fy - jy
    fs = (s - s0) / ds
    js = int(math.floor(fs))
    ts = fs - js
    if js < -2 or js > ns:
        return 0.0
    acc = 0.0
    for a in range(-1, 3):
        k = js + a
        if k < 0 or k >= ns:
            continue
        ws = _keys(ts - a)
        row = 0.0
        for b in range(-1, 3):
            row += _keys(ty - b) * vals[(jy + b) % ny, k]
        acc += ws * row
    return acc


@njit(parallel=True, cache=True)
def forward_grid(vals, r_max, anchors, dirs, dt, r_cut, bumps, r_stitch, tol, t_budget, max_nodes):
    """Line integrals of a grid function along full geodesics.

    Each line is given by an anchor point and a unit velocity on it
    (``anchors`` and ``dirs`` are ``(m, 2)``).  Returns integrals and
    per-line status codes.
    """
    m = anchors.shape[0]
    res = np.zeros(m)
    stat = np.zeros(m, dtype=np.int64)
    for i in prange(m):
        buf = np.empty((max_nodes, 4))
        acc = 0.0
        n, s1 = ray_nodes(anchors[i, 0], anchors[i, 1], dirs[i, 0], dirs[i, 1], dt, r_cut,
                          bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(n):
            acc += bilinear_polar(vals, r_max, buf[k, 0], buf[k, 1])
        n2, s2 = ray_nodes(anchors[i, 0], anchors[i, 1], -dirs[i, 0], -dirs[i, 1], dt, r_cut,
                           bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(1, n2):
            acc += bilinear_polar(vals, r_max, buf[k, 0], buf[k, 1])
        res[i] = acc * dt
        stat[i] = min(s1, s2)
    return res, stat


@njit(parallel=True, cache=True)
def forward_stack(vals, r_max, anchors, dirs, dt, r_cut, bumps, r_stitch, tol, t_budget, max_nodes):
    """:func:`forward_grid` for a stack ``(n_f, n_r, n_theta)``; each line is traced once."""
    m = anchors.shape[0]
    nf = vals.shape[0]
    res = np.zeros((nf, m))
    stat = np.zeros(m, dtype=np.int64)
    for i in prange(m):
        buf = np.empty((max_nodes, 4))
        n, s1 = ray_nodes(anchors[i, 0], anchors[i, 1], dirs[i, 0], dirs[i, 1], dt, r_cut,
                          bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(n):
            for q in range(nf):
                res[q, i] += bilinear_polar(vals[q], r_max, buf[k, 0], buf[k, 1])
        n2, s2 = ray_nodes(anchors[i, 0], anchors[i, 1], -dirs[i, 0], -dirs[i, 1], dt, r_cut,
                           bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(1, n2):
            for q in range(nf):
                res[q, i] += bilinear_polar(vals[q], r_max, buf[k, 0], buf[k, 1])
        for q in range(nf):
            res[q, i] *= dt
        stat[i] = min(s1, s2)
    return res, stat


@njit(parallel=True, cache=True)
def line_nodes(anchors, dirs, dt, r_cut, bumps, r_stitch, tol, t_budget, max_nodes):
    """Node positions of full lines (forward ray then backward ray without the anchor)."""
    m = anchors.shape[0]
    pos = np.zeros((m, 2 * max_nodes, 2))
    cnt = np.zeros(m, dtype=np.int64)
    stat = np.zeros(m, dtype=np.int64)
    for i in prange(m):
        buf = np.empty((max_nodes, 4))
        n, s1 = ray_nodes(anchors[i, 0], anchors[i, 1], dirs[i, 0], dirs[i, 1], dt, r_cut,
                          bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(n):
            pos[i, k, 0] = buf[k, 0]
            pos[i, k, 1] = buf[k, 1]
        n2, s2 = ray_nodes(anchors[i, 0], anchors[i, 1], -dirs[i, 0], -dirs[i, 1], dt, r_cut,
                           bumps, r_stitch, tol, t_budget, buf, False)
        for k in range(1, n2):
            pos[i, n + k - 1, 0] = buf[k, 0]
            pos[i, n + k - 1, 1] = buf[k, 1]
        cnt[i] = n + max(n2 - 1, 0)
        stat[i] = min(s1, s2)
    return pos, cnt, stat


@njit(parallel=True, cache=True)
def entry_map(points, alphas, bumps, r_stitch, tol, t_budget):
    """Entry covectors ``(y, s = asinh(eta))`` of the geodesics through each point.

    ``alphas`` are direction angles measured from the outward radial
    direction at each point.  The backward ray is traced to the boundary.
    """
    m = points.shape[0]
    nd = alphas.shape[0]
    ys = np.empty((m, nd))
    ss = np.empty((m, nd))
    stat = np.zeros(m, dtype=np.int64)
    for i in prange(m):
        zx = points[i, 0]
        zy = points[i, 1]
        th = math.atan2(zy, zx)
        w = 1.0 - zx * zx - zy * zy
        psi, _, _ = psi_eval(zx, zy, bumps)
        speed = w * math.exp(-psi) / 2.0
        worst = 0
        for k in range(nd):
            a = th + alphas[k]
            vx = speed * math.cos(a)
            vy = speed * math.sin(a)
            y, eta, st = exit_covector(zx, zy, -vx, -vy, bumps, r_stitch, tol, t_budget)
            if st != STATUS_OK:
                worst = st
            ys[i, k] = y
            ss[i, k] = math.asinh(-eta)
        stat[i] = worst
    return ys, ss, stat


@njit(parallel=True, cache=True)
def backproject_map(sino, s0, ds, ys, ss, weights):
    """Fiber quadrature of the flow-constant extension using a stored entry map."""
    m = ys.shape[0]
    nd = ys.shape[1]
    out = np.zeros(m)
    for i in prange(m):
        acc = 0.0
        for k in range(nd):
            acc += weights[k] * cubic_sinogram(sino, s0, ds, ys[i, k], ss[i, k])
        out[i] = acc
    return out


@njit(parallel=True, cache=True)
def backproject_hyperbolic(sino, s0, ds, points, alphas, weights):
    """Fiber quadrature on the exact hyperbolic disk (closed-form entry covectors)."""
    m = points.shape[0]
    nd = alphas.shape[0]
    out = np.zeros(m)
    for i in prange(m):
        zx = points[i, 0]
        zy = points[i, 1]
        r = math.sqrt(zx * zx + zy * zy)
        th = math.atan2(zy, zx)
        rho = 2.0 * math.atanh(r)
        ch = math.cosh(rho)
        sh = math.sinh(rho)
        acc = 0.0
        for k in range(nd):
            a = alphas[k]
            ca = math.cos(a)
            sa = math.sin(a)
            y = th + math.atan2(-sa, sh - ch * ca)
            y = y % (2.0 * math.pi)
            acc += weights[k] * cubic_sinogram(sino, s0, ds, y, math.asinh(sh * sa))
        out[i] = acc
    return out


@njit(cache=True)
def curvature(x, y, bumps):
    """Gauss curvature of ``exp(2 psi)`` times the hyperbolic metric."""
    psi, _, _ = psi_eval(x, y, bumps)
    lap = psi_laplacian(x, y, bumps)
    w = 1.0 - x * x - y * y
    return -math.exp(-2.0 * psi) * (1.0 + w * w * lap / 4.0)


@njit(parallel=True, cache=True)
def near_convolution(vals, r_max, rho_nodes, rho_weights, n_alpha):
    """Local part of a radial convolution in geodesic polar coordinates.

    For grid ring ``i`` the integral is ``sum_q w[i, q] * mean_alpha
    f(exp_z(rho[i, q], alpha))`` where the weights already contain the
    kernel times ``sinh(rho)``, the cutoff and ``2 pi``.  Points are placed
    by the Mobius map sending 0 to the node ``z``.
    """
    nr = vals.shape[0]
    nth = vals.shape[1]
    nq = rho_nodes.shape[1]
    dr = r_max / nr
    out = np.zeros((nr, nth))
    for idx in prange(nr * nth):
        i = idx // nth
        j = idx % nth
        wr = np.empty(6)
        wt = np.empty(6)
        r = (i + 0.5) * dr
        th = 2.0 * math.pi * j / nth
        zx = r * math.cos(th)
        zy = r * math.sin(th)
        acc = 0.0
        for q in range(nq):
            t = math.tanh(0.5 * rho_nodes[i, q])
            ring = 0.0
            for a in range(n_alpha):
                al = th + 2.0 * math.pi * (a + 0.5) / n_alpha
                wx = t * math.cos(al)
                wy = t * math.sin(al)
                # (w + z) / (1 + conj(z) w)
                nx = wx + zx
                ny = wy + zy
                dx = 1.0 + zx * wx + zy * wy
                dy = zx * wy - zy * wx
                den = dx * dx + dy * dy
                px = (nx * dx + ny * dy) / den
                py = (ny * dx - nx * dy) / den
                ring += lagrange6_polar(vals, r_max, px, py, wr, wt)
            acc += rho_weights[i, q] * ring / n_alpha
        out[i, j] = acc
    return out
