"""Fused kernels for the O(N^2) score recursion on Gaussian AR(1) models.

Both built-in models share the transition h_t ~ N(rho*h_{t-1} + drift,
sigma^2), and their per-pair transition gradients are affine in the three
scalars z, z^2 - 1 and h_{t-1} * z with z the standardized residual.  The
backward-marginalized recursion then only needs, for every new particle j,
ratios of Gaussian-kernel sums

    R_j[s] = sum_i w_i K(u_j, u_i) S_i[s]  /  sum_i w_i K(u_j, u_i)

over a handful of strength columns S (the previous gradient table plus the
first two moments of the previous particles).  Two evaluation schemes are
provided:

* a direct pass over all pairs in the log domain (reference kernel), and
* a single-level Hermite fast-Gauss-transform (FGT) evaluation that groups
  sources into unit-width boxes (in units of sigma*sqrt(2)), accumulates
  truncated Hermite expansions per box, and evaluates them at all targets.
  Rows whose kernel mass is too small for the expansion to be trusted are
  recomputed directly.

The whole time recursion runs inside one jitted driver; the Python wrapper
assembles per-model inputs from the ``GaussianAR1`` descriptor.
"""

import numpy as np
from numba import njit, types
from numba.extending import intrinsic

# Hermite expansion order and box half-width (in u = x / (sigma*sqrt(2))
# units).  With half-width 0.5 the truncation error is ~(0.707)^P / sqrt(P!),
# about 8.5e-10 at P = 16.
_P = 16
_MAX_BOXES = 64
# box-to-box distance (u units) beyond which exp(-d^2) is below 1e-18
_CUTOFF = 8.0
_INV_NP1 = 1.0 / np.arange(1.0, _P + 1.0)
_INV_FACT = np.concatenate(([1.0], np.cumprod(_INV_NP1)))[:_P]
# below this kernel mass a target row falls back to the direct evaluation
_DEN_MIN = 1e-3
# below this many particles the direct kernel beats the FGT setup cost
_FGT_MIN_N = 64

_MODE_AUTO = 0
_MODE_DIRECT = 1
_MODE_FGT = 2


@intrinsic
def _bits_to_f64(typingctx, x):
    sig = types.float64(types.int64)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.float64))

    return sig, codegen


_LOG2E = 1.4426950408889634
_EC1 = 0.6931471805599453
_EC2 = 0.2402265069591007
_EC3 = 0.05550410866482158
_EC4 = 0.009618129107628477
_EC5 = 0.0013333558146428443
_EC6 = 0.0001540353039338161


@njit(fastmath=True, inline="always", cache=True)
def _fexp(x):
    # exp for x in [-708, 0]; relative error ~1.6e-7, exact 1.0 at x = 0.
    # The exponent-bit construction needs k >= -1021, so callers clamp at
    # -708 (where exp is ~3e-308, zero for every use here).
    y = x * _LOG2E
    k = np.rint(y)
    f = y - k
    p = 1.0 + f * (_EC1 + f * (_EC2 + f * (_EC3 + f * (_EC4 + f * (_EC5 + f * _EC6)))))
    bits = (np.int64(k) + 1023) << 52
    return _bits_to_f64(bits) * p


@njit(cache=True)
def _direct_row(us, ut_j, w_unused, logw, S, out_j):
    """Log-domain ratios for a single target row (fallback path)."""
    N, ns = S.shape
    m = -np.inf
    for i in range(N):
        d = ut_j - us[i]
        v = logw[i] - d * d
        if v > m:
            m = v
    if m == -np.inf:
        return 1
    den = 0.0
    for s in range(ns):
        out_j[s] = 0.0
    for i in range(N):
        d = ut_j - us[i]
        e = np.exp(logw[i] - d * d - m)
        den += e
        for s in range(ns):
            out_j[s] += e * S[i, s]
    for s in range(ns):
        out_j[s] /= den
    return 0


@njit(fastmath=True, cache=True)
def _direct_ratios(us, ut, logw, St, arg, e, R):
    """All-pairs log-domain kernel; St is (ns, N) transposed strengths."""
    N = us.shape[0]
    NT = ut.shape[0]
    ns = St.shape[0]
    for j in range(NT):
        uj = ut[j]
        m = -1e308
        for i in range(N):
            d = uj - us[i]
            v = logw[i] - d * d
            arg[i] = v
            m = max(m, v)
        if m == -1e308:
            return j + 1  # degenerate row (1-based flag)
        den = 0.0
        for i in range(N):
            x = arg[i] - m
            x = max(x, -708.0)
            ei = _fexp(x)
            e[i] = ei
            den += ei
        inv_den = 1.0 / den
        for s in range(ns):
            acc = 0.0
            row = St[s]
            for i in range(N):
                acc += e[i] * row[i]
            R[j, s] = acc * inv_den
    return 0


@njit(fastmath=True, cache=True)
def _fgt_ratios(us, ut, w, logw, S, R, scratch):
    """Fast-Gauss-transform ratios; per-row direct fallback for tiny mass.

    Classic two-sided scheme: truncated Hermite expansions are accumulated
    per source box, translated into Taylor expansions about the target-box
    centers (skipping box pairs beyond the kernel cutoff), and each target
    evaluates one short polynomial.  ``scratch`` holds the power buffer and
    the (ns+1, NT) accumulator.  ``logw`` is filled lazily by the caller only
    when a fallback row needs it (flagged by return -1).
    """
    N, ns = S.shape
    NT = ut.shape[0]
    ns1 = ns + 1
    lo = us[0]
    hi = us[0]
    for i in range(N):
        if us[i] < lo:
            lo = us[i]
        if us[i] > hi:
            hi = us[i]
    t_lo = ut[0]
    t_hi = ut[0]
    for j in range(NT):
        if ut[j] < t_lo:
            t_lo = ut[j]
        if ut[j] > t_hi:
            t_hi = ut[j]
    nb_s = min(int(hi - lo) + 1, _MAX_BOXES)
    nb_t = min(int(t_hi - t_lo) + 1, _MAX_BOXES)
    width_s = (hi - lo) / nb_s if nb_s > 1 else 1.0
    if width_s <= 0.0:
        width_s = 1.0
    width_t = (t_hi - t_lo) / nb_t if nb_t > 1 else 1.0
    if width_t <= 0.0:
        width_t = 1.0

    # Hermite coefficients per source box, laid out (box, strength, order)
    A = np.zeros((nb_s, ns1, _P))
    pw = np.empty(_P)
    for i in range(N):
        b = int((us[i] - lo) / width_s)
        if b >= nb_s:
            b = nb_s - 1
        du = us[i] - (lo + (b + 0.5) * width_s)
        val = w[i]
        for n in range(_P):
            pw[n] = val
            val *= du * _INV_NP1[n]
        Ab = A[b]
        row = S[i]
        for n in range(_P):
            Ab[0, n] += pw[n]
        for s in range(ns):
            qs = row[s]
            Ars = Ab[1 + s]
            for n in range(_P):
                Ars[n] += qs * pw[n]

    # translate into Taylor coefficients about the target-box centers, using
    # d^m/dx^m h_n = (-1)^m h_{n+m}; the 1/m! is folded in here
    TC = np.zeros((nb_t, ns1, _P))
    hk = np.empty(2 * _P)
    for bs in range(nb_s):
        cs = lo + (bs + 0.5) * width_s
        for bt in range(nb_t):
            dist = t_lo + (bt + 0.5) * width_t - cs
            if dist > _CUTOFF or dist < -_CUTOFF:
                continue
            e0 = np.exp(-dist * dist)
            hk[0] = e0
            hk[1] = 2.0 * dist * e0
            for k in range(2, 2 * _P):
                hk[k] = 2.0 * dist * hk[k - 1] - 2.0 * (k - 1.0) * hk[k - 2]
            Ab = A[bs]
            Tb = TC[bt]
            for s in range(ns1):
                Ars = Ab[s]
                Trs = Tb[s]
                sign = 1.0
                for m in range(_P):
                    acc = 0.0
                    for n in range(_P):
                        acc += Ars[n] * hk[n + m]
                    Trs[m] += sign * _INV_FACT[m] * acc
                    sign = -sign

    pwj, Mt = scratch
    for j in range(NT):
        b = int((ut[j] - t_lo) / width_t)
        if b >= nb_t:
            b = nb_t - 1
        dd = ut[j] - (t_lo + (b + 0.5) * width_t)
        val = 1.0
        for n in range(_P):
            pwj[n] = val
            val *= dd
        Tb = TC[b]
        for s in range(ns1):
            Trs = Tb[s]
            acc = 0.0
            for n in range(_P):
                acc += Trs[n] * pwj[n]
            Mt[s, j] = acc

    den_row = Mt[0]
    need_fallback = False
    for j in range(NT):
        if not (np.isfinite(den_row[j]) and den_row[j] > _DEN_MIN):
            need_fallback = True
        else:
            inv_den = 1.0 / den_row[j]
            for s in range(ns):
                R[j, s] = Mt[1 + s, j] * inv_den
    if need_fallback:
        return -1
    return 0


@njit(fastmath=True, cache=True)
def _fgt_fallback_rows(us, ut, w, logw, S, R, Mt):
    """Recompute rows whose FGT kernel mass was too small, in the log domain."""
    den_row = Mt[0]
    for j in range(ut.shape[0]):
        if not (np.isfinite(den_row[j]) and den_row[j] > _DEN_MIN):
            flag = _direct_row(us, ut[j], w, logw, S, R[j])
            if flag != 0:
                return j + 1
    return 0


@njit(cache=True)
def _step_tables(
    ht, hp, gp, w, logw, rho, drift, sigma, cz, cz2, chz, go_t, mode, g_out,
    S, St, R, us, ut, arg, e, gbar, scratch,
):
    """One backward-marginalized update; fills g_out (N, m)."""
    N = ht.shape[0]
    m = gp.shape[1]

    # weighted means of the previous particles and gradient table; centering
    # the strengths keeps the kernel sums well conditioned.  Zero-weight
    # particles may carry non-finite gradients (dead branches); they
    # contribute exactly zero, so their strength rows are masked out.
    hbar = 0.0
    for i in range(N):
        hbar += w[i] * hp[i]
    for c in range(m):
        acc = 0.0
        for i in range(N):
            if w[i] > 0.0:
                acc += w[i] * gp[i, c]
        gbar[c] = acc
    inv_delta = 1.0 / (sigma * np.sqrt(2.0))
    inv_s = 1.0 / sigma

    for i in range(N):
        hc = hp[i] - hbar
        S[i, 0] = hc
        S[i, 1] = hc * hc
        live = w[i] > 0.0
        for c in range(m):
            S[i, 2 + c] = gp[i, c] - gbar[c] if live else 0.0

    lo = 1e308
    hi = -1e308
    for i in range(N):
        u = rho * (hp[i] - hbar) * inv_delta
        us[i] = u
        lo = min(lo, u)
        hi = max(hi, u)
    t_lo = 1e308
    t_hi = -1e308
    for j in range(N):
        u = (ht[j] - drift - rho * hbar) * inv_delta
        ut[j] = u
        t_lo = min(t_lo, u)
        t_hi = max(t_hi, u)
    # extreme parameters (e.g. an exploding sigma mid-trajectory) produce
    # non-finite scalings; emit NaN so the sampler rejects the step
    if not (
        np.isfinite(lo) and np.isfinite(hi) and np.isfinite(t_lo) and np.isfinite(t_hi)
        and np.isfinite(inv_delta) and np.isfinite(inv_s)
    ):
        for j in range(N):
            for c in range(m):
                g_out[j, c] = np.nan
        return 0

    use_fgt = False
    if mode == _MODE_FGT:
        use_fgt = True
    elif mode == _MODE_AUTO:
        use_fgt = N >= _FGT_MIN_N and (hi - lo) < (_MAX_BOXES - 1)

    if use_fgt:
        flag = _fgt_ratios(us, ut, w, logw, S, R, scratch)
        if flag == -1:
            for i in range(N):
                logw[i] = np.log(w[i])
            flag = _fgt_fallback_rows(us, ut, w, logw, S, R, scratch[1])
    else:
        for i in range(N):
            logw[i] = np.log(w[i])
        ns = 2 + m
        for s in range(ns):
            for i in range(N):
                St[s, i] = S[i, s]
        flag = _direct_ratios(us, ut, logw, St, arg, e, R)
    if flag != 0:
        return flag

    delta_u = sigma * np.sqrt(2.0)
    for j in range(N):
        ajp = ut[j] * delta_u  # back to x units: ht - drift - rho*hbar
        eh = R[j, 0]
        eh2 = R[j, 1]
        ez = (ajp - rho * eh) * inv_s
        ez2 = (ajp * ajp - 2.0 * ajp * rho * eh + rho * rho * eh2) * inv_s * inv_s
        ehz = (ajp * eh - rho * eh2) * inv_s + hbar * ez
        for c in range(m):
            g_out[j, c] = (
                gbar[c]
                + R[j, 2 + c]
                + cz[c] * ez
                + cz2[c] * (ez2 - 1.0)
                + chz[c] * ehz
                + go_t[j, c]
            )
    return 0


@njit(cache=True)
def _run_quadratic(
    particles, W, ancestors, resampled, GO, rho, drift, sigma,
    cz, cz2, chz, mode,
):
    T, N = particles.shape
    m = GO.shape[2]
    ns = m + 2
    g = GO[0].copy()
    g_new = np.empty((N, m))
    hp_buf = np.empty(N)
    gp_buf = np.empty((N, m))
    w_buf = np.empty(N)
    logw_buf = np.empty(N)
    S = np.empty((N, ns))
    St = np.empty((ns, N))
    R = np.empty((N, ns))
    us = np.empty(N)
    ut = np.empty(N)
    arg = np.empty(N)
    e = np.empty(N)
    gbar = np.empty(m)
    scratch = (np.empty(_P), np.empty((ns + 1, N)))

    err_t = -1
    err_j = -1
    inv_n = 1.0 / N
    for t in range(1, T):
        if resampled[t]:
            anc = ancestors[t]
            for i in range(N):
                a = anc[i]
                hp_buf[i] = particles[t - 1, a]
                w_buf[i] = inv_n
                for c in range(m):
                    gp_buf[i, c] = g[a, c]
        else:
            for i in range(N):
                hp_buf[i] = particles[t - 1, i]
                w_buf[i] = W[t - 1, i]
                for c in range(m):
                    gp_buf[i, c] = g[i, c]
        flag = _step_tables(
            particles[t], hp_buf, gp_buf, w_buf, logw_buf, rho, drift, sigma,
            cz, cz2, chz, GO[t], mode, g_new,
            S, St, R, us, ut, arg, e, gbar, scratch,
        )
        if flag != 0:
            err_t = t
            err_j = flag - 1
            break
        tmp = g
        g = g_new
        g_new = tmp
    return g, err_t, err_j


def quadratic_tables(model, theta, system, y, strategy="auto"):
    """Compressed gradient table at the final time for an AR(1) model.

    Returns an (N, m) array whose columns follow ``model.grad_groups``; the
    caller expands columns back to the full parameter space.
    """
    from .errors import DegenerateBackwardKernelError

    ar1 = model.ar1
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    y = np.asarray(y, dtype=float)
    particles = system.particles
    T, N = particles.shape
    m = len(model.grad_groups)

    rho, drift, sigma = ar1.params(theta)
    cz, cz2, chz = (np.asarray(c, dtype=float) for c in ar1.trans_grad_coeffs(theta))
    GO = np.ascontiguousarray(ar1.obs_grad(theta, y[:, None], particles))
    GO[0] += ar1.init_grad(theta, particles[0])
    mode = {"auto": _MODE_AUTO, "direct": _MODE_DIRECT, "fgt": _MODE_FGT}[strategy]

    g, err_t, err_j = _run_quadratic(
        particles,
        system.W,
        system.ancestors,
        system.resampled,
        GO,
        float(rho),
        float(drift),
        float(sigma),
        cz,
        cz2,
        chz,
        mode,
    )
    if err_t >= 0:
        raise DegenerateBackwardKernelError(err_t + 1, err_j)
    return g
