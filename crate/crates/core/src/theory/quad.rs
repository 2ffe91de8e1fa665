//! Adaptive Simpson quadrature and bracketed bisection for monotone functions.

/// Maximum number of interval subdivisions per integral.
pub const MAX_SUBDIVISIONS: usize = 1_000_000;

/// Adaptive Simpson rule on `[a, b]` with absolute tolerance `tol`.
///
/// Intervals are processed from an explicit stack; each accepted panel uses
/// the Richardson-corrected value `S2 + (S2 - S1) / 15`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    let mut compensation = 0.0;
    let mut splits = 0usize;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        if p.depth >= 60 || splits >= MAX_SUBDIVISIONS || delta.abs() <= 15.0 * p.tol {
            // Kahan summation keeps the accumulated panels at full precision
            let y = left + right + delta / 15.0 - compensation;
            let s = total + y;
            compensation = (s - total) - y;
            total = s;
            continue;
        }
        splits += 1;
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: 0.5 * p.tol,
            depth: p.depth + 1,
        });
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: 0.5 * p.tol,
            depth: p.depth + 1,
        });
    }
    total
}

/// Integral over `[0, t]` split at `1, 2, 4, ...` so that slowly decaying
/// integrands on long ranges are refined where they vary.
pub fn dyadic_integral<F: Fn(f64) -> f64>(f: &F, t: f64, tol: f64) -> f64 {
    dyadic_integral_from(f, 0.0, t, tol)
}

/// Same as [`dyadic_integral`] on `[lo, hi]`, with breakpoints at
/// `lo + 1, lo + 2, lo + 4, ...`.
pub fn dyadic_integral_from<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let len = hi - lo;
    if !(len > 0.0) {
        return 0.0;
    }
    let pieces = (len.max(1.0).log2().ceil() as i32 + 1).max(1);
    let piece_tol = tol / pieces as f64;
    let mut acc = adaptive_simpson(f, lo, lo + len.min(1.0), piece_tol);
    let mut off = 1.0;
    while off < len {
        let next = (2.0 * off).min(len);
        acc += adaptive_simpson(f, lo + off, lo + next, piece_tol);
        off = next;
    }
    acc
}

/// Smallest `t >= 0` (to bisection precision) with `g(t) >= target` for a
/// non-decreasing `g`. The bracket starts at `[0, 1]` and doubles its upper end
/// at most `max_doublings` times; `None` when the target is never reached.
///
/// The returned point always satisfies `g(t) >= target`.
pub fn monotone_root<G: Fn(f64) -> f64>(g: &G, target: f64, max_doublings: usize) -> Option<f64> {
    if g(0.0) >= target {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while g(hi) < target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > max_doublings || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomials_and_transcendentals() {
        let cubic = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((cubic - 0.0).abs() < 1e-12);
        let atan = adaptive_simpson(&|x: f64| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-12);
        assert!((atan - std::f64::consts::FRAC_PI_4).abs() < 1e-11);
        let long = dyadic_integral(&|x: f64| 1.0 / (1.0 + x * x), 1e6, 1e-10);
        assert!((long - 1e6f64.atan()).abs() < 1e-9);
    }

    #[test]
    fn root_of_monotone_function() {
        let r = monotone_root(&|t: f64| t * t, 2.0, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert_eq!(monotone_root(&|t: f64| t, -1.0, 10), Some(0.0));
        assert!(monotone_root(&|t: f64| t.atan(), 2.0, 60).is_none());
        let far = monotone_root(&|t: f64| t, 1e9, 100).unwrap();
        assert!((far - 1e9).abs() < 1e-5);
    }
}
