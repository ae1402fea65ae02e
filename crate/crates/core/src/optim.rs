//! Small one-dimensional maximization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximize `f` on `[lo, hi)` by a uniform grid of `points` samples followed
/// by golden-section refinement around the best grid point. Returns the
/// argument and value; ties on the grid go to the smallest argument.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / points as f64;
    let (mut best_i, mut best_v) = (0usize, f64::NEG_INFINITY);
    for i in 0..points {
        let v = f(lo + i as f64 * step);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let x0 = lo + best_i as f64 * step;
    let x = golden_max(f, x0 - step, x0 + step, tol);
    let v = f(x);
    if v > best_v {
        (x, v)
    } else {
        (x0, best_v)
    }
}
