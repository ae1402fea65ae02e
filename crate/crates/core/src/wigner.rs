//! Wigner small-d function `d^j_{m,m'}(β) = ⟨j,m| exp(−iβJ_y) |j,m'⟩`.
//!
//! Evaluated through the Jacobi-polynomial form
//!
//! ```text
//! d^j_{m,m'}(β) = (−1)^λ √(C(2j−k, k+a) / C(k+b, b)) sin(β/2)^a cos(β/2)^b P_k^{(a,b)}(cos β)
//! ```
//!
//! with the polynomial generated by its three-term recurrence. The explicit
//! alternating sum over factorials loses ~30 digits at `2j = 200, β = π/2`;
//! the recurrence does not.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const LN_FACT_LEN: usize = 1024;

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_LEN);
        t.push(0.0);
        for i in 1..LN_FACT_LEN {
            t.push(t[i - 1] + (i as f64).ln());
        }
        t
    });
    table[n]
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by upward recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let p1 = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
    let (mut prev, mut cur) = (p0, p1);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let next = (c2 * cur - c3 * prev) / c1;
        prev = cur;
        cur = next;
    }
    cur
}

/// `d^j_{m,m'}(β)` with all angular-momentum labels given doubled
/// (`two_j = 2j`, ...), so half-integers are exact.
pub fn wigner_d_doubled(two_j: i64, two_m: i64, two_mp: i64, beta: f64) -> Result<f64> {
    if two_j < 0 {
        return Err(Error::Domain(format!("j = {}/2 is negative", two_j)));
    }
    if two_m.abs() > two_j || two_mp.abs() > two_j {
        return Err(Error::Domain(format!(
            "|m| or |m'| exceeds j (2j={two_j}, 2m={two_m}, 2m'={two_mp})"
        )));
    }
    if (two_j - two_m) % 2 != 0 || (two_j - two_mp) % 2 != 0 {
        return Err(Error::Domain(format!(
            "j − m and j − m' must be integers (2j={two_j}, 2m={two_m}, 2m'={two_mp})"
        )));
    }
    if two_j as usize >= LN_FACT_LEN {
        return Err(Error::Domain(format!("2j = {two_j} too large")));
    }

    // The Jacobi form below is written for ⟨j m'| e^{−iβJ_y} |j m⟩; swap to
    // get ⟨j m| e^{−iβJ_y} |j m'⟩.
    let (two_m, two_mp) = (two_mp, two_m);

    // Integer offsets j±m, j±m'.
    let jpm = (two_j + two_m) / 2;
    let jmm = (two_j - two_m) / 2;
    let jpmp = (two_j + two_mp) / 2;
    let jmmp = (two_j - two_mp) / 2;
    let mp_minus_m = (two_mp - two_m) / 2;

    let k = jpm.min(jmm).min(jpmp).min(jmmp);
    let (a, lambda) = if k == jpm {
        (mp_minus_m, mp_minus_m)
    } else if k == jmm || k == jpmp {
        (-mp_minus_m, 0)
    } else {
        (mp_minus_m, mp_minus_m)
    };
    let b = two_j - 2 * k - a;
    debug_assert!(a >= 0 && b >= 0 && k >= 0);

    let (k, a, b) = (k as usize, a as usize, b as usize);
    let ln_pref = 0.5 * (ln_binomial(two_j as usize - k, k + a) - ln_binomial(k + b, b));
    let half = beta / 2.0;
    let trig = half.sin().powi(a as i32) * half.cos().powi(b as i32);
    let sign = if lambda.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(sign * ln_pref.exp() * trig * jacobi(k, a as f64, b as f64, beta.cos()))
}

/// `d^j_{m,m'}(β)` for half-integer labels given as reals.
pub fn wigner_d(j: f64, m: f64, mp: f64, beta: f64) -> Result<f64> {
    let doubled = |x: f64, name: &str| -> Result<i64> {
        let t = 2.0 * x;
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::Domain(format!("{name} = {x} is not a half-integer")));
        }
        Ok(t.round() as i64)
    };
    wigner_d_doubled(doubled(j, "j")?, doubled(m, "m")?, doubled(mp, "m'")?, beta)
}

/// Full matrix `[d^j_{m,m'}(β)]` indexed by `m + j`, `m' + j`.
pub fn wigner_d_matrix(two_j: usize, beta: f64) -> Vec<Vec<f64>> {
    let dim = two_j + 1;
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| {
                    let two_m = 2 * r as i64 - two_j as i64;
                    let two_mp = 2 * c as i64 - two_j as i64;
                    wigner_d_doubled(two_j as i64, two_m, two_mp, beta).expect("labels in range")
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Exact explicit-sum oracle at β = π/2. With cos(β/2) = sin(β/2) = 2^{−1/2}
    /// the sum is 2^{−j} √((j+m)!(j−m)!(j+m')!(j−m')!) Σ_s (−1)^{m'−m+s} / (a! b! c! d!)
    /// where a+b+c+d = 2j, so (2j)! times each term is an integer multinomial.
    /// The sum is the textbook one for ⟨j m'|…|j m⟩, hence the label swap.
    fn oracle_half_pi(two_j: i64, two_mp: i64, two_m: i64) -> f64 {
        fn fact(n: i64) -> i128 {
            (1..=n as i128).product::<i128>().max(1)
        }
        let jpm = (two_j + two_m) / 2;
        let jmm = (two_j - two_m) / 2;
        let jpmp = (two_j + two_mp) / 2;
        let jmmp = (two_j - two_mp) / 2;
        let dm = (two_mp - two_m) / 2;
        let total = fact(two_j);
        let mut acc: i128 = 0;
        for s in 0..=two_j {
            let (a, c, d) = (jpm - s, dm + s, jmmp - s);
            if a < 0 || c < 0 || d < 0 {
                continue;
            }
            let term = total / (fact(a) * fact(s) * fact(c) * fact(d));
            if (dm + s).rem_euclid(2) == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let ln_root = 0.5
            * (ln_factorial(jpm as usize)
                + ln_factorial(jmm as usize)
                + ln_factorial(jpmp as usize)
                + ln_factorial(jmmp as usize));
        let ln_scale = ln_root - ln_factorial(two_j as usize) - (two_j as f64 / 2.0) * 2f64.ln();
        acc as f64 * ln_scale.exp()
    }

    #[test]
    fn spin_half_closed_form() {
        let d = wigner_d(0.5, 0.5, 0.5, FRAC_PI_2).unwrap();
        assert!((d - (PI / 4.0).cos()).abs() < 1e-15);
        // d^{1/2}_{1/2,−1/2}(β) = −sin(β/2)
        let d = wigner_d(0.5, 0.5, -0.5, 0.7).unwrap();
        assert!((d + 0.35f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn spin_one_center_element() {
        assert!(wigner_d(1.0, 0.0, 0.0, FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!((wigner_d(1.0, 0.0, 0.0, 0.3).unwrap() - 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn matches_exact_sum_oracle() {
        let d = wigner_d(10.0, 3.0, -2.0, FRAC_PI_2).unwrap();
        let o = oracle_half_pi(20, 6, -4);
        assert!((d - o).abs() < 1e-12, "{d} vs {o}");
        for two_j in [1i64, 2, 5, 9, 16, 25] {
            for two_m in (-two_j..=two_j).step_by(2) {
                for two_mp in (-two_j..=two_j).step_by(2) {
                    let d = wigner_d_doubled(two_j, two_m, two_mp, FRAC_PI_2).unwrap();
                    let o = oracle_half_pi(two_j, two_m, two_mp);
                    assert!((d - o).abs() < 1e-12, "j={two_j}/2 m={two_m}/2 m'={two_mp}/2: {d} vs {o}");
                }
            }
        }
    }

    #[test]
    fn orthogonal_up_to_j_50() {
        for two_j in [1usize, 7, 40, 99, 100] {
            let d = wigner_d_matrix(two_j, FRAC_PI_2);
            for r in 0..=two_j {
                for s in r..=two_j {
                    let dot: f64 = (0..=two_j).map(|c| d[r][c] * d[s][c]).sum();
                    let want = if r == s { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10, "2j={two_j} rows {r},{s}: {dot}");
                }
            }
        }
    }

    #[test]
    fn stable_at_two_j_200() {
        let d = wigner_d_matrix(200, FRAC_PI_2);
        for r in [0usize, 57, 100, 200] {
            let norm: f64 = d[r].iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9, "row {r}: {norm}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(wigner_d(1.0, 2.0, 0.0, 0.1).is_err());
        assert!(wigner_d(1.0, 0.5, 0.0, 0.1).is_err());
        assert!(wigner_d(0.3, 0.0, 0.0, 0.1).is_err());
        assert!(wigner_d(-1.0, 0.0, 0.0, 0.1).is_err());
    }
}
