//! Special functions behind the closed-form dynamics.
//!
//! Generalized Laguerre polynomials are evaluated by forward recurrence. The
//! displacement-operator matrix elements
//!
//! ```text
//! <n|D(f)|k> = e^{-|f|^2/2} f^{n-k} (-1)^k / sqrt(n! k!) U(-k, n-k+1, |f|^2)
//! ```
//!
//! only need the Tricomi function at a non-positive integer first argument,
//! where it reduces to a Laguerre polynomial. Factorial ratios are carried in
//! log space so that large occupation numbers neither overflow nor underflow.


use crate::{CMatrix, Error, Result, C64, ONE, ZERO};

/// Rescaling threshold for the recurrences (2^500).
const BIG: f64 = 3.273_390_607_896_142e150;
const LN_BIG: f64 = 346.573_590_279_972_6;

/// Natural log of `n!`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// A value stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> f64 {
        self.scaled_by(0.0)
    }

    /// `mantissa * exp(log_scale + log_factor)` without forming the
    /// intermediate exponential.
    pub fn scaled_by(&self, log_factor: f64) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        let log_abs = self.mantissa.abs().ln() + self.log_scale + log_factor;
        self.mantissa.signum() * log_abs.exp()
    }
}

fn check_laguerre_args(n: usize, alpha: i64, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain("Laguerre argument must be finite and non-negative"));
    }
    if alpha < 0 && (n as i64) + alpha < 0 {
        return Err(Error::Domain("Laguerre parameter alpha < -n"));
    }
    Ok(())
}

/// Generalized Laguerre polynomial `L_n^(alpha)(x)`.
///
/// Negative integer `alpha` is accepted as long as `n + alpha >= 0`.
pub fn laguerre(n: usize, alpha: i64, x: f64) -> Result<f64> {
    check_laguerre_args(n, alpha, x)?;
    let a = alpha as f64;
    if n == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Same recurrence as [`laguerre`] with overflow-free rescaling.
pub fn laguerre_scaled(n: usize, alpha: i64, x: f64) -> Result<Scaled> {
    check_laguerre_args(n, alpha, x)?;
    let a = alpha as f64;
    let mut log_scale = 0.0;
    if n == 0 {
        return Ok(Scaled { mantissa: 1.0, log_scale });
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            log_scale += LN_BIG;
        }
    }
    Ok(Scaled { mantissa: cur, log_scale })
}

/// Terminating Tricomi function `U(-k, b, z)`, a degree-`k` polynomial in `z`:
///
/// `U(-k, b, z) = sum_m (-1)^(k-m) C(k, m) (b+m)_(k-m) z^m`
///
/// with `(x)_j` the rising factorial.
pub fn tricomi_poly(k: usize, b: i64, z: f64) -> Result<f64> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Domain("Tricomi argument must be finite and non-negative"));
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut z_pow = 1.0;
    for m in 0..=k {
        if m > 0 {
            binom *= (k + 1 - m) as f64 / m as f64;
            z_pow *= z;
        }
        let rising: f64 = (m..k).map(|i| (b + i as i64) as f64).product();
        let sign = if (k - m).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * binom * rising * z_pow;
    }
    Ok(sum)
}

/// Tricomi `U(a, b, z)`; only the polynomial branch is supported.
pub fn tricomi_u(a: f64, b: f64, z: f64) -> Result<f64> {
    let terminating = a <= 0.0 && a.fract() == 0.0 && b.fract() == 0.0 && a > -1e9 && b.abs() < 1e9;
    if !terminating {
        return Err(Error::UnsupportedBranch { a, b });
    }
    tricomi_poly((-a) as usize, b as i64, z)
}

/// Fock amplitude `<n|alpha> = e^{-|alpha|^2/2} alpha^n / sqrt(n!)`.
pub fn coherent_amplitude(alpha: C64, n: usize) -> C64 {
    let r = alpha.norm();
    if r == 0.0 {
        return if n == 0 { ONE } else { ZERO };
    }
    let log_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_factorial(n);
    C64::from_polar(log_mag.exp(), n as f64 * alpha.arg())
}

/// Matrix element `<n|D(f)|k>` of the displacement operator `exp(f a^dag - f^* a)`.
///
/// For `n < k` the element is written with `(-f^*)^(k-n)` instead of
/// `f^(n-k) |f|^(2(k-n))`, so `f = 0` needs no special casing beyond `0^0 = 1`.
pub fn displaced_fock_element(n: usize, k: usize, f: C64) -> C64 {
    let r = f.norm();
    if r == 0.0 {
        return if n == k { ONE } else { ZERO };
    }
    let x = r * r;
    let (lo, hi) = if n >= k { (k, n) } else { (n, k) };
    let d = hi - lo;
    let lag = laguerre_scaled(lo, d as i64, x).expect("arguments are in the domain");
    let log_prefactor = -0.5 * x + d as f64 * r.ln() + 0.5 * (ln_factorial(lo) - ln_factorial(hi));
    let magnitude = lag.scaled_by(log_prefactor);
    let theta = f.arg();
    if n >= k {
        C64::from_polar(magnitude, d as f64 * theta)
    } else {
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        C64::from_polar(sign * magnitude, -(d as f64) * theta)
    }
}

/// Block `<l|D(f)|j>` for `l < rows`, `j < cols`.
///
/// Each diagonal is filled by the normalized Laguerre recurrence
/// `sqrt((j+1)(j+1+d)) h_{j+1} = (2j+1+d-x) h_j - sqrt(j(j+d)) h_{j-1}`
/// with `h_j = sqrt(j!/(j+d)!) L_j^(d)(x)`, so the whole block costs
/// `O(rows * cols)`.
pub fn displacement_block(f: C64, rows: usize, cols: usize) -> CMatrix {
    let mut out = CMatrix::zeros(rows, cols);
    let r = f.norm();
    if r == 0.0 {
        for i in 0..rows.min(cols) {
            out[(i, i)] = ONE;
        }
        return out;
    }
    let x = r * r;
    let theta = f.arg();
    // d >= 0: entries (j + d, j).
    for d in 0..rows {
        let len = cols.min(rows - d);
        if len == 0 {
            continue;
        }
        let log_pref = -0.5 * x + d as f64 * r.ln() - 0.5 * ln_factorial(d);
        let phase = C64::from_polar(1.0, d as f64 * theta);
        fill_diagonal(d, x, log_pref, len, |j, v| out[(j + d, j)] = phase * v);
    }
    // d > 0 above the diagonal: entries (l, l + d), (-f^*)^d.
    for d in 1..cols {
        let len = rows.min(cols - d);
        if len == 0 {
            continue;
        }
        let log_pref = -0.5 * x + d as f64 * r.ln() - 0.5 * ln_factorial(d);
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        let phase = C64::from_polar(sign, -(d as f64) * theta);
        fill_diagonal(d, x, log_pref, len, |l, v| out[(l, l + d)] = phase * v);
    }
    out
}

fn fill_diagonal(d: usize, x: f64, log_pref: f64, len: usize, mut put: impl FnMut(usize, f64)) {
    let df = d as f64;
    let mut scale = log_pref;
    let mut prev = 1.0;
    put(0, Scaled { mantissa: prev, log_scale: scale }.value());
    if len == 1 {
        return;
    }
    let mut cur = (1.0 + df - x) / (1.0 + df).sqrt();
    put(1, Scaled { mantissa: cur, log_scale: scale }.value());
    for j in 1..len - 1 {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + df - x) * cur - (jf * (jf + df)).sqrt() * prev)
            / ((jf + 1.0) * (jf + 1.0 + df)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            scale += LN_BIG;
        }
        put(j + 1, Scaled { mantissa: cur, log_scale: scale }.value());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use alloc::vec::Vec;

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, i| acc * i as f64)
    }

    // Direct series sum_m (-1)^m C(n+a, n-m) x^m / m!.
    fn laguerre_series(n: usize, alpha: usize, x: f64) -> f64 {
        (0..=n)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(n + alpha, n - m) * x.powi(m as i32) / factorial(m)
            })
            .sum()
    }

    #[test]
    fn laguerre_low_orders() {
        for &x in &[0.0, 0.3, 2.0, 11.0] {
            assert_eq!(laguerre(0, 0, x).unwrap(), 1.0);
            assert_eq!(laguerre(0, 3, x).unwrap(), 1.0);
        }
        assert!((laguerre(1, 0, 0.25).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn laguerre_against_series() {
        let oracle = laguerre_series(5, 2, 1.7);
        assert!((oracle - (-2.80279225)).abs() < 1e-12);
        let got = laguerre(5, 2, 1.7).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle.abs());
    }

    #[test]
    fn laguerre_negative_alpha() {
        // L_n^(-n)(x) = (-x)^n / n!
        let got = laguerre(3, -3, 0.8).unwrap();
        assert!((got - (-0.512 / 6.0)).abs() < 1e-15);
        assert!(matches!(laguerre(2, -3, 1.0), Err(Error::Domain(_))));
        assert!(laguerre(2, 0, -1.0).is_err());
    }

    #[test]
    fn scaled_laguerre_matches_plain() {
        for n in 0..40 {
            let plain = laguerre(n, 3, 7.5).unwrap();
            let scaled = laguerre_scaled(n, 3, 7.5).unwrap().value();
            assert!((plain - scaled).abs() <= 1e-13 * plain.abs().max(1.0));
        }
        // x^n/n! dominates for huge x; stays finite in scaled form.
        let s = laguerre_scaled(400, 0, 5000.0).unwrap();
        assert!(s.mantissa.is_finite() && s.log_scale > 0.0);
    }

    #[test]
    fn tricomi_small_cases() {
        for &(b, z) in &[(1, 0.0), (-3, 1.2), (5, 4.0)] {
            assert_eq!(tricomi_poly(0, b, z).unwrap(), 1.0);
            assert!((tricomi_poly(1, b, z).unwrap() - (z - b as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn tricomi_laguerre_identity() {
        // U(-k, m+1, z) = (-1)^k k! L_k^(m)(z)
        let u = tricomi_poly(4, 3, 1.2).unwrap();
        let via_laguerre = factorial(4) * laguerre(4, 2, 1.2).unwrap();
        assert!((u - via_laguerre).abs() <= 1e-12 * u.abs());
        assert!((u - 3.8016).abs() < 1e-12);
    }

    #[test]
    fn tricomi_rejects_nonterminating() {
        assert!(matches!(tricomi_u(-0.5, 2.0, 1.0), Err(Error::UnsupportedBranch { .. })));
        assert!(matches!(tricomi_u(1.0, 2.0, 1.0), Err(Error::UnsupportedBranch { .. })));
        assert_eq!(tricomi_u(-1.0, 2.0, 3.0).unwrap(), 1.0);
    }

    // The printed Tricomi form, evaluated literally, for small arguments.
    fn element_via_tricomi(n: usize, k: usize, f: C64) -> C64 {
        let x = f.norm_sqr();
        let u = tricomi_poly(k, n as i64 - k as i64 + 1, x).unwrap();
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let pow = if n >= k { f.powi((n - k) as i32) } else { f.inv().powi((k - n) as i32) };
        pow * (-0.5 * x).exp() * sign * u / (factorial(n) * factorial(k)).sqrt()
    }

    #[test]
    fn element_matches_printed_tricomi_form() {
        for &f in &[C64::new(0.7, 0.0), C64::new(0.3, -1.1), C64::new(0.0, 0.8)] {
            for n in 0..8 {
                for k in 0..8 {
                    let a = displaced_fock_element(n, k, f);
                    let b = element_via_tricomi(n, k, f);
                    assert!((a - b).norm() < 1e-12, "n={n} k={k} f={f}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn element_edge_cases() {
        assert_eq!(displaced_fock_element(2, 2, ZERO), ONE);
        assert_eq!(displaced_fock_element(3, 2, ZERO), ZERO);
        // n = k = 1, f = 1: e^{-1/2} L_1(1) = 0
        assert!(displaced_fock_element(1, 1, ONE).norm() < 1e-16);
        let f = C64::new(0.5, 0.0);
        assert!((displaced_fock_element(0, 0, f).re - (-0.125f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_identity() {
        for &eta in &[0.1, 0.5, 1.0, 2.0] {
            for n in 0..=60 {
                let el = displaced_fock_element(n, n, C64::new(eta, 0.0));
                let expected = (-0.5 * eta * eta).exp() * laguerre(n, 0, eta * eta).unwrap();
                assert!((el.re - expected).abs() < 1e-11 && el.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_matches_elementwise() {
        for &f in &[C64::new(0.8, 0.0), C64::new(-0.4, 1.3), C64::new(3.0, 0.0)] {
            let block = displacement_block(f, 30, 25);
            for l in 0..30 {
                for j in 0..25 {
                    let e = displaced_fock_element(l, j, f);
                    assert!((block[(l, j)] - e).norm() < 1e-12, "{l},{j}");
                }
            }
        }
    }

    #[test]
    fn block_handles_huge_displacements() {
        // |f| = 30: column 900 sits on the coherent ridge, column 0 is a
        // coherent state whose amplitudes underflow far from the ridge. D|900> has
        // mean number 1800 and reaches past n = 3600.
        let f = C64::new(30.0, 0.0);
        let block = displacement_block(f, 1400, 1);
        let norm: f64 = block.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
        let col = displacement_block(f, 4200, 901).column(900).into_owned();
        let norm: f64 = col.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-8, "{norm}");
    }

    #[test]
    fn coherent_amplitude_poisson() {
        let c4 = coherent_amplitude(C64::new(2.0, 0.0), 4);
        let p = (-4.0f64).exp() * 256.0 / 24.0;
        assert!((c4.norm_sqr() - p).abs() < 1e-15);
        assert!((p - 0.1954).abs() < 1e-4);
        assert_eq!(coherent_amplitude(ZERO, 0), ONE);
    }

    proptest! {
        #[test]
        fn laguerre_three_term_recurrence(n in 1usize..50, alpha in 0i64..8, x in 0.0f64..20.0) {
            let lm = laguerre(n - 1, alpha, x).unwrap();
            let l0 = laguerre(n, alpha, x).unwrap();
            let lp = laguerre(n + 1, alpha, x).unwrap();
            let nf = n as f64;
            let a = alpha as f64;
            let lhs = (nf + 1.0) * lp;
            let rhs = (2.0 * nf + 1.0 + a - x) * l0 - (nf + a) * lm;
            let scale = lhs.abs().max(((2.0 * nf + 1.0 + a + x) * l0).abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn element_reflection_symmetry(n in 0usize..25, k in 0usize..25, f in -2.0f64..2.0) {
            let f = C64::new(f, 0.0);
            let a = displaced_fock_element(n, k, f);
            let b = displaced_fock_element(k, n, f).conj();
            let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - b * sign).norm() < 1e-13);
        }

        #[test]
        fn element_columns_are_normalized(k in 0usize..=20, re in -1.4f64..1.4, im in -1.4f64..1.4) {
            let f = C64::new(re, im);
            let total: f64 = (0..200).map(|n| displaced_fock_element(n, k, f).norm_sqr()).sum();
            prop_assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn element_table_is_consistent() {
        let f = C64::new(0.8, 0.0);
        let column: Vec<C64> = (0..6).map(|n| displaced_fock_element(n, 1, f)).collect();
        // D(f)|1> = D(f) a^dag |0> = (a^dag - f^*) D(f)|0>
        for (n, &value) in column.iter().enumerate() {
            let c0 = |m: usize| coherent_amplitude(f, m);
            let expected = if n > 0 { (n as f64).sqrt() * c0(n - 1) } else { ZERO } - f.conj() * c0(n);
            assert!((value - expected).norm() < 1e-14);
        }
    }
}
