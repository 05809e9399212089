//! Spherical Bessel functions j_l for the low orders used by the
//! angular-channel transforms.

/// j_l(x) for small l. Power series at small argument, upward recurrence
/// from the closed forms of j0, j1 otherwise (stable for x above the
/// order).
pub fn spherical_jl(l: usize, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let threshold = (l as f64).max(1.5);
    if x < threshold {
        return jl_series(l, x);
    }
    let j0 = x.sin() / x;
    if l == 0 {
        return j0;
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if l == 1 {
        return j1;
    }
    let (mut jm, mut j) = (j0, j1);
    for n in 1..l {
        let next = (2.0 * n as f64 + 1.0) / x * j - jm;
        jm = j;
        j = next;
    }
    j
}

fn jl_series(l: usize, x: f64) -> f64 {
    // j_l(x) = x^l / (2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
    let mut dfact = 1.0;
    for i in 0..l {
        dfact *= 2.0 * i as f64 + 3.0;
    }
    let lead = x.powi(l as i32) / dfact;
    let mut term = 1.0;
    let mut sum = 1.0;
    let x2 = x * x;
    for k in 1..60 {
        let kf = k as f64;
        term *= -x2 / (2.0 * kf * (2.0 * (l as f64 + kf) + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1.0) {
            break;
        }
    }
    lead * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_closed_forms() {
        for &x in &[0.05, 0.4, 1.3, 2.0, 7.7, 31.0] {
            let x: f64 = x;
            assert_relative_eq!(spherical_jl(0, x), x.sin() / x, max_relative = 1e-12);
            assert_relative_eq!(
                spherical_jl(1, x),
                x.sin() / (x * x) - x.cos() / x,
                max_relative = 1e-10,
                epsilon = 1e-14
            );
            let j2 = (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x);
            assert_relative_eq!(spherical_jl(2, x), j2, max_relative = 1e-9, epsilon = 1e-14);
        }
    }

    #[test]
    fn series_and_recurrence_agree_above_the_threshold() {
        for l in 0..=5 {
            // same argument, both evaluation paths
            let x = (l as f64).max(1.5) + 0.2;
            let a = jl_series(l, x);
            let b = spherical_jl(l, x);
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }
}
