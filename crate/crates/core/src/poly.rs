//! Orthogonal-polynomial helpers: Laguerre polynomials and Hermite functions.
//!
//! Both are evaluated through their three-term recurrences, which are stable
//! in the upward direction for the ranges used here.

/// Laguerre polynomial `L_n(x)` via the recurrence
/// `(k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0; // L_0
    let mut l = 1.0 - x; // L_1
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * l - kf * lm1) / (kf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Hermite functions `psi_0(x) ... psi_{nmax}(x)` — the normalized harmonic
/// oscillator eigenfunctions, `integral psi_m psi_n dx = delta_{mn}`.
///
/// Recurrence: `psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}`,
/// with `psi_0(x) = pi^{-1/4} exp(-x^2/2)`.
pub fn hermite_functions(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if nmax == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * psi0);
    for n in 1..nmax {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laguerre_low_orders() {
        // L_0 = 1, L_1 = 1 - x, L_2 = 1 - 2x + x^2/2, L_3 at x = 2:
        // 1 - 6 + 6 - 8/6 = -4/3.
        assert_eq!(laguerre(0, 3.7), 1.0);
        assert!((laguerre(1, 0.5) - 0.5).abs() < 1e-15);
        assert!((laguerre(2, 1.0) - (-0.5)).abs() < 1e-15);
        assert!((laguerre(3, 2.0) - (1.0 - 6.0 + 6.0 - 8.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn hermite_functions_normalized() {
        // Trapezoid over a wide interval: each psi_n has unit L2 norm and
        // psi_0 is orthogonal to psi_2.
        let n = 4001;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / (n as f64 - 1.0);
        let mut norms = [0.0f64; 6];
        let mut ortho02 = 0.0f64;
        for i in 0..n {
            let x = a + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let psi = hermite_functions(5, x);
            for (k, norm) in norms.iter_mut().enumerate() {
                *norm += w * psi[k] * psi[k];
            }
            ortho02 += w * psi[0] * psi[2];
        }
        for norm in norms {
            assert!((norm - 1.0).abs() < 1e-10, "norm = {norm}");
        }
        assert!(ortho02.abs() < 1e-12);
    }

    #[test]
    fn hermite_ground_state_value() {
        // psi_0(0)^2 = 1/sqrt(pi).
        let psi = hermite_functions(0, 0.0);
        assert!((psi[0] * psi[0] - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    }
}
