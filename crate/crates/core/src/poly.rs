//! Dense univariate polynomials as ascending coefficient slices.

pub(crate) fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `∫_0^x p(u) du`
pub(crate) fn integral(p: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, &c) in p.iter().enumerate().rev() {
        acc = acc * x + c / (j + 1) as f64;
    }
    acc * x
}

/// `τ ↦ p(a + b·τ)`
pub(crate) fn compose_affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (len, &c) in p.iter().rev().enumerate() {
        // out <- out * (a + b τ) + c, where out currently has degree len - 1
        for j in (0..=len).rev() {
            let lower = if j > 0 { out[j - 1] * b } else { 0.0 };
            let same = if j < len { out[j] * a } else { 0.0 };
            out[j] = same + lower;
        }
        out[0] += c;
    }
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `t ↦ ∫_0^t p(u) q(t - u) du`, using `∫_0^t u^i (t-u)^k du = t^(i+k+1) i! k! / (i+k+1)!`.
pub(crate) fn truncated_convolution(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len()];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (k, &qk) in q.iter().enumerate() {
            let beta = 1.0 / ((i + k + 1) as f64 * binomial(i + k, i));
            out[i + k + 1] += pi * qk * beta;
        }
    }
    out
}

/// `j ↦ ∫_0^len p(len - x) x^j du` for `j < count`, i.e. `∫_0^len p(u) (len - u)^j du`.
pub(crate) fn reversed_moments(p: &[f64], len: f64, count: usize) -> Vec<f64> {
    let rev = compose_affine(p, len, -1.0);
    (0..count)
        .map(|j| {
            rev.iter()
                .enumerate()
                .map(|(i, &c)| c * len.powi((i + j + 1) as i32) / (i + j + 1) as f64)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn affine_composition() {
        // p(x) = 1 + 2x + 3x^2, p(2 - τ) = 1 + 4 - 2τ + 3(4 - 4τ + τ^2) = 17 - 14τ + 3τ^2
        let q = compose_affine(&[1.0, 2.0, 3.0], 2.0, -1.0);
        assert_eq!(q, vec![17.0, -14.0, 3.0]);
        for x in [-1.0, 0.3, 2.5] {
            assert_relative_eq!(
                eval(&q, x),
                eval(&[1.0, 2.0, 3.0], 2.0 - x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn integral_of_monomials() {
        assert_relative_eq!(integral(&[0.0, 0.0, 3.0], 2.0), 8.0);
        assert_relative_eq!(integral(&[1.0, 1.0], 1.0), 1.5);
    }

    #[test]
    fn truncated_convolution_of_constants() {
        // 1 * 1 on [0, t] is t; t * 1 is t^2/2
        assert_eq!(truncated_convolution(&[1.0], &[1.0]), vec![0.0, 1.0]);
        assert_eq!(
            truncated_convolution(&[0.0, 1.0], &[1.0]),
            vec![0.0, 0.0, 0.5]
        );
        // ∫_0^t u (t-u) du = t^3 / 6
        assert_relative_eq!(
            truncated_convolution(&[0.0, 1.0], &[0.0, 1.0])[3],
            1.0 / 6.0
        );
    }

    #[test]
    fn moments() {
        // ∫_0^2 (1 + u)(2 - u) du = [2u + u^2/2 - u^3/3]_0^2 = 4 + 2 - 8/3
        let m = reversed_moments(&[1.0, 1.0], 2.0, 2);
        assert_relative_eq!(m[0], 4.0);
        assert_relative_eq!(m[1], 4.0 + 2.0 - 8.0 / 3.0, epsilon = 1e-12);
    }
}
