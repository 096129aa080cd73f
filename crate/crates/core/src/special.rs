//! Special functions and quadrature rules used across the crate.

/// First positive zero of `J_0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

const RESCALE_ABOVE: f64 = 1e250;

/// Bessel functions of the first kind `J_0(x) ..= J_max(x)` for integer orders.
///
/// Miller's backward recurrence, normalized with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_all(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = (max_order as f64).max(ax);
    // start well above both the order and the argument
    let mut start = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        let next = 2.0 * k as f64 / ax * vals[k] - vals[k + 1];
        vals[k - 1] = next;
        if next.abs() > RESCALE_ABOVE {
            for v in vals[k - 1..].iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for (k, o) in out.iter_mut().enumerate() {
        let mut v = vals[k] / norm;
        if x < 0.0 && k % 2 == 1 {
            v = -v;
        }
        *o = v;
    }
    out
}

/// `J_n(x)` for any integer order.
pub fn bessel_j(order: i32, x: f64) -> f64 {
    let n = order.unsigned_abs() as usize;
    let v = bessel_j_all(n, x)[n];
    if order < 0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Nodes and weights of a quadrature rule whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Midpoint rule on `[lower, upper)`.
    pub fn midpoint(lower: f64, upper: f64, points: usize) -> Self {
        let h = (upper - lower) / points as f64;
        let nodes = (0..points).map(|j| lower + (j as f64 + 0.5) * h).collect();
        let weights = vec![1.0 / points as f64; points];
        Self { nodes, weights }
    }

    /// Gauss–Hermite rule mapped onto a normal law `N(mean, sigma²)`.
    pub fn gaussian(mean: f64, sigma: f64, points: usize) -> Self {
        let (x, w) = gauss_hermite(points);
        let norm = std::f64::consts::PI.sqrt();
        Self {
            nodes: x
                .iter()
                .map(|xi| mean + std::f64::consts::SQRT_2 * sigma * xi)
                .collect(),
            weights: w.iter().map(|wi| wi / norm).collect(),
        }
    }
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x²)` on the real line.
///
/// Newton iteration on the orthonormal Hermite recurrence, with the usual
/// asymptotic initial guesses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    if n == 0 {
        return (x, w);
    }
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 1..=m {
        z = match i {
            1 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            2 => z - 1.14 * nf.powf(0.426) / z,
            3 => 1.86 * z - 0.86 * x[0],
            4 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 3],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i - 1] = z;
        x[n - i] = -z;
        w[i - 1] = 2.0 / (pp * pp);
        w[n - i] = w[i - 1];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    // ascending power series, independent of the recurrence above
    fn series_j(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            let k = k as f64;
            term *= -half * half / (k * (k + n as f64));
            sum += term;
        }
        sum
    }

    #[test]
    fn matches_power_series() {
        for &x in &[0.01, 0.5, 1.42, 2.84, 4.0, 6.0] {
            for n in 0..20 {
                let a = bessel_j(n as i32, x);
                let b = series_j(n, x);
                assert!((a - b).abs() < 1e-14, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn negative_orders_and_arguments() {
        assert!((bessel_j(-1, 1.42) + bessel_j(1, 1.42)).abs() < 1e-16);
        assert!((bessel_j(-2, 1.42) - bessel_j(2, 1.42)).abs() < 1e-16);
        assert!((bessel_j(3, -0.7) + bessel_j(3, 0.7)).abs() < 1e-16);
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(4, 0.0), 0.0);
    }

    #[test]
    fn first_zero() {
        assert!(bessel_j(0, J0_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn tiny_argument_high_order_does_not_overflow() {
        let v = bessel_j_all(60, 1e-3);
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((v[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_hermite_moments() {
        for n in [1, 2, 5, 16, 64] {
            let rule = QuadratureRule::gaussian(0.0, 1.0, n);
            let s0: f64 = rule.weights.iter().sum();
            assert!((s0 - 1.0).abs() < 1e-13, "n={n} sum={s0}");
            if n >= 2 {
                let s2: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
                assert!((s2 - 1.0).abs() < 1e-12, "n={n} var={s2}");
            }
            if n >= 3 {
                let s4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
                assert!((s4 - 3.0).abs() < 1e-11, "n={n} m4={s4}");
            }
        }
    }

    #[test]
    fn midpoint_weights() {
        let rule = QuadratureRule::midpoint(0.0, 1.0, 4);
        assert_eq!(rule.nodes, vec![0.125, 0.375, 0.625, 0.875]);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
