//! Natural cubic spline interpolation.

/// Natural cubic spline through strictly increasing knots.
///
/// Each segment is stored as `a + b t + c t^2 + d t^3` with `t = x - x_i`
/// and `a = y_i`, so evaluation at a knot returns the knot value exactly.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
    last_y: f64,
}

impl NaturalCubicSpline {
    /// Panics if fewer than two knots are given or `xs` is not strictly
    /// increasing.
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert_eq!(n, ys.len(), "knot coordinate lengths differ");
        assert!(n >= 2, "a spline needs at least two knots");
        assert!(xs.windows(2).all(|w| w[0] < w[1]), "knots must be strictly increasing");

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // Second derivatives; zero at both ends. Interior rows form a
        // symmetric, diagonally dominant tridiagonal system solved by the
        // Thomas algorithm.
        let mut m2 = vec![0.0; n];
        if n > 2 {
            let interior = n - 2;
            let mut diag = vec![0.0; interior];
            let mut rhs = vec![0.0; interior];
            for j in 0..interior {
                let i = j + 1;
                diag[j] = 2.0 * (h[i - 1] + h[i]);
                rhs[j] = 6.0 * (slope[i] - slope[i - 1]);
            }
            for j in 1..interior {
                let off = h[j];
                let w = off / diag[j - 1];
                diag[j] -= w * off;
                rhs[j] -= w * rhs[j - 1];
            }
            m2[interior] = rhs[interior - 1] / diag[interior - 1];
            for j in (0..interior - 1).rev() {
                m2[j + 1] = (rhs[j] - h[j + 1] * m2[j + 2]) / diag[j];
            }
        }

        let coeffs = (0..n - 1)
            .map(|i| {
                let hi = h[i];
                [
                    ys[i],
                    slope[i] - hi * (2.0 * m2[i] + m2[i + 1]) / 6.0,
                    m2[i] / 2.0,
                    (m2[i + 1] - m2[i]) / (6.0 * hi),
                ]
            })
            .collect();

        Self {
            xs: xs.to_vec(),
            coeffs,
            last_y: ys[n - 1],
        }
    }

    /// Evaluates at `x`, extrapolating with the end segments outside the
    /// knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x == self.xs[last] {
            return self.last_y;
        }
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(last - 1),
        };
        self.eval_segment(seg, x)
    }

    fn eval_segment(&self, seg: usize, x: f64) -> f64 {
        let [a, b, c, d] = self.coeffs[seg];
        let t = x - self.xs[seg];
        a + t * (b + t * (c + t * d))
    }

    /// Evaluates at `0, 1, .., len - 1` in a single sweep.
    pub fn sample_integers(&self, len: usize) -> Vec<f64> {
        let last = self.xs.len() - 1;
        let mut seg = 0;
        (0..len)
            .map(|i| {
                let x = i as f64;
                if x == self.xs[last] {
                    return self.last_y;
                }
                while seg + 1 < last && self.xs[seg + 1] <= x {
                    seg += 1;
                }
                self.eval_segment(seg, x)
            })
            .collect()
    }
}
