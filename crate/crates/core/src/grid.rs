//! Uniform grids, quadrature and interpolation helpers used throughout.

/// Uniform grid on `[0, r_max]` with `n` intervals (`n + 1` nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    pub r_max: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(r_max: f64, n: usize) -> Self {
        assert!(r_max > 0.0 && n >= 2, "degenerate grid");
        Self { r_max, n }
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.r_max * i as f64 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapz(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

/// Composite Simpson rule; falls back to trapezoid on the last interval
/// when the point count is even.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return trapz(values, h);
    }
    let m = if n.is_multiple_of(2) { n - 1 } else { n };
    let mut s = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut out = s * h / 3.0;
    if n.is_multiple_of(2) {
        out += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    out
}

/// Natural cubic spline through uniformly spaced samples.
///
/// Evaluation clamps to the table range; radial tables used here always
/// decay to zero (or to a known analytic tail handled by the caller)
/// before the last node.
#[derive(Debug, Clone)]
pub struct Spline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the nodes
}

impl Spline {
    pub fn from_uniform(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 3, "spline needs at least 3 points");
        // solve the tridiagonal system for natural boundary conditions
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        }
        // Thomas algorithm, diagonal 4, off-diagonals 1 (scaled)
        let mut beta = 4.0;
        m[1] = d[1] / beta;
        for i in 2..n - 1 {
            c[i] = 1.0 / beta;
            beta = 4.0 - c[i];
            m[i] = (d[i] - m[i - 1]) / beta;
        }
        for i in (1..n - 2).rev() {
            let mi1 = m[i + 1];
            m[i] -= c[i + 1] * mi1;
        }
        Self { x0, h, y: y.to_vec(), m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let t = (x - self.x0) / self.h;
        let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        let s = t - i as f64;
        let (h2, ya, yb, ma, mb) = (self.h * self.h, self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let a = 1.0 - s;
        a * ya + s * yb + h2 / 6.0 * ((a * a * a - a) * ma + (s * s * s - s) * mb)
    }
}

/// Nodes and weights for `n`-point Gauss-Legendre quadrature on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                x[i] = -z;
                x[n - 1 - i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                w[n - 1 - i] = w[i];
                break;
            }
        }
    }
    (x, w)
}

/// Cumulative first moment M(t) = int_0^t s k(s) ds of a kernel sampled on
/// a uniform grid starting at `x0`, by trapezoid with Euler-Maclaurin
/// endpoint correction (the h^2 term matters: these moments feed
/// convolutions whose deviations from their limits are themselves small).
pub fn cumulative_first_moment(x0: f64, h: f64, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let q: Vec<f64> = (0..n).map(|i| (x0 + i as f64 * h) * k[i]).collect();
    let qp = |i: usize| -> f64 {
        if i == 0 {
            (q[1] - q[0]) / h
        } else if i == n - 1 {
            (q[n - 1] - q[n - 2]) / h
        } else {
            (q[i + 1] - q[i - 1]) / (2.0 * h)
        }
    };
    let mut m = vec![0.0; n];
    let mut acc = 0.0;
    for i in 1..n {
        acc += 0.5 * h * (q[i - 1] + q[i]);
        m[i] = acc + h * h / 12.0 * (qp(0) - qp(i));
    }
    m
}

/// Convolution of a compactly supported radial kernel with a smooth radial
/// function, evaluated at radius `r`:
///
///   (k * g)(r) = (2 pi / r) int s g(s) [ M(r+s) - M(|r-s|) ] ds
///
/// where `M` is the kernel's cumulative first moment, constant for
/// arguments past the support radius `w`. The s-window is split at the
/// kink points so Gauss-Legendre sees smooth pieces.
pub fn convolve_radial(
    moment: &impl Fn(f64) -> f64,
    w: f64,
    g: &impl Fn(f64) -> f64,
    r: f64,
    gl: &(Vec<f64>, Vec<f64>),
) -> f64 {
    assert!(r > 0.0, "convolve_radial needs r > 0");
    let lo = (r - w).max(0.0);
    let hi = r + w;
    let mut cuts = vec![lo, hi];
    for c in [r, (w - r).abs(), w - r, r - w] {
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (1.0 + hi));
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        for (xi, wi) in gl.0.iter().zip(&gl.1) {
            let s = mid + half * xi;
            let bracket = moment((r + s).min(w)) - moment((r - s).abs().min(w));
            total += wi * half * s * g(s) * bracket;
        }
    }
    2.0 * std::f64::consts::PI / r * total
}

/// Least-squares exponent of a power law `y ~ C x^alpha` from positive samples.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    if y.iter().any(|&v| v <= 0.0) || x.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let sx: f64 = lx.iter().sum();
    let sy: f64 = ly.iter().sum();
    let sxx: f64 = lx.iter().map(|v| v * v).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
