//! Numerical kernels shared by the analytical modules.
//!
//! * adaptive Gauss–Kronrod (7/15) quadrature on finite ranges,
//! * semi-infinite integrals by doubling the truncation point until the
//!   contribution of the newest chunk is negligible,
//! * pointwise real Laplace transforms,
//! * trapezoid-rule convolution of functions sampled on a uniform grid,
//! * series summation with a tail estimate,
//! * bisection inversion of monotone functions.

use crate::error::{Error, Result};

/// Accuracy request for the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Subdivision depth for quadrature, doubling count for semi-infinite
    /// ranges, term count for series.
    pub max_depth: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_depth: 60,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_depth < 1 {
            return Err(Error::InvalidParameter(format!(
                "tolerance needs abs_tol > 0, rel_tol > 0, max_depth >= 1 (got {abs_tol}, {rel_tol}, {max_depth})"
            )));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_depth,
        })
    }

    /// Default used for grid computations (series of convolutions).
    pub fn grid() -> Self {
        Self {
            abs_tol: 1e-5,
            rel_tol: 1e-5,
            max_depth: 10_000,
        }
    }

    /// Tighter than the default; used where results feed a recursion.
    pub fn fine() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_depth: 60,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

// Kronrod 15-point abscissae and weights; the Gauss 7-point rule uses the
// odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let integral = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (integral, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: usize,
}

/// Globally adaptive quadrature of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol·|I|)`. Fails when a panel would
/// exceed `max_depth` bisections.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::InvalidParameter(format!(
            "integration range [{a}, {b}] is not ordered"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = gk15(&f, a, b);
    let mut panels = vec![Panel {
        a,
        b,
        value,
        error,
        depth: 0,
    }];
    let mut total = value;
    let mut total_err = error;
    loop {
        if !total.is_finite() {
            return Err(Error::NonConvergence {
                what: "quadrature",
                estimate: total,
                error: total_err,
            });
        }
        if total_err <= tol.target(total) {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if p.depth >= tol.max_depth || mid <= p.a || mid >= p.b {
            return Err(Error::NonConvergence {
                what: "quadrature",
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = gk15(&f, p.a, mid);
        let (v2, e2) = gk15(&f, mid, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.error;
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
            depth: p.depth + 1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
            depth: p.depth + 1,
        });
        // Recompute the running sums now and then to shed cancellation drift.
        if panels.len() % 64 == 0 {
            total = panels.iter().map(|p| p.value).sum();
            total_err = panels.iter().map(|p| p.error).sum();
        }
    }
}

/// `∫₀^∞ f`, see [`integrate_semi_infinite_scaled`]; the first chunk is `[0, 1]`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, tol: &Tolerance) -> Result<f64> {
    integrate_semi_infinite_scaled(f, 1.0, tol)
}

/// `∫₀^∞ f` by adaptive truncation.
///
/// Integrates `[0, scale]`, then `[scale, 2·scale]`, `[2·scale, 4·scale]`, …
/// and stops once two consecutive chunks each contribute less than a tenth of
/// the requested accuracy. `scale` should be of the order of the integrand's
/// decay length. Fails when `max_depth` doublings pass without that happening.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: &Tolerance,
) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "semi-infinite chunk scale must be positive, got {scale}"
        )));
    }
    let chunk_tol = Tolerance {
        abs_tol: tol.abs_tol * 0.25,
        ..*tol
    };
    let mut total = integrate(&f, 0.0, scale, &chunk_tol)?;
    let mut lo = scale;
    let mut quiet = 0;
    for _ in 0..tol.max_depth {
        let hi = 2.0 * lo;
        let chunk = integrate(&f, lo, hi, &chunk_tol)?;
        total += chunk;
        if chunk.abs() <= 0.1 * tol.target(total) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(Error::NonConvergence {
        what: "semi-infinite quadrature tail",
        estimate: total,
        error: f64::NAN,
    })
}

/// Real Laplace transform `∫₀^∞ e^{−st} f(t) dt` for `s > 0`.
pub fn laplace_at<F: Fn(f64) -> f64>(f: F, s: f64, tol: &Tolerance) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Laplace argument must be positive, got {s}"
        )));
    }
    integrate_semi_infinite_scaled(|t| (-s * t).exp() * f(t), 1.0 / s, tol)
}

/// Samples of a function on the uniform grid `{k·dt : k = 0, 1, …}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dt: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive, got {dt}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("grid has no samples".into()));
        }
        Ok(Self { dt, values })
    }

    /// Samples `f` at `k·dt` for `k = 0..n`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, dt: f64, n: usize) -> Result<Self> {
        Self::new(dt, (0..n).map(|k| f(k as f64 * dt)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k as f64 * self.dt, v))
    }

    /// Linear interpolation, clamped to the grid ends.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().expect("nonempty");
        }
        let frac = x - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Trapezoid-rule convolution `(f*g)(t) = ∫₀ᵗ f(t−u) g(u) du` on the common grid.
///
/// The result has as many samples as the shorter input.
pub fn convolve_grid(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if (f.dt - g.dt).abs() > 1e-12 * f.dt.max(g.dt) {
        return Err(Error::GridMismatch(f.dt, g.dt));
    }
    let n = f.len().min(g.len());
    let (fv, gv) = (&f.values[..n], &g.values[..n]);
    let mut out = vec![0.0; n];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.5 * (fv[k] * gv[0] + fv[0] * gv[k]);
        for j in 1..k {
            acc += fv[k - j] * gv[j];
        }
        *slot = acc * f.dt;
    }
    GridFunction::new(f.dt, out)
}

/// A quantity that can be accumulated by [`sum_series`].
pub trait SeriesTerm {
    fn accumulate(&mut self, other: &Self) -> Result<()>;
    /// Size used by the stopping rule.
    fn magnitude(&self) -> f64;
}

impl SeriesTerm for f64 {
    fn accumulate(&mut self, other: &Self) -> Result<()> {
        *self += other;
        Ok(())
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl SeriesTerm for GridFunction {
    fn accumulate(&mut self, other: &Self) -> Result<()> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(self.dt, other.dt));
        }
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn magnitude(&self) -> f64 {
        self.sup_norm()
    }
}

/// Partial sum and the number of terms it used.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSum<T> {
    pub sum: T,
    pub terms: usize,
}

/// Sums `term(start) + term(start+1) + …`.
///
/// With a ratio witness `q < 1` (each term at most `q` times the previous in
/// magnitude) the tail after term `k` is bounded by `|term_k|·q/(1−q)`;
/// without one the first omitted term is taken as the tail estimate. Stops
/// once that estimate is at most `stop.abs_tol`. Errors after
/// `stop.max_depth` terms.
pub fn sum_series<T, F>(
    mut term: F,
    start: usize,
    ratio: Option<f64>,
    stop: &Tolerance,
) -> Result<SeriesSum<T>>
where
    T: SeriesTerm,
    F: FnMut(usize) -> Result<T>,
{
    let tail_factor = match ratio {
        Some(q) if (0.0..1.0).contains(&q) => q / (1.0 - q),
        Some(q) => {
            return Err(Error::InvalidParameter(format!(
                "series ratio witness must lie in [0, 1), got {q}"
            )))
        }
        None => 1.0,
    };
    let mut sum = term(start)?;
    let mut last = sum.magnitude();
    for used in 1..=stop.max_depth {
        if last * tail_factor <= stop.abs_tol {
            return Ok(SeriesSum { sum, terms: used });
        }
        if used == stop.max_depth {
            break;
        }
        let t = term(start + used)?;
        last = t.magnitude();
        sum.accumulate(&t)?;
    }
    Err(Error::NonConvergence {
        what: "series",
        estimate: sum.magnitude(),
        error: last * tail_factor,
    })
}

/// Finds `t ∈ [lo, hi]` with `F(t) ≈ y` for nondecreasing `F` by bisection.
///
/// Returns the right end of the final bracket, so for step functions the
/// result is the smallest `t` with `F(t) ≥ y` up to floating resolution.
pub fn invert_monotone<F: Fn(f64) -> f64>(
    f: F,
    y: f64,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo <= y && y <= f_hi) {
        return Err(Error::Bracket { y, f_lo, f_hi });
    }
    if f_lo >= y {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..tol.max_depth.max(200) {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm < y {
            a = mid;
        } else {
            b = mid;
            if fm - y <= tol.abs_tol && (b - a) <= tol.abs_tol.max(f64::EPSILON * b.abs()) {
                break;
            }
        }
    }
    Ok(b)
}

/// `(1 − e^{−x})/x`, continuous at 0.
pub(crate) fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}
