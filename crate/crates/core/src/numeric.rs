//! Small floating-point helpers shared by the numerical modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// Error-free transformation `a + b = s + e`.
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free transformation `a * b = p + e` (requires a fused multiply-add).
#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Double-double accumulator, roughly 106 bits of significand.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub(crate) fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub(crate) fn add(&mut self, other: DoubleDouble) {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        self.hi = hi;
        self.lo = lo;
    }

    pub(crate) fn mul(self, other: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        DoubleDouble::from_parts(p, e)
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, slope stderr, r²)`.
///
/// Requires at least three points with non-constant `x`.
pub(crate) fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean_x = sum(x) / n;
    let mean_y = sum(y) / n;
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    let mut syy = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx.add(dx * dx);
        sxy.add(dx * dy);
        syy.add(dy * dy);
    }
    let (sxx, sxy, syy) = (sxx.value(), sxy.value(), syy.value());
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut sse = CompensatedSum::new();
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - (intercept + slope * xi);
        sse.add(r * r);
    }
    let sse = sse.value().max(0.0);
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, stderr, r_squared)
}
