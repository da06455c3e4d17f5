//! 2x2 complex matrices, truncated Taylor jets and the exact exponential of
//! traceless 2x2 matrices.

use num_complex::Complex64 as C64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Scalars the propagators are generic over: plain complex numbers, or
/// truncated Taylor series in the spectral parameter.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<C64, Output = Self>
    + Send
    + Sync
{
    fn cst(c: C64) -> Self;
    fn value(&self) -> C64;
    /// (cosh sqrt z, sinh sqrt z / sqrt z), both entire in z.
    fn cosh_sinhc(z: Self) -> (Self, Self);

    fn zero() -> Self {
        Self::cst(C64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::cst(C64::new(1.0, 0.0))
    }
}

impl Scalar for C64 {
    fn cst(c: C64) -> Self {
        c
    }
    fn value(&self) -> C64 {
        *self
    }
    fn cosh_sinhc(z: Self) -> (Self, Self) {
        if z.norm() < 1.0 {
            let t = series_coefficients();
            let mut c = C64::new(0.0, 0.0);
            let mut s = C64::new(0.0, 0.0);
            for k in (0..SERIES_TERMS).rev() {
                c = c * z + t[0][0][k];
                s = s * z + t[1][0][k];
            }
            (c, s)
        } else {
            let r = z.sqrt();
            (r.cosh(), r.sinh() / r)
        }
    }
}

const SERIES_TERMS: usize = 16;
const MAX_DERIV: usize = 6;

/// coef[j][k] multiplies z^k in the series of C^(j) (index 0) and S^(j)
/// (index 1).
fn series_coefficients() -> &'static [[[f64; SERIES_TERMS]; MAX_DERIV]; 2] {
    static TABLE: OnceLock<[[[f64; SERIES_TERMS]; MAX_DERIV]; 2]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[[0.0; SERIES_TERMS]; MAX_DERIV]; 2];
        for j in 0..MAX_DERIV {
            for k in 0..SERIES_TERMS {
                let n = k + j;
                let mut falling = 1.0;
                for i in 0..j {
                    falling *= (n - i) as f64;
                }
                let mut f2n = 1.0;
                for i in 1..=2 * n {
                    f2n *= i as f64;
                }
                t[0][j][k] = falling / f2n;
                t[1][j][k] = falling / (f2n * (2 * n + 1) as f64);
            }
        }
        t
    })
}

fn cs_series(z: C64, n: usize) -> Vec<(C64, C64)> {
    let t = series_coefficients();
    (0..n)
        .map(|j| {
            let mut c = C64::new(0.0, 0.0);
            let mut s = C64::new(0.0, 0.0);
            for k in (0..SERIES_TERMS).rev() {
                c = c * z + t[0][j][k];
                s = s * z + t[1][j][k];
            }
            (c, s)
        })
        .collect()
}

fn cs_closed(z: C64, n: usize) -> Vec<(C64, C64)> {
    let r = z.sqrt();
    let mut out = Vec::with_capacity(n);
    out.push((r.cosh(), r.sinh() / r));
    for j in 0..n.saturating_sub(1) {
        let (cj, sj) = out[j];
        out.push((sj * 0.5, ((cj - sj) * 0.5 - sj * j as f64) / z));
    }
    out
}

/// Derivatives C^(j)(z), S^(j)(z) for j < n where C(z) = cosh sqrt z and
/// S(z) = sinh sqrt z / sqrt z.
fn cs_derivatives(z: C64, n: usize) -> Vec<(C64, C64)> {
    assert!(n <= MAX_DERIV);
    if z.norm() < 1.0 {
        cs_series(z, n)
    } else {
        cs_closed(z, n)
    }
}

/// Truncated Taylor series sum_k c[k] e^k in a perturbation e of the
/// spectral parameter. Coefficient k is the k-th derivative divided by k!.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize>(pub [C64; N]);

impl<const N: usize> Jet<N> {
    /// The independent variable z0 + e.
    pub fn var(z0: C64) -> Self {
        let mut c = [C64::new(0.0, 0.0); N];
        c[0] = z0;
        if N > 1 {
            c[1] = C64::new(1.0, 0.0);
        }
        Jet(c)
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.0[k]
    }

    pub fn recip(&self) -> Self {
        let mut out = [C64::new(0.0, 0.0); N];
        let a0 = self.0[0];
        out[0] = a0.inv();
        for k in 1..N {
            let mut s = C64::new(0.0, 0.0);
            for i in 1..=k {
                s += self.0[i] * out[k - i];
            }
            out[k] = -s / a0;
        }
        Jet(out)
    }

    /// f(self) for an analytic f given its Taylor coefficients at self.value().
    fn compose(&self, taylor: &[C64]) -> Self {
        let mut dz = *self;
        dz.0[0] = C64::new(0.0, 0.0);
        let mut out = Jet::cst(taylor[0]);
        let mut pow = Jet::one();
        for t in taylor.iter().take(N).skip(1) {
            pow = pow * dz;
            out = out + pow * *t;
        }
        out
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for k in 0..N {
            self.0[k] += o.0[k];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for k in 0..N {
            self.0[k] -= o.0[k];
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for k in 0..N {
            self.0[k] = -self.0[k];
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            for j in 0..N - i {
                out[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(out)
    }
}

impl<const N: usize> Mul<C64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, c: C64) -> Self {
        for k in 0..N {
            self.0[k] *= c;
        }
        self
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn cst(c: C64) -> Self {
        let mut v = [C64::new(0.0, 0.0); N];
        v[0] = c;
        Jet(v)
    }
    fn value(&self) -> C64 {
        self.0[0]
    }
    fn cosh_sinhc(z: Self) -> (Self, Self) {
        let d = cs_derivatives(z.0[0], N);
        let mut fact = 1.0;
        let mut tc = Vec::with_capacity(N);
        let mut ts = Vec::with_capacity(N);
        for (k, (c, s)) in d.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            tc.push(c / fact);
            ts.push(s / fact);
        }
        (z.compose(&tc), z.compose(&ts))
    }
}

/// Row-major 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T>(pub [[T; 2]; 2]);

pub type CMat2 = Mat2<C64>;

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn identity() -> Self {
        Mat2::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zeros() -> Self {
        Mat2::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn scaled(s: T) -> Self {
        Mat2::new(s, T::zero(), T::zero(), s)
    }

    pub fn det(&self) -> T {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul_vec(&self, v: [T; 2]) -> [T; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn scale(&self, s: T) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn values(&self) -> CMat2 {
        let m = &self.0;
        Mat2::new(m[0][0].value(), m[0][1].value(), m[1][0].value(), m[1][1].value())
    }

    /// exp of a traceless matrix (the trace of `self` is ignored and taken
    /// to be zero: only m00 is used on the diagonal).
    pub fn exp_traceless(&self) -> Self {
        let m = &self.0;
        let z = m[0][0] * m[0][0] + m[0][1] * m[1][0];
        let (c, s) = T::cosh_sinhc(z);
        Mat2::new(c + s * m[0][0], s * m[0][1], s * m[1][0], c - s * m[0][0])
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl<T: Scalar> AddAssign for Mat2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] - b[0][0],
            a[0][1] - b[0][1],
            a[1][0] - b[1][0],
            a[1][1] - b[1][1],
        )
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Scalar> Mul<C64> for Mat2<T> {
    type Output = Self;
    fn mul(self, c: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }
}

impl CMat2 {
    pub fn j() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2::new(z, o, -o, z)
    }

    /// e^{tJ} = cos t I + sin t J.
    pub fn exp_j(t: C64) -> Self {
        let (c, s) = (t.cos(), t.sin());
        Mat2::new(c, s, -s, c)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        let f2 = self.frobenius().powi(2);
        let d = self.det().norm();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
        ((f2 + disc) / 2.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }
}
