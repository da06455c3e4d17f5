//! Winding numbers of analytic functions along closed contours by adaptive
//! phase tracking.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contour {
    /// Axis-parallel rectangle, positively oriented.
    Rectangle { re: (f64, f64), im: (f64, f64) },
    Circle { center: C64, radius: f64 },
}

impl Contour {
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Contour::Rectangle { re, im } => z.re > re.0 && z.re < re.1 && z.im > im.0 && z.im < im.1,
            Contour::Circle { center, radius } => (z - center).norm() < radius,
        }
    }

    /// Slightly enlarged copy (used when a zero sits on the contour).
    pub fn perturbed(&self, k: usize) -> Contour {
        let f = 1.0 + 0.013 * (k as f64 + 1.0);
        match *self {
            Contour::Rectangle { re, im } => {
                let (cr, ci) = (0.5 * (re.0 + re.1), 0.5 * (im.0 + im.1));
                let (hr, hi) = (0.5 * (re.1 - re.0) * f, 0.5 * (im.1 - im.0) * f);
                Contour::Rectangle { re: (cr - hr, cr + hr), im: (ci - hi, ci + hi) }
            }
            Contour::Circle { center, radius } => Contour::Circle { center, radius: radius * f },
        }
    }

    /// Closed polygonal path pieces: (start, end, kind) where kind tells how
    /// to interpolate between the ends.
    fn pieces(&self) -> Vec<Piece> {
        match *self {
            Contour::Rectangle { re, im } => {
                let a = C64::new(re.0, im.0);
                let b = C64::new(re.1, im.0);
                let c = C64::new(re.1, im.1);
                let d = C64::new(re.0, im.1);
                vec![Piece::Line(a, b), Piece::Line(b, c), Piece::Line(c, d), Piece::Line(d, a)]
            }
            Contour::Circle { center, radius } => {
                vec![Piece::Arc { center, radius, t0: 0.0, t1: 2.0 * PI }]
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Piece {
    Line(C64, C64),
    Arc { center: C64, radius: f64, t0: f64, t1: f64 },
}

impl Piece {
    fn point(&self, s: f64) -> C64 {
        match *self {
            Piece::Line(a, b) => a + (b - a) * s,
            Piece::Arc { center, radius, t0, t1 } => center + C64::from_polar(radius, t0 + (t1 - t0) * s),
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Piece::Line(a, b) => (b - a).norm(),
            Piece::Arc { radius, t0, t1, .. } => radius * (t1 - t0).abs(),
        }
    }
}

const MAX_DEPTH: usize = 40;
const MAX_STEP: f64 = PI / 4.0;

struct Tracker<'a> {
    f: &'a (dyn Fn(C64) -> Result<C64> + Sync),
    piece: Piece,
    evals: usize,
}

impl Tracker<'_> {
    fn eval(&mut self, s: f64) -> Result<C64> {
        self.evals += 1;
        let v = (self.f)(self.piece.point(s))?;
        if v == C64::new(0.0, 0.0) || !v.is_finite() {
            return Err(Error::ZeroOnContour);
        }
        Ok(v)
    }

    fn track(&mut self, s0: f64, f0: C64, s1: f64, f1: C64, depth: usize) -> Result<f64> {
        let sm = 0.5 * (s0 + s1);
        let fm = self.eval(sm)?;
        let d_all = (f1 / f0).arg();
        let d_l = (fm / f0).arg();
        let d_r = (f1 / fm).arg();
        let consistent = (d_l + d_r - d_all).abs() < 1e-6;
        if consistent && d_all.abs() <= MAX_STEP && d_l.abs() <= MAX_STEP && d_r.abs() <= MAX_STEP {
            return Ok(d_all);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::ZeroOnContour);
        }
        Ok(self.track(s0, f0, sm, fm, depth + 1)? + self.track(sm, fm, s1, f1, depth + 1)?)
    }
}

/// Change of arg f along one piece (not divided by 2 pi).
pub fn phase_change(f: &(dyn Fn(C64) -> Result<C64> + Sync), piece: Piece, spacing: f64) -> Result<f64> {
    let n = ((piece.length() / spacing).ceil() as usize).max(4);
    let mut tr = Tracker { f, piece, evals: 0 };
    let mut total = 0.0;
    let mut s_prev = 0.0;
    let mut f_prev = tr.eval(0.0)?;
    for i in 1..=n {
        let s = i as f64 / n as f64;
        let fv = tr.eval(s)?;
        total += tr.track(s_prev, f_prev, s, fv, 0)?;
        s_prev = s;
        f_prev = fv;
    }
    Ok(total)
}

pub fn line(a: C64, b: C64) -> Piece {
    Piece::Line(a, b)
}

fn winding_once(f: &(dyn Fn(C64) -> Result<C64> + Sync), contour: &Contour, spacing: f64) -> Result<i64> {
    let mut total = 0.0;
    for piece in contour.pieces() {
        total += phase_change(f, piece, spacing)?;
    }
    Ok(to_count(total))
}

pub fn to_count(total_phase: f64) -> i64 {
    (total_phase / (2.0 * PI)).round() as i64
}

/// Number of zeros inside the contour counted with multiplicity. The
/// contour is enlarged slightly (up to three times) if a zero lies on it.
pub fn count_zeros(f: &(dyn Fn(C64) -> Result<C64> + Sync), contour: Contour) -> Result<i64> {
    let spacing = match contour {
        Contour::Rectangle { .. } => 0.25,
        Contour::Circle { radius, .. } => (radius * 2.0 * PI / 32.0).min(0.25),
    };
    let mut c = contour;
    for k in 0..4 {
        match winding_once(f, &c, spacing) {
            Ok(n) => return Ok(n),
            Err(Error::ZeroOnContour) if k < 3 => c = contour.perturbed(k),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroOnContour)
}
