//! Dormand–Prince 5(4) with FSAL, PI step-size control and the standard
//! fifth-order continuous extension.

use crate::num::max_abs;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    StepUnderflow { t: f64, h: f64 },
    NonFinite { t: f64 },
}

/// Polynomial interpolant over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment {
    t0: f64,
    h: f64,
    /// End of the valid range; earlier than `t0 + h` after truncation at an event.
    stop: f64,
    r: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.stop
    }

    /// Restricts the valid range to `[t0, t]`.
    pub fn truncated(mut self, t: f64) -> Self {
        self.stop = t.clamp(self.t0, self.t0 + self.h);
        self
    }

    pub fn dim(&self) -> usize {
        self.r[0].len()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eval_component(t, i)).collect()
    }

    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
    }

    /// Values at `t0`.
    pub fn start(&self) -> &[f64] {
        &self.r[0]
    }

    /// Values at the end of the full step, ignoring truncation.
    pub fn end(&self) -> Vec<f64> {
        self.r[0].iter().zip(&self.r[1]).map(|(a, b)| a + b).collect()
    }

    /// Same interpolant with every component multiplied by `scale[i]`.
    pub fn scaled(&self, scale: &[f64]) -> Self {
        let r = self.r.clone().map(|v| v.iter().zip(scale).map(|(x, s)| x * s).collect());
        Self { t0: self.t0, h: self.h, stop: self.stop, r }
    }
}

/// Adaptive stepper for the autonomous system `y' = f(y)`.
pub struct Dopri5<F> {
    f: F,
    ctl: StepControl,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    err_old: f64,
    rejected_last: bool,
    pub accepted: usize,
    pub rejected: usize,
}

fn combine(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += h * c * ki;
        }
    }
    out
}

impl<F: FnMut(&[f64], &mut [f64])> Dopri5<F> {
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, ctl: StepControl) -> Self {
        let mut k1 = vec![0.0; y0.len()];
        f(&y0, &mut k1);
        let mut s =
            Self { f, ctl, t: t0, y: y0, k1, h: 0.0, err_old: 1e-4, rejected_last: false, accepted: 0, rejected: 0 };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn scale(&self, y: &[f64], i: usize) -> f64 {
        self.ctl.atol + self.ctl.rtol * y[i].abs()
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let rms = |v: &dyn Fn(usize) -> f64| ((0..n).map(|i| v(i).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d0 = rms(&|i| self.y[i] / self.scale(&self.y, i));
        let d1 = rms(&|i| self.k1[i] / self.scale(&self.y, i));
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.ctl.max_step);
        let y1 = combine(&self.y, h0, &[(1.0, &self.k1)]);
        let mut k2 = vec![0.0; n];
        (self.f)(&y1, &mut k2);
        let d2 = rms(&|i| (k2[i] - self.k1[i]) / self.scale(&self.y, i)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.ctl.max_step)
    }

    /// Takes one accepted step, never past `t_end`, and returns its interpolant.
    pub fn step(&mut self, t_end: f64) -> Result<DenseSegment, OdeError> {
        let n = self.y.len();
        let mut k = vec![vec![0.0; n]; 6];
        loop {
            let mut h = self.h.min(self.ctl.max_step);
            let remaining = t_end - self.t;
            if h >= remaining {
                h = remaining;
            } else if h > 0.5 * remaining {
                // avoid a tiny final step
                h = 0.5 * remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }

            let y = &self.y;
            let k1 = &self.k1;
            let y2 = combine(y, h, &[(A21, k1)]);
            (self.f)(&y2, &mut k[0]);
            let y3 = combine(y, h, &[(A31, k1), (A32, &k[0])]);
            (self.f)(&y3, &mut k[1]);
            let y4 = combine(y, h, &[(A41, k1), (A42, &k[0]), (A43, &k[1])]);
            (self.f)(&y4, &mut k[2]);
            let y5 = combine(y, h, &[(A51, k1), (A52, &k[0]), (A53, &k[1]), (A54, &k[2])]);
            (self.f)(&y5, &mut k[3]);
            let y6 = combine(y, h, &[(A61, k1), (A62, &k[0]), (A63, &k[1]), (A64, &k[2]), (A65, &k[3])]);
            (self.f)(&y6, &mut k[4]);
            let y7 = combine(y, h, &[(A71, k1), (A73, &k[1]), (A74, &k[2]), (A75, &k[3]), (A76, &k[4])]);
            (self.f)(&y7, &mut k[5]);
            // stages: k1, k2=k[0], k3=k[1], k4=k[2], k5=k[3], k6=k[4], k7=k[5]

            let mut err_sq = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k[1][i] + E4 * k[2][i] + E5 * k[3][i] + E6 * k[4][i] + E7 * k[5][i]);
                let sk = self.ctl.atol + self.ctl.rtol * y[i].abs().max(y7[i].abs());
                err_sq += (e / sk).powi(2);
                finite &= y7[i].is_finite() && k[5][i].is_finite();
            }
            let err = (err_sq / n as f64).sqrt();
            if !finite || !err.is_finite() {
                if h <= 1e-14 * self.t.abs().max(1.0) * 16.0 {
                    return Err(OdeError::NonFinite { t: self.t });
                }
                self.h = h * FAC_MIN;
                self.rejected += 1;
                self.rejected_last = true;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if self.rejected_last {
                    h_new = h_new.min(h);
                }
                self.err_old = err.max(1e-4);
                self.rejected_last = false;
                self.accepted += 1;

                let ydiff: Vec<f64> = (0..n).map(|i| y7[i] - y[i]).collect();
                let bspl: Vec<f64> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k[5][i] - bspl[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| {
                        h * (D1 * k1[i] + D3 * k[1][i] + D4 * k[2][i] + D5 * k[3][i] + D6 * k[4][i] + D7 * k[5][i])
                    })
                    .collect();
                let seg = DenseSegment {
                    t0: self.t,
                    h,
                    stop: if h == remaining { t_end } else { self.t + h },
                    r: [y.clone(), ydiff, bspl, r4, r5],
                };

                self.t = if h == remaining { t_end } else { self.t + h };
                self.y = y7;
                self.k1 = k[5].clone();
                self.h = h_new;
                return Ok(seg);
            }
            self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            self.rejected += 1;
            self.rejected_last = true;
        }
    }
}

/// Root of `g` on `[lo, hi]` with `g(lo) > 0 >= g(hi)`, bisected until the
/// bracket is narrower than `tol`. Returns the upper end of the final bracket.
pub fn bisect_crossing(mut lo: f64, mut hi: f64, tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Relative size of a vector for drift checks.
pub fn vec_scale(y: &[f64]) -> f64 {
    max_abs(y).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> StepControl {
        StepControl { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY }
    }

    #[test]
    fn exponential_decay() {
        let mut s = Dopri5::new(|y: &[f64], dy: &mut [f64]| dy[0] = -y[0], 0.0, vec![1.0], ctl());
        while s.t() < 5.0 {
            s.step(5.0).unwrap();
        }
        assert_eq!(s.t(), 5.0);
        assert!((s.y()[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let mut s = Dopri5::new(
            |y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            vec![0.0, 1.0],
            ctl(),
        );
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            let seg = s.step(10.0).unwrap();
            for m in 0..=8 {
                let t = seg.t0() + (seg.t1() - seg.t0()) * m as f64 / 8.0;
                worst = worst.max((seg.eval_component(t, 0) - t.sin()).abs());
            }
            assert!((seg.eval(seg.t1())[0] - seg.end()[0]).abs() < 1e-14);
        }
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn bisection_finds_crossing() {
        let r = bisect_crossing(0.0, 2.0, 1e-12, |t| 1.0 - t);
        assert!((r - 1.0).abs() <= 1e-12);
        assert!(1.0 - r <= 0.0);
    }

    #[test]
    fn underflow_is_reported() {
        // blow-up at t = 1
        let mut s = Dopri5::new(|y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], 0.0, vec![1.0], ctl());
        let mut res = Ok(());
        for _ in 0..100_000 {
            match s.step(2.0) {
                Ok(_) => {}
                Err(e) => {
                    res = Err(e);
                    break;
                }
            }
        }
        assert!(res.is_err());
        assert!(s.t() < 1.0 + 1e-6);
    }
}
