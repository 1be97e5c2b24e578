//! Hand-expanded closed forms of the low integrals, used as oracles.
#![allow(dead_code)]

/// Sum of terms plus the sum of their magnitudes.
#[derive(Debug, Default, Clone, Copy)]
pub struct Terms {
    pub value: f64,
    pub magnitude: f64,
}

impl Terms {
    fn add(&mut self, t: f64) {
        self.value += t;
        self.magnitude += t.abs();
    }

    fn scaled(self, f: f64) -> Self {
        Terms { value: self.value * f, magnitude: self.magnitude * f.abs() }
    }

    pub fn rel_err(&self, other: f64) -> f64 {
        (self.value - other).abs() / self.magnitude.max(f64::MIN_POSITIVE)
    }
}

/// `H_2` for three peakons with `q_1 > q_2 > q_3`.
pub fn h2_three(q: &[f64], p: &[f64]) -> Terms {
    let e = |i: usize, j: usize| (-(q[i] - q[j])).exp();
    let mut t = Terms::default();
    for &x in p {
        t.add(x.powi(3));
    }
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        t.add(3.0 * e(i, j) * p[i] * p[i] * p[j]);
        t.add(3.0 * e(i, j) * p[i] * p[j] * p[j]);
    }
    t.add(6.0 * e(0, 2) * p[0] * p[1] * p[2]);
    t.scaled(1.0 / 3.0)
}

/// `H_3` for four peakons with `q_1 > .. > q_4`. `literal` keeps the
/// expansion exactly as it is usually printed (`p_i^2` diagonal terms and a
/// single `6 e^{-(q_i-q_j)}` coefficient on `p_i^2 p_j^2`); otherwise the
/// diagonal is `p_i^4` and that coefficient is `2 e^{-2(q_i-q_j)} + 4 e^{-(q_i-q_j)}`.
pub fn h3_four(q: &[f64], p: &[f64], literal: bool) -> Terms {
    let n = 4;
    let e = |x: f64| (-x).exp();
    let mut t = Terms::default();
    for &x in p {
        t.add(if literal { x * x } else { x.powi(4) });
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = q[i] - q[j];
            t.add(4.0 * e(d) * p[i].powi(3) * p[j]);
            let c = if literal { 6.0 * e(d) } else { 2.0 * e(2.0 * d) + 4.0 * e(d) };
            t.add(c * p[i] * p[i] * p[j] * p[j]);
            t.add(4.0 * e(d) * p[i] * p[j].powi(3));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let ik = e(q[i] - q[k]);
                t.add(8.0 * ik * p[i] * p[i] * p[j] * p[k]);
                t.add(4.0 * e(2.0 * q[i] - q[j] - q[k]) * p[i] * p[i] * p[j] * p[k]);
                t.add(8.0 * ik * p[i] * p[j] * p[k] * p[k]);
                t.add(4.0 * e(q[i] + q[j] - 2.0 * q[k]) * p[i] * p[j] * p[k] * p[k]);
                t.add(12.0 * ik * p[i] * p[j] * p[j] * p[k]);
            }
        }
    }
    let all = p[0] * p[1] * p[2] * p[3];
    t.add(16.0 * e(q[0] - q[3]) * all);
    t.add(8.0 * e(q[0] + q[1] - q[2] - q[3]) * all);
    t.scaled(0.25)
}
