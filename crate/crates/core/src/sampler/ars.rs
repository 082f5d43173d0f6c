//! Adaptive rejection sampling for log-concave densities, with a grid
//! inverse-CDF fallback.

use rand::Rng;

const MAX_POINTS: usize = 64;
const MAX_TRIES: usize = 1000;

struct Hull {
    x: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Hull {
    fn insert(&mut self, x: f64, h: f64, dh: f64) {
        let i = self.x.partition_point(|&v| v < x);
        if self.x.get(i) == Some(&x) {
            return;
        }
        self.x.insert(i, x);
        self.h.insert(i, h);
        self.dh.insert(i, dh);
    }

    /// Tangent intersections z_0 = lo < z_1 < … < z_K = hi.
    fn breaks(&self) -> Vec<f64> {
        let k = self.x.len();
        let mut z = Vec::with_capacity(k + 1);
        z.push(self.lo);
        for i in 0..k - 1 {
            let (d0, d1) = (self.dh[i], self.dh[i + 1]);
            let zi = if (d0 - d1).abs() < 1e-12 * (d0.abs() + d1.abs() + 1e-300) {
                0.5 * (self.x[i] + self.x[i + 1])
            } else {
                (self.h[i + 1] - self.h[i] - self.x[i + 1] * d1 + self.x[i] * d0) / (d0 - d1)
            };
            z.push(zi.clamp(self.x[i], self.x[i + 1]));
        }
        z.push(self.hi);
        z
    }

    fn upper(&self, i: usize, x: f64) -> f64 {
        self.h[i] + (x - self.x[i]) * self.dh[i]
    }

    fn lower(&self, x: f64) -> f64 {
        let k = self.x.len();
        if x < self.x[0] || x > self.x[k - 1] {
            return f64::NEG_INFINITY;
        }
        let i = self.x.partition_point(|&v| v <= x).clamp(1, k - 1);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        if x1 == x0 {
            return self.h[i];
        }
        ((x1 - x) * self.h[i - 1] + (x - x0) * self.h[i]) / (x1 - x0)
    }

    /// log mass of the upper hull over piece i, and the draw within it.
    fn piece_log_mass(&self, i: usize, a: f64, b: f64) -> f64 {
        let d = self.dh[i];
        let w = b - a;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if d.abs() * w.min(1e300) < 1e-10 {
            return self.upper(i, 0.5 * (a + b)) + w.ln();
        }
        if d > 0.0 {
            self.upper(i, b) + (-(-d * w).exp_m1()).ln() - d.ln()
        } else {
            self.upper(i, a) + (-(d * w).exp_m1()).ln() - (-d).ln()
        }
    }

    fn draw_in_piece<R: Rng + ?Sized>(&self, i: usize, a: f64, b: f64, rng: &mut R) -> f64 {
        let d = self.dh[i];
        let w = b - a;
        let u: f64 = rng.random();
        if d.abs() * w.min(1e300) < 1e-10 {
            return a + u * w;
        }
        if d > 0.0 {
            b + (1.0 - u * (-(-d * w).exp_m1())).ln() / d
        } else {
            a + (1.0 - u * (-(d * w).exp_m1())).ln() / d
        }
    }
}

/// Draws from the density ∝ exp(h(x)) on (lo, hi) where h is concave.
/// `lo` may be −∞ (then some start point must have h' > 0), `hi` finite or
/// +∞ (then some start point must have h' < 0). Returns `None` when a
/// violation of concavity is detected or no draw is accepted in time.
pub fn ars<R: Rng + ?Sized>(
    h: impl Fn(f64) -> f64,
    dh: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    start: &[f64],
    rng: &mut R,
) -> Option<f64> {
    let mut hull = Hull {
        x: Vec::new(),
        h: Vec::new(),
        dh: Vec::new(),
        lo,
        hi,
    };
    for &x in start {
        let (hv, dv) = (h(x), dh(x));
        if hv.is_finite() && dv.is_finite() {
            hull.insert(x, hv, dv);
        }
    }
    if hull.x.is_empty() || (lo == f64::NEG_INFINITY && hull.dh[0] <= 0.0) {
        return None;
    }
    if hi == f64::INFINITY && *hull.dh.last().unwrap() >= 0.0 {
        return None;
    }
    for _ in 0..MAX_TRIES {
        let z = hull.breaks();
        let k = hull.x.len();
        let lm: Vec<f64> = (0..k)
            .map(|i| hull.piece_log_mass(i, z[i], z[i + 1]))
            .collect();
        let i = crate::numeric::sample_log_weights(&lm, rng);
        let x = hull
            .draw_in_piece(i, z[i], z[i + 1], rng)
            .clamp(z[i], z[i + 1]);
        let ux = hull.upper(i, x);
        let lw = rng.random::<f64>().ln();
        if lw <= hull.lower(x) - ux {
            return Some(x);
        }
        let (hv, dv) = (h(x), dh(x));
        if hv > ux + 1e-8 * (1.0 + ux.abs()) {
            return None;
        }
        if lw <= hv - ux {
            return Some(x);
        }
        if hv.is_finite() && dv.is_finite() && k < MAX_POINTS {
            hull.insert(x, hv, dv);
        }
    }
    None
}

/// Grid inverse-CDF draw from exp(h) on [lo, hi] with `n` cells, uniform
/// within the chosen cell.
pub fn griddy<R: Rng + ?Sized>(
    h: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    rng: &mut R,
) -> f64 {
    let step = (hi - lo) / n as f64;
    let w: Vec<f64> = (0..n).map(|i| h(lo + (i as f64 + 0.5) * step)).collect();
    let i = crate::numeric::sample_log_weights(&w, rng);
    lo + (i as f64 + rng.random::<f64>()) * step
}
