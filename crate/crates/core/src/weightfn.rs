//! The odd weight function W whose Fourier transform is `-i/(sqrt(2 pi) k)`
//! outside the gap `[-g, g]`.
//!
//! Conventions: `What(k) = (2 pi)^(-1/2) int W(s) e^(-iks) ds`. The cutoff
//! `chi(k) = 1 - S_n(k^2/g^2)` on `|k| < g` (zero beyond) uses the order-`n`
//! smoothstep `S_n`, so `(1 - chi(k))/k` is smooth at 0 and `C^n` at `|k| = g`.
//! Then for `s > 0`
//!
//! ```text
//! W(s)      = 1/2 - (1/pi) int_0^g chi(k) sin(ks)/k dk
//! W'_reg(s) =     - (1/pi) int_0^g chi(k) cos(ks) dk
//! ```
//!
//! W jumps by 1 at the origin (`W(0) = 0` by oddness). Transforms of W are
//! evaluated after integrating by parts, which moves the jump into an exact
//! constant and leaves the smooth even integrand `W'_reg(s) cos(s D)`.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightParams {
    pub g: f64,
    #[serde(default = "default_order")]
    pub smoothness_order: usize,
    /// Half-length of the time grid in units of `1/g`.
    #[serde(default = "default_t")]
    pub t_max_g: f64,
    /// Grid step in units of `1/g`.
    #[serde(default = "default_ds")]
    pub ds_g: f64,
    /// Multiplies W; anything other than 1 breaks the Fourier constraint.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_order() -> usize {
    6
}
fn default_t() -> f64 {
    DEFAULT_T_G
}
fn default_ds() -> f64 {
    0.02
}
fn default_scale() -> f64 {
    1.0
}

pub const DEFAULT_T_G: f64 = 160.0;

impl WeightParams {
    pub fn new(g: f64) -> Self {
        WeightParams { g, smoothness_order: 6, t_max_g: DEFAULT_T_G, ds_g: 0.02, scale: 1.0 }
    }

    pub fn with_order(mut self, n: usize) -> Self {
        self.smoothness_order = n;
        self
    }
}

/// Order-`n` smoothstep: `S(0) = 0`, `S(1) = 1`, first `n` derivatives
/// vanish at both ends.
pub fn smoothstep(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 0..=n {
        sum += binom(n + j, j) * binom(2 * n + 1, n - j) * (-x).powi(j as i32);
    }
    x.powi(n as i32 + 1) * sum
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = Mat::<c64>::from_fn(m, m, |i, j| {
        let k = i.max(j);
        if i.abs_diff(j) == 1 {
            let k = k as f64;
            linalg::cr(k / (4.0 * k * k - 1.0).sqrt())
        } else {
            linalg::ZERO
        }
    });
    let (x, v) = linalg::eigh(jac.as_ref()).expect("tridiagonal eigenproblem");
    let w = (0..m).map(|i| 2.0 * v[(0, i)].norm_sqr()).collect();
    (x, w)
}

/// A sampled weight function for gap `g`; samples are stored for `s >= 0`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightFunction {
    pub params: WeightParams,
    pub ds: f64,
    pub t_max: f64,
    /// `W(i ds)`, with `W(0) = 0`.
    pub values: Vec<f64>,
    /// Regular part of `W'(i ds)`.
    pub derivative: Vec<f64>,
    /// Quadrature nodes on `[0, g]` as `(k, weight * chi(k))`.
    #[serde(skip)]
    nodes: Vec<(f64, f64)>,
}

impl WeightFunction {
    pub fn g(&self) -> f64 {
        self.params.g
    }

    pub fn order(&self) -> usize {
        self.params.smoothness_order
    }

    pub fn chi(&self, k: f64) -> f64 {
        let g = self.params.g;
        1.0 - smoothstep(self.params.smoothness_order, (k / g).powi(2))
    }

    /// Exact filter `phi(D) = -iD int W(s) e^(isD) ds` of the untruncated W.
    pub fn phi(&self, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        self.params.scale * (1.0 - self.chi(delta))
    }

    /// `W(s)` at an arbitrary time, evaluated from the defining integral.
    pub fn value(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let a = s.abs();
        let integral: f64 = self.nodes.iter().map(|&(k, w)| w * (k * a).sin() / k).sum();
        self.params.scale * s.signum() * (0.5 - integral / PI)
    }

    fn derivative_at(&self, s: f64) -> f64 {
        let integral: f64 = self.nodes.iter().map(|&(k, w)| w * (k * s).cos()).sum();
        -self.params.scale * integral / PI
    }

    /// The filter from trapezoid quadrature of `-iD int_{-T}^{T} W(s) e^(isD) ds`
    /// on the sample grid, together with the same rule at twice the step.
    pub fn phi_quad_pair(&self, delta: f64) -> (f64, f64) {
        if delta == 0.0 {
            return (0.0, 0.0);
        }
        let last = self.values.len() - 1;
        let (mut even, mut odd) = (0.0, 0.0);
        for i in 1..last {
            let t = self.derivative[i] * (i as f64 * self.ds * delta).cos();
            if i % 2 == 0 {
                even += t;
            } else {
                odd += t;
            }
        }
        let ends = 0.5 * (self.derivative[0] + self.derivative[last] * (self.t_max * delta).cos());
        let fixed = self.params.scale - 2.0 * self.values[last] * (self.t_max * delta).cos();
        let full = fixed + 2.0 * self.ds * (ends + even + odd);
        let half = fixed + 4.0 * self.ds * (ends + even);
        (full, half)
    }

    /// The filter `phi(D)` as realized by the time quadrature.
    pub fn phi_quad(&self, delta: f64) -> f64 {
        self.phi_quad_pair(delta).0
    }

    /// `|phi_quad - phi_quad at double step|`, a self-estimate of the
    /// quadrature error at `delta`.
    pub fn quad_error_estimate(&self, delta: f64) -> f64 {
        let (a, b) = self.phi_quad_pair(delta);
        (a - b).abs()
    }

    /// `What(k)` reconstructed from the samples.
    pub fn fourier(&self, k: f64) -> c64 {
        if k == 0.0 {
            // int W = 0 for odd W
            return linalg::ZERO;
        }
        // sqrt(2 pi) k What(k) = -i phi(k)
        c64::new(0.0, -self.phi_quad(k) / ((2.0 * PI).sqrt() * k))
    }

    /// Same grid, W multiplied by `c`.
    pub fn scaled(&self, c: f64) -> WeightFunction {
        let mut w = self.clone();
        w.params.scale *= c;
        w.values.iter_mut().for_each(|v| *v *= c);
        w.derivative.iter_mut().for_each(|v| *v *= c);
        w
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i as f64 * self.ds, v))
    }
}

pub fn build_weight(params: WeightParams) -> Result<WeightFunction> {
    let WeightParams { g, smoothness_order: n, t_max_g, ds_g, scale } = params;
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::Param(format!("gap g must be positive, got {g}")));
    }
    if n < 2 {
        return Err(Error::Param(format!("smoothness_order must be >= 2, got {n}")));
    }
    if !(t_max_g >= 20.0) {
        return Err(Error::Param(format!("T g must be >= 20, got {t_max_g}")));
    }
    if !(ds_g > 0.0 && ds_g <= 0.05) {
        return Err(Error::Param(format!("ds g must be in (0, 0.05], got {ds_g}")));
    }
    if !scale.is_finite() {
        return Err(Error::Param("scale must be finite".into()));
    }
    // even, so the double-step rule used for error estimates lands on T
    let steps = 2 * (t_max_g / ds_g / 2.0).round() as usize;
    if steps > 10_000_000 {
        return Err(Error::Param(format!("time grid too large ({steps} steps)")));
    }
    let ds = ds_g / g;
    let t_max = steps as f64 * ds;

    // composite rule on [0, g]; the integrands are entire in k, so the panel
    // count only has to resolve the oscillation k s <= g T
    let panels = ((t_max_g / 4.0).ceil() as usize).max(4);
    let (x, w) = gauss_legendre(24);
    let mut nodes = Vec::with_capacity(panels * x.len());
    let width = g / panels as f64;
    for p in 0..panels {
        let a = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let k = a + 0.5 * width * (xi + 1.0);
            nodes.push((k, 0.5 * width * wi * (1.0 - smoothstep(n, (k / g).powi(2)))));
        }
    }
    let mut wf = WeightFunction {
        params: WeightParams { scale: 1.0, ..params },
        ds,
        t_max,
        values: Vec::new(),
        derivative: Vec::new(),
        nodes,
    };
    let values: Vec<f64> = (0..=steps).map(|i| wf.value(i as f64 * ds)).collect();
    let derivative: Vec<f64> = (0..=steps).map(|i| wf.derivative_at(i as f64 * ds)).collect();
    wf.values = values;
    wf.derivative = derivative;
    Ok(if scale == 1.0 { wf } else { wf.scaled(scale) })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    /// Worst observed deviation.
    pub value: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayConstant {
    pub n: usize,
    /// `max (g s)^n |W(s)|` over the first half of the grid.
    pub bulk: f64,
    /// Same over `s in [T/2, T]`.
    pub tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightReport {
    pub items: Vec<CheckItem>,
    pub decay: Vec<DecayConstant>,
    pub exempt_samples: Vec<f64>,
    pub pass: bool,
}

/// Log-spaced transition energies in `[g, 40 g]`.
pub fn filter_grid(g: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| g * 40f64.powf(i as f64 / (count - 1) as f64)).collect()
}

/// Checks oddness, the Fourier constraint on `|k| >= g` (samples inside the
/// gap are exempt), the filter identity on `[g, 40 g]` and polynomial decay.
pub fn verify_weight(w: &WeightFunction, k_samples: &[f64], fourier_tol: f64) -> WeightReport {
    let g = w.g();
    let mut items = Vec::new();

    let mut odd_dev: f64 = w.values[0].abs();
    for (s, v) in w.grid().step_by(97) {
        odd_dev = odd_dev.max((w.value(-s) + w.value(s)).abs()).max((w.value(s) - v).abs());
    }
    items.push(CheckItem { name: "oddness".into(), pass: odd_dev <= 1e-12, value: odd_dev, tol: 1e-12 });

    let mut exempt = Vec::new();
    let mut fdev: f64 = 0.0;
    for &k in k_samples {
        if k.abs() < g {
            exempt.push(k);
            continue;
        }
        let lhs = w.fourier(k) * ((2.0 * PI).sqrt() * k) + c64::new(0.0, 1.0);
        fdev = fdev.max(lhs.norm());
    }
    items.push(CheckItem { name: "fourier".into(), pass: fdev <= fourier_tol, value: fdev, tol: fourier_tol });

    let fil = filter_grid(g, 64).into_iter().map(|d| (w.phi_quad(d) - 1.0).abs()).fold(0.0, f64::max);
    items.push(CheckItem { name: "filter_identity".into(), pass: fil <= fourier_tol, value: fil, tol: fourier_tol });

    let zero = w.phi(0.0).abs() + w.phi_quad(0.0).abs();
    items.push(CheckItem { name: "phi_at_zero".into(), pass: zero == 0.0, value: zero, tol: 0.0 });

    let half = w.values.len() / 2;
    let mut decay = Vec::new();
    for n in 0..=w.order() {
        let weighted = |(s, v): (f64, f64)| (g * s).powi(n as i32) * v.abs();
        let bulk = w.grid().take(half).map(weighted).fold(0.0, f64::max);
        let tail = w.grid().skip(half).map(weighted).fold(0.0, f64::max);
        decay.push(DecayConstant { n, bulk, tail });
    }
    let growth = decay.iter().map(|d| d.tail / d.bulk).fold(0.0, f64::max);
    items.push(CheckItem { name: "decay".into(), pass: growth <= 1.0, value: growth, tol: 1.0 });

    let pass = items.iter().all(|i| i.pass);
    WeightReport { items, decay, exempt_samples: exempt, pass }
}
