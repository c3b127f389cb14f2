//! Class-balanced logistic regression with L2 (L-BFGS) or L1 (monotone FISTA).
//!
//! The objective is
//!
//! ```text
//! J(w, b) = (1/m) [ Σ_i s_i · ℓ(w·x_i + b, y_i) + penalty(w) ]
//! ```
//!
//! with `ℓ(z, y) = log(1 + e^z) - y·z`, balanced sample weights
//! `s_i = m / (2·m_{y_i})`, and `penalty = (λ/2)‖w‖²` or `λ‖w‖₁`. The bias is
//! never penalised. Dividing by `m` does not move the minimiser; it keeps the
//! gradient tolerance meaningful across dataset sizes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::matrix::Matrix;

const ROW_CHUNK: usize = 2048;
const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "lowercase")]
pub enum Regularization {
    L2(f64),
    L1(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::L2(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seed", rename_all = "lowercase")]
pub enum Init {
    #[default]
    Zeros,
    /// Weights and bias drawn uniformly from [-1, 1].
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub reg: Regularization,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default)]
    pub init: Init,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { reg: Regularization::default(), max_iter: 1000, tol: 1e-6, init: Init::Zeros }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub reg: Regularization,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after initialisation and after every iteration.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn num_features(&self) -> usize {
        self.weights.len()
    }
}

/// `m / (2·m_c)` for classes 0 and 1.
pub fn balanced_class_weights(y: &[u8]) -> Result<[f64; 2]> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    let m = y.len() as f64;
    Ok([m / (2.0 * neg as f64), m / (2.0 * pos as f64)])
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Normalised training objective; parameters are laid out as `[w..., b]`.
pub struct LogisticObjective<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    class_weight: [f64; 2],
    reg: Regularization,
    inv_m: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a Matrix, y: &'a [u8], reg: Regularization) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(ModelError::LengthMismatch { expected: x.nrows(), found: y.len() });
        }
        if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { index: i });
        }
        let class_weight = balanced_class_weights(y)?;
        Ok(Self { x, y, class_weight, reg, inv_m: 1.0 / y.len() as f64 })
    }

    pub fn num_params(&self) -> usize {
        self.x.ncols() + 1
    }

    /// Weighted data term, its gradient, plus the L2 part when present.
    fn smooth(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.x.ncols();
        let (w, b) = (&params[..f], params[f]);
        let n = self.y.len();
        let partials: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(ROW_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut g = vec![0.0; f + 1];
                let mut loss = 0.0;
                for i in c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n) {
                    let row = self.x.row(i);
                    let z = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
                    let yi = f64::from(self.y[i]);
                    let s = self.class_weight[self.y[i] as usize];
                    loss += s * (softplus(z) - yi * z);
                    let r = s * (sigmoid(z) - yi);
                    for (gj, v) in g.iter_mut().zip(row) {
                        *gj += r * v;
                    }
                    g[f] += r;
                }
                (loss, g)
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        // fixed-order reduction keeps results independent of thread count
        for (l, g) in &partials {
            loss += l;
            for (a, v) in grad.iter_mut().zip(g) {
                *a += v;
            }
        }
        if let Regularization::L2(lambda) = self.reg {
            loss += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
            for (gj, wj) in grad[..f].iter_mut().zip(w) {
                *gj += lambda * wj;
            }
        }
        grad.iter_mut().for_each(|g| *g *= self.inv_m);
        loss * self.inv_m
    }

    fn l1_term(&self, params: &[f64]) -> f64 {
        match self.reg {
            Regularization::L1(lambda) => {
                lambda * self.inv_m * params[..self.x.ncols()].iter().map(|v| v.abs()).sum::<f64>()
            }
            Regularization::L2(_) => 0.0,
        }
    }

    /// Full objective value including any L1 term.
    pub fn value(&self, params: &[f64]) -> f64 {
        let mut g = vec![0.0; self.num_params()];
        self.smooth(params, &mut g) + self.l1_term(params)
    }

    /// Gradient of the differentiable part (the whole objective under L2).
    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_params()];
        self.smooth(params, &mut g);
        g
    }

    /// Minimum-norm subgradient; zero exactly at the optimum.
    pub fn optimality_residual(&self, params: &[f64], smooth_grad: &[f64]) -> f64 {
        let f = self.x.ncols();
        match self.reg {
            Regularization::L2(_) => inf_norm(smooth_grad),
            Regularization::L1(lambda) => {
                let mu = lambda * self.inv_m;
                let mut worst = smooth_grad[f].abs();
                for j in 0..f {
                    let g = smooth_grad[j];
                    let r = if params[j] != 0.0 { (g + mu * params[j].signum()).abs() } else { (g.abs() - mu).max(0.0) };
                    worst = worst.max(r);
                }
                worst
            }
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn initial_params(n: usize, init: Init) -> Vec<f64> {
    match init {
        Init::Zeros => vec![0.0; n],
        Init::Random(seed) => {
            let mut rng = crate::rng::substream(seed, 0);
            (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    }
}

pub fn train_logreg(x: &Matrix, y: &[u8], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let lambda = match cfg.reg {
        Regularization::L1(l) | Regularization::L2(l) => l,
    };
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(ModelError::InvalidConfig(format!("regularization strength {lambda}")));
    }
    let obj = LogisticObjective::new(x, y, cfg.reg)?;
    let params = initial_params(obj.num_params(), cfg.init);
    let out = match cfg.reg {
        Regularization::L2(_) => lbfgs(&obj, params, cfg),
        Regularization::L1(_) => fista(&obj, params, cfg),
    };
    let f = x.ncols();
    Ok(LogRegModel {
        bias: out.params[f],
        weights: out.params[..f].to_vec(),
        reg: cfg.reg,
        converged: out.converged,
        iterations: out.iterations,
        loss_history: out.history,
    })
}

struct Solution {
    params: Vec<f64>,
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
}

fn lbfgs(obj: &LogisticObjective<'_>, mut x: Vec<f64>, cfg: &LogRegConfig) -> Solution {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = obj.smooth(&x, &mut g);
    let mut history = vec![fx];
    let mut mem_s: Vec<Vec<f64>> = Vec::new();
    let mut mem_y: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < cfg.max_iter {
        if inf_norm(&g) < cfg.tol {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = mem_s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&mem_y[i], &mem_s[i]);
            alpha[i] = rho * dot(&mem_s[i], &d);
            for (dj, yj) in d.iter_mut().zip(&mem_y[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&mem_s[k - 1], &mem_y[k - 1]) / dot(&mem_y[k - 1], &mem_y[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&mem_y[i], &mem_s[i]);
            let beta = rho * dot(&mem_y[i], &d);
            for (dj, sj) in d.iter_mut().zip(&mem_s[i]) {
                *dj += (alpha[i] - beta) * sj;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem_s.clear();
            mem_y.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if mem_s.is_empty() { (1.0 / inf_norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                *t = xi + step * di;
            }
            f_new = obj.smooth(&trial, &mut g_new);
            if f_new <= fx + ARMIJO_C1 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if mem_s.len() == LBFGS_MEMORY {
                mem_s.remove(0);
                mem_y.remove(0);
            }
            mem_s.push(s);
            mem_y.push(yv);
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        history.push(fx);
    }
    if !converged && inf_norm(&g) < cfg.tol {
        converged = true;
    }
    Solution { params: x, converged, iterations, history }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Monotone FISTA with backtracking and function-value restarts.
fn fista(obj: &LogisticObjective<'_>, mut x: Vec<f64>, cfg: &LogRegConfig) -> Solution {
    let n = x.len();
    let f = n - 1;
    let mu = match obj.reg {
        Regularization::L1(l) => l * obj.inv_m,
        Regularization::L2(_) => 0.0,
    };
    let mut gx = vec![0.0; n];
    let mut fx = obj.smooth(&x, &mut gx) + obj.l1_term(&x);
    let mut history = vec![fx];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lipschitz = 1.0f64;
    let mut gy = vec![0.0; n];
    let mut gz = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if obj.optimality_residual(&x, &gx) < cfg.tol {
            converged = true;
            break;
        }
        let fy = obj.smooth(&y, &mut gy);
        let mut fz_smooth;
        loop {
            for j in 0..n {
                let v = y[j] - gy[j] / lipschitz;
                z[j] = if j < f { soft_threshold(v, mu / lipschitz) } else { v };
            }
            fz_smooth = obj.smooth(&z, &mut gz);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy + dot(&gy, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            if fz_smooth <= model + 1e-15 * fy.abs() || lipschitz > 1e20 {
                break;
            }
            lipschitz *= 2.0;
        }
        iterations += 1;
        let fz = fz_smooth + obj.l1_term(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx {
            let momentum = (t - 1.0) / t_next;
            let x_prev = std::mem::replace(&mut x, z.clone());
            for j in 0..n {
                y[j] = x[j] + momentum * (x[j] - x_prev[j]);
            }
            fx = fz;
            std::mem::swap(&mut gx, &mut gz);
            t = t_next;
        } else {
            // restart from the last accepted point
            y.copy_from_slice(&x);
            t = 1.0;
        }
        history.push(fx);
    }
    Solution { params: x, converged, iterations, history }
}

pub fn predict_proba(model: &LogRegModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != model.num_features() {
        return Err(ModelError::DimensionMismatch { expected: model.num_features(), found: x.ncols() });
    }
    Ok(x.rows_iter().map(|r| sigmoid(model.decision(r))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Matrix, Vec<u8>) {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let y = xs.iter().map(|&v| u8::from(v > 0.5)).collect();
        (Matrix::from_vec(40, 1, xs), y)
    }

    fn noisy(m: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = crate::rng::substream(seed, 9);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..m {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            let c: f64 = rng.random();
            data.extend([a, b, c]);
            let p = sigmoid(3.0 * a - 2.0 * b - 0.3);
            y.push(u8::from(rng.random::<f64>() < p));
        }
        (Matrix::from_vec(m, 3, data), y)
    }

    #[test]
    fn balanced_weights_formula() {
        let mut y = vec![0u8; 90];
        y.extend(vec![1u8; 10]);
        let w = balanced_class_weights(&y).unwrap();
        assert!((w[0] - 100.0 / 180.0).abs() < 1e-15);
        assert_eq!(w[1], 5.0);
        assert!((90.0 * w[0] - 10.0 * w[1]).abs() < 1e-12);
        assert!(matches!(balanced_class_weights(&[1, 1]), Err(ModelError::SingleClass)));
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let (x, y) = separable();
        let cfg = LogRegConfig { reg: Regularization::L2(1e-3), ..Default::default() };
        let m = train_logreg(&x, &y, &cfg).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        let acc = p.iter().zip(&y).filter(|(p, &y)| (**p > 0.5) == (y == 1)).count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn loss_never_increases() {
        let (x, y) = noisy(300, 1);
        for reg in [Regularization::L2(1.0), Regularization::L1(2.0)] {
            let m = train_logreg(&x, &y, &LogRegConfig { reg, ..Default::default() }).unwrap();
            assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]), "{reg:?}");
            assert!(m.converged, "{reg:?} after {} iterations", m.iterations);
        }
    }

    #[test]
    fn l1_zeroes_noise_and_large_strength_kills_all() {
        let (x, y) = noisy(400, 2);
        let m = train_logreg(&x, &y, &LogRegConfig { reg: Regularization::L1(1e6), ..Default::default() }).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn predict_examples() {
        let zero = LogRegModel { weights: vec![0.0; 2], bias: 0.0, reg: Regularization::L2(1.0), converged: true, iterations: 0, loss_history: vec![] };
        let x = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]);
        assert_eq!(predict_proba(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let sat = LogRegModel { bias: 30.0, ..zero.clone() };
        assert!(predict_proba(&sat, &x).unwrap().iter().all(|&p| p > 1.0 - 1e-12 && p < 1.0));
        assert!(matches!(predict_proba(&zero, &Matrix::zeros(1, 3)), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::zeros(3, 1);
        assert!(matches!(train_logreg(&x, &[0, 0, 0], &LogRegConfig::default()), Err(ModelError::SingleClass)));
    }

    #[test]
    fn non_convergence_is_reported() {
        let (x, y) = noisy(200, 3);
        let m = train_logreg(&x, &y, &LogRegConfig { max_iter: 1, ..Default::default() }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }
}
