//! First- and quasi-second-order optimizers over flat parameter vectors.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(op: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Invalid(format!("{op}: non-finite gradient entry {i} ({})", v[i]))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub betas: (f64, f64),
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, cfg: &AdamConfig) -> Self {
        Self {
            betas: cfg.betas,
            eps: cfg.eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected update with step size `lr`. A non-finite gradient
    /// leaves parameters and state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Invalid(format!(
                "adam: state for {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        check_finite("adam", grads)?;
        let (b1, b2) = self.betas;
        self.t += 1;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_trials: usize,
    /// Max-abs gradient below which a step is skipped as converged.
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 50,
            c1: 1e-4,
            c2: 0.01,
            max_trials: 25,
            grad_tol: 1e-12,
        }
    }
}

/// A stored curvature pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lbfgs {
    pub cfg: LbfgsConfig,
    pub pairs: VecDeque<Pair>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LbfgsStatus {
    Converged,
    Stepped { step: f64, evaluations: usize },
}

/// Result of [`Lbfgs::step`]: the loss and gradient at the new iterate.
#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub status: LbfgsStatus,
    pub f: f64,
    pub g: Vec<f64>,
}

struct Probe {
    a: f64,
    f: f64,
    dphi: f64,
    g: Vec<f64>,
}

impl Lbfgs {
    pub fn new(cfg: LbfgsConfig) -> Self {
        Self {
            cfg,
            pairs: VecDeque::new(),
        }
    }

    /// Applies the implicit inverse-Hessian approximation to `q`.
    pub fn two_loop(&self, q: &[f64]) -> Vec<f64> {
        let mut r = q.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let a = p.rho * dot(&p.s, &r);
            for (ri, yi) in r.iter_mut().zip(&p.y) {
                *ri -= a * yi;
            }
            alphas.push(a);
        }
        if let Some(p) = self.pairs.back() {
            let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
            r.iter_mut().for_each(|v| *v *= gamma);
        }
        for (p, a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * dot(&p.y, &r);
            for (ri, si) in r.iter_mut().zip(&p.s) {
                *ri += si * (a - b);
            }
        }
        r
    }

    /// One iteration from `x` with known loss `f` and gradient `g`.
    ///
    /// `loss_fn` must be deterministic. On line-search failure the history
    /// is cleared, `x` is left unchanged and [`Error::LineSearch`] returned.
    pub fn step<F>(&mut self, x: &mut [f64], f: f64, g: &[f64], mut loss_fn: F) -> Result<LbfgsOutcome>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        check_finite("lbfgs", g)?;
        if g.iter().all(|v| v.abs() <= self.cfg.grad_tol) {
            return Ok(LbfgsOutcome {
                status: LbfgsStatus::Converged,
                f,
                g: g.to_vec(),
            });
        }
        let mut d: Vec<f64> = self.two_loop(g).iter().map(|v| -v).collect();
        let mut dphi0 = dot(g, &d);
        if !(dphi0 < 0.0) {
            self.pairs.clear();
            d = g.iter().map(|v| -v).collect();
            dphi0 = -dot(g, g);
        }

        let mut evals = 0usize;
        let mut eval = |a: f64, evals: &mut usize| -> Result<Probe> {
            *evals += 1;
            let xa: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + a * di).collect();
            match loss_fn(&xa) {
                Ok((fa, ga)) if fa.is_finite() && ga.iter().all(|v| v.is_finite()) => {
                    let dphi = dot(&ga, &d);
                    Ok(Probe { a, f: fa, dphi, g: ga })
                }
                Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::NonFiniteResidual { .. }) => Ok(Probe {
                    a,
                    f: f64::INFINITY,
                    dphi: f64::NAN,
                    g: Vec::new(),
                }),
                Err(e) => Err(e),
            }
        };

        let (c1, c2, max_trials) = (self.cfg.c1, self.cfg.c2, self.cfg.max_trials);
        let mut prev = Probe {
            a: 0.0,
            f,
            dphi: dphi0,
            g: g.to_vec(),
        };
        let mut a = 1.0;
        let mut accepted: Option<Probe> = None;
        let mut bracket: Option<(Probe, Probe)> = None;
        let mut first = true;
        while evals < max_trials {
            let cur = eval(a, &mut evals)?;
            if cur.f > f + c1 * a * dphi0 || (!first && cur.f >= prev.f) {
                bracket = Some((prev, cur));
                break;
            }
            if cur.dphi.abs() <= -c2 * dphi0 {
                accepted = Some(cur);
                break;
            }
            if cur.dphi >= 0.0 {
                bracket = Some((cur, prev));
                break;
            }
            first = false;
            prev = cur;
            a *= 2.0;
        }

        if accepted.is_none() {
            if let Some((mut lo, mut hi)) = bracket {
                while evals < max_trials {
                    let aj = interpolate(&lo, &hi);
                    let cur = eval(aj, &mut evals)?;
                    if cur.f > f + c1 * aj * dphi0 || cur.f >= lo.f {
                        hi = cur;
                        continue;
                    }
                    if cur.dphi.abs() <= -c2 * dphi0 {
                        accepted = Some(cur);
                        break;
                    }
                    if cur.dphi * (hi.a - lo.a) >= 0.0 {
                        hi = lo;
                    }
                    lo = cur;
                }
            }
        }

        let Some(best) = accepted else {
            self.pairs.clear();
            return Err(Error::LineSearch { trials: evals });
        };

        let s: Vec<f64> = d.iter().map(|di| best.a * di).collect();
        let y: Vec<f64> = best.g.iter().zip(g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 {
            if self.pairs.len() == self.cfg.history {
                self.pairs.pop_front();
            }
            self.pairs.push_back(Pair { s: s.clone(), y, rho: 1.0 / sy });
        }
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        Ok(LbfgsOutcome {
            status: LbfgsStatus::Stepped {
                step: best.a,
                evaluations: evals,
            },
            f: best.f,
            g: best.g,
        })
    }
}

/// Minimizer of the quadratic through `lo` (value and slope) and `hi`
/// (value), kept inside the middle 80 % of the bracket.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let width = hi.a - lo.a;
    let mid = lo.a + 0.5 * width;
    let denom = 2.0 * (hi.f - lo.f - lo.dphi * width);
    let cand = if hi.f.is_finite() && denom > 0.0 {
        lo.a - lo.dphi * width * width / denom
    } else {
        mid
    };
    let (a, b) = if width > 0.0 {
        (lo.a + 0.1 * width, hi.a - 0.1 * width)
    } else {
        (hi.a - 0.1 * width, lo.a + 0.1 * width)
    };
    if cand.is_finite() && cand >= a.min(b) && cand <= a.max(b) {
        cand
    } else {
        mid
    }
}

/// `lr = base · γ^epoch`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialLr {
    pub base: f64,
    pub gamma: f64,
}

impl ExponentialLr {
    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "scheduler needs base > 0 and gamma in (0, 1], got {} and {}",
                self.base, self.gamma
            )));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.base * self.gamma.powi(epoch as i32)
    }
}

/// When to leave Adam for L-BFGS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchPolicy {
    EpochThreshold { epoch: usize },
    /// Fires when the loss improved by less than `rel` (relative) over the
    /// last `window` epochs.
    LossPlateau { window: usize, rel: f64 },
}

pub fn should_switch(policy: &SwitchPolicy, epoch: usize, history: &[f64]) -> bool {
    match *policy {
        SwitchPolicy::EpochThreshold { epoch: e } => epoch >= e,
        SwitchPolicy::LossPlateau { window, rel } => {
            let n = history.len();
            if window == 0 || n < window + 1 {
                return false;
            }
            let old = history[n - 1 - window];
            let new = history[n - 1];
            let improvement = if old.abs() > 0.0 { (old - new) / old.abs() } else { 0.0 };
            improvement < rel
        }
    }
}
