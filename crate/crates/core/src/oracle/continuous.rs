//! Exact Gaussian-mixture propagation for switching state-space models by walking every
//! configuration path.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DurationLaw, LinearGaussianRegime, SlgssmModel, SlgssmVariant, TimeSeries};

/// Largest number of configuration paths walked.
pub const CONTINUOUS_GUARD: u128 = 100_000;

/// A configuration `(s, c)`; `c = 1` for the plain variant.
pub type Config = (usize, usize);

/// One distinct Gaussian of the exact filtered mixture.
#[derive(Debug, Clone)]
pub struct OracleComponent {
    pub config: Config,
    /// 1-based time of the last reset, 1 if none occurred.
    pub reset_time: usize,
    /// Regimes visited since the reset.
    pub history: Vec<usize>,
    /// `p(σ_t, component | v_{1:t})`.
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Moment-matched belief of one configuration.
#[derive(Debug, Clone)]
pub struct ConfigMoments {
    pub config: Config,
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MixtureStep {
    pub components: Vec<OracleComponent>,
    pub collapsed: Vec<ConfigMoments>,
}

impl MixtureStep {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn moments(&self, config: Config) -> Option<&ConfigMoments> {
        self.collapsed.iter().find(|m| m.config == config)
    }
}

#[derive(Debug, Clone)]
pub struct MixtureReport {
    pub filtered: Vec<MixtureStep>,
    /// Per-configuration moments of `p(h_t | σ_t, v_{1:T})` with `p(σ_t | v_{1:T})`.
    pub smoothed: Vec<Vec<ConfigMoments>>,
    pub log_likelihood: f64,
    pub n_paths: u128,
}

impl MixtureReport {
    pub fn smoothed_moments(&self, t: usize, config: Config) -> Option<&ConfigMoments> {
        self.smoothed[t].iter().find(|m| m.config == config)
    }
}

struct Chain<'a> {
    model: &'a SlgssmModel,
}

fn surv(law: &DurationLaw, s: usize, c: usize) -> f64 {
    let spec = law.spec(s);
    (c..=spec.d_max()).map(|d| spec.rho(d)).sum()
}

fn mean_d(law: &DurationLaw, s: usize) -> f64 {
    let spec = law.spec(s);
    (1..=spec.d_max()).map(|d| d as f64 * spec.rho(d)).sum()
}

impl Chain<'_> {
    fn law(&self) -> &DurationLaw {
        self.model.durations.as_ref().expect("duration variants carry a law")
    }

    fn n_regimes(&self) -> usize {
        self.model.transition.n_regimes()
    }

    fn pi(&self, to: usize, from: usize) -> f64 {
        self.model.transition.switch()[[to, from]]
    }

    fn initial(&self) -> Vec<(Config, f64)> {
        let init = self.model.transition.initial();
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            match self.model.variant {
                SlgssmVariant::Plain | SlgssmVariant::ChangePoint => out.push(((s, 1), init[s])),
                _ => {
                    let law = self.law();
                    for c in 1..=law.d_max() {
                        out.push(((s, c), init[s] * surv(law, s, c) / mean_d(law, s)));
                    }
                }
            }
        }
        out
    }

    /// `(next configuration, probability, resets the hidden state)`.
    fn moves(&self, (sp, cp): Config) -> Vec<(Config, f64, bool)> {
        let s_n = self.n_regimes();
        let mut out = Vec::new();
        match self.model.variant {
            SlgssmVariant::Plain => {
                for s in 0..s_n {
                    out.push(((s, 1), self.pi(s, sp), false));
                }
            }
            SlgssmVariant::Dc | SlgssmVariant::DcReset => {
                if cp > 1 {
                    out.push(((sp, cp - 1), 1.0, false));
                } else {
                    let reset = self.model.variant == SlgssmVariant::DcReset;
                    let law = self.law();
                    for s in 0..s_n {
                        for c in 1..=law.d_max() {
                            out.push(((s, c), self.pi(s, sp) * law.spec(s).rho(c), reset));
                        }
                    }
                }
            }
            SlgssmVariant::IcReset => {
                let law = self.law();
                let alive = surv(law, sp, cp);
                let stay = if alive > 0.0 { surv(law, sp, cp + 1) / alive } else { 0.0 };
                if cp < law.d_max() {
                    out.push(((sp, cp + 1), stay, false));
                }
                for s in 0..s_n {
                    out.push(((s, 1), (1.0 - stay) * self.pi(s, sp), true));
                }
            }
            SlgssmVariant::ChangePoint => {
                for s in 0..s_n {
                    if s == sp {
                        out.push(((s, 2), self.pi(s, sp), false));
                    } else {
                        out.push(((s, 1), self.pi(s, sp), true));
                    }
                }
            }
        }
        out.retain(|m| m.1 > 0.0);
        out
    }
}

#[derive(Clone)]
struct Node {
    config: Config,
    reset: bool,
    reset_time: usize,
    history: Vec<usize>,
    log_w: f64,
    pred_mean: DVector<f64>,
    pred_cov: DMatrix<f64>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Textbook Kalman correction: returns posterior moments and `log N(v; B m, B P Bᵀ + R)`.
fn kalman_update(
    m: &DVector<f64>,
    p: &DMatrix<f64>,
    reg: &LinearGaussianRegime,
    v: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let b = &reg.observation;
    let s = b * p * b.transpose() + &reg.obs_cov;
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;
    let k = p * b.transpose() * &s_inv;
    let r = DVector::from_column_slice(v) - b * m;
    let mean = m + &k * &r;
    let cov = (DMatrix::identity(p.nrows(), p.ncols()) - &k * b) * p;
    let cov = (&cov + cov.transpose()) * 0.5;
    let q = (r.transpose() * &s_inv * &r)[(0, 0)];
    let ll = -0.5 * (v.len() as f64 * (2.0 * std::f64::consts::PI).ln() + s.determinant().ln() + q);
    Ok((mean, cov, ll))
}

fn count_paths(chain: &Chain, n: usize, guard: u128) -> Result<u128> {
    let mut live: BTreeMap<Config, u128> = BTreeMap::new();
    for (c, p) in chain.initial() {
        if p > 0.0 {
            *live.entry(c).or_default() += 1;
        }
    }
    for _ in 1..n {
        let mut next: BTreeMap<Config, u128> = BTreeMap::new();
        for (&c, &k) in &live {
            for (to, _, _) in chain.moves(c) {
                *next.entry(to).or_default() += k;
            }
        }
        live = next;
        let total: u128 = live.values().sum();
        if total > guard {
            return Err(Error::GuardExceeded { count: total, limit: guard });
        }
    }
    Ok(live.values().sum())
}

type Key = (Config, usize, Vec<usize>);

struct Walk<'a> {
    chain: Chain<'a>,
    series: &'a TimeSeries,
    /// Per t: distinct Gaussians keyed by configuration, reset time and regime history.
    filtered: Vec<BTreeMap<Key, (f64, DVector<f64>, DMatrix<f64>)>>,
    /// Per t and configuration: `(log joint of the full path, smoothed mean, smoothed cov)`.
    smoothed: Vec<BTreeMap<Config, Vec<(f64, DVector<f64>, DMatrix<f64>)>>>,
}

impl Walk<'_> {
    fn regime(&self, s: usize) -> &LinearGaussianRegime {
        self.chain.model.emission.regime(s)
    }

    fn visit(&mut self, path: &mut Vec<Node>) -> Result<()> {
        let t = path.len() - 1;
        let node = path[t].clone();
        let key = (node.config, node.reset_time, node.history.clone());
        let lw = node.log_w;
        self.filtered[t]
            .entry(key)
            .and_modify(|e| e.0 = log_add(e.0, lw))
            .or_insert((lw, node.mean.clone(), node.cov.clone()));
        if t + 1 == self.series.len() {
            self.smooth_path(path);
            return Ok(());
        }
        for (to, p, reset) in self.chain.moves(node.config) {
            let reg = self.regime(to.0);
            let (pm, pp) = if reset {
                (reg.reset_mean.clone(), reg.reset_cov.clone())
            } else {
                let a = &reg.transition;
                (a * &node.mean, a * &node.cov * a.transpose() + &reg.process_cov)
            };
            let (mean, cov, ll) = kalman_update(&pm, &pp, reg, self.series.row(t + 1))?;
            let (reset_time, history) = if reset {
                (t + 2, vec![to.0])
            } else {
                let mut h = node.history.clone();
                if *h.last().expect("non-empty") != to.0 {
                    h.push(to.0);
                }
                (node.reset_time, h)
            };
            path.push(Node {
                config: to,
                reset,
                reset_time,
                history,
                log_w: node.log_w + p.ln() + ll,
                pred_mean: pm,
                pred_cov: pp,
                mean,
                cov,
            });
            self.visit(path)?;
            path.pop();
        }
        Ok(())
    }

    /// Rauch-Tung-Striebel pass along one path, restarting at resets.
    fn smooth_path(&mut self, path: &[Node]) {
        let n = path.len();
        let lw = path[n - 1].log_w;
        let mut m = path[n - 1].mean.clone();
        let mut p = path[n - 1].cov.clone();
        self.smoothed[n - 1].entry(path[n - 1].config).or_default().push((lw, m.clone(), p.clone()));
        for t in (0..n - 1).rev() {
            let next = &path[t + 1];
            let cur = &path[t];
            if next.reset {
                m = cur.mean.clone();
                p = cur.cov.clone();
            } else {
                let a = &self.regime(next.config.0).transition;
                let pinv = next.pred_cov.clone().try_inverse().expect("predicted covariance is PD");
                let j = &cur.cov * a.transpose() * pinv;
                m = &cur.mean + &j * (&m - &next.pred_mean);
                p = &cur.cov + &j * (&p - &next.pred_cov) * j.transpose();
                p = (&p + p.transpose()) * 0.5;
            }
            self.smoothed[t].entry(cur.config).or_default().push((lw, m.clone(), p.clone()));
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn moments(config: Config, items: &[(f64, &DVector<f64>, &DMatrix<f64>)], z: f64) -> ConfigMoments {
    let w: Vec<f64> = items.iter().map(|(l, _, _)| (l - z).exp()).collect();
    let tot: f64 = w.iter().sum();
    let mut mean = items[0].1 * 0.0;
    for (wi, (_, m, _)) in w.iter().zip(items) {
        mean += *m * (wi / tot);
    }
    let mut cov = items[0].2 * 0.0;
    for (wi, (_, m, p)) in w.iter().zip(items) {
        let d = *m - &mean;
        cov += (*p + &d * d.transpose()) * (wi / tot);
    }
    ConfigMoments { config, weight: tot, mean, cov }
}

/// Every configuration path propagated without collapse, with exact filtered mixtures and exact
/// per-configuration smoothed moments.
pub fn exact_mixture_filter(model: &SlgssmModel, series: &TimeSeries) -> Result<MixtureReport> {
    exact_mixture_filter_with_guard(model, series, CONTINUOUS_GUARD)
}

pub fn exact_mixture_filter_with_guard(model: &SlgssmModel, series: &TimeSeries, guard: u128) -> Result<MixtureReport> {
    let n = series.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let chain = Chain { model };
    let n_paths = count_paths(&chain, n, guard)?;
    let init = chain.initial();
    let mut walk = Walk {
        chain,
        series,
        filtered: vec![BTreeMap::new(); n],
        smoothed: vec![BTreeMap::new(); n],
    };
    for (config, p) in init {
        if p <= 0.0 {
            continue;
        }
        let reg = model.emission.regime(config.0);
        let (mean, cov, ll) = kalman_update(&reg.reset_mean, &reg.reset_cov, reg, series.row(0))?;
        let mut path = vec![Node {
            config,
            reset: true,
            reset_time: 1,
            history: vec![config.0],
            log_w: p.ln() + ll,
            pred_mean: reg.reset_mean.clone(),
            pred_cov: reg.reset_cov.clone(),
            mean,
            cov,
        }];
        walk.visit(&mut path)?;
    }
    let mut filtered = Vec::with_capacity(n);
    let mut log_likelihood = f64::NEG_INFINITY;
    for (t, groups) in walk.filtered.iter().enumerate() {
        let z = groups.values().fold(f64::NEG_INFINITY, |acc, (l, _, _)| log_add(acc, *l));
        if t + 1 == n {
            log_likelihood = z;
        }
        let components = groups
            .iter()
            .map(|((config, reset_time, history), (l, m, p))| OracleComponent {
                config: *config,
                reset_time: *reset_time,
                history: history.clone(),
                weight: (l - z).exp(),
                mean: m.clone(),
                cov: p.clone(),
            })
            .collect();
        let mut by_config: BTreeMap<Config, Vec<(f64, &DVector<f64>, &DMatrix<f64>)>> = BTreeMap::new();
        for ((config, _, _), (l, m, p)) in groups {
            by_config.entry(*config).or_default().push((*l, m, p));
        }
        let collapsed = by_config.iter().map(|(c, items)| moments(*c, items, z)).collect();
        filtered.push(MixtureStep { components, collapsed });
    }
    let smoothed = walk
        .smoothed
        .iter()
        .map(|groups| {
            groups
                .iter()
                .map(|(c, items)| {
                    let refs: Vec<_> = items.iter().map(|(l, m, p)| (*l, m, p)).collect();
                    moments(*c, &refs, log_likelihood)
                })
                .collect()
        })
        .collect();
    Ok(MixtureReport { filtered, smoothed, log_likelihood, n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearGaussianEmission, TransitionModel};

    fn scalar(a: f64, mu: f64) -> LinearGaussianRegime {
        LinearGaussianRegime {
            transition: DMatrix::from_element(1, 1, a),
            observation: DMatrix::from_element(1, 1, 1.0),
            process_cov: DMatrix::from_element(1, 1, 1.0),
            obs_cov: DMatrix::from_element(1, 1, 1.0),
            reset_mean: DVector::from_element(1, mu),
            reset_cov: DMatrix::from_element(1, 1, 1.0),
        }
    }

    #[test]
    fn two_steps_two_regimes_by_hand() {
        let tr = TransitionModel::from_rows(vec![0.5, 0.5], &[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let em = LinearGaussianEmission::new(vec![scalar(1.0, 0.0), scalar(0.5, 0.0)]).unwrap();
        let m = SlgssmModel::new(tr, em, None, SlgssmVariant::Plain).unwrap();
        let v = TimeSeries::univariate(vec![2.0, 1.0]).unwrap();
        let r = exact_mixture_filter(&m, &v).unwrap();
        assert_eq!(r.filtered[0].n_components(), 2);
        assert_eq!(r.filtered[1].n_components(), 4);
        // h_1 | v_1 = N(1, 1/2) in both regimes; p(v_1) = N(2; 0, 2)
        let l1 = -0.5 * ((2.0 * std::f64::consts::PI * 2.0).ln() + 2.0);
        let pi = [[0.9, 0.1], [0.2, 0.8]];
        let mut joint = [[0.0; 2]; 2];
        for (i, row) in joint.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let a = [1.0, 0.5][j];
                let (mp, vp) = (a * 1.0, a * a * 0.5 + 1.0);
                let l2 = -0.5 * ((2.0 * std::f64::consts::PI * (vp + 1.0)).ln() + (1.0 - mp) * (1.0 - mp) / (vp + 1.0));
                *x = 0.5 * l1.exp() * pi[i][j] * l2.exp();
            }
        }
        let z: f64 = joint.iter().flatten().sum();
        assert!((r.log_likelihood - z.ln()).abs() < 1e-12);
        for c in &r.filtered[1].components {
            let (i, j) = (c.history[0], c.config.0);
            assert!((c.weight - joint[i][j] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn single_regime_is_one_kalman_component() {
        let tr = TransitionModel::from_rows(vec![1.0], &[vec![1.0]]).unwrap();
        let em = LinearGaussianEmission::new(vec![scalar(0.8, 0.3)]).unwrap();
        let m = SlgssmModel::new(tr, em, None, SlgssmVariant::Plain).unwrap();
        let v = TimeSeries::univariate(vec![0.5, -0.1, 0.7]).unwrap();
        let r = exact_mixture_filter(&m, &v).unwrap();
        assert!(r.filtered.iter().all(|s| s.n_components() == 1));
        assert_eq!(r.n_paths, 1);
    }
}
