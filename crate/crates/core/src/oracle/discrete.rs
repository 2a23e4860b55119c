//! Exhaustive enumeration of hidden paths for the discrete-state models.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{
    ArStart, Boundary, DurationLaw, DurationModel, Emission, HmmModel, Model, SegmentEnd, SegmentalModel,
    TimeSeries, TransitionModel,
};

/// Largest number of feasible hidden paths enumerated.
pub const DISCRETE_GUARD: u128 = 10_000_000;

/// One hidden configuration as `(s, a, b)`; the meaning of `a` and `b` depends on the space.
pub type HiddenConfig = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenSpace {
    /// `(s, 0, 0)`
    Regime,
    /// `(s, m, 0)` with `m` the mixture component.
    RegimeComponent,
    /// `(s, c, 0)` with `c` the duration count.
    RegimeCount,
    /// `(s, d, c)`: segment duration and steps left in it.
    RegimeDurationCount,
}

#[derive(Debug, Clone)]
pub struct EnumerationReport {
    pub hidden_space: HiddenSpace,
    pub n_paths: u128,
    /// `log p(v_{1:T})` summed over the path tree in the log domain.
    pub log_normalizer: f64,
    /// The same sum over sorted per-path joints with pairwise addition.
    pub log_normalizer_pairwise: f64,
    /// `[t, s]`: `p(s_t | v_{1:T})`.
    pub regime_marginals: Array2<f64>,
    pub state_marginals: Vec<BTreeMap<HiddenConfig, f64>>,
    /// Most probable decoded path: regimes only for mixture emissions, full configurations otherwise.
    pub argmax_path: Vec<HiddenConfig>,
    pub argmax_log_joint: f64,
    /// Other decoded paths whose joint equals the maximum within 1e-12.
    pub ties: Vec<Vec<HiddenConfig>>,
}

impl EnumerationReport {
    pub fn argmax_regimes(&self) -> Vec<usize> {
        self.argmax_path.iter().map(|c| c.0).collect()
    }

    pub fn max_marginal_delta(&self, gamma: &Array2<f64>) -> f64 {
        if gamma.dim() != self.regime_marginals.dim() {
            return f64::INFINITY;
        }
        self.regime_marginals.iter().zip(gamma.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn marginal(&self, t: usize, config: HiddenConfig) -> f64 {
        self.state_marginals[t].get(&config).copied().unwrap_or(0.0)
    }
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_of(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn gaussian(x: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let r = DVector::from_column_slice(x) - mean;
    let inv = cov.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(cov.nrows(), cov.ncols(), f64::NAN));
    let q = (r.transpose() * inv * &r)[(0, 0)];
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + q)
}

fn scalar_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

struct Density<'a> {
    em: &'a Emission,
    series: &'a TimeSeries,
}

impl Density<'_> {
    fn component(&self, t: usize, s: usize, m: usize) -> f64 {
        match self.em {
            Emission::Gmm(g) => {
                let c = g.component(s, m);
                gaussian(self.series.row(t), c.mean(), c.cov())
            }
            _ => f64::NAN,
        }
    }

    fn order(&self) -> usize {
        match self.em {
            Emission::Ar(a) => a.order(),
            _ => 0,
        }
    }

    /// AR density of `v_t` using `lags` previous values.
    fn ar(&self, t: usize, s: usize, lags: usize) -> f64 {
        let Emission::Ar(a) = self.em else { return f64::NAN };
        let x = self.series.values();
        let mean: f64 = (1..=lags).map(|i| a.coeffs()[s][i - 1] * x[t - i]).sum();
        scalar_gaussian(x[t], mean, a.noise_var()[s])
    }

    /// Emission of a model whose context is not tied to the regime path.
    fn free(&self, t: usize, s: usize) -> f64 {
        match self.em {
            Emission::Gmm(g) => {
                let mut acc = f64::NEG_INFINITY;
                for m in 0..g.n_components() {
                    acc = lse2(acc, log_of(g.weights()[s][m]) + self.component(t, s, m));
                }
                acc
            }
            Emission::Ar(a) => {
                let k = a.order();
                if t >= k {
                    return self.ar(t, s, k);
                }
                match a.start() {
                    ArStart::Conditional => 0.0,
                    ArStart::Truncated => self.ar(t, s, t),
                    ArStart::Gaussian { mean, var } => scalar_gaussian(self.series.values()[t], mean, var),
                }
            }
            Emission::LinearGaussian(_) => f64::NAN,
        }
    }

    /// Emission when the AR context stops at the start of the current regime, `back` steps ago.
    fn cut(&self, t: usize, s: usize, back: usize) -> f64 {
        match self.em {
            Emission::Ar(_) => self.ar(t, s, self.order().min(back).min(t)),
            _ => self.free(t, s),
        }
    }
}

/// Tail mass `Σ_{i ≥ c} ρ_i` and mean of a regime's duration law.
fn survival(law: &DurationLaw, s: usize, c: usize) -> f64 {
    let spec = law.spec(s);
    (c..=spec.d_max()).map(|d| spec.rho(d)).sum()
}

fn mean_duration(law: &DurationLaw, s: usize) -> f64 {
    let spec = law.spec(s);
    (1..=spec.d_max()).map(|d| d as f64 * spec.rho(d)).sum()
}

trait PathFamily {
    fn space(&self) -> HiddenSpace;
    fn n_regimes(&self) -> usize;
    fn initial(&self) -> Vec<(HiddenConfig, f64)>;
    fn moves(&self, from: HiddenConfig) -> Vec<(HiddenConfig, f64)>;
    fn emit(&self, t: usize, at: HiddenConfig) -> f64;
    fn terminal(&self, _last: HiddenConfig) -> bool {
        true
    }
    fn project(&self, c: HiddenConfig) -> HiddenConfig {
        c
    }
}

struct HmmFamily<'a> {
    tr: &'a TransitionModel,
    d: Density<'a>,
}

impl PathFamily for HmmFamily<'_> {
    fn space(&self) -> HiddenSpace {
        match self.d.em {
            Emission::Gmm(_) => HiddenSpace::RegimeComponent,
            _ => HiddenSpace::Regime,
        }
    }

    fn n_regimes(&self) -> usize {
        self.tr.n_regimes()
    }

    fn initial(&self) -> Vec<(HiddenConfig, f64)> {
        let s_n = self.tr.n_regimes();
        match self.d.em {
            Emission::Gmm(g) => (0..s_n)
                .flat_map(|s| {
                    (0..g.n_components())
                        .map(move |m| ((s, m, 0), log_of(self.tr.initial()[s]) + log_of(g.weights()[s][m])))
                })
                .collect(),
            _ => (0..s_n).map(|s| ((s, 0, 0), log_of(self.tr.initial()[s]))).collect(),
        }
    }

    fn moves(&self, from: HiddenConfig) -> Vec<(HiddenConfig, f64)> {
        let s_n = self.tr.n_regimes();
        let sw = |s: usize| log_of(self.tr.switch()[[s, from.0]]);
        match self.d.em {
            Emission::Gmm(g) => {
                let mut out = Vec::new();
                for s in 0..s_n {
                    for m in 0..g.n_components() {
                        let pm = match g.chain() {
                            Some(ch) => ch[s][m][from.1],
                            None => g.weights()[s][m],
                        };
                        out.push(((s, m, 0), sw(s) + log_of(pm)));
                    }
                }
                out
            }
            _ => (0..s_n).map(|s| ((s, 0, 0), sw(s))).collect(),
        }
    }

    fn emit(&self, t: usize, at: HiddenConfig) -> f64 {
        match self.d.em {
            Emission::Gmm(_) => self.d.component(t, at.0, at.1),
            _ => self.d.free(t, at.0),
        }
    }

    fn project(&self, c: HiddenConfig) -> HiddenConfig {
        (c.0, 0, 0)
    }
}

struct DcFamily<'a> {
    m: &'a DurationModel,
    d: Density<'a>,
}

impl PathFamily for DcFamily<'_> {
    fn space(&self) -> HiddenSpace {
        HiddenSpace::RegimeCount
    }

    fn n_regimes(&self) -> usize {
        self.m.transition.n_regimes()
    }

    fn initial(&self) -> Vec<(HiddenConfig, f64)> {
        let law = &self.m.durations;
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            for c in 1..=law.d_max() {
                let p = match self.m.boundary {
                    Boundary::Relaxed => survival(law, s, c) / mean_duration(law, s),
                    Boundary::Strict => law.spec(s).rho(c),
                };
                out.push(((s, c, 0), log_of(self.m.transition.initial()[s] * p)));
            }
        }
        out
    }

    fn moves(&self, (sp, cp, _): HiddenConfig) -> Vec<(HiddenConfig, f64)> {
        if cp > 1 {
            return vec![((sp, cp - 1, 0), 0.0)];
        }
        let law = &self.m.durations;
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            for c in 1..=law.d_max() {
                out.push(((s, c, 0), log_of(self.m.transition.switch()[[s, sp]] * law.spec(s).rho(c))));
            }
        }
        out
    }

    fn emit(&self, t: usize, at: HiddenConfig) -> f64 {
        self.d.free(t, at.0)
    }
}

struct IcFamily<'a> {
    m: &'a DurationModel,
    d: Density<'a>,
}

impl PathFamily for IcFamily<'_> {
    fn space(&self) -> HiddenSpace {
        HiddenSpace::RegimeCount
    }

    fn n_regimes(&self) -> usize {
        self.m.transition.n_regimes()
    }

    fn initial(&self) -> Vec<(HiddenConfig, f64)> {
        let law = &self.m.durations;
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            for c in 1..=law.d_max() {
                let p = match self.m.boundary {
                    Boundary::Relaxed => survival(law, s, c) / mean_duration(law, s),
                    Boundary::Strict => f64::from(u8::from(c == 1)),
                };
                out.push(((s, c, 0), log_of(self.m.transition.initial()[s] * p)));
            }
        }
        out
    }

    fn moves(&self, (sp, cp, _): HiddenConfig) -> Vec<(HiddenConfig, f64)> {
        let law = &self.m.durations;
        let alive = survival(law, sp, cp);
        let stay = if alive > 0.0 { survival(law, sp, cp + 1) / alive } else { 0.0 };
        let mut out = Vec::new();
        if cp < law.d_max() {
            out.push(((sp, cp + 1, 0), log_of(stay)));
        }
        for s in 0..self.n_regimes() {
            out.push(((s, 1, 0), log_of((1.0 - stay) * self.m.transition.switch()[[s, sp]])));
        }
        out
    }

    fn emit(&self, t: usize, (s, c, _): HiddenConfig) -> f64 {
        if self.m.cut {
            self.d.cut(t, s, c - 1)
        } else {
            self.d.free(t, s)
        }
    }
}

struct SegFamily<'a> {
    m: &'a SegmentalModel,
    d: Density<'a>,
}

impl PathFamily for SegFamily<'_> {
    fn space(&self) -> HiddenSpace {
        HiddenSpace::RegimeDurationCount
    }

    fn n_regimes(&self) -> usize {
        self.m.transition.n_regimes()
    }

    fn initial(&self) -> Vec<(HiddenConfig, f64)> {
        let law = &self.m.durations;
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            for d in 1..=law.d_max() {
                for c in 1..=d {
                    let p = match self.m.boundary {
                        Boundary::Relaxed => law.spec(s).rho(d) / mean_duration(law, s),
                        Boundary::Strict if c == d => law.spec(s).rho(d),
                        Boundary::Strict => 0.0,
                    };
                    out.push(((s, d, c), log_of(self.m.transition.initial()[s] * p)));
                }
            }
        }
        out
    }

    fn moves(&self, (sp, dp, cp): HiddenConfig) -> Vec<(HiddenConfig, f64)> {
        if cp > 1 {
            return vec![((sp, dp, cp - 1), 0.0)];
        }
        let law = &self.m.durations;
        let mut out = Vec::new();
        for s in 0..self.n_regimes() {
            for d in 1..=law.d_max() {
                out.push(((s, d, d), log_of(self.m.transition.switch()[[s, sp]] * law.spec(s).rho(d))));
            }
        }
        out
    }

    fn emit(&self, t: usize, (s, d, c): HiddenConfig) -> f64 {
        self.d.cut(t, s, d - c)
    }

    fn terminal(&self, last: HiddenConfig) -> bool {
        self.m.end == SegmentEnd::Truncated || last.2 == 1
    }
}

/// Joint over every hidden path of `model`, summed and maximized by brute force.
pub fn enumerate_discrete(model: &Model, series: &TimeSeries) -> Result<EnumerationReport> {
    enumerate_discrete_with_guard(model, series, DISCRETE_GUARD)
}

pub fn enumerate_discrete_with_guard(model: &Model, series: &TimeSeries, guard: u128) -> Result<EnumerationReport> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    match model {
        Model::HmmGmm(m) | Model::Sarm(m) => run(&hmm_family(m, series), series.len(), guard),
        Model::DurationDc(m) => run(&DcFamily { m, d: Density { em: &m.emission, series } }, series.len(), guard),
        Model::DurationIc(m) => run(&IcFamily { m, d: Density { em: &m.emission, series } }, series.len(), guard),
        Model::Segmental(m) => run(&SegFamily { m, d: Density { em: &m.emission, series } }, series.len(), guard),
        Model::Slgssm(_) => Err(Error::Contract("use the mixture oracle for state-space models".into())),
    }
}

fn hmm_family<'a>(m: &'a HmmModel, series: &'a TimeSeries) -> HmmFamily<'a> {
    HmmFamily { tr: &m.transition, d: Density { em: &m.emission, series } }
}

fn count_paths<F: PathFamily>(f: &F, n: usize, guard: u128) -> Result<u128> {
    let mut live: BTreeMap<HiddenConfig, u128> = BTreeMap::new();
    for (c, lp) in f.initial() {
        if lp > f64::NEG_INFINITY {
            *live.entry(c).or_default() += 1;
        }
    }
    for _ in 1..n {
        let mut next: BTreeMap<HiddenConfig, u128> = BTreeMap::new();
        for (&c, &k) in &live {
            for (to, lp) in f.moves(c) {
                if lp > f64::NEG_INFINITY {
                    *next.entry(to).or_default() += k;
                }
            }
        }
        live = next;
        let total: u128 = live.values().sum();
        if total > guard {
            return Err(Error::GuardExceeded { count: total, limit: guard });
        }
    }
    Ok(live.iter().filter(|(c, _)| f.terminal(**c)).map(|(_, k)| k).sum())
}

fn tree_sum<F: PathFamily>(f: &F, n: usize, t: usize, at: HiddenConfig, lp: f64) -> f64 {
    let lp = lp + f.emit(t, at);
    if t + 1 == n {
        return if f.terminal(at) { lp } else { f64::NEG_INFINITY };
    }
    let mut acc = f64::NEG_INFINITY;
    for (to, w) in f.moves(at) {
        if w > f64::NEG_INFINITY {
            acc = lse2(acc, tree_sum(f, n, t + 1, to, lp + w));
        }
    }
    acc
}

fn leaves<F: PathFamily, C: FnMut(&[HiddenConfig], f64)>(
    f: &F,
    n: usize,
    path: &mut Vec<HiddenConfig>,
    lp: f64,
    visit: &mut C,
) {
    let t = path.len() - 1;
    let at = path[t];
    let lp = lp + f.emit(t, at);
    if t + 1 == n {
        if f.terminal(at) {
            visit(path, lp);
        }
        return;
    }
    for (to, w) in f.moves(at) {
        if w > f64::NEG_INFINITY {
            path.push(to);
            leaves(f, n, path, lp + w, visit);
            path.pop();
        }
    }
}

fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        k => pairwise(&xs[..k / 2]) + pairwise(&xs[k / 2..]),
    }
}

fn run<F: PathFamily>(f: &F, n: usize, guard: u128) -> Result<EnumerationReport> {
    let n_paths = count_paths(f, n, guard)?;
    let init: Vec<_> = f.initial().into_iter().filter(|(_, w)| *w > f64::NEG_INFINITY).collect();
    let mut z = f64::NEG_INFINITY;
    for &(c, w) in &init {
        z = lse2(z, tree_sum(f, n, 0, c, w));
    }
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(Error::NoValidPath("every hidden path has zero probability".into()));
    }
    let s_n = f.n_regimes();
    let mut regime_marginals = Array2::zeros((n, s_n));
    let mut state_marginals = vec![BTreeMap::new(); n];
    let mut joints = Vec::new();
    let mixture = f.space() == HiddenSpace::RegimeComponent;
    let mut decoded: HashMap<Vec<HiddenConfig>, f64> = HashMap::new();
    let mut order: Vec<Vec<HiddenConfig>> = Vec::new();
    let mut best: Vec<(Vec<HiddenConfig>, f64)> = Vec::new();
    let push_best = |p: Vec<HiddenConfig>, lj: f64, best: &mut Vec<(Vec<HiddenConfig>, f64)>| {
        match best.first() {
            Some((_, b)) if lj > *b + 1e-12 => *best = vec![(p, lj)],
            Some((_, b)) if lj >= *b - 1e-12 => best.push((p, lj)),
            None => best.push((p, lj)),
            _ => {}
        }
    };
    for &(c, w) in &init {
        let mut path = vec![c];
        leaves(f, n, &mut path, w, &mut |p, lj| {
            let q = (lj - z).exp();
            for (t, &cfg) in p.iter().enumerate() {
                regime_marginals[[t, cfg.0]] += q;
                *state_marginals[t].entry(cfg).or_insert(0.0) += q;
            }
            joints.push(lj);
            if mixture {
                let key: Vec<_> = p.iter().map(|&c| f.project(c)).collect();
                match decoded.get_mut(&key) {
                    Some(v) => *v = lse2(*v, lj),
                    None => {
                        order.push(key.clone());
                        decoded.insert(key, lj);
                    }
                }
            } else {
                push_best(p.to_vec(), lj, &mut best);
            }
        });
    }
    if mixture {
        for key in order {
            let lj = decoded[&key];
            push_best(key, lj, &mut best);
        }
    }
    joints.sort_by(f64::total_cmp);
    let top = joints.last().copied().unwrap_or(f64::NEG_INFINITY);
    let shifted: Vec<f64> = joints.iter().map(|j| (j - top).exp()).collect();
    let log_normalizer_pairwise = top + pairwise(&shifted).ln();
    // best[0] holds the first maximal path in enumeration order
    let mut best = best.into_iter();
    let (argmax_path, argmax_log_joint) = best.next().expect("at least one path");
    Ok(EnumerationReport {
        hidden_space: f.space(),
        n_paths,
        log_normalizer: z,
        log_normalizer_pairwise,
        regime_marginals,
        state_marginals,
        argmax_path,
        argmax_log_joint,
        ties: best.map(|(p, _)| p).collect(),
    })
}
