//! Growth rates of `x' = (A + α(t) B K) x` under piecewise-constant signals.
//!
//! Per-signal quantities come from the monodromy matrix of a periodic signal.
//! Worst-case rates are minimized over explicit finite signal families, so the
//! reported `rc`/`rd` values are upper bounds on the true worst-case rates.
//!
//! Fundamental solutions are accumulated by left multiplication, segment by
//! segment. The inverse monodromy is built the same way from the backward
//! exponentials of the reversed segment list. With this convention the
//! monodromy of `(−A, −B, K)` under the reversed signal is bitwise equal to
//! the inverse monodromy of `(A, B, K)`, which makes the duality identities
//! exact in floating point.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    self, basis_column, eigenvalues, expm, multiset_residual, opnorm, parity, require_square,
    shift, Complex64, Matrix,
};
use crate::signals::{reverse, validate_pe, PESignal, Segment, SignalClass};

/// The closed-loop family `A + v·BK`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackSystem {
    pub a: Matrix,
    pub bk: Matrix,
}

impl FeedbackSystem {
    pub fn new(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<Self> {
        let d = require_square(a, "A")?;
        if b.nrows() != d || k.ncols() != d || k.nrows() != b.ncols() {
            return Err(Error::Shape(format!(
                "A is {d}x{d}, B is {}x{}, K is {}x{}",
                b.nrows(),
                b.ncols(),
                k.nrows(),
                k.ncols()
            )));
        }
        Ok(Self {
            a: a.clone(),
            bk: b * k,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn generator(&self, v: f64) -> Matrix {
        &self.a + &self.bk * v
    }

    /// `(−A, −B, K)`.
    pub fn negated(&self) -> Self {
        Self {
            a: -&self.a,
            bk: -&self.bk,
        }
    }

    /// `(A + λI, B, K)`.
    pub fn shifted(&self, lambda: f64) -> Self {
        let d = self.dim();
        Self {
            a: &self.a + Matrix::identity(d, d) * lambda,
            bk: self.bk.clone(),
        }
    }

    /// `(PAP⁻¹, PBV⁻¹, VKP⁻¹)`.
    pub fn transformed(a: &Matrix, b: &Matrix, k: &Matrix, p: &Matrix, v: &Matrix) -> Result<Self> {
        let pi = invert(p, "P")?;
        let vi = invert(v, "V")?;
        Self::new(&(p * a * &pi), &(p * b * &vi), &(v * k * &pi))
    }
}

fn invert(m: &Matrix, what: &str) -> Result<Matrix> {
    require_square(m, what)?;
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput(format!("{what} is not invertible")))
}

fn propagate(sys: &FeedbackSystem, pieces: &[Segment], direction: f64) -> Result<Matrix> {
    let d = sys.dim();
    let mut r = Matrix::identity(d, d);
    for s in pieces {
        r = expm(&sys.generator(s.value), direction * s.duration)? * r;
    }
    Ok(r)
}

/// Solution of `R' = (A + α BK) R`, `R(0) = I`, at time `t`.
pub fn fundamental_solution(sys: &FeedbackSystem, s: &PESignal, t: f64) -> Result<Matrix> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time {t} must be nonnegative")));
    }
    if Some(t) == s.period() {
        return propagate(sys, s.segments(), 1.0);
    }
    propagate(sys, &s.pieces(0.0, t), 1.0)
}

/// Fundamental solution over one period together with its inverse.
#[derive(Clone, Debug)]
pub struct Monodromy {
    pub r: Matrix,
    pub r_inv: Matrix,
    pub tau: f64,
    pub top_rate: f64,
    pub bottom_rate: f64,
}

pub fn monodromy(sys: &FeedbackSystem, s: &PESignal) -> Result<Monodromy> {
    let tau = s
        .period()
        .ok_or_else(|| Error::Precondition("monodromy needs a periodic signal".into()))?;
    let r = propagate(sys, s.segments(), 1.0)?;
    let mut backward: Vec<Segment> = s.segments().to_vec();
    backward.reverse();
    let r_inv = propagate(sys, &backward, -1.0)?;
    let rho = matcore::spectral_radius(&r)?;
    let rho_inv = matcore::spectral_radius(&r_inv)?;
    if !(rho > 0.0 && rho.is_finite() && rho_inv > 0.0 && rho_inv.is_finite()) {
        return Err(Error::Numerical(format!(
            "monodromy spectral radii {rho:e} and {rho_inv:e} out of range"
        )));
    }
    Ok(Monodromy {
        top_rate: rho.ln() / tau,
        bottom_rate: -(rho_inv.ln() / tau),
        r,
        r_inv,
        tau,
    })
}

impl Monodromy {
    pub fn spectrum(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.r)
    }
}

fn unit(x0: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x0.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput(
            "initial state must be a finite nonzero vector".into(),
        ));
    }
    Ok(x0 / n)
}

/// Upper and lower Lyapunov exponents `(λ⁺, λ⁻)` of the trajectory from `x0`.
///
/// Periodic signals give the exact exponent from the monodromy eigenstructure
/// (both values coincide). Aperiodic signals fall back to
/// [`finite_horizon_exponents`].
pub fn lyap_exponents(
    x0: &DVector<f64>,
    sys: &FeedbackSystem,
    s: &PESignal,
    horizon: f64,
) -> Result<(f64, f64)> {
    if s.is_periodic() {
        let m = monodromy(sys, s)?;
        let e = monodromy_exponent(&m, x0)?;
        Ok((e, e))
    } else {
        finite_horizon_exponents(x0, sys, s, horizon)
    }
}

/// Exponent `(1/τ) log|μ|` of the largest-modulus eigenvalue `μ` of the
/// monodromy whose generalized eigenspace meets `x0`.
pub fn monodromy_exponent(m: &Monodromy, x0: &DVector<f64>) -> Result<f64> {
    let x = unit(x0)?;
    let d = m.r.nrows();
    if x.len() != d {
        return Err(Error::Shape(format!(
            "x0 has length {}, expected {d}",
            x.len()
        )));
    }
    let mut eig = eigenvalues(&m.r)?;
    eig.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let rc = m.r.map(|v| Complex64::new(v, 0.0));
    let xc = x.map(|v| Complex64::new(v, 0.0));
    let id = DMatrix::<Complex64>::identity(d, d);
    let mut level_start = 0;
    while level_start < d {
        let level = eig[level_start].norm();
        let tol = 1e-9 * (1.0 + level);
        let level_end = eig[level_start..]
            .iter()
            .position(|z| (z.norm() - level).abs() > tol)
            .map_or(d, |p| level_start + p);
        // Annihilate the lower part of the spectrum; what survives lives in the
        // generalized eigenspaces of this level and above.
        let mut proj = id.clone();
        for z in &eig[level_end..] {
            proj = (&rc - &id * *z) * proj;
        }
        let scale = proj.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let hit = (&proj * &xc).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if level_end == d || hit > 1e-9 * scale {
            return Ok(level.ln() / m.tau);
        }
        level_start = level_end;
    }
    unreachable!("the bottom level always accepts")
}

/// Powers `R^(2^j)` stored as a unit-norm matrix and a log scale.
struct ScaledPowers {
    mats: Vec<(Matrix, f64)>,
}

impl ScaledPowers {
    fn new(r: Matrix) -> Self {
        let n = r.norm();
        Self {
            mats: vec![(r / n, n.ln())],
        }
    }

    /// Replace `x` by `Rⁿ x / |Rⁿ x|` and add `log|Rⁿ x|` to `log_norm`.
    fn apply(&mut self, mut n: u64, x: &mut DVector<f64>, log_norm: &mut f64) {
        let mut j = 0;
        while n > 0 {
            if j == self.mats.len() {
                let (m, l) = &self.mats[j - 1];
                let sq = m * m;
                let s = sq.norm();
                self.mats.push((sq / s, 2.0 * l + s.ln()));
            }
            if n & 1 == 1 {
                let (m, l) = &self.mats[j];
                *x = m * &*x;
                let s = x.norm();
                *log_norm += l + s.ln();
                *x /= s;
            }
            n >>= 1;
            j += 1;
        }
    }
}

/// `(max, min)` of `(1/t) log|x(t)|` over the geometric sample times
/// `horizon/8, horizon/4, horizon/2, horizon`. The state is renormalized after
/// every step and its log-norm accumulated.
pub fn finite_horizon_exponents(
    x0: &DVector<f64>,
    sys: &FeedbackSystem,
    s: &PESignal,
    horizon: f64,
) -> Result<(f64, f64)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let mut x = unit(x0)?;
    if x.len() != sys.dim() {
        return Err(Error::Shape(format!(
            "x0 has length {}, expected {}",
            x.len(),
            sys.dim()
        )));
    }
    let samples: Vec<f64> = (0..4).rev().map(|j| horizon / f64::powi(2.0, j)).collect();
    let mut log_norm = 0.0;
    let mut now = 0.0;
    let mut stats = (f64::NEG_INFINITY, f64::INFINITY);
    let mut period_map = match s.period() {
        Some(p) => Some((p, ScaledPowers::new(fundamental_solution(sys, s, p)?))),
        None => None,
    };
    let advance = |x: &mut DVector<f64>, log_norm: &mut f64, a: f64, b: f64| -> Result<()> {
        for piece in s.pieces(a, b) {
            *x = expm(&sys.generator(piece.value), piece.duration)? * &*x;
            let n = x.norm();
            *log_norm += n.ln();
            *x /= n;
        }
        Ok(())
    };
    for &target in &samples {
        match &mut period_map {
            Some((p, powers)) if target - now > 2.0 * *p => {
                let p = *p;
                // Finish the current period, jump whole periods, then the rest.
                let boundary = ((now / p).floor() + 1.0) * p;
                advance(&mut x, &mut log_norm, now, boundary)?;
                let whole = ((target - boundary) / p).floor() as u64;
                powers.apply(whole, &mut x, &mut log_norm);
                let reached = boundary + whole as f64 * p;
                advance(&mut x, &mut log_norm, reached, target)?;
            }
            _ => advance(&mut x, &mut log_norm, now, target)?,
        }
        now = target;
        let e = log_norm / target;
        stats = (stats.0.max(e), stats.1.min(e));
    }
    Ok(stats)
}

/// How a rate estimate relates to the true worst-case rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Upper,
    Lower,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub bound: Bound,
    pub witness: Option<PESignal>,
    pub method: String,
}

/// Parameters of the bang-bang search family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    /// Periods range over `T, 2T, …, N·T`.
    pub max_period_multiple: usize,
    pub max_switches: usize,
    /// Switching-grid cells per window length `T`.
    pub grid: usize,
    /// Number of admissible random candidates.
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_period_multiple: 4,
            max_switches: 6,
            grid: 8,
            samples: 64,
            refine_rounds: 2,
            seed: 0,
        }
    }
}

/// An explicit finite list of periodic candidate signals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SignalFamily {
    pub signals: Vec<PESignal>,
}

impl SignalFamily {
    pub fn new(signals: Vec<PESignal>) -> Self {
        Self { signals }
    }

    /// Constant signals on an evenly spaced grid of `n` values in `[μ/T, 1]`.
    pub fn constants(cls: &SignalClass, n: usize) -> Result<Self> {
        let lo = cls.floor_value();
        let signals = (0..n)
            .map(|i| {
                let v = if n == 1 {
                    lo
                } else if i + 1 == n {
                    1.0
                } else {
                    lo + (1.0 - lo) * i as f64 / (n - 1) as f64
                };
                PESignal::constant(v, cls.t)
            })
            .collect::<Result<_>>()?;
        Ok(Self { signals })
    }

    /// The two boundary constants followed by `budget.samples` admissible
    /// random bang-bang signals on the switching grid.
    pub fn bang_bang(cls: &SignalClass, budget: &SearchBudget) -> Result<Self> {
        check_budget(budget)?;
        let mut signals = vec![
            PESignal::constant(cls.floor_value(), cls.t)?,
            PESignal::constant(1.0, cls.t)?,
        ];
        let max_attempts = 1000 * budget.samples.max(1) as u64;
        let mut found = 0;
        let mut stream = 0u64;
        while found < budget.samples && stream < max_attempts {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            rng.set_stream(stream);
            stream += 1;
            let s = random_bang_bang(&mut rng, cls, budget)?;
            if validate_pe(&s, cls, None)?.valid {
                signals.push(s);
                found += 1;
            }
        }
        if found < budget.samples {
            return Err(Error::Numerical(format!(
                "only {found} of {} admissible candidates found",
                budget.samples
            )));
        }
        Ok(Self { signals })
    }

    /// The family of time-reversed signals.
    pub fn mirrored(&self) -> Result<Self> {
        let signals = self.signals.iter().map(reverse).collect::<Result<_>>()?;
        Ok(Self { signals })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

fn check_budget(b: &SearchBudget) -> Result<()> {
    if b.max_period_multiple == 0 || b.max_switches == 0 || b.grid == 0 {
        return Err(Error::InvalidInput(
            "search budget needs positive period multiple, switch count and grid".into(),
        ));
    }
    Ok(())
}

fn levels(cls: &SignalClass) -> [f64; 3] {
    [0.0, 1.0, cls.floor_value()]
}

/// Random periodic signal on the switching grid with values in
/// `{0, 1, μ/T}`, a period in `{T, …, N·T}` and at most `n_sw` switches.
pub fn random_bang_bang<R: Rng + ?Sized>(
    rng: &mut R,
    cls: &SignalClass,
    budget: &SearchBudget,
) -> Result<PESignal> {
    let m = rng.random_range(1..=budget.max_period_multiple);
    let cells = m * budget.grid;
    let pieces = rng.random_range(1..=budget.max_switches.min(cells));
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, cells - 1, pieces - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(cells);
    let h = cls.t / budget.grid as f64;
    let vals = levels(cls);
    let mut prev = usize::MAX;
    let mut last = 0;
    let mut segments = Vec::with_capacity(pieces);
    for &c in &cuts {
        let mut pick = rng.random_range(0..vals.len());
        if pick == prev {
            pick = (pick + 1 + rng.random_range(0..vals.len() - 1)) % vals.len();
        }
        prev = pick;
        segments.push(Segment::new((c - last) as f64 * h, vals[pick]));
        last = c;
    }
    PESignal::periodic_with(segments, m as f64 * cls.t)
}

/// Per-signal rates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalRates {
    pub signal_id: usize,
    pub period: f64,
    pub top_rate: f64,
    pub bottom_rate: f64,
}

/// Monodromy rates for every signal of the family, in family order. Signals
/// failing the excitation test get `None`. Runs on the current rayon pool.
pub fn evaluate_family(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<Vec<Option<SignalRates>>> {
    family
        .signals
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if !s.is_periodic() || !validate_pe(s, cls, None)?.valid {
                return Ok(None);
            }
            let m = monodromy(sys, s)?;
            Ok(Some(SignalRates {
                signal_id: i,
                period: m.tau,
                top_rate: m.top_rate,
                bottom_rate: m.bottom_rate,
            }))
        })
        .collect()
}

fn encoding_cmp(a: &PESignal, b: &PESignal) -> Ordering {
    let key = |s: &PESignal| -> Vec<u64> {
        s.segments()
            .iter()
            .flat_map(|g| [g.duration.to_bits(), g.value.to_bits()])
            .collect()
    };
    key(a).cmp(&key(b))
}

/// Deterministic argmin by `(value, signal encoding)`.
fn argmin(
    family: &SignalFamily,
    rows: &[Option<SignalRates>],
    objective: impl Fn(&SignalRates) -> f64,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for r in rows.iter().flatten() {
        let v = objective(r);
        if v.is_nan() {
            return Err(Error::Numerical(format!(
                "rate of signal {} is NaN",
                r.signal_id
            )));
        }
        let better = match best {
            None => true,
            Some((bv, bi)) => match v.total_cmp(&bv) {
                Ordering::Less => true,
                Ordering::Equal => {
                    encoding_cmp(&family.signals[r.signal_id], &family.signals[bi]).is_lt()
                }
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((v, r.signal_id));
        }
    }
    best.ok_or(Error::EmptyFamily)
}

/// Which worst-case rate to estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `rc`: the minimum over signals of `−top_rate`.
    Convergence,
    /// `rd`: the minimum over signals of `bottom_rate`.
    Divergence,
}

impl Objective {
    fn of(self, r: &SignalRates) -> f64 {
        match self {
            Objective::Convergence => -r.top_rate,
            Objective::Divergence => r.bottom_rate,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Objective::Convergence => "rc",
            Objective::Divergence => "rd",
        }
    }
}

fn family_estimate(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
    objective: Objective,
) -> Result<RateEstimate> {
    let rows = evaluate_family(sys, cls, family)?;
    let (value, idx) = argmin(family, &rows, |r| objective.of(r))?;
    Ok(RateEstimate {
        value,
        bound: Bound::Upper,
        witness: Some(family.signals[idx].clone()),
        method: format!("{}:family[{}]", objective.tag(), family.len()),
    })
}

/// Worst-case rate of convergence over the family (an upper bound on `rc`).
pub fn rc_estimate(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<RateEstimate> {
    family_estimate(sys, cls, family, Objective::Convergence)
}

/// Worst-case rate of divergence over the family (an upper bound on `rd`).
pub fn rd_estimate(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<RateEstimate> {
    family_estimate(sys, cls, family, Objective::Divergence)
}

/// Neighbours of a signal: every interior switch moved by `±step`, and every
/// segment value replaced by another level.
fn neighbours(s: &PESignal, cls: &SignalClass, step: f64) -> Vec<PESignal> {
    let segs = s.segments();
    let period = s.period().expect("search signals are periodic");
    let mut out = Vec::new();
    for j in 0..segs.len().saturating_sub(1) {
        for delta in [-step, step] {
            let mut next = segs.to_vec();
            next[j].duration += delta;
            next[j + 1].duration -= delta;
            if next[j].duration > 0.0 && next[j + 1].duration > 0.0 {
                if let Ok(c) = PESignal::periodic_with(next, period) {
                    out.push(c);
                }
            }
        }
    }
    for j in 0..segs.len() {
        for v in levels(cls) {
            if v != segs[j].value {
                let mut next = segs.to_vec();
                next[j].value = v;
                if let Ok(c) = PESignal::periodic_with(next, period) {
                    out.push(c.simplified());
                }
            }
        }
    }
    out
}

/// Bang-bang search with local refinement. Starts from
/// [`SignalFamily::bang_bang`], then for `refine_rounds` rounds perturbs the
/// best few candidates with a halving switching step and keeps what improves.
pub fn search_estimate(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    budget: &SearchBudget,
    objective: Objective,
) -> Result<(RateEstimate, SignalFamily)> {
    const ELITE: usize = 4;
    let mut family = SignalFamily::bang_bang(cls, budget)?;
    let mut rows = evaluate_family(sys, cls, &family)?;
    let mut step = cls.t / budget.grid as f64;
    for _ in 0..budget.refine_rounds {
        step /= 2.0;
        let mut ranked: Vec<&SignalRates> = rows.iter().flatten().collect();
        ranked.sort_by(|a, b| {
            objective.of(a).total_cmp(&objective.of(b)).then_with(|| {
                encoding_cmp(&family.signals[a.signal_id], &family.signals[b.signal_id])
            })
        });
        let mut extra = SignalFamily::default();
        for r in ranked.iter().take(ELITE) {
            for c in neighbours(&family.signals[r.signal_id], cls, step) {
                if !family.signals.contains(&c) && !extra.signals.contains(&c) {
                    extra.signals.push(c);
                }
            }
        }
        let base = family.len();
        let new_rows = evaluate_family(sys, cls, &extra)?;
        family.signals.extend(extra.signals);
        rows.extend(new_rows.into_iter().map(|r| {
            r.map(|mut r| {
                r.signal_id += base;
                r
            })
        }));
    }
    let (value, idx) = argmin(&family, &rows, |r| objective.of(r))?;
    let estimate = RateEstimate {
        value,
        bound: Bound::Upper,
        witness: Some(family.signals[idx].clone()),
        method: format!("{}:search[{}]", objective.tag(), family.len()),
    };
    Ok((estimate, family))
}

/// Per-signal line of a duality check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualityRow {
    pub signal_id: usize,
    pub period: f64,
    pub top_rate: f64,
    pub bottom_rate: f64,
    /// Bottom rate of `(−A, −B, K)` under the reversed signal.
    pub dual_bottom_rate: f64,
    /// `‖R(τ; −A, −B, K, α₋) R(τ; A, B, K, α) − I‖`.
    pub inversion_residual: f64,
    /// Whether `dual_bottom_rate == −top_rate` holds bitwise.
    pub negation_exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualityReport {
    pub rows: Vec<DualityRow>,
    pub max_residual: f64,
    pub rc: RateEstimate,
    pub rd_dual: RateEstimate,
    /// `rc(A,B,K,S)` and `rd(−A,−B,K,S₋)` agree bitwise.
    pub aggregate_equal: bool,
    /// Signals whose inversion residual exceeds the tolerance.
    pub violations: Vec<usize>,
}

pub const DUALITY_TOL: f64 = 1e-8;

/// Time-reversal duality between `(A, B, K)` and `(−A, −B, K)` on a family.
pub fn duality_check(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<DualityReport> {
    let d = sys.dim();
    for (i, s) in family.signals.iter().enumerate() {
        if !s.is_periodic() || !validate_pe(s, cls, None)?.valid {
            return Err(Error::Precondition(format!(
                "signal {i} is not a periodic admissible signal"
            )));
        }
    }
    let neg = sys.negated();
    let mirrored = family.mirrored()?;
    let rows: Vec<DualityRow> = family
        .signals
        .par_iter()
        .zip(mirrored.signals.par_iter())
        .enumerate()
        .map(|(i, (s, r))| {
            let fwd = monodromy(sys, s)?;
            let bwd = monodromy(&neg, r)?;
            let residual = opnorm(&(&bwd.r * &fwd.r - Matrix::identity(d, d)));
            Ok(DualityRow {
                signal_id: i,
                period: fwd.tau,
                top_rate: fwd.top_rate,
                bottom_rate: fwd.bottom_rate,
                dual_bottom_rate: bwd.bottom_rate,
                inversion_residual: residual,
                negation_exact: bwd.bottom_rate == -fwd.top_rate,
            })
        })
        .collect::<Result<_>>()?;
    let max_residual = rows
        .iter()
        .map(|r| r.inversion_residual)
        .fold(0.0, f64::max);
    let violations = rows
        .iter()
        .filter(|r| !(r.inversion_residual <= DUALITY_TOL))
        .map(|r| r.signal_id)
        .collect();
    let rc = rc_estimate(sys, cls, family)?;
    let rd_dual = rd_estimate(&neg, cls, &mirrored)?;
    Ok(DualityReport {
        aggregate_equal: rc.value.to_bits() == rd_dual.value.to_bits(),
        rows,
        max_residual,
        rc,
        rd_dual,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaReport {
    /// `max (1/τ) log‖R(τ)‖`, a lower bound on `δ`.
    pub delta: RateEstimate,
    /// `min (1/τ) log m(R(τ))`, an upper bound on `δ*`.
    pub delta_star: RateEstimate,
}

/// Sampled `δ` and `δ*` over a family of periodic signals. The conorm is
/// taken as `1/‖R⁻¹‖` with the separately accumulated inverse.
pub fn delta_quantities(
    sys: &FeedbackSystem,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<DeltaReport> {
    let vals: Vec<Option<(f64, f64)>> = family
        .signals
        .par_iter()
        .map(|s| {
            if !s.is_periodic() || !validate_pe(s, cls, None)?.valid {
                return Ok(None);
            }
            let m = monodromy(sys, s)?;
            let up = opnorm(&m.r).ln() / m.tau;
            let down = -(opnorm(&m.r_inv).ln() / m.tau);
            Ok(Some((up, down)))
        })
        .collect::<Result<_>>()?;
    let mut delta: Option<(f64, usize)> = None;
    let mut delta_star: Option<(f64, usize)> = None;
    for (i, v) in vals.iter().enumerate() {
        let Some((up, down)) = *v else { continue };
        if up.is_nan() || down.is_nan() {
            return Err(Error::Numerical(format!("log-norm of signal {i} is NaN")));
        }
        if delta.is_none_or(|(b, _)| up > b) {
            delta = Some((up, i));
        }
        if delta_star.is_none_or(|(b, _)| down < b) {
            delta_star = Some((down, i));
        }
    }
    let (dv, di) = delta.ok_or(Error::EmptyFamily)?;
    let (sv, si) = delta_star.ok_or(Error::EmptyFamily)?;
    Ok(DeltaReport {
        delta: RateEstimate {
            value: dv,
            bound: Bound::Lower,
            witness: Some(family.signals[di].clone()),
            method: format!("delta:family[{}]", family.len()),
        },
        delta_star: RateEstimate {
            value: sv,
            bound: Bound::Upper,
            witness: Some(family.signals[si].clone()),
            method: format!("delta_star:family[{}]", family.len()),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftReport {
    pub lambda: f64,
    pub exponent: f64,
    pub shifted_exponent: f64,
    /// `|λ⁺(A + λI) − λ⁺(A) − λ|`.
    pub residual: f64,
}

pub const SHIFT_TOL: f64 = 1e-10;

/// Compares the exponent from `x0` for `(A, B, K)` and `(A + λI, B, K)`.
pub fn shift_law_check(
    sys: &FeedbackSystem,
    lambda: f64,
    s: &PESignal,
    x0: &DVector<f64>,
    horizon: f64,
) -> Result<ShiftReport> {
    let (e, _) = lyap_exponents(x0, sys, s, horizon)?;
    let (f, _) = lyap_exponents(x0, &sys.shifted(lambda), s, horizon)?;
    Ok(ShiftReport {
        lambda,
        exponent: e,
        shifted_exponent: f,
        residual: (f - e - lambda).abs(),
    })
}

/// `|rc(A + λI) − rc(A) + λ|` on a fixed family.
pub fn rc_shift_residual(
    sys: &FeedbackSystem,
    lambda: f64,
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<f64> {
    let base = rc_estimate(sys, cls, family)?.value;
    let moved = rc_estimate(&sys.shifted(lambda), cls, family)?.value;
    Ok((moved - base + lambda).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// `‖R' − P R P⁻¹‖ / ‖R‖`.
    pub conjugation_residual: f64,
    /// Eigenvalue multiset distance divided by `max(1, ρ(R))`.
    pub spectral_residual: f64,
    pub top_rate: f64,
    pub transformed_top_rate: f64,
}

/// Monodromy of `(PAP⁻¹, PBV⁻¹, VKP⁻¹)` against `P R P⁻¹`.
pub fn coordinate_invariance_check(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    p: &Matrix,
    v: &Matrix,
    s: &PESignal,
) -> Result<InvarianceReport> {
    let sys = FeedbackSystem::new(a, b, k)?;
    let moved = FeedbackSystem::transformed(a, b, k, p, v)?;
    let m = monodromy(&sys, s)?;
    let mm = monodromy(&moved, s)?;
    let pi = invert(p, "P")?;
    let expect = p * &m.r * &pi;
    let scale = opnorm(&m.r).max(1.0);
    let rho = matcore::spectral_radius(&m.r)?.max(1.0);
    Ok(InvarianceReport {
        conjugation_residual: opnorm(&(&mm.r - expect)) / scale,
        spectral_residual: multiset_residual(&m.spectrum()?, &mm.spectrum()?) / rho,
        top_rate: m.top_rate,
        transformed_top_rate: mm.top_rate,
    })
}

/// `K₋ = (−1)^d K 𝒯` with `𝒯 = diag(1, −1, 1, …)`.
pub fn k_minus(k: &Matrix) -> Matrix {
    let d = k.ncols();
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    k * parity(d) * sign
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KMinusReport {
    /// Per signal: eigenvalue distance between `σ(R₋)` and `1/σ(R)`, divided
    /// by `max(1, ρ(R₋))`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Spectral inversion between `(J_d, e_d, K)` under `α` and
/// `(J_d, e_d, K₋)` under the reversed signal.
pub fn kminus_duality_check(d: usize, k: &Matrix, family: &SignalFamily) -> Result<KMinusReport> {
    if k.nrows() != 1 || k.ncols() != d {
        return Err(Error::Shape(format!(
            "K must be 1x{d}, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    if k.iter().any(|&x| x == 0.0) {
        return Err(Error::Precondition(
            "K must have all components nonzero".into(),
        ));
    }
    let j = shift(d);
    let e = basis_column(d, d);
    let sys = FeedbackSystem::new(&j, &e, k)?;
    let dual = FeedbackSystem::new(&j, &e, &k_minus(k))?;
    let residuals: Vec<f64> = family
        .signals
        .par_iter()
        .map(|s| {
            let m = monodromy(&sys, s)?;
            let md = monodromy(&dual, &reverse(s)?)?;
            let inv: Vec<Complex64> = m.spectrum()?.iter().map(|z| z.inv()).collect();
            let rho = matcore::spectral_radius(&md.r)?.max(1.0);
            Ok(multiset_residual(&md.spectrum()?, &inv) / rho)
        })
        .collect::<Result<_>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(KMinusReport {
        residuals,
        max_residual,
    })
}

/// A regular grid of gains: every entry of the `inputs × dim` matrix `K`
/// ranges over `per_axis` evenly spaced values in `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct KGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_axis: usize,
}

impl KGrid {
    /// Grid points in lexicographic order of the row-major entries.
    pub fn points(&self, inputs: usize, dim: usize) -> Result<Vec<Matrix>> {
        let n = inputs * dim;
        if self.per_axis == 0 || !(self.lo <= self.hi) || n == 0 {
            return Err(Error::InvalidInput(format!(
                "bad K grid [{}, {}] x {}",
                self.lo, self.hi, self.per_axis
            )));
        }
        let total = u32::try_from(n)
            .ok()
            .and_then(|e| self.per_axis.checked_pow(e))
            .filter(|&t| t <= 1 << 20)
            .ok_or_else(|| Error::InvalidInput("K grid has too many points".into()))?;
        let axis: Vec<f64> = (0..self.per_axis)
            .map(|i| {
                if self.per_axis == 1 {
                    self.lo
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (self.per_axis - 1) as f64
                }
            })
            .collect();
        Ok((0..total)
            .map(|mut idx| {
                let mut entries = vec![0.0; n];
                for e in entries.iter_mut().rev() {
                    *e = axis[idx % self.per_axis];
                    idx /= self.per_axis;
                }
                Matrix::from_row_slice(inputs, dim, &entries)
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub k: Vec<f64>,
    pub rc: f64,
    pub rd_dual: f64,
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridDualityReport {
    pub rows: Vec<GridRow>,
    pub sup_rc: f64,
    pub sup_rd_dual: f64,
    pub all_equal: bool,
    pub suprema_equal: bool,
}

/// Per-gain comparison of `rc(A, B, K)` on `family` against
/// `rd(−A, −B, K)` on the mirrored family, and of the grid suprema.
pub fn grid_duality(
    a: &Matrix,
    b: &Matrix,
    ks: &[Matrix],
    cls: &SignalClass,
    family: &SignalFamily,
) -> Result<GridDualityReport> {
    if ks.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mirrored = family.mirrored()?;
    let rows: Vec<GridRow> = ks
        .iter()
        .map(|k| {
            let sys = FeedbackSystem::new(a, b, k)?;
            let rc = rc_estimate(&sys, cls, family)?.value;
            let rd_dual = rd_estimate(&sys.negated(), cls, &mirrored)?.value;
            Ok(GridRow {
                k: k.iter().copied().collect(),
                rc,
                rd_dual,
                equal: rc.to_bits() == rd_dual.to_bits(),
            })
        })
        .collect::<Result<_>>()?;
    let sup_rc = rows.iter().map(|r| r.rc).fold(f64::NEG_INFINITY, f64::max);
    let sup_rd_dual = rows
        .iter()
        .map(|r| r.rd_dual)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GridDualityReport {
        all_equal: rows.iter().all(|r| r.equal),
        suprema_equal: sup_rc.to_bits() == sup_rd_dual.to_bits(),
        rows,
        sup_rc,
        sup_rd_dual,
    })
}
