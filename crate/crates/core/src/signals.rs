//! Piecewise-constant excitation signals and the persistent-excitation test.
//!
//! A signal is stored as a list of segments `(duration, value)` starting at
//! time 0. Periodic signals carry their period explicitly; aperiodic ones hold
//! their last value forever. The JSON form lists interval start times instead
//! of durations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack on the excitation inequality.
pub const PE_TOL: f64 = 1e-12;

/// The window length `T` and the required energy `μ` of a signal class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalClass {
    #[serde(rename = "T")]
    pub t: f64,
    pub mu: f64,
}

impl SignalClass {
    pub fn new(t: f64, mu: f64) -> Result<Self> {
        if !(t.is_finite() && mu.is_finite() && mu > 0.0 && mu <= t) {
            return Err(Error::InvalidInput(format!(
                "signal class needs 0 < mu <= T, got T={t}, mu={mu}"
            )));
        }
        Ok(Self { t, mu })
    }

    /// The smallest constant admissible value `μ/T`.
    pub fn floor_value(&self) -> f64 {
        self.mu / self.t
    }

    /// Mass `∫ v` over an interval of length `len`. The floor value is treated
    /// as the exact ratio `μ/T` so that a full window of it weighs exactly `μ`.
    fn mass(&self, value: f64, len: f64) -> f64 {
        if value == self.floor_value() {
            if len == self.t {
                self.mu
            } else {
                self.mu * (len / self.t)
            }
        } else {
            value * len
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub value: f64,
}

impl Segment {
    pub fn new(duration: f64, value: f64) -> Self {
        Self { duration, value }
    }
}

/// Wire form of a signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalJson {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub period: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalJson", into = "SignalJson")]
pub struct PESignal {
    segments: Vec<Segment>,
    period: Option<f64>,
}

fn check_value(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "signal value {v} outside [0, 1]"
        )))
    }
}

impl PESignal {
    /// Periodic signal whose period is the sum of the segment durations.
    pub fn periodic(segments: Vec<Segment>) -> Result<Self> {
        let period = segments.iter().map(|s| s.duration).sum();
        Self::periodic_with(segments, period)
    }

    /// Periodic signal with an explicitly given period. The durations must add
    /// up to the period up to rounding.
    pub fn periodic_with(segments: Vec<Segment>, period: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("signal has no segments".into()));
        }
        for s in &segments {
            check_value(s.value)?;
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "segment duration {} is not a finite nonnegative number",
                    s.duration
                )));
            }
        }
        let total: f64 = segments.iter().map(|s| s.duration).sum();
        if !(period.is_finite() && period > 0.0) || (total - period).abs() > 1e-9 * period {
            return Err(Error::InvalidInput(format!(
                "period {period} does not match total duration {total}"
            )));
        }
        Ok(Self {
            segments,
            period: Some(period),
        })
    }

    /// Constant periodic signal.
    pub fn constant(value: f64, period: f64) -> Result<Self> {
        Self::periodic_with(vec![Segment::new(period, value)], period)
    }

    /// Aperiodic signal. The final segment's duration is ignored: its value is
    /// held for all later times.
    pub fn aperiodic(mut segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("signal has no segments".into()));
        }
        for s in &segments {
            check_value(s.value)?;
        }
        for s in &segments[..segments.len() - 1] {
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "segment duration {} is not a finite nonnegative number",
                    s.duration
                )));
            }
        }
        segments.last_mut().expect("nonempty").duration = f64::INFINITY;
        Ok(Self {
            segments,
            period: None,
        })
    }

    /// Build from interval start times. The first start must be 0.
    pub fn from_parts(breakpoints: &[f64], values: &[f64], period: Option<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]))
            || !breakpoints.iter().all(|b| b.is_finite())
        {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let last = *breakpoints.last().expect("nonempty");
        let mut segments: Vec<Segment> = breakpoints
            .windows(2)
            .zip(values)
            .map(|(w, &v)| Segment::new(w[1] - w[0], v))
            .collect();
        match period {
            Some(p) => {
                if !(p.is_finite() && p >= last && p > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "period {p} must be positive and at least the last breakpoint {last}"
                    )));
                }
                segments.push(Segment::new(p - last, values[values.len() - 1]));
                Self::periodic_with(segments, p)
            }
            None => {
                segments.push(Segment::new(f64::INFINITY, values[values.len() - 1]));
                Self::aperiodic(segments)
            }
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    fn require_period(&self, what: &str) -> Result<f64> {
        self.period
            .ok_or_else(|| Error::Precondition(format!("{what} needs a periodic signal")))
    }

    /// Interval start times.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.value).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.value == self.segments[0].value)
    }

    /// Value at time `t`. Periodic signals are extended in both directions.
    pub fn value_at(&self, t: f64) -> f64 {
        let local = match self.period {
            Some(p) => t.rem_euclid(p),
            None => t.max(0.0),
        };
        let mut start = 0.0;
        for s in &self.segments {
            if local < start + s.duration {
                return s.value;
            }
            start += s.duration;
        }
        self.segments[self.segments.len() - 1].value
    }

    /// Segments covering `[a, b]`, cut at the ends.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        if !(b > a) {
            return out;
        }
        let (mut cursor, offset) = match self.period {
            Some(p) => {
                let k = (a / p).floor();
                (a - k * p, k * p)
            }
            None => (a.max(0.0), 0.0),
        };
        let end = b - offset;
        let mut base = 0.0;
        let n = self.segments.len();
        let mut i = 0;
        while cursor < end {
            let s = self.segments[i % n];
            let seg_end = base + s.duration;
            if cursor < seg_end {
                let stop = seg_end.min(end);
                out.push(Segment::new(stop - cursor, s.value));
                cursor = stop;
            }
            base = seg_end;
            i += 1;
            if i % n == 0 && self.period.is_none() {
                break;
            }
        }
        out
    }

    /// `∫_a^b α`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b).iter().map(|s| s.value * s.duration).sum()
    }

    fn class_integral(&self, a: f64, b: f64, cls: &SignalClass) -> f64 {
        self.pieces(a, b)
            .iter()
            .map(|s| cls.mass(s.value, s.duration))
            .sum()
    }

    /// The periodic signal `t ↦ α(t0 + t)`.
    pub fn shifted(&self, t0: f64) -> Result<Self> {
        let p = self.require_period("shift")?;
        let start = t0.rem_euclid(p);
        let segments: Vec<Segment> = self
            .pieces(start, start + p)
            .into_iter()
            .filter(|s| s.duration > 0.0)
            .collect();
        Self::periodic_with(segments, p)
    }

    /// Merge adjacent segments with equal values and drop empty ones.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            if s.duration == 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.value == s.value => last.duration += s.duration,
                _ => out.push(*s),
            }
        }
        if out.is_empty() {
            out.push(self.segments[0]);
        }
        Self {
            segments: out,
            period: self.period,
        }
    }
}

impl TryFrom<SignalJson> for PESignal {
    type Error = Error;

    fn try_from(j: SignalJson) -> Result<Self> {
        PESignal::from_parts(&j.breakpoints, &j.values, j.period)
    }
}

impl From<PESignal> for SignalJson {
    fn from(s: PESignal) -> Self {
        SignalJson {
            breakpoints: s.breakpoints(),
            values: s.values(),
            period: s.period,
        }
    }
}

/// Outcome of the excitation test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeReport {
    pub valid: bool,
    pub worst_window_start: f64,
    pub worst_integral: f64,
}

/// Minimum over window starts `t` of `∫_t^{t+T} α`, and whether it reaches
/// `μ`. Periodic signals are checked over one period; aperiodic ones over
/// windows inside `[0, horizon]`.
pub fn validate_pe(s: &PESignal, cls: &SignalClass, horizon: Option<f64>) -> Result<PeReport> {
    let bps = s.breakpoints();
    let mut starts: Vec<f64> = Vec::with_capacity(2 * bps.len() + 2);
    match s.period {
        Some(p) => {
            for &b in &bps {
                starts.push(b);
                starts.push((b - cls.t).rem_euclid(p));
            }
        }
        None => {
            let h = horizon.ok_or_else(|| {
                Error::Precondition("aperiodic signal needs a validation horizon".into())
            })?;
            if !(h >= cls.t) {
                return Err(Error::InvalidInput(format!(
                    "horizon {h} shorter than the window {}",
                    cls.t
                )));
            }
            let last = h - cls.t;
            starts.push(0.0);
            starts.push(last);
            for &b in &bps {
                for c in [b, b - cls.t] {
                    if (0.0..=last).contains(&c) {
                        starts.push(c);
                    }
                }
            }
        }
    }
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    let mut worst_start = starts[0];
    let mut worst = f64::INFINITY;
    for &t in &starts {
        let v = s.class_integral(t, t + cls.t, cls);
        if v < worst {
            worst = v;
            worst_start = t;
        }
    }
    Ok(PeReport {
        valid: worst >= cls.mu - PE_TOL,
        worst_window_start: worst_start,
        worst_integral: worst,
    })
}

/// The reflected signal `t ↦ α(−t)` of a periodic signal.
pub fn reverse(s: &PESignal) -> Result<PESignal> {
    let p = s.require_period("time reversal")?;
    let mut segments = s.segments.clone();
    segments.reverse();
    Ok(PESignal {
        segments,
        period: Some(p),
    })
}

fn ones(len: f64) -> Segment {
    Segment::new(len, 1.0)
}

fn admissible_or_err(s: PESignal, cls: &SignalClass) -> Result<PESignal> {
    let report = validate_pe(&s, cls, None)?;
    if report.valid {
        Ok(s)
    } else {
        Err(Error::ConstructionNotAdmissible {
            worst_integral: report.worst_integral,
            mu: cls.mu,
        })
    }
}

/// Closes an excitation prefix into a periodic signal: `α` on `[0, t]`, ones
/// for `T − μ`, the steering control on `[0, τ]`, ones for `T − μ` again.
/// The period is `t + 2(T − μ) + τ`.
///
/// Returns [`Error::ConstructionNotAdmissible`] if the periodic result fails
/// the excitation test. That can happen when the prefix ends in a low phase
/// and the steering control stays near `μ/T`.
pub fn make_hash_admissible(
    prefix: &PESignal,
    t: f64,
    steering: &PESignal,
    tau: f64,
    cls: &SignalClass,
) -> Result<PESignal> {
    if !(t > 0.0) || !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need t > 0 and tau >= 0, got t={t}, tau={tau}"
        )));
    }
    let lo = cls.floor_value();
    let steer = steering.pieces(0.0, tau);
    if let Some(bad) = steer.iter().find(|s| s.value < lo - PE_TOL) {
        return Err(Error::Precondition(format!(
            "steering value {} below mu/T = {lo}",
            bad.value
        )));
    }
    let gap = cls.t - cls.mu;
    let mut segments = prefix.pieces(0.0, t);
    segments.push(ones(gap));
    segments.extend(steer);
    segments.push(ones(gap));
    let period = t + 2.0 * gap + tau;
    let raw = PESignal::periodic_with(segments, period)?;
    let signal = PESignal {
        segments: raw.simplified().segments,
        period: Some(period),
    };
    admissible_or_err(signal, cls)
}

/// Periodic extension used to approximate an arbitrary excitation signal.
///
/// `s` is read on `[0, 2k]` (standing for `[−k, k]`). The result is `s` on
/// `[0, 2k]` followed by `2(T − μ)` of ones, with period `2(k + T − μ)`.
pub fn periodize_dense(s: &PESignal, k: f64, cls: &SignalClass) -> Result<PESignal> {
    if !(k >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "k must be nonnegative, got {k}"
        )));
    }
    let gap = cls.t - cls.mu;
    let period = 2.0 * (k + gap);
    if !(period > 0.0) {
        return Err(Error::InvalidInput(
            "k = 0 with mu = T leaves an empty period".into(),
        ));
    }
    let mut segments = s.pieces(0.0, 2.0 * k);
    segments.push(ones(2.0 * gap));
    let raw = PESignal::periodic_with(segments, period)?;
    let signal = PESignal {
        segments: raw.simplified().segments,
        period: Some(period),
    };
    admissible_or_err(signal, cls)
}
