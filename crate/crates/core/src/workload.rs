//! Synthetic workloads and trace files.
//!
//! Execution times come from a mixture of modes, each mode standing for one
//! application. Arrivals are Poisson, either at a constant rate or following
//! a piecewise-constant rate schedule. SLOs are a multiple of the P99 of the
//! generated execution times.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::sample_quantile;
use crate::error::{Error, Result};

pub const DEFAULT_SIGMA_UNIT_MS: f64 = 10.0;

/// Mean of the first mode of every modality preset.
pub const PRESET_FIRST_MEAN_MS: f64 = 50.0;

/// Distance between consecutive mode means in modality presets.
pub const PRESET_MODE_STEP_MS: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lognormal,
    TruncatedNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub mean_ms: f64,
    /// Spread in units of `sigma_unit_ms`.
    pub sigma: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub family: Family,
    pub modes: Vec<Mode>,
    /// Standard deviation, in ms, of a mode with `sigma = 1`.
    #[serde(default = "default_sigma_unit")]
    pub sigma_unit_ms: f64,
}

fn default_sigma_unit() -> f64 {
    DEFAULT_SIGMA_UNIT_MS
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::invalid("mixture needs at least one mode"));
        }
        if !(self.sigma_unit_ms > 0.0 && self.sigma_unit_ms.is_finite()) {
            return Err(Error::invalid("sigma unit must be > 0"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if !(m.mean_ms > 0.0 && m.mean_ms.is_finite()) {
                return Err(Error::invalid(format!("mode {i}: mean must be > 0")));
            }
            if !(m.sigma >= 0.0 && m.sigma.is_finite()) {
                return Err(Error::invalid(format!("mode {i}: sigma must be >= 0")));
            }
            if !(m.weight > 0.0 && m.weight.is_finite()) {
                return Err(Error::invalid(format!("mode {i}: weight must be > 0")));
            }
        }
        Ok(())
    }

    /// `n` equally weighted modes starting at 50 ms, 150 ms apart.
    pub fn modal(n: usize, sigma: f64) -> Self {
        Self {
            family: Family::Lognormal,
            modes: (0..n)
                .map(|i| Mode {
                    mean_ms: PRESET_FIRST_MEAN_MS + PRESET_MODE_STEP_MS * i as f64,
                    sigma,
                    weight: 1.0,
                })
                .collect(),
            sigma_unit_ms: DEFAULT_SIGMA_UNIT_MS,
        }
    }

    /// Named presets: `one_modal` .. `eight_modal`, `static`,
    /// `left_2_right_0.5` and `left_0.5_right_2`.
    pub fn preset(name: &str, sigma: f64) -> Result<Self> {
        const NAMES: [&str; 8] = [
            "one_modal",
            "two_modal",
            "three_modal",
            "four_modal",
            "five_modal",
            "six_modal",
            "seven_modal",
            "eight_modal",
        ];
        if let Some(i) = NAMES.iter().position(|n| *n == name) {
            return Ok(Self::modal(i + 1, sigma));
        }
        let weighted = |left: f64, right: f64| {
            let mut m = Self::modal(2, sigma);
            m.modes[0].weight = left;
            m.modes[1].weight = right;
            m
        };
        match name {
            "static" => Ok(Self::modal(1, 0.0)),
            "left_2_right_0.5" => Ok(weighted(2.0, 0.5)),
            "left_0.5_right_2" => Ok(weighted(0.5, 2.0)),
            _ => Err(Error::invalid(format!("unknown workload preset `{name}`"))),
        }
    }

    fn samplers(&self) -> Result<Vec<ModeSampler>> {
        self.modes
            .iter()
            .map(|m| {
                let std = m.sigma * self.sigma_unit_ms;
                if std == 0.0 {
                    return Ok(ModeSampler::Constant(m.mean_ms));
                }
                match self.family {
                    Family::Lognormal => {
                        let s2 = (1.0 + (std / m.mean_ms).powi(2)).ln();
                        let mu = m.mean_ms.ln() - 0.5 * s2;
                        LogNormal::new(mu, s2.sqrt())
                            .map(ModeSampler::Lognormal)
                            .map_err(|e| Error::invalid(e.to_string()))
                    }
                    Family::TruncatedNormal => Normal::new(m.mean_ms, std)
                        .map(ModeSampler::Normal)
                        .map_err(|e| Error::invalid(e.to_string())),
                }
            })
            .collect()
    }
}

enum ModeSampler {
    Constant(f64),
    Lognormal(LogNormal<f64>),
    Normal(Normal<f64>),
}

impl ModeSampler {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ModeSampler::Constant(v) => *v,
            ModeSampler::Lognormal(d) => d.sample(rng),
            ModeSampler::Normal(d) => loop {
                let x = d.sample(rng);
                if x > 0.0 {
                    break x;
                }
            },
        }
    }
}

/// Arrival process of a generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalSpec {
    Poisson {
        rate_per_s: f64,
    },
    /// Rows of `(t_start_ms, rate_per_s)`; each rate holds until the next
    /// row and the last one holds forever.
    Piecewise {
        segments: Vec<(f64, f64)>,
        #[serde(default)]
        target_rate_per_s: Option<f64>,
    },
    RateFile {
        path: PathBuf,
        #[serde(default)]
        target_rate_per_s: Option<f64>,
    },
}

/// Reads a rate schedule: CSV rows of `t_start_ms,rate_per_s`, optional
/// header.
pub fn load_rate_file(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.into(),
            line,
            msg: e.to_string(),
        })?;
        let parse = |j: usize| rec.get(j).and_then(|s| s.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(t), Some(r)) => rows.push((t, r)),
            _ if line == 1 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: "expected `t_start_ms,rate_per_s`".into(),
                })
            }
        }
    }
    Ok(rows)
}

fn check_segments(segments: &[(f64, f64)]) -> Result<()> {
    if segments.is_empty() {
        return Err(Error::invalid("rate schedule is empty"));
    }
    if segments
        .iter()
        .any(|&(t, r)| !t.is_finite() || !(r >= 0.0 && r.is_finite()))
    {
        return Err(Error::invalid(
            "rate schedule needs finite times and rates >= 0",
        ));
    }
    if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::invalid("rate schedule start times must increase"));
    }
    if segments.last().unwrap().1 <= 0.0 {
        return Err(Error::invalid("the final rate must be > 0"));
    }
    Ok(())
}

/// Time-averaged rate between the first and last start times (or the only
/// rate for a single row).
fn mean_rate(segments: &[(f64, f64)]) -> f64 {
    if segments.len() == 1 {
        return segments[0].1;
    }
    let span = segments.last().unwrap().0 - segments[0].0;
    segments
        .windows(2)
        .map(|w| w[0].1 * (w[1].0 - w[0].0))
        .sum::<f64>()
        / span
}

impl ArrivalSpec {
    fn segments(&self) -> Result<Vec<(f64, f64)>> {
        let (mut segs, target) = match self {
            ArrivalSpec::Poisson { rate_per_s } => {
                if !(*rate_per_s > 0.0 && rate_per_s.is_finite()) {
                    return Err(Error::invalid("arrival rate must be > 0"));
                }
                return Ok(vec![(0.0, *rate_per_s)]);
            }
            ArrivalSpec::Piecewise {
                segments,
                target_rate_per_s,
            } => (segments.clone(), *target_rate_per_s),
            ArrivalSpec::RateFile {
                path,
                target_rate_per_s,
            } => (load_rate_file(path)?, *target_rate_per_s),
        };
        check_segments(&segs)?;
        if let Some(target) = target {
            if !(target > 0.0 && target.is_finite()) {
                return Err(Error::invalid("target rate must be > 0"));
            }
            let k = target / mean_rate(&segs);
            for s in &mut segs {
                s.1 *= k;
            }
        }
        Ok(segs)
    }

    /// `n` arrival times in ms.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let segs = self.segments()?;
        let mut out = Vec::with_capacity(n);
        let mut t = segs[0].0;
        let mut i = 0;
        while out.len() < n {
            let rate = segs[i].1;
            let end = segs.get(i + 1).map_or(f64::INFINITY, |s| s.0);
            if rate <= 0.0 {
                t = end;
                i += 1;
                continue;
            }
            let gap = Exp::new(rate / 1000.0)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng);
            if t + gap < end {
                t += gap;
                out.push(t);
            } else {
                // memoryless: restart the clock at the boundary
                t = end;
                i += 1;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub arrival_ms: f64,
    pub app: String,
    pub exec_ms: f64,
    pub slo_ms: f64,
    #[serde(default = "default_cost")]
    pub cost: f64,
}

fn default_cost() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub generator: serde_json::Value,
    pub seed: u64,
    pub p99_exec_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub meta: Option<TraceMeta>,
}

/// Everything needed to regenerate a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub mixture: MixtureSpec,
    pub arrival: ArrivalSpec,
    pub n: usize,
    pub slo_multiple: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn generate(&self) -> Result<Trace> {
        generate(
            &self.mixture,
            &self.arrival,
            self.n,
            self.slo_multiple,
            self.seed,
        )
    }
}

pub fn generate(
    spec: &MixtureSpec,
    arrival: &ArrivalSpec,
    n: usize,
    slo_multiple: f64,
    seed: u64,
) -> Result<Trace> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("trace length must be >= 1"));
    }
    if !(slo_multiple > 0.0 && slo_multiple.is_finite()) {
        return Err(Error::invalid("SLO multiple must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers = spec.samplers()?;
    let pick = WeightedIndex::new(spec.modes.iter().map(|m| m.weight))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let draws: Vec<(usize, f64)> = (0..n)
        .map(|_| {
            let i = pick.sample(&mut rng);
            (i, samplers[i].sample(&mut rng))
        })
        .collect();
    let arrivals = arrival.sample(n, &mut rng)?;
    let execs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let p99 = sample_quantile(&execs, 0.99)?;
    let slo = slo_multiple * p99;
    let entries = draws
        .into_iter()
        .zip(arrivals)
        .map(|((i, exec), at)| TraceEntry {
            arrival_ms: at,
            app: format!("app{i}"),
            exec_ms: exec,
            slo_ms: slo,
            cost: 1.0,
        })
        .collect();
    let generator = serde_json::to_value(WorkloadSpec {
        mixture: spec.clone(),
        arrival: arrival.clone(),
        n,
        slo_multiple,
        seed,
    })
    .map_err(|e| Error::Invariant(e.to_string()))?;
    Ok(Trace {
        entries,
        meta: Some(TraceMeta {
            generator,
            seed,
            p99_exec_ms: p99,
        }),
    })
}

const META_PREFIX: &str = "#meta ";

impl Trace {
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            entry_problem(e, i.checked_sub(1).map(|j| &self.entries[j])).map_or(Ok(()), |msg| {
                Err(Error::InvalidInput(format!("entry {i}: {msg}")))
            })?;
        }
        Ok(())
    }

    pub fn execs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.exec_ms).collect()
    }

    /// P99 of execution times, from the metadata when present.
    pub fn p99(&self) -> Result<f64> {
        match &self.meta {
            Some(m) => Ok(m.p99_exec_ms),
            None => sample_quantile(&self.execs(), 0.99),
        }
    }

    /// Same arrivals and execution times with every SLO set to
    /// `multiple * P99`.
    pub fn with_slo_multiple(&self, multiple: f64) -> Result<Trace> {
        if !(multiple > 0.0 && multiple.is_finite()) {
            return Err(Error::invalid("SLO multiple must be > 0"));
        }
        let slo = multiple * self.p99()?;
        let mut t = self.clone();
        for e in &mut t.entries {
            e.slo_ms = slo;
        }
        Ok(t)
    }

    /// Scales every execution time (and the P99) by `factor`.
    pub fn scale_exec(&self, factor: f64) -> Result<Trace> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("scale factor must be > 0"));
        }
        let mut t = self.clone();
        for e in &mut t.entries {
            e.exec_ms *= factor;
        }
        if let Some(m) = &mut t.meta {
            m.p99_exec_ms *= factor;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        if let Some(meta) = &self.meta {
            let s = serde_json::to_string(meta).map_err(|e| Error::Invariant(e.to_string()))?;
            writeln!(w, "{META_PREFIX}{s}").map_err(io)?;
        }
        for e in &self.entries {
            let s = serde_json::to_string(e).map_err(|e| Error::Invariant(e.to_string()))?;
            writeln!(w, "{s}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Trace> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries: Vec<TraceEntry> = Vec::new();
        let mut meta = None;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |msg: String| Error::Parse {
                path: path.into(),
                line: line_no,
                msg,
            };
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(rest) = text.strip_prefix(META_PREFIX) {
                meta = Some(serde_json::from_str(rest).map_err(|e| parse_err(e.to_string()))?);
                continue;
            }
            let e: TraceEntry = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
            if let Some(msg) = entry_problem(&e, entries.last()) {
                return Err(parse_err(msg));
            }
            entries.push(e);
        }
        Ok(Trace { entries, meta })
    }
}

fn entry_problem(e: &TraceEntry, prev: Option<&TraceEntry>) -> Option<String> {
    if !e.arrival_ms.is_finite() {
        return Some("arrival_ms must be finite".into());
    }
    if !(e.exec_ms > 0.0 && e.exec_ms.is_finite()) {
        return Some("exec_ms must be > 0".into());
    }
    if !(e.slo_ms > 0.0 && e.slo_ms.is_finite()) {
        return Some("slo_ms must be > 0".into());
    }
    if !(e.cost > 0.0 && e.cost.is_finite()) {
        return Some("cost must be > 0".into());
    }
    match prev {
        Some(p) if e.arrival_ms < p.arrival_ms => Some(format!(
            "arrival {} out of order (previous {})",
            e.arrival_ms, p.arrival_ms
        )),
        _ => None,
    }
}
