//! Flat key-value run configuration.
//!
//! The format is one `dotted.key = value` assignment per line, `#` comments,
//! blank lines ignored. Pulse lists use `[(delta, duration), ...]` and
//! explicit population vectors `[p0, p1, ...]`.

use anyhow::{anyhow, bail, Context, Result};
use std::path::{Path, PathBuf};
use trapcool::{AngularDistribution, SchemeId, SnapshotCadence};

#[derive(Debug, Clone)]
pub enum InitialState {
    Thermal(f64),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub enum CycleSpec {
    Scheme(SchemeId),
    Pulses(Vec<(f64, f64)>),
}

/// Search box per pulse: (delta_lo, delta_hi, duration_lo, duration_hi).
pub type OptimizeBounds = Vec<(f64, f64, f64, f64)>;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub eta: f64,
    pub gamma_over_nu: f64,
    pub gamma_ratio: f64,
    pub omega_over_nu: f64,
    pub angular: AngularDistribution,
    pub n_max: Option<usize>,
    pub initial: InitialState,
    pub cycle: CycleSpec,
    pub n_cycles: usize,
    pub quad_order: usize,
    pub snapshot: SnapshotCadence,
    pub out_dir: PathBuf,
    pub optimize_budget: usize,
    pub optimize_bounds: Option<OptimizeBounds>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eta: 5.0,
            gamma_over_nu: 0.1,
            gamma_ratio: 0.5,
            omega_over_nu: 0.01,
            angular: AngularDistribution::Dipole,
            n_max: None,
            initial: InitialState::Thermal(6.0),
            cycle: CycleSpec::Scheme(SchemeId::Fig3b),
            n_cycles: 200,
            quad_order: 64,
            snapshot: SnapshotCadence::PerCycle,
            out_dir: PathBuf::from("out"),
            optimize_budget: 200,
            optimize_bounds: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", idx + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}: key `{}`", idx + 1, key.trim()))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "params.eta" => self.eta = parse_positive_or_zero(value)?,
            "params.gamma_over_nu" => self.gamma_over_nu = parse_positive(value)?,
            "params.gamma_ratio" => self.gamma_ratio = parse_positive(value)?,
            "params.omega_over_nu" => self.omega_over_nu = parse_positive(value)?,
            "params.angular" => {
                self.angular = match value {
                    "dipole" => AngularDistribution::Dipole,
                    "isotropic" => AngularDistribution::Isotropic,
                    other => bail!("unknown angular kind `{other}` (dipole|isotropic)"),
                }
            }
            "basis.n_max" => {
                self.n_max = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| anyhow!("expected `auto` or an integer"))?)
                }
            }
            "initial.nbar" => self.initial = InitialState::Thermal(parse_positive_or_zero(value)?),
            "initial.vector" => self.initial = InitialState::Explicit(parse_f64_list(value)?),
            "cycle.scheme" => {
                self.cycle = CycleSpec::Scheme(
                    value.parse::<SchemeId>().map_err(|e| anyhow!(e.to_string()))?,
                )
            }
            "cycle.pulses" => self.cycle = CycleSpec::Pulses(parse_pairs(value)?),
            "run.cycles" => self.n_cycles = value.parse().context("expected an integer")?,
            "run.quad_order" => self.quad_order = value.parse().context("expected an integer")?,
            "run.snapshot" => {
                self.snapshot = match value {
                    "cycle" => SnapshotCadence::PerCycle,
                    "pulse" => SnapshotCadence::PerPulse,
                    other => bail!("unknown snapshot cadence `{other}` (cycle|pulse)"),
                }
            }
            "output.dir" => self.out_dir = PathBuf::from(value),
            "optimize.budget" => {
                self.optimize_budget = value.parse().context("expected an integer")?
            }
            "optimize.pulses" => self.optimize_bounds = Some(parse_quads(value)?),
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }

    pub fn params(&self) -> Result<trapcool::PhysicalParams> {
        trapcool::PhysicalParams::with_halfwidth_ratio(
            self.eta,
            self.gamma_over_nu,
            self.gamma_ratio,
            self.omega_over_nu,
            self.angular,
        )
        .map_err(|e| anyhow!(e.to_string()))
    }
}

fn parse_positive(value: &str) -> Result<f64> {
    let v: f64 = value.parse().context("expected a number")?;
    if !v.is_finite() || v <= 0.0 {
        bail!("expected a positive number, got {v}");
    }
    Ok(v)
}

fn parse_positive_or_zero(value: &str) -> Result<f64> {
    let v: f64 = value.parse().context("expected a number")?;
    if !v.is_finite() || v < 0.0 {
        bail!("expected a nonnegative number, got {v}");
    }
    Ok(v)
}

fn strip_brackets(value: &str) -> Result<&str> {
    let inner = value
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| anyhow!("expected a [...] list"))?;
    Ok(inner.trim())
}

fn parse_f64_list(value: &str) -> Result<Vec<f64>> {
    strip_brackets(value)?
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().context("expected a number"))
        .collect()
}

/// Split `(a, b), (c, d)` style groups out of a bracketed list.
fn tuple_groups(value: &str) -> Result<Vec<Vec<f64>>> {
    let inner = strip_brackets(value)?;
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '(' => {
                if depth > 0 {
                    bail!("nested parentheses in tuple list");
                }
                depth = 1;
                current.clear();
            }
            ')' => {
                if depth == 0 {
                    bail!("unbalanced parentheses in tuple list");
                }
                depth = 0;
                let fields: Result<Vec<f64>> = current
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().context("expected a number"))
                    .collect();
                groups.push(fields?);
            }
            _ if depth == 1 => current.push(ch),
            ',' | ' ' | '\t' => {}
            other => bail!("unexpected character `{other}` in tuple list"),
        }
    }
    if depth != 0 {
        bail!("unbalanced parentheses in tuple list");
    }
    Ok(groups)
}

fn parse_pairs(value: &str) -> Result<Vec<(f64, f64)>> {
    tuple_groups(value)?
        .into_iter()
        .map(|g| {
            if g.len() != 2 {
                bail!("expected (delta, duration) pairs, got {} fields", g.len());
            }
            Ok((g[0], g[1]))
        })
        .collect()
}

fn parse_quads(value: &str) -> Result<Vec<(f64, f64, f64, f64)>> {
    tuple_groups(value)?
        .into_iter()
        .map(|g| {
            if g.len() != 4 {
                bail!(
                    "expected (delta_lo, delta_hi, duration_lo, duration_hi), got {} fields",
                    g.len()
                );
            }
            Ok((g[0], g[1], g[2], g[3]))
        })
        .collect()
}
