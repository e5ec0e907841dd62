use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::strat::StratConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    ScalingPotential,
    TubularVolume,
    MonotonicityAudit,
    BetaReifenbergSuite,
    CoronaRun,
    Perimeter2s,
    Suite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ScalingPotential,
        ExperimentKind::TubularVolume,
        ExperimentKind::MonotonicityAudit,
        ExperimentKind::BetaReifenbergSuite,
        ExperimentKind::CoronaRun,
        ExperimentKind::Perimeter2s,
        ExperimentKind::Suite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ScalingPotential => "scaling-potential",
            ExperimentKind::TubularVolume => "tubular-volume",
            ExperimentKind::MonotonicityAudit => "monotonicity-audit",
            ExperimentKind::BetaReifenbergSuite => "beta-reifenberg-suite",
            ExperimentKind::CoronaRun => "corona-run",
            ExperimentKind::Perimeter2s => "perimeter-2s",
            ExperimentKind::Suite => "suite",
        }
    }

    /// Experiments whose radii must respect the 𝐤ε < 1 assumption.
    pub fn is_covering(&self) -> bool {
        matches!(self, ExperimentKind::TubularVolume | ExperimentKind::CoronaRun)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// Flat key = value configuration. Lists are comma separated, `#` starts
/// a comment. Unset keys keep the per-kind defaults of
/// [`ExperimentConfig::defaults`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub s: f64,
    /// strictly descending
    pub epsilons: Vec<f64>,
    /// nodes per ε, i.e. h = ε / resolution
    pub resolution: f64,
    /// refinement ladder of the monotonicity audit
    pub resolutions: Vec<f64>,
    pub half_width: f64,
    /// radius of the pinned −1 disc of the circular interface
    pub hole_radius: f64,
    pub strat: StratConfig,
    pub taus: Vec<f64>,
    pub radii: Vec<f64>,
    pub delta_dr: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub mask_file: Option<PathBuf>,
    pub mask_origin: [f64; 2],
    pub mask_h: f64,
    pub window_radius: f64,
    /// pixels per side of the half-plane refinement pair
    pub pixels: Vec<usize>,
    pub beta_measures: usize,
    pub beta_planes: usize,
    pub packing_configs: usize,
    pub refinements: Vec<u32>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            n: 1,
            s: 0.3,
            epsilons: vec![0.05],
            resolution: 4.0,
            resolutions: vec![4.0, 8.0],
            half_width: 2.0,
            hole_radius: 0.4,
            strat: StratConfig::default(),
            taus: vec![0.3, 0.5, 0.7],
            radii: vec![0.2, 0.1, 0.05],
            delta_dr: 0.01,
            seed: 20240601,
            out: None,
            mask_file: None,
            mask_origin: [-1.5, -1.5],
            mask_h: 3.0 / 64.0,
            window_radius: 1.0,
            pixels: vec![64, 128],
            beta_measures: 50,
            beta_planes: 500,
            packing_configs: 20,
            refinements: vec![3, 4, 5, 6, 7],
        };
        match kind {
            ExperimentKind::ScalingPotential => {
                c.s = 0.1;
                c.epsilons = vec![0.2, 0.1, 0.05, 0.025];
            }
            ExperimentKind::TubularVolume | ExperimentKind::CoronaRun => {
                // The circle experiments run at ε/2 nodes and 𝐤 = 1: with
                // 𝐤 = 4 only two dyadic radii would survive 𝐤ε < r < 1.
                c.n = 2;
                c.resolution = 2.0;
                c.half_width = 1.25;
                c.strat.k_thresh = 1.0;
            }
            ExperimentKind::Perimeter2s => {
                c.n = 2;
                c.s = 0.25;
            }
            _ => {}
        }
        c
    }

    /// Defaults of `kind` with the shared keys (seed, δ_DR, mask input,
    /// suite sizes) taken from `self`.
    pub fn derive(&self, kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig::defaults(kind);
        c.seed = self.seed;
        c.delta_dr = self.delta_dr;
        c.mask_file = self.mask_file.clone();
        c.mask_origin = self.mask_origin;
        c.mask_h = self.mask_h;
        c.beta_measures = self.beta_measures;
        c.beta_planes = self.beta_planes;
        c.packing_configs = self.packing_configs;
        c.refinements = self.refinements.clone();
        c.out = self.out.as_ref().map(|o| o.join(kind.as_str()));
        c
    }

    /// Parses a config text; `kind` overrides (or supplies) the `kind` key.
    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let file_kind = pairs.iter().find(|(k, _)| k == "kind").map(|(_, v)| v.parse()).transpose()?;
        let kind = kind
            .or(file_kind)
            .ok_or_else(|| Error::Config("experiment kind not given".into()))?;
        let mut c = ExperimentConfig::defaults(kind);
        for (k, v) in &pairs {
            if k != "kind" {
                c.set(k, v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text, kind)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = num(key, value)?,
            "s" => self.s = num(key, value)?,
            "epsilons" => self.epsilons = list(key, value)?,
            "resolution" => self.resolution = num(key, value)?,
            "resolutions" => self.resolutions = list(key, value)?,
            "half_width" => self.half_width = num(key, value)?,
            "hole_radius" => self.hole_radius = num(key, value)?,
            "tau" => self.strat.tau = num(key, value)?,
            "rho" => self.strat.rho = num(key, value)?,
            "eta" => self.strat.eta = num(key, value)?,
            "eta_prime" => self.strat.eta_prime = num(key, value)?,
            "gamma" => self.strat.gamma = num(key, value)?,
            "k_thresh" => self.strat.k_thresh = num(key, value)?,
            "taus" => self.taus = list(key, value)?,
            "radii" => self.radii = list(key, value)?,
            "delta_dr" => self.delta_dr = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "mask_file" => self.mask_file = Some(PathBuf::from(value)),
            "mask_origin" => {
                let v: Vec<f64> = list(key, value)?;
                if v.len() != 2 {
                    return Err(Error::Config("mask_origin takes two numbers".into()));
                }
                self.mask_origin = [v[0], v[1]];
            }
            "mask_h" => self.mask_h = num(key, value)?,
            "window_radius" => self.window_radius = num(key, value)?,
            "pixels" => self.pixels = list(key, value)?,
            "beta_measures" => self.beta_measures = num(key, value)?,
            "beta_planes" => self.beta_planes = num(key, value)?,
            "packing_configs" => self.packing_configs = num(key, value)?,
            "refinements" => self.refinements = list(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.n == 1 || self.n == 2) {
            return bad(format!("n = {} not in {{1, 2}}", self.n));
        }
        if !(self.s > 0.0 && self.s < 0.5) {
            return bad(format!("s = {} not in (0, 1/2)", self.s));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("epsilons must be a non-empty list in (0, 1)".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be strictly descending".into());
        }
        if !(self.resolution >= 1.0) || self.resolutions.iter().any(|&r| !(r >= 1.0)) {
            return bad("resolutions must be at least 1 node per epsilon".into());
        }
        if !(self.half_width >= 1.0) {
            return bad("half_width must be at least 1 so that B_1 fits in the box".into());
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return bad("taus must lie in (0, 1)".into());
        }
        if self.radii.iter().any(|&r| !(r > 0.0)) {
            return bad("radii must be positive".into());
        }
        if !(self.delta_dr > 0.0) {
            return bad("delta_dr must be positive".into());
        }
        if self.pixels.is_empty() || self.pixels.iter().any(|&m| m < 4) {
            return bad("pixels must list sizes of at least 4".into());
        }
        let mut probe = self.strat.clone();
        probe.m = 1.0;
        probe.validate()?;
        if self.kind.is_covering() {
            if let Some(&e) = self.epsilons.iter().find(|&&e| self.strat.k_thresh * e >= 1.0) {
                return bad(format!("k_thresh * epsilon = {} must stay below 1", self.strat.k_thresh * e));
            }
            if self.n != 2 {
                return bad("covering experiments run on the planar circle interface (n = 2)".into());
            }
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|p| !p.trim().is_empty()).map(|p| num(key, p)).collect()
}
