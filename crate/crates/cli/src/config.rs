//! Run configuration: a single JSON document, with command-line flags
//! overriding file values. Round-trips losslessly through serde.

use anyhow::{Context, Result};
use lognodal_core::Params;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dim: usize,
    pub lambda: f64,
    pub theta: f64,
    /// Power-nonlinearity exponent; the critical exponent when omitted.
    pub exponent: Option<f64>,
    pub radius: f64,
    pub k: usize,
    pub sign: Sign,
    /// Multiplies the default integrator tolerances.
    pub tol_factor: f64,
    /// Cutoff inner radius for bubble constructions.
    pub rho: f64,
    /// Dyadic sweep powers: eps runs over 2^{-hi}..2^{-lo} times rho.
    pub eps_pow_lo: u32,
    pub eps_pow_hi: u32,
    /// Exponent schedule for continuation; defaults to
    /// `2* - 0.5 * 2^{-n}`, n = 0..8.
    pub p_schedule: Option<Vec<f64>>,
    /// Largest domain count for gap reports.
    pub k_max: usize,
    /// Worker threads for sweeps (default: all cores).
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub format: Format,
    pub plot: bool,
    /// Initial interior nodes for the gluing command.
    pub init_nodes: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 6,
            lambda: 0.0,
            theta: 1.0,
            exponent: None,
            radius: 1.0,
            k: 1,
            sign: Sign::Plus,
            tol_factor: 1.0,
            rho: 0.25,
            eps_pow_lo: 4,
            eps_pow_hi: 10,
            p_schedule: None,
            k_max: 3,
            jobs: None,
            out: PathBuf::from("out"),
            format: Format::Json,
            plot: false,
            init_nodes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(format!("sign must be '+' or '-', got {other}")),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn params(&self) -> Result<Params> {
        let p = match self.exponent {
            Some(p) => Params::new(self.dim, self.lambda, self.theta, p, self.radius),
            None => Params::critical(self.dim, self.lambda, self.theta, self.radius),
        }?;
        Ok(p)
    }

    /// Default continuation schedule `2* - 0.5 * 2^{-n}`, n = 0..8.
    pub fn schedule(&self) -> Vec<f64> {
        match &self.p_schedule {
            Some(s) => s.clone(),
            None => {
                let crit = 2.0 * self.dim as f64 / (self.dim as f64 - 2.0);
                (0..=8).map(|n| crit - 0.5 * 0.5f64.powi(n)).collect()
            }
        }
    }

    pub fn eps_sweep(&self) -> Vec<f64> {
        (self.eps_pow_lo..=self.eps_pow_hi)
            .rev()
            .map(|j| self.rho * 0.5f64.powi(j as i32))
            .collect()
    }

    pub fn shoot_options(&self) -> lognodal_core::ShootOptions {
        lognodal_core::ShootOptions::default().with_tol_factor(self.tol_factor)
    }
}
