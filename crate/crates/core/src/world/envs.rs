//! Builders for the three benchmark environments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArmModel, Kernel, WorldModel};
use crate::error::{Error, Result};

/// Benchmark environments shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    AppMarketing,
    Cpap,
    Armman,
    Custom,
}

impl Environment {
    pub fn name(self) -> &'static str {
        match self {
            Environment::AppMarketing => "app_marketing",
            Environment::Cpap => "cpap",
            Environment::Armman => "armman",
            Environment::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "app_marketing" | "app-marketing" => Ok(Environment::AppMarketing),
            "cpap" => Ok(Environment::Cpap),
            "armman" => Ok(Environment::Armman),
            "custom" => Ok(Environment::Custom),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

fn kernel(rows: &[&[f64]]) -> Kernel {
    Kernel::from_rows(rows.iter().map(|r| r.to_vec()).collect())
        .expect("built-in kernel is row-stochastic")
}

/// Ten identical users with four engagement levels, budget four.
pub fn build_app_marketing() -> WorldModel {
    let passive = kernel(&[
        &[0.7, 0.1, 0.1, 0.1],
        &[0.5, 0.3, 0.1, 0.1],
        &[0.2, 0.4, 0.3, 0.1],
        &[0.1, 0.2, 0.2, 0.5],
    ]);
    let active = kernel(&[
        &[0.1, 0.1, 0.7, 0.1],
        &[0.1, 0.1, 0.1, 0.7],
        &[0.1, 0.1, 0.1, 0.7],
        &[0.05, 0.05, 0.05, 0.85],
    ]);
    let arm = ArmModel::new(passive, active, vec![0.0, 0.33, 0.66, 1.0]).expect("valid arm");
    WorldModel::new(vec![arm; 10], 4).expect("valid world")
}

/// Split of CPAP patients between the two arm types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpapMix {
    pub general: usize,
    pub high_risk: usize,
}

impl Default for CpapMix {
    fn default() -> Self {
        Self {
            general: 10,
            high_risk: 10,
        }
    }
}

pub fn cpap_general_arm() -> ArmModel {
    let passive = kernel(&[
        &[0.1385, 0.1, 0.7615],
        &[0.1, 0.1, 0.8],
        &[0.1257, 0.1245, 0.7498],
    ]);
    let active = kernel(&[&[0.1, 0.1, 0.8], &[0.1, 0.1, 0.8], &[0.1, 0.1, 0.8]]);
    ArmModel::new(passive, active, vec![0.0, 0.5, 1.0]).expect("valid arm")
}

pub fn cpap_high_risk_arm() -> ArmModel {
    let passive = kernel(&[
        &[0.7427, 0.0741, 0.1832],
        &[0.3399, 0.1634, 0.4967],
        &[0.2323, 0.1020, 0.6657],
    ]);
    let active = kernel(&[
        &[0.1427, 0.3741, 0.4832],
        &[0.1399, 0.1, 0.7601],
        &[0.1323, 0.1, 0.7677],
    ]);
    ArmModel::new(passive, active, vec![0.0, 0.5, 1.0]).expect("valid arm")
}

/// Sleep-apnea adherence: general patients first, then high-risk patients.
/// Budget eight.
pub fn build_cpap(mix: CpapMix) -> Result<WorldModel> {
    let mut arms = vec![cpap_general_arm(); mix.general];
    arms.extend(std::iter::repeat_n(cpap_high_risk_arm(), mix.high_risk));
    WorldModel::new(arms, 8)
}

/// ARMMAN beneficiary type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArmmanType {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Fixed(f64),
    Range(f64, f64),
}

use Cell::{Fixed as F, Range as R};

type RowSpec = [Cell; 3];

const ROW_TOP: RowSpec = [R(0.5, 0.95), R(0.0, 0.90), F(0.05)];
const ROW_LOW: RowSpec = [F(0.05), R(0.1, 0.6), R(0.35, 0.85)];

fn armman_spec(t: ArmmanType) -> [[RowSpec; 3]; 2] {
    match t {
        ArmmanType::A => [
            [ROW_TOP, [F(0.05), R(0.0, 0.5), R(0.45, 0.95)], ROW_LOW],
            [ROW_TOP, [R(0.45, 0.95), R(0.0, 0.5), F(0.05)], ROW_LOW],
        ],
        ArmmanType::B => [
            [ROW_TOP, ROW_LOW, ROW_LOW],
            [ROW_TOP, [R(0.15, 0.65), R(0.3, 0.8), F(0.05)], ROW_LOW],
        ],
        ArmmanType::C => [
            [ROW_TOP, ROW_LOW, ROW_LOW],
            [ROW_TOP, [R(0.05, 0.50), R(0.45, 0.90), F(0.05)], ROW_LOW],
        ],
    }
}

pub const ARMMAN_ROW_RETRIES: usize = 10_000;

/// Per-cell `(lo, hi)` bounds of an ARMMAN type, indexed `[action][s][s']`.
pub fn armman_bounds(t: ArmmanType) -> [[[(f64, f64); 3]; 3]; 2] {
    armman_spec(t).map(|k| {
        k.map(|row| {
            row.map(|c| match c {
                Cell::Fixed(v) => (v, v),
                Cell::Range(lo, hi) => (lo, hi),
            })
        })
    })
}

/// Every ranged cell except the last is drawn uniformly; the last ranged cell
/// takes the residual and the row is redrawn if that residual leaves its range.
fn sample_row_spec<R: Rng + ?Sized>(rng: &mut R, spec: &RowSpec) -> Result<Vec<f64>> {
    let residual = spec
        .iter()
        .rposition(|c| matches!(c, Cell::Range(..)))
        .ok_or_else(|| Error::Config("row has no free cell".into()))?;
    for _ in 0..ARMMAN_ROW_RETRIES {
        let mut row = vec![0.0; spec.len()];
        for (i, cell) in spec.iter().enumerate() {
            if i == residual {
                continue;
            }
            row[i] = match *cell {
                Cell::Fixed(v) => v,
                Cell::Range(lo, hi) => rng.gen_range(lo..=hi),
            };
        }
        let rest = 1.0 - row.iter().sum::<f64>();
        if let Cell::Range(lo, hi) = spec[residual] {
            if rest >= lo && rest <= hi {
                row[residual] = rest;
                return Ok(row);
            }
        }
    }
    Err(Error::Sampling {
        what: format!("row {spec:?}"),
        retries: ARMMAN_ROW_RETRIES,
    })
}

pub fn sample_armman_arm<R: Rng + ?Sized>(rng: &mut R, t: ArmmanType) -> Result<ArmModel> {
    let [passive, active] = armman_spec(t);
    let mut draw = |rows: [RowSpec; 3]| -> Result<Kernel> {
        let rows = rows
            .iter()
            .map(|r| sample_row_spec(rng, r))
            .collect::<Result<Vec<_>>>()?;
        Kernel::from_rows(rows)
    };
    let kp = draw(passive)?;
    let ka = draw(active)?;
    ArmModel::new(kp, ka, vec![1.0, 0.5, 0.0])
}

/// Type of each ARMMAN arm in build order: 4 A, 4 B, 12 C.
pub fn armman_types() -> Vec<ArmmanType> {
    let mut types = vec![ArmmanType::A; 4];
    types.extend([ArmmanType::B; 4]);
    types.extend([ArmmanType::C; 12]);
    types
}

/// Maternal-health beneficiaries with kernels drawn inside the per-type
/// ranges. Budget ten.
pub fn build_armman<R: Rng + ?Sized>(rng: &mut R) -> Result<WorldModel> {
    let arms = armman_types()
        .into_iter()
        .map(|t| sample_armman_arm(rng, t))
        .collect::<Result<Vec<_>>>()?;
    WorldModel::new(arms, 10)
}
