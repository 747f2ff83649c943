//! Size, power and tuning experiments.

use serde::{Deserialize, Serialize};

use crate::calibration::{critical_value, default_law, empirical_critical_value};
use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::kernel::{Family, Kernel, Theta};
use crate::linalg::{cholesky, cholesky_solve, Mat};
use crate::lrt::{replicate_statistics, LrtConfig, NullStatistic};
use crate::mixture::MixingDistribution;
use crate::penalty::TuningConstant;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `logit(q_hat) - logit(q)`.
pub fn discrepancy(q_hat: f64, q: f64) -> Result<f64> {
    for (name, v) in [("q_hat", q_hat), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    Ok(logit(q_hat) - logit(q))
}

/// One cell of a tuning design: observed size `q_hat` at nominal `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub a_n: f64,
    pub n: usize,
    pub kernel: Kernel,
    pub y: f64,
    pub q_hat: f64,
    pub q: f64,
}

impl DesignRow {
    pub fn from_rates(kernel: Kernel, a_n: f64, n: usize, q_hat: f64, q: f64) -> Result<Self> {
        Ok(DesignRow { a_n, n, kernel, y: discrepancy(q_hat, q)?, q_hat, q })
    }

    /// Row from a published discrepancy; `q_hat` is reconstructed.
    pub fn from_discrepancy(kernel: Kernel, a_n: f64, n: usize, y: f64, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
        }
        let q_hat = 1.0 / (1.0 + (-(y + logit(q))).exp());
        Ok(DesignRow { a_n, n, kernel, y, q_hat, q })
    }
}

/// `a_n(n) = 0.2 + exp(c0 + c1 / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningModel {
    pub c0: f64,
    pub c1: f64,
}

impl TuningModel {
    pub fn a_n(&self, n: usize) -> f64 {
        0.2 + (self.c0 + self.c1 / n as f64).exp()
    }
}

/// Least squares fit of `y ~ 1 + 1/n + log(a_n - 0.2)`, solved for `y = 0`.
pub fn fit_tuning_model(rows: &[DesignRow]) -> Result<TuningModel> {
    if rows.len() < 4 {
        return Err(Error::Design(format!("need at least 4 rows, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.a_n > 0.2)) {
        return Err(Error::Design(format!("a_n must exceed 0.2, got {}", r.a_n)));
    }
    let distinct = |f: &dyn Fn(&DesignRow) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct(&|r| r.n as f64) < 2 || distinct(&|r| r.a_n) < 2 {
        return Err(Error::Design("rows must span at least two n and two a_n values".into()));
    }
    let mut xtx: Mat<f64, 3> = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for r in rows {
        let x = [1.0, 1.0 / r.n as f64, (r.a_n - 0.2).ln()];
        for i in 0..3 {
            xty[i] += x[i] * r.y;
            for j in 0..3 {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    let l = cholesky(&xtx).ok_or_else(|| Error::Design("singular regression design".into()))?;
    let beta = cholesky_solve(&l, &xty);
    if beta[2].abs() < 1e-12 {
        return Err(Error::Design("no dependence on a_n; the formula cannot be solved".into()));
    }
    Ok(TuningModel { c0: -beta[0] / beta[2], c1: -beta[1] / beta[2] })
}

const TABLE_A_N: [f64; 4] = [0.3, 0.4, 0.5, 0.6];
const TABLE_N: [usize; 4] = [50, 100, 300, 500];
/// Published discrepancies at q = 0.05, rows ordered by n then a_n, columns
/// logistic, extreme-value, t10, normal.
const TABLE_Y: [[f64; 4]; 16] = [
    [-0.1200, 0.0270, -0.0234, -0.1778],
    [-0.2761, -0.1129, -0.2207, -0.4395],
    [-0.4115, -0.2897, -0.3664, -0.5845],
    [-0.5845, -0.3993, -0.5525, -0.7525],
    [0.0413, 0.1253, 0.0146, -0.0106],
    [-0.0561, 0.0188, -0.1083, -0.1557],
    [-0.1485, -0.0990, -0.2104, -0.2815],
    [-0.2520, -0.1952, -0.3175, -0.3783],
    [0.1328, 0.1197, 0.1804, 0.0291],
    [0.0753, 0.0733, 0.1366, -0.0256],
    [0.0063, 0.0188, 0.0909, -0.0853],
    [-0.0539, -0.0299, 0.0393, -0.1509],
    [0.0929, 0.1328, 0.0454, 0.0126],
    [0.0534, 0.0851, 0.0146, -0.0213],
    [0.0209, 0.0413, -0.0170, -0.0650],
    [-0.0213, 0.0000, -0.0517, -0.1037],
];

/// The published 16-row tuning design for one family (Student-t rows were
/// computed with 10 degrees of freedom).
pub fn published_design(family: Family) -> Vec<DesignRow> {
    let (col, kernel) = match family {
        Family::Logistic => (0, Kernel::logistic()),
        Family::ExtremeValue => (1, Kernel::extreme_value()),
        Family::StudentT => (2, Kernel::student_t(10.0).expect("valid dof")),
        Family::Normal => (3, Kernel::normal()),
    };
    let mut out = Vec::with_capacity(16);
    for (i, &n) in TABLE_N.iter().enumerate() {
        for (j, &a) in TABLE_A_N.iter().enumerate() {
            let y = TABLE_Y[4 * i + j][col];
            out.push(DesignRow::from_discrepancy(kernel, a, n, y, 0.05).expect("valid level"));
        }
    }
    out
}

/// Rejection rates of the EM-test on null samples at the limiting-law
/// critical values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type1Result {
    pub kernel: Kernel,
    pub n: usize,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub critical_values: Vec<f64>,
    pub rates: Vec<f64>,
}

pub fn type1_experiment(
    kernel: &Kernel,
    n: usize,
    reps: usize,
    levels: &[f64],
    config: &EmConfig,
    seed: u64,
) -> Result<Type1Result> {
    if reps < 100 {
        return Err(Error::Config(format!("at least 100 replicates are required, got {reps}")));
    }
    let law = default_law(kernel)?;
    let critical_values = levels.iter().map(|&l| critical_value(&law, l)).collect::<Result<Vec<_>>>()?;
    let rows = replicate_statistics(kernel, None, n, reps, seed, &[NullStatistic::Em(config.clone())])?;
    let rates = critical_values
        .iter()
        .map(|&c| rows.iter().filter(|r| r[0] > c).count() as f64 / reps as f64)
        .collect();
    Ok(Type1Result { kernel: *kernel, n, reps, levels: levels.to_vec(), critical_values, rates })
}

/// Power of each statistic at finite-sample critical values simulated from
/// `null_reps` standard-kernel samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub kernel: Kernel,
    pub n: usize,
    pub reps: usize,
    pub null_reps: usize,
    pub level: f64,
    pub statistics: Vec<NullStatistic>,
    pub critical_values: Vec<f64>,
    pub powers: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn power_experiment(
    kernel: &Kernel,
    alternative: &MixingDistribution<f64>,
    n: usize,
    reps: usize,
    null_reps: usize,
    level: f64,
    statistics: &[NullStatistic],
    seed: u64,
) -> Result<PowerResult> {
    if reps == 0 || null_reps < 100 {
        return Err(Error::Config("need reps >= 1 and null_reps >= 100".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let null = replicate_statistics(kernel, None, n, null_reps, seed, statistics)?;
    let alt = replicate_statistics(kernel, Some(alternative), n, reps, seed.wrapping_add(1), statistics)?;
    let mut critical_values = Vec::with_capacity(statistics.len());
    let mut powers = Vec::with_capacity(statistics.len());
    for k in 0..statistics.len() {
        let mut table: Vec<f64> = null.iter().map(|r| r[k]).collect();
        table.sort_by(f64::total_cmp);
        let c = empirical_critical_value(&table, level);
        critical_values.push(c);
        powers.push(alt.iter().filter(|r| r[k] > c).count() as f64 / reps as f64);
    }
    Ok(PowerResult {
        kernel: *kernel,
        n,
        reps,
        null_reps,
        level,
        statistics: statistics.to_vec(),
        critical_values,
        powers,
    })
}

/// Observed EM-test sizes over an `(a_n, n)` grid with fixed `a_n`.
pub fn tuning_experiment(
    kernel: &Kernel,
    a_ns: &[f64],
    ns: &[usize],
    reps: usize,
    q: f64,
    seed: u64,
) -> Result<Vec<DesignRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &a in a_ns {
            let config = EmConfig { a_n: TuningConstant::Fixed(a), ..EmConfig::default() };
            let r = type1_experiment(kernel, n, reps, &[q], &config, seed)?;
            rows.push(DesignRow::from_rates(*kernel, a, n, r.rates[0], q)?);
        }
    }
    Ok(rows)
}

/// Two equal logistic components three scale units apart.
pub fn model_l1() -> MixingDistribution<f64> {
    MixingDistribution::new(0.5, Theta { mu: 0.0, sigma: 1.0 }, Theta { mu: 3.0, sigma: 1.0 })
        .expect("valid model")
}

/// Extreme-value model with a 20% component shifted by 1.4.
pub fn model_e4() -> MixingDistribution<f64> {
    MixingDistribution::new(0.8, Theta { mu: 0.0, sigma: 1.0 }, Theta { mu: 1.4, sigma: 1.0 })
        .expect("valid model")
}

/// Experiment description read by the command line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Type1 {
        kernel: Kernel,
        n: usize,
        reps: usize,
        levels: Vec<f64>,
        #[serde(default)]
        config: EmConfig,
        seed: u64,
    },
    Power {
        kernel: Kernel,
        alternative: MixingDistribution<f64>,
        n: usize,
        reps: usize,
        null_reps: usize,
        level: f64,
        #[serde(default = "default_power_statistics")]
        statistics: Vec<NullStatistic>,
        seed: u64,
    },
    /// Either simulates the design (`a_ns`, `ns`, `reps`) or fits supplied
    /// rows; with neither, fits the published design for `kernel`.
    Tuning {
        kernel: Kernel,
        #[serde(default)]
        a_ns: Vec<f64>,
        #[serde(default)]
        ns: Vec<usize>,
        #[serde(default)]
        reps: usize,
        #[serde(default = "default_q")]
        q: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        rows: Option<Vec<DesignRow>>,
    },
}

fn default_q() -> f64 {
    0.05
}

fn default_power_statistics() -> Vec<NullStatistic> {
    vec![NullStatistic::Em(EmConfig::default()), NullStatistic::Lrt(LrtConfig::default())]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentOutput {
    Type1(Type1Result),
    Power(PowerResult),
    Tuning { rows: Vec<DesignRow>, model: TuningModel },
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    match spec {
        ExperimentSpec::Type1 { kernel, n, reps, levels, config, seed } => {
            type1_experiment(kernel, *n, *reps, levels, config, *seed).map(ExperimentOutput::Type1)
        }
        ExperimentSpec::Power { kernel, alternative, n, reps, null_reps, level, statistics, seed } => {
            power_experiment(kernel, alternative, *n, *reps, *null_reps, *level, statistics, *seed)
                .map(ExperimentOutput::Power)
        }
        ExperimentSpec::Tuning { kernel, a_ns, ns, reps, q, seed, rows } => {
            let rows = match rows {
                Some(r) => r.clone(),
                None if !a_ns.is_empty() && !ns.is_empty() => tuning_experiment(kernel, a_ns, ns, *reps, *q, *seed)?,
                None => published_design(kernel.family()),
            };
            let model = fit_tuning_model(&rows)?;
            Ok(ExperimentOutput::Tuning { rows, model })
        }
    }
}
