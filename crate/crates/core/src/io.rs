//! Data loading, reports and plot tables.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{limit_law_for, p_value, LimitLaw};
use crate::em::{em_fit, EmConfig, EmFit};
use crate::error::{Error, Result};
use crate::geometry::LimitCase;
use crate::kernel::Kernel;
use crate::lrt::{bootstrap_null, lrt_statistic_with, LrtConfig, NullStatistic};
use crate::mixture::MixingDistribution;
use crate::null_fit::NullFit;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which CSV column holds the series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub column: Column,
    pub has_header: bool,
    pub log_transform: bool,
}

/// Reads one numeric column from CSV text. Row numbers in errors are
/// 1-based file lines.
pub fn parse_series<R: Read>(reader: R, opts: &LoadOptions) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let col = match &opts.column {
        Column::Index(i) => *i,
        Column::Name(name) => {
            if !opts.has_header {
                return Err(Error::Config(format!("column {name:?} selected by name but the file has no header")));
            }
            let headers = rdr.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?;
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse { row: 1, message: format!("no column named {name:?}") })?
        }
    };
    let offset = usize::from(opts.has_header) + 1;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + offset;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let cell = rec.get(col).ok_or_else(|| Error::Parse { row, message: format!("missing column {col}") })?;
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Parse { row, message: format!("non-numeric value {cell:?}") })?;
        if !v.is_finite() {
            return Err(Error::Parse { row, message: format!("non-finite value {cell:?}") });
        }
        if opts.log_transform {
            if v <= 0.0 {
                return Err(Error::Domain(format!("row {row}: log transform needs a positive value, got {v}")));
            }
            out.push(v.ln());
        } else {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySeries("no data rows".into()));
    }
    Ok(out)
}

pub fn load_series(path: &Path, opts: &LoadOptions) -> Result<Vec<f64>> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_series(f, opts)
}

/// File name under which a simulated law is cached.
pub fn law_cache_path(dir: &Path, kernel: &Kernel, draws: usize, seed: u64) -> PathBuf {
    dir.join(format!("limit-{kernel}-{draws}-{seed}-v{TOOL_VERSION}.json"))
}

pub fn write_law(law: &LimitLaw, path: &Path) -> Result<()> {
    let s = serde_json::to_string(law).map_err(|e| Error::Json(e.to_string()))?;
    fs::write(path, s).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_law(path: &Path) -> Result<LimitLaw> {
    let s = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}

/// Loads the law from `dir` when cached, otherwise simulates and stores it.
pub fn cached_law(dir: &Path, kernel: &Kernel, draws: usize, seed: u64) -> Result<LimitLaw> {
    let path = law_cache_path(dir, kernel, draws, seed);
    if path.exists() {
        let law = read_law(&path)?;
        if law.kernel.as_deref() == Some(&kernel.to_string()) && law.draws == draws && law.seed == seed {
            return Ok(law);
        }
    }
    let law = limit_law_for(kernel, draws, seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_law(&law, &path)?;
    Ok(law)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiSummary {
    pub pi: f64,
    pub statistic: f64,
    pub fit: MixingDistribution<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSummary {
    pub statistic: f64,
    pub p_value: f64,
    pub iterations: usize,
    pub per_pi: Vec<PiSummary>,
    /// Fit from the track attaining the statistic.
    pub fitted: MixingDistribution<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtSummary {
    pub statistic: f64,
    pub p_value: f64,
    pub null_reps: usize,
    pub full_fit: MixingDistribution<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub case: LimitCase,
    pub draws: usize,
    pub seed: u64,
    /// Set for the normal kernel, whose chi-square calibration is a special case.
    pub special_cased: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub tool_version: String,
    pub kernel: Kernel,
    pub n: usize,
    pub transform: Option<String>,
    pub a_n: f64,
    pub null_fit: NullFit<f64>,
    pub em: EmSummary,
    pub lrt: Option<LrtSummary>,
    pub calibration: CalibrationMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub em: EmConfig,
    pub transform: Option<String>,
    /// Run the LRT with this many simulated null samples.
    pub lrt_reps: Option<usize>,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { em: EmConfig::default(), transform: None, lrt_reps: None, seed: 0 }
    }
}

fn summarize(fit: EmFit<f64>, p: f64, iterations: usize) -> (EmSummary, NullFit<f64>, f64) {
    let fitted = fit.best().fit;
    let per_pi = fit.per_pi.iter().map(|t| PiSummary { pi: t.pi, statistic: t.statistic, fit: t.fit }).collect();
    (EmSummary { statistic: fit.statistic, p_value: p, iterations, per_pi, fitted }, fit.null_fit, fit.a_n)
}

/// EM-test (and optionally the LRT) on `data`, calibrated by `law`.
pub fn run_report(kernel: &Kernel, data: &[f64], law: &LimitLaw, opts: &ReportOptions) -> Result<TestReport> {
    if let Some(k) = &law.kernel {
        if *k != kernel.to_string() {
            return Err(Error::Config(format!("calibration table is for {k}, not {kernel}")));
        }
    }
    let fit = em_fit(kernel, data, &opts.em)?;
    let p = p_value(law, fit.statistic)?;
    let (em, null_fit, a_n) = summarize(fit, p, opts.em.iterations);
    let lrt = match opts.lrt_reps {
        Some(reps) => {
            let cfg = LrtConfig::default();
            let table = bootstrap_null(kernel, data.len(), reps, opts.seed, &NullStatistic::Lrt(cfg.clone()))?;
            let r = lrt_statistic_with(kernel, data, &cfg, Some(table))?;
            Some(LrtSummary {
                statistic: r.statistic,
                p_value: r.p_value.expect("table supplied"),
                null_reps: reps,
                full_fit: r.full_fit,
            })
        }
        None => None,
    };
    Ok(TestReport {
        tool_version: TOOL_VERSION.to_string(),
        kernel: *kernel,
        n: data.len(),
        transform: opts.transform.clone(),
        a_n,
        null_fit,
        em,
        lrt,
        calibration: CalibrationMeta {
            case: law.case,
            draws: law.draws,
            seed: law.seed,
            special_cased: law.case.tag == crate::geometry::CaseTag::NormalDegenerate,
        },
    })
}

/// Writes any serializable value as pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Json(e.to_string()))?;
    writeln!(out).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub mixture: f64,
    pub null: f64,
}

/// Fitted mixture and null densities on an even grid over `range`.
pub fn density_curves(
    kernel: &Kernel,
    g: &MixingDistribution<f64>,
    null_fit: &NullFit<f64>,
    range: (f64, f64),
    points: usize,
) -> Result<Vec<CurvePoint>> {
    let (lo, hi) = range;
    if points < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {points}")));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!("degenerate range [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let x = if i + 1 == points { hi } else { lo + step * i as f64 };
            CurvePoint {
                x,
                mixture: g.density(kernel, x),
                null: kernel.log_density_unchecked(x, null_fit.mu_hat, null_fit.sigma_hat).exp(),
            }
        })
        .collect())
}

pub fn write_curves_csv<W: Write>(rows: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Theta;

    fn opts() -> LoadOptions {
        LoadOptions::default()
    }

    #[test]
    fn parses_single_column() {
        assert_eq!(parse_series("1\n2\n3\n".as_bytes(), &opts()).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn log_transform_and_errors() {
        let o = LoadOptions { log_transform: true, ..opts() };
        let v = parse_series(format!("1\n{}\n", std::f64::consts::E).as_bytes(), &o).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        match parse_series("2\n0\n".as_bytes(), &o) {
            Err(Error::Domain(m)) => assert!(m.contains("row 2")),
            other => panic!("{other:?}"),
        }
        match parse_series("1\nabc\n".as_bytes(), &opts()) {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_series("".as_bytes(), &opts()), Err(Error::EmptySeries(_))));
    }

    #[test]
    fn header_and_named_column() {
        let o = LoadOptions { column: Column::Name("b".into()), has_header: true, ..opts() };
        assert_eq!(parse_series("a,b\n1,4\n2,5\n".as_bytes(), &o).unwrap(), vec![4.0, 5.0]);
        let o = LoadOptions { column: Column::Name("b".into()), has_header: true, ..opts() };
        match parse_series("a,b\n1,4\n2,x\n".as_bytes(), &o) {
            Err(Error::Parse { row: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curves_integrate_to_one_and_show_two_modes() {
        let k = Kernel::logistic();
        let null = NullFit { mu_hat: 1.5, sigma_hat: 1.8, loglik: 0.0, penalized_loglik: 0.0, a_n: 0.4 };
        let g = MixingDistribution::new(0.5, Theta::new(0.0, 0.5).unwrap(), Theta::new(5.0, 0.5).unwrap()).unwrap();
        let c = density_curves(&k, &g, &null, (-40.0, 45.0), 20_001).unwrap();
        let trap = |f: &dyn Fn(&CurvePoint) -> f64| {
            c.windows(2).map(|w| 0.5 * (f(&w[0]) + f(&w[1])) * (w[1].x - w[0].x)).sum::<f64>()
        };
        assert!((trap(&|p| p.mixture) - 1.0).abs() < 1e-3);
        assert!((trap(&|p| p.null) - 1.0).abs() < 1e-3);
        let peaks = c.windows(3).filter(|w| w[1].mixture > w[0].mixture && w[1].mixture > w[2].mixture).count();
        assert_eq!(peaks, 2);
        let single = MixingDistribution::new(1.0, Theta::new(0.0, 1.0).unwrap(), Theta::new(5.0, 1.0).unwrap()).unwrap();
        for p in density_curves(&k, &single, &null, (-3.0, 3.0), 7).unwrap() {
            assert!((p.mixture - k.f0(p.x)).abs() < 1e-15);
        }
        assert!(density_curves(&k, &g, &null, (1.0, 1.0), 5).is_err());
        assert!(density_curves(&k, &g, &null, (0.0, 1.0), 1).is_err());
    }
}
