//! Batch front-end: simulation reports, discrimination plans, fidelity
//! sweeps and the verification suite. Everything here is a pure function
//! from a config to a serialized report; the binary handles argument
//! parsing, output routing and exit codes.
//!
//! Exit code contract: 0 success, 1 usage or config error, 2 domain error
//! (linearly dependent spectrum), 3 verification failure.

pub mod verify;

use serde::Serialize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::SchmidtSpectrum;
use crate::discrimination::{build_unitary, feasibility_oracle, optimal_failure, q_matrix};
use crate::error::{Error, Result};
use crate::fidelity::{
    banaszek_bound, exact_average, exact_average_parts, f0, f1, f2, BanaszekVariant,
    FidelityReport,
};
use crate::qudit::haar_state;
use crate::teleport::{enumerate_runs, CorrectionStrategy, ProtocolRunRecord};

pub const CSV_VERSION_HEADER: &str = "# qudit-teleport v1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::LinearlyDependent(_) => EXIT_DOMAIN,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown format '{other}' (expected json or csv)"
            ))),
        }
    }
}

/// Fully resolved configuration of one command invocation. Presets are
/// expanded to explicit coefficients before this struct is built, so the
/// serialized config pins every sampled quantity together with the seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub d: usize,
    pub spectrum: Vec<f64>,
    pub strategy: CorrectionStrategy,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<String>,
    pub format: OutputFormat,
}

/// Parses a spectrum argument: the name `maximal` (requires `d`), a JSON
/// array of nonnegative reals, or a comma-separated list of amplitudes.
/// With `amp2` the values are squared amplitudes. Returns the spectrum and
/// whether a preset was expanded.
pub fn parse_spectrum(
    raw: &str,
    d: Option<usize>,
    amp2: bool,
    renormalize: bool,
) -> Result<(SchmidtSpectrum, bool)> {
    if raw == "maximal" {
        let d = d.ok_or_else(|| {
            Error::InvalidConfig("preset 'maximal' requires an explicit --d".into())
        })?;
        return Ok((SchmidtSpectrum::maximal(d)?, true));
    }
    let mut values = Vec::new();
    if raw.trim_start().starts_with('[') {
        values = serde_json::from_str::<Vec<f64>>(raw)
            .map_err(|e| Error::InvalidConfig(format!("cannot parse spectrum array: {e}")))?;
    } else {
        for part in raw.split(',') {
            let trimmed = part.trim();
            let v: f64 = trimmed.parse().map_err(|_| {
                Error::InvalidConfig(format!("cannot parse coefficient '{trimmed}'"))
            })?;
            values.push(v);
        }
    }
    if amp2 {
        for v in &mut values {
            if *v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "squared amplitude {v} is negative"
                )));
            }
            *v = v.sqrt();
        }
    }
    if let Some(d) = d {
        if values.len() != d {
            return Err(Error::InvalidConfig(format!(
                "spectrum has {} coefficients but --d is {d}",
                values.len()
            )));
        }
    }
    let spectrum = if renormalize {
        SchmidtSpectrum::new_renormalized(values)?
    } else {
        SchmidtSpectrum::new(values)?
    };
    Ok((spectrum, false))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub resolution: f64,
    pub failure: f64,
    pub best_p: Vec<f64>,
    pub closed_form_failure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminationSummary {
    pub failure: f64,
    pub success: f64,
    pub phi_norms_sqr: Vec<f64>,
    pub unitarity_residual: f64,
    pub q_min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
}

pub fn discrimination_summary(
    s: &SchmidtSpectrum,
    oracle_resolution: Option<f64>,
) -> Result<DiscriminationSummary> {
    let plan = build_unitary(s)?;
    let q = q_matrix(s, &vec![plan.success; s.d()])?;
    let oracle = match oracle_resolution {
        None => None,
        Some(resolution) => {
            let r = feasibility_oracle(s, resolution)?;
            Some(OracleSummary {
                resolution,
                failure: r.failure,
                best_p: r.best_p,
                closed_form_failure: optimal_failure(s)?,
            })
        }
    };
    Ok(DiscriminationSummary {
        failure: plan.failure,
        success: plan.success,
        phi_norms_sqr: plan
            .phi
            .iter()
            .map(|v| v.iter().map(|c| c.norm_sqr()).sum())
            .collect(),
        unitarity_residual: plan.unitary.unitarity_residual(),
        q_min_eigenvalue: q.min_eigenvalue(),
        oracle,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelitySection {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub analytic: f64,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub trials: usize,
    pub banaszek_corrected: f64,
    pub banaszek_as_written: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksSection {
    pub mc_within_3_stderr: bool,
    pub orderings_hold: bool,
    pub exact_below_banaszek: bool,
    pub conclusive_mass_matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub config: RunConfig,
    pub discrimination: DiscriminationSummary,
    pub fidelities: FidelitySection,
    pub checks: ChecksSection,
    /// Enumerated branch records for one seeded Haar input, on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<ProtocolRunRecord>>,
}

/// Runs the full pipeline for one (spectrum, strategy) configuration and
/// serializes per the configured format.
pub fn cmd_simulate(config: &RunConfig) -> Result<String> {
    cmd_simulate_with_branches(config, false)
}

/// As [`cmd_simulate`]; with `emit_branches` the JSON report additionally
/// carries every measurement branch for one Haar input drawn from the seed.
pub fn cmd_simulate_with_branches(config: &RunConfig, emit_branches: bool) -> Result<String> {
    let spectrum = SchmidtSpectrum::new(config.spectrum.clone())?;
    spectrum.require_li()?;
    let report = FidelityReport::compute(&spectrum, config.strategy, config.trials, config.seed)?;
    let discrimination = discrimination_summary(&spectrum, None)?;

    let parts = exact_average_parts(&spectrum, config.strategy)?;
    let a_min = spectrum.a_min();
    let mass = spectrum.d() as f64 * a_min * a_min;
    let v0 = f0(&spectrum)?;
    let v1 = f1(&spectrum)?;
    let v2 = f2(&spectrum)?;
    let checks = ChecksSection {
        mc_within_3_stderr: (report.mc_mean - report.exact).abs()
            <= 3.0 * report.mc_stderr.max(1e-12),
        orderings_hold: v0 <= v1 + 1e-12 && v1 <= v2 + 1e-12,
        exact_below_banaszek: exact_average(&spectrum, CorrectionStrategy::XAndZ)?
            <= report.banaszek_corrected + 1e-9,
        conclusive_mass_matches: (parts.conclusive - mass).abs() <= 1e-9,
    };

    let fidelities = FidelitySection {
        f0: v0,
        f1: v1,
        f2: v2,
        analytic: report.analytic,
        exact: report.exact,
        mc_mean: report.mc_mean,
        mc_stderr: report.mc_stderr,
        trials: report.trials,
        banaszek_corrected: report.banaszek_corrected,
        banaszek_as_written: report.banaszek_as_written,
    };

    let branches = if emit_branches {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let psi = haar_state(spectrum.d(), &mut rng);
        let runs = enumerate_runs(&spectrum, &psi, config.strategy)?;
        Some(runs.iter().map(|r| r.to_record()).collect())
    } else {
        None
    };

    match config.format {
        OutputFormat::Json => {
            let full = SimulateReport {
                config: config.clone(),
                discrimination,
                fidelities,
                checks,
                branches,
            };
            Ok(format!(
                "{}\n",
                serde_json::to_string_pretty(&full).expect("serializable report")
            ))
        }
        OutputFormat::Csv => Ok(format!(
            "{CSV_VERSION_HEADER}\n{}\n{}\n",
            FidelityReport::csv_header(),
            report.to_csv_row()
        )),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminateReport {
    pub config: RunConfig,
    pub discrimination: DiscriminationSummary,
}

/// Discrimination plan report; `oracle_resolution` additionally runs the
/// grid-search oracle (small dimensions only).
pub fn cmd_discriminate(config: &RunConfig, oracle_resolution: Option<f64>) -> Result<String> {
    let spectrum = SchmidtSpectrum::new(config.spectrum.clone())?;
    spectrum.require_li()?;
    let discrimination = discrimination_summary(&spectrum, oracle_resolution)?;
    let report = DiscriminateReport {
        config: config.clone(),
        discrimination,
    };
    Ok(format!(
        "{}\n",
        serde_json::to_string_pretty(&report).expect("serializable report")
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct SweepGrid {
    pub amin2_start: f64,
    pub amin2_stop: f64,
    pub steps: usize,
}

/// Sweeps the squared minimal coefficient over `(0, 1/d]`, filling the
/// remaining coefficients uniformly, and emits one CSV row per grid point
/// with the closed forms, exact averages and bounds. Ordering violations
/// are reported as an internal-consistency error.
pub fn cmd_sweep(d: usize, grid: &SweepGrid) -> Result<String> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let cap = 1.0 / d as f64;
    if grid.steps < 1 {
        return Err(Error::InvalidGrid("need at least one grid point".into()));
    }
    if !(grid.amin2_start > 0.0 && grid.amin2_start <= grid.amin2_stop) {
        return Err(Error::InvalidGrid(format!(
            "start {} must lie in (0, stop]",
            grid.amin2_start
        )));
    }
    if grid.amin2_stop > cap + 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "stop {} exceeds 1/d = {cap}",
            grid.amin2_stop
        )));
    }

    let mut out = String::new();
    out.push_str(CSV_VERSION_HEADER);
    out.push('\n');
    out.push_str(
        "d,amin2,spectrum,f0,f1,f2,exact_none,exact_x,exact_xz,banaszek_corrected,banaszek_as_written\n",
    );
    for i in 0..grid.steps {
        let amin2 = if grid.steps == 1 {
            grid.amin2_stop
        } else {
            grid.amin2_start
                + (grid.amin2_stop - grid.amin2_start) * i as f64 / (grid.steps - 1) as f64
        };
        let rest = ((1.0 - amin2) / (d as f64 - 1.0)).sqrt();
        let mut coeffs = vec![amin2.sqrt()];
        coeffs.extend(std::iter::repeat(rest).take(d - 1));
        let s = SchmidtSpectrum::new_renormalized(coeffs)?;
        let v0 = f0(&s)?;
        let v1 = f1(&s)?;
        let v2 = f2(&s)?;
        let e_none = exact_average(&s, CorrectionStrategy::NoCorrection)?;
        let e_x = exact_average(&s, CorrectionStrategy::XOnly)?;
        let e_xz = exact_average(&s, CorrectionStrategy::XAndZ)?;
        let bc = banaszek_bound(s.coeffs(), BanaszekVariant::Corrected)?;
        let bw = banaszek_bound(s.coeffs(), BanaszekVariant::AsWritten)?;
        let ordered = v0 <= v1 + 1e-12 && v1 <= v2 + 1e-12 && e_xz <= bc + 1e-9;
        if !ordered {
            return Err(Error::InternalConsistency(format!(
                "fidelity ordering violated at amin2 = {amin2}"
            )));
        }
        let spectrum_field: Vec<String> = s.coeffs().iter().map(|a| format!("{a}")).collect();
        out.push_str(&format!(
            "{d},{amin2},{},{v0},{v1},{v2},{e_none},{e_x},{e_xz},{bc},{bw}\n",
            spectrum_field.join(";")
        ));
    }
    Ok(out)
}
