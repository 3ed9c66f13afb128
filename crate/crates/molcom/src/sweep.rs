//! Power sweeps: analytic and simulated error probabilities per scheme, and
//! the Fano lower bound against binary MOCSK at the same peak rate.

use std::io::Write;
use std::path::Path;

use molcom_core::analysis::CskSolution;
use molcom_core::bounds::{BoundResult, Regime};
use molcom_core::{
    design_thresholds, error_prob, pe_lower_bound, simulate, BoundParams, ChannelParams, Family, MuUnits, SchemeSpec,
    SimConfig, ThresholdSet,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const ERROR_HEADER: [&str; 12] = [
    "experiment",
    "scheme",
    "levels",
    "power_per_bit",
    "p1",
    "p2",
    "lambda0",
    "pe_analytic",
    "pe_mc",
    "mc_ci",
    "thresholds",
    "seed",
];

pub const BOUND_HEADER: [&str; 18] = [
    "experiment",
    "r_max",
    "r_av",
    "ratio",
    "num_types",
    "alphabet_size",
    "p1",
    "lambda0",
    "regime",
    "mu",
    "g",
    "rhs",
    "pe_lower",
    "vacuous",
    "regime_valid",
    "pe_bmocsk",
    "bmocsk_thresholds",
    "mu_units",
];

pub const EXPERIMENT_ERROR: &str = "error_sweep";
pub const EXPERIMENT_ERROR_P2: &str = "error_sweep_csk_p2";
pub const EXPERIMENT_BOUND: &str = "bound_sweep";

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub experiment: &'static str,
    pub scheme: String,
    pub family: Family,
    pub levels: usize,
    pub power_per_bit: f64,
    pub channel: ChannelParams,
    pub pe_analytic: f64,
    pub pe_mc: Option<f64>,
    pub mc_ci: Option<f64>,
    pub thresholds: ThresholdSet,
    pub seed: u64,
    /// CSK only: how well the solved error-propagation system reproduces itself.
    pub csk_residual: Option<f64>,
}

/// One grid point: designed thresholds and the analytic error probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub spec: SchemeSpec,
    pub thresholds: ThresholdSet,
    pub pe: f64,
    pub csk_residual: Option<f64>,
}

pub fn evaluate(family: Family, levels: usize, power_per_bit: f64, channel: &ChannelParams) -> Result<Evaluation> {
    let spec = SchemeSpec::new(family, levels, power_per_bit).map_err(model)?;
    evaluate_spec(spec, channel)
}

pub fn evaluate_spec(spec: SchemeSpec, channel: &ChannelParams) -> Result<Evaluation> {
    let thresholds = design_thresholds(&spec, channel).map_err(model)?;
    let pe = error_prob(&spec, &thresholds, channel).map_err(model)?.avg_pe;
    let csk_residual = match spec.family() {
        Family::Csk => Some(CskSolution::solve(&spec, &thresholds, channel).map_err(model)?.fixed_point_residual()),
        _ => None,
    };
    Ok(Evaluation { spec, thresholds, pe, csk_residual })
}

fn model(e: impl std::fmt::Display) -> Error {
    Error::config(format!("model: {e}"))
}

/// Per-row simulation seed derived from the experiment seed (splitmix64).
pub fn row_seed(base: u64, row: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(row + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ErrorJob {
    experiment: &'static str,
    family: Family,
    levels: usize,
    power: f64,
    channel: ChannelParams,
}

/// Analytic and Monte Carlo error probability for every scheme and power.
///
/// With `csk_p2_variant` set, CSK schemes are evaluated a second time at that
/// next-slot hitting probability. Rows come back in grid order; `mc_symbols
/// = 0` skips simulation.
pub fn run_error_sweep(cfg: &ExperimentConfig, mc_symbols: u64) -> Result<Vec<ErrorRow>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    let mut push = |experiment, channel: ChannelParams, csk_only: bool| {
        for &(family, levels) in &cfg.schemes {
            if csk_only && family != Family::Csk {
                continue;
            }
            for &power in &cfg.power_grid {
                jobs.push(ErrorJob { experiment, family, levels, power, channel });
            }
        }
    };
    push(EXPERIMENT_ERROR, cfg.channel, false);
    if let Some(p2) = cfg.csk_p2_variant {
        let variant = cfg.channel.with_p2(p2).map_err(|e| Error::config(e.to_string()))?;
        push(EXPERIMENT_ERROR_P2, variant, true);
    }

    jobs.par_iter()
        .enumerate()
        .map(|(i, job)| {
            let eval = evaluate(job.family, job.levels, job.power, &job.channel)?;
            let seed = row_seed(cfg.seed, i as u64);
            let (pe_mc, mc_ci) = if mc_symbols > 0 {
                let sim = simulate(&SimConfig {
                    scheme: eval.spec.clone(),
                    thresholds: eval.thresholds.clone(),
                    params: job.channel,
                    num_symbols: mc_symbols,
                    seed,
                })
                .map_err(model)?;
                (Some(sim.avg_pe), sim.ci_halfwidth)
            } else {
                (None, None)
            };
            Ok(ErrorRow {
                experiment: job.experiment,
                scheme: eval.spec.label(),
                family: job.family,
                levels: job.levels,
                power_per_bit: job.power,
                channel: job.channel,
                pe_analytic: eval.pe,
                pe_mc,
                mc_ci,
                thresholds: eval.thresholds,
                seed,
                csk_residual: eval.csk_residual,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub params: BoundParams,
    pub lambda0: f64,
    pub result: BoundResult,
    pub pe_bmocsk: f64,
    pub bmocsk_thresholds: ThresholdSet,
    pub mu_units: MuUnits,
}

/// Fano lower bound for every peak rate and alphabet size, alongside binary
/// MOCSK with rates `{0, r_max}` on the configured channel.
pub fn run_bound_sweep(cfg: &ExperimentConfig) -> Result<Vec<BoundRow>> {
    cfg.validate()?;
    let per_r: Vec<Result<Vec<BoundRow>>> = cfg
        .r_max_grid
        .par_iter()
        .map(|&r_max| {
            let spec = SchemeSpec::with_rates(Family::Mocsk, vec![0.0, r_max]).map_err(model)?;
            let eval = evaluate_spec(spec, &cfg.channel)?;
            cfg.bound_alphabets
                .iter()
                .map(|&b| {
                    let params = BoundParams::with_ratio(cfg.channel.p1(), r_max, cfg.bound_ratio, cfg.bound_types, b)
                        .map_err(model)?;
                    let result = pe_lower_bound(&params, cfg.mu_units).map_err(model)?;
                    Ok(BoundRow {
                        params,
                        lambda0: cfg.channel.lambda0(),
                        result,
                        pe_bmocsk: eval.pe,
                        bmocsk_thresholds: eval.thresholds.clone(),
                        mu_units: cfg.mu_units,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_r {
        rows.extend(r?);
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_error_csv<W: Write>(rows: &[ErrorRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ERROR_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.to_owned(),
            r.scheme.clone(),
            r.levels.to_string(),
            num(r.power_per_bit),
            num(r.channel.p1()),
            num(r.channel.p2()),
            num(r.channel.lambda0()),
            num(r.pe_analytic),
            opt_num(r.pe_mc),
            opt_num(r.mc_ci),
            r.thresholds.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bound_csv<W: Write>(rows: &[BoundRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_HEADER)?;
    for r in rows {
        let p = &r.params;
        w.write_record([
            EXPERIMENT_BOUND.to_owned(),
            num(p.r_max()),
            num(p.r_av()),
            num(p.ratio()),
            p.num_types().to_string(),
            p.alphabet_size().to_string(),
            num(p.p1()),
            num(r.lambda0),
            match r.result.cap.regime {
                Regime::HighRatio => "high_ratio",
                Regime::LowRatio => "low_ratio",
            }
            .to_owned(),
            opt_num(r.result.cap.mu),
            num(r.result.cap.g),
            num(r.result.rhs),
            num(r.result.pe_lower),
            r.result.vacuous.to_string(),
            r.result.cap.regime_valid.to_string(),
            num(r.pe_bmocsk),
            r.bmocsk_thresholds.to_string(),
            mu_units_name(r.mu_units).to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mu_units_name(units: MuUnits) -> &'static str {
    match units {
        MuUnits::AsPrinted => "printed",
        MuUnits::Nats => "nats",
    }
}

/// Modelling conventions behind the numbers, written next to each CSV.
pub fn metadata(cfg: &ExperimentConfig) -> String {
    let mut m = String::new();
    let mut line = |k: &str, v: &str| {
        m.push_str(k);
        m.push('=');
        m.push_str(v);
        m.push('\n');
    };
    line("csk_mocsk_rates", "equally spaced 0..(L-1)d, mean rate / log2(L) = power_per_bit");
    line("mosk_rate", "every symbol emits power_per_bit * log2(L) on its own molecule type");
    line("mocsk_parity", "slot index 0, 2, 4, .. uses type A1; 1, 3, 5, .. uses type A2");
    line("cold_start", "no emission before slot 0; previous decision starts at symbol 0");
    line("warmup_slots_excluded", "1");
    line("mosk_ambiguous", "flagged as an error; emitted symbol is the largest count, lowest index on ties");
    line("csk_levels_gt_2", "stationary misdecode matrix of the (sent, decided) chain with one-slot memory");
    line("mosk_inactive_types", "observed with ambient noise lambda0");
    line("threshold_rule", "count < tau decodes to the lower symbol; MOSK type fires when count > tau");
    line("bound_gamma", "r_max");
    line("bound_residual_terms", "dropped (asymptotic bound)");
    line("bound_mu_units", mu_units_name(cfg.mu_units));
    line("bound_aggregation", "log2|B| - M * G with M = num_types");
    line("bmocsk_comparison_rates", "0, r_max");
    if let Some(d) = cfg.distance_um {
        line("distance_um_unused", &num(d));
    }
    if let Some(t) = cfg.slot_s {
        line("slot_s_unused", &num(t));
    }
    m
}

pub fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|source| Error::Csv { path: path.to_owned(), source })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_metadata(csv_path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta");
    let path = std::path::PathBuf::from(name);
    std::fs::write(&path, metadata(cfg)).map_err(|e| Error::io(path, e))
}
