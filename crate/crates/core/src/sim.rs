//! Monte Carlo experiment drivers and result persistence.
//!
//! Every experiment is described by an [`ExperimentSpec`] and produces a
//! [`ResultTable`]: one row per (axis value, scheme), CSV on disk with a
//! JSON sidecar carrying the spec, seed, and a content hash. Trials draw
//! their randomness from streams keyed by (seed, axis, trial), so points
//! can be computed in any order or in parallel without changing a single
//! bit of the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{sample_scenario, ChannelRealization, IrsPhaseConfig, ScenarioConfig};
use crate::beamforming::{
    analog_stages, bd_digital, compose_hybrid, dpa_digital, effective_channel, evaluate_rates,
    fdb_baseline, irs_configs_for_mode, irs_design, FdbScheme, IrsMode, RateReport, UserPaths,
};
use crate::codebook::{
    build_benchmark, build_psd, build_td, gain_toward_sin, sine_grid, CodebookKind,
    HierarchicalCodebook,
};
use crate::error::Error;
use crate::rng::derive_rng;
use crate::training::{
    detection_trial, exhaustive_direct, exhaustive_reflect, run_cooperative, search_count,
    CountScope, MeasurementModel, ReflectSearch, SearchMode, TrainingMethod, TrainingOutcome,
};
use crate::{CMat, Result};

const SALT_DETECT_ANGLE: u64 = 0xa2;
const SALT_DETECT_NOISE: u64 = 0xa3;
const SALT_RATE: u64 = 0xb1;
const SALT_JOINT: u64 = 0xc1;

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DetectCurve,
    PatternDump,
    RateSingle,
    RateMulti,
    JointPipeline,
    ComplexityTable,
}

/// Full description of one experiment; hashing this fixes the run identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: ScenarioConfig,
    /// Codebook kinds to compare (detect curve) or to use (joint pipeline,
    /// first entry).
    #[serde(default)]
    pub codebooks: Vec<CodebookKind>,
    /// Narrow-beam grid size N.
    #[serde(default)]
    pub num_narrow: usize,
    /// SNR axis in dB (detection experiments).
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Transmit power axis in dBm (rate experiments).
    #[serde(default)]
    pub power_dbm: Vec<f64>,
    #[serde(default)]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Pilot SNR during training; None trains noiselessly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_snr_db: Option<f64>,
    /// Grid sizes for the complexity table.
    #[serde(default)]
    pub complexity_n: Vec<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        match self.kind {
            ExperimentKind::DetectCurve => {
                if self.snr_db.is_empty() {
                    return Err(Error::Config("detect curve needs an SNR axis".into()));
                }
                if self.codebooks.is_empty() {
                    return Err(Error::Config("detect curve needs codebook kinds".into()));
                }
            }
            ExperimentKind::RateSingle | ExperimentKind::RateMulti
            | ExperimentKind::JointPipeline => {
                if self.power_dbm.is_empty() {
                    return Err(Error::Config("rate experiments need a power axis".into()));
                }
            }
            ExperimentKind::ComplexityTable => {
                if self.complexity_n.is_empty() {
                    return Err(Error::Config("complexity table needs grid sizes".into()));
                }
            }
            ExperimentKind::PatternDump => {}
        }
        if self.kind != ExperimentKind::ComplexityTable && self.kind != ExperimentKind::PatternDump
        {
            if self.trials == 0 {
                return Err(Error::Config("need at least one trial".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON of the spec; the basis of the run identity.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialization cannot fail")
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Run identity attached to every persisted result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
}

/// One measured cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: f64,
    pub scheme: String,
    pub value: f64,
    pub trials: u64,
    pub std_error: f64,
}

/// Rows plus labels and identity; renders to CSV with a JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub axis_label: String,
    pub value_label: String,
    pub rows: Vec<ResultRow>,
    pub metadata: RunMetadata,
}

impl ResultTable {
    fn new(spec: &ExperimentSpec, axis_label: &str, value_label: &str) -> Self {
        let hash = spec.config_hash();
        ResultTable {
            axis_label: axis_label.to_string(),
            value_label: value_label.to_string(),
            rows: Vec::new(),
            metadata: RunMetadata {
                run_id: hash[..12].to_string(),
                config_hash: hash,
                seed: spec.seed,
            },
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},scheme,{},trials,std_error\n",
            self.axis_label, self.value_label
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.axis, r.scheme, r.value, r.trials, r.std_error
            ));
        }
        out
    }

    /// Sidecar JSON carrying the run identity and the full spec.
    pub fn sidecar_json(&self, spec: &ExperimentSpec) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            metadata: &'a RunMetadata,
            axis_label: &'a str,
            value_label: &'a str,
            spec: &'a ExperimentSpec,
        }
        serde_json::to_string_pretty(&Sidecar {
            metadata: &self.metadata,
            axis_label: &self.axis_label,
            value_label: &self.value_label,
            spec,
        })
        .expect("sidecar serialization cannot fail")
    }

    /// Value of a (axis, scheme) cell, when present.
    pub fn value(&self, axis: f64, scheme: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.axis == axis && r.scheme == scheme)
    }
}

/// Build a codebook of the requested kind.
pub fn build_codebook(
    kind: CodebookKind,
    geom: &crate::array::ArrayGeometry,
    num_narrow: usize,
    hybrid_rf: Option<usize>,
) -> Result<HierarchicalCodebook> {
    match kind {
        CodebookKind::TreeDictionary => build_td(geom, num_narrow, hybrid_rf),
        CodebookKind::PsDeactivation => build_psd(geom, num_narrow),
        CodebookKind::UniformBenchmark => build_benchmark(geom, num_narrow, hybrid_rf),
    }
}

// ---------------------------------------------------------------------------
// Detection-rate curves

/// Detection rate per (SNR, codebook kind). Incoming directions are drawn
/// uniformly from the quantized sine grid that the whole training protocol
/// resolves (all codebooks see the same directions per trial; only the
/// noise streams differ), and a trial counts as correct when the selected
/// leaf covers the direction.
pub fn run_detect_curve(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let geom = spec.scenario.user_array;
    let books: Vec<HierarchicalCodebook> = spec
        .codebooks
        .iter()
        .map(|&k| build_codebook(k, &geom, spec.num_narrow, None))
        .collect::<Result<_>>()?;
    let grid_sines = crate::codebook::narrow_direction_sines(spec.num_narrow);

    let mut table = ResultTable::new(spec, "snr_db", "detection_rate");
    for (axis_idx, &snr_db) in spec.snr_db.iter().enumerate() {
        let snr = 10f64.powf(snr_db / 10.0);
        for (ci, book) in books.iter().enumerate() {
            let hits: u64 = (0..spec.trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut angle_rng =
                        derive_rng(spec.seed, &[SALT_DETECT_ANGLE, axis_idx as u64, trial]);
                    let pick: usize =
                        rand::Rng::gen_range(&mut angle_rng, 0..grid_sines.len());
                    let sin_true = grid_sines[pick];
                    let mut noise_rng = derive_rng(
                        spec.seed,
                        &[SALT_DETECT_NOISE, axis_idx as u64, trial, ci as u64],
                    );
                    u64::from(detection_trial(book, sin_true, snr, &mut noise_rng))
                })
                .sum();
            let p = hits as f64 / spec.trials as f64;
            let se = (p * (1.0 - p) / spec.trials as f64).sqrt();
            table.rows.push(ResultRow {
                axis: snr_db,
                scheme: book.kind.label().to_string(),
                value: p,
                trials: spec.trials as u64,
                std_error: se,
            });
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Rate experiments

/// Which digital stage a hybrid design uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DigitalKind {
    Dpa,
    Bd,
}

/// Assemble each user's true channel under its designed reflector configs.
pub fn assemble_user_channels(
    reals: &[ChannelRealization],
    configs: &[Vec<IrsPhaseConfig>],
) -> Result<Vec<CMat>> {
    reals
        .iter()
        .zip(configs)
        .map(|(r, c)| crate::array::assemble_channel(r, c))
        .collect()
}

/// Design a hybrid beamformer from per-user path knowledge and evaluate it
/// on the given true channels.
pub fn hybrid_rates(
    scenario: &ScenarioConfig,
    reals: &[ChannelRealization],
    users: &[UserPaths],
    channels: &[CMat],
    digital_kind: DigitalKind,
    power: f64,
    noise_power: f64,
) -> Result<RateReport> {
    let stages = analog_stages(&scenario.bs_array, &scenario.user_array, users)?;
    let digital = match digital_kind {
        DigitalKind::Dpa => dpa_digital(&stages, power, noise_power)?,
        DigitalKind::Bd => {
            let effective: Vec<CMat> = (0..users.len())
                .map(|k| effective_channel(k, &stages, reals[k].gain_product()))
                .collect();
            bd_digital(&effective, power, noise_power)?.0
        }
    };
    let set = compose_hybrid(&stages, &digital)?;
    evaluate_rates(channels, &set, power, noise_power)
}

/// Scheme labels of the rate experiments, in the column order produced by
/// [`rate_trial_values`].
pub fn rate_scheme_labels(multi: bool) -> Vec<&'static str> {
    if multi {
        vec!["fdb-optimal-irs", "hb-bd", "hb-dpa", "fdb-random-irs", "fdb-no-irs"]
    } else {
        vec!["fdb-optimal-irs", "hb-dpa", "fdb-random-irs", "fdb-no-irs"]
    }
}

/// One realization of the rate experiment: values[power_idx][scheme_idx],
/// schemes ordered as in [`rate_scheme_labels`]. Exposed so paired
/// per-trial comparisons can reuse the exact production path.
pub fn rate_trial_values(spec: &ExperimentSpec, trial: u64, multi: bool) -> Result<Vec<Vec<f64>>> {
    let sc = &spec.scenario;
    let reals = sample_scenario(sc, trial)?;
    let k_users = reals.len();
    let streams: Vec<usize> = reals.iter().map(|r| 1 + r.num_irs()).collect();
    let fdb_scheme = if multi {
        FdbScheme::ZeroForcing
    } else {
        FdbScheme::Svd
    };

    // Channels under the three reflector modes; mode draws use their own
    // streams so adding a scheme never shifts another one's randomness.
    let mode_channels = |mode: IrsMode, salt: u64| -> Result<Vec<CMat>> {
        let configs: Vec<Vec<IrsPhaseConfig>> = reals
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut rng = derive_rng(spec.seed, &[SALT_RATE, trial, salt, k as u64]);
                irs_configs_for_mode(r, sc.beta, mode, &mut rng)
            })
            .collect::<Result<_>>()?;
        assemble_user_channels(&reals, &configs)
    };
    let h_opt = mode_channels(IrsMode::Optimal, 1)?;
    let h_rand = mode_channels(IrsMode::Random, 2)?;
    let h_off = mode_channels(IrsMode::Off, 3)?;

    // Perfect-CSI hybrid designs share the optimal-mode channels.
    let users: Vec<UserPaths> = reals
        .iter()
        .map(|r| UserPaths::from_truth(r, sc.beta))
        .collect();
    let stages = analog_stages(&sc.bs_array, &sc.user_array, &users)?;
    let effective: Vec<CMat> = (0..k_users)
        .map(|k| effective_channel(k, &stages, reals[k].gain_product()))
        .collect();

    let mut rates = Vec::with_capacity(spec.power_dbm.len());
    for &p_dbm in &spec.power_dbm {
        let power = dbm_to_watts(p_dbm);
        let noise = sc.noise_power_w;
        let mut row = Vec::new();
        row.push(fdb_baseline(&h_opt, fdb_scheme, &streams, power, noise)?.sum);
        if multi {
            let digital = bd_digital(&effective, power, noise)?.0;
            let set = compose_hybrid(&stages, &digital)?;
            row.push(evaluate_rates(&h_opt, &set, power, noise)?.sum);
        }
        let digital = dpa_digital(&stages, power, noise)?;
        let set = compose_hybrid(&stages, &digital)?;
        row.push(evaluate_rates(&h_opt, &set, power, noise)?.sum);
        row.push(fdb_baseline(&h_rand, fdb_scheme, &streams, power, noise)?.sum);
        row.push(fdb_baseline(&h_off, fdb_scheme, &streams, power, noise)?.sum);
        rates.push(row);
    }
    Ok(rates)
}

/// Rate (single-user) or sum-rate (multi-user) versus transmit power for
/// the scheme family, averaged over channel realizations.
pub fn run_rate_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let multi = match spec.kind {
        ExperimentKind::RateSingle => false,
        ExperimentKind::RateMulti => true,
        _ => {
            return Err(Error::Config(
                "rate experiment needs kind rate_single or rate_multi".into(),
            ))
        }
    };
    if multi && spec.scenario.num_users < 2 {
        return Err(Error::Config("multi-user experiment needs at least two users".into()));
    }
    if !multi && spec.scenario.num_users != 1 {
        return Err(Error::Config("single-user experiment needs exactly one user".into()));
    }

    let trials: Vec<Vec<Vec<f64>>> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| rate_trial_values(spec, t, multi))
        .collect::<Result<Vec<_>>>()?;

    let schemes = rate_scheme_labels(multi);
    let mut table = ResultTable::new(spec, "power_dbm", "rate_bits_per_hz");
    for (pi, &p_dbm) in spec.power_dbm.iter().enumerate() {
        for (si, scheme) in schemes.iter().enumerate() {
            let values: Vec<f64> = trials.iter().map(|t| t[pi][si]).collect();
            let (mean, se) = mean_and_stderr(&values);
            table.rows.push(ResultRow {
                axis: p_dbm,
                scheme: scheme.to_string(),
                value: mean,
                trials: values.len() as u64,
                std_error: se,
            });
        }
    }
    Ok(table)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// Joint training + beamforming pipeline

/// Train one user's link and derive its path estimates and reflector
/// configuration.
pub fn train_user(
    scenario: &ScenarioConfig,
    real: &ChannelRealization,
    codebook: &HierarchicalCodebook,
    train_power: f64,
    train_noise: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(UserPaths, Vec<IrsPhaseConfig>, TrainingOutcome)> {
    let model = MeasurementModel::new(real, train_power, train_noise, scenario.beta);
    let mode = SearchMode::for_kind(codebook.kind);
    let outcome = run_cooperative(&model, codebook, mode, rng);
    let users = UserPaths::from_outcome(&outcome, codebook);
    let configs = irs_design(
        &outcome.deltas,
        real.num_reflect_elements(),
        scenario.beta,
        real.irs_geometry.spacing,
    )?;
    Ok((users, configs, outcome))
}

/// One realization of the joint pipeline: values[power_idx] =
/// [perfect-CSI sum rate, estimated-CSI sum rate].
pub fn joint_trial_values(
    spec: &ExperimentSpec,
    codebook: &HierarchicalCodebook,
    trial: u64,
    digital_kind: DigitalKind,
) -> Result<Vec<Vec<f64>>> {
    let sc = &spec.scenario;
    let reals = sample_scenario(sc, trial)?;

    // Training either at the configured pilot SNR or noiselessly.
    let (train_power, train_noise) = match spec.train_snr_db {
        Some(snr_db) => (
            sc.noise_power_w * 10f64.powf(snr_db / 10.0),
            sc.noise_power_w,
        ),
        None => (1.0, 0.0),
    };

    let mut est_users = Vec::with_capacity(reals.len());
    let mut est_configs = Vec::with_capacity(reals.len());
    for (k, real) in reals.iter().enumerate() {
        let mut rng = derive_rng(spec.seed, &[SALT_JOINT, trial, k as u64]);
        let (u, c, _) = train_user(sc, real, codebook, train_power, train_noise, &mut rng)?;
        est_users.push(u);
        est_configs.push(c);
    }
    let est_channels = assemble_user_channels(&reals, &est_configs)?;

    let true_users: Vec<UserPaths> = reals
        .iter()
        .map(|r| UserPaths::from_truth(r, sc.beta))
        .collect();
    let true_configs: Vec<Vec<IrsPhaseConfig>> = reals
        .iter()
        .map(|r| {
            let mut rng = derive_rng(spec.seed, &[SALT_JOINT, trial, 0xff]);
            irs_configs_for_mode(r, sc.beta, IrsMode::Optimal, &mut rng)
        })
        .collect::<Result<_>>()?;
    let true_channels = assemble_user_channels(&reals, &true_configs)?;

    let mut out = Vec::with_capacity(spec.power_dbm.len());
    for &p_dbm in &spec.power_dbm {
        let power = dbm_to_watts(p_dbm);
        let noise = sc.noise_power_w;
        let perfect = hybrid_rates(
            sc,
            &reals,
            &true_users,
            &true_channels,
            digital_kind,
            power,
            noise,
        )?;
        let estimated = hybrid_rates(
            sc,
            &reals,
            &est_users,
            &est_channels,
            digital_kind,
            power,
            noise,
        )?;
        out.push(vec![perfect.sum, estimated.sum]);
    }
    Ok(out)
}

/// Joint pipeline: train with the configured codebook, design beamformers
/// from the estimates, and evaluate on the true channels, against the
/// perfect-CSI hybrid design.
pub fn run_joint_pipeline(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    if spec.kind != ExperimentKind::JointPipeline {
        return Err(Error::Config("spec kind must be joint_pipeline".into()));
    }
    let kind = spec
        .codebooks
        .first()
        .copied()
        .unwrap_or(CodebookKind::TreeDictionary);
    let codebook = build_codebook(kind, &spec.scenario.user_array, spec.num_narrow, None)?;
    let digital_kind = if spec.scenario.num_users > 1 {
        DigitalKind::Bd
    } else {
        DigitalKind::Dpa
    };

    let trials: Vec<Vec<Vec<f64>>> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| joint_trial_values(spec, &codebook, t, digital_kind))
        .collect::<Result<Vec<_>>>()?;

    let schemes = ["hb-perfect-csi", "hb-estimated-csi"];
    let mut table = ResultTable::new(spec, "power_dbm", "rate_bits_per_hz");
    for (pi, &p_dbm) in spec.power_dbm.iter().enumerate() {
        for (si, scheme) in schemes.iter().enumerate() {
            let values: Vec<f64> = trials.iter().map(|t| t[pi][si]).collect();
            let (mean, se) = mean_and_stderr(&values);
            table.rows.push(ResultRow {
                axis: p_dbm,
                scheme: scheme.to_string(),
                value: mean,
                trials: values.len() as u64,
                std_error: se,
            });
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Complexity table

/// Closed-form search counts plus instrumented counters from actual runs.
/// Measured rows use a one-reflector synthetic link; exhaustive counts are
/// measured only up to N = 81.
pub fn emit_complexity_table(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = ResultTable::new(spec, "num_narrow", "search_slots");
    for &n in &spec.complexity_n {
        for method in [
            TrainingMethod::Exhaustive,
            TrainingMethod::TreeDictionary,
            TrainingMethod::PsDeactivation,
        ] {
            let closed = search_count(method, n, CountScope::IrsAssisted)?;
            table.rows.push(ResultRow {
                axis: n as f64,
                scheme: format!("{}-closed-form", method.label()),
                value: closed as f64,
                trials: 0,
                std_error: 0.0,
            });
            let p2p = search_count(method, n, CountScope::PointToPoint)?;
            table.rows.push(ResultRow {
                axis: n as f64,
                scheme: format!("{}-point-to-point", method.label()),
                value: p2p as f64,
                trials: 0,
                std_error: 0.0,
            });
            if let Some(measured) = measured_count(method, n, spec.seed)? {
                table.rows.push(ResultRow {
                    axis: n as f64,
                    scheme: format!("{}-measured", method.label()),
                    value: measured as f64,
                    trials: 1,
                    std_error: 0.0,
                });
            }
        }
    }
    Ok(table)
}

/// Instrumented slot count from an actual noiseless run on a one-reflector
/// link.
fn measured_count(method: TrainingMethod, n: usize, seed: u64) -> Result<Option<u64>> {
    let geom = crate::array::ArrayGeometry::half_wavelength(9.min(n))?;
    let real = synthetic_on_grid_link(&geom, n, 1, seed)?;
    let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
    let mut rng = derive_rng(seed, &[0xce, n as u64]);
    match method {
        TrainingMethod::Exhaustive => {
            if n > 81 {
                return Ok(None);
            }
            let cb = build_td(&geom, n, None)?;
            let mut direct_model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
            direct_model.include_direct = false;
            let (_, c_direct) = exhaustive_direct(&model, &cb, &mut rng);
            let (_, _, c_reflect) =
                exhaustive_reflect(&direct_model, &cb, 0, ReflectSearch::FullQuadruple, &mut rng)?;
            Ok(Some(c_direct + c_reflect))
        }
        TrainingMethod::TreeDictionary => {
            let cb = build_td(&geom, n, None)?;
            let out = run_cooperative(&model, &cb, SearchMode::Serial, &mut rng);
            Ok(Some(out.search_count))
        }
        TrainingMethod::PsDeactivation => {
            let cb = build_psd(&geom, n)?;
            let out = run_cooperative(&model, &cb, SearchMode::ReceiveParallel, &mut rng);
            Ok(Some(out.search_count))
        }
    }
}

/// A synthetic link whose every angle lies exactly on the N-point grid;
/// used by oracles and instrumented runs.
pub fn synthetic_on_grid_link(
    geom: &crate::array::ArrayGeometry,
    num_narrow: usize,
    num_irs: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    use crate::array::{CascadeLegs, PathParams};
    use rand::Rng;
    let sines = crate::codebook::narrow_direction_sines(num_narrow);
    let mut rng = derive_rng(seed, &[0x9d1d, num_narrow as u64, num_irs as u64]);
    let mut pick = |rng: &mut rand_chacha::ChaCha8Rng| sines[rng.gen_range(0..num_narrow)].asin();
    let mut loss = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.gen_range(-5.0..-3.0));
    let direct = {
        let aod = pick(&mut rng);
        let aoa = pick(&mut rng);
        let l = loss(&mut rng);
        PathParams::new(aod, aoa, 3.0, l)?
    };
    let cascades = (0..num_irs)
        .map(|_| {
            let in_aod = pick(&mut rng);
            let in_aoa = pick(&mut rng);
            let in_loss = loss(&mut rng);
            let out_aod = pick(&mut rng);
            let out_aoa = pick(&mut rng);
            let out_loss = loss(&mut rng);
            Ok(CascadeLegs {
                inbound: PathParams::new(in_aod, in_aoa, 4.0, in_loss)?,
                outbound: PathParams::new(out_aod, out_aoa, 4.5, out_loss)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ChannelRealization::from_paths(
        geom,
        geom,
        geom,
        direct,
        cascades,
        1.0,
        (2.0, 2.0),
    ))
}

// ---------------------------------------------------------------------------
// Beam-pattern dump

/// Gain of every beam of a codebook stage over a sine-space grid, as
/// (stage, index, sin_psi, gain) rows.
pub fn pattern_rows(
    codebook: &HierarchicalCodebook,
    stage: Option<usize>,
    grid_points: usize,
) -> Vec<(usize, usize, f64, f64)> {
    let grid = sine_grid(grid_points);
    let mut rows = Vec::new();
    for (si, beams) in codebook.stages.iter().enumerate() {
        let s = si + 1;
        if stage.is_some_and(|want| want != s) {
            continue;
        }
        for b in beams {
            for &x in &grid {
                rows.push((s, b.index, x, gain_toward_sin(&b.weights, &codebook.geometry, x)));
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::indoor_default;

    fn detect_spec() -> ExperimentSpec {
        ExperimentSpec {
            kind: ExperimentKind::DetectCurve,
            scenario: indoor_default(1, 0, 8),
            codebooks: vec![CodebookKind::TreeDictionary, CodebookKind::PsDeactivation],
            num_narrow: 27,
            snr_db: vec![-40.0, 30.0],
            power_dbm: vec![],
            trials: 400,
            seed: 7,
            train_snr_db: None,
            complexity_n: vec![],
        }
    }

    #[test]
    fn detect_curve_extremes() {
        let table = run_detect_curve(&detect_spec()).unwrap();
        for kind in ["td", "psd"] {
            let high = table.value(30.0, kind).unwrap();
            assert!(high.value > 0.99, "{kind} high-SNR rate {}", high.value);
            let low = table.value(-40.0, kind).unwrap();
            assert!(low.value < 0.2, "{kind} low-SNR rate {}", low.value);
        }
        assert!(table.rows.iter().all(|r| r.std_error >= 0.0));
    }

    #[test]
    fn detect_curve_deterministic() {
        let a = run_detect_curve(&detect_spec()).unwrap();
        let b = run_detect_curve(&detect_spec()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn rate_experiment_shapes_and_determinism() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::RateMulti,
            scenario: indoor_default(3, 2, 16),
            codebooks: vec![],
            num_narrow: 27,
            snr_db: vec![],
            power_dbm: vec![0.0, 20.0],
            trials: 4,
            seed: 9,
            train_snr_db: None,
            complexity_n: vec![],
        };
        let a = run_rate_experiment(&spec).unwrap();
        assert_eq!(a.rows.len(), 2 * 5);
        let b = run_rate_experiment(&spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        // Rates grow with power for the interference-free schemes.
        for scheme in ["fdb-optimal-irs", "hb-bd"] {
            let lo = a.value(0.0, scheme).unwrap().value;
            let hi = a.value(20.0, scheme).unwrap().value;
            assert!(hi > lo, "{scheme}: {hi} <= {lo}");
        }
    }

    #[test]
    fn joint_pipeline_smoke() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::JointPipeline,
            scenario: indoor_default(1, 2, 9),
            codebooks: vec![CodebookKind::TreeDictionary],
            num_narrow: 27,
            snr_db: vec![],
            power_dbm: vec![10.0],
            trials: 3,
            seed: 11,
            train_snr_db: None,
            complexity_n: vec![],
        };
        let table = run_joint_pipeline(&spec).unwrap();
        let perfect = table.value(10.0, "hb-perfect-csi").unwrap().value;
        let estimated = table.value(10.0, "hb-estimated-csi").unwrap().value;
        assert!(perfect > 0.0);
        assert!(estimated > 0.0);
        let b = run_joint_pipeline(&spec).unwrap();
        assert_eq!(table.to_csv(), b.to_csv());
    }

    #[test]
    fn noiseless_on_grid_training_reaches_perfect_csi_rate() {
        // When every true angle sits on the grid and training is
        // noiseless, the estimated design coincides with the perfect-CSI
        // design and so does its rate.
        let mut sc = indoor_default(1, 2, 9);
        sc.bs_array = crate::array::ArrayGeometry::half_wavelength(9).unwrap();
        sc.user_array = sc.bs_array;
        sc.irs_array = sc.bs_array;
        let real = synthetic_on_grid_link(&sc.bs_array, 27, 2, 5).unwrap();
        let codebook = build_td(&sc.bs_array, 27, None).unwrap();
        let mut rng = derive_rng(1, &[1]);
        let (est_users, est_configs, _) =
            train_user(&sc, &real, &codebook, 1.0, 0.0, &mut rng).unwrap();

        let true_users = UserPaths::from_truth(&real, sc.beta);
        let mut opt_rng = derive_rng(1, &[2]);
        let true_configs =
            irs_configs_for_mode(&real, sc.beta, IrsMode::Optimal, &mut opt_rng).unwrap();

        let reals = vec![real];
        let est_h = assemble_user_channels(&reals, std::slice::from_ref(&est_configs)).unwrap();
        let true_h = assemble_user_channels(&reals, std::slice::from_ref(&true_configs)).unwrap();
        let power = 0.1;
        let noise = sc.noise_power_w;
        let est = hybrid_rates(
            &sc,
            &reals,
            std::slice::from_ref(&est_users),
            &est_h,
            DigitalKind::Dpa,
            power,
            noise,
        )
        .unwrap();
        let perfect = hybrid_rates(
            &sc,
            &reals,
            std::slice::from_ref(&true_users),
            &true_h,
            DigitalKind::Dpa,
            power,
            noise,
        )
        .unwrap();
        approx::assert_relative_eq!(est.sum, perfect.sum, max_relative = 1e-6);
    }

    #[test]
    fn complexity_table_matches_references() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::ComplexityTable,
            scenario: indoor_default(1, 1, 9),
            codebooks: vec![],
            num_narrow: 0,
            snr_db: vec![],
            power_dbm: vec![],
            trials: 0,
            seed: 3,
            train_snr_db: None,
            complexity_n: vec![27],
        };
        let table = emit_complexity_table(&spec).unwrap();
        let get = |scheme: &str| table.value(27.0, scheme).unwrap().value as u64;
        assert_eq!(get("exhaustive-closed-form"), 532_170);
        assert_eq!(get("td-closed-form"), 519);
        assert_eq!(get("psd-closed-form"), 173);
        assert_eq!(get("exhaustive-measured"), 532_170);
        assert_eq!(get("td-measured"), 519);
        assert_eq!(get("psd-measured"), 173);
    }

    #[test]
    fn spec_hash_is_stable_and_sensitive() {
        let a = detect_spec();
        let mut b = detect_spec();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 8;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn pattern_rows_cover_grid() {
        let geom = crate::array::ArrayGeometry::half_wavelength(8).unwrap();
        let cb = build_td(&geom, 27, None).unwrap();
        let rows = pattern_rows(&cb, Some(1), 101);
        assert_eq!(rows.len(), 3 * 101);
        assert!(rows.iter().all(|r| r.3 >= 0.0 && r.3 <= 1.0 + 1e-9));
    }
}
