//! Beam training: the exhaustive-search oracle and the cooperative
//! three-phase procedure.
//!
//! Phase 1 recovers each reflector's sine-space difference by sweeping the
//! 2N-1 reflecting-mode configurations inside nine wide-beam intervals.
//! Phase 2 switches every reflector off and finds the direct-path beam pair
//! by a ternary-tree descent on the user side followed by one on the BS
//! side. Phase 3 re-runs the descent once per reflector with the reflector
//! driven at its recovered difference and the known direct-path term
//! subtracted from every measurement.
//!
//! Measurements model y = sqrt(P) w^H H f + n with complex Gaussian noise
//! redrawn independently per test slot. Steps that run in the user-to-BS
//! direction use conjugated codewords on both ends, which makes the
//! measured magnitudes equal to the forward form; the code therefore
//! evaluates the forward quadratic form throughout.
//!
//! Search-count accounting distinguishes serial testing (one receive beam
//! per slot) from receive-parallel testing (three RF chains test all three
//! children in one slot), which is what separates the two codebook kinds in
//! the complexity table.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{arv, ChannelRealization, IrsPhaseConfig};
use crate::codebook::{Beam, CodebookKind, HierarchicalCodebook};
use crate::error::Error;
use crate::{CVec, Cx, Result};

/// How many child beams a receiver can test per time slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    /// One receive beam per slot (tree-dictionary codewords need every RF
    /// chain for a single beam).
    Serial,
    /// Three receive beams per slot (deactivation codewords need one RF
    /// chain each; assumes at least three chains).
    ReceiveParallel,
}

impl SearchMode {
    /// Natural mode for a codebook kind.
    pub fn for_kind(kind: CodebookKind) -> Self {
        match kind {
            CodebookKind::PsDeactivation => SearchMode::ReceiveParallel,
            _ => SearchMode::Serial,
        }
    }
}

/// Candidate sine-space differences {-2 + 2i/N : i = 1..2N-1}.
///
/// With half-wavelength reflector elements the linear profile is
/// 2-periodic in x, so candidates x and x + 2 configure the surface
/// identically; the sweep then shows one pulse per equivalence class in
/// each half of the range. Detection resolves the tie deterministically by
/// reporting the earliest slot that reaches the peak.
pub fn delta_candidates(n: usize) -> Vec<f64> {
    (1..=2 * n - 1)
        .map(|i| -2.0 + 2.0 * i as f64 / n as f64)
        .collect()
}

/// True when two sine-space parameters produce the same half-wavelength
/// reflecting profile (they differ by an even integer).
pub fn same_reflect_profile(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(2.0);
    d.abs() < 1e-9 || (d - 2.0).abs() < 1e-9
}

/// Relative tolerance under which two pulse energies count as the same
/// peak (exact configuration aliases differ only by float rounding).
const PEAK_TOL: f64 = 1e-9;

/// Earliest index whose energy reaches the maximum up to `PEAK_TOL`.
fn earliest_peak(energies: &[f64]) -> usize {
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    energies
        .iter()
        .position(|&e| e >= max * (1.0 - PEAK_TOL))
        .unwrap_or(0)
}

/// Per-phase slot counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounters {
    pub phase1: u64,
    pub phase2: u64,
    pub phase3: u64,
}

impl PhaseCounters {
    pub fn total(&self) -> u64 {
        self.phase1 + self.phase2 + self.phase3
    }
}

/// Everything the cooperative procedure learns about one link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingOutcome {
    /// Recovered sine-space difference per reflector; None when no pulse
    /// cleared the detection threshold.
    pub deltas: Vec<Option<f64>>,
    /// Direct-path narrow-beam indices (BS, user), 1-based.
    pub direct_beams: (usize, usize),
    /// Direct-path loss-amplitude estimate.
    pub direct_loss_estimate: f64,
    /// Cascade narrow-beam indices per reflector.
    pub reflect_beams: Vec<Option<(usize, usize)>>,
    /// Effective cascade amplitude estimate per reflector.
    pub reflect_loss_estimates: Vec<Option<f64>>,
    /// Total tested slots.
    pub search_count: u64,
    pub per_phase_counts: PhaseCounters,
}

/// Cached per-path steering vectors for fast factored measurements.
struct CascadeVectors {
    /// User-side ARV of the outbound leg arrival.
    a_user: CVec,
    /// BS-side ARV of the inbound leg departure.
    a_bs: CVec,
    /// sin of the inbound arrival at the reflector.
    sin_in: f64,
    /// sin of the outbound departure at the reflector.
    sin_out: f64,
    /// eta * N_r * loss_in * loss_out; multiplied by the configured
    /// coupling to give the cascade amplitude.
    amp: f64,
}

/// Signal model binding a channel realization to a pilot power and a noise
/// level. All measurements are evaluated in factored rank-1 form, which is
/// numerically identical to the assembled dense channel.
pub struct MeasurementModel<'a> {
    pub real: &'a ChannelRealization,
    /// Pilot power P in watts.
    pub power: f64,
    /// Noise power sigma_n^2 in watts; zero means noiseless.
    pub noise_power: f64,
    /// Reflection amplitude the surfaces use while training.
    pub reflect_amplitude: f64,
    /// Whether the direct path contributes to measurements.
    pub include_direct: bool,
    direct_user: CVec,
    direct_bs: CVec,
    cascades: Vec<CascadeVectors>,
}

impl<'a> MeasurementModel<'a> {
    pub fn new(
        real: &'a ChannelRealization,
        power: f64,
        noise_power: f64,
        reflect_amplitude: f64,
    ) -> Self {
        let truth = &real.truth;
        let cascades = truth
            .cascades
            .iter()
            .map(|legs| CascadeVectors {
                a_user: arv(&real.user_geometry, legs.outbound.aoa),
                a_bs: arv(&real.bs_geometry, legs.inbound.aod),
                sin_in: legs.inbound.aoa.sin(),
                sin_out: legs.outbound.aod.sin(),
                amp: real.compensation
                    * real.num_reflect_elements() as f64
                    * legs.inbound.loss
                    * legs.outbound.loss,
            })
            .collect();
        Self {
            real,
            power,
            noise_power,
            reflect_amplitude,
            include_direct: true,
            direct_user: arv(&real.user_geometry, truth.direct.aoa),
            direct_bs: arv(&real.bs_geometry, truth.direct.aod),
            cascades,
        }
    }

    /// sqrt(P) * G_t * G_r, the scale dividing energy readings into
    /// loss-amplitude estimates.
    pub fn amplitude_scale(&self) -> f64 {
        self.power.sqrt() * self.real.gain_product()
    }

    fn noise<R: Rng>(&self, rng: &mut R) -> Cx {
        if self.noise_power == 0.0 {
            return Cx::new(0.0, 0.0);
        }
        let s = (self.noise_power / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Cx::new(s * re, s * im)
    }

    /// G_t*G_r * a0 * (w^H u0)(v0^H f), without the pilot amplitude.
    fn direct_term(&self, combiner: &CVec, precoder: &CVec) -> Cx {
        let rx = combiner.dotc(&self.direct_user);
        let tx = self.direct_bs.dotc(precoder);
        rx * tx * self.real.gain_product() * self.real.truth.direct.loss
    }

    /// Factored cascade contribution of reflector m under `cfg`.
    fn cascade_term(
        &self,
        m: usize,
        cfg: &IrsPhaseConfig,
        combiner: &CVec,
        precoder: &CVec,
    ) -> Cx {
        let c = &self.cascades[m];
        let coupling = cfg.coupling(c.sin_in, c.sin_out, self.real.irs_geometry.spacing);
        let rx = combiner.dotc(&c.a_user);
        let tx = c.a_bs.dotc(precoder);
        rx * tx * coupling * c.amp * self.real.gain_product()
    }

    /// Direct path only (all reflectors off).
    pub fn measure_direct<R: Rng>(&self, combiner: &CVec, precoder: &CVec, rng: &mut R) -> Cx {
        let mut y = Cx::new(0.0, 0.0);
        if self.include_direct {
            y += self.direct_term(combiner, precoder);
        }
        y * self.power.sqrt() + self.noise(rng)
    }

    /// Direct path plus a single active reflector.
    pub fn measure_single_irs<R: Rng>(
        &self,
        m: usize,
        cfg: &IrsPhaseConfig,
        combiner: &CVec,
        precoder: &CVec,
        rng: &mut R,
    ) -> Cx {
        let mut y = self.cascade_term(m, cfg, combiner, precoder);
        if self.include_direct {
            y += self.direct_term(combiner, precoder);
        }
        y * self.power.sqrt() + self.noise(rng)
    }

    /// The identity-tagged component of reflector m alone; the tag isolates
    /// each reflector's pulse from the direct path and the other surfaces.
    pub fn measure_cascade_tagged<R: Rng>(
        &self,
        m: usize,
        cfg: &IrsPhaseConfig,
        combiner: &CVec,
        precoder: &CVec,
        rng: &mut R,
    ) -> Cx {
        self.cascade_term(m, cfg, combiner, precoder) * self.power.sqrt() + self.noise(rng)
    }

    /// Full composite measurement with one config per reflector; used to
    /// cross-check the factored path against the assembled dense channel.
    pub fn measure_full<R: Rng>(
        &self,
        configs: &[IrsPhaseConfig],
        combiner: &CVec,
        precoder: &CVec,
        rng: &mut R,
    ) -> Result<Cx> {
        if configs.len() != self.cascades.len() {
            return Err(Error::dims("one phase config per reflector"));
        }
        let mut y = Cx::new(0.0, 0.0);
        if self.include_direct {
            y += self.direct_term(combiner, precoder);
        }
        for (m, cfg) in configs.iter().enumerate() {
            y += self.cascade_term(m, cfg, combiner, precoder);
        }
        Ok(y * self.power.sqrt() + self.noise(rng))
    }

    fn reflecting_config(&self, x: f64) -> Result<IrsPhaseConfig> {
        IrsPhaseConfig::reflecting(
            x,
            self.real.num_reflect_elements(),
            self.reflect_amplitude,
            self.real.irs_geometry.spacing,
        )
    }
}

/// Index of the strictly largest energy; ties keep the lowest index.
fn argmax_energy(values: &[Cx]) -> usize {
    let mut best = 0;
    let mut best_e = values[0].norm_sqr();
    for (i, v) in values.iter().enumerate().skip(1) {
        let e = v.norm_sqr();
        if e > best_e {
            best_e = e;
            best = i;
        }
    }
    best
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Phase 1: sweep the reflecting-mode configurations inside the nine
/// stage-1 beam intervals and read each reflector's pulse slot.
///
/// Returns one recovered difference per reflector (None when no pulse
/// clears ten times the interval's median energy) and the slot count.
pub fn phase1<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    mode: SearchMode,
    rng: &mut R,
) -> (Vec<Option<f64>>, u64) {
    let n = codebook.num_narrow;
    let candidates = delta_candidates(n);
    let num_slots = candidates.len();
    let num_irs = model.real.num_irs();
    let stage1 = &codebook.stages[0];

    // energies[m][interval][slot]
    let mut energies = vec![vec![vec![0.0f64; num_slots]; 9]; num_irs];
    let configs: Vec<IrsPhaseConfig> = candidates
        .iter()
        .map(|&x| model.reflecting_config(x).expect("candidate in range"))
        .collect();

    for p in 0..3 {
        for q in 0..3 {
            let interval = p * 3 + q;
            for (slot, cfg) in configs.iter().enumerate() {
                for (m, row) in energies.iter_mut().enumerate() {
                    let y = model.measure_cascade_tagged(
                        m,
                        cfg,
                        &stage1[q].weights,
                        &stage1[p].weights,
                        rng,
                    );
                    row[interval][slot] = y.norm_sqr();
                }
            }
        }
    }

    let count = match mode {
        SearchMode::Serial => 9 * num_slots as u64,
        SearchMode::ReceiveParallel => 3 * num_slots as u64,
    };

    let deltas = energies
        .iter()
        .map(|rows| {
            let mut best_iv = 0usize;
            let mut best_e = -1.0;
            for (iv, row) in rows.iter().enumerate() {
                for &e in row.iter() {
                    if e > best_e {
                        best_e = e;
                        best_iv = iv;
                    }
                }
            }
            let slot = earliest_peak(&rows[best_iv]);
            let mut interval_energies = rows[best_iv].clone();
            let med = median(&mut interval_energies);
            (best_e > 10.0 * med).then(|| candidates[slot])
        })
        .collect();

    (deltas, count)
}

struct Descent {
    bs_index: usize,
    user_index: usize,
    final_measurement: Cx,
    count: u64,
}

/// Three-step ternary descent: joint stage-1 alignment, user-side descent
/// with the BS holding its stage-1 beam, then BS-side descent with the user
/// holding its leaf beam.
fn ternary_descent<F>(codebook: &HierarchicalCodebook, mode: SearchMode, mut measure: F) -> Descent
where
    F: FnMut(&Beam, &Beam) -> Cx,
{
    let stages = codebook.num_stages();
    let stage1 = &codebook.stages[0];
    let mut count = 0u64;

    // Step 1: all nine stage-1 pairs, flattened BS-major.
    let mut ys = Vec::with_capacity(9);
    for p in 0..3 {
        for q in 0..3 {
            ys.push(measure(&stage1[p], &stage1[q]));
        }
    }
    count += match mode {
        SearchMode::Serial => 9,
        SearchMode::ReceiveParallel => 3,
    };
    let n_star = argmax_energy(&ys);
    let mut p_cur = n_star / 3 + 1;
    let mut q_cur = n_star % 3 + 1;
    let mut last = ys[n_star];

    // Step 2: descend the user side.
    for s in 2..=stages {
        let kids = HierarchicalCodebook::children(q_cur);
        let ys: Vec<Cx> = kids
            .iter()
            .map(|&k| measure(&stage1[p_cur - 1], codebook.beam(s, k)))
            .collect();
        count += match mode {
            SearchMode::Serial => 3,
            SearchMode::ReceiveParallel => 1,
        };
        let j = argmax_energy(&ys);
        q_cur = kids[j];
        last = ys[j];
    }

    // Step 3: descend the BS side against the user leaf beam.
    let user_leaf = codebook.beam(stages, q_cur).clone();
    for s in 2..=stages {
        let kids = HierarchicalCodebook::children(p_cur);
        let ys: Vec<Cx> = kids
            .iter()
            .map(|&k| measure(codebook.beam(s, k), &user_leaf))
            .collect();
        count += match mode {
            SearchMode::Serial => 3,
            SearchMode::ReceiveParallel => 1,
        };
        let j = argmax_energy(&ys);
        p_cur = kids[j];
        last = ys[j];
    }

    Descent {
        bs_index: p_cur,
        user_index: q_cur,
        final_measurement: last,
        count,
    }
}

/// Phase 2: direct-path descent with every reflector off. Returns the leaf
/// pair (BS, user), the loss-amplitude estimate, and the slot count.
pub fn phase2<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    mode: SearchMode,
    rng: &mut R,
) -> ((usize, usize), f64, u64) {
    let d = ternary_descent(codebook, mode, |bs, user| {
        model.measure_direct(&user.weights, &bs.weights, rng)
    });
    let est = d.final_measurement.norm() / model.amplitude_scale();
    ((d.bs_index, d.user_index), est, d.count)
}

/// One reflector's cascade descent result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectEstimate {
    pub bs_index: usize,
    pub user_index: usize,
    pub loss_estimate: f64,
}

/// Phase 3: per-reflector cascade descent. The active reflector runs in
/// reflecting mode at its recovered difference while the direct-path
/// contribution predicted from the Phase-2 estimate is subtracted from
/// every measurement. Reflectors without a recovered difference are
/// skipped.
pub fn phase3<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    mode: SearchMode,
    deltas: &[Option<f64>],
    direct_beams: (usize, usize),
    direct_loss_estimate: f64,
    rng: &mut R,
) -> (Vec<Option<ReflectEstimate>>, u64) {
    let stages = codebook.num_stages();
    let m_p = codebook.beam(stages, direct_beams.0).weights.clone();
    let m_q = codebook.beam(stages, direct_beams.1).weights.clone();
    let scale = model.power.sqrt() * model.real.gain_product() * direct_loss_estimate;

    let mut out = Vec::with_capacity(deltas.len());
    let mut count = 0u64;
    for (m, delta) in deltas.iter().enumerate() {
        let Some(x) = delta else {
            out.push(None);
            continue;
        };
        let cfg = model.reflecting_config(*x).expect("recovered delta in range");
        let d = ternary_descent(codebook, mode, |bs, user| {
            let raw = model.measure_single_irs(m, &cfg, &user.weights, &bs.weights, rng);
            let predicted = user.weights.dotc(&m_q) * m_p.dotc(&bs.weights) * scale;
            raw - predicted
        });
        count += d.count;
        out.push(Some(ReflectEstimate {
            bs_index: d.bs_index,
            user_index: d.user_index,
            loss_estimate: d.final_measurement.norm() / model.amplitude_scale(),
        }));
    }
    (out, count)
}

/// Run all three phases and assemble the outcome.
pub fn run_cooperative<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    mode: SearchMode,
    rng: &mut R,
) -> TrainingOutcome {
    let (deltas, c1) = phase1(model, codebook, mode, rng);
    let (direct_beams, direct_loss, c2) = phase2(model, codebook, mode, rng);
    let (reflect, c3) = phase3(model, codebook, mode, &deltas, direct_beams, direct_loss, rng);
    let per_phase = PhaseCounters {
        phase1: c1,
        phase2: c2,
        phase3: c3,
    };
    TrainingOutcome {
        deltas,
        direct_beams,
        direct_loss_estimate: direct_loss,
        reflect_beams: reflect
            .iter()
            .map(|r| r.map(|e| (e.bs_index, e.user_index)))
            .collect(),
        reflect_loss_estimates: reflect.iter().map(|r| r.map(|e| e.loss_estimate)).collect(),
        search_count: per_phase.total(),
        per_phase_counts: per_phase,
    }
}

/// Exhaustive direct-path search over all N x N narrow-beam pairs.
/// Returns 1-based (BS, user) indices and the test count.
pub fn exhaustive_direct<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    rng: &mut R,
) -> ((usize, usize), u64) {
    let bottom = codebook.bottom();
    let n = bottom.len();
    let mut best = (1usize, 1usize);
    let mut best_e = -1.0;
    for (bi, b) in bottom.iter().enumerate() {
        for (ui, u) in bottom.iter().enumerate() {
            let y = model.measure_direct(&u.weights, &b.weights, rng);
            let e = y.norm_sqr();
            if e > best_e {
                best_e = e;
                best = (bi + 1, ui + 1);
            }
        }
    }
    (best, (n * n) as u64)
}

/// Which enumeration the reflected-path oracle uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectSearch {
    /// All N^4 angle quadruples; the reflector is driven at the difference
    /// implied by each hypothesis.
    FullQuadruple,
    /// The reduced N^2 * (2N-1) form over beam pairs and difference
    /// candidates.
    PairsAndDifferences,
}

/// Exhaustive cascaded-path search for one reflector (the others off, the
/// direct path excluded from the measurements). Returns 1-based (BS, user)
/// leaf indices, the recovered difference (snapped to the candidate grid),
/// and the test count. Refuses grids larger than N = 81.
pub fn exhaustive_reflect<R: Rng>(
    model: &MeasurementModel,
    codebook: &HierarchicalCodebook,
    m: usize,
    strategy: ReflectSearch,
    rng: &mut R,
) -> Result<((usize, usize), f64, u64)> {
    let n = codebook.num_narrow;
    if n > 81 {
        return Err(Error::Refused(format!(
            "exhaustive reflected search needs N^4 = {} tests; use the cooperative procedure",
            (n as u64).pow(4)
        )));
    }
    let bottom = codebook.bottom();
    let candidates = delta_candidates(n);
    let num_slots = candidates.len();
    let configs: Vec<IrsPhaseConfig> = candidates
        .iter()
        .map(|&x| model.reflecting_config(x))
        .collect::<Result<_>>()?;

    // Energy table over (BS beam, user beam, slot); the quadruple strategy
    // revisits slots through different angle hypotheses and keeps the
    // strongest reading.
    let mut table = vec![f64::NEG_INFINITY; n * n * num_slots];
    let mut count = 0u64;
    let cell = |bi: usize, ui: usize, slot: usize| (bi * n + ui) * num_slots + slot;

    match strategy {
        ReflectSearch::FullQuadruple => {
            for (bi, b) in bottom.iter().enumerate() {
                for rm in 1..=n {
                    for rn in 1..=n {
                        let slot = rn + n - rm - 1; // candidate index, 0-based
                        for (ui, u) in bottom.iter().enumerate() {
                            let y = model.measure_cascade_tagged(
                                m,
                                &configs[slot],
                                &u.weights,
                                &b.weights,
                                rng,
                            );
                            count += 1;
                            let c = cell(bi, ui, slot);
                            table[c] = table[c].max(y.norm_sqr());
                        }
                    }
                }
            }
        }
        ReflectSearch::PairsAndDifferences => {
            for (bi, b) in bottom.iter().enumerate() {
                for (ui, u) in bottom.iter().enumerate() {
                    for (slot, cfg) in configs.iter().enumerate() {
                        let y =
                            model.measure_cascade_tagged(m, cfg, &u.weights, &b.weights, rng);
                        count += 1;
                        table[cell(bi, ui, slot)] = y.norm_sqr();
                    }
                }
            }
        }
    }

    // Earliest (BS, user, slot) entry reaching the peak; exact aliases of
    // the reflecting profile therefore resolve identically in both
    // strategies.
    let max = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pos = table
        .iter()
        .position(|&e| e >= max * (1.0 - PEAK_TOL))
        .unwrap_or(0);
    let slot = pos % num_slots;
    let ui = (pos / num_slots) % n;
    let bi = pos / (num_slots * n);

    Ok(((bi + 1, ui + 1), candidates[slot], count))
}

/// Beam training approaches tabulated by the complexity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingMethod {
    Exhaustive,
    TreeDictionary,
    PsDeactivation,
}

impl TrainingMethod {
    pub fn label(&self) -> &'static str {
        match self {
            TrainingMethod::Exhaustive => "exhaustive",
            TrainingMethod::TreeDictionary => "td",
            TrainingMethod::PsDeactivation => "psd",
        }
    }
}

/// Whether the count covers the three-node reflector-assisted system or a
/// plain point-to-point link (Phase 2 only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountScope {
    IrsAssisted,
    PointToPoint,
}

/// Closed-form search counts. N must be a power of three for the tree
/// methods.
pub fn search_count(method: TrainingMethod, n: usize, scope: CountScope) -> Result<u64> {
    let nn = n as u64;
    let s = crate::codebook::log3_exact(n)
        .ok_or_else(|| Error::invalid(format!("{n} is not a power of three")))? as u64;
    Ok(match (method, scope) {
        (TrainingMethod::Exhaustive, CountScope::IrsAssisted) => nn * nn + nn * nn * nn * nn,
        (TrainingMethod::Exhaustive, CountScope::PointToPoint) => nn * nn,
        (TrainingMethod::TreeDictionary, CountScope::IrsAssisted) => 18 * nn + 12 * s - 3,
        (TrainingMethod::TreeDictionary, CountScope::PointToPoint) => 6 * s + 3,
        (TrainingMethod::PsDeactivation, CountScope::IrsAssisted) => 6 * nn + 4 * s - 1,
        (TrainingMethod::PsDeactivation, CountScope::PointToPoint) => 2 * s + 1,
    })
}

/// One-sided hierarchical detection trial: an ARV from `sin_true` arrives
/// at per-element SNR `snr` (linear), the receiver descends the tree, and
/// the trial succeeds when the selected leaf's cell covers the direction.
///
/// SNR counts signal power per receive element against noise power per
/// element, so a unit-norm combiner over the full aperture collects an
/// N_a array gain; a deactivation-stage beam collects only its active
/// aperture's share, which is what costs the PSD codebook noise margin.
pub fn detection_trial<R: Rng>(
    codebook: &HierarchicalCodebook,
    sin_true: f64,
    snr: f64,
    rng: &mut R,
) -> bool {
    let geom = &codebook.geometry;
    let incoming = crate::array::arv_from_sin(geom, sin_true);
    let amp = if snr.is_finite() {
        (snr * geom.num_elements as f64).sqrt()
    } else {
        0.0
    };
    let noiseless = !snr.is_finite();
    let mut measure = |beam: &Beam| -> f64 {
        let gain = beam.weights.dotc(&incoming);
        if noiseless {
            return gain.norm_sqr();
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let noise = Cx::new(re / 2f64.sqrt(), im / 2f64.sqrt());
        (gain * amp + noise).norm_sqr()
    };

    let mut idx = {
        let es: Vec<f64> = codebook.stages[0].iter().map(&mut measure).collect();
        let mut best = 0;
        for i in 1..3 {
            if es[i] > es[best] {
                best = i;
            }
        }
        best + 1
    };
    for s in 2..=codebook.num_stages() {
        let kids = HierarchicalCodebook::children(idx);
        let es: Vec<f64> = kids.iter().map(|&k| measure(codebook.beam(s, k))).collect();
        let mut best = 0;
        for i in 1..3 {
            if es[i] > es[best] {
                best = i;
            }
        }
        idx = kids[best];
    }
    idx == codebook.covering_leaf(sin_true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{
        arv_from_sin, assemble_channel, ArrayGeometry, CascadeLegs, ChannelRealization,
        PathParams,
    };
    use crate::codebook::{build_psd, build_td, narrow_direction_sines};
    use crate::rng::derive_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Synthetic on-grid realization: every angle sits exactly on a narrow
    /// beam center.
    fn on_grid_realization(
        n_elements: usize,
        n_beams: usize,
        num_irs: usize,
        seed: u64,
    ) -> ChannelRealization {
        let g = ArrayGeometry::half_wavelength(n_elements).unwrap();
        let sines = narrow_direction_sines(n_beams);
        let mut rng = derive_rng(seed, &[0xfeed]);
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
            let i = rng.gen_range(0..n_beams);
            sines[i].asin()
        };
        let loss = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.gen_range(-5.0..-3.0));
        let direct = {
            let aod = pick(&mut rng);
            let aoa = pick(&mut rng);
            let l = loss(&mut rng);
            PathParams::new(aod, aoa, 3.0, l).unwrap()
        };
        let cascades = (0..num_irs)
            .map(|_| {
                let in_aod = pick(&mut rng);
                let in_aoa = pick(&mut rng);
                let in_loss = loss(&mut rng);
                let out_aod = pick(&mut rng);
                let out_aoa = pick(&mut rng);
                let out_loss = loss(&mut rng);
                CascadeLegs {
                    inbound: PathParams::new(in_aod, in_aoa, 4.0, in_loss).unwrap(),
                    outbound: PathParams::new(out_aod, out_aoa, 4.5, out_loss).unwrap(),
                }
            })
            .collect();
        ChannelRealization::from_paths(&g, &g, &g, direct, cascades, 1.0, (2.0, 2.0))
    }

    fn grid_index(sines: &[f64], angle: f64) -> usize {
        let s = angle.sin();
        sines
            .iter()
            .position(|&x| (x - s).abs() < 1e-9)
            .expect("angle on grid")
            + 1
    }

    #[test]
    fn delta_candidate_sets() {
        assert_eq!(delta_candidates(2), vec![-1.0, 0.0, 1.0]);
        assert_eq!(delta_candidates(27).len(), 53);
        // Every pairwise difference of grid sines is a member.
        let n = 9;
        let sines = narrow_direction_sines(n);
        let cands = delta_candidates(n);
        for (i, a) in sines.iter().enumerate() {
            for (j, b) in sines.iter().enumerate() {
                let d = a - b;
                let idx = i as isize - j as isize + n as isize - 1;
                assert!((cands[idx as usize] - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factored_measurement_matches_assembled_channel() {
        let real = on_grid_realization(8, 9, 2, 42);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let mut rng = derive_rng(1, &[1]);
        let configs = vec![
            IrsPhaseConfig::reflecting(0.4, 8, 0.8, 0.5).unwrap(),
            IrsPhaseConfig::reflecting(-1.2, 8, 0.8, 0.5).unwrap(),
        ];
        let h = assemble_channel(&real, &configs).unwrap();
        for _ in 0..10 {
            let w = arv_from_sin(&real.user_geometry, rng.gen_range(-1.0..1.0));
            let f = arv_from_sin(&real.bs_geometry, rng.gen_range(-1.0..1.0));
            let fast = model.measure_full(&configs, &w, &f, &mut rng).unwrap();
            let dense = (w.adjoint() * &h * &f)[(0, 0)];
            assert!((fast - dense).norm() < 1e-12 * dense.norm().max(1e-30));
        }
    }

    #[test]
    fn energy_detector_ignores_global_phase() {
        // Rotating the whole channel by a common phase does not change
        // which beam pair carries the most energy.
        let real = on_grid_realization(8, 9, 0, 7);
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let h = assemble_channel(&real, &[]).unwrap();
        let rotated = &h * Cx::from_polar(1.0, 1.234);
        let score = |hh: &crate::CMat| {
            let mut best = (0, 0);
            let mut best_e = -1.0;
            for (bi, b) in cb.bottom().iter().enumerate() {
                for (ui, u) in cb.bottom().iter().enumerate() {
                    let y = (u.weights.adjoint() * hh * &b.weights)[(0, 0)];
                    if y.norm_sqr() > best_e {
                        best_e = y.norm_sqr();
                        best = (bi, ui);
                    }
                }
            }
            best
        };
        assert_eq!(score(&h), score(&rotated));
    }

    #[test]
    fn exhaustive_direct_finds_on_grid_truth() {
        let real = on_grid_realization(8, 9, 0, 3);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[2]);
        let ((p, q), count) = exhaustive_direct(&model, &cb, &mut rng);
        let sines = narrow_direction_sines(9);
        assert_eq!(p, grid_index(&sines, real.truth.direct.aod));
        assert_eq!(q, grid_index(&sines, real.truth.direct.aoa));
        assert_eq!(count, 81);
    }

    #[test]
    fn exhaustive_reflect_strategies_agree() {
        let real = on_grid_realization(8, 9, 1, 9);
        let mut model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        model.include_direct = false;
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[3]);
        let (pair_full, delta_full, count_full) =
            exhaustive_reflect(&model, &cb, 0, ReflectSearch::FullQuadruple, &mut rng).unwrap();
        let (pair_red, delta_red, count_red) =
            exhaustive_reflect(&model, &cb, 0, ReflectSearch::PairsAndDifferences, &mut rng)
                .unwrap();
        assert_eq!(pair_full, pair_red);
        assert_eq!(delta_full, delta_red);
        assert_eq!(count_full, 9u64.pow(4));
        assert_eq!(count_red, 81 * 17);

        // And they recover the truth up to the profile equivalence.
        let sines = narrow_direction_sines(9);
        let legs = &real.truth.cascades[0];
        assert_eq!(pair_full.0, grid_index(&sines, legs.inbound.aod));
        assert_eq!(pair_full.1, grid_index(&sines, legs.outbound.aoa));
        assert!(same_reflect_profile(delta_full, legs.delta()));
    }

    #[test]
    fn exhaustive_reflect_refuses_large_grids() {
        let real = on_grid_realization(8, 243, 1, 9);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let cb = build_psd(&real.bs_geometry, 243).unwrap();
        let mut rng = derive_rng(0, &[4]);
        assert!(matches!(
            exhaustive_reflect(&model, &cb, 0, ReflectSearch::PairsAndDifferences, &mut rng),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn phase1_recovers_exact_deltas_noiselessly() {
        let real = on_grid_realization(8, 9, 2, 21);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[5]);
        let (deltas, count) = phase1(&model, &cb, SearchMode::Serial, &mut rng);
        assert_eq!(count, 18 * 9 - 9);
        let cands = delta_candidates(9);
        for (m, d) in deltas.iter().enumerate() {
            let d = d.expect("pulse detected");
            let truth = real.truth.cascades[m].delta();
            assert!(same_reflect_profile(d, truth), "{d} vs {truth}");
            assert!(cands.iter().any(|&c| c == d), "snapped to candidate grid");
        }
    }

    #[test]
    fn phase1_silent_reflector_goes_unestimated() {
        let real = on_grid_realization(8, 9, 2, 22);
        let mut model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        model.reflect_amplitude = 0.0; // dead surfaces reflect nothing
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[6]);
        let (deltas, _) = phase1(&model, &cb, SearchMode::Serial, &mut rng);
        assert!(deltas.iter().all(|d| d.is_none()));
    }

    #[test]
    fn phase2_matches_exhaustive_and_counts() {
        let real = on_grid_realization(8, 27, 0, 31);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let td = build_td(&real.bs_geometry, 27, None).unwrap();
        let mut rng = derive_rng(0, &[7]);
        let (pair, est, count) = phase2(&model, &td, SearchMode::Serial, &mut rng);
        let (oracle_pair, _) = exhaustive_direct(&model, &td, &mut rng);
        assert_eq!(pair, oracle_pair);
        assert_eq!(count, 21); // 9 + 6 * (3 - 1)
        assert_relative_eq!(est, real.truth.direct.loss, max_relative = 1e-9);

        let psd = build_psd(&real.bs_geometry, 27).unwrap();
        let (pair_psd, _, count_psd) = phase2(&model, &psd, SearchMode::ReceiveParallel, &mut rng);
        assert_eq!(pair_psd, oracle_pair);
        assert_eq!(count_psd, 7); // 3 + 2 * (3 - 1)
    }

    #[test]
    fn phase3_recovers_cascades_and_counts() {
        let real = on_grid_realization(8, 9, 2, 51);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[8]);
        let outcome = run_cooperative(&model, &cb, SearchMode::Serial, &mut rng);

        let sines = narrow_direction_sines(9);
        for (m, est) in outcome.reflect_beams.iter().enumerate() {
            let (p, q) = est.expect("estimated");
            let legs = &real.truth.cascades[m];
            assert_eq!(p, grid_index(&sines, legs.inbound.aod));
            assert_eq!(q, grid_index(&sines, legs.outbound.aoa));
        }
        // Count bookkeeping: per-phase counters match the closed forms.
        assert_eq!(outcome.per_phase_counts.phase1, 18 * 9 - 9);
        assert_eq!(outcome.per_phase_counts.phase2, 6 * 2 + 3);
        assert_eq!(outcome.per_phase_counts.phase3, 2 * (6 * 2 + 3));
        assert_eq!(outcome.search_count, outcome.per_phase_counts.total());
    }

    #[test]
    fn phase3_subtraction_cancels_direct_exactly_for_dead_reflector() {
        // With the active surface absorbing everything, the direct-path
        // subtraction must leave zero signal in noiseless mode.
        let real = on_grid_realization(8, 9, 1, 61);
        let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
        let cb = build_td(&real.bs_geometry, 9, None).unwrap();
        let mut rng = derive_rng(0, &[9]);
        let ((p, q), est, _) = phase2(&model, &cb, SearchMode::Serial, &mut rng);

        let dead = IrsPhaseConfig::off(8);
        let stages = cb.num_stages();
        let m_p = &cb.beam(stages, p).weights;
        let m_q = &cb.beam(stages, q).weights;
        let scale = model.power.sqrt() * real.gain_product() * est;
        for probe_p in 1..=3 {
            for probe_q in 1..=3 {
                let w = &cb.beam(1, probe_q).weights;
                let f = &cb.beam(1, probe_p).weights;
                let raw = model.measure_single_irs(0, &dead, w, f, &mut rng);
                let predicted = w.dotc(m_q) * m_p.dotc(f) * scale;
                assert!((raw - predicted).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn count_bookkeeping_matches_closed_forms() {
        let g = ArrayGeometry::half_wavelength(9).unwrap();
        for n in [27usize, 81, 243] {
            let real = on_grid_realization(9, n, 1, n as u64);
            let model = MeasurementModel::new(&real, 1.0, 0.0, 0.8);
            let mut rng = derive_rng(0, &[n as u64]);

            let td = build_td(&g, n, None).unwrap();
            let out = run_cooperative(&model, &td, SearchMode::Serial, &mut rng);
            assert_eq!(
                out.search_count,
                search_count(TrainingMethod::TreeDictionary, n, CountScope::IrsAssisted).unwrap()
            );

            let psd = build_psd(&g, n).unwrap();
            let out = run_cooperative(&model, &psd, SearchMode::ReceiveParallel, &mut rng);
            assert_eq!(
                out.search_count,
                search_count(TrainingMethod::PsDeactivation, n, CountScope::IrsAssisted).unwrap()
            );
        }
    }

    #[test]
    fn search_count_reference_values() {
        use CountScope::*;
        use TrainingMethod::*;
        assert_eq!(search_count(Exhaustive, 27, IrsAssisted).unwrap(), 532_170);
        assert_eq!(search_count(TreeDictionary, 27, IrsAssisted).unwrap(), 519);
        assert_eq!(search_count(PsDeactivation, 27, IrsAssisted).unwrap(), 173);
        assert_eq!(search_count(TreeDictionary, 27, PointToPoint).unwrap(), 21);
        assert_eq!(search_count(PsDeactivation, 81, PointToPoint).unwrap(), 9);
        assert_eq!(search_count(TreeDictionary, 81, IrsAssisted).unwrap(), 1503);
        assert!(search_count(TreeDictionary, 26, IrsAssisted).is_err());
    }

    #[test]
    fn noiseless_detection_always_succeeds() {
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        let td = build_td(&g, 27, None).unwrap();
        let psd = build_psd(&g, 27).unwrap();
        let mut rng = derive_rng(0, &[10]);
        for _ in 0..300 {
            let sin_true: f64 = rng.gen_range(-0.999..0.999);
            assert!(detection_trial(&td, sin_true, f64::INFINITY, &mut rng));
            assert!(detection_trial(&psd, sin_true, f64::INFINITY, &mut rng));
        }
    }

    #[test]
    fn zero_snr_detection_near_uniform_floor() {
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        let td = build_td(&g, 27, None).unwrap();
        let mut rng = derive_rng(0, &[11]);
        let trials = 4000;
        let hits = (0..trials)
            .filter(|_| {
                let sin_true: f64 = rng.gen_range(-1.0..1.0);
                detection_trial(&td, sin_true, 0.0, &mut rng)
            })
            .count();
        let rate = hits as f64 / trials as f64;
        // Random descent lands on the covering leaf about 1/N of the time.
        assert!(rate < 3.0 / 27.0, "rate {rate}");
    }

    #[test]
    fn noiseless_descent_selects_strictly_best_child() {
        // At every stage the selected child's gain strictly exceeds the
        // rejected children's toward the true direction.
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        for cb in [build_td(&g, 27, None).unwrap(), build_psd(&g, 27).unwrap()] {
            let mut rng = derive_rng(0, &[12]);
            for _ in 0..100 {
                let sin_true: f64 = rng.gen_range(-0.999..0.999);
                let incoming = arv_from_sin(&g, sin_true);
                let mut idx = {
                    let gains: Vec<f64> = cb.stages[0]
                        .iter()
                        .map(|b| b.weights.dotc(&incoming).norm())
                        .collect();
                    let mut best = 0;
                    for i in 1..3 {
                        if gains[i] > gains[best] {
                            best = i;
                        }
                    }
                    best + 1
                };
                for s in 2..=cb.num_stages() {
                    let kids = HierarchicalCodebook::children(idx);
                    let gains: Vec<f64> = kids
                        .iter()
                        .map(|&k| cb.beam(s, k).weights.dotc(&incoming).norm())
                        .collect();
                    let mut best = 0;
                    for i in 1..3 {
                        if gains[i] > gains[best] {
                            best = i;
                        }
                    }
                    for (i, &gn) in gains.iter().enumerate() {
                        if i != best {
                            assert!(gn < gains[best]);
                        }
                    }
                    idx = kids[best];
                }
                assert_eq!(idx, cb.covering_leaf(sin_true));
            }
        }
    }
}
