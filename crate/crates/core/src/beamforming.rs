//! Reflector phase selection, analog ARV stages, digital precoding, and
//! rate evaluation.
//!
//! The analog stages steer one ARV per estimated path (direct first, then
//! the cascades, user block by user block). On top of them sit two digital
//! designs: direct power allocation, which water-fills over the
//! approximately orthogonal beams with identity combiners, and block
//! diagonalization, which precodes each user inside the null space of the
//! other users' effective channels and water-fills over the projected
//! singular values. Fully digital SVD and zero-forcing baselines share the
//! same rate evaluator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, ChannelRealization, IrsPhaseConfig};
use crate::codebook::HierarchicalCodebook;
use crate::error::Error;
use crate::training::TrainingOutcome;
use crate::{CMat, Cx, Result};

/// Singular values below this fraction of the largest count as zero when
/// measuring ranks and null spaces.
const RANK_TOLERANCE: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Water-filling

/// Water-filling over per-stream amplitude gains: maximize
/// sum log2(1 + P g_i^2 S_i / sigma^2) subject to sum S_i = budget, S >= 0.
///
/// The water level is found by bisection until the budget constraint holds
/// to 1e-10.
pub fn water_fill(gains: &[f64], power: f64, noise_power: f64, budget: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::invalid("no streams to allocate"));
    }
    if !gains.iter().any(|&g| g > 0.0) {
        return Err(Error::invalid("all stream gains are zero"));
    }
    if !(power > 0.0) {
        return Err(Error::invalid("transmit power must be positive"));
    }
    if !(budget > 0.0) {
        return Err(Error::invalid("power budget must be positive"));
    }
    let floor: Vec<f64> = gains
        .iter()
        .map(|&g| {
            if g > 0.0 {
                noise_power / (power * g * g)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let fill = |level: f64| -> f64 {
        floor
            .iter()
            .map(|&f| if level > f { level - f } else { 0.0 })
            .sum()
    };
    let min_floor = floor.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lo = min_floor;
    let mut hi = min_floor + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let level = hi;
    let mut alloc: Vec<f64> = floor
        .iter()
        .map(|&f| if level > f { level - f } else { 0.0 })
        .collect();
    // Remove the bisection slack so the budget holds exactly.
    let total: f64 = alloc.iter().sum();
    debug_assert!((total - budget).abs() <= 1e-10 * budget);
    if total > 0.0 {
        let c = budget / total;
        for a in &mut alloc {
            *a *= c;
        }
    }
    Ok(alloc)
}

// ---------------------------------------------------------------------------
// Path estimates and analog stages

/// One propagation path as the beamformer sees it: departure angle at the
/// BS, arrival angle at the user, and its effective amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub aod: f64,
    pub aoa: f64,
    pub loss: f64,
}

/// All paths serving one user; a cascade entry is None when training could
/// not estimate it (its RF chain is dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPaths {
    pub direct: Option<PathEstimate>,
    pub cascades: Vec<Option<PathEstimate>>,
}

impl UserPaths {
    /// Present paths in stage order: direct first, then cascades.
    pub fn present(&self) -> Vec<PathEstimate> {
        self.direct
            .iter()
            .chain(self.cascades.iter().flatten())
            .copied()
            .collect()
    }

    pub fn num_streams(&self) -> usize {
        self.direct.iter().count() + self.cascades.iter().flatten().count()
    }

    /// Quantized estimates out of a training outcome: angles are the
    /// selected leaf directions, amplitudes the energy-based estimates.
    pub fn from_outcome(outcome: &TrainingOutcome, codebook: &HierarchicalCodebook) -> Self {
        let dir = |i: usize| codebook.directions[i - 1];
        let direct = Some(PathEstimate {
            aod: dir(outcome.direct_beams.0),
            aoa: dir(outcome.direct_beams.1),
            loss: outcome.direct_loss_estimate,
        });
        let cascades = outcome
            .reflect_beams
            .iter()
            .zip(&outcome.reflect_loss_estimates)
            .map(|(beams, loss)| {
                beams.and_then(|(p, q)| {
                    loss.map(|l| PathEstimate {
                        aod: dir(p),
                        aoa: dir(q),
                        loss: l,
                    })
                })
            })
            .collect();
        UserPaths { direct, cascades }
    }

    /// Exact path knowledge: true angles and the aligned effective cascade
    /// amplitudes (reflection amplitude included).
    pub fn from_truth(real: &ChannelRealization, reflect_amplitude: f64) -> Self {
        let direct = Some(PathEstimate {
            aod: real.truth.direct.aod,
            aoa: real.truth.direct.aoa,
            loss: real.truth.direct.loss,
        });
        let cascades = real
            .truth
            .cascades
            .iter()
            .enumerate()
            .map(|(m, legs)| {
                Some(PathEstimate {
                    aod: legs.inbound.aod,
                    aoa: legs.outbound.aoa,
                    loss: real.cascade_peak_amplitude(m, reflect_amplitude),
                })
            })
            .collect();
        UserPaths { direct, cascades }
    }
}

/// Analog precoder and per-user combiners, one ARV column per present path.
#[derive(Debug, Clone)]
pub struct AnalogStages {
    /// N_t x N_s; columns ordered user-major, direct path first.
    pub precoder: CMat,
    /// Per-user N_u x D_k combiners with the same column order.
    pub combiners: Vec<CMat>,
    /// Cumulative stream offsets E_k; stream block of user k is
    /// offsets[k]..offsets[k + 1].
    pub offsets: Vec<usize>,
    /// Per-user path amplitudes in column order.
    pub losses: Vec<Vec<f64>>,
}

impl AnalogStages {
    pub fn num_streams(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn streams_of(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }
}

/// Build the analog stages from per-user path estimates.
pub fn analog_stages(
    bs: &ArrayGeometry,
    user: &ArrayGeometry,
    users: &[UserPaths],
) -> Result<AnalogStages> {
    let mut offsets = vec![0usize];
    for (k, u) in users.iter().enumerate() {
        let d = u.num_streams();
        if d == 0 {
            return Err(Error::invalid(format!(
                "user {k} has no estimated paths; cannot build analog stages"
            )));
        }
        offsets.push(offsets.last().unwrap() + d);
    }
    let n_s = *offsets.last().unwrap();
    let mut precoder = CMat::zeros(bs.num_elements, n_s);
    let mut combiners = Vec::with_capacity(users.len());
    let mut losses = Vec::with_capacity(users.len());
    for (k, u) in users.iter().enumerate() {
        let paths = u.present();
        let mut w = CMat::zeros(user.num_elements, paths.len());
        let mut l = Vec::with_capacity(paths.len());
        for (j, p) in paths.iter().enumerate() {
            precoder.set_column(offsets[k] + j, &crate::array::arv(bs, p.aod));
            w.set_column(j, &crate::array::arv(user, p.aoa));
            l.push(p.loss);
        }
        combiners.push(w);
        losses.push(l);
    }
    Ok(AnalogStages {
        precoder,
        combiners,
        offsets,
        losses,
    })
}

/// Reflector configurations from recovered sine-space differences; an
/// unestimated reflector is switched off.
pub fn irs_design(
    deltas: &[Option<f64>],
    num_elements: usize,
    amplitude: f64,
    spacing: f64,
) -> Result<Vec<IrsPhaseConfig>> {
    deltas
        .iter()
        .map(|d| match d {
            Some(x) => IrsPhaseConfig::reflecting(*x, num_elements, amplitude, spacing),
            None => Ok(IrsPhaseConfig::off(num_elements)),
        })
        .collect()
}

/// Effective digital-domain channel of user k:
/// G_t G_r (W_k^H W_k) diag(a_k) (F_k^H F_RF), a D_k x N_s matrix.
pub fn effective_channel(k: usize, stages: &AnalogStages, gain_product: f64) -> CMat {
    let w = &stages.combiners[k];
    let block = stages
        .precoder
        .columns(stages.offsets[k], stages.losses[k].len());
    let wgram = w.adjoint() * w;
    let mut cross = block.adjoint() * &stages.precoder;
    for (r, &a) in stages.losses[k].iter().enumerate() {
        for c in 0..cross.ncols() {
            cross[(r, c)] *= a;
        }
    }
    wgram * cross * Cx::new(gain_product, 0.0)
}

// ---------------------------------------------------------------------------
// Digital stages

/// Digital precoder/combiners on top of the analog stages.
#[derive(Debug, Clone)]
pub struct DigitalStages {
    /// N_s x N_s digital precoder (columns grouped per user).
    pub precoder: CMat,
    /// Per-user D_k x D_k digital combiners.
    pub combiners: Vec<CMat>,
}

/// Direct power allocation: water-fill over every present path jointly and
/// send each stream down its own RF chain with identity combining.
pub fn dpa_digital(stages: &AnalogStages, power: f64, noise_power: f64) -> Result<DigitalStages> {
    let gains: Vec<f64> = stages.losses.iter().flatten().copied().collect();
    let alloc = water_fill(&gains, power, noise_power, 1.0)?;
    let n_s = stages.num_streams();
    let mut f = CMat::zeros(n_s, n_s);
    for (i, &s) in alloc.iter().enumerate() {
        f[(i, i)] = Cx::new(s.sqrt(), 0.0);
    }
    let combiners = stages
        .losses
        .iter()
        .map(|l| CMat::identity(l.len(), l.len()))
        .collect();
    Ok(DigitalStages {
        precoder: f,
        combiners,
    })
}

/// Rank and orthonormal null-space basis of a matrix, from the Hermitian
/// eigendecomposition of its Gram matrix. Returns (rank, basis) where the
/// basis columns span the null space.
fn rank_and_nullspace(m: &CMat) -> Result<(usize, CMat)> {
    let n = m.ncols();
    let gram = m.adjoint() * m;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let max_ev = eig.eigenvalues[order[0]].max(0.0);
    let tol = max_ev * RANK_TOLERANCE * RANK_TOLERANCE;
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > tol)
        .count()
        .min(m.nrows().min(n));
    let mut basis = CMat::zeros(n, n - rank);
    for (j, &i) in order[rank..].iter().enumerate() {
        basis.set_column(j, &eig.eigenvectors.column(i).into_owned());
    }
    Ok((rank, basis))
}

/// Thin SVD sorted by decreasing singular value.
struct ThinSvd {
    u: CMat,
    s: Vec<f64>,
    v: CMat,
}

fn thin_svd(m: &CMat) -> Result<ThinSvd> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("SVD did not converge"))?;
    let u_raw = svd.u.ok_or_else(|| Error::numerical("SVD missing U"))?;
    let vt_raw = svd.v_t.ok_or_else(|| Error::numerical("SVD missing V"))?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u = CMat::zeros(u_raw.nrows(), k);
    let mut v = CMat::zeros(vt_raw.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (j, &i) in order.iter().enumerate() {
        u.set_column(j, &u_raw.column(i).into_owned());
        v.set_column(j, &vt_raw.row(i).adjoint());
        s.push(svd.singular_values[i]);
    }
    Ok(ThinSvd { u, s, v })
}

/// Block diagonalization over the per-user effective channels. Each user's
/// precoder block lives in the null space of the other users' effective
/// channels; the projected singular values receive water-filled powers.
///
/// Also returns the projected singular values, user-major.
pub fn bd_digital(
    effective: &[CMat],
    power: f64,
    noise_power: f64,
) -> Result<(DigitalStages, Vec<f64>)> {
    let k_users = effective.len();
    let n_s: usize = effective.iter().map(|h| h.nrows()).sum();
    for h in effective {
        if h.ncols() != n_s {
            return Err(Error::dims(format!(
                "effective channel has {} columns, expected the total stream count {n_s}",
                h.ncols()
            )));
        }
    }

    let mut blocks = Vec::with_capacity(k_users);
    let mut combiners = Vec::with_capacity(k_users);
    let mut sigma = Vec::new();
    for k in 0..k_users {
        let d_k = effective[k].nrows();
        let rows: usize = n_s - d_k;
        let (rank, null_basis) = if rows == 0 {
            (0, CMat::identity(n_s, n_s))
        } else {
            let mut stacked = CMat::zeros(rows, n_s);
            let mut r0 = 0;
            for (i, h) in effective.iter().enumerate() {
                if i == k {
                    continue;
                }
                stacked.rows_mut(r0, h.nrows()).copy_from(h);
                r0 += h.nrows();
            }
            rank_and_nullspace(&stacked)?
        };
        let null_dim = n_s - rank;
        if null_dim < d_k {
            return Err(Error::NullSpaceTooSmall {
                user: k,
                needed: d_k,
                available: null_dim,
            });
        }
        let projected = &effective[k] * &null_basis;
        let svd = thin_svd(&projected)?;
        // First D_k singular directions carry the user's streams.
        blocks.push(&null_basis * svd.v.columns(0, d_k).into_owned());
        combiners.push(svd.u.columns(0, d_k).into_owned());
        sigma.extend_from_slice(&svd.s[..d_k]);
    }

    let alloc = water_fill(&sigma, power, noise_power, 1.0)?;
    let mut precoder = CMat::zeros(n_s, n_s);
    let mut col = 0;
    for block in &blocks {
        for j in 0..block.ncols() {
            let scaled = block.column(j) * Cx::new(alloc[col].sqrt(), 0.0);
            precoder.set_column(col, &scaled);
            col += 1;
        }
    }
    Ok((
        DigitalStages {
            precoder,
            combiners,
        },
        sigma,
    ))
}

// ---------------------------------------------------------------------------
// Composite configurations and rate evaluation

/// Composite transmit precoder and per-user receive combiners, power
/// normalized.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// N_t x N_s composite precoder with unit Frobenius norm.
    pub full: CMat,
    /// Per-user column blocks of `full`.
    pub blocks: Vec<CMat>,
    /// Per-user composite combiners (N_u x D_k).
    pub combiners: Vec<CMat>,
    /// Scale divided out of the raw composition to meet the power
    /// constraint.
    pub power_scale: f64,
}

/// Compose analog and digital stages and enforce the transmit power
/// constraint exactly.
pub fn compose_hybrid(stages: &AnalogStages, digital: &DigitalStages) -> Result<PrecoderSet> {
    let raw = &stages.precoder * &digital.precoder;
    let scale = raw.norm();
    if scale < 1e-300 {
        return Err(Error::numerical("zero composite precoder"));
    }
    let full = raw / Cx::new(scale, 0.0);
    let blocks = (0..stages.combiners.len())
        .map(|k| {
            full.columns(stages.offsets[k], stages.losses[k].len())
                .into_owned()
        })
        .collect();
    let combiners = stages
        .combiners
        .iter()
        .zip(&digital.combiners)
        .map(|(w_rf, w_b)| w_rf * w_b)
        .collect();
    Ok(PrecoderSet {
        full,
        blocks,
        combiners,
        power_scale: scale,
    })
}

/// Achievable rate of one user under interference plus noise:
/// log2 det[I + P C^{-1} (W^H H F_k)(W^H H F_k)^H] with
/// C = P sum_i W^H H F_i F_i^H H^H W + sigma^2 W^H W.
pub fn user_rate(
    channel: &CMat,
    combiner: &CMat,
    own_precoder: &CMat,
    interferers: &[&CMat],
    power: f64,
    noise_power: f64,
) -> Result<f64> {
    let g = combiner.adjoint() * channel; // D x N_t
    let d = g.nrows();
    let mut c = (combiner.adjoint() * combiner) * Cx::new(noise_power, 0.0);
    for f in interferers {
        let b = &g * *f;
        c += &b * b.adjoint() * Cx::new(power, 0.0);
    }
    let b_own = &g * own_precoder;
    let lu = c.lu();
    if lu.determinant().norm() < 1e-300 {
        return Err(Error::numerical(
            "singular interference-plus-noise covariance",
        ));
    }
    let x = lu
        .solve(&(&b_own * b_own.adjoint()))
        .ok_or_else(|| Error::numerical("covariance solve failed"))?;
    let m = CMat::identity(d, d) + x * Cx::new(power, 0.0);
    let det = m.lu().determinant();
    if det.re <= 0.0 {
        return Err(Error::numerical("non-positive rate determinant"));
    }
    Ok(det.re.log2().max(0.0))
}

/// Per-user rates, their sum, and the residual interference-to-signal
/// power ratio at each combiner output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user: Vec<f64>,
    pub sum: f64,
    pub interference_residual: Vec<f64>,
}

/// Evaluate every user's rate on its true channel.
pub fn evaluate_rates(
    channels: &[CMat],
    set: &PrecoderSet,
    power: f64,
    noise_power: f64,
) -> Result<RateReport> {
    let k_users = channels.len();
    let mut per_user = Vec::with_capacity(k_users);
    let mut residuals = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let interferers: Vec<&CMat> = (0..k_users)
            .filter(|&i| i != k)
            .map(|i| &set.blocks[i])
            .collect();
        per_user.push(user_rate(
            &channels[k],
            &set.combiners[k],
            &set.blocks[k],
            &interferers,
            power,
            noise_power,
        )?);
        let g = set.combiners[k].adjoint() * &channels[k];
        let own = (&g * &set.blocks[k]).norm_squared();
        let mut cross = 0.0;
        for i in 0..k_users {
            if i != k {
                cross += (&g * &set.blocks[i]).norm_squared();
            }
        }
        residuals.push(cross / own.max(1e-300));
    }
    Ok(RateReport {
        sum: per_user.iter().sum(),
        per_user,
        interference_residual: residuals,
    })
}

// ---------------------------------------------------------------------------
// Fully digital baselines

/// Fully digital benchmark scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdbScheme {
    /// Single-user SVD precoding with water-filling.
    Svd,
    /// Multi-user zero-forcing with per-stream water-filling.
    ZeroForcing,
}

/// How the reflectors are driven for a baseline evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IrsMode {
    /// Reflecting mode at the true sine-space difference.
    Optimal,
    /// Uniformly random phases at the nominal reflection amplitude.
    Random,
    /// No controlled surface: an uncontrolled wall reflection with a
    /// first-order attenuation drawn uniformly in dB.
    Off,
}

/// Wall attenuation range for `IrsMode::Off`, in dB.
pub const WALL_ATTENUATION_DB: (f64, f64) = (5.8, 19.3);

/// Phase configurations realizing an `IrsMode` for one user's reflectors.
pub fn irs_configs_for_mode<R: Rng>(
    real: &ChannelRealization,
    reflect_amplitude: f64,
    mode: IrsMode,
    rng: &mut R,
) -> Result<Vec<IrsPhaseConfig>> {
    let n_r = real.num_reflect_elements();
    let spacing = real.irs_geometry.spacing;
    match mode {
        IrsMode::Optimal => real
            .true_deltas()
            .iter()
            .map(|&d| {
                IrsPhaseConfig::reflecting(d.clamp(-2.0, 2.0), n_r, reflect_amplitude, spacing)
            })
            .collect(),
        IrsMode::Random => (0..real.num_irs())
            .map(|_| {
                let phases = (0..n_r)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect();
                IrsPhaseConfig::new(reflect_amplitude, phases)
            })
            .collect(),
        IrsMode::Off => (0..real.num_irs())
            .map(|_| {
                let att_db = rng.gen_range(WALL_ATTENUATION_DB.0..WALL_ATTENUATION_DB.1);
                let amp = 10f64.powf(-att_db / 20.0);
                let phases = (0..n_r)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect();
                IrsPhaseConfig::new(amp, phases)
            })
            .collect(),
    }
}

/// Fully digital baseline on already-assembled channels. `streams` fixes
/// the number of data streams per user.
pub fn fdb_baseline(
    channels: &[CMat],
    scheme: FdbScheme,
    streams: &[usize],
    power: f64,
    noise_power: f64,
) -> Result<RateReport> {
    if channels.len() != streams.len() {
        return Err(Error::dims("one stream count per user"));
    }
    match scheme {
        FdbScheme::Svd => {
            if channels.len() != 1 {
                return Err(Error::invalid(
                    "SVD baseline serves exactly one user; use zero-forcing for multi-user",
                ));
            }
            let svd = thin_svd(&channels[0])?;
            let d = streams[0].min(svd.s.len());
            let gains = &svd.s[..d];
            let alloc = water_fill(gains, power, noise_power, 1.0)?;
            let mut f = CMat::zeros(channels[0].ncols(), d);
            for j in 0..d {
                let col = svd.v.column(j) * Cx::new(alloc[j].sqrt(), 0.0);
                f.set_column(j, &col);
            }
            let w = svd.u.columns(0, d).into_owned();
            let set = PrecoderSet {
                blocks: vec![f.clone()],
                combiners: vec![w],
                full: f,
                power_scale: 1.0,
            };
            evaluate_rates(channels, &set, power, noise_power)
        }
        FdbScheme::ZeroForcing => {
            let n_t = channels[0].ncols();
            let n_s: usize = streams.iter().sum();
            // Receive subspaces: the first D_k left singular vectors.
            let mut combiners = Vec::with_capacity(channels.len());
            let mut stacked = CMat::zeros(n_s, n_t);
            let mut row = 0;
            for (h, &d) in channels.iter().zip(streams) {
                let svd = thin_svd(h)?;
                let w = svd.u.columns(0, d).into_owned();
                let rows = w.adjoint() * h;
                stacked.rows_mut(row, d).copy_from(&rows);
                row += d;
                combiners.push(w);
            }
            // Pseudo-inverse precoder nulls all cross-stream terms. Built
            // from the SVD so near-parallel user directions surface as a
            // rank error instead of a garbage inverse.
            let svd = thin_svd(&stacked)?;
            if svd.s[n_s - 1] < RANK_TOLERANCE * svd.s[0] {
                return Err(Error::numerical(
                    "stacked channel is rank deficient; zero-forcing undefined",
                ));
            }
            let mut vs = svd.v.clone();
            for (j, &s) in svd.s.iter().enumerate() {
                for r in 0..vs.nrows() {
                    vs[(r, j)] /= Cx::new(s, 0.0);
                }
            }
            let pinv = vs * svd.u.adjoint(); // N_t x N_s
            let col_norms: Vec<f64> = (0..n_s).map(|j| pinv.column(j).norm()).collect();
            let gains: Vec<f64> = col_norms.iter().map(|&c| 1.0 / c).collect();
            let alloc = water_fill(&gains, power, noise_power, 1.0)?;
            let mut full = CMat::zeros(n_t, n_s);
            for j in 0..n_s {
                let col = pinv.column(j) * Cx::new(alloc[j].sqrt() / col_norms[j], 0.0);
                full.set_column(j, &col);
            }
            let mut blocks = Vec::with_capacity(channels.len());
            let mut off = 0;
            for &d in streams {
                blocks.push(full.columns(off, d).into_owned());
                off += d;
            }
            let set = PrecoderSet {
                full,
                blocks,
                combiners,
                power_scale: 1.0,
            };
            evaluate_rates(channels, &set, power, noise_power)
        }
    }
}
