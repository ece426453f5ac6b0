//! Geometric THz channel construction.
//!
//! Arrays are uniform and linear; a path is described by its angle of
//! departure, angle of arrival, length, and amplitude loss. Channels are
//! rank-1 outer products of array response vectors (ARVs). Each reflecting
//! surface contributes a cascaded inbound/outbound pair of such channels,
//! linearly transformed by its diagonal phase configuration.
//!
//! Angle convention: broadside is 0 and the front range is [-pi/2, pi/2].
//! A direction phi and its mirror pi - phi produce identical ARVs, so all
//! stored angles are normalized into [-pi/2, 3*pi/2).

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::derive_rng;
use crate::{CMat, CVec, Cx, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn default_spacing() -> f64 {
    0.5
}

/// Element count and spacing (in wavelengths) of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    /// Element spacing in wavelengths; half-wavelength by default.
    #[serde(rename = "spacing_wavelengths", default = "default_spacing")]
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        Ok(Self {
            num_elements,
            spacing,
        })
    }

    /// Half-wavelength array.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.num_elements, self.spacing).map(|_| ())
    }
}

/// Normalize an angle into [-pi/2, 3*pi/2), the canonical range in which
/// every beam direction is represented exactly once.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = (angle + PI / 2.0).rem_euclid(2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI / 2.0
}

/// Normalized array response vector: entry n is
/// exp(j*2*pi*spacing*(n-1)*sin(angle)) / sqrt(N).
pub fn arv(geom: &ArrayGeometry, angle: f64) -> CVec {
    let n = geom.num_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI * geom.spacing * angle.sin();
    CVec::from_fn(n, |i, _| Cx::from_polar(scale, step * i as f64))
}

/// ARV over the sine of the angle directly; avoids an asin/sin round trip
/// when working on the sine-space grid.
pub fn arv_from_sin(geom: &ArrayGeometry, sin_angle: f64) -> CVec {
    let n = geom.num_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI * geom.spacing * sin_angle;
    CVec::from_fn(n, |i, _| Cx::from_polar(scale, step * i as f64))
}

/// Free-spread plus molecular absorption loss amplitude:
/// c / (4*pi*f*d) * exp(-tau*d/2).
pub fn path_loss(frequency_hz: f64, distance_m: f64, absorption_per_m: f64) -> Result<f64> {
    if !(frequency_hz > 0.0) {
        return Err(Error::invalid("frequency must be positive"));
    }
    if !(distance_m > 0.0) {
        return Err(Error::invalid("distance must be positive"));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * PI * frequency_hz * distance_m)
        * (-0.5 * absorption_per_m * distance_m).exp())
}

/// Path-loss compensation factor of a square reflector element:
/// eta = 2*sqrt(pi) * G * side^2 / lambda^2.
///
/// The element side must lie in [lambda/10, lambda/2].
pub fn compensation_factor(element_side_m: f64, wavelength_m: f64, element_gain: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let lo = wavelength_m / 10.0;
    let hi = wavelength_m / 2.0;
    // Allow the endpoints themselves despite float rounding.
    if element_side_m < lo * (1.0 - 1e-12) || element_side_m > hi * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "element side {element_side_m} outside [{lo}, {hi}]"
        )));
    }
    if !(element_gain > 0.0) {
        return Err(Error::invalid("element gain must be positive"));
    }
    Ok(2.0 * PI.sqrt() * element_gain * element_side_m * element_side_m
        / (wavelength_m * wavelength_m))
}

/// Antenna gain in dB used for both ends of the link: 4 + 10*log10(sqrt(N)).
pub fn antenna_gain_db(num_elements: usize) -> f64 {
    4.0 + 10.0 * (num_elements as f64).sqrt().log10()
}

/// The same gain as a linear amplitude factor applied to the channel.
pub fn antenna_gain_amplitude(num_elements: usize) -> f64 {
    10f64.powf(antenna_gain_db(num_elements) / 20.0)
}

/// Departure/arrival angles, length, and loss amplitude of one LoS path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Angle of departure at the transmit array, radians.
    pub aod: f64,
    /// Angle of arrival at the receive array, radians.
    pub aoa: f64,
    /// Path length in meters.
    pub distance: f64,
    /// Loss amplitude a(f, d); dimensionless.
    pub loss: f64,
}

impl PathParams {
    pub fn new(aod: f64, aoa: f64, distance: f64, loss: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::invalid("path distance must be positive"));
        }
        if !(loss >= 0.0) {
            return Err(Error::invalid("path loss amplitude must be nonnegative"));
        }
        Ok(Self {
            aod: normalize_angle(aod),
            aoa: normalize_angle(aoa),
            distance,
            loss,
        })
    }
}

/// LoS channel matrix loss * a_rx(aoa) * a_tx(aod)^H; rank 1 by construction.
pub fn los_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, params: &PathParams) -> CMat {
    let a_rx = arv(rx, params.aoa);
    let a_tx = arv(tx, params.aod);
    let mut h = CMat::zeros(rx.num_elements, tx.num_elements);
    for c in 0..tx.num_elements {
        let tc = a_tx[c].conj() * params.loss;
        for r in 0..rx.num_elements {
            h[(r, c)] = a_rx[r] * tc;
        }
    }
    h
}

/// Diagonal phase configuration of one reflecting surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsPhaseConfig {
    /// Reflection amplitude in [0, 1].
    pub amplitude: f64,
    /// Per-element phases in [0, 2*pi).
    pub phases: Vec<f64>,
    /// Sine-space parameter when built in reflecting mode.
    pub generator_x: Option<f64>,
}

impl IrsPhaseConfig {
    pub fn new(amplitude: f64, phases: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::invalid("reflection amplitude must lie in [0, 1]"));
        }
        let phases = phases.into_iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
        Ok(Self {
            amplitude,
            phases,
            generator_x: None,
        })
    }

    /// Reflecting mode: theta_n = 2*pi*spacing*(n-1)*x, the linear profile
    /// that keeps any reflected narrow beam a narrow beam.
    pub fn reflecting(x: f64, num_elements: usize, amplitude: f64, spacing: f64) -> Result<Self> {
        if !(-2.0..=2.0).contains(&x) {
            return Err(Error::invalid("sine-space parameter must lie in [-2, 2]"));
        }
        let step = 2.0 * PI * spacing * x;
        let mut cfg = Self::new(
            amplitude,
            (0..num_elements).map(|n| step * n as f64).collect(),
        )?;
        cfg.generator_x = Some(x);
        Ok(cfg)
    }

    /// Fully absorbing (switched-off) surface.
    pub fn off(num_elements: usize) -> Self {
        Self {
            amplitude: 0.0,
            phases: vec![0.0; num_elements],
            generator_x: None,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.phases.len()
    }

    /// Dense diagonal matrix diag(amplitude * e^{j theta_n}).
    pub fn matrix(&self) -> CMat {
        let n = self.phases.len();
        let mut m = CMat::zeros(n, n);
        for (i, &p) in self.phases.iter().enumerate() {
            m[(i, i)] = Cx::from_polar(self.amplitude, p);
        }
        m
    }

    /// Effective scalar coupling a_out^H * Theta * a_in between two
    /// normalized reflector-side ARVs given by their sines.
    pub fn coupling(&self, sin_in: f64, sin_out: f64, spacing: f64) -> Cx {
        let n = self.phases.len();
        let step = 2.0 * PI * spacing * (sin_in - sin_out);
        let mut acc = Cx::new(0.0, 0.0);
        for (i, &p) in self.phases.iter().enumerate() {
            acc += Cx::from_polar(1.0, p + step * i as f64);
        }
        acc * self.amplitude / n as f64
    }
}

/// Both legs of one reflector cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeLegs {
    /// BS-to-reflector leg (matrix M).
    pub inbound: PathParams,
    /// Reflector-to-user leg (matrix N).
    pub outbound: PathParams,
}

impl CascadeLegs {
    /// Sine-space angle difference driving the optimal phase profile:
    /// sin(outbound departure) - sin(inbound arrival), both at the reflector.
    pub fn delta(&self) -> f64 {
        self.outbound.aod.sin() - self.inbound.aoa.sin()
    }
}

/// True path parameters behind a channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTruth {
    pub direct: PathParams,
    pub cascades: Vec<CascadeLegs>,
}

/// Direct LoS matrix plus per-reflector cascaded component matrices for one
/// BS-user link, together with the true path parameters that generated them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Direct BS-to-user channel, N_u x N_t.
    pub direct: CMat,
    /// BS-to-reflector matrices M_m, each N_r x N_t.
    pub irs_inbound: Vec<CMat>,
    /// Reflector-to-user matrices N_m, each N_u x N_r.
    pub irs_outbound: Vec<CMat>,
    pub truth: ChannelTruth,
    /// Path-loss compensation factor eta.
    pub compensation: f64,
    /// Transmit and receive antenna gains as linear amplitudes.
    pub antenna_gains: (f64, f64),
    pub bs_geometry: ArrayGeometry,
    pub user_geometry: ArrayGeometry,
    pub irs_geometry: ArrayGeometry,
}

impl ChannelRealization {
    /// Build a realization from explicit path parameters.
    pub fn from_paths(
        bs: &ArrayGeometry,
        user: &ArrayGeometry,
        irs: &ArrayGeometry,
        direct: PathParams,
        cascades: Vec<CascadeLegs>,
        compensation: f64,
        antenna_gains: (f64, f64),
    ) -> Self {
        let direct_mat = los_channel(bs, user, &direct);
        let irs_inbound = cascades
            .iter()
            .map(|c| los_channel(bs, irs, &c.inbound))
            .collect();
        let irs_outbound = cascades
            .iter()
            .map(|c| los_channel(irs, user, &c.outbound))
            .collect();
        Self {
            direct: direct_mat,
            irs_inbound,
            irs_outbound,
            truth: ChannelTruth { direct, cascades },
            compensation,
            antenna_gains,
            bs_geometry: *bs,
            user_geometry: *user,
            irs_geometry: *irs,
        }
    }

    pub fn num_irs(&self) -> usize {
        self.irs_inbound.len()
    }

    pub fn num_reflect_elements(&self) -> usize {
        self.irs_geometry.num_elements
    }

    /// Combined transmit/receive gain amplitude.
    pub fn gain_product(&self) -> f64 {
        self.antenna_gains.0 * self.antenna_gains.1
    }

    /// True sine-space differences, one per reflector.
    pub fn true_deltas(&self) -> Vec<f64> {
        self.truth.cascades.iter().map(|c| c.delta()).collect()
    }

    /// Effective amplitude of cascade m when its phases are aligned:
    /// eta * amplitude * N_r * loss_in * loss_out.
    pub fn cascade_peak_amplitude(&self, m: usize, reflect_amplitude: f64) -> f64 {
        let legs = &self.truth.cascades[m];
        self.compensation
            * reflect_amplitude
            * self.num_reflect_elements() as f64
            * legs.inbound.loss
            * legs.outbound.loss
    }
}

/// Assembled channel G_t*G_r * [direct + sum_m eta * N_r * N_m Theta_m M_m].
///
/// The explicit N_r factor is the reflector aperture: the cascade energy of
/// an N_r-element surface scales as N_r^2, which is what calibrates eta as a
/// pure element-geometry constant.
pub fn assemble_channel(real: &ChannelRealization, configs: &[IrsPhaseConfig]) -> Result<CMat> {
    if configs.len() != real.num_irs() {
        return Err(Error::dims(format!(
            "{} phase configs for {} reflectors",
            configs.len(),
            real.num_irs()
        )));
    }
    let mut h = real.direct.clone();
    let n_r = real.num_reflect_elements();
    for (m, cfg) in configs.iter().enumerate() {
        if cfg.num_elements() != n_r {
            return Err(Error::dims(format!(
                "phase config {m} has {} elements, surface has {n_r}",
                cfg.num_elements()
            )));
        }
        if cfg.amplitude == 0.0 {
            continue;
        }
        // N_m * Theta * M_m, with Theta applied as a column scaling.
        let mut scaled = real.irs_outbound[m].clone();
        for (c, &p) in cfg.phases.iter().enumerate() {
            let w = Cx::from_polar(cfg.amplitude, p);
            for r in 0..scaled.nrows() {
                scaled[(r, c)] *= w;
            }
        }
        let cascade = &scaled * &real.irs_inbound[m];
        let scale = real.compensation * n_r as f64;
        h += cascade * Cx::new(scale, 0.0);
    }
    Ok(h * Cx::new(real.gain_product(), 0.0))
}

fn default_bs_x() -> f64 {
    0.0
}
fn default_user_x() -> f64 {
    0.0
}
fn default_min_sep() -> f64 {
    0.1
}

/// Where nodes sit on the floor plan. The BS and the users live on the
/// x = bs_x / x = user_x wall lines with uniformly drawn heights; reflector
/// i sits at (irs_x, irs_y_first + i * irs_y_step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    #[serde(default = "default_bs_x")]
    pub bs_x: f64,
    pub bs_y: [f64; 2],
    #[serde(default = "default_user_x")]
    pub user_x: f64,
    pub user_y: [f64; 2],
    /// Optional lateral spread for user positions. Without it every user
    /// sits on the x = user_x line, which leaves all direct departures at
    /// the same angle; multi-user precoding needs the angular separation
    /// this spread provides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_x_spread: Option<[f64; 2]>,
    pub irs_x: f64,
    pub irs_y_first: f64,
    pub irs_y_step: f64,
    /// Smallest admissible BS-user separation; draws closer than this are
    /// rejected and redrawn.
    #[serde(default = "default_min_sep")]
    pub min_direct_separation_m: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            bs_x: 0.0,
            bs_y: [0.0, 4.0],
            user_x: 0.0,
            user_y: [4.0, 10.0],
            user_x_spread: None,
            irs_x: 4.0,
            irs_y_first: 3.0,
            irs_y_step: 1.0,
            min_direct_separation_m: 0.1,
        }
    }
}

/// Compensation factor setting: a fixed value or derived from the element
/// geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    Fixed(f64),
    Computed(ComputedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComputedTag {
    #[serde(rename = "computed")]
    Computed,
}

impl Default for EtaSetting {
    fn default() -> Self {
        EtaSetting::Fixed(1.0)
    }
}

fn default_beta() -> f64 {
    0.8
}
fn default_element_side() -> f64 {
    0.5
}
fn default_element_gain() -> f64 {
    std::f64::consts::SQRT_2
}

/// Full description of a random simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frequency_hz: f64,
    /// Molecular absorption tau, 1/m.
    pub absorption_per_m: f64,
    /// Noise power sigma_n^2 in watts.
    pub noise_power_w: f64,
    pub num_users: usize,
    pub irs_per_user: usize,
    pub bs_array: ArrayGeometry,
    pub user_array: ArrayGeometry,
    pub irs_array: ArrayGeometry,
    /// Reflection amplitude beta.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Compensation factor: a number, or "computed" for the element-geometry
    /// formula.
    #[serde(default)]
    pub eta: EtaSetting,
    /// Reflector element side in wavelengths, used only when eta is computed.
    #[serde(default = "default_element_side")]
    pub irs_element_side_wavelengths: f64,
    /// Reflector element gain, used only when eta is computed.
    #[serde(default = "default_element_gain")]
    pub irs_element_gain: f64,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0) {
            return Err(Error::Config("frequency_hz must be positive".into()));
        }
        if self.num_users == 0 {
            return Err(Error::Config("num_users must be at least 1".into()));
        }
        if !(self.noise_power_w >= 0.0) {
            return Err(Error::Config("noise_power_w must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("beta must lie in [0, 1]".into()));
        }
        self.bs_array.validate()?;
        self.user_array.validate()?;
        self.irs_array.validate()?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Resolved compensation factor.
    pub fn eta_value(&self) -> Result<f64> {
        match self.eta {
            EtaSetting::Fixed(v) => Ok(v),
            EtaSetting::Computed(_) => {
                let lambda = self.wavelength();
                compensation_factor(
                    self.irs_element_side_wavelengths * lambda,
                    lambda,
                    self.irs_element_gain,
                )
            }
        }
    }

    pub fn antenna_gains(&self) -> (f64, f64) {
        (
            antenna_gain_amplitude(self.bs_array.num_elements),
            antenna_gain_amplitude(self.user_array.num_elements),
        )
    }
}

/// Sine of the angle from `from` to `to` as seen by an array whose element
/// axis is the unit vector `axis`.
fn sin_toward(from: (f64, f64), to: (f64, f64), axis: (f64, f64)) -> f64 {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let d = (dx * dx + dy * dy).sqrt();
    ((dx * axis.0 + dy * axis.1) / d).clamp(-1.0, 1.0)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Build one user's channel realization from explicit node positions.
///
/// BS and user arrays lie along the x axis (broadside facing the room);
/// reflector arrays lie along the y axis on their wall.
pub fn realization_from_positions(
    cfg: &ScenarioConfig,
    bs_pos: (f64, f64),
    user_pos: (f64, f64),
    irs_positions: &[(f64, f64)],
) -> Result<ChannelRealization> {
    let along_x = (1.0, 0.0);
    let along_y = (0.0, 1.0);
    let f = cfg.frequency_hz;
    let tau = cfg.absorption_per_m;

    let d0 = dist(bs_pos, user_pos);
    let direct = PathParams::new(
        sin_toward(bs_pos, user_pos, along_x).asin(),
        sin_toward(user_pos, bs_pos, along_x).asin(),
        d0,
        path_loss(f, d0, tau)?,
    )?;

    let mut cascades = Vec::with_capacity(irs_positions.len());
    for &irs_pos in irs_positions {
        let dm = dist(bs_pos, irs_pos);
        let dn = dist(irs_pos, user_pos);
        let inbound = PathParams::new(
            sin_toward(bs_pos, irs_pos, along_x).asin(),
            sin_toward(irs_pos, bs_pos, along_y).asin(),
            dm,
            path_loss(f, dm, tau)?,
        )?;
        let outbound = PathParams::new(
            sin_toward(irs_pos, user_pos, along_y).asin(),
            sin_toward(user_pos, irs_pos, along_x).asin(),
            dn,
            path_loss(f, dn, tau)?,
        )?;
        cascades.push(CascadeLegs { inbound, outbound });
    }

    Ok(ChannelRealization::from_paths(
        &cfg.bs_array,
        &cfg.user_array,
        &cfg.irs_array,
        direct,
        cascades,
        cfg.eta_value()?,
        cfg.antenna_gains(),
    ))
}

const SCENARIO_STREAM: u64 = 0x5ce0;

/// Draw node positions for one trial and construct every user's channel.
///
/// Deterministic in (config seed, trial index); trials are independent
/// streams and can be generated in any order.
pub fn sample_scenario(cfg: &ScenarioConfig, trial: u64) -> Result<Vec<ChannelRealization>> {
    cfg.validate()?;
    let mut rng = derive_rng(cfg.seed, &[SCENARIO_STREAM, trial]);
    let p = &cfg.placement;

    let bs_pos = (p.bs_x, rng.gen_range(p.bs_y[0]..=p.bs_y[1]));
    let mut out = Vec::with_capacity(cfg.num_users);
    for k in 0..cfg.num_users {
        let user_pos = loop {
            let x = match p.user_x_spread {
                Some([lo, hi]) => rng.gen_range(lo..=hi),
                None => p.user_x,
            };
            let candidate = (x, rng.gen_range(p.user_y[0]..=p.user_y[1]));
            if dist(bs_pos, candidate) >= p.min_direct_separation_m {
                break candidate;
            }
        };
        // Round-robin assignment: user k is served by the k-th block of
        // irs_per_user consecutive surfaces.
        let irs_positions: Vec<(f64, f64)> = (0..cfg.irs_per_user)
            .map(|i| {
                let global = k * cfg.irs_per_user + i;
                (p.irs_x, p.irs_y_first + p.irs_y_step * global as f64)
            })
            .collect();
        out.push(realization_from_positions(cfg, bs_pos, user_pos, &irs_positions)?);
    }
    Ok(out)
}

/// A scenario close to the reference indoor setup: BS and users on one wall,
/// reflectors on the facing wall four meters away, 0.14 THz carrier.
///
/// Multi-user configurations spread the users across the room width:
/// collinear users would share one direct departure angle, which makes
/// multi-user precoding singular.
pub fn indoor_default(num_users: usize, irs_per_user: usize, num_elements: usize) -> ScenarioConfig {
    let g = ArrayGeometry {
        num_elements,
        spacing: 0.5,
    };
    let placement = PlacementConfig {
        user_x_spread: (num_users > 1).then_some([0.0, 4.0]),
        ..PlacementConfig::default()
    };
    ScenarioConfig {
        frequency_hz: 0.14e12,
        absorption_per_m: 1.83e-5,
        noise_power_w: 10f64.powf((-85.0 - 30.0) / 10.0),
        num_users,
        irs_per_user,
        bs_array: g,
        user_array: g,
        irs_array: g,
        beta: 0.8,
        eta: EtaSetting::Fixed(1.0),
        irs_element_side_wavelengths: 0.5,
        irs_element_gain: std::f64::consts::SQRT_2,
        placement,
        seed: 0,
    }
}
