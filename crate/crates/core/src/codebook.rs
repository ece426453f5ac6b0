//! Narrow-beam grids and ternary-tree hierarchical codebooks.
//!
//! The bottom stage of every codebook is a grid of N narrow beams. The
//! proposed grid spaces beam centers uniformly in sine space, which gives
//! every beam the same coverage-edge gain; the benchmark grid spaces them
//! uniformly in angle, which gives every beam the same beamwidth but a
//! direction-dependent edge gain.
//!
//! Upper stages form a ternary tree: each stage-s codeword covers exactly
//! three stage-(s+1) codewords. Two constructions are provided. The tree
//! dictionary (TD) codebook solves a least-squares fit of each wide beam to
//! the indicator of its descendant narrow beams, using the full aperture.
//! The phase-shifter deactivation (PSD) codebook realizes wide beams by
//! shrinking the active aperture to 3^s elements, so each wide codeword
//! needs a single RF chain.

use serde::{Deserialize, Serialize};

use crate::array::{arv, arv_from_sin, ArrayGeometry};
use crate::error::Error;
use crate::{CMat, CVec, Cx, Result};

/// Which grid and wide-beam construction a codebook uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodebookKind {
    /// Sine-uniform grid, least-squares wide beams.
    TreeDictionary,
    /// Sine-uniform grid, reduced-aperture wide beams.
    PsDeactivation,
    /// Angle-uniform grid, least-squares wide beams.
    UniformBenchmark,
}

impl CodebookKind {
    pub fn label(&self) -> &'static str {
        match self {
            CodebookKind::TreeDictionary => "td",
            CodebookKind::PsDeactivation => "psd",
            CodebookKind::UniformBenchmark => "benchmark",
        }
    }
}

/// What an individual codeword is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeamKind {
    /// Bottom-stage narrow beam (shared by all codebook kinds).
    Narrow,
    TreeDictionary,
    PsDeactivation,
    UniformBenchmark,
}

/// A unit-norm codeword with its position in the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub weights: CVec,
    /// Stage s, 1-based; the bottom stage is s = S.
    pub stage: usize,
    /// Index n within the stage, 1-based, n in [1, 3^s].
    pub index: usize,
    pub kind: BeamKind,
}

/// Staged ternary tree of beams. Stage s holds 3^s codewords; the bottom
/// stage holds the N narrow beams whose directions are in `directions`.
#[derive(Debug, Clone)]
pub struct HierarchicalCodebook {
    /// stages[s - 1] is stage s.
    pub stages: Vec<Vec<Beam>>,
    pub num_narrow: usize,
    pub geometry: ArrayGeometry,
    pub kind: CodebookKind,
    /// Bottom-stage beam directions, radians, ascending.
    pub directions: Vec<f64>,
}

/// True when n is an exact power of three; returns the exponent.
pub fn log3_exact(n: usize) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let mut v = n;
    let mut s = 0;
    while v % 3 == 0 {
        v /= 3;
        s += 1;
    }
    (v == 1).then_some(s)
}

/// Directions with equal coverage-edge gain: phi_n = arcsin((2n-1)/N - 1).
/// Beam centers are spaced by exactly 2/N in sine space.
pub fn narrow_directions(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| ((2 * i - 1) as f64 / n as f64 - 1.0).asin())
        .collect()
}

/// Sines of the narrow-beam centers: (2n-1)/N - 1.
pub fn narrow_direction_sines(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| (2 * i - 1) as f64 / n as f64 - 1.0)
        .collect()
}

/// Directions with equal beamwidth: phi_n = -pi/2 + (2n-1)*pi/(2N).
pub fn uniform_directions(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| -std::f64::consts::FRAC_PI_2 + (2 * i - 1) as f64 * std::f64::consts::PI
            / (2.0 * n as f64))
        .collect()
}

/// Coverage-edge gain of the sine-uniform grid:
/// rho = sin(N_a*pi/(2N)) / (N_a*sin(pi/(2N))). Requires N >= N_a.
pub fn edge_gain(num_elements: usize, num_beams: usize) -> Result<f64> {
    if num_beams < num_elements {
        return Err(Error::invalid(format!(
            "whole-space coverage needs at least as many beams as elements ({num_beams} < {num_elements})"
        )));
    }
    let na = num_elements as f64;
    let n = num_beams as f64;
    Ok((na * std::f64::consts::PI / (2.0 * n)).sin()
        / (na * (std::f64::consts::PI / (2.0 * n)).sin()))
}

/// Normalized detected gain |w^H a(psi)| of a beam toward direction psi.
pub fn detected_gain(beam: &Beam, geom: &ArrayGeometry, direction: f64) -> f64 {
    gain_toward_sin(&beam.weights, geom, direction.sin())
}

/// Same, parameterized by sin(psi).
pub fn gain_toward_sin(weights: &CVec, geom: &ArrayGeometry, sin_psi: f64) -> f64 {
    let probe = arv_from_sin(geom, sin_psi);
    weights.dotc(&probe).norm()
}

/// Detected gain normalized to the beam's active aperture: the probing ARV
/// is restricted to the beam's support before normalization, so a
/// reduced-aperture codeword reaches gain 1 at its own center. Equals the
/// plain detected gain for beams using the whole array.
pub fn coverage_gain(weights: &CVec, geom: &ArrayGeometry, sin_psi: f64) -> f64 {
    let support = weights.iter().filter(|c| c.norm_sqr() > 0.0).count();
    gain_toward_sin(weights, geom, sin_psi) * (geom.num_elements as f64 / support as f64).sqrt()
}

/// The Dirichlet-kernel gain profile |sin(N_a*pi*x/2) / (N_a*sin(pi*x/2))|
/// of a narrow beam at sine offset x, for half-wavelength spacing.
pub fn narrow_gain_profile(num_elements: usize, x: f64) -> f64 {
    let na = num_elements as f64;
    let denom = na * (std::f64::consts::PI * x / 2.0).sin();
    if denom.abs() < 1e-300 {
        return 1.0;
    }
    ((na * std::f64::consts::PI * x / 2.0).sin() / denom).abs()
}

/// Search time M*log_M(N) of an M-ary tree descent over N leaves.
pub fn tree_search_time(arity: usize, num_leaves: usize) -> f64 {
    let m = arity as f64;
    m * (num_leaves as f64).ln() / m.ln()
}

fn stage_count(num_narrow: usize, num_elements: usize) -> Result<u32> {
    let s = log3_exact(num_narrow)
        .ok_or_else(|| Error::invalid(format!("{num_narrow} beams is not a power of three")))?;
    if s == 0 {
        return Err(Error::invalid("need at least three narrow beams"));
    }
    if num_narrow < num_elements {
        return Err(Error::invalid(format!(
            "need at least as many narrow beams as elements ({num_narrow} < {num_elements})"
        )));
    }
    Ok(s)
}

/// 0-based rows of the descendant indicator column: narrow beams covered by
/// codeword n (1-based) of stage s in an S-stage tree.
pub(crate) fn descendant_rows(num_narrow: usize, s: u32, total_stages: u32, n: usize) -> std::ops::Range<usize> {
    let span = num_narrow / 3usize.pow(s);
    debug_assert_eq!(span, 3usize.pow(total_stages - s));
    (n - 1) * span..n * span
}

fn build_ls_tree(
    geom: &ArrayGeometry,
    directions: &[f64],
    kind: CodebookKind,
    hybrid_rf: Option<usize>,
) -> Result<HierarchicalCodebook> {
    let n = directions.len();
    let s_total = stage_count(n, geom.num_elements)?;
    let narrow: Vec<CVec> = directions.iter().map(|&d| arv(geom, d)).collect();

    // Gram matrix of the stacked narrow beams, factored once.
    let mut l = CMat::zeros(geom.num_elements, n);
    for (c, w) in narrow.iter().enumerate() {
        l.set_column(c, w);
    }
    let gram = &l * l.adjoint();
    let lu = gram.clone().lu();
    if lu.determinant().norm() < 1e-300 {
        return Err(Error::numerical(
            "narrow-beam gram matrix is singular; the grid does not span the aperture",
        ));
    }

    let mut stages: Vec<Vec<Beam>> = Vec::with_capacity(s_total as usize);
    for s in 1..=s_total {
        let count = 3usize.pow(s);
        let mut beams = Vec::with_capacity(count);
        if s == s_total {
            for (i, w) in narrow.iter().enumerate() {
                beams.push(Beam {
                    weights: w.clone(),
                    stage: s as usize,
                    index: i + 1,
                    kind: BeamKind::Narrow,
                });
            }
        } else {
            let beam_kind = match kind {
                CodebookKind::TreeDictionary => BeamKind::TreeDictionary,
                CodebookKind::UniformBenchmark => BeamKind::UniformBenchmark,
                CodebookKind::PsDeactivation => unreachable!(),
            };
            for idx in 1..=count {
                // Right-hand side L * D_s(:, idx): the sum of descendant
                // narrow beams.
                let mut rhs = CVec::zeros(geom.num_elements);
                for row in descendant_rows(n, s, s_total, idx) {
                    rhs += &narrow[row];
                }
                let mut w = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::numerical("gram solve failed"))?;
                let norm = w.norm();
                if norm < 1e-300 {
                    return Err(Error::numerical("degenerate wide codeword"));
                }
                w /= Cx::new(norm, 0.0);
                let w = match hybrid_rf {
                    Some(rf) => omp_decompose(&w, &narrow, rf)?.approximation,
                    None => w,
                };
                beams.push(Beam {
                    weights: w,
                    stage: s as usize,
                    index: idx,
                    kind: beam_kind,
                });
            }
        }
        stages.push(beams);
    }

    Ok(HierarchicalCodebook {
        stages,
        num_narrow: n,
        geometry: *geom,
        kind,
        directions: directions.to_vec(),
    })
}

/// Tree-dictionary codebook: least-squares wide beams over the sine-uniform
/// narrow grid. When `hybrid_rf` is given, every wide codeword is replaced
/// by its `num_rf`-atom hybrid approximation.
pub fn build_td(
    geom: &ArrayGeometry,
    num_narrow: usize,
    hybrid_rf: Option<usize>,
) -> Result<HierarchicalCodebook> {
    build_ls_tree(
        geom,
        &narrow_directions(num_narrow),
        CodebookKind::TreeDictionary,
        hybrid_rf,
    )
}

/// Benchmark codebook: the same least-squares tree built over the
/// angle-uniform grid.
pub fn build_benchmark(
    geom: &ArrayGeometry,
    num_narrow: usize,
    hybrid_rf: Option<usize>,
) -> Result<HierarchicalCodebook> {
    build_ls_tree(
        geom,
        &uniform_directions(num_narrow),
        CodebookKind::UniformBenchmark,
        hybrid_rf,
    )
}

/// Steering index of PSD codeword n at stage s into the narrow direction
/// table: i = (N*3^{-s}*(2n-1) + 1) / 2, 1-based.
pub fn psd_angle_index(num_narrow: usize, n: usize, s: u32) -> usize {
    let scale = num_narrow / 3usize.pow(s);
    (scale * (2 * n - 1) + 1) / 2
}

/// Phase-shifter deactivation codebook. Codewords in stage s steer an
/// aperture of 3^s adjacent elements (the rest deactivated) until the full
/// aperture is reached at s_max = floor(log3 N_a).
pub fn build_psd(geom: &ArrayGeometry, num_narrow: usize) -> Result<HierarchicalCodebook> {
    let s_total = stage_count(num_narrow, geom.num_elements)?;
    let s_max = (geom.num_elements as f64).log(3.0).floor() as u32;
    let directions = narrow_directions(num_narrow);
    let sines = narrow_direction_sines(num_narrow);

    let mut stages = Vec::with_capacity(s_total as usize);
    for s in 1..=s_total {
        let count = 3usize.pow(s);
        let mut beams = Vec::with_capacity(count);
        for n in 1..=count {
            let dir_sin = sines[psd_angle_index(num_narrow, n, s) - 1];
            let weights = if s <= s_max && s < s_total {
                let active = 3usize.pow(s);
                let sub = ArrayGeometry {
                    num_elements: active,
                    spacing: geom.spacing,
                };
                let short = arv_from_sin(&sub, dir_sin);
                let mut w = CVec::zeros(geom.num_elements);
                for i in 0..active {
                    w[i] = short[i];
                }
                w
            } else {
                arv_from_sin(geom, dir_sin)
            };
            beams.push(Beam {
                weights,
                stage: s as usize,
                index: n,
                kind: if s == s_total {
                    BeamKind::Narrow
                } else {
                    BeamKind::PsDeactivation
                },
            });
        }
        stages.push(beams);
    }

    Ok(HierarchicalCodebook {
        stages,
        num_narrow,
        geometry: *geom,
        kind: CodebookKind::PsDeactivation,
        directions,
    })
}

/// Stage-s coverage-edge gain of the PSD codebook. For reduced-aperture
/// stages this is 1/(3^s*sin(pi/(2*3^s))); for full-aperture stages it is
/// the narrow-beam profile evaluated at the stage's cell edge 1/3^s.
pub fn psd_edge_gain(num_elements: usize, s: u32, num_narrow: usize) -> Result<f64> {
    let s_total = log3_exact(num_narrow)
        .ok_or_else(|| Error::invalid(format!("{num_narrow} beams is not a power of three")))?;
    if s == 0 || s > s_total {
        return Err(Error::invalid(format!("stage {s} outside [1, {s_total}]")));
    }
    let s_max = (num_elements as f64).log(3.0).floor() as u32;
    let p3 = 3f64.powi(s as i32);
    if s <= s_max {
        Ok(1.0 / (p3 * (std::f64::consts::PI / (2.0 * p3)).sin()))
    } else {
        Ok(narrow_gain_profile(num_elements, 1.0 / p3))
    }
}

impl HierarchicalCodebook {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Codeword n (1-based) of stage s (1-based).
    pub fn beam(&self, stage: usize, index: usize) -> &Beam {
        &self.stages[stage - 1][index - 1]
    }

    pub fn bottom(&self) -> &[Beam] {
        &self.stages[self.num_stages() - 1]
    }

    /// Child indices {3n-2, 3n-1, 3n} of codeword n.
    pub fn children(index: usize) -> [usize; 3] {
        [3 * index - 2, 3 * index - 1, 3 * index]
    }

    /// 1-based index of the narrow beam whose cell covers the direction,
    /// by its sine.
    pub fn covering_leaf(&self, sin_dir: f64) -> usize {
        let n = self.num_narrow as f64;
        match self.kind {
            CodebookKind::UniformBenchmark => {
                // Equal-angle cells.
                let angle = sin_dir.clamp(-1.0, 1.0).asin();
                let cell = ((angle + std::f64::consts::FRAC_PI_2) / (std::f64::consts::PI / n))
                    .floor() as isize;
                cell.clamp(0, self.num_narrow as isize - 1) as usize + 1
            }
            _ => {
                // Equal-sine cells of width 2/N.
                let cell = ((sin_dir + 1.0) / (2.0 / n)).floor() as isize;
                cell.clamp(0, self.num_narrow as isize - 1) as usize + 1
            }
        }
    }

    /// Serialize to the interchange JSON format (re/im pairs).
    pub fn to_file(&self, config_hash: Option<String>) -> CodebookFile {
        CodebookFile {
            config_hash,
            kind: self.kind.label().to_string(),
            num_elements: self.geometry.num_elements,
            spacing_wavelengths: self.geometry.spacing,
            num_narrow: self.num_narrow,
            stages: self
                .stages
                .iter()
                .map(|stage| {
                    stage
                        .iter()
                        .map(|b| BeamRecord {
                            stage: b.stage,
                            index: b.index,
                            weights: b.weights.iter().map(|c| [c.re, c.im]).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Interchange form of a codeword: weights as [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamRecord {
    pub stage: usize,
    pub index: usize,
    pub weights: Vec<[f64; 2]>,
}

/// Interchange form of a whole codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub kind: String,
    pub num_elements: usize,
    pub spacing_wavelengths: f64,
    pub num_narrow: usize,
    pub stages: Vec<Vec<BeamRecord>>,
}

impl CodebookFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("codebook serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("codebook file: {e}")))
    }

    /// Reconstruct the in-memory codebook, validating shape and norms.
    pub fn to_codebook(&self) -> Result<HierarchicalCodebook> {
        let kind = match self.kind.as_str() {
            "td" => CodebookKind::TreeDictionary,
            "psd" => CodebookKind::PsDeactivation,
            "benchmark" => CodebookKind::UniformBenchmark,
            other => return Err(Error::Config(format!("unknown codebook kind '{other}'"))),
        };
        let geometry = ArrayGeometry::new(self.num_elements, self.spacing_wavelengths)?;
        let s_total = log3_exact(self.num_narrow)
            .ok_or_else(|| Error::Config("num_narrow is not a power of three".into()))?;
        if self.stages.len() != s_total as usize {
            return Err(Error::Config(format!(
                "expected {s_total} stages, file has {}",
                self.stages.len()
            )));
        }
        let mut stages = Vec::with_capacity(self.stages.len());
        for (si, stage) in self.stages.iter().enumerate() {
            let s = si + 1;
            if stage.len() != 3usize.pow(s as u32) {
                return Err(Error::Config(format!(
                    "stage {s} has {} beams, expected {}",
                    stage.len(),
                    3usize.pow(s as u32)
                )));
            }
            let mut beams = Vec::with_capacity(stage.len());
            for (bi, rec) in stage.iter().enumerate() {
                if rec.weights.len() != self.num_elements {
                    return Err(Error::Config(format!(
                        "beam {}/{} has {} weights, expected {}",
                        s,
                        bi + 1,
                        rec.weights.len(),
                        self.num_elements
                    )));
                }
                let weights =
                    CVec::from_iterator(rec.weights.len(), rec.weights.iter().map(|p| Cx::new(p[0], p[1])));
                if (weights.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::Config(format!(
                        "beam {}/{} is not unit norm",
                        s,
                        bi + 1
                    )));
                }
                beams.push(Beam {
                    weights,
                    stage: s,
                    index: bi + 1,
                    kind: if s == self.stages.len() {
                        BeamKind::Narrow
                    } else {
                        match kind {
                            CodebookKind::TreeDictionary => BeamKind::TreeDictionary,
                            CodebookKind::PsDeactivation => BeamKind::PsDeactivation,
                            CodebookKind::UniformBenchmark => BeamKind::UniformBenchmark,
                        }
                    },
                });
            }
            stages.push(beams);
        }
        let directions = match kind {
            CodebookKind::UniformBenchmark => uniform_directions(self.num_narrow),
            _ => narrow_directions(self.num_narrow),
        };
        Ok(HierarchicalCodebook {
            stages,
            num_narrow: self.num_narrow,
            geometry,
            kind,
            directions,
        })
    }
}

/// Result of the greedy sparse decomposition of a codeword over the
/// quantized ARV dictionary.
#[derive(Debug, Clone)]
pub struct HybridRealization {
    /// Selected dictionary atom indices, in selection order.
    pub analog_indices: Vec<usize>,
    /// The selected atoms themselves (columns of the analog stage).
    pub analog_columns: Vec<CVec>,
    /// Digital combining weights over the selected atoms, scaled so the
    /// composite vector has unit norm.
    pub digital: CVec,
    /// Euclidean distance between the target and its best span
    /// approximation before renormalization.
    pub residual: f64,
    /// Unit-norm composite vector analog * digital.
    pub approximation: CVec,
}

/// Orthogonal matching pursuit: greedily pick the atom most correlated with
/// the residual, re-solve the least squares over all picked atoms, repeat
/// `num_rf` times. Ties break toward the lowest atom index.
pub fn omp_decompose(target: &CVec, dictionary: &[CVec], num_rf: usize) -> Result<HybridRealization> {
    if dictionary.is_empty() {
        return Err(Error::invalid("empty dictionary"));
    }
    if num_rf == 0 {
        return Err(Error::invalid("need at least one RF chain"));
    }
    let dim = target.len();
    let steps = num_rf.min(dictionary.len());

    let mut selected: Vec<usize> = Vec::with_capacity(steps);
    let mut residual = target.clone();
    let mut coeffs = CVec::zeros(0);

    for _ in 0..steps {
        let mut best = None;
        let mut best_corr = -1.0;
        for (i, atom) in dictionary.iter().enumerate() {
            if selected.contains(&i) {
                continue;
            }
            let corr = atom.dotc(&residual).norm();
            if corr > best_corr + 1e-15 {
                best_corr = corr;
                best = Some(i);
            }
        }
        let Some(pick) = best else { break };
        selected.push(pick);

        // Least squares over the selected atoms via the normal equations;
        // the atom count stays small.
        let t = selected.len();
        let mut a = CMat::zeros(dim, t);
        for (c, &idx) in selected.iter().enumerate() {
            a.set_column(c, &dictionary[idx]);
        }
        let gram = a.adjoint() * &a;
        let rhs = a.adjoint() * target;
        let solved = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("rank-deficient atom selection"))?;
        coeffs = solved;
        residual = target - &a * &coeffs;
    }

    let mut a = CMat::zeros(dim, selected.len());
    for (c, &idx) in selected.iter().enumerate() {
        a.set_column(c, &dictionary[idx]);
    }
    let approx_raw = &a * &coeffs;
    let res_norm = (target - &approx_raw).norm();
    let scale = approx_raw.norm();
    if scale < 1e-300 {
        return Err(Error::numerical("decomposition collapsed to zero"));
    }
    let approximation = approx_raw / Cx::new(scale, 0.0);
    let digital = coeffs / Cx::new(scale, 0.0);

    Ok(HybridRealization {
        analog_indices: selected.clone(),
        analog_columns: selected.iter().map(|&i| dictionary[i].clone()).collect(),
        digital,
        residual: res_norm,
        approximation,
    })
}

/// Uniform grid over sine space [-1, 1] used by coverage checks and pattern
/// dumps.
pub fn sine_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect()
}
