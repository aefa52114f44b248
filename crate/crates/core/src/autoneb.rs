//! Cycles of path relaxation with adaptive pivot insertion.
//!
//! After each relaxation cycle the path is evaluated densely between
//! neighbouring pivots. Where the true loss rises above the straight-line
//! interpolation of the two pivot losses by more than a fraction `ϑ` of the
//! pivot-loss range, a new pivot is inserted. The saddle estimate is the
//! highest loss seen at any pivot or dense point of the final path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, PivotLosses};
use crate::error::{Error, Result};
use crate::landscape::{Landscape, ParamVector};
use crate::neb::{default_momentum, default_weight_decay, neb_relax, NebConfig};

/// Below this pivot-loss range a path counts as flat and residuals are
/// measured against the mean pivot loss instead.
pub const FLAT_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NebCycle {
    pub steps: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoNebSchedule {
    pub cycles: Vec<NebCycle>,
    #[serde(default = "default_threshold")]
    pub insert_threshold: f64,
    #[serde(default = "default_dense_count")]
    pub dense_count: usize,
    #[serde(default = "default_insert_cap")]
    pub insert_cap: usize,
    #[serde(default = "default_initial_pivots")]
    pub initial_pivots: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub spring_constant: f64,
}

fn default_threshold() -> f64 {
    0.2
}
fn default_dense_count() -> usize {
    9
}
fn default_insert_cap() -> usize {
    4
}
fn default_initial_pivots() -> usize {
    3
}

impl Default for AutoNebSchedule {
    /// Fourteen cycles: 4×1000 steps at 0.1, 2×2000 at 0.1, 4×1000 at
    /// 0.01, 4×1000 at 0.001.
    fn default() -> Self {
        let cycle = |steps, learning_rate| NebCycle { steps, learning_rate };
        let mut cycles = vec![cycle(1000, 0.1); 4];
        cycles.extend([cycle(2000, 0.1); 2]);
        cycles.extend([cycle(1000, 0.01); 4]);
        cycles.extend([cycle(1000, 0.001); 4]);
        AutoNebSchedule {
            cycles,
            insert_threshold: default_threshold(),
            dense_count: default_dense_count(),
            insert_cap: default_insert_cap(),
            initial_pivots: default_initial_pivots(),
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            spring_constant: 0.0,
        }
    }
}

impl AutoNebSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.cycles.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one cycle".into()));
        }
        if !(self.insert_threshold > 0.0 && self.insert_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("insert threshold {} outside (0, 1)", self.insert_threshold)));
        }
        if self.dense_count == 0 || self.insert_cap == 0 || self.initial_pivots == 0 {
            return Err(Error::InvalidConfig("dense count, insert cap and initial pivots must be positive".into()));
        }
        for i in 0..self.cycles.len() {
            self.neb_config(i).validate()?;
        }
        Ok(())
    }

    pub fn neb_config(&self, cycle: usize) -> NebConfig {
        let c = self.cycles[cycle];
        NebConfig {
            steps: c.steps,
            learning_rate: c.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            spring_constant: self.spring_constant,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.cycles.iter().map(|c| c.steps).sum()
    }
}

/// Dense samples on one segment `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProfile {
    pub alphas: Vec<f64>,
    pub true_loss: Vec<f64>,
    pub guess: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseProfile {
    pub pivot_losses: PivotLosses,
    pub segments: Vec<SegmentProfile>,
    /// Divisor applied to `true − guess`: the pivot-loss range, or
    /// `max(1e-12, |mean pivot loss|)` on a flat path.
    pub normalizer: f64,
    pub flat: bool,
}

/// Where along the path a dense-profile value sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPoint {
    Pivot(usize),
    Dense { segment: usize, alpha: f64 },
}

impl DenseProfile {
    /// Builds a profile from known losses. `samples[s]` lists
    /// `(alpha, true_loss)` for segment `s`.
    pub fn from_losses(pivot_losses: PivotLosses, samples: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if samples.len() + 1 != pivot_losses.len() {
            return Err(Error::DimensionMismatch { expected: pivot_losses.len() - 1, found: samples.len() });
        }
        let (normalizer, flat) = residual_normalizer(&pivot_losses);
        let segments = samples
            .into_iter()
            .enumerate()
            .map(|(s, points)| {
                let (left, right) = (pivot_losses[s], pivot_losses[s + 1]);
                let alphas: Vec<f64> = points.iter().map(|p| p.0).collect();
                let true_loss: Vec<f64> = points.iter().map(|p| p.1).collect();
                let guess: Vec<f64> = alphas.iter().map(|a| left * (1.0 - a) + right * a).collect();
                let residual = true_loss.iter().zip(&guess).map(|(t, g)| (t - g) / normalizer).collect();
                SegmentProfile { alphas, true_loss, guess, residual }
            })
            .collect();
        Ok(DenseProfile { pivot_losses, segments, normalizer, flat })
    }

    /// Highest loss over pivots and dense points. Pivots win ties.
    pub fn max_loss(&self) -> (f64, PathPoint) {
        let mut best = (f64::NEG_INFINITY, PathPoint::Pivot(0));
        for (i, &l) in self.pivot_losses.iter().enumerate() {
            if l > best.0 {
                best = (l, PathPoint::Pivot(i));
            }
        }
        for (s, seg) in self.segments.iter().enumerate() {
            for (&alpha, &l) in seg.alphas.iter().zip(&seg.true_loss) {
                if l > best.0 {
                    best = (l, PathPoint::Dense { segment: s, alpha });
                }
            }
        }
        best
    }

    /// Every sample in path order as `(segment position, loss, is_pivot)`,
    /// where the position is `segment index + alpha`.
    pub fn samples(&self) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        for (s, seg) in self.segments.iter().enumerate() {
            out.push((s as f64, self.pivot_losses[s], true));
            for (&alpha, &l) in seg.alphas.iter().zip(&seg.true_loss) {
                out.push((s as f64 + alpha, l, false));
            }
        }
        out.push((self.segments.len() as f64, self.pivot_losses[self.segments.len()], true));
        out
    }
}

fn residual_normalizer(losses: &PivotLosses) -> (f64, bool) {
    let range = losses.max() - losses.min();
    if range >= FLAT_RANGE {
        (range, false)
    } else {
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        (mean.abs().max(FLAT_RANGE), true)
    }
}

/// Loss at every pivot and at `m` equally spaced interior points
/// `α = k/(m+1)` of every segment.
pub fn evaluate_dense<L: Landscape + ?Sized>(chain: &Chain, landscape: &L, m: usize) -> Result<DenseProfile> {
    if m == 0 {
        return Err(Error::InvalidConfig("dense count must be at least 1".into()));
    }
    if chain.dim() != landscape.dim() {
        return Err(Error::DimensionMismatch { expected: landscape.dim(), found: chain.dim() });
    }
    let pivot_losses: Vec<f64> = chain.pivots().par_iter().map(|p| landscape.loss(p)).collect::<Result<_>>()?;
    let alphas: Vec<f64> = (1..=m).map(|k| k as f64 / (m + 1) as f64).collect();
    let samples: Vec<Vec<(f64, f64)>> = chain
        .pivots()
        .par_windows(2)
        .map(|w| {
            alphas
                .iter()
                .map(|&a| Ok((a, landscape.loss(&w[0].lerp(&w[1], a))?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    DenseProfile::from_losses(PivotLosses::new(pivot_losses)?, samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionCandidate {
    pub segment: usize,
    pub alpha: f64,
    pub residual: f64,
}

/// At most one candidate per segment (its largest residual, if above
/// `threshold`), then the `cap` largest overall, sorted by descending
/// residual with ties going to the earlier segment.
pub fn insertion_candidates(profile: &DenseProfile, threshold: f64, cap: usize) -> Vec<InsertionCandidate> {
    let mut out: Vec<InsertionCandidate> = profile
        .segments
        .iter()
        .enumerate()
        .filter_map(|(segment, seg)| {
            let (k, &residual) = seg
                .residual
                .iter()
                .enumerate()
                .fold(None, |best: Option<(usize, &f64)>, (k, r)| match best {
                    Some((_, b)) if *b >= *r => best,
                    _ => Some((k, r)),
                })?;
            (residual > threshold).then(|| InsertionCandidate { segment, alpha: seg.alphas[k], residual })
        })
        .collect();
    out.sort_by(|a, b| b.residual.total_cmp(&a.residual).then(a.segment.cmp(&b.segment)));
    out.truncate(cap);
    out
}

/// Splices `p_s(1−α) + p_{s+1}α` into every candidate segment `s`.
pub fn insert_pivots(chain: &Chain, candidates: &[InsertionCandidate]) -> Result<Chain> {
    let segments = chain.len() - 1;
    let mut at: Vec<Option<f64>> = vec![None; segments];
    for c in candidates {
        if c.segment >= segments {
            return Err(Error::InvalidConfig(format!("segment {} does not exist", c.segment)));
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("insertion position {} outside (0, 1)", c.alpha)));
        }
        if at[c.segment].replace(c.alpha).is_some() {
            return Err(Error::DuplicateSegment { segment: c.segment });
        }
    }
    let p = chain.pivots();
    let mut interior = Vec::with_capacity(chain.interior_count() + candidates.len());
    for (s, alpha) in at.iter().enumerate() {
        if s > 0 {
            interior.push(p[s].clone());
        }
        if let Some(alpha) = alpha {
            interior.push(p[s].lerp(&p[s + 1], *alpha));
        }
    }
    chain.with_interior(interior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaddleSource {
    Pivot,
    DensePoint,
}

/// Highest-loss point found on a path.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleRecord {
    pub params: ParamVector,
    pub loss: f64,
    pub source: SaddleSource,
}

impl SaddleRecord {
    pub fn from_profile(chain: &Chain, profile: &DenseProfile) -> SaddleRecord {
        let (loss, at) = profile.max_loss();
        match at {
            PathPoint::Pivot(i) => SaddleRecord { params: chain.pivots()[i].clone(), loss, source: SaddleSource::Pivot },
            PathPoint::Dense { segment, alpha } => SaddleRecord {
                params: chain.pivots()[segment].lerp(&chain.pivots()[segment + 1], alpha),
                loss,
                source: SaddleSource::DensePoint,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutoNebOutcome {
    pub chain: Chain,
    pub saddle: SaddleRecord,
    /// Dense profile of the returned chain.
    pub profile: DenseProfile,
    /// Highest dense-profile loss after each cycle's relaxation.
    pub cycle_max_losses: Vec<f64>,
    /// Pivot count (including endpoints) entering each cycle.
    pub pivot_counts: Vec<usize>,
}

/// Connects two points: start from `initial_pivots` interior pivots on the
/// straight segment, then for each scheduled cycle relax, evaluate densely
/// and insert pivots where the residual is large.
pub fn auto_neb<L: Landscape + ?Sized>(
    start: &ParamVector,
    end: &ParamVector,
    landscape: &L,
    schedule: &AutoNebSchedule,
) -> Result<AutoNebOutcome> {
    schedule.validate()?;
    for p in [start, end] {
        if p.dim() != landscape.dim() {
            return Err(Error::DimensionMismatch { expected: landscape.dim(), found: p.dim() });
        }
    }
    let mut chain = Chain::straight(start, end, schedule.initial_pivots)?;
    let mut cycle_max_losses = Vec::with_capacity(schedule.cycles.len());
    let mut pivot_counts = Vec::with_capacity(schedule.cycles.len());
    for cycle in 0..schedule.cycles.len() {
        pivot_counts.push(chain.len());
        chain = neb_relax(&chain, landscape, &schedule.neb_config(cycle))?.chain;
        let profile = evaluate_dense(&chain, landscape, schedule.dense_count)?;
        cycle_max_losses.push(profile.max_loss().0);
        let candidates = insertion_candidates(&profile, schedule.insert_threshold, schedule.insert_cap);
        chain = insert_pivots(&chain, &candidates)?;
    }
    let profile = evaluate_dense(&chain, landscape, schedule.dense_count)?;
    let saddle = SaddleRecord::from_profile(&chain, &profile);
    Ok(AutoNebOutcome { chain, saddle, profile, cycle_max_losses, pivot_counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{make_double_well, Linear};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn losses(v: &[f64]) -> PivotLosses {
        PivotLosses::new(v.to_vec()).unwrap()
    }

    /// Worked example: only segment 1 carries a bump.
    fn worked_profile() -> DenseProfile {
        let pivots = losses(&[1.0, 0.2, 0.0, 0.6, 2.0]);
        let line = |s: usize| {
            let (a, b) = (pivots[s], pivots[s + 1]);
            vec![(0.25, a * 0.75 + b * 0.25), (0.5, a * 0.5 + b * 0.5), (0.75, a * 0.25 + b * 0.75)]
        };
        let mut samples: Vec<_> = (0..4).map(line).collect();
        samples[1][1].1 = 0.7;
        DenseProfile::from_losses(pivots, samples).unwrap()
    }

    #[test]
    fn worked_insertion_example() {
        let profile = worked_profile();
        assert_eq!(profile.normalizer, 2.0);
        assert!((profile.segments[1].guess[1] - 0.1).abs() < 1e-15);
        let c = insertion_candidates(&profile, 0.2, 4);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].segment, c[0].alpha), (1, 0.5));
        assert!((c[0].residual - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_and_cap() {
        let profile = worked_profile();
        assert!(insertion_candidates(&profile, 0.31, 4).is_empty());

        let pivots = losses(&[0.0, 0.0, 1.0]);
        let samples = vec![vec![(0.5, 0.6)], vec![(0.5, 0.9)]];
        let two = DenseProfile::from_losses(pivots, samples).unwrap();
        let all = insertion_candidates(&two, 0.2, 4);
        assert_eq!(all.iter().map(|c| c.segment).collect::<Vec<_>>(), vec![0, 1]);
        let capped = insertion_candidates(&two, 0.2, 1);
        assert_eq!(capped.len(), 1);
        assert_eq!(capped[0].segment, 0);
    }

    #[test]
    fn one_candidate_per_segment_at_highest_residual() {
        let pivots = losses(&[0.0, 1.0]);
        let samples = vec![vec![(0.25, 0.6), (0.5, 0.9), (0.75, 1.2)]];
        let p = DenseProfile::from_losses(pivots, samples).unwrap();
        let c = insertion_candidates(&p, 0.2, 4);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].alpha, 0.75);
    }

    #[test]
    fn flat_path_guard() {
        let pivots = losses(&[2.0, 2.0, 2.0]);
        let samples = vec![vec![(0.5, 2.0)], vec![(0.5, 3.0)]];
        let p = DenseProfile::from_losses(pivots, samples).unwrap();
        assert!(p.flat);
        assert_eq!(p.normalizer, 2.0);
        let c = insertion_candidates(&p, 0.2, 4);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].segment, 1);

        let zeros = DenseProfile::from_losses(losses(&[0.0, 0.0]), vec![vec![(0.5, 0.0)]]).unwrap();
        assert_eq!(zeros.normalizer, FLAT_RANGE);
        assert!(insertion_candidates(&zeros, 0.2, 4).is_empty());
    }

    #[test]
    fn dense_evaluation_counts_and_linearity() {
        let c = Chain::straight(&pv(&[0.0, 0.0]), &pv(&[1.0, 2.0]), 2).unwrap();
        let lin = Linear { coefficients: vec![3.0, -1.0] };
        let p = evaluate_dense(&c, &lin, 4).unwrap();
        assert_eq!(p.segments.len(), 3);
        assert!(p.segments.iter().all(|s| s.alphas.len() == 4));
        assert!(p.segments.iter().flat_map(|s| &s.residual).all(|r| r.abs() < 1e-12));
        let single = evaluate_dense(&c, &lin, 1).unwrap();
        assert!(single.segments.iter().all(|s| s.alphas == vec![0.5]));
        assert_eq!(p.samples().len(), 4 + 3 * 4);
        assert!(evaluate_dense(&c, &lin, 0).is_err());
    }

    #[test]
    fn double_well_straight_segment_bulges() {
        let c = Chain::straight(&pv(&[-1.0, 1.0]), &pv(&[1.0, 1.0]), 2).unwrap();
        for m in [1, 2, 9] {
            let p = evaluate_dense(&c, &make_double_well(), m).unwrap();
            let mid = &p.segments[1];
            let k = mid.alphas.len() / 2;
            assert!(mid.true_loss[k] > mid.guess[k]);
        }
    }

    #[test]
    fn insert_examples() {
        let c = Chain::straight(&pv(&[0.0]), &pv(&[2.0]), 0).unwrap();
        assert_eq!(insert_pivots(&c, &[]).unwrap(), c);
        let mid = InsertionCandidate { segment: 0, alpha: 0.5, residual: 1.0 };
        assert_eq!(insert_pivots(&c, &[mid]).unwrap().pivots(), &[pv(&[0.0]), pv(&[1.0]), pv(&[2.0])]);

        let c = Chain::straight(&pv(&[0.0]), &pv(&[3.0]), 2).unwrap();
        let cands = [
            InsertionCandidate { segment: 2, alpha: 0.5, residual: 1.0 },
            InsertionCandidate { segment: 0, alpha: 0.25, residual: 0.5 },
        ];
        let out = insert_pivots(&c, &cands).unwrap();
        assert_eq!(out.len(), c.len() + 2);
        let xs: Vec<f64> = out.pivots().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 1.0, 2.0, 2.5, 3.0]);

        let dup = [cands[0], cands[0]];
        assert!(matches!(insert_pivots(&c, &dup), Err(Error::DuplicateSegment { segment: 2 })));
    }

    #[test]
    fn coincident_endpoints() {
        let p = pv(&[1.0, 1.0]);
        let schedule = AutoNebSchedule { cycles: vec![NebCycle { steps: 10, learning_rate: 0.01 }], ..Default::default() };
        let out = auto_neb(&p, &p, &make_double_well(), &schedule).unwrap();
        assert_eq!(out.saddle.loss, 0.0);
        assert!(out.chain.pivots().iter().all(|q| q == &p));
    }

    #[test]
    fn default_schedule_has_fourteen_cycles() {
        let s = AutoNebSchedule::default();
        assert_eq!(s.cycles.len(), 14);
        assert_eq!(s.total_steps(), 4 * 1000 + 2 * 2000 + 8 * 1000);
        assert_eq!((s.insert_threshold, s.dense_count, s.insert_cap, s.initial_pivots), (0.2, 9, 4, 3));
        s.validate().unwrap();
    }
}
