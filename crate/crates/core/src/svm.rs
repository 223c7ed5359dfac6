//! Binary linear SVM (L2-regularized, L1 hinge loss) trained by dual
//! coordinate descent.
//!
//! The bias is folded in as an extra constant-1 feature, so it is regularized
//! together with the weights. The primal objective is
//!
//! ```text
//! P(w, b) = ½(‖w‖² + b²) + Σᵢ Cᵢ · max(0, 1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! with `Cᵢ = C · positive_weight` for positives and `Cᵢ = C` for negatives.
//! The dual is `D(α) = Σᵢ αᵢ − ½‖Σᵢ αᵢ yᵢ x̃ᵢ‖²` over the box `0 ≤ αᵢ ≤ Cᵢ`.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{dot_f32, dot_mixed, ClassId, FeatureVector};

pub const CLASSIFIER_MAGIC: &[u8; 4] = b"DSC1";

/// Margin band used by [`dual_gap`] to decide which dual variables are free.
const GAP_MARGIN_BAND: f64 = 1e-3;
const GAP_MAX_SWEEPS: usize = 100_000;
const GAP_ASCENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub c: f64,
    /// Stop once the largest projected-gradient magnitude of an epoch is below
    /// this and the primal-dual gap is below `tolerance * (1 + |primal|)`.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Multiplier on `c` for positive examples.
    pub positive_weight: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
            positive_weight: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("c", format!("must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs", "must be at least 1"));
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return Err(Error::invalid("positive_weight", "must be positive"));
        }
        Ok(())
    }

    fn upper_bound(&self, positive: bool) -> f64 {
        if positive {
            self.c * self.positive_weight
        } else {
            self.c
        }
    }
}

/// One class's scorer: `score(x) = weights · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub class_id: ClassId,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_used: f32,
    pub trained_in_state: u32,
}

impl LinearClassifier {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(self.score_slice(x.as_slice()))
    }

    #[inline]
    pub(crate) fn score_slice(&self, x: &[f32]) -> f64 {
        dot_mixed(x, &self.weights) + self.bias
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CLASSIFIER_MAGIC)?;
        w.write_u32::<LittleEndian>(self.weights.len() as u32)?;
        w.write_i32::<LittleEndian>(self.class_id as i32)?;
        w.write_u32::<LittleEndian>(self.trained_in_state)?;
        w.write_f32::<LittleEndian>(self.c_used)?;
        for &v in &self.weights {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_f64::<LittleEndian>(self.bias)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * (self.weights.len() + 1));
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Reads one record; `Ok(None)` at a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Self>> {
        let mut magic = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match r.read(&mut magic[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(Error::format(None, "truncated classifier header")),
                Ok(n) => filled += n,
                Err(e) => return Err(Error::format(None, e.to_string())),
            }
        }
        if &magic != CLASSIFIER_MAGIC {
            return Err(Error::format(None, format!("bad classifier magic {magic:?}")));
        }
        let bad = |e: std::io::Error| Error::format(None, format!("truncated classifier: {e}"));
        let d = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
        let class_id = r.read_i32::<LittleEndian>().map_err(bad)?;
        let class_id = ClassId::try_from(class_id)
            .map_err(|_| Error::format(None, format!("negative classifier class id {class_id}")))?;
        let trained_in_state = r.read_u32::<LittleEndian>().map_err(bad)?;
        let c_used = r.read_f32::<LittleEndian>().map_err(bad)?;
        let mut weights = vec![0f64; d];
        r.read_f64_into::<LittleEndian>(&mut weights).map_err(bad)?;
        let bias = r.read_f64::<LittleEndian>().map_err(bad)?;
        Ok(Some(Self {
            class_id,
            weights,
            bias,
            c_used,
            trained_in_state,
        }))
    }

    pub fn read_all<R: Read>(r: &mut R) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        while let Some(c) = Self::read_from(r)? {
            out.push(c);
        }
        Ok(out)
    }

    pub fn csv_header(dim: usize) -> String {
        let mut s = String::from("class_id,state,c_used,bias");
        for i in 0..dim {
            s.push_str(&format!(",w{i}"));
        }
        s
    }

    pub fn to_csv_line(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.class_id, self.trained_in_state, self.c_used, self.bias
        );
        for w in &self.weights {
            s.push(',');
            s.push_str(&w.to_string());
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub epochs: usize,
    pub converged: bool,
    /// Largest projected-gradient magnitude seen in the last epoch.
    pub max_violation: f64,
    pub dual_objective: f64,
}

/// Positives first, then negatives, addressed by a single index.
struct Problem<'a, P, N> {
    positives: &'a [P],
    negatives: &'a [N],
    dim: usize,
}

impl<'a, P: AsRef<[f32]>, N: AsRef<[f32]>> Problem<'a, P, N> {
    fn new(positives: &'a [P], negatives: &'a [N]) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::EmptyClass("no positive examples".into()));
        }
        if negatives.is_empty() {
            return Err(Error::EmptyClass("no negative examples".into()));
        }
        let dim = positives[0].as_ref().len();
        for v in positives
            .iter()
            .map(AsRef::as_ref)
            .chain(negatives.iter().map(AsRef::as_ref))
        {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
        }
        Ok(Self {
            positives,
            negatives,
            dim,
        })
    }

    fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    #[inline]
    fn sample(&self, i: usize) -> (&[f32], f64) {
        if i < self.positives.len() {
            (self.positives[i].as_ref(), 1.0)
        } else {
            (self.negatives[i - self.positives.len()].as_ref(), -1.0)
        }
    }

    fn primal(&self, weights: &[f64], bias: f64, config: &SolverConfig) -> f64 {
        let reg = 0.5 * (weights.iter().map(|w| w * w).sum::<f64>() + bias * bias);
        let loss: f64 = (0..self.len())
            .map(|i| {
                let (x, y) = self.sample(i);
                let hinge = (1.0 - y * (dot_mixed(x, weights) + bias)).max(0.0);
                config.upper_bound(y > 0.0) * hinge
            })
            .sum();
        reg + loss
    }
}

/// Trains a classifier for `positives` against `negatives`.
///
/// The returned classifier carries `class_id = 0` and `trained_in_state = 0`;
/// callers tag it with its origin.
pub fn train_svm<P, N>(positives: &[P], negatives: &[N], config: &SolverConfig) -> Result<LinearClassifier>
where
    P: AsRef<[f32]>,
    N: AsRef<[f32]>,
{
    train_svm_with_stats(positives, negatives, config).map(|(c, _)| c)
}

pub fn train_svm_with_stats<P, N>(
    positives: &[P],
    negatives: &[N],
    config: &SolverConfig,
) -> Result<(LinearClassifier, SolverStats)>
where
    P: AsRef<[f32]>,
    N: AsRef<[f32]>,
{
    config.validate()?;
    let problem = Problem::new(positives, negatives)?;
    let n = problem.len();

    let mut weights = vec![0f64; problem.dim];
    let mut bias = 0f64;
    let mut alpha = vec![0f64; n];
    let upper: Vec<f64> = (0..n)
        .map(|i| config.upper_bound(i < positives.len()))
        .collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let x = problem.sample(i).0;
            dot_f32(x, x) + 1.0
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = SolverStats {
        epochs: 0,
        converged: false,
        max_violation: f64::INFINITY,
        dual_objective: 0.0,
    };
    #[cfg(debug_assertions)]
    let mut previous_dual = 0f64;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation = 0f64;
        for &i in &order {
            let (x, y) = problem.sample(i);
            let g = y * (dot_mixed(x, &weights) + bias) - 1.0;
            let projected = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper[i] {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(projected.abs());
            if projected.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, upper[i]);
                let step = (alpha[i] - old) * y;
                for (w, &xv) in weights.iter_mut().zip(x) {
                    *w += step * xv as f64;
                }
                bias += step;
            }
        }
        stats.epochs = epoch + 1;
        stats.max_violation = max_violation;

        #[cfg(debug_assertions)]
        {
            // Each coordinate step maximizes the dual exactly, so it never decreases.
            let dual = dual_value(&alpha, &weights, bias);
            debug_assert!(
                dual >= previous_dual - 1e-9 * (1.0 + dual.abs()),
                "dual objective decreased: {previous_dual} -> {dual}"
            );
            previous_dual = dual;
        }

        // Small violations alone do not bound the gap when C is large, so the
        // primal-dual gap must also fall below the tolerance.
        if max_violation < config.tolerance {
            let primal = problem.primal(&weights, bias, config);
            let gap = primal - dual_value(&alpha, &weights, bias);
            if gap <= config.tolerance * (1.0 + primal.abs()) {
                stats.converged = true;
                break;
            }
        }
    }
    stats.dual_objective = dual_value(&alpha, &weights, bias);
    if !stats.converged {
        log::debug!(
            "solver stopped after {} epochs with violation {:.3e}",
            stats.epochs,
            stats.max_violation
        );
    }

    let classifier = LinearClassifier {
        class_id: 0,
        weights,
        bias,
        c_used: config.c as f32,
        trained_in_state: 0,
    };
    Ok((classifier, stats))
}

fn dual_value(alpha: &[f64], weights: &[f64], bias: f64) -> f64 {
    let norm_sq = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    alpha.iter().sum::<f64>() - 0.5 * norm_sq
}

/// Primal objective of `(weights, bias)` on the given data.
pub fn primal_objective<P, N>(
    weights: &[f64],
    bias: f64,
    positives: &[P],
    negatives: &[N],
    config: &SolverConfig,
) -> Result<f64>
where
    P: AsRef<[f32]>,
    N: AsRef<[f32]>,
{
    let problem = Problem::new(positives, negatives)?;
    if weights.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            actual: weights.len(),
        });
    }
    Ok(problem.primal(weights, bias, config))
}

/// Primal objective of `classifier` minus the value of a dual-feasible point
/// derived from it.
///
/// The dual point starts with samples violating the classifier's margin at
/// their upper bound and all others at zero, then is improved by coordinate
/// ascent over every dual variable. Any such point is feasible, so the result
/// is an upper bound on the classifier's suboptimality; once the ascent
/// converges it equals that suboptimality, and at an exact optimum it is zero.
pub fn dual_gap<P, N>(
    classifier: &LinearClassifier,
    positives: &[P],
    negatives: &[N],
    config: &SolverConfig,
) -> Result<f64>
where
    P: AsRef<[f32]>,
    N: AsRef<[f32]>,
{
    let problem = Problem::new(positives, negatives)?;
    if classifier.dim() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            actual: classifier.dim(),
        });
    }
    let n = problem.len();
    let primal = problem.primal(&classifier.weights, classifier.bias, config);

    let mut alpha = vec![0f64; n];
    let mut dual_w = vec![0f64; problem.dim];
    let mut dual_b = 0f64;
    for i in 0..n {
        let (x, y) = problem.sample(i);
        if y * classifier.score_slice(x) < 1.0 - GAP_MARGIN_BAND {
            let upper = config.upper_bound(y > 0.0);
            alpha[i] = upper;
            for (w, &xv) in dual_w.iter_mut().zip(x) {
                *w += upper * y * xv as f64;
            }
            dual_b += upper * y;
        }
    }

    for _ in 0..GAP_MAX_SWEEPS {
        let mut largest_violation = 0f64;
        for i in 0..n {
            let (x, y) = problem.sample(i);
            let upper = config.upper_bound(y > 0.0);
            let g = y * (dot_mixed(x, &dual_w) + dual_b) - 1.0;
            let old = alpha[i];
            let projected = if old <= 0.0 {
                g.min(0.0)
            } else if old >= upper {
                g.max(0.0)
            } else {
                g
            };
            largest_violation = largest_violation.max(projected.abs());
            alpha[i] = (old - g / (dot_f32(x, x) + 1.0)).clamp(0.0, upper);
            let step = (alpha[i] - old) * y;
            if step != 0.0 {
                for (w, &xv) in dual_w.iter_mut().zip(x) {
                    *w += step * xv as f64;
                }
                dual_b += step;
            }
        }
        if largest_violation <= GAP_ASCENT_TOLERANCE {
            break;
        }
    }

    Ok(primal - dual_value(&alpha, &dual_w, dual_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fv(v: &[f32]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            tolerance: 1e-9,
            max_epochs: 100_000,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn two_point_problem_matches_analytic_solution() {
        let clf = train_svm(&[fv(&[2.0])], &[fv(&[-2.0])], &tight()).unwrap();
        assert!((clf.weights[0] - 0.5).abs() < 1e-3);
        assert!(clf.bias.abs() < 1e-3);
        let s = clf.score(&fv(&[2.0])).unwrap();
        assert!((s - 1.0).abs() < 1e-3);
    }

    #[test]
    fn analytic_solution_has_zero_gap() {
        let analytic = LinearClassifier {
            class_id: 0,
            weights: vec![0.5],
            bias: 0.0,
            c_used: 1.0,
            trained_in_state: 0,
        };
        let gap = dual_gap(&analytic, &[fv(&[2.0])], &[fv(&[-2.0])], &SolverConfig::default()).unwrap();
        assert!(gap.abs() <= 1e-6, "gap {gap}");
    }

    #[test]
    fn overlapping_sets_stay_finite() {
        let v = fv(&[0.6, 0.8]);
        let config = SolverConfig::default().with_c(3.0);
        let clf = train_svm(&[v.clone()], &[v.clone()], &config).unwrap();
        assert!(clf.weights.iter().all(|w| w.is_finite()) && clf.bias.is_finite());
        // Each of the two hinge terms is at least 1 - |f| and they sum to 2 on |f| <= 1.
        let p = primal_objective(&clf.weights, clf.bias, &[v.clone()], &[v], &config).unwrap();
        assert!((p - 2.0 * config.c).abs() < 1e-6, "objective {p}");
    }

    #[test]
    fn score_examples() {
        let clf = LinearClassifier {
            class_id: 1,
            weights: vec![1.0, 0.0],
            bias: 0.0,
            c_used: 1.0,
            trained_in_state: 0,
        };
        assert!((clf.score(&fv(&[0.6, 0.8])).unwrap() - 0.6).abs() < 1e-7);
        let constant = LinearClassifier {
            weights: vec![0.0, 0.0],
            bias: -1.0,
            ..clf.clone()
        };
        assert_eq!(constant.score(&fv(&[0.3, -0.2])).unwrap(), -1.0);
        assert!(matches!(clf.score(&fv(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let empty: Vec<FeatureVector> = Vec::new();
        assert!(matches!(
            train_svm(&empty, &[fv(&[1.0])], &SolverConfig::default()),
            Err(Error::EmptyClass(_))
        ));
        assert!(matches!(
            train_svm(&[fv(&[1.0])], &empty, &SolverConfig::default()),
            Err(Error::EmptyClass(_))
        ));
        assert!(matches!(
            train_svm(&[fv(&[1.0])], &[fv(&[1.0, 0.0])], &SolverConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SolverConfig::default().with_c(0.0);
        assert!(train_svm(&[fv(&[1.0])], &[fv(&[-1.0])], &bad).is_err());
    }

    fn separable(seed: u64, n: usize) -> (Vec<FeatureVector>, Vec<FeatureVector>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for i in 0..n {
            let x: f32 = rng.random_range(0.2..1.0);
            let y: f32 = rng.random_range(-1.0..1.0);
            if i % 2 == 0 {
                pos.push(fv(&[x, y]));
            } else {
                neg.push(fv(&[-x, y]));
            }
        }
        (pos, neg)
    }

    #[test]
    fn zero_classifier_has_positive_gap() {
        let (pos, neg) = separable(4, 20);
        let zero = LinearClassifier {
            class_id: 0,
            weights: vec![0.0, 0.0],
            bias: 0.0,
            c_used: 1.0,
            trained_in_state: 0,
        };
        assert!(dual_gap(&zero, &pos, &neg, &SolverConfig::default()).unwrap() > 0.0);
    }

    #[test]
    fn converged_output_has_small_gap() {
        let (pos, neg) = separable(5, 40);
        let config = SolverConfig::default();
        let (clf, stats) = train_svm_with_stats(&pos, &neg, &config).unwrap();
        assert!(stats.converged);
        let primal = primal_objective(&clf.weights, clf.bias, &pos, &neg, &config).unwrap();
        let gap = dual_gap(&clf, &pos, &neg, &config).unwrap();
        assert!(gap >= -1e-9 && gap <= 1e-3 * (1.0 + primal), "gap {gap}, primal {primal}");
    }

    #[test]
    fn hard_margin_limit() {
        let (pos, neg) = separable(6, 20);
        let config = SolverConfig {
            c: 1e6,
            tolerance: 1e-9,
            max_epochs: 200_000,
            ..SolverConfig::default()
        };
        let clf = train_svm(&pos, &neg, &config).unwrap();
        for v in &pos {
            assert!((1.0 - clf.score(v).unwrap()).max(0.0) < 1e-6);
        }
        for v in &neg {
            assert!((1.0 + clf.score(v).unwrap()).max(0.0) < 1e-6);
        }
    }

    #[test]
    fn classifier_binary_round_trip() {
        let clf = LinearClassifier {
            class_id: 9,
            weights: vec![0.25, -1.5, 3.0],
            bias: 0.125,
            c_used: 0.1,
            trained_in_state: 4,
        };
        let bytes = clf.to_bytes();
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 4 + 8 * 4);
        let back = LinearClassifier::read_all(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, vec![clf.clone()]);
        assert_eq!(
            clf.to_csv_line(),
            "9,4,0.1,0.125,0.25,-1.5,3"
        );
    }

    /// Exact oracle for tiny problems: every optimum of the box-constrained
    /// dual has each αᵢ at 0, at Cᵢ, or free with its margin equal to 1.
    /// Enumerating the 3ⁿ assignments and solving the linear system of the
    /// free set recovers the optimum.
    fn active_set_optimum(samples: &[(Vec<f64>, f64)], c: f64) -> f64 {
        let n = samples.len();
        let aug: Vec<Vec<f64>> = samples
            .iter()
            .map(|(x, _)| {
                let mut a = x.clone();
                a.push(1.0);
                a
            })
            .collect();
        let q = |i: usize, j: usize| -> f64 {
            samples[i].1 * samples[j].1 * aug[i].iter().zip(&aug[j]).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0u8; n];
            let mut k = code;
            for s in state.iter_mut() {
                *s = (k % 3) as u8;
                k /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
            // Solve Q_FF α_F = 1 − Q_FB α_B by Gaussian elimination.
            let m = free.len();
            let mut a = vec![vec![0f64; m + 1]; m];
            for (r, &i) in free.iter().enumerate() {
                for (cidx, &j) in free.iter().enumerate() {
                    a[r][cidx] = q(i, j);
                }
                let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q(i, j) * c).sum();
                a[r][m] = 1.0 - fixed;
            }
            let mut ok = true;
            for col in 0..m {
                let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
                if a[piv][col].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                a.swap(col, piv);
                for r in 0..m {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        for k in col..=m {
                            a[r][k] -= f * a[col][k];
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = a[r][m] / a[r][r];
            }
            if alpha.iter().any(|&v| v < -1e-12 || v > c + 1e-12) {
                continue;
            }
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += alpha[i] * alpha[j] * q(i, j);
                }
            }
            best = best.max(alpha.iter().sum::<f64>() - 0.5 * quad);
        }
        best
    }

    #[test]
    fn matches_active_set_enumeration_on_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..40 {
            let n = rng.random_range(2..=6);
            let d = rng.random_range(1..=3);
            let c = [0.1, 1.0, 10.0][trial % 3];
            let mut samples = Vec::new();
            for i in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x: Vec<f64> = x.iter().map(|&v| v as f32 as f64).collect();
                samples.push((x, if i % 2 == 0 { 1.0 } else { -1.0 }));
            }
            let pos: Vec<FeatureVector> = samples.iter().filter(|s| s.1 > 0.0).map(|s| FeatureVector::from_f64(&s.0).unwrap()).collect();
            let neg: Vec<FeatureVector> = samples.iter().filter(|s| s.1 < 0.0).map(|s| FeatureVector::from_f64(&s.0).unwrap()).collect();
            // Reorder oracle samples to positives-then-negatives; the optimum does not depend on order.
            let optimum = active_set_optimum(&samples, c);
            let config = SolverConfig { c, ..tight() };
            let clf = train_svm(&pos, &neg, &config).unwrap();
            let p = primal_objective(&clf.weights, clf.bias, &pos, &neg, &config).unwrap();
            assert!(
                (p - optimum).abs() <= 1e-6 * (1.0 + optimum.abs()),
                "trial {trial}: primal {p} vs optimum {optimum}"
            );
        }
    }
}
