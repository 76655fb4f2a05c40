//! Synaptic wiring between populations.
//!
//! Matrices are stored dense, `pre × post`, row-major. The pattern tag is kept
//! for validation and display only; `propagate` treats all patterns alike.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Excitatory,
    Inhibitory,
}

impl Sign {
    pub fn of(weight: f64) -> Sign {
        if weight < 0.0 {
            Sign::Inhibitory
        } else {
            Sign::Excitatory
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// One-to-one.
    Identity,
    /// One-to-many, zero diagonal.
    Hollow,
    SparseRandom,
    Dense,
}

/// Weight values for random patterns. The sign of the configured weight
/// decides the matrix sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDistribution {
    Constant(f64),
    /// Magnitudes uniform on `(0, |max|]`, signed like `max`.
    Uniform { max: f64 },
}

impl WeightDistribution {
    fn sign(&self) -> Sign {
        match *self {
            WeightDistribution::Constant(w) => Sign::of(w),
            WeightDistribution::Uniform { max } => Sign::of(max),
        }
    }

    fn check(&self) -> Result<()> {
        let w = match *self {
            WeightDistribution::Constant(w) => w,
            WeightDistribution::Uniform { max } => max,
        };
        if w.is_finite() {
            Ok(())
        } else {
            Err(SnnError::InputDomain(format!("weight must be finite, got {w}")))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDistribution::Constant(w) => w,
            WeightDistribution::Uniform { max } => (1.0 - rng.random::<f64>()) * max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapseMatrix {
    n_pre: usize,
    n_post: usize,
    weights: Vec<f64>,
    sign: Sign,
    pattern: Pattern,
}

impl SynapseMatrix {
    /// Builds a matrix and checks the sign and pattern invariants.
    pub fn new(n_pre: usize, n_post: usize, weights: Vec<f64>, sign: Sign, pattern: Pattern) -> Result<Self> {
        if weights.len() != n_pre * n_post {
            return Err(SnnError::ShapeMismatch {
                expected: n_pre * n_post,
                actual: weights.len(),
            });
        }
        let m = SynapseMatrix {
            n_pre,
            n_post,
            weights,
            sign,
            pattern,
        };
        m.check_invariants()?;
        Ok(m)
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    pub fn weight(&self, pre: usize, post: usize) -> f64 {
        self.weights[pre * self.n_post + post]
    }

    pub fn row(&self, pre: usize) -> &[f64] {
        &self.weights[pre * self.n_post..(pre + 1) * self.n_post]
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(SnnError::Configuration(msg));
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite()) {
            return bad(format!("non-finite weight {w}"));
        }
        match self.sign {
            Sign::Excitatory if self.weights.iter().any(|w| *w < 0.0) => {
                return bad("excitatory matrix holds a negative weight".into())
            }
            Sign::Inhibitory if self.weights.iter().any(|w| *w > 0.0) => {
                return bad("inhibitory matrix holds a positive weight".into())
            }
            _ => {}
        }
        let square = self.n_pre == self.n_post;
        match self.pattern {
            Pattern::Identity | Pattern::Hollow if !square => bad(format!(
                "{:?} pattern needs a square matrix, got {}x{}",
                self.pattern, self.n_pre, self.n_post
            )),
            Pattern::Identity => {
                for i in 0..self.n_pre {
                    for k in 0..self.n_post {
                        if i != k && self.weight(i, k) != 0.0 {
                            return bad(format!("identity matrix has off-diagonal weight at ({i}, {k})"));
                        }
                    }
                }
                Ok(())
            }
            Pattern::Hollow => match (0..self.n_pre).find(|&i| self.weight(i, i) != 0.0) {
                Some(i) => bad(format!("hollow matrix has diagonal weight at ({i}, {i})")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Post-synaptic current: the sum of row `i` over every pre-synaptic
    /// neuron `i` that spiked.
    pub fn propagate(&self, spikes: &[bool]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_post];
        self.propagate_into(spikes, &mut out)?;
        Ok(out)
    }

    /// Adds this projection's current into `out`.
    pub fn propagate_into(&self, spikes: &[bool], out: &mut [f64]) -> Result<()> {
        if spikes.len() != self.n_pre {
            return Err(SnnError::ShapeMismatch {
                expected: self.n_pre,
                actual: spikes.len(),
            });
        }
        if out.len() != self.n_post {
            return Err(SnnError::ShapeMismatch {
                expected: self.n_post,
                actual: out.len(),
            });
        }
        for (i, _) in spikes.iter().enumerate().filter(|(_, s)| **s) {
            for (acc, w) in out.iter_mut().zip(self.row(i)) {
                *acc += w;
            }
        }
        Ok(())
    }

    /// Multiplies every weight by `factor`, which must be non-negative so the
    /// sign never flips.
    pub fn scale(&mut self, factor: f64) -> Result<()> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(SnnError::Parameter(format!(
                "weight scale must be finite and >= 0, got {factor}"
            )));
        }
        for w in &mut self.weights {
            *w *= factor;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# pattern={},sign={}",
            tag(&self.pattern),
            tag(&self.sign)
        );
        for i in 0..self.n_pre {
            let row: Vec<String> = self.row(i).iter().map(|w| format!("{w:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| SnnError::Configuration("matrix CSV lacks `# pattern=..,sign=..` header".into()))?;
        let mut pattern = None;
        let mut sign = None;
        for kv in header.split(',') {
            match kv.split_once('=') {
                Some(("pattern", v)) => pattern = Some(untag::<Pattern>(v)?),
                Some(("sign", v)) => sign = Some(untag::<Sign>(v)?),
                _ => {}
            }
        }
        let (pattern, sign) = pattern
            .zip(sign)
            .ok_or_else(|| SnnError::Configuration("matrix CSV header needs pattern and sign".into()))?;
        let mut weights = Vec::new();
        let mut n_post = None;
        let mut n_pre = 0;
        for line in lines {
            let row = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| SnnError::Configuration(format!("bad weight `{c}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            match n_post {
                None => n_post = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(SnnError::ShapeMismatch {
                        expected: n,
                        actual: row.len(),
                    })
                }
                _ => {}
            }
            weights.extend(row);
            n_pre += 1;
        }
        SynapseMatrix::new(n_pre, n_post.unwrap_or(0), weights, sign, pattern)
    }
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn untag<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|e| SnnError::Configuration(format!("unknown tag `{s}`: {e}")))
}

pub fn identity_matrix(n: usize, w: f64) -> Result<SynapseMatrix> {
    if n == 0 {
        return Err(SnnError::EmptyPopulation);
    }
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        weights[i * n + i] = w;
    }
    SynapseMatrix::new(n, n, weights, Sign::of(w), Pattern::Identity)
}

pub fn hollow_matrix(n: usize, w: f64) -> Result<SynapseMatrix> {
    if n < 2 {
        return Err(SnnError::InputDomain(format!(
            "a hollow matrix needs at least 2 neurons, got {n}"
        )));
    }
    let mut weights = vec![w; n * n];
    for i in 0..n {
        weights[i * n + i] = 0.0;
    }
    SynapseMatrix::new(n, n, weights, Sign::of(w), Pattern::Hollow)
}

/// Each entry is kept with probability `density` (an i.i.d. Bernoulli mask)
/// and drawn from `dist`.
pub fn sparse_random<R: Rng + ?Sized>(
    n_pre: usize,
    n_post: usize,
    density: f64,
    dist: WeightDistribution,
    rng: &mut R,
) -> Result<SynapseMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(SnnError::InputDomain(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    dist.check()?;
    let weights = (0..n_pre * n_post)
        .map(|_| {
            let keep = rng.random::<f64>() < density;
            let w = dist.sample(rng);
            if keep {
                w
            } else {
                0.0
            }
        })
        .collect();
    SynapseMatrix::new(n_pre, n_post, weights, dist.sign(), Pattern::SparseRandom)
}

pub fn dense_matrix<R: Rng + ?Sized>(
    n_pre: usize,
    n_post: usize,
    dist: WeightDistribution,
    rng: &mut R,
) -> Result<SynapseMatrix> {
    dist.check()?;
    let weights = (0..n_pre * n_post).map(|_| dist.sample(rng)).collect();
    SynapseMatrix::new(n_pre, n_post, weights, dist.sign(), Pattern::Dense)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EiWiring {
    /// Excitatory→inhibitory one-to-one, inhibitory→excitatory one-to-many.
    OneToOneOneToMany,
    /// Excitatory→inhibitory one-to-many, inhibitory→excitatory one-to-one.
    OneToManyOneToOne,
    /// Both directions random at 80% density.
    Sparse8020,
}

pub const SPARSE_EI_DENSITY: f64 = 0.8;

/// Excitatory/inhibitory projection pair `(exc→inh, inh→exc)`. `w_ei` must be
/// non-negative and `w_ie` non-positive.
pub fn ei_assembly<R: Rng + ?Sized>(
    n_exc: usize,
    n_inh: usize,
    wiring: EiWiring,
    w_ei: f64,
    w_ie: f64,
    rng: &mut R,
) -> Result<(SynapseMatrix, SynapseMatrix)> {
    if w_ei < 0.0 || w_ie > 0.0 {
        return Err(SnnError::InputDomain(format!(
            "excitatory weight must be >= 0 and inhibitory <= 0, got {w_ei} and {w_ie}"
        )));
    }
    let square = || {
        if n_exc == n_inh {
            Ok(())
        } else {
            Err(SnnError::ShapeMismatch {
                expected: n_exc,
                actual: n_inh,
            })
        }
    };
    match wiring {
        EiWiring::OneToOneOneToMany => {
            square()?;
            Ok((identity_matrix(n_exc, w_ei)?, hollow_matrix(n_inh, w_ie)?))
        }
        EiWiring::OneToManyOneToOne => {
            square()?;
            Ok((hollow_matrix(n_exc, w_ei)?, identity_matrix(n_inh, w_ie)?))
        }
        EiWiring::Sparse8020 => Ok((
            sparse_random(n_exc, n_inh, SPARSE_EI_DENSITY, WeightDistribution::Uniform { max: w_ei }, rng)?,
            sparse_random(n_inh, n_exc, SPARSE_EI_DENSITY, WeightDistribution::Uniform { max: w_ie }, rng)?,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use proptest::prelude::*;

    #[test]
    fn identity_examples() {
        let m = identity_matrix(3, 2.0).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(m.weight(i, k), if i == k { 2.0 } else { 0.0 });
            }
        }
        let s = [true, false, true];
        assert_eq!(m.propagate(&s).unwrap(), vec![2.0, 0.0, 2.0]);
        let inh = identity_matrix(1, -1.0).unwrap();
        assert_eq!(inh.sign(), Sign::Inhibitory);
        assert_eq!(inh.weight(0, 0), -1.0);
        assert!(matches!(identity_matrix(0, 1.0), Err(SnnError::EmptyPopulation)));
    }

    #[test]
    fn hollow_examples() {
        let m = hollow_matrix(2, 0.7).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.7]);
        assert_eq!(m.row(1), &[0.7, 0.0]);
        let m = hollow_matrix(5, 0.5).unwrap();
        for i in 0..5 {
            assert_eq!(m.row(i).iter().sum::<f64>(), 4.0 * 0.5);
        }
        let mut s = vec![false; 5];
        s[3] = true;
        assert_eq!(m.propagate(&s).unwrap(), vec![0.5, 0.5, 0.5, 0.0, 0.5]);
        assert!(hollow_matrix(1, 1.0).is_err());
    }

    #[test]
    fn sparse_density_extremes() {
        let mut rng = SimRng::from_seed(9);
        let dist = WeightDistribution::Uniform { max: 1.0 };
        assert_eq!(sparse_random(20, 30, 0.0, dist, &mut rng).unwrap().nonzero_count(), 0);
        assert_eq!(sparse_random(20, 30, 1.0, dist, &mut rng).unwrap().nonzero_count(), 600);
        assert!(sparse_random(2, 2, 1.2, dist, &mut rng).is_err());
        assert!(sparse_random(2, 2, -0.1, dist, &mut rng).is_err());
    }

    #[test]
    fn sparse_realized_density() {
        // 10^4 entries at p = 0.8: sd 0.004, the 99% band is ±0.0103, inside ±0.02.
        let mut rng = SimRng::from_seed(21);
        let m = sparse_random(100, 100, 0.8, WeightDistribution::Uniform { max: 0.5 }, &mut rng).unwrap();
        let frac = m.nonzero_count() as f64 / 10_000.0;
        assert!((frac - 0.8).abs() < 0.02, "{frac}");
        assert!((0..100).all(|i| m.row(i).iter().all(|w| (0.0..=0.5).contains(w))));
    }

    #[test]
    fn sparse_reproducible_under_seed() {
        let dist = WeightDistribution::Uniform { max: -0.3 };
        let a = sparse_random(10, 12, 0.8, dist, &mut SimRng::from_seed(4)).unwrap();
        let b = sparse_random(10, 12, 0.8, dist, &mut SimRng::from_seed(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sign(), Sign::Inhibitory);
    }

    #[test]
    fn propagate_shape_mismatch() {
        let m = identity_matrix(3, 1.0).unwrap();
        assert!(matches!(m.propagate(&[true]), Err(SnnError::ShapeMismatch { .. })));
    }

    #[test]
    fn propagate_matches_scalar_loop() {
        let mut rng = SimRng::from_seed(77);
        for _ in 0..50 {
            let m = dense_matrix(5, 4, WeightDistribution::Uniform { max: 2.0 }, &mut rng).unwrap();
            let s: Vec<bool> = (0..5).map(|_| rand::Rng::random::<bool>(&mut rng)).collect();
            let got = m.propagate(&s).unwrap();
            for k in 0..4 {
                let mut expect = 0.0;
                for i in 0..5 {
                    expect += if s[i] { m.weight(i, k) } else { 0.0 };
                }
                assert_eq!(got[k], expect);
            }
        }
    }

    #[test]
    fn ei_patterns() {
        let mut rng = SimRng::from_seed(1);
        let (ei, ie) = ei_assembly(3, 3, EiWiring::OneToOneOneToMany, 1.0, -1.0, &mut rng).unwrap();
        assert_eq!((ei.pattern(), ie.pattern()), (Pattern::Identity, Pattern::Hollow));
        let (ei, ie) = ei_assembly(3, 3, EiWiring::OneToManyOneToOne, 1.0, -1.0, &mut rng).unwrap();
        assert_eq!((ei.pattern(), ie.pattern()), (Pattern::Hollow, Pattern::Identity));
        assert_eq!(ie.sign(), Sign::Inhibitory);
        let (ei, ie) = ei_assembly(80, 20, EiWiring::Sparse8020, 0.5, -0.5, &mut rng).unwrap();
        assert_eq!((ei.n_pre(), ei.n_post(), ie.n_pre(), ie.n_post()), (80, 20, 20, 80));
        assert!((0..20).all(|i| ie.row(i).iter().all(|w| *w <= 0.0)));
        assert!(ei_assembly(4, 3, EiWiring::OneToOneOneToMany, 1.0, -1.0, &mut rng).is_err());
        assert!(ei_assembly(3, 3, EiWiring::OneToOneOneToMany, -1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn sign_invariant_enforced() {
        assert!(SynapseMatrix::new(1, 2, vec![0.5, -0.1], Sign::Excitatory, Pattern::Dense).is_err());
        assert!(SynapseMatrix::new(2, 2, vec![0.0, 1.0, 0.0, 0.0], Sign::Excitatory, Pattern::Identity).is_err());
        let mut m = hollow_matrix(3, -1.0).unwrap();
        assert!(m.scale(-1.0).is_err());
        m.scale(2.0).unwrap();
        assert_eq!(m.weight(0, 1), -2.0);
    }

    #[test]
    fn matrix_csv_round_trip() {
        let mut rng = SimRng::from_seed(3);
        let m = sparse_random(4, 6, 0.5, WeightDistribution::Uniform { max: -0.25 }, &mut rng).unwrap();
        assert_eq!(SynapseMatrix::from_csv(&m.to_csv()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn propagate_is_additive_on_disjoint_spikes(
            seed in any::<u64>(),
            mask in proptest::collection::vec(0u8..3, 7),
        ) {
            let mut rng = SimRng::from_seed(seed);
            let m = dense_matrix(7, 5, WeightDistribution::Uniform { max: 1.0 }, &mut rng).unwrap();
            let a: Vec<bool> = mask.iter().map(|x| *x == 1).collect();
            let b: Vec<bool> = mask.iter().map(|x| *x == 2).collect();
            let union: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x || *y).collect();
            let pa = m.propagate(&a).unwrap();
            let pb = m.propagate(&b).unwrap();
            let pu = m.propagate(&union).unwrap();
            for k in 0..5 {
                prop_assert!((pa[k] + pb[k] - pu[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn hollow_never_self_feeds(n in 2usize..20, w in -3.0f64..3.0, who in 0usize..20) {
            let who = who % n;
            let m = hollow_matrix(n, w).unwrap();
            let mut s = vec![false; n];
            s[who] = true;
            prop_assert_eq!(m.propagate(&s).unwrap()[who], 0.0);
        }
    }
}
