//! Information measures on finite alphabets and the small analytic lemmas
//! (Pinsker, Donsker–Varadhan, the ratio-mean lemma) used to sanity-check
//! them. Transport distances live in [`transport`].
//!
//! Conventions: natural logarithms, `0·log 0 = 0`, `p·log(p/0) = +∞`.

pub mod transport;

use crate::error::{FbError, Result};
use crate::numeric::{log_sum_exp, pairwise_sum, ExtReal};
use crate::report::{BoundReport, Dim};
use serde::{Deserialize, Serialize};

/// Tolerance on total mass for validated distributions.
pub const MASS_TOL: f64 = 1e-12;

/// Probability vector over an indexed alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteDist {
    masses: Vec<f64>,
}

impl FiniteDist {
    /// Validated constructor: entries ≥ 0, total within 1e-12 of one.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        Self::with_tol(masses, MASS_TOL)
    }

    pub fn with_tol(masses: Vec<f64>, tol: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(FbError::Invalid("empty distribution".into()));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(FbError::Invalid(format!("mass {i} is {m}")));
            }
        }
        let s = pairwise_sum(&masses);
        if (s - 1.0).abs() > tol {
            return Err(FbError::Invalid(format!("masses sum to {s}, not 1")));
        }
        Ok(FiniteDist { masses })
    }

    /// Normalize nonnegative weights.
    pub fn from_weights(w: Vec<f64>) -> Result<Self> {
        let s = pairwise_sum(&w);
        if !(s > 0.0) || w.iter().any(|&x| !(x >= 0.0)) {
            return Err(FbError::Invalid("weights must be nonnegative with positive sum".into()));
        }
        Ok(FiniteDist {
            masses: w.into_iter().map(|x| x / s).collect(),
        })
    }

    /// Skip validation; for distributions produced by exact computation.
    pub(crate) fn from_trusted(masses: Vec<f64>) -> Self {
        debug_assert!((pairwise_sum(&masses) - 1.0).abs() < 1e-9);
        FiniteDist { masses }
    }

    pub fn uniform(k: usize) -> Self {
        FiniteDist {
            masses: vec![1.0 / k as f64; k],
        }
    }

    pub fn point(k: usize, i: usize) -> Self {
        let mut masses = vec![0.0; k];
        masses[i] = 1.0;
        FiniteDist { masses }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    /// Expectation of `f` (indexed like the alphabet).
    pub fn expect(&self, f: &[f64]) -> f64 {
        let t: Vec<f64> = self
            .masses
            .iter()
            .zip(f)
            .map(|(&p, &x)| if p > 0.0 { p * x } else { 0.0 })
            .collect();
        pairwise_sum(&t)
    }

    /// Variance of `f`.
    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.expect(f);
        let c: Vec<f64> = f.iter().map(|x| (x - m) * (x - m)).collect();
        self.expect(&c).max(0.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        let t: Vec<f64> = self
            .masses
            .iter()
            .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
            .collect();
        pairwise_sum(&t)
    }
}

fn check_dims(p: &FiniteDist, q: &FiniteDist) -> Result<()> {
    if p.len() != q.len() {
        return Err(FbError::Dimension(p.len(), q.len()));
    }
    Ok(())
}

/// Relative entropy D(P‖Q) in nats.
pub fn kl(p: &FiniteDist, q: &FiniteDist) -> Result<ExtReal> {
    check_dims(p, q)?;
    Ok(kl_slices(p.masses(), q.masses()))
}

/// D(p‖q) for raw mass slices of equal length.
pub fn kl_slices(p: &[f64], q: &[f64]) -> ExtReal {
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return ExtReal::PosInf;
            }
            terms.push(pi * (pi / qi).ln());
        }
    }
    ExtReal::Finite(pairwise_sum(&terms).max(0.0))
}

/// Binary relative entropy d(x‖y) in nats.
pub fn binary_kl(x: f64, y: f64) -> ExtReal {
    kl_slices(&[x, 1.0 - x], &[y, 1.0 - y])
}

/// Total variation distance (half the L1 distance).
pub fn tv(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    check_dims(p, q)?;
    let d: Vec<f64> = p
        .masses()
        .iter()
        .zip(q.masses())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok((0.5 * pairwise_sum(&d)).min(1.0))
}

/// Pinsker: TV² ≤ D / (2 log e).
pub fn pinsker_check(p: &FiniteDist, q: &FiniteDist) -> Result<BoundReport> {
    let t = tv(p, q)?;
    let d = kl(p, q)?.value();
    Ok(BoundReport::le("pinsker", t * t, d / 2.0, Dim::Plain)
        .with("tv", t, Dim::Plain)
        .with("D", d, Dim::Log))
}

/// Output of [`conditional_kl_identity`].
#[derive(Clone, Debug, Serialize)]
pub struct KlIdentity {
    /// D(P_{Y|X} ‖ Q | P_X).
    pub d_cond: ExtReal,
    /// D(P_Y ‖ Q).
    pub d_marg: ExtReal,
    /// I(X;Y) = D_cond − D_marg when both finite, else the direct value.
    pub mutual_info: f64,
    /// Directly computed Σ P_X W log(W / P_Y).
    pub mutual_info_direct: f64,
    /// |identity − direct| (0 when the identity is not finite).
    pub discrepancy: f64,
}

/// The identity D(P_{Y|X}‖Q|P_X) = I(X;Y) + D(P_Y‖Q), cross-checked against
/// the direct double sum.
pub fn conditional_kl_identity(
    rows: &[FiniteDist],
    px: &FiniteDist,
    q: &FiniteDist,
) -> Result<KlIdentity> {
    if rows.len() != px.len() {
        return Err(FbError::Dimension(rows.len(), px.len()));
    }
    let ny = q.len();
    let mut py = vec![0.0; ny];
    for (x, row) in rows.iter().enumerate() {
        check_dims(row, q)?;
        let w = px.mass(x);
        if w > 0.0 {
            for (y, &m) in row.masses().iter().enumerate() {
                py[y] += w * m;
            }
        }
    }
    let mut d_cond = ExtReal::ZERO;
    let mut direct = Vec::new();
    for (x, row) in rows.iter().enumerate() {
        let w = px.mass(x);
        if w <= 0.0 {
            continue;
        }
        d_cond = d_cond + kl_slices(row.masses(), q.masses()).scale(w);
        for (y, &m) in row.masses().iter().enumerate() {
            if m > 0.0 {
                direct.push(w * m * (m / py[y]).ln());
            }
        }
    }
    let i_direct = pairwise_sum(&direct).max(0.0);
    let d_marg = kl_slices(&py, q.masses());
    let (i, disc) = match (d_cond, d_marg) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b, (a - b - i_direct).abs()),
        _ => (i_direct, 0.0),
    };
    Ok(KlIdentity {
        d_cond,
        d_marg,
        mutual_info: i,
        mutual_info_direct: i_direct,
        discrepancy: disc,
    })
}

/// Donsker–Varadhan: ∫g dP − log ∫e^g dQ ≤ D(P‖Q).
pub fn donsker_varadhan_gap(p: &FiniteDist, q: &FiniteDist, g: &[f64]) -> Result<BoundReport> {
    check_dims(p, q)?;
    if g.len() != p.len() {
        return Err(FbError::Dimension(g.len(), p.len()));
    }
    let d = kl(p, q)?
        .finite()
        .ok_or_else(|| FbError::Precondition("D(P||Q) must be finite".into()))?;
    let ep = p.expect(g);
    let lse: Vec<f64> = q
        .masses()
        .iter()
        .zip(g)
        .filter(|(&qi, _)| qi > 0.0)
        .map(|(&qi, &gi)| gi + qi.ln())
        .collect();
    let lhs = ep - log_sum_exp(&lse);
    Ok(BoundReport::le("donsker-varadhan", lhs, d, Dim::Log))
}

/// Ratio-mean lemma: for X > 0 with E X ≤ 1, E|X − 1| ≤ √(2 E ln(1/X)).
pub fn ratio_mean_lemma_check(values: &[f64], dist: &FiniteDist) -> Result<BoundReport> {
    if values.len() != dist.len() {
        return Err(FbError::Dimension(values.len(), dist.len()));
    }
    if values
        .iter()
        .zip(dist.masses())
        .any(|(&v, &p)| p > 0.0 && !(v > 0.0))
    {
        return Err(FbError::Precondition("X must be positive".into()));
    }
    let mean = dist.expect(values);
    if mean > 1.0 + 1e-12 {
        return Err(FbError::Precondition(format!("E[X] = {mean} > 1")));
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - 1.0).abs()).collect();
    let nlog: Vec<f64> = values.iter().map(|v| -v.ln()).collect();
    let lhs = dist.expect(&dev);
    let rhs = (2.0 * dist.expect(&nlog).max(0.0)).sqrt();
    Ok(BoundReport::le("ratio-mean-lemma", lhs, rhs, Dim::Plain).with("E[X]", mean, Dim::Plain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LogBase;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn fd(v: &[f64]) -> FiniteDist {
        FiniteDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_examples() {
        // 0.5 log2(2) + 0.5 log2(2/3)
        let want = 0.5 + 0.5 * (2.0f64 / 3.0).log2();
        let d = kl(&fd(&[0.5, 0.5]), &fd(&[0.25, 0.75])).unwrap().value() / LN2;
        assert!((d - want).abs() < 1e-14);
        assert!((d - 0.207518).abs() < 1e-6);
        assert_eq!(kl(&fd(&[0.3, 0.7]), &fd(&[0.3, 0.7])).unwrap(), ExtReal::ZERO);
        assert_eq!(kl(&fd(&[1.0, 0.0]), &fd(&[0.0, 1.0])).unwrap(), ExtReal::PosInf);
        assert!(kl(&fd(&[1.0]), &fd(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn binary_kl_examples() {
        assert!((binary_kl(0.5, 0.25).value() / LN2 - 0.207518).abs() < 1e-6);
        assert_eq!(binary_kl(0.3, 0.3), ExtReal::ZERO);
        assert!((binary_kl(1.0, 0.5).value() / LN2 - 1.0).abs() < 1e-15);
        assert_eq!(binary_kl(0.5, 0.0), ExtReal::PosInf);
    }

    #[test]
    fn tv_examples() {
        assert!((tv(&fd(&[0.5, 0.5]), &fd(&[0.25, 0.75])).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(tv(&fd(&[1.0, 0.0]), &fd(&[0.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn pinsker_example() {
        let r = pinsker_check(&fd(&[0.5, 0.5]), &fd(&[0.9, 0.1])).unwrap();
        assert!(r.passed());
        assert!((r.lhs - 0.16).abs() < 1e-12);
        let d_bits = r.constant("D").unwrap() / LN2;
        // 0.5 log2(0.5/0.9) + 0.5 log2(5)
        let want = 0.5 * (0.5f64 / 0.9).log2() + 0.5 * 5f64.log2();
        assert!((d_bits - want).abs() < 1e-12);
        assert!((d_bits - 0.7370).abs() < 1e-4);
        let rhs_bits_form = d_bits / (2.0 * std::f64::consts::LOG2_E);
        assert!((r.rhs - rhs_bits_form).abs() < 1e-12);
    }

    #[test]
    fn identity_examples() {
        let bsc = |d: f64| vec![fd(&[1.0 - d, d]), fd(&[d, 1.0 - d])];
        let u = FiniteDist::uniform(2);
        let r = conditional_kl_identity(&bsc(0.11), &u, &u).unwrap();
        let c_bits = 1.0 - crate::numeric::h2(0.11) / LN2;
        assert!((r.mutual_info / LN2 - c_bits).abs() < 1e-12);
        assert!(r.discrepancy < 1e-12);
        // Q = induced output collapses D_marg
        let px = fd(&[0.3, 0.7]);
        let py = fd(&[0.3 * 0.89 + 0.7 * 0.11, 0.3 * 0.11 + 0.7 * 0.89]);
        let r = conditional_kl_identity(&bsc(0.11), &px, &py).unwrap();
        assert!(r.d_marg.value().abs() < 1e-15);
        // deterministic channel, k inputs
        let rows: Vec<_> = (0..3).map(|i| FiniteDist::point(3, i)).collect();
        let r = conditional_kl_identity(&rows, &FiniteDist::uniform(3), &FiniteDist::uniform(3))
            .unwrap();
        assert!((r.mutual_info - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn dv_equality_at_log_ratio() {
        let p = fd(&[0.2, 0.5, 0.3]);
        let q = fd(&[0.4, 0.4, 0.2]);
        let g: Vec<f64> = p.masses().iter().zip(q.masses()).map(|(a, b)| (a / b).ln()).collect();
        let r = donsker_varadhan_gap(&p, &q, &g).unwrap();
        assert!(r.slack.abs() < 1e-12);
        let r = donsker_varadhan_gap(&p, &q, &[3.0, 3.0, 3.0]).unwrap();
        assert!(r.lhs.abs() < 1e-14 && r.passed());
    }

    #[test]
    fn ratio_lemma_examples() {
        let r = ratio_mean_lemma_check(&[1.0], &fd(&[1.0])).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        let r = ratio_mean_lemma_check(&[0.5, 1.5], &FiniteDist::uniform(2)).unwrap();
        let want = (2.0 * 0.5 * (2f64.ln() - 1.5f64.ln())).sqrt();
        assert!((r.rhs - want).abs() < 1e-15);
        assert!((r.lhs - 0.5).abs() < 1e-15);
        assert!(r.passed());
        assert!(ratio_mean_lemma_check(&[2.0], &fd(&[1.0])).is_err());
    }

    #[test]
    fn base_reporting() {
        let r = pinsker_check(&fd(&[0.5, 0.5]), &fd(&[0.25, 0.75])).unwrap().in_base(LogBase::Two);
        assert!((r.constant("D").unwrap() - 0.207518).abs() < 1e-6);
    }

    fn dist_strategy(k: usize) -> impl Strategy<Value = FiniteDist> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("positive mass", |w| {
            if w.iter().sum::<f64>() > 1e-6 {
                FiniteDist::from_weights(w).ok()
            } else {
                None
            }
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_pinsker(p in dist_strategy(5), q in dist_strategy(5)) {
            let d = kl(&p, &q).unwrap();
            prop_assert!(d >= ExtReal::ZERO);
            prop_assert!(pinsker_check(&p, &q).unwrap().passed());
        }

        #[test]
        fn tv_triangle(p in dist_strategy(4), q in dist_strategy(4), r in dist_strategy(4)) {
            let a = tv(&p, &q).unwrap();
            prop_assert!((a - tv(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!(a <= tv(&p, &r).unwrap() + tv(&r, &q).unwrap() + 1e-15);
        }

        #[test]
        fn dv_never_exceeds_kl(p in dist_strategy(5), q in dist_strategy(5),
                               g in prop::collection::vec(-5.0f64..5.0, 5)) {
            if kl(&p, &q).unwrap().is_finite() {
                let r = donsker_varadhan_gap(&p, &q, &g).unwrap();
                prop_assert!(r.slack >= -1e-9);
            }
        }
    }
}
