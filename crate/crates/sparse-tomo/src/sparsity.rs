//! Weighted ℓᵖ norms, weighted sparsity and sparse approximation.

use crate::error::{Error, Result};

/// Positive weights `ω_i ≥ 1`, one per dictionary index.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 1.0)
        {
            return Err(Error::Domain(format!("weight {i} is {w}, need a finite value >= 1")));
        }
        Ok(Self(values))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Outcome of a sparse approximation: the kept support and the tail norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseApprox {
    /// Kept indices in ascending order.
    pub support: Vec<usize>,
    /// `x` restricted to `support`, zero elsewhere.
    pub approximation: Vec<f64>,
    /// `‖x_{Sᶜ}‖_{1,ω}`.
    pub error_l1: f64,
    /// `‖x_{Sᶜ}‖₂`.
    pub error_l2: f64,
    /// Tail norm in the ℓᵖ_ω norm the approximation was requested for.
    pub error_p: f64,
    /// `ω(S)`.
    pub weighted_size: f64,
}

fn check_len(x: &[f64], w: &Weights) -> Result<()> {
    if x.len() != w.len() {
        return Err(Error::Dimension(format!(
            "vector has {} entries but {} weights were given",
            x.len(),
            w.len()
        )));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::Domain(format!("exponent p = {p} is outside (0, 2]")));
    }
    Ok(())
}

fn norm_unchecked(x: &[f64], w: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    if p == 1.0 {
        return x.iter().zip(w).map(|(v, wi)| v.abs() * wi).sum();
    }
    x.iter()
        .zip(w)
        .map(|(v, wi)| v.abs().powf(p) * wi.powf(2.0 - p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `‖x‖_{p,ω} = (Σ |x_i|ᵖ ω_i^{2−p})^{1/p}` for `p ∈ (0, 2]`.
pub fn weighted_norm(x: &[f64], w: &Weights, p: f64) -> Result<f64> {
    check_len(x, w)?;
    check_p(p)?;
    Ok(norm_unchecked(x, w.as_slice(), p))
}

/// `ω(S) = Σ_{i∈S} ω_i²`.
pub fn weighted_size(support: &[usize], w: &Weights) -> Result<f64> {
    support
        .iter()
        .map(|&i| {
            w.as_slice()
                .get(i)
                .map(|wi| wi * wi)
                .ok_or_else(|| Error::Index(format!("index {i} with {} weights", w.len())))
        })
        .sum()
}

fn approx_from_support(x: &[f64], w: &Weights, mut support: Vec<usize>, p: f64) -> SparseApprox {
    support.sort_unstable();
    let mut approximation = vec![0.0; x.len()];
    let mut tail = x.to_vec();
    for &i in &support {
        approximation[i] = x[i];
        tail[i] = 0.0;
    }
    let ws = w.as_slice();
    SparseApprox {
        weighted_size: support.iter().map(|&i| ws[i] * ws[i]).sum(),
        error_l1: norm_unchecked(&tail, ws, 1.0),
        error_l2: norm_unchecked(&tail, ws, 2.0),
        error_p: norm_unchecked(&tail, ws, p),
        support,
        approximation,
    }
}

/// Greedy prefix of the non-increasing rearrangement of `|x_i|/ω_i`
/// (ties by ascending index), stopped before `ω(S)` would exceed `s`.
pub fn quasi_best_sparse_approx(x: &[f64], w: &Weights, s: f64, p: f64) -> Result<SparseApprox> {
    check_len(x, w)?;
    check_p(p)?;
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("budget s = {s} must be non-negative")));
    }
    let ws = w.as_slice();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = x[a].abs() / ws[a];
        let rb = x[b].abs() / ws[b];
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut size = 0.0;
    let mut support = Vec::new();
    for i in order {
        // Zero entries never help; stopping here keeps the support equal to a subset of supp(x).
        if x[i] == 0.0 || size + ws[i] * ws[i] > s {
            break;
        }
        size += ws[i] * ws[i];
        support.push(i);
    }
    Ok(approx_from_support(x, w, support, p))
}

/// Largest index set accepted by [`best_sparse_approx_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Exact best s-ω-sparse approximation in `ℓᵖ_ω` by enumerating all supports.
pub fn best_sparse_approx_bruteforce(x: &[f64], w: &Weights, s: f64, p: f64) -> Result<SparseApprox> {
    check_len(x, w)?;
    check_p(p)?;
    let n = x.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Capacity(format!(
            "{n} indices exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )));
    }
    let ws = w.as_slice();
    // Minimizing the tail sum Σ_{i∉S} |x_i|ᵖ ω_i^{2−p} is the same as maximizing the kept sum.
    let gain: Vec<f64> = x
        .iter()
        .zip(ws)
        .map(|(v, wi)| v.abs().powf(p) * wi.powf(2.0 - p))
        .collect();
    let sizes: Vec<f64> = ws.iter().map(|wi| wi * wi).collect();
    let mut best_mask = 0u32;
    let mut best_gain = -1.0;
    for mask in 0u32..(1u32 << n) {
        let mut size = 0.0;
        let mut kept = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                size += sizes[i];
                kept += gain[i];
            }
        }
        if size <= s && kept > best_gain {
            best_gain = kept;
            best_mask = mask;
        }
    }
    let support = (0..n).filter(|i| best_mask >> i & 1 == 1).collect();
    Ok(approx_from_support(x, w, support, p))
}

/// Right-hand side of the Stechkin-type bound `σ_s(x)_{q,ω} ≤ s^{1/q−1/p} ‖x‖_{p,ω}`.
pub fn stechkin_bound(x: &[f64], w: &Weights, s: f64, p: f64, q: f64) -> Result<f64> {
    check_len(x, w)?;
    check_p(p)?;
    check_p(q)?;
    if p >= q {
        return Err(Error::Domain(format!("need p < q, got p = {p}, q = {q}")));
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!("budget s = {s} must be positive")));
    }
    Ok(s.powf(1.0 / q - 1.0 / p) * norm_unchecked(x, w.as_slice(), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: &[f64]) -> Weights {
        Weights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(weighted_norm(&[1.0, -2.0, 3.0], &w(&[1.0, 1.0, 1.0]), 1.0).unwrap(), 6.0);
        assert_eq!(weighted_norm(&[1.0, 1.0], &w(&[2.0, 3.0]), 1.0).unwrap(), 5.0);
        assert!((weighted_norm(&[3.0, 4.0], &w(&[7.0, 9.0]), 2.0).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn norm_rejects_bad_input() {
        assert!(matches!(weighted_norm(&[1.0], &w(&[1.0, 1.0]), 1.0), Err(Error::Dimension(_))));
        assert!(matches!(weighted_norm(&[1.0], &w(&[1.0]), 2.5), Err(Error::Domain(_))));
        assert!(matches!(weighted_norm(&[1.0], &w(&[1.0]), 0.0), Err(Error::Domain(_))));
        assert!(Weights::new(vec![0.5]).is_err());
        assert!(Weights::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn size_examples() {
        assert_eq!(weighted_size(&[0, 1], &w(&[2.0, 3.0, 5.0])).unwrap(), 13.0);
        assert_eq!(weighted_size(&[], &w(&[2.0, 3.0, 5.0])).unwrap(), 0.0);
        assert_eq!(weighted_size(&[0, 1, 2], &w(&[1.0, 1.0, 1.0])).unwrap(), 3.0);
        assert!(matches!(weighted_size(&[3], &w(&[1.0])), Err(Error::Index(_))));
    }

    #[test]
    fn quasi_best_examples() {
        let r = quasi_best_sparse_approx(&[3.0, 2.0, 1.0, 0.0], &Weights::uniform(4), 2.0, 1.0).unwrap();
        assert_eq!(r.support, vec![0, 1]);
        assert_eq!(r.error_l1, 1.0);

        let r = quasi_best_sparse_approx(&[4.0, 1.0], &w(&[3.0, 1.0]), 2.0, 1.0).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.error_l1, 13.0);

        let r = quasi_best_sparse_approx(&[0.0; 5], &w(&[1.0, 2.0, 1.0, 3.0, 1.0]), 4.0, 1.0).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.error_l1, 0.0);
    }

    #[test]
    fn quasi_best_ties_prefer_low_index() {
        let r = quasi_best_sparse_approx(&[1.0, -1.0, 1.0], &Weights::uniform(3), 2.0, 2.0).unwrap();
        assert_eq!(r.support, vec![0, 1]);
    }

    #[test]
    fn bruteforce_examples() {
        let r = best_sparse_approx_bruteforce(&[4.0, 1.0], &w(&[3.0, 1.0]), 2.0, 1.0).unwrap();
        assert_eq!(r.support, vec![1]);
        assert_eq!(r.error_l1, 12.0);
        let r = best_sparse_approx_bruteforce(&[3.0, 2.0, 1.0, 0.0], &Weights::uniform(4), 2.0, 1.0).unwrap();
        assert_eq!(r.error_l1, 1.0);
        let r = best_sparse_approx_bruteforce(&[1.0; 3], &Weights::uniform(3), 3.0, 1.0).unwrap();
        assert_eq!(r.error_l1, 0.0);
        assert!(matches!(
            best_sparse_approx_bruteforce(&[0.0; 21], &Weights::uniform(21), 3.0, 1.0),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn stechkin_examples() {
        let b = stechkin_bound(&[1.0, 0.0, 0.0], &Weights::uniform(3), 1.0, 1.0, 2.0).unwrap();
        assert_eq!(b, 1.0);
        let best = best_sparse_approx_bruteforce(&[1.0, 0.0, 0.0], &Weights::uniform(3), 1.0, 2.0).unwrap();
        assert_eq!(best.error_p, 0.0);

        let b = stechkin_bound(&[1.0; 4], &Weights::uniform(4), 2.0, 1.0, 2.0).unwrap();
        assert!((b - 4.0 / 2f64.sqrt()).abs() < 1e-14);
        let best = best_sparse_approx_bruteforce(&[1.0; 4], &Weights::uniform(4), 2.0, 2.0).unwrap();
        assert!((best.error_p - 2f64.sqrt()).abs() < 1e-14);
        assert!(best.error_p <= b);

        assert!(matches!(
            stechkin_bound(&[1.0], &Weights::uniform(1), 1.0, 2.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    fn instance(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (1..=max_len).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(1.0f64..2.0, n),
                0.5f64..(2.0 * n as f64),
            )
        })
    }

    proptest! {
        #[test]
        fn best_le_quasi_le_norm((x, wv, s) in instance(12), p in prop::sample::select(vec![1.0, 2.0])) {
            let wt = Weights::new(wv).unwrap();
            let best = best_sparse_approx_bruteforce(&x, &wt, s, p).unwrap();
            let quasi = quasi_best_sparse_approx(&x, &wt, s, p).unwrap();
            let full = weighted_norm(&x, &wt, p).unwrap();
            prop_assert!(best.error_p <= quasi.error_p * (1.0 + 1e-12) + 1e-12);
            prop_assert!(quasi.error_p <= full * (1.0 + 1e-12));
            prop_assert!(quasi.weighted_size <= s && best.weighted_size <= s);
        }

        #[test]
        fn stechkin_holds_for_quasi_best((x, wv, s) in instance(12)) {
            let wt = Weights::new(wv).unwrap();
            let bound = stechkin_bound(&x, &wt, s, 1.0, 2.0).unwrap();
            let quasi = quasi_best_sparse_approx(&x, &wt, s, 2.0).unwrap();
            prop_assert!(quasi.error_l2 <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn size_sandwich(wv in prop::collection::vec(1.0f64..3.0, 1..10), mask in any::<u16>()) {
            let wt = Weights::new(wv.clone()).unwrap();
            let support: Vec<usize> = (0..wv.len()).filter(|i| mask >> i & 1 == 1).collect();
            let size = weighted_size(&support, &wt).unwrap();
            let max_sq = support.iter().map(|&i| wv[i] * wv[i]).fold(0.0, f64::max);
            prop_assert!(support.len() as f64 <= size + 1e-12);
            prop_assert!(size <= support.len() as f64 * max_sq + 1e-12);
        }

        #[test]
        fn euclidean_and_homogeneous((x, wv, _s) in instance(10), c in -3.0f64..3.0, p in 0.3f64..2.0) {
            let wt = Weights::new(wv).unwrap();
            let two = weighted_norm(&x, &wt, 2.0).unwrap();
            let eu = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((two - eu).abs() <= 1e-12 * eu.max(1e-300));
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let lhs = weighted_norm(&scaled, &wt, p).unwrap();
            let rhs = c.abs() * weighted_norm(&x, &wt, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }

        #[test]
        fn stored_tail_matches_recomputation((x, wv, s) in instance(10)) {
            let wt = Weights::new(wv).unwrap();
            let r = quasi_best_sparse_approx(&x, &wt, s, 1.0).unwrap();
            let tail: Vec<f64> = x.iter().zip(&r.approximation).map(|(a, b)| a - b).collect();
            let again = weighted_norm(&tail, &wt, 1.0).unwrap();
            prop_assert!((again - r.error_l1).abs() <= 1e-12 * again.max(1e-300));
        }
    }
}
