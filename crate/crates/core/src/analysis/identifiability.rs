use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, numerical_rank, ComplexMatrix};
use crate::system::SystemConfig;

/// Relative singular-value threshold for channels that are rank deficient by
/// construction.
pub const LOOSE_RANK_TOL: f64 = 1e-8;

/// Dimensions entering the design conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignDims {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    #[serde(default = "one")]
    pub users: usize,
    #[serde(default = "one")]
    pub bs_count: usize,
}

fn one() -> usize {
    1
}

impl DesignDims {
    pub fn new(m: usize, l: usize, n: usize, k: usize, t: usize) -> Self {
        DesignDims {
            m,
            l,
            n,
            k,
            t,
            users: 1,
            bs_count: 1,
        }
    }

    /// Rows of the factor estimated through the first unfolding: `L`, or
    /// `P·M` in the uplink multi-user/multi-BS models.
    pub fn mode1_dim(&self) -> usize {
        if self.users == 1 && self.bs_count == 1 {
            self.l
        } else {
            self.bs_count * self.m
        }
    }

    /// Pilot columns: `M`, or `U·L` in the uplink models.
    pub fn pilot_dim(&self) -> usize {
        if self.users == 1 && self.bs_count == 1 {
            self.m
        } else {
            self.users * self.l
        }
    }
}

impl From<&SystemConfig> for DesignDims {
    fn from(c: &SystemConfig) -> Self {
        DesignDims {
            m: c.m,
            l: c.l,
            n: c.n,
            k: c.k,
            t: c.t,
            users: c.users,
            bs_count: c.bs_count,
        }
    }
}

/// One inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: i64,
    pub rhs: i64,
    pub satisfied: bool,
}

impl Condition {
    fn new(name: &str, lhs: usize, rhs: usize) -> Self {
        Condition {
            name: name.to_string(),
            lhs: lhs as i64,
            rhs: rhs as i64,
            satisfied: lhs >= rhs,
        }
    }

    pub fn margin(&self) -> i64 {
        self.lhs - self.rhs
    }
}

/// Every design inequality evaluated for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub dims: DesignDims,
    pub rank_h: usize,
    pub rank_g: usize,
    pub conditions: Vec<Condition>,
}

impl DesignReport {
    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    fn all(&self, names: &[&str]) -> bool {
        names
            .iter()
            .all(|n| self.get(n).is_some_and(|c| c.satisfied))
    }

    /// `K ≥ N` and `T ≥ M`.
    pub fn krf_feasible(&self) -> bool {
        self.all(&["krf_blocks", "krf_pilots"])
    }

    /// `K·min(T,L) ≥ N` and `T ≥ M`.
    pub fn bals_necessary(&self) -> bool {
        self.all(&["bals_blocks", "bals_pilots"])
    }

    /// Necessary dimensions plus both Khatri-Rao rank conditions.
    pub fn bals_feasible(&self) -> bool {
        self.all(&["bals_blocks", "bals_pilots", "unique_mode1", "unique_mode2"])
    }

    pub fn tals_feasible(&self) -> bool {
        self.all(&["bals_pilots", "kruskal"])
    }

    pub fn ls_feasible(&self) -> bool {
        self.krf_feasible()
    }
}

/// Evaluates the design inequalities from dimensions and channel ranks
/// (`None` means full rank).
///
/// With `r_S = min(K,N)`:
///
/// * `krf_blocks` `K ≥ N`, `krf_pilots` `T ≥ M`
/// * `bals_blocks` `K·min(T,L) ≥ N`, `bals_pilots` `T ≥ M`
/// * `unique_mode1` `r_S + rank(XHᵀ) ≥ N+1`, `unique_mode2` `r_S + rank(G) ≥ N+1`
/// * `full_rank_mode1` `r_S + min(M,N) ≥ N+1`, `full_rank_mode2` `r_S + min(L,N) ≥ N+1`
/// * `rank_deficient_mode1` `r_S + rank(H) ≥ N+1`, `rank_deficient_mode2` `r_S + rank(G) ≥ N+1`
/// * `kruskal` `min(L,N) + min(M,N) + min(K,N) ≥ 2N+2`
///
/// In the uplink multi-user/multi-BS models `L` becomes `P·M` and `M`
/// becomes `U·L`.
pub fn check_design(dims: &DesignDims, rank_h: Option<usize>, rank_g: Option<usize>) -> DesignReport {
    let (n, k, t) = (dims.n, dims.k, dims.t);
    let i = dims.mode1_dim();
    let j = dims.pilot_dim();
    let rank_h = rank_h.unwrap_or(n.min(j)).min(n.min(j));
    let rank_g = rank_g.unwrap_or(n.min(i)).min(n.min(i));
    let rank_s = k.min(n);
    let rank_z = rank_h.min(t);
    let conditions = vec![
        Condition::new("krf_blocks", k, n),
        Condition::new("krf_pilots", t, j),
        Condition::new("bals_blocks", k * t.min(i), n),
        Condition::new("bals_pilots", t, j),
        Condition::new("unique_mode1", rank_s + rank_z, n + 1),
        Condition::new("unique_mode2", rank_s + rank_g, n + 1),
        Condition::new("full_rank_mode1", rank_s + j.min(n), n + 1),
        Condition::new("full_rank_mode2", rank_s + i.min(n), n + 1),
        Condition::new("rank_deficient_mode1", rank_s + rank_h, n + 1),
        Condition::new("rank_deficient_mode2", rank_s + rank_g, n + 1),
        Condition::new("kruskal", i.min(n) + j.min(n) + k.min(n), 2 * n + 2),
    ];
    DesignReport {
        dims: *dims,
        rank_h,
        rank_g,
        conditions,
    }
}

/// Numerical ranks of `A`, `B`, `A ◇ B` and whether
/// `rank(A ◇ B) ≥ min(rank(A) + rank(B) − 1, N)` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KrRankCheck {
    pub rank_a: usize,
    pub rank_b: usize,
    pub rank_kr: usize,
    pub bound: usize,
    pub satisfied: bool,
}

pub fn khatri_rao_rank_check(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<KrRankCheck> {
    if a.ncols() != b.ncols() {
        return Err(Error::ColumnMismatch {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    let kr = khatri_rao(a, b)?;
    let rank_a = numerical_rank(a, LOOSE_RANK_TOL);
    let rank_b = numerical_rank(b, LOOSE_RANK_TOL);
    let rank_kr = numerical_rank(&kr, LOOSE_RANK_TOL);
    let bound = (rank_a + rank_b).saturating_sub(1).min(a.ncols());
    Ok(KrRankCheck {
        rank_a,
        rank_b,
        rank_kr,
        bound,
        satisfied: rank_kr >= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, ZERO};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_paper_style_config() {
        let r = check_design(&DesignDims::new(3, 2, 50, 50, 4), None, None);
        assert!(r.krf_feasible());
        assert!(r.get("bals_blocks").unwrap().satisfied);
        assert_eq!(r.get("bals_blocks").unwrap().margin(), 50);
    }

    #[test]
    fn single_block_is_krf_infeasible() {
        for n in 2..8 {
            let r = check_design(&DesignDims::new(2, 2, n, 1, 2), None, None);
            assert!(!r.krf_feasible());
        }
    }

    #[test]
    fn uniqueness_at_equality() {
        let r = check_design(&DesignDims::new(2, 2, 4, 3, 2), None, None);
        for name in ["full_rank_mode1", "full_rank_mode2", "unique_mode1", "unique_mode2"] {
            let c = r.get(name).unwrap();
            assert!(c.satisfied && c.margin() == 0, "{name}");
        }
    }

    #[test]
    fn multiuser_substitutes_dimensions() {
        let mut d = DesignDims::new(2, 2, 6, 6, 4);
        d.users = 2;
        let r = check_design(&d, None, None);
        assert_eq!(r.get("krf_pilots").unwrap().rhs, 4);
        assert_eq!(r.get("full_rank_mode1").unwrap().lhs, 6 + 4);
        assert_eq!(r.get("full_rank_mode2").unwrap().lhs, 6 + 2);
    }

    #[test]
    fn identity_khatri_rao() {
        let i2 = ComplexMatrix::identity(2, 2);
        let c = khatri_rao_rank_check(&i2, &i2).unwrap();
        assert_eq!((c.rank_a, c.rank_b, c.rank_kr, c.bound), (2, 2, 2, 2));
        assert!(c.satisfied);
    }

    #[test]
    fn repeated_column_case() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let col = complex_gaussian(3, 1, 1.0, &mut r);
        let a = ComplexMatrix::from_fn(3, 3, |i, _| col[(i, 0)]);
        let b = complex_gaussian(2, 3, 1.0, &mut r);
        let c = khatri_rao_rank_check(&a, &b).unwrap();
        assert_eq!(c.rank_a, 1);
        assert_eq!(c.rank_b, 2);
        assert!(c.rank_kr >= 2);
    }

    #[test]
    fn planted_rank_instances_never_violate_bound() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = r.random_range(1..=6);
            let (ia, ib) = (r.random_range(1..=6), r.random_range(1..=6));
            let ra = r.random_range(1..=ia.min(n));
            let rb = r.random_range(1..=ib.min(n));
            let a = complex_gaussian(ia, ra, 1.0, &mut r) * complex_gaussian(ra, n, 1.0, &mut r);
            let b = complex_gaussian(ib, rb, 1.0, &mut r) * complex_gaussian(rb, n, 1.0, &mut r);
            let c = khatri_rao_rank_check(&a, &b).unwrap();
            assert_eq!((c.rank_a, c.rank_b), (ra, rb));
            assert!(c.satisfied, "{c:?}");
        }
    }

    #[test]
    fn mismatched_columns_rejected() {
        let a = ComplexMatrix::from_element(2, 2, ZERO);
        let b = ComplexMatrix::from_element(2, 3, Complex64::new(1.0, 0.0));
        assert!(khatri_rao_rank_check(&a, &b).is_err());
    }
}
