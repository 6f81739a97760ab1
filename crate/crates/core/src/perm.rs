//! Combinatorial data of interval exchange transformations.
//!
//! A `d`-interval exchange is labelled by a permutation π of `{1, …, d}`
//! together with a length vector. This module owns everything that depends
//! on π alone:
//!
//! * structural predicates — irreducibility, the rotation class, standard
//!   permutations (`π(1) = d`, `π(d) = 1`);
//! * the two elementary Rauzy moves and the Rauzy class they generate;
//! * singularity data: the permutation σ on `{0, …, d}` whose orbits Σ(π)
//!   encode the singularities of the suspended translation surface, the
//!   orbit count `N(π)`, and the genus `g = (d − N(π) + 1)/2`;
//! * the invariant subspace `H(π)` — the annihilator of the vectors
//!   `b^S_i = χ_S(i−1) − χ_S(i)`, one per orbit `S ∈ Σ(π)` — with an exact
//!   basis of the co-compact lattice `H(π) ∩ Z^d`;
//! * the alternating vectors `v^{(i)}` that span `H(π)` when π is standard.
//!
//! σ follows the convention `σ(0) = π⁻¹(1) − 1`, `σ(π⁻¹(d)) = d`, and
//! `σ(i) = π⁻¹(π(i)+1) − 1` otherwise; the trailing `−1` in the generic case
//! is required for σ to be a bijection (already visible at d = 2, where
//! dropping it sends both 0 and 2 to 1).
//!
//! Text form throughout is the one-based image list, e.g. `"4 3 2 1"` for
//! the permutation `i ↦ 5 − i`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;

use crate::linalg::{rat_rank, IMat};

/// Errors from permutation construction and combinatorial operations.
#[derive(Debug, thiserror::Error)]
pub enum PermError {
    #[error("image vector {0:?} is not a bijection of {{1..{1}}}")]
    NotABijection(Vec<usize>, usize),
    #[error("permutation {0} is reducible: {{1..{1}}} is invariant for some k < d")]
    Reducible(String, usize),
    #[error("operation needs d >= 2 intervals, got d = {0}")]
    TooSmall(usize),
    #[error("cannot parse permutation from {0:?}: {1}")]
    Parse(String, String),
}

/// A permutation of `{1, …, d}` in image form, with its inverse cached.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    /// `fwd[i] = π(i+1) − 1` (0-based positions and values).
    fwd: Vec<usize>,
    /// `inv[v] = π⁻¹(v+1) − 1`.
    inv: Vec<usize>,
}

impl Permutation {
    /// Build from the one-based image vector `(π(1), …, π(d))`.
    ///
    /// ```
    /// use ietlab::perm::Permutation;
    /// let p = Permutation::new(vec![4, 3, 2, 1]).unwrap();
    /// assert_eq!(p.d(), 4);
    /// assert!(p.is_irreducible() && p.is_standard() && !p.is_rotation());
    /// ```
    pub fn new(image_one_based: Vec<usize>) -> Result<Self, PermError> {
        let d = image_one_based.len();
        let mut seen = vec![false; d];
        for &v in &image_one_based {
            if v < 1 || v > d || seen[v - 1] {
                return Err(PermError::NotABijection(image_one_based.clone(), d));
            }
            seen[v - 1] = true;
        }
        let fwd: Vec<usize> = image_one_based.iter().map(|&v| v - 1).collect();
        let mut inv = vec![0usize; d];
        for (i, &v) in fwd.iter().enumerate() {
            inv[v] = i;
        }
        Ok(Permutation { fwd, inv })
    }

    /// Number of exchanged intervals.
    pub fn d(&self) -> usize {
        self.fwd.len()
    }

    /// `π(i+1) − 1` for 0-based `i`.
    pub fn image0(&self, i: usize) -> usize {
        self.fwd[i]
    }

    /// `π⁻¹(v+1) − 1` for 0-based value `v`.
    pub fn preimage0(&self, v: usize) -> usize {
        self.inv[v]
    }

    /// One-based image vector `(π(1), …, π(d))`.
    pub fn one_based(&self) -> Vec<usize> {
        self.fwd.iter().map(|&v| v + 1).collect()
    }

    /// π is irreducible when no proper prefix `{1..k}` is invariant, i.e.
    /// `π({1..k}) ≠ {1..k}` for every `1 ≤ k < d`.
    ///
    /// ```
    /// use ietlab::perm::Permutation;
    /// assert!(Permutation::new(vec![2, 1]).unwrap().is_irreducible());
    /// assert!(!Permutation::new(vec![1, 2]).unwrap().is_irreducible());
    /// assert!(!Permutation::new(vec![2, 1, 3]).unwrap().is_irreducible());
    /// ```
    pub fn is_irreducible(&self) -> bool {
        let d = self.d();
        let mut max_so_far = 0usize;
        for k in 1..d {
            max_so_far = max_so_far.max(self.fwd[k - 1] + 1);
            if max_so_far == k {
                return false;
            }
        }
        true
    }

    fn require_irreducible(&self) -> Result<(), PermError> {
        if self.d() < 2 {
            return Err(PermError::TooSmall(self.d()));
        }
        if !self.is_irreducible() {
            return Err(PermError::Reducible(self.to_string(), self.d()));
        }
        Ok(())
    }

    /// π belongs to the rotation class when `π(i+1) ≡ π(i) + 1 (mod d)`;
    /// the corresponding exchanges are circle rotations in disguise.
    pub fn is_rotation(&self) -> bool {
        let d = self.d();
        (0..d.saturating_sub(1)).all(|i| self.fwd[i + 1] == (self.fwd[i] + 1) % d)
    }

    /// Standard permutation: `π(1) = d` and `π(d) = 1`. Every Rauzy class
    /// contains at least one.
    pub fn is_standard(&self) -> bool {
        let d = self.d();
        d >= 2 && self.fwd[0] == d - 1 && self.fwd[d - 1] == 0
    }

    /// Singularity data of the suspension: the permutation σ on
    /// `{0, …, d}`, its orbits, and the genus.
    ///
    /// ```
    /// use ietlab::perm::Permutation;
    /// let p = Permutation::new(vec![4, 3, 2, 1]).unwrap();
    /// let s = p.singularity_data().unwrap();
    /// assert_eq!(s.n_orbits, 1); // one 5-cycle
    /// assert_eq!(s.genus, 2);
    /// ```
    pub fn singularity_data(&self) -> Result<SingularityData, PermError> {
        self.require_irreducible()?;
        let d = self.d();
        let mut sigma = vec![usize::MAX; d + 1];
        sigma[0] = self.inv[0];
        sigma[self.inv[d - 1] + 1] = d;
        for i in 1..=d {
            if i == self.inv[d - 1] + 1 {
                continue;
            }
            // π(i) < d here, so π(i)+1 is a legal value.
            sigma[i] = self.inv[self.fwd[i - 1] + 1];
        }
        debug_assert!(is_bijection_0(&sigma), "sigma must be a bijection on {{0..d}}");

        // Orbits, canonically ordered: elements ascending, orbits by minimum.
        let mut seen = vec![false; d + 1];
        let mut orbits: Vec<Vec<usize>> = Vec::new();
        for start in 0..=d {
            if seen[start] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                orbit.push(x);
                x = sigma[x];
            }
            orbit.sort_unstable();
            orbits.push(orbit);
        }
        let n_orbits = orbits.len();
        let numerator = d + 1;
        if numerator < n_orbits || (numerator - n_orbits) % 2 != 0 {
            // Cannot happen for irreducible data; fail loudly if it does.
            panic!("genus (d - N + 1)/2 is not a non-negative integer for {self}");
        }
        let genus = (numerator - n_orbits) / 2;
        let nu: Vec<usize> = orbits
            .iter()
            .map(|s| s.iter().filter(|&&x| 1 <= x && x <= d - 1).count())
            .collect();
        Ok(SingularityData { sigma, orbits, nu, n_orbits, genus })
    }

    /// The invariant subspace `H(π)`: annihilator of the vectors `b^S`,
    /// with an exact basis of the lattice `H(π) ∩ Z^d`.
    ///
    /// ```
    /// use ietlab::perm::Permutation;
    /// let h = Permutation::new(vec![3, 2, 1]).unwrap().h_subspace().unwrap();
    /// assert_eq!(h.dim, 2);
    /// let basis: Vec<Vec<i64>> = h.lattice_basis_i64();
    /// assert_eq!(basis, vec![vec![1, 1, 0], vec![0, 1, 1]]);
    /// ```
    pub fn h_subspace(&self) -> Result<HSubspace, PermError> {
        let sing = self.singularity_data()?;
        let d = self.d();
        let rows: Vec<Vec<BigInt>> = sing
            .orbits
            .iter()
            .map(|orbit| {
                let chi = |x: usize| orbit.binary_search(&x).is_ok();
                (0..d)
                    .map(|j| {
                        BigInt::from(chi(j) as i64) - BigInt::from(chi(j + 1) as i64)
                    })
                    .collect()
            })
            .collect();
        let annihilator = IMat::from_rows(rows);
        let lattice_basis = annihilator.kernel_basis();
        let dim = d + 1 - sing.n_orbits;
        assert_eq!(
            lattice_basis.len(),
            dim,
            "kernel rank must equal d - N + 1 for irreducible permutations"
        );
        Ok(HSubspace { dim, annihilator, lattice_basis, singularity: sing })
    }

    /// Rauzy move of type 1 (bottom interval shorter: `λ_d < λ_{π⁻¹(d)}`).
    pub fn rauzy_type1(&self) -> Result<Permutation, PermError> {
        self.require_irreducible()?;
        let d = self.d();
        let k = self.inv[d - 1]; // 0-based position of the value d
        let mut fwd = Vec::with_capacity(d);
        fwd.extend_from_slice(&self.fwd[..=k]);
        fwd.push(self.fwd[d - 1]);
        fwd.extend_from_slice(&self.fwd[k + 1..d - 1]);
        let out = Permutation::from_fwd(fwd);
        debug_assert!(out.is_irreducible(), "Rauzy moves preserve irreducibility");
        Ok(out)
    }

    /// Rauzy move of type 2 (bottom interval longer: `λ_d > λ_{π⁻¹(d)}`).
    pub fn rauzy_type2(&self) -> Result<Permutation, PermError> {
        self.require_irreducible()?;
        let d = self.d();
        let t = self.fwd[d - 1]; // 0-based value π(d) − 1
        let fwd: Vec<usize> = self
            .fwd
            .iter()
            .map(|&v| {
                if v <= t {
                    v
                } else if v < d - 1 {
                    v + 1
                } else {
                    t + 1
                }
            })
            .collect();
        let out = Permutation::from_fwd(fwd);
        debug_assert!(out.is_irreducible(), "Rauzy moves preserve irreducibility");
        Ok(out)
    }

    /// Both Rauzy neighbours `(type 1, type 2)`.
    pub fn rauzy_neighbors(&self) -> Result<(Permutation, Permutation), PermError> {
        Ok((self.rauzy_type1()?, self.rauzy_type2()?))
    }

    /// The Rauzy class of π: closure under both elementary moves.
    pub fn rauzy_class(&self) -> Result<RauzyClass, PermError> {
        self.require_irreducible()?;
        let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut members: Vec<Permutation> = Vec::new();
        let mut queue = VecDeque::new();
        index.insert(self.fwd.clone(), 0);
        members.push(self.clone());
        queue.push_back(0usize);
        while let Some(i) = queue.pop_front() {
            let here = members[i].clone();
            for next in [here.rauzy_type1()?, here.rauzy_type2()?] {
                if !index.contains_key(&next.fwd) {
                    index.insert(next.fwd.clone(), members.len());
                    members.push(next);
                    queue.push_back(members.len() - 1);
                }
            }
        }
        // Canonical order: lexicographic by image vector.
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| members[a].fwd.cmp(&members[b].fwd));
        let members: Vec<Permutation> = order.iter().map(|&i| members[i].clone()).collect();
        let index: BTreeMap<Vec<usize>, usize> =
            members.iter().enumerate().map(|(i, p)| (p.fwd.clone(), i)).collect();
        let mut type1 = Vec::with_capacity(members.len());
        let mut type2 = Vec::with_capacity(members.len());
        for p in &members {
            type1.push(index[&p.rauzy_type1()?.fwd]);
            type2.push(index[&p.rauzy_type2()?.fwd]);
        }
        Ok(RauzyClass { members, type1, type2, index })
    }

    /// The alternating vectors `v^{(i)}`, `i = 1..d`:
    /// `v^{(i)}_j = 1` if `π(j) < π(i)` and `j > i`, `−1` if `π(j) > π(i)`
    /// and `j < i`, else 0. For standard π they span `H(π)`.
    pub fn nr_vectors(&self) -> Vec<Vec<BigInt>> {
        let d = self.d();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if j > i && self.fwd[j] < self.fwd[i] {
                            BigInt::from(1)
                        } else if j < i && self.fwd[j] > self.fwd[i] {
                            BigInt::from(-1)
                        } else {
                            BigInt::from(0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn from_fwd(fwd: Vec<usize>) -> Permutation {
        let mut inv = vec![0usize; fwd.len()];
        for (i, &v) in fwd.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { fwd, inv }
    }
}

fn is_bijection_0(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    v.iter().all(|&x| {
        if x < seen.len() && !seen[x] {
            seen[x] = true;
            true
        } else {
            false
        }
    })
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &v in &self.fwd {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}", v + 1)?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

impl FromStr for Permutation {
    type Err = PermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Result<Vec<usize>, _> = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>())
            .collect();
        match vals {
            Ok(v) if !v.is_empty() => Permutation::new(v),
            Ok(_) => Err(PermError::Parse(s.to_string(), "empty".into())),
            Err(e) => Err(PermError::Parse(s.to_string(), e.to_string())),
        }
    }
}

/// Singularity data extracted from σ.
#[derive(Clone, Debug)]
pub struct SingularityData {
    /// σ as an image table on `{0, …, d}`.
    pub sigma: Vec<usize>,
    /// Orbits Σ(π), each sorted ascending, ordered by minimum element.
    pub orbits: Vec<Vec<usize>>,
    /// `ν(S) = |S ∩ {1, …, d−1}|` per orbit; the singularity angles are
    /// `2πν(S)` and `Σ_S (ν(S) − 1) = 2g − 2`.
    pub nu: Vec<usize>,
    /// `N(π)`, the number of orbits.
    pub n_orbits: usize,
    /// `g = (d − N(π) + 1) / 2`.
    pub genus: usize,
}

/// The subspace `H(π) ⊂ R^d` with its integral structure.
#[derive(Clone, Debug)]
pub struct HSubspace {
    /// `dim H(π) = d − N(π) + 1 = 2g`.
    pub dim: usize,
    /// Rows are the vectors `b^S`, one per orbit; `H(π)` is their annihilator.
    pub annihilator: IMat,
    /// Echelon basis (positive pivots) of the lattice `H(π) ∩ Z^d`; also a
    /// basis of `H(π)` over the rationals.
    pub lattice_basis: Vec<Vec<BigInt>>,
    /// The singularity data the subspace was derived from.
    pub singularity: SingularityData,
}

impl HSubspace {
    /// Ambient dimension d.
    pub fn ambient(&self) -> usize {
        self.annihilator.cols()
    }

    /// Lattice basis with entries narrowed to `i64` (entries are ±1-sized
    /// in practice; panics only if that assumption breaks).
    pub fn lattice_basis_i64(&self) -> Vec<Vec<i64>> {
        self.lattice_basis
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| x.try_into().expect("lattice basis entry exceeds i64"))
                    .collect()
            })
            .collect()
    }

    /// The basis as rational vectors (identical entries; `H(π) ∩ Z^d` is a
    /// rational basis of `H(π)` because integer kernels are saturated).
    pub fn rational_basis(&self) -> Vec<Vec<BigRational>> {
        self.lattice_basis
            .iter()
            .map(|row| row.iter().map(|x| BigRational::from_integer(x.clone())).collect())
            .collect()
    }

    /// Membership test `w ∈ H(π)` for rational vectors, exact.
    pub fn contains(&self, w: &[BigRational]) -> bool {
        self.annihilator.mul_vec_rat(w).iter().all(|x| num::Zero::is_zero(x))
    }

    /// Express an ambient rational vector in basis coordinates, if it lies
    /// in `H(π)`.
    pub fn coordinates(&self, w: &[BigRational]) -> Option<Vec<BigRational>> {
        let cols: Vec<Vec<BigRational>> = self.rational_basis();
        // Basis vectors are rows; we need them as columns of the solve.
        let a_cols: Vec<Vec<BigRational>> = cols;
        crate::linalg::solve_exact(
            &a_cols.iter().map(|b| b.to_vec()).collect::<Vec<_>>(),
            &[w.to_vec()],
        )
        .map(|mut x| x.remove(0))
    }
}

/// A Rauzy class: all permutations reachable from a seed by the two
/// elementary moves, with the move graph.
#[derive(Clone, Debug)]
pub struct RauzyClass {
    /// Members in lexicographic order of their image vectors.
    pub members: Vec<Permutation>,
    /// `type1[i]` = index of the type-1 image of `members[i]`.
    pub type1: Vec<usize>,
    /// `type2[i]` = index of the type-2 image of `members[i]`.
    pub type2: Vec<usize>,
    index: BTreeMap<Vec<usize>, usize>,
}

impl RauzyClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.index.get(&p.fwd).copied()
    }

    pub fn contains_standard(&self) -> bool {
        self.members.iter().any(|p| p.is_standard())
    }
}

/// All irreducible permutations of `{1..d}` (lexicographic order). Intended
/// for exhaustive small-d sweeps; the count for d = 2..7 is
/// 1, 3, 13, 71, 461, 3447.
pub fn all_irreducible(d: usize) -> Vec<Permutation> {
    use itertools::Itertools;
    (1..=d)
        .permutations(d)
        .filter_map(|img| Permutation::new(img).ok())
        .filter(Permutation::is_irreducible)
        .collect()
}

/// Check that the vectors `v^{(i)}` span `H(π)` (rank over Q equals
/// `dim H(π)` and every vector lies in `H(π)`).
pub fn nr_vectors_span_h(p: &Permutation) -> Result<bool, PermError> {
    let h = p.h_subspace()?;
    let vs = p.nr_vectors();
    let rows: Vec<Vec<BigRational>> = vs
        .iter()
        .map(|v| v.iter().map(|x| BigRational::from_integer(x.clone())).collect())
        .collect();
    let in_h = rows.iter().all(|v| h.contains(v));
    Ok(in_h && rat_rank(&rows) == h.dim)
}
