//! Symplectic Pauli strings, weighted terms and Hamiltonians.
//!
//! A string on `n` qubits is stored as two bit masks: bit `q` of `x` is set
//! where X or Y acts on qubit `q`, bit `q` of `z` where Z or Y acts. Qubit 0 is
//! the leftmost Kronecker factor of the dense realization, i.e. the most
//! significant bit of a basis index. The dense matrix carries the phase
//! `i^{popcount(x & z)}` so that `Y = iXZ` is the usual Pauli-Y.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ONE, ZERO};

/// Largest qubit count for which dense matrices are built.
pub const DENSE_QUBIT_LIMIT: usize = 12;

/// Largest qubit count representable by the mask encoding.
pub const MAX_QUBITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

fn mask_for(n_qubits: usize) -> u64 {
    if n_qubits >= 64 {
        u64::MAX
    } else {
        (1u64 << n_qubits) - 1
    }
}

impl PauliString {
    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let m = mask_for(n_qubits);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::InvalidArgument(format!(
                "masks ({x_mask:#x}, {z_mask:#x}) exceed {n_qubits} qubits"
            )));
        }
        Ok(Self {
            n_qubits,
            x: x_mask,
            z: z_mask,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(n_qubits, 0, 0).expect("valid qubit count")
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Result<Self> {
        let (mut x, mut z) = (0u64, 0u64);
        for (q, p) in paulis.iter().enumerate() {
            if q >= MAX_QUBITS {
                break;
            }
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                Pauli::Z => z |= 1 << q,
            }
        }
        Self::new(paulis.len(), x, z)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let xb = (self.x >> qubit) & 1 == 1;
        let zb = (self.z >> qubit) & 1 == 1;
        match (xb, zb) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Counts of (X, Y, Z) sites.
    pub fn site_counts(&self) -> (usize, usize, usize) {
        let y = (self.x & self.z).count_ones() as usize;
        let x = (self.x & !self.z).count_ones() as usize;
        let z = (self.z & !self.x).count_ones() as usize;
        (x, y, z)
    }

    /// True iff the number of locally anticommuting sites is even.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch(self.n_qubits, other.n_qubits));
        }
        let anti = (self.x & other.z) ^ (self.z & other.x);
        Ok(anti.count_ones() % 2 == 0)
    }

    /// Masks in basis-index bit order (qubit 0 at the most significant bit).
    fn index_masks(&self) -> (usize, usize) {
        let n = self.n_qubits;
        let rev = |m: u64| -> usize {
            let mut out = 0usize;
            for q in 0..n {
                if (m >> q) & 1 == 1 {
                    out |= 1 << (n - 1 - q);
                }
            }
            out
        };
        (rev(self.x), rev(self.z))
    }

    fn y_phase(&self) -> C64 {
        match (self.x & self.z).count_ones() % 4 {
            0 => ONE,
            1 => C64::new(0.0, 1.0),
            2 => -ONE,
            _ => C64::new(0.0, -1.0),
        }
    }

    fn check_dense(&self, limit: usize) -> Result<()> {
        if self.n_qubits > limit {
            return Err(Error::DenseLimit {
                n_qubits: self.n_qubits,
                limit,
            });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_with_limit(DENSE_QUBIT_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<CMatrix> {
        self.check_dense(limit)?;
        let dim = 1usize << self.n_qubits;
        let mut m = Array2::zeros((dim, dim));
        let action = self.action();
        for col in 0..dim {
            let (row, ph) = action.column(col);
            m[[row, col]] = ph;
        }
        Ok(m)
    }

    /// Sparse action on computational basis states.
    pub fn action(&self) -> PauliAction {
        let (xi, zi) = self.index_masks();
        PauliAction {
            xi,
            zi,
            phase: self.y_phase(),
        }
    }

    /// Left-multiplies `u` in place by `exp(-i·theta·P)`.
    ///
    /// `u` may have any number of columns; its row count must be `2^n`.
    pub fn apply_exp_left(&self, u: &mut CMatrix, theta: f64) {
        let dim = 1usize << self.n_qubits;
        assert_eq!(u.nrows(), dim, "row count must match the Pauli dimension");
        let (c, s) = (theta.cos(), theta.sin());
        let act = self.action();
        let ncols = u.ncols();
        if !u.is_standard_layout() {
            *u = u.as_standard_layout().to_owned();
        }
        let data = u.as_slice_mut().expect("standard layout");

        if act.xi == 0 {
            // Diagonal: P|b> = ±|b>.
            for r in 0..dim {
                let f = C64::new(c, 0.0) - C64::new(0.0, s) * act.row_entry(r);
                for v in &mut data[r * ncols..(r + 1) * ncols] {
                    *v *= f;
                }
            }
            return;
        }

        for r in 0..dim {
            let partner = r ^ act.xi;
            if partner < r {
                continue;
            }
            // P[r, partner] and P[partner, r].
            let k_r = C64::new(0.0, -s) * act.row_entry(r);
            let k_p = C64::new(0.0, -s) * act.row_entry(partner);
            let (lo, hi) = data.split_at_mut(partner * ncols);
            let row_r = &mut lo[r * ncols..(r + 1) * ncols];
            let row_p = &mut hi[..ncols];
            for (a, b) in row_r.iter_mut().zip(row_p.iter_mut()) {
                let (va, vb) = (*a, *b);
                *a = va * c + k_r * vb;
                *b = vb * c + k_p * va;
            }
        }
    }
}

/// `P|b> = phase · (-1)^{popcount(b & zi)} |b ^ xi>` in basis-index bit order.
#[derive(Clone, Copy, Debug)]
pub struct PauliAction {
    pub xi: usize,
    pub zi: usize,
    pub phase: C64,
}

impl PauliAction {
    fn sign(&self, b: usize) -> f64 {
        if (b & self.zi).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Image of basis column `col`: (row, entry).
    pub fn column(&self, col: usize) -> (usize, C64) {
        (col ^ self.xi, self.phase * self.sign(col))
    }

    /// The single nonzero entry in row `row`, located at column `row ^ xi`.
    pub fn row_entry(&self, row: usize) -> C64 {
        self.phase * self.sign(row ^ self.xi)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            let ch = match self.get(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let paulis = s
            .chars()
            .map(|ch| match ch {
                'I' | 'i' => Ok(Pauli::I),
                'X' | 'x' => Ok(Pauli::X),
                'Y' | 'y' => Ok(Pauli::Y),
                'Z' | 'z' => Ok(Pauli::Z),
                other => Err(Error::InvalidTerm(format!("bad pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if paulis.len() > MAX_QUBITS {
            return Err(Error::InvalidTerm(format!(
                "word of length {} exceeds {MAX_QUBITS} qubits",
                paulis.len()
            )));
        }
        PauliString::from_paulis(&paulis)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> Result<Self> {
        if !coefficient.is_finite() || coefficient == 0.0 {
            return Err(Error::InvalidTerm(format!(
                "coefficient {coefficient} must be finite and nonzero"
            )));
        }
        Ok(Self {
            coefficient,
            string,
        })
    }
}

/// Ordered list of distinct weighted Pauli strings on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut seen = HashSet::with_capacity(terms.len());
        for t in &terms {
            if t.string.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch(n_qubits, t.string.n_qubits()));
            }
            if !seen.insert((t.string.x, t.string.z)) {
                return Err(Error::DuplicateString(t.string.to_string()));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn from_pairs(n_qubits: usize, pairs: &[(f64, &str)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|(c, w)| PauliTerm::new(*c, w.parse()?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    /// Σ|c_j|.
    pub fn one_norm(&self) -> Result<f64> {
        if self.terms.is_empty() {
            return Err(Error::EmptyHamiltonian);
        }
        Ok(self.terms.iter().map(|t| t.coefficient.abs()).sum())
    }

    /// Same strings with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| PauliTerm::new(t.coefficient * factor, t.string))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_qubits: self.n_qubits,
            terms,
        })
    }

    /// Rescaled to unit one-norm.
    pub fn normalized(&self) -> Result<Self> {
        let lambda = self.one_norm()?;
        self.scaled(1.0 / lambda)
    }

    pub fn dense(&self) -> Result<CMatrix> {
        self.dense_with_limit(DENSE_QUBIT_LIMIT)
    }

    pub fn dense_with_limit(&self, limit: usize) -> Result<CMatrix> {
        if self.n_qubits > limit {
            return Err(Error::DenseLimit {
                n_qubits: self.n_qubits,
                limit,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = Array2::from_elem((dim, dim), ZERO);
        for term in &self.terms {
            let act = term.string.action();
            for col in 0..dim {
                let (row, ph) = act.column(col);
                m[[row, col]] += ph * term.coefficient;
            }
        }
        Ok(m)
    }

    /// Parses the `<coefficient> <pauli-word>` term-list format.
    ///
    /// `#` starts a comment; blank lines are skipped; terms with a zero
    /// coefficient are dropped.
    pub fn parse_term_list(text: &str) -> Result<Self> {
        let mut n_qubits: Option<usize> = None;
        let mut terms = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line, msg };
            let mut fields = content.split_whitespace();
            let coef_str = fields.next().expect("nonempty line");
            let word = fields
                .next()
                .ok_or_else(|| parse_err("missing pauli word".into()))?;
            if let Some(extra) = fields.next() {
                return Err(parse_err(format!("unexpected trailing field {extra:?}")));
            }
            let coefficient: f64 = coef_str
                .parse()
                .map_err(|_| parse_err(format!("bad coefficient {coef_str:?}")))?;
            if !coefficient.is_finite() {
                return Err(parse_err(format!("non-finite coefficient {coef_str:?}")));
            }
            let string: PauliString = word.parse().map_err(|e| parse_err(format!("{e}")))?;
            match n_qubits {
                None => n_qubits = Some(string.n_qubits()),
                Some(n) if n != string.n_qubits() => {
                    return Err(parse_err(format!(
                        "word length {} differs from {n}",
                        string.n_qubits()
                    )))
                }
                _ => {}
            }
            if !seen.insert((string.x, string.z)) {
                return Err(parse_err(format!("duplicate pauli string {string}")));
            }
            if coefficient == 0.0 {
                continue;
            }
            terms.push(PauliTerm {
                coefficient,
                string,
            });
        }
        let n = n_qubits.ok_or(Error::EmptyHamiltonian)?;
        Self::new(n, terms)
    }

    pub fn to_term_list(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{:.17e} {}\n", t.coefficient, t.string));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, I};
    use proptest::prelude::*;

    fn ps(word: &str) -> PauliString {
        word.parse().unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(PauliString::identity(8).weight(), 0);
        assert_eq!(ps("XIZ").weight(), 2);
        assert_eq!(ps("YYYYYY").weight(), 6);
    }

    #[test]
    fn commutation_examples() {
        assert!(ps("XZ").commutes(&ps("ZX")).unwrap());
        assert!(!ps("X").commutes(&ps("Z")).unwrap());
        let p = ps("XYZIY");
        assert!(p.commutes(&p).unwrap());
        assert!(matches!(
            ps("X").commutes(&ps("XX")),
            Err(Error::QubitMismatch(1, 2))
        ));
    }

    #[test]
    fn single_qubit_matrices() {
        let z = ps("Z").to_dense().unwrap();
        assert_eq!(z[[0, 0]], ONE);
        assert_eq!(z[[1, 1]], -ONE);
        assert_eq!(z[[0, 1]], ZERO);
        let y = ps("Y").to_dense().unwrap();
        assert_eq!(y[[0, 1]], -I);
        assert_eq!(y[[1, 0]], I);
        assert_eq!(y[[0, 0]], ZERO);
    }

    #[test]
    fn xx_is_antidiagonal() {
        let xx = ps("XX").to_dense().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r + c == 3 { ONE } else { ZERO };
                assert_eq!(xx[[r, c]], expected);
            }
        }
    }

    #[test]
    fn qubit_zero_is_leftmost_factor() {
        // X⊗I maps |00> to |10> (index 2).
        let xi = ps("XI").to_dense().unwrap();
        assert_eq!(xi[[2, 0]], ONE);
        let zi = ps("ZI").to_dense().unwrap();
        assert_eq!(zi[[2, 2]], -ONE);
        assert_eq!(zi[[1, 1]], ONE);
    }

    #[test]
    fn dense_limit_enforced() {
        let p = PauliString::identity(13);
        assert!(matches!(p.to_dense(), Err(Error::DenseLimit { .. })));
        assert!(p.to_dense_with_limit(13).is_ok());
    }

    #[test]
    fn all_two_qubit_pairs_commute_iff_matrices_do() {
        let letters = ['I', 'X', 'Y', 'Z'];
        let mut words = Vec::new();
        for a in letters {
            words.push(a.to_string());
        }
        let mut words2 = Vec::new();
        for a in letters {
            for b in letters {
                words2.push(format!("{a}{b}"));
            }
        }
        for set in [words, words2] {
            for p in &set {
                for q in &set {
                    let (pp, qq) = (ps(p), ps(q));
                    let (mp, mq) = (pp.to_dense().unwrap(), qq.to_dense().unwrap());
                    let dense_commute = max_abs_diff(&mp.dot(&mq), &mq.dot(&mp)) == 0.0;
                    assert_eq!(pp.commutes(&qq).unwrap(), dense_commute, "{p} {q}");
                }
            }
        }
    }

    #[test]
    fn hamiltonian_dense_examples() {
        let empty = Hamiltonian::new(1, vec![]).unwrap();
        assert!(empty.dense().unwrap().iter().all(|z| *z == ZERO));
        assert!(matches!(empty.one_norm(), Err(Error::EmptyHamiltonian)));

        let h = Hamiltonian::from_pairs(1, &[(0.5, "Z")]).unwrap();
        let m = h.dense().unwrap();
        assert_eq!(m[[0, 0]], C64::new(0.5, 0.0));
        assert_eq!(m[[1, 1]], C64::new(-0.5, 0.0));

        let h = Hamiltonian::from_pairs(1, &[(0.6, "X"), (0.4, "Z")]).unwrap();
        assert!((h.one_norm().unwrap() - 1.0).abs() < 1e-15);
        let (vals, _) = crate::linalg::eigh_checked(&h.dense().unwrap(), 1e-12).unwrap();
        let e = (0.36f64 + 0.16).sqrt();
        assert!((vals[0] + e).abs() < 1e-12 && (vals[1] - e).abs() < 1e-12);

        let neg = Hamiltonian::from_pairs(1, &[(-0.3, "Z")]).unwrap();
        assert!((neg.one_norm().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn duplicates_rejected() {
        let err = Hamiltonian::from_pairs(2, &[(0.1, "XZ"), (0.2, "XZ")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateString(_)));
    }

    #[test]
    fn zero_coefficient_rejected() {
        assert!(PauliTerm::new(0.0, ps("X")).is_err());
        assert!(PauliTerm::new(f64::NAN, ps("X")).is_err());
    }

    #[test]
    fn term_list_parsing() {
        let text = "# water-ish\n 0.5 XXI\n-0.25 IZZ   # trailing comment\n\n0.0 YII\n1e-3 ZZZ\n";
        let h = Hamiltonian::parse_term_list(text).unwrap();
        assert_eq!(h.n_qubits(), 3);
        assert_eq!(h.len(), 3);
        assert_eq!(h.terms()[1].coefficient, -0.25);
        assert_eq!(h.terms()[1].string.to_string(), "IZZ");
        let back = Hamiltonian::parse_term_list(&h.to_term_list()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn term_list_errors_carry_line_numbers() {
        let err = Hamiltonian::parse_term_list("0.5 XX\nabc ZZ\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Hamiltonian::parse_term_list("0.5 XX\n0.1 ZZZ\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = Hamiltonian::parse_term_list("0.5 XQ\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Hamiltonian::parse_term_list("0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            Hamiltonian::parse_term_list("# nothing\n"),
            Err(Error::EmptyHamiltonian)
        ));
    }

    #[test]
    fn exp_left_matches_dense_formula() {
        let theta = 0.731f64;
        for word in ["Z", "X", "Y", "XZY", "YYI", "IZZ", "III"] {
            let p = ps(word);
            let dense = p.to_dense().unwrap();
            let dim = dense.nrows();
            let expected = identity(dim).mapv(|z| z * theta.cos()) - dense.mapv(|z| z * I * theta.sin());
            let mut u = identity(dim);
            p.apply_exp_left(&mut u, theta);
            assert!(max_abs_diff(&u, &expected) < 1e-14, "{word}");
        }
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        let m = (1u64 << n) - 1;
        (any::<u64>(), any::<u64>()).prop_map(move |(x, z)| PauliString::new(n, x & m, z & m).unwrap())
    }

    proptest! {
        #[test]
        fn dense_is_involutory_hermitian(p in (1usize..=4).prop_flat_map(arb_string)) {
            let m = p.to_dense().unwrap();
            let id = identity(m.nrows());
            prop_assert!(max_abs_diff(&m.dot(&m), &id) < 1e-12);
            prop_assert!(crate::linalg::hermitian_deviation(&m) < 1e-15);
            prop_assert!(p.weight() <= p.n_qubits());
        }

        #[test]
        fn word_round_trip(p in (1usize..=10).prop_flat_map(arb_string)) {
            let back: PauliString = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn dense_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let h1 = Hamiltonian::from_pairs(2, &[(0.3, "XY"), (-0.7, "ZI")]).unwrap();
            let h2 = Hamiltonian::from_pairs(2, &[(1.1, "XY"), (0.2, "IY")]).unwrap();
            let lhs = h1.dense().unwrap().mapv(|z| z * a) + h2.dense().unwrap().mapv(|z| z * b);
            let mut pairs: Vec<(f64, &str)> = vec![(0.3 * a + 1.1 * b, "XY"), (-0.7 * a, "ZI"), (0.2 * b, "IY")];
            pairs.retain(|(c, _)| *c != 0.0);
            let combined = Hamiltonian::from_pairs(2, &pairs).unwrap();
            prop_assert!(max_abs_diff(&lhs, &combined.dense().unwrap()) < 1e-12);
        }
    }
}
