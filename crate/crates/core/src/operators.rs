//! Dense operator algebra on truncated tensor-product Hilbert spaces.
//!
//! Every operator carries the [`SpaceLayout`] it acts on. Kronecker products
//! follow layout order with the first factor most significant, so the basis
//! index of a product state `|i0, i1, ..⟩` is `((i0 * d1 + i1) * d2 + ..)`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of the double-quantum-dot charge qubit factor.
pub const DQD: &str = "DQD";
/// Label of the transmon factor.
pub const TRANSMON: &str = "tr";
/// Label of the SQUID-array resonator factor.
pub const SQUID: &str = "Sq";
/// Label of the 50 Ω coplanar readout resonator factor.
pub const CPW: &str = "50Ω";

/// Default Fock cutoff of the SQUID-array resonator.
pub const DEFAULT_N_SQ: usize = 5;
/// Default Fock cutoff of the 50 Ω resonator.
pub const DEFAULT_N_50: usize = 3;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.len() != labels.len() {
            return Err(Error::InvalidDimension(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidDimension(format!("factor dims must be >= 1, got {dims:?}")));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidArgument(format!("duplicate subsystem label `{l}`")));
            }
        }
        Ok(Self { dims, labels })
    }

    /// The canonical (DQD, transmon, SQUID array, 50 Ω) layout.
    pub fn canonical(n_tr: usize, n_sq: usize, n_50: usize) -> Result<Self> {
        Self::new(vec![2, n_tr, n_sq, n_50], vec![DQD, TRANSMON, SQUID, CPW])
    }

    /// Canonical ordering restricted to a subset of factors; `None` drops the factor.
    pub fn canonical_subset(
        dqd: bool,
        n_tr: Option<usize>,
        n_sq: Option<usize>,
        n_50: Option<usize>,
    ) -> Result<Self> {
        let mut dims = Vec::new();
        let mut labels = Vec::new();
        if dqd {
            dims.push(2);
            labels.push(DQD);
        }
        for (d, l) in [(n_tr, TRANSMON), (n_sq, SQUID), (n_50, CPW)] {
            if let Some(d) = d {
                dims.push(d);
                labels.push(l);
            }
        }
        Self::new(dims, labels)
    }

    /// Single-factor layout used by local operators before embedding.
    pub fn single(dim: usize) -> Self {
        Self { dims: vec![dim], labels: vec!["local".to_string()] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.position(label).map(|i| self.dims[i])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    /// Flat basis index of a product state given one local index per factor.
    pub fn basis_index(&self, local: &[usize]) -> Result<usize> {
        if local.len() != self.dims.len() {
            return Err(Error::InvalidDimension(format!(
                "expected {} local indices, got {}",
                self.dims.len(),
                local.len()
            )));
        }
        let mut idx = 0;
        for (&i, &d) in local.iter().zip(&self.dims) {
            if i >= d {
                return Err(Error::InvalidDimension(format!("local index {i} >= dim {d}")));
            }
            idx = idx * d + i;
        }
        Ok(idx)
    }
}

/// Dense complex square matrix tagged with its tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn new(layout: SpaceLayout, entries: DMatrix<Complex64>) -> Result<Self> {
        let n = layout.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, layout needs {n}x{n}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { layout, entries })
    }

    /// Local operator from a real matrix given in row-major order.
    pub fn from_real(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::InvalidDimension(format!("need {} entries, got {}", dim * dim, rows.len())));
        }
        let m = DMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(SpaceLayout::single(dim), m)
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout, entries: DMatrix::from_element(n, n, C0) }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout, entries: DMatrix::identity(n, n) }
    }

    pub fn diagonal(layout: SpaceLayout, diag: &[f64]) -> Result<Self> {
        let n = layout.total_dim();
        if diag.len() != n {
            return Err(Error::InvalidDimension(format!("diagonal has {} entries, need {n}", diag.len())));
        }
        let v = DVector::from_iterator(n, diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(Self { layout, entries: DMatrix::from_diagonal(&v) })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), entries: self.entries.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { layout: self.layout.clone(), entries: &self.entries * Complex64::new(s, 0.0) }
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self { layout: self.layout.clone(), entries: &self.entries * s }
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// max |M - M†| over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(self.try_mul(other)? - other.try_mul(self)?)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { layout: self.layout.clone(), entries: &self.entries * &other.entries })
    }

    /// Kronecker product; the result layout concatenates both layouts.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let mut dims = self.layout.dims.clone();
        dims.extend_from_slice(&other.layout.dims);
        let mut labels = self.layout.labels.clone();
        labels.extend(other.layout.labels.iter().cloned());
        Self::new(SpaceLayout::new(dims, labels)?, self.entries.kronecker(&other.entries))
    }

    /// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
    pub fn eigh(&self) -> Result<Eigh> {
        eigh(&self.entries)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::InvalidDimension(format!(
                "layout mismatch: {:?} vs {:?}",
                self.layout.dims, other.layout.dims
            )));
        }
        Ok(())
    }
}

// Arithmetic between operators of the same layout. Mismatched layouts are a
// programming error, so these panic; use `try_mul` for fallible products.
impl Add for OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator sum");
        Self { layout: self.layout, entries: self.entries + rhs.entries }
    }
}

impl Sub for OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator difference");
        Self { layout: self.layout, entries: self.entries - rhs.entries }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Self) -> OperatorMatrix {
        self.try_mul(rhs).expect("layout mismatch in operator product")
    }
}

/// Bosonic annihilation operator truncated to `dim` Fock states.
pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("annihilation needs dim >= 2, got {dim}")));
    }
    let mut m = DMatrix::from_element(dim, dim, C0);
    for n in 0..dim - 1 {
        m[(n, n + 1)] = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(SpaceLayout::single(dim), m)
}

pub fn creation(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<OperatorMatrix> {
    let d: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    OperatorMatrix::diagonal(SpaceLayout::single(dim), &d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// Raising operator σ+ = (σx + iσy)/2.
    Plus,
    /// Lowering operator σ- = (σx - iσy)/2.
    Minus,
}

/// 2×2 Pauli and ladder matrices. Basis order is (|excited⟩, |ground⟩),
/// so σz = diag(1, -1) and σ+σ- projects on the excited state.
pub fn pauli(which: Pauli) -> OperatorMatrix {
    let i = Complex64::new(0.0, 1.0);
    let m = match which {
        Pauli::X => DMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[C0, -i, i, C0]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1]),
        Pauli::Plus => DMatrix::from_row_slice(2, 2, &[C0, C1, C0, C0]),
        Pauli::Minus => DMatrix::from_row_slice(2, 2, &[C0, C0, C1, C0]),
    };
    OperatorMatrix { layout: SpaceLayout::single(2), entries: m }
}

/// Lift a single-factor operator to the full layout: I ⊗ … ⊗ op ⊗ … ⊗ I.
pub fn embed(op: &OperatorMatrix, target: &str, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    let pos = layout
        .position(target)
        .ok_or_else(|| Error::UnknownSubsystem(target.to_string()))?;
    let d = layout.dims[pos];
    if op.dim() != d {
        return Err(Error::InvalidDimension(format!(
            "operator has dim {} but factor `{target}` has dim {d}",
            op.dim()
        )));
    }
    let left: usize = layout.dims[..pos].iter().product();
    let right: usize = layout.dims[pos + 1..].iter().product();
    let n = layout.total_dim();
    let mut out = DMatrix::from_element(n, n, C0);
    // out[(l*d + i)*right + r, (l*d + j)*right + r] = op[i, j]
    for i in 0..d {
        for j in 0..d {
            let v = op.entries[(i, j)];
            if v == C0 {
                continue;
            }
            for l in 0..left {
                let bi = (l * d + i) * right;
                let bj = (l * d + j) * right;
                for r in 0..right {
                    out[(bi + r, bj + r)] = v;
                }
            }
        }
    }
    OperatorMatrix::new(layout.clone(), out)
}

/// Eigenvalues (ascending) and matching column eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Hermitian eigensolver. Real-valued input is routed through the real
/// symmetric solver.
pub fn eigh(m: &DMatrix<Complex64>) -> Result<Eigh> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidDimension("eigh needs a square matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Diagonalization("non-finite matrix entry".into()));
    }
    let real = m.iter().all(|z| z.im == 0.0);
    let (vals, vecs) = if real {
        let r = m.map(|z| z.re);
        let e = nalgebra::linalg::SymmetricEigen::try_new(r, 1e-14, 10_000)
            .ok_or_else(|| Error::Diagonalization("real symmetric solver did not converge".into()))?;
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let e = nalgebra::linalg::SymmetricEigen::try_new(m.clone(), 1e-14, 10_000)
            .ok_or_else(|| Error::Diagonalization("hermitian solver did not converge".into()))?;
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Ascending eigenvalues of a real symmetric matrix, without eigenvectors.
pub fn eigvalsh_real(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension("eigvalsh needs a square matrix".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diagonalization("non-finite matrix entry".into()));
    }
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
