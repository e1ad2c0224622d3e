//! Cached sparse operators for the synchronization objective: the rotational
//! connection Laplacian, the translational data matrices, the reduced
//! incidence factorization behind the projector `Π`, and matrix-free products
//! with the data matrix `Q`.
//!
//! The quadratic form being minimized is `F(Y) = tr(Q Yᵀ Y)` with
//!
//! ```text
//! Q  = L(Gρ) + Qτ,       Qτ = Tᵀ Ω^{1/2} Π Ω^{1/2} T,
//! Π  = I_m − Ω^{1/2} A̲ᵀ L^{-ᵀ} L^{-1} A̲ Ω^{1/2},
//! ```
//!
//! where `A̲ Ω A̲ᵀ = L Lᵀ` is a sparse Cholesky factorization of the reduced
//! weighted Laplacian. `Q` and `Π` are never materialized; every product is
//! evaluated right-to-left through the cached sparse pieces. Two evaluation
//! paths for `Π` are kept — the cached Cholesky factor and a cached
//! orthogonal (QR) factorization of `Ω^{1/2} A̲ᵀ` — selectable per call or by
//! the configured default.

use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::graph::{MeasurementGraph, WeightKind};
use crate::sparse::{dense_mul_csr_transpose, CsrMatrix, SparseCholesky};
use crate::Result;

/// Which factorization backs products with the projector `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PiMethod {
    /// Two triangular solves against the cached Cholesky factor of `A̲ Ω A̲ᵀ`.
    #[default]
    Cholesky,
    /// Least-squares solve through a cached QR factorization of `Ω^{1/2} A̲ᵀ`.
    Qr,
}

/// All cached operators derived from a measurement graph.
pub struct DataMatrices {
    d: usize,
    n: usize,
    m: usize,
    method: PiMethod,
    /// `L(Gρ)`: symmetric dn×dn block connection Laplacian.
    rot_connection_laplacian: CsrMatrix,
    /// `T`: m×dn, row `e` holds `−t̃ₑᵀ` in the tail block of `e`.
    t_matrix: CsrMatrix,
    t_matrix_transpose: CsrMatrix,
    /// Diagonal of `Ω` (the translational precisions, in edge order).
    omega: Vec<f64>,
    sqrt_omega: Vec<f64>,
    /// `V`: n×dn cross-term matrix.
    v_matrix: CsrMatrix,
    /// `Σ`: dn×dn block diagonal of weighted translation outer products.
    sigma: CsrMatrix,
    /// Reduced incidence matrix `A̲` ((n−1)×m) and its transpose.
    a_reduced: CsrMatrix,
    a_reduced_transpose: CsrMatrix,
    /// Cholesky factor of `A̲ Ω A̲ᵀ` (the reduced translational Laplacian).
    l_factor: SparseCholesky,
    /// `L(Wτ)`: n×n translational weight Laplacian.
    tran_laplacian: CsrMatrix,
    /// Lazily cached QR factorization of `Ω^{1/2} A̲ᵀ` (m×(n−1)).
    qr_factor: OnceLock<nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Cheap upper bound on `‖Q‖₂`.
    scale_bound: f64,
}

impl DataMatrices {
    /// Builds every cached operator from the graph. Deterministic for a fixed
    /// input.
    pub fn build(g: &MeasurementGraph) -> Result<Self> {
        Self::build_with_method(g, PiMethod::default())
    }

    pub fn build_with_method(g: &MeasurementGraph, method: PiMethod) -> Result<Self> {
        let (d, n, m) = (g.dim(), g.num_vertices(), g.num_edges());

        // L(Gρ): diagonal blocks δᵢ I_d with δᵢ = Σ_{e ∋ i} κₑ, off-diagonal
        // blocks −κₑ R̃ₑ (and the transpose on the mirrored block).
        let mut rot_triplets: Vec<(usize, usize, f64)> = Vec::with_capacity((4 * m + n) * d * d);
        for e in g.edges() {
            let (i, j, k) = (e.tail, e.head, e.kappa);
            for a in 0..d {
                rot_triplets.push((i * d + a, i * d + a, k));
                rot_triplets.push((j * d + a, j * d + a, k));
                for b in 0..d {
                    let r_ab = e.rotation[(a, b)];
                    if r_ab != 0.0 {
                        rot_triplets.push((i * d + a, j * d + b, -k * r_ab));
                        rot_triplets.push((j * d + b, i * d + a, -k * r_ab));
                    }
                }
            }
        }
        let rot_connection_laplacian = CsrMatrix::from_triplets(d * n, d * n, rot_triplets);

        // T, Ω, V, Σ.
        let mut t_triplets = Vec::with_capacity(m * d);
        let mut v_triplets = Vec::with_capacity(2 * m * d);
        let mut sigma_triplets = Vec::with_capacity(m * d * d);
        let mut omega = Vec::with_capacity(m);
        for (eidx, e) in g.edges().iter().enumerate() {
            let (i, j, tau) = (e.tail, e.head, e.tau);
            omega.push(tau);
            for a in 0..d {
                let ta = e.translation[a];
                t_triplets.push((eidx, i * d + a, -ta));
                // V: row i (= tail) gets +τ t̃ᵀ in its own block column, row j
                // (= head) gets −τ t̃ᵀ in the tail's block column.
                v_triplets.push((i, i * d + a, tau * ta));
                v_triplets.push((j, i * d + a, -tau * ta));
                for b in 0..d {
                    sigma_triplets.push((i * d + a, i * d + b, tau * ta * e.translation[b]));
                }
            }
        }
        let t_matrix = CsrMatrix::from_triplets(m, d * n, t_triplets);
        let t_matrix_transpose = t_matrix.transpose();
        let v_matrix = CsrMatrix::from_triplets(n, d * n, v_triplets);
        let sigma = CsrMatrix::from_triplets(d * n, d * n, sigma_triplets);
        let sqrt_omega: Vec<f64> = omega.iter().map(|&t| t.sqrt()).collect();

        let a_reduced = g.reduced_incidence_matrix();
        let a_reduced_transpose = a_reduced.transpose();
        let tran_laplacian = g.weight_graph_laplacian(WeightKind::Translational);

        // A̲ Ω A̲ᵀ assembled directly from the edges (drop vertex n−1).
        let mut red_triplets = Vec::with_capacity(4 * m);
        for e in g.edges() {
            let (i, j, tau) = (e.tail, e.head, e.tau);
            if i < n - 1 {
                red_triplets.push((i, i, tau));
            }
            if j < n - 1 {
                red_triplets.push((j, j, tau));
            }
            if i < n - 1 && j < n - 1 {
                red_triplets.push((i, j, -tau));
                red_triplets.push((j, i, -tau));
            }
        }
        let reduced_laplacian = CsrMatrix::from_triplets(n - 1, n - 1, red_triplets);
        let l_factor = SparseCholesky::factor(&reduced_laplacian).map_err(|e| {
            Error::Numerical(format!("reduced Laplacian factorization failed: {e}"))
        })?;

        // ‖Q‖₂ ≤ ‖L(Gρ)‖∞ + ‖Ω^{1/2}T‖_F², since Qτ ⪯ (Ω^{1/2}T)ᵀ(Ω^{1/2}T).
        let qtau_bound: f64 = g
            .edges()
            .iter()
            .map(|e| e.tau * e.translation.norm_squared())
            .sum();
        let scale_bound = rot_connection_laplacian.inf_norm() + qtau_bound;

        Ok(DataMatrices {
            d,
            n,
            m,
            method,
            rot_connection_laplacian,
            t_matrix,
            t_matrix_transpose,
            omega,
            sqrt_omega,
            v_matrix,
            sigma,
            a_reduced,
            a_reduced_transpose,
            l_factor,
            tran_laplacian,
            qr_factor: OnceLock::new(),
            scale_bound,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d, self.n, self.m)
    }

    pub fn method(&self) -> PiMethod {
        self.method
    }

    pub fn set_method(&mut self, method: PiMethod) {
        self.method = method;
    }

    pub fn rot_connection_laplacian(&self) -> &CsrMatrix {
        &self.rot_connection_laplacian
    }

    pub fn tran_laplacian(&self) -> &CsrMatrix {
        &self.tran_laplacian
    }

    pub fn t_matrix(&self) -> &CsrMatrix {
        &self.t_matrix
    }

    pub fn v_matrix(&self) -> &CsrMatrix {
        &self.v_matrix
    }

    pub fn sigma(&self) -> &CsrMatrix {
        &self.sigma
    }

    pub fn a_reduced(&self) -> &CsrMatrix {
        &self.a_reduced
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn l_factor(&self) -> &SparseCholesky {
        &self.l_factor
    }

    /// Cheap upper bound on the spectral norm of `Q`.
    pub fn scale_bound(&self) -> f64 {
        self.scale_bound
    }

    fn qr(&self) -> Result<&nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        if self.m * (self.n - 1) > 50_000_000 {
            return Err(Error::SizeGuard(format!(
                "QR path needs a dense {}x{} factor; use the Cholesky path for this problem size",
                self.m,
                self.n - 1
            )));
        }
        Ok(self.qr_factor.get_or_init(|| {
            // Ω^{1/2} A̲ᵀ, dense m×(n−1).
            let mut b = self.a_reduced_transpose.to_dense();
            for e in 0..self.m {
                let s = self.sqrt_omega[e];
                for c in 0..self.n - 1 {
                    b[(e, c)] *= s;
                }
            }
            b.qr()
        }))
    }

    /// Orthogonal projection of each column of `x` onto `ker(A Ω^{1/2})`.
    ///
    /// `π(v) = v − Ω^{1/2} A̲ᵀ w*` where `w*` minimizes `‖v − Ω^{1/2} A̲ᵀ w‖`;
    /// the Cholesky path forms `w*` by two triangular solves against the
    /// factor of `A̲ Ω A̲ᵀ`, the QR path solves the least-squares problem with
    /// the cached orthogonal factor.
    pub fn apply_pi(&self, x: &DMatrix<f64>, method: PiMethod) -> Result<DMatrix<f64>> {
        if x.nrows() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "apply_pi expects {} rows, got {}",
                self.m,
                x.nrows()
            )));
        }
        let k = x.ncols();
        let mut out = x.clone();
        match method {
            PiMethod::Cholesky => {
                for c in 0..k {
                    let mut u: Vec<f64> = (0..self.m).map(|e| self.sqrt_omega[e] * x[(e, c)]).collect();
                    let s = self.a_reduced.mul_vec(&u);
                    let w = self.l_factor.solve(&s);
                    u = self.a_reduced_transpose.mul_vec(&w);
                    for e in 0..self.m {
                        out[(e, c)] -= self.sqrt_omega[e] * u[e];
                    }
                }
            }
            PiMethod::Qr => {
                let qr = self.qr()?;
                let r_upper = qr.r();
                for c in 0..k {
                    let mut v = x.column(c).clone_owned();
                    qr.q_tr_mul(&mut v);
                    let rhs = v.rows(0, self.n - 1).clone_owned();
                    let w = r_upper
                        .solve_upper_triangular(&rhs)
                        .ok_or_else(|| Error::Numerical("singular R factor in QR path".into()))?;
                    let bw = self.a_reduced_transpose.mul_vec(w.as_slice());
                    for e in 0..self.m {
                        out[(e, c)] -= self.sqrt_omega[e] * bw[e];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Y ↦ Y·Qτ`, evaluated right-to-left without materializing `Qτ`.
    pub fn apply_qtau(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(y)?;
        // u = Y Tᵀ Ω^{1/2}  (r×m)
        let mut u = dense_mul_csr_transpose(y, &self.t_matrix);
        self.scale_columns(&mut u);
        // apply Π columnwise (as an m×r matrix)
        let pu = self.apply_pi(&u.transpose(), self.method)?;
        // back out: (Ω^{1/2} · Πu)ᵀ · T
        let mut w = pu.transpose();
        self.scale_columns(&mut w);
        Ok(dense_mul_csr_transpose(&w, &self.t_matrix_transpose))
    }

    /// `Y ↦ Y·Q = Y·L(Gρ) + Y·Qτ`.
    pub fn apply_q(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(y)?;
        let mut out = dense_mul_csr_transpose(y, &self.rot_connection_laplacian);
        out += self.apply_qtau(y)?;
        Ok(out)
    }

    /// `F(Y) = tr(Q Yᵀ Y) = ⟨Y, Y·Q⟩`.
    pub fn evaluate_objective(&self, y: &DMatrix<f64>) -> Result<f64> {
        let qy = self.apply_q(y)?;
        Ok(y.dot(&qy))
    }

    fn scale_columns(&self, u: &mut DMatrix<f64>) {
        let r = u.nrows();
        debug_assert_eq!(u.ncols(), self.m);
        let data = u.as_mut_slice();
        for e in 0..self.m {
            let s = self.sqrt_omega[e];
            for i in 0..r {
                data[e * r + i] *= s;
            }
        }
    }

    fn check_width(&self, y: &DMatrix<f64>) -> Result<()> {
        if y.ncols() != self.d * self.n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns (d·n), got {}",
                self.d * self.n,
                y.ncols()
            )));
        }
        Ok(())
    }

    /// The full `(d+1)n × (d+1)n` block matrix
    /// `M = [L(Wτ), V; Vᵀ, L(Gρ) + Σ]`, used by translation recovery
    /// diagnostics and the full-objective oracle.
    pub fn build_full_m(&self) -> CsrMatrix {
        let (n, dn) = (self.n, self.d * self.n);
        let size = n + dn;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for r in 0..n {
            let (cols, vals) = self.tran_laplacian.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        for r in 0..n {
            let (cols, vals) = self.v_matrix.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((r, n + c, v));
                triplets.push((n + c, r, v));
            }
        }
        for r in 0..dn {
            let (cols, vals) = self.rot_connection_laplacian.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (n + r, n + c, v)));
            let (cols, vals) = self.sigma.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (n + r, n + c, v)));
        }
        CsrMatrix::from_triplets(size, size, triplets)
    }

    /// Dense `Π` built independently of the cached factorizations
    /// (SVD pseudoinverse of the full weighted incidence matrix). Diagnostic.
    pub fn dense_pi(&self, full_incidence: &CsrMatrix) -> Result<DMatrix<f64>> {
        if self.m > 2000 {
            return Err(Error::SizeGuard(format!(
                "dense_pi is limited to m ≤ 2000, got {}",
                self.m
            )));
        }
        let mut aw = full_incidence.to_dense();
        for e in 0..self.m {
            let s = self.sqrt_omega[e];
            for r in 0..self.n {
                aw[(r, e)] *= s;
            }
        }
        let pinv = aw
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(format!("pseudoinverse failed: {e}")))?;
        Ok(DMatrix::identity(self.m, self.m) - pinv * aw)
    }

    /// Dense `Q`, for diagnostics and oracle tests. Guarded to `dn ≤ 2000`.
    pub fn dense_q(&self, full_incidence: &CsrMatrix) -> Result<DMatrix<f64>> {
        let dn = self.d * self.n;
        if dn > 2000 {
            return Err(Error::SizeGuard(format!(
                "dense_q is limited to dn ≤ 2000, got {dn}"
            )));
        }
        let pi = self.dense_pi(full_incidence)?;
        let t = self.t_matrix.to_dense();
        let mut wt = t.clone();
        for e in 0..self.m {
            let s = self.sqrt_omega[e];
            for c in 0..dn {
                wt[(e, c)] *= s;
            }
        }
        Ok(self.rot_connection_laplacian.to_dense() + wt.transpose() * pi * wt)
    }

    /// Writes every cached matrix in Matrix Market coordinate format, one
    /// file per matrix, into `dir`.
    pub fn dump_matrix_market(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let entries: [(&str, &CsrMatrix); 6] = [
            ("rot_connection_laplacian", &self.rot_connection_laplacian),
            ("t_matrix", &self.t_matrix),
            ("v_matrix", &self.v_matrix),
            ("sigma", &self.sigma),
            ("a_reduced", &self.a_reduced),
            ("tran_laplacian", &self.tran_laplacian),
        ];
        for (name, matrix) in entries {
            write_matrix_market(matrix, &dir.join(format!("{name}.mtx")))?;
        }
        let omega = CsrMatrix::from_triplets(
            self.m,
            self.m,
            self.omega.iter().enumerate().map(|(e, &t)| (e, e, t)),
        );
        write_matrix_market(&omega, &dir.join("omega.mtx"))?;
        Ok(())
    }

    /// Solves `L(Wτ)-reduced · X = rhs` for translation recovery; `rhs` holds
    /// one column per right-hand side of length n−1.
    pub(crate) fn solve_reduced_tran_laplacian(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for c in 0..rhs.ncols() {
            let col: Vec<f64> = rhs.column(c).iter().copied().collect();
            let sol = self.l_factor.solve(&col);
            for (r, v) in sol.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

fn write_matrix_market(m: &CsrMatrix, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(f, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for r in 0..m.nrows() {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(f, "{} {} {v}", r + 1, c + 1)?;
        }
    }
    Ok(())
}

/// Stacks rotation blocks `R = (R₁ … Rₙ)` into the d×dn block row used by the
/// data-matrix products.
pub fn stack_rotations(rotations: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = rotations[0].nrows();
    let n = rotations.len();
    let mut r = DMatrix::zeros(d, d * n);
    for (i, rot) in rotations.iter().enumerate() {
        r.view_mut((0, i * d), (d, d)).copy_from(rot);
    }
    r
}

/// Splits a d×dn block row into its d×d blocks.
pub fn split_blocks(r: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let d = r.nrows();
    let n = r.ncols() / d;
    (0..n).map(|i| r.view((0, i * d), (d, d)).clone_owned()).collect()
}
