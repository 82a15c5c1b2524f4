//! P2 Lagrange finite elements on `]0,1[` with homogeneous Dirichlet
//! conditions: weighted stiffness assembly, banded Cholesky solves, and
//! energy norms.
//!
//! Degrees of freedom are the interior nodes, enumerated left to right with
//! vertex and element-midpoint nodes interleaved, so a mesh of `m` elements
//! carries `2m - 1` dofs and every stiffness matrix has bandwidth 2.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Tolerance for matching weight-function breakpoints to mesh breakpoints.
const ALIGNMENT_TOL: f64 = 1e-13;

/// A partition of `[0,1]` into elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    breakpoints: Vec<f64>,
}

impl Mesh {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self, Error> {
        if breakpoints.len() < 2 {
            return Err(Error::Mesh("need at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::Mesh("endpoints must be exactly 0 and 1".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] - w[0] > 1e-12) {
                return Err(Error::Mesh(format!(
                    "breakpoints must increase by more than 1e-12, got [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
        Ok(Mesh { breakpoints })
    }

    /// Uniform mesh with `m` elements.
    pub fn uniform(m: usize) -> Self {
        assert!(m >= 1);
        let breakpoints = (0..=m).map(|i| i as f64 / m as f64).collect();
        Mesh::new(breakpoints).expect("uniform mesh is valid")
    }

    /// Mesh through the given interior points, bisected until it has at least
    /// `min_elements` elements.
    pub fn refined(points: &[f64], min_elements: usize) -> Result<Self, Error> {
        let mut breakpoints: Vec<f64> = points
            .iter()
            .copied()
            .filter(|&x| x > 0.0 && x < 1.0)
            .chain([0.0, 1.0])
            .collect();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        while breakpoints.len() - 1 < min_elements {
            let mut refined = Vec::with_capacity(2 * breakpoints.len());
            for w in breakpoints.windows(2) {
                refined.push(w[0]);
                refined.push(0.5 * (w[0] + w[1]));
            }
            refined.push(*breakpoints.last().unwrap());
            breakpoints = refined;
        }
        Mesh::new(breakpoints)
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn element(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    fn find_breakpoint(&self, x: f64) -> Option<usize> {
        let pos = self
            .breakpoints
            .partition_point(|&b| b < x - ALIGNMENT_TOL);
        if pos < self.breakpoints.len() && (self.breakpoints[pos] - x).abs() <= ALIGNMENT_TOL {
            Some(pos)
        } else {
            None
        }
    }
}

/// P2 space on a mesh: `dof_count = 2m - 1` interior nodes.
#[derive(Clone, Debug)]
pub struct FemSpace {
    mesh: Mesh,
    dof_count: usize,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Self {
        let dof_count = 2 * mesh.num_elements() - 1;
        FemSpace { mesh, dof_count }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// Global dofs `[left vertex, midpoint, right vertex]` of element `i`;
    /// boundary vertices carry no dof.
    pub fn element_dofs(&self, i: usize) -> [Option<usize>; 3] {
        let m = self.mesh.num_elements();
        let left = if i == 0 { None } else { Some(2 * i - 1) };
        let right = if i + 1 == m { None } else { Some(2 * i + 1) };
        [left, Some(2 * i), right]
    }

    /// Spatial coordinate of each dof, in dof order.
    pub fn dof_coordinates(&self) -> Vec<f64> {
        (0..self.dof_count)
            .map(|d| {
                if d % 2 == 0 {
                    let (a, b) = self.mesh.element(d / 2);
                    0.5 * (a + b)
                } else {
                    self.mesh.breakpoints[(d + 1) / 2]
                }
            })
            .collect()
    }

    /// Interpolates a piecewise-linear function (given on mesh-aligned
    /// breakpoints) onto the dof vector.
    pub fn interpolate_linear(&self, breakpoints: &[f64], values: &[f64]) -> Vec<f64> {
        let eval = |x: f64| piecewise_linear_eval(breakpoints, values, x);
        self.dof_coordinates().iter().map(|&x| eval(x)).collect()
    }
}

/// Constructs the P2 space, validating the mesh.
pub fn build_space(breakpoints: Vec<f64>) -> Result<FemSpace, Error> {
    Ok(FemSpace::new(Mesh::new(breakpoints)?))
}

fn piecewise_linear_eval(breakpoints: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(breakpoints.len(), values.len());
    if breakpoints.is_empty() {
        return 0.0;
    }
    if x <= breakpoints[0] {
        return values[0];
    }
    if x >= *breakpoints.last().unwrap() {
        return *values.last().unwrap();
    }
    let hi = breakpoints.partition_point(|&b| b <= x);
    let (x0, x1) = (breakpoints[hi - 1], breakpoints[hi]);
    let t = (x - x0) / (x1 - x0);
    values[hi - 1] * (1.0 - t) + values[hi] * t
}

/// Scalar weight functions appearing as integrands `w` in
/// `int w phi_i' phi_j' dx`: the background coefficient, the expansion
/// functions `psi_j`, and their linear combinations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightFn {
    Constant(f64),
    /// Piecewise constant on `[breakpoints_0, breakpoints_last]`, zero
    /// outside that range; `values[k]` holds on `[b_k, b_{k+1})`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// `x -> amplitude * sin(frequency * pi * x)`.
    Sine { amplitude: f64, frequency: u32 },
    Sum(Vec<WeightFn>),
}

impl WeightFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFn::Constant(c) => *c,
            WeightFn::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                if breakpoints.is_empty() || x < breakpoints[0] || x >= *breakpoints.last().unwrap()
                {
                    return 0.0;
                }
                let cell = breakpoints.partition_point(|&b| b <= x) - 1;
                values[cell.min(values.len() - 1)]
            }
            WeightFn::Sine {
                amplitude,
                frequency,
            } => amplitude * (f64::from(*frequency) * std::f64::consts::PI * x).sin(),
            WeightFn::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }

    /// Range of the function over `[0,1]`; interval arithmetic for sums, so
    /// conservative (never narrower than the true range).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            WeightFn::Constant(c) => (*c, *c),
            WeightFn::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in values {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                // zero outside the covered range
                let covers_domain = !breakpoints.is_empty()
                    && breakpoints[0] <= ALIGNMENT_TOL
                    && *breakpoints.last().unwrap() >= 1.0 - ALIGNMENT_TOL;
                if !covers_domain || values.is_empty() {
                    lo = lo.min(0.0);
                    hi = hi.max(0.0);
                }
                (lo, hi)
            }
            WeightFn::Sine {
                amplitude,
                frequency,
            } => {
                // sin(k pi x) on [0,1] spans [0,1] for k = 1, [-1,1] for k >= 2
                let (smin, smax) = if *frequency <= 1 { (0.0, 1.0) } else { (-1.0, 1.0) };
                if *amplitude >= 0.0 {
                    (amplitude * smin, amplitude * smax)
                } else {
                    (amplitude * smax, amplitude * smin)
                }
            }
            WeightFn::Sum(parts) => parts.iter().fold((0.0, 0.0), |(lo, hi), p| {
                let (plo, phi) = p.bounds();
                (lo + plo, hi + phi)
            }),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.bounds().0
    }

    pub fn sup_norm(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    pub fn scale(&self, factor: f64) -> WeightFn {
        match self {
            WeightFn::Constant(c) => WeightFn::Constant(c * factor),
            WeightFn::PiecewiseConstant {
                breakpoints,
                values,
            } => WeightFn::PiecewiseConstant {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
            WeightFn::Sine {
                amplitude,
                frequency,
            } => WeightFn::Sine {
                amplitude: amplitude * factor,
                frequency: *frequency,
            },
            WeightFn::Sum(parts) => WeightFn::Sum(parts.iter().map(|p| p.scale(factor)).collect()),
        }
    }

    /// True when the function is piecewise constant (so assembly is exact).
    pub fn is_piecewise_constant(&self) -> bool {
        match self {
            WeightFn::Constant(_) | WeightFn::PiecewiseConstant { .. } => true,
            WeightFn::Sine { .. } => false,
            WeightFn::Sum(parts) => parts.iter().all(|p| p.is_piecewise_constant()),
        }
    }

    /// Collects all interior breakpoints of piecewise-constant parts.
    pub fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            WeightFn::PiecewiseConstant { breakpoints, .. } => {
                out.extend_from_slice(breakpoints);
            }
            WeightFn::Sum(parts) => {
                for p in parts {
                    p.collect_breakpoints(out);
                }
            }
            _ => {}
        }
    }
}

/// Symmetric banded matrix with bandwidth 2 (the P2 stiffness profile).
/// Stores the diagonal and the two subdiagonals; `active` is the row range
/// outside of which the matrix is identically zero, which keeps products with
/// locally supported weights cheap.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    n: usize,
    diag: Vec<f64>,
    sub1: Vec<f64>,
    sub2: Vec<f64>,
    active_lo: usize,
    active_hi: usize,
}

impl SpdMatrix {
    pub fn zeros(n: usize) -> Self {
        SpdMatrix {
            n,
            diag: vec![0.0; n],
            sub1: vec![0.0; n],
            sub2: vec![0.0; n],
            active_lo: n,
            active_hi: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SpdMatrix::zeros(n);
        m.diag.iter_mut().for_each(|d| *d = 1.0);
        m.active_lo = 0;
        m.active_hi = n;
        m
    }

    fn mark_active(&mut self, row: usize) {
        self.active_lo = self.active_lo.min(row);
        self.active_hi = self.active_hi.max(row + 1);
    }

    /// Adds `v` at `(i, j)`; only the lower triangle is stored.
    pub fn add_entry(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        match r - c {
            0 => self.diag[r] += v,
            1 => self.sub1[r] += v,
            2 => self.sub2[r] += v,
            _ => panic!("entry ({i},{j}) outside bandwidth 2"),
        }
        self.mark_active(i);
        self.mark_active(j);
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        match r - c {
            0 => self.diag[r],
            1 => self.sub1[r],
            2 => self.sub2[r],
            _ => 0.0,
        }
    }

    pub fn add_assign(&mut self, other: &SpdMatrix) {
        assert_eq!(self.n, other.n);
        for i in other.active_lo..other.active_hi {
            self.diag[i] += other.diag[i];
            self.sub1[i] += other.sub1[i];
            self.sub2[i] += other.sub2[i];
        }
        self.active_lo = self.active_lo.min(other.active_lo);
        self.active_hi = self.active_hi.max(other.active_hi);
    }

    /// `y += coeff * A x`.
    pub fn matvec_add(&self, x: &[f64], coeff: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in self.active_lo..self.active_hi {
            let mut acc = self.diag[i] * x[i];
            if i >= 1 {
                acc += self.sub1[i] * x[i - 1];
            }
            if i >= 2 {
                acc += self.sub2[i] * x[i - 2];
            }
            if i + 1 < self.n {
                acc += self.sub1[i + 1] * x[i + 1];
            }
            if i + 2 < self.n {
                acc += self.sub2[i + 2] * x[i + 2];
            }
            y[i] += coeff * acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_add(x, 1.0, &mut y);
        y
    }

    /// `x^T A x`, using only the active band.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for i in self.active_lo..self.active_hi {
            acc += self.diag[i] * x[i] * x[i];
            if i >= 1 {
                acc += 2.0 * self.sub1[i] * x[i] * x[i - 1];
            }
            if i >= 2 {
                acc += 2.0 * self.sub2[i] * x[i] * x[i - 2];
            }
        }
        acc
    }

    /// Banded Cholesky factorization `A = L L^T`. Fails with the pivot row
    /// index when the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky, Error> {
        let n = self.n;
        let mut l0 = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            if i >= 2 {
                l2[i] = self.sub2[i] / l0[i - 2];
            }
            if i >= 1 {
                let mut v = self.sub1[i];
                if i >= 2 {
                    v -= l2[i] * l1[i - 1];
                }
                l1[i] = v / l0[i - 1];
            }
            let t = self.diag[i] - l1[i] * l1[i] - l2[i] * l2[i];
            if !(t > 0.0) {
                return Err(Error::NotSpd { index: i });
            }
            l0[i] = t.sqrt();
        }
        Ok(BandedCholesky { n, l0, l1, l2 })
    }
}

/// Cholesky factor of a banded SPD matrix; reused read-only across many
/// right-hand sides.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    l0: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let mut v = x[i];
            if i >= 1 {
                v -= self.l1[i] * x[i - 1];
            }
            if i >= 2 {
                v -= self.l2[i] * x[i - 2];
            }
            x[i] = v / self.l0[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.l1[i + 1] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.l2[i + 2] * x[i + 2];
            }
            x[i] = v / self.l0[i];
        }
    }
}

// P2 shape function derivatives on the reference element [0,1].
fn shape_grad(xi: f64) -> [f64; 3] {
    [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0]
}

/// Reference-element stiffness for a unit constant weight, scaled by `1/(3h)`
/// at assembly time.
const LOCAL_STIFFNESS: [[f64; 3]; 3] = [
    [7.0, -8.0, 1.0],
    [-8.0, 16.0, -8.0],
    [1.0, -8.0, 7.0],
];

/// Assembles the weighted stiffness matrix with entries
/// `int_0^1 w phi_i' phi_j' dx`.
///
/// Piecewise-constant weights must have all breakpoints on mesh breakpoints
/// (the integration is then exact); smooth sine weights use per-element
/// Gauss quadrature with `GAUSS_POINTS` nodes.
pub fn assemble_weighted_stiffness(space: &FemSpace, w: &WeightFn) -> Result<SpdMatrix, Error> {
    assemble_with_quadrature(space, w, GAUSS_POINTS)
}

/// Default per-element Gauss rule for smooth weights.
pub const GAUSS_POINTS: usize = 5;

/// Assembly with an explicit Gauss rule for smooth weights; used by the
/// quadrature sufficiency checks.
pub fn assemble_with_quadrature(
    space: &FemSpace,
    w: &WeightFn,
    gauss_points: usize,
) -> Result<SpdMatrix, Error> {
    if let WeightFn::Sum(parts) = w {
        let mut acc = SpdMatrix::zeros(space.dof_count());
        for part in parts {
            acc.add_assign(&assemble_with_quadrature(space, part, gauss_points)?);
        }
        return Ok(acc);
    }

    check_alignment(space.mesh(), w)?;
    let mut a = SpdMatrix::zeros(space.dof_count());
    let gauss = gauss_legendre(gauss_points);
    // piecewise-constant weights vanish outside their breakpoint range, so
    // only the covered elements are visited
    let element_range = match w {
        WeightFn::PiecewiseConstant { breakpoints, .. } if !breakpoints.is_empty() => {
            let first = space
                .mesh()
                .find_breakpoint(breakpoints[0])
                .expect("alignment checked");
            let last = space
                .mesh()
                .find_breakpoint(*breakpoints.last().unwrap())
                .expect("alignment checked");
            first..last
        }
        _ => 0..space.mesh().num_elements(),
    };
    for e in element_range {
        let (x0, x1) = space.mesh().element(e);
        let h = x1 - x0;
        let dofs = space.element_dofs(e);

        let mut local = [[0.0; 3]; 3];
        match w {
            WeightFn::Constant(_) | WeightFn::PiecewiseConstant { .. } => {
                let c = w.eval(0.5 * (x0 + x1));
                if c == 0.0 {
                    continue;
                }
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] = c * LOCAL_STIFFNESS[i][j] / (3.0 * h);
                    }
                }
            }
            WeightFn::Sine { .. } => {
                for &(t, wt) in &gauss {
                    let xi = 0.5 * (t + 1.0);
                    let x = x0 + h * xi;
                    let grads = shape_grad(xi);
                    let factor = wt * w.eval(x) / (2.0 * h);
                    for i in 0..3 {
                        for j in 0..3 {
                            local[i][j] += factor * grads[i] * grads[j];
                        }
                    }
                }
            }
            WeightFn::Sum(_) => unreachable!("handled above"),
        }

        for (i, di) in dofs.iter().enumerate() {
            let Some(di) = di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                let Some(dj) = dj else { continue };
                if dj <= di {
                    a.add_entry(*di, *dj, local[i][j]);
                }
            }
        }
    }
    Ok(a)
}

fn check_alignment(mesh: &Mesh, w: &WeightFn) -> Result<(), Error> {
    let mut points = Vec::new();
    w.collect_breakpoints(&mut points);
    for p in points {
        if mesh.find_breakpoint(p).is_none() {
            return Err(Error::Alignment { value: p });
        }
    }
    Ok(())
}

/// Load vector for a constant right-hand side: `b_i = c int phi_i dx`,
/// integrated exactly per element.
pub fn load_constant(space: &FemSpace, c: f64) -> Vec<f64> {
    let mut b = vec![0.0; space.dof_count()];
    if c == 0.0 {
        return b;
    }
    for e in 0..space.mesh().num_elements() {
        let (x0, x1) = space.mesh().element(e);
        let h = x1 - x0;
        let dofs = space.element_dofs(e);
        // int N0 = int N2 = h/6, int N1 = 2h/3
        let weights = [h / 6.0, 2.0 * h / 3.0, h / 6.0];
        for (d, lw) in dofs.iter().zip(weights) {
            if let Some(d) = d {
                b[*d] += c * lw;
            }
        }
    }
    b
}

/// Load vector for `f = -g''` with `g` piecewise linear on mesh-aligned
/// breakpoints: `b_i = int g' phi_i' dx`, exact. On each element the slope is
/// constant, and `int phi_i' dx` telescopes to the endpoint values, so only
/// vertex dofs receive contributions.
pub fn load_from_energy_pair(
    space: &FemSpace,
    breakpoints: &[f64],
    values: &[f64],
) -> Result<Vec<f64>, Error> {
    if breakpoints.len() != values.len() {
        return Err(Error::Validation(
            "energy pair needs one value per breakpoint".into(),
        ));
    }
    for &p in breakpoints {
        if space.mesh().find_breakpoint(p).is_none() {
            return Err(Error::Alignment { value: p });
        }
    }
    let mut b = vec![0.0; space.dof_count()];
    for e in 0..space.mesh().num_elements() {
        let (x0, x1) = space.mesh().element(e);
        let g0 = piecewise_linear_eval(breakpoints, values, x0);
        let g1 = piecewise_linear_eval(breakpoints, values, x1);
        let slope = (g1 - g0) / (x1 - x0);
        if slope == 0.0 {
            continue;
        }
        let [left, _, right] = space.element_dofs(e);
        if let Some(l) = left {
            b[l] -= slope;
        }
        if let Some(r) = right {
            b[r] += slope;
        }
    }
    Ok(b)
}

/// Direct solve of `A x = b` by banded Cholesky.
pub fn solve_dirichlet(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>, Error> {
    Ok(a.cholesky()?.solve(b))
}

/// `sqrt(x^T A x)` for an assembled stiffness matrix; small negative values
/// from roundoff are clamped, anything worse is reported.
pub fn energy_norm(a: &SpdMatrix, x: &[f64]) -> Result<f64, Error> {
    let q = a.quadratic_form(x);
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if q < -1e-12 * scale.max(1.0) {
        return Err(Error::NegativeForm(q));
    }
    Ok(q.max(0.0).sqrt())
}

/// `V = H^1_0` norm `sqrt(int |v'|^2)`; assembles the unit-weight stiffness.
/// Hot paths should assemble once and use [`energy_norm`].
pub fn v_norm(space: &FemSpace, x: &[f64]) -> f64 {
    let a = assemble_weighted_stiffness(space, &WeightFn::Constant(1.0))
        .expect("constant weight always assembles");
    energy_norm(&a, x).expect("unit stiffness is positive semidefinite")
}

/// `sqrt(int abar |v'|^2)` against a pre-assembled weighted stiffness.
pub fn a_norm(a_bar: &SpdMatrix, x: &[f64]) -> Result<f64, Error> {
    energy_norm(a_bar, x)
}

/// Gauss-Legendre nodes and weights on `[-1,1]` (weights sum to 2),
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for i in 1..=(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_value_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_value_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((-x, w));
        if 2 * i != n + 1 {
            rule.push((x, w));
        }
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

/// `(P_n(x), P_n'(x))` for the classical (unnormalized) Legendre polynomial.
fn legendre_value_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = (((2 * k + 1) as f64) * x * p1 - (k as f64) * p0) / ((k + 1) as f64);
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Writes a dof vector as `x,value` CSV rows.
pub fn export_dof_csv<W: std::io::Write>(
    out: W,
    space: &FemSpace,
    x: &[f64],
) -> Result<(), Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["x", "value"])?;
    for (coord, value) in space.dof_coordinates().iter().zip(x) {
        writer.write_record([coord.to_string(), value.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
