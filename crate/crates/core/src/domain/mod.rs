//! Uniform Cartesian grids for a box Ω surrounded by a collar of ghost
//! cells that carry the Dirichlet datum, together with the staggered
//! gradient/divergence pair.
//!
//! Cell values live on Ω ∪ collar. Faces are the ones touching Ω: faces
//! between two Ω cells and faces between an Ω cell and a collar cell. Faces
//! strictly inside the collar never enter any computation.
//!
//! The faces are partitioned into groups. Each Ω cell owns its forward
//! faces that lie inside Ω (zero, one or two of them); each face on ∂Ω is a
//! group on its own. Isotropic total variation takes the Euclidean norm per
//! group, and the dual constraint ‖z‖∞ ≤ 1 is the unit ball per group.

mod io;

pub use io::{read_csv, read_raw, write_csv, write_raw, RAW_MAGIC};
pub(crate) use io::{csv_string, raw_bytes};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of a grid, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    #[serde(default = "default_collar")]
    pub collar_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

fn default_collar() -> usize {
    1
}

impl GridSpec {
    pub fn line(cells: usize, spacing: f64) -> Self {
        GridSpec {
            dimension: 1,
            shape: vec![cells],
            spacing,
            collar_width: 1,
            origin: None,
        }
    }

    pub fn rect(nx: usize, ny: usize, spacing: f64) -> Self {
        GridSpec {
            dimension: 2,
            shape: vec![nx, ny],
            spacing,
            collar_width: 1,
            origin: None,
        }
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Self {
        self.origin = Some(origin);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    /// Cell on the negative side (left or below).
    pub lower: usize,
    /// Cell on the positive side (right or above).
    pub upper: usize,
    pub axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Forward faces of the Ω cell with this storage index.
    Cell(usize),
    /// A single face on ∂Ω.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceGroup {
    faces: [usize; 2],
    len: usize,
    pub kind: GroupKind,
}

impl FaceGroup {
    pub fn faces(&self) -> &[usize] {
        &self.faces[..self.len]
    }

    pub fn is_boundary(&self) -> bool {
        self.kind == GroupKind::Boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub face: usize,
    /// Collar cell across the face.
    pub outer: usize,
    /// Ω cell adjacent to the face.
    pub inner: usize,
    /// +1 when the outward normal points along the face axis, −1 otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    shape: [usize; 2],
    full: [usize; 2],
    spacing: f64,
    collar: usize,
    origin: [f64; 2],
    faces: Vec<Face>,
    groups: Vec<FaceGroup>,
    boundary: Vec<BoundaryFace>,
    interior: Vec<usize>,
    is_interior: Vec<bool>,
}

impl Grid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        build_grid(spec)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Interior cells per axis (the second entry is 1 in 1D).
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Cells per axis including the collar (the second entry is 1 in 1D).
    pub fn full_shape(&self) -> [usize; 2] {
        self.full
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn collar_width(&self) -> usize {
        self.collar
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dimension: self.dim,
            shape: self.shape[..self.dim].to_vec(),
            spacing: self.spacing,
            collar_width: self.collar,
            origin: Some(self.origin[..self.dim].to_vec()),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.full[0] * self.full[1]
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn collar_count(&self) -> usize {
        self.cell_count() - self.interior_count()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// h^d
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// h^(d−1)
    pub fn face_area(&self) -> f64 {
        self.spacing.powi(self.dim as i32 - 1)
    }

    /// |Ω|
    pub fn domain_volume(&self) -> f64 {
        self.interior_count() as f64 * self.cell_volume()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn groups(&self) -> &[FaceGroup] {
        &self.groups
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    /// Storage indices of the Ω cells, row-major.
    pub fn interior_cells(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_interior(&self, cell: usize) -> bool {
        self.is_interior[cell]
    }

    /// Storage index of the cell at full-grid coordinates (collar included).
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.full[0] * j
    }

    /// Storage index of the Ω cell with interior coordinates (i, j).
    pub fn interior_index(&self, i: usize, j: usize) -> usize {
        let j = if self.dim == 2 { j + self.collar } else { 0 };
        self.cell_index(i + self.collar, j)
    }

    /// Coordinates relative to Ω, so collar cells have negative indices or
    /// indices ≥ shape.
    pub fn relative_coords(&self, cell: usize) -> [i64; 2] {
        let i = (cell % self.full[0]) as i64 - self.collar as i64;
        let j = if self.dim == 2 {
            (cell / self.full[0]) as i64 - self.collar as i64
        } else {
            0
        };
        [i, j]
    }

    /// Geometric centre of a cell.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let [i, j] = self.relative_coords(cell);
        let h = self.spacing;
        let x = self.origin[0] + (i as f64 + 0.5) * h;
        let y = if self.dim == 2 {
            self.origin[1] + (j as f64 + 0.5) * h
        } else {
            0.0
        };
        [x, y]
    }

    /// Point at which data are sampled: the centre for Ω cells, the nearest
    /// point of ∂Ω for collar cells. Collar values therefore represent the
    /// trace of the datum from outside.
    pub fn sample_point(&self, cell: usize) -> [f64; 2] {
        let mut p = self.cell_center(cell);
        for (axis, coord) in p.iter_mut().enumerate().take(self.dim) {
            let lo = self.origin[axis];
            let hi = lo + self.shape[axis] as f64 * self.spacing;
            *coord = coord.clamp(lo, hi);
        }
        p
    }

    fn check_cells(&self, len: usize) -> Result<()> {
        if len != self.cell_count() {
            return Err(Error::SizeMismatch {
                expected: self.cell_count(),
                found: len,
            });
        }
        Ok(())
    }

    fn check_faces(&self, len: usize) -> Result<()> {
        if len != self.face_count() {
            return Err(Error::SizeMismatch {
                expected: self.face_count(),
                found: len,
            });
        }
        Ok(())
    }

    /// Forward differences across every face, written into `out`.
    pub fn gradient_into(&self, cells: &[f64], out: &mut [f64]) {
        let inv_h = 1.0 / self.spacing;
        for (o, face) in out.iter_mut().zip(&self.faces) {
            *o = (cells[face.upper] - cells[face.lower]) * inv_h;
        }
    }

    /// Backward differences on Ω cells; collar entries are set to zero.
    pub fn divergence_into(&self, faces: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let inv_h = 1.0 / self.spacing;
        for (value, face) in faces.iter().zip(&self.faces) {
            let flux = value * inv_h;
            if self.is_interior[face.lower] {
                out[face.lower] += flux;
            }
            if self.is_interior[face.upper] {
                out[face.upper] -= flux;
            }
        }
    }

    /// Euclidean norm of a face vector restricted to one group.
    pub fn group_norm(&self, group: &FaceGroup, faces: &[f64]) -> f64 {
        group
            .faces()
            .iter()
            .map(|&f| faces[f] * faces[f])
            .sum::<f64>()
            .sqrt()
    }
}

/// Validates the grid description and enumerates cells, faces and face groups.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    let dim = spec.dimension;
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    if spec.shape.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "shape has {} entries for a {dim}D grid",
            spec.shape.len()
        )));
    }
    if spec.shape.contains(&0) {
        return Err(Error::InvalidGrid("empty shape".into()));
    }
    if !(spec.spacing.is_finite() && spec.spacing > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "spacing must be positive, got {}",
            spec.spacing
        )));
    }
    if spec.collar_width == 0 {
        return Err(Error::InvalidGrid("collar width must be at least 1".into()));
    }
    let mut origin = [0.0; 2];
    if let Some(o) = &spec.origin {
        if o.len() != dim || o.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "origin must have {dim} finite entries"
            )));
        }
        origin[..dim].copy_from_slice(o);
    }

    let c = spec.collar_width;
    let nx = spec.shape[0];
    let ny = if dim == 2 { spec.shape[1] } else { 1 };
    let full = [nx + 2 * c, if dim == 2 { ny + 2 * c } else { 1 }];
    let jc = if dim == 2 { c } else { 0 };
    let cell = |i: usize, j: usize| i + full[0] * j;

    let mut is_interior = vec![false; full[0] * full[1]];
    let mut interior = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let k = cell(i + c, j + jc);
            is_interior[k] = true;
            interior.push(k);
        }
    }

    let mut faces = Vec::new();
    let mut boundary = Vec::new();
    // x-faces: row j, position i in 0..=nx between interior columns i-1 and i.
    let x_face = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..=nx {
            let lower = cell(i + c - 1, j + jc);
            let upper = cell(i + c, j + jc);
            let id = faces.len();
            faces.push(Face {
                lower,
                upper,
                axis: 0,
            });
            if i == 0 {
                boundary.push(BoundaryFace {
                    face: id,
                    outer: lower,
                    inner: upper,
                    sign: -1.0,
                });
            } else if i == nx {
                boundary.push(BoundaryFace {
                    face: id,
                    outer: upper,
                    inner: lower,
                    sign: 1.0,
                });
            }
        }
    }
    let y_offset = faces.len();
    let y_face = |i: usize, j: usize| y_offset + j * nx + i;
    if dim == 2 {
        for j in 0..=ny {
            for i in 0..nx {
                let lower = cell(i + c, j + c - 1);
                let upper = cell(i + c, j + c);
                let id = faces.len();
                faces.push(Face {
                    lower,
                    upper,
                    axis: 1,
                });
                if j == 0 {
                    boundary.push(BoundaryFace {
                        face: id,
                        outer: lower,
                        inner: upper,
                        sign: -1.0,
                    });
                } else if j == ny {
                    boundary.push(BoundaryFace {
                        face: id,
                        outer: upper,
                        inner: lower,
                        sign: 1.0,
                    });
                }
            }
        }
    }

    let mut groups = Vec::with_capacity(interior.len() + boundary.len());
    for j in 0..ny {
        for i in 0..nx {
            let mut g = FaceGroup {
                faces: [0; 2],
                len: 0,
                kind: GroupKind::Cell(cell(i + c, j + jc)),
            };
            if i + 1 < nx {
                g.faces[g.len] = x_face(i + 1, j);
                g.len += 1;
            }
            if dim == 2 && j + 1 < ny {
                g.faces[g.len] = y_face(i, j + 1);
                g.len += 1;
            }
            groups.push(g);
        }
    }
    for b in &boundary {
        groups.push(FaceGroup {
            faces: [b.face, 0],
            len: 1,
            kind: GroupKind::Boundary,
        });
    }

    Ok(Grid {
        dim,
        shape: [nx, ny],
        full,
        spacing: spec.spacing,
        collar: c,
        origin,
        faces,
        groups,
        boundary,
        interior,
        is_interior,
    })
}

/// Cell values on Ω ∪ collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_cells(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScalarField { values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.cell_count()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            values: vec![c; grid.cell_count()],
        }
    }

    /// Samples `f` at each cell's sample point (collar cells at ∂Ω).
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count())
            .map(|k| f(grid.sample_point(k)))
            .collect();
        Self::new(grid, values)
    }

    /// Samples `f` at raw cell centres, collar included.
    pub fn from_centers(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count())
            .map(|k| f(grid.cell_center(k)))
            .collect();
        Self::new(grid, values)
    }

    /// Builds a field from Ω values (row-major) and a collar taken from `collar`.
    pub fn from_interior(grid: &Grid, interior: &[f64], collar: &ScalarField) -> Result<Self> {
        collar.check(grid)?;
        if interior.len() != grid.interior_count() {
            return Err(Error::SizeMismatch {
                expected: grid.interior_count(),
                found: interior.len(),
            });
        }
        let mut values = collar.values.clone();
        for (&k, &v) in grid.interior_cells().iter().zip(interior) {
            values[k] = v;
        }
        Self::new(grid, values)
    }

    pub(crate) fn from_raw_unchecked(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        grid.check_cells(self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interior(&self, grid: &Grid) -> Vec<f64> {
        grid.interior_cells()
            .iter()
            .map(|&k| self.values[k])
            .collect()
    }

    /// max over Ω of |value|
    pub fn interior_linf(&self, grid: &Grid) -> f64 {
        grid.interior_cells()
            .iter()
            .map(|&k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// (Σ_Ω value²·h^d)^½
    pub fn interior_l2(&self, grid: &Grid) -> f64 {
        (grid
            .interior_cells()
            .iter()
            .map(|&k| self.values[k] * self.values[k])
            .sum::<f64>()
            * grid.cell_volume())
        .sqrt()
    }

    /// Σ_Ω self·other·h^d
    pub fn interior_dot(&self, other: &ScalarField, grid: &Grid) -> f64 {
        grid.interior_cells()
            .iter()
            .map(|&k| self.values[k] * other.values[k])
            .sum::<f64>()
            * grid.cell_volume()
    }

    /// True when the collar values of both fields coincide to `tol`.
    pub fn collar_matches(&self, other: &ScalarField, grid: &Grid, tol: f64) -> bool {
        (0..grid.cell_count())
            .filter(|&k| !grid.is_interior(k))
            .all(|k| (self.values[k] - other.values[k]).abs() <= tol)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// One value per face touching Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaceField {
    values: Vec<f64>,
}

impl FaceField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_faces(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(FaceField { values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        FaceField {
            values: vec![0.0; grid.face_count()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        FaceField {
            values: vec![c; grid.face_count()],
        }
    }

    pub(crate) fn from_raw_unchecked(values: Vec<f64>) -> Self {
        FaceField { values }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        grid.check_faces(self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// ‖z‖∞: the largest group norm.
    pub fn linf(&self, grid: &Grid) -> f64 {
        grid.groups()
            .iter()
            .map(|g| grid.group_norm(g, &self.values))
            .fold(0.0, f64::max)
    }

    /// Largest single face value in magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> FaceField {
        FaceField {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Σ_faces self·other·h^d
    pub fn dot(&self, other: &FaceField, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * grid.cell_volume()
    }
}

/// Forward difference (u_upper − u_lower)/h across every face touching Ω.
pub fn gradient(grid: &Grid, u: &ScalarField) -> Result<FaceField> {
    u.check(grid)?;
    let mut out = vec![0.0; grid.face_count()];
    grid.gradient_into(u.values(), &mut out);
    Ok(FaceField::from_raw_unchecked(out))
}

/// Negative adjoint of [`gradient`] on fields vanishing on the collar:
/// Σ_axis (z_out − z_in)/h on Ω cells, zero on the collar.
pub fn divergence(grid: &Grid, z: &FaceField) -> Result<ScalarField> {
    z.check(grid)?;
    let mut out = vec![0.0; grid.cell_count()];
    grid.divergence_into(z.values(), &mut out);
    Ok(ScalarField::from_raw_unchecked(out))
}

/// The field equal to `u` on Ω and to `boundary` on the collar.
pub fn extend_with_boundary(grid: &Grid, u: &ScalarField, boundary: &ScalarField) -> Result<ScalarField> {
    u.check(grid)?;
    boundary.check(grid)?;
    let mut values = boundary.values().to_vec();
    for &k in grid.interior_cells() {
        values[k] = u.values()[k];
    }
    Ok(ScalarField::from_raw_unchecked(values))
}
