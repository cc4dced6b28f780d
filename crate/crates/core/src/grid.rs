//! Cell-centered structured grid on a rectangle with tagged boundary edges,
//! plus the discrete calculus used by the solver and the energy monitor.
//!
//! Cells are numbered row-major, `c = j·nx + i`, with cell `(i, j)` centered
//! at `((i + ½)dx, (j + ½)dy)`. Vertical (x-normal) faces are numbered
//! `j·(nx+1) + i` for `i ∈ 0..=nx`; horizontal (y-normal) faces `j·nx + i`
//! for `j ∈ 0..=ny`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Unit outward normal of this edge.
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::West => [-1.0, 0.0],
            Side::East => [1.0, 0.0],
            Side::South => [0.0, -1.0],
            Side::North => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    /// Zero-flux wall.
    #[serde(alias = "neumannzero")]
    Neumann,
    /// Outflow `-K∇u·n = φ u^λ`.
    Robin,
}

/// Boundary tag of each edge of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTags {
    pub west: BoundaryTag,
    pub east: BoundaryTag,
    pub south: BoundaryTag,
    pub north: BoundaryTag,
}

impl Default for EdgeTags {
    /// The exit door on the right edge, walls elsewhere.
    fn default() -> Self {
        Self {
            west: BoundaryTag::Neumann,
            east: BoundaryTag::Robin,
            south: BoundaryTag::Neumann,
            north: BoundaryTag::Neumann,
        }
    }
}

impl EdgeTags {
    pub fn all_neumann() -> Self {
        Self {
            west: BoundaryTag::Neumann,
            east: BoundaryTag::Neumann,
            south: BoundaryTag::Neumann,
            north: BoundaryTag::Neumann,
        }
    }

    pub fn get(&self, side: Side) -> BoundaryTag {
        match side {
            Side::West => self.west,
            Side::East => self.east,
            Side::South => self.south,
            Side::North => self.north,
        }
    }
}

/// Time modulation `φ(t) = φ·m(t)` of the Robin coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhiSchedule {
    #[default]
    Constant,
    /// `m(t) = 1 + amplitude·sin(2π·frequency·t)`, `|amplitude| ≤ 1`.
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl PhiSchedule {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            PhiSchedule::Constant => 1.0,
            PhiSchedule::Sinusoid {
                amplitude,
                frequency,
            } => 1.0 + amplitude * (2.0 * PI * frequency * t).sin(),
        }
    }

    /// `dm/dt`.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            PhiSchedule::Constant => 0.0,
            PhiSchedule::Sinusoid {
                amplitude,
                frequency,
            } => amplitude * 2.0 * PI * frequency * (2.0 * PI * frequency * t).cos(),
        }
    }
}

/// Geometry and boundary description of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
    #[serde(default)]
    pub edges: EdgeTags,
    /// Robin coefficient on every Robin face.
    #[serde(default = "one")]
    pub phi: f64,
    #[serde(default)]
    pub phi_schedule: PhiSchedule,
    /// Permits an all-Neumann boundary (used for conservation tests).
    #[serde(default)]
    pub conservation_mode: bool,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn unit_square(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            lx: 1.0,
            ly: 1.0,
            edges: EdgeTags::default(),
            phi: 1.0,
            phi_schedule: PhiSchedule::Constant,
            conservation_mode: false,
        }
    }

    /// Unit square with every edge a zero-flux wall.
    pub fn closed_unit_square(nx: usize, ny: usize) -> Self {
        Self {
            edges: EdgeTags::all_neumann(),
            phi: 0.0,
            conservation_mode: true,
            ..Self::unit_square(nx, ny)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub side: Side,
    /// Adjacent cell.
    pub cell: usize,
    /// Face index in the x- or y-face numbering, depending on `side`.
    pub face: usize,
    pub length: f64,
    pub center: [f64; 2],
    pub tag: BoundaryTag,
    /// Robin coefficient (zero on Neumann faces).
    pub phi: f64,
}

/// Which boundary faces a boundary integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSelection {
    All,
    Tagged(BoundaryTag),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryIntegral {
    pub value: f64,
    /// Set when the selection contained no faces.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
    edges: EdgeTags,
    phi_schedule: PhiSchedule,
    boundary: Vec<BoundaryFace>,
}

impl StructuredGrid {
    pub fn new(spec: &GridSpec) -> Result<Self, ValidationError> {
        const CTX: &str = "grid";
        if spec.nx < 2 || spec.ny < 2 {
            return Err(ValidationError::new(
                CTX,
                format!("nx and ny must be >= 2, got {}x{}", spec.nx, spec.ny),
            ));
        }
        if !(spec.lx > 0.0 && spec.ly > 0.0) || !spec.lx.is_finite() || !spec.ly.is_finite() {
            return Err(ValidationError::new(CTX, "domain lengths must be positive"));
        }
        if !(spec.phi >= 0.0) || !spec.phi.is_finite() {
            return Err(ValidationError::new(
                CTX,
                format!("the Robin coefficient phi must be >= 0 (outflow), got {}", spec.phi),
            ));
        }
        if let PhiSchedule::Sinusoid { amplitude, frequency } = spec.phi_schedule {
            if !(amplitude.abs() <= 1.0) || !frequency.is_finite() {
                return Err(ValidationError::new(
                    CTX,
                    "phi_schedule amplitude must satisfy |amplitude| <= 1",
                ));
            }
        }
        let tags: Vec<BoundaryTag> = Side::ALL.iter().map(|&s| spec.edges.get(s)).collect();
        if !tags.contains(&BoundaryTag::Neumann) {
            return Err(ValidationError::new(CTX, "the Neumann boundary part must be nonempty"));
        }
        if !tags.contains(&BoundaryTag::Robin) && !spec.conservation_mode {
            return Err(ValidationError::new(
                CTX,
                "the Robin boundary part must be nonempty (set conservation_mode for a closed domain)",
            ));
        }
        let (nx, ny) = (spec.nx, spec.ny);
        let dx = spec.lx / nx as f64;
        let dy = spec.ly / ny as f64;
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for side in Side::ALL {
            let tag = spec.edges.get(side);
            let phi = if tag == BoundaryTag::Robin { spec.phi } else { 0.0 };
            match side {
                Side::West | Side::East => {
                    let i = if side == Side::West { 0 } else { nx };
                    let x = i as f64 * dx;
                    for j in 0..ny {
                        boundary.push(BoundaryFace {
                            side,
                            cell: j * nx + i.min(nx - 1),
                            face: j * (nx + 1) + i,
                            length: dy,
                            center: [x, (j as f64 + 0.5) * dy],
                            tag,
                            phi,
                        });
                    }
                }
                Side::South | Side::North => {
                    let j = if side == Side::South { 0 } else { ny };
                    let y = j as f64 * dy;
                    for i in 0..nx {
                        boundary.push(BoundaryFace {
                            side,
                            cell: j.min(ny - 1) * nx + i,
                            face: j * nx + i,
                            length: dx,
                            center: [(i as f64 + 0.5) * dx, y],
                            tag,
                            phi,
                        });
                    }
                }
            }
        }
        Ok(Self {
            nx,
            ny,
            lx: spec.lx,
            ly: spec.ly,
            dx,
            dy,
            edges: spec.edges,
            phi_schedule: spec.phi_schedule,
            boundary,
        })
    }

    /// Replaces the Robin coefficient face by face; Neumann faces keep zero.
    pub fn set_robin_phi<F: Fn(&BoundaryFace) -> f64>(&mut self, phi: F) -> Result<(), ValidationError> {
        for f in self.boundary.iter_mut().filter(|f| f.tag == BoundaryTag::Robin) {
            let p = phi(f);
            if !(p >= 0.0) || !p.is_finite() {
                return Err(ValidationError::new("grid", format!("phi must be >= 0, got {p}")));
            }
            f.phi = p;
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn edges(&self) -> EdgeTags {
        self.edges
    }
    pub fn phi_schedule(&self) -> PhiSchedule {
        self.phi_schedule
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
    /// `|Ω|`.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn x_face_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn y_face_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.nx, c / self.nx);
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn robin_faces(&self) -> impl Iterator<Item = &BoundaryFace> {
        self.boundary.iter().filter(|f| f.tag == BoundaryTag::Robin)
    }

    pub fn has_robin(&self) -> bool {
        self.robin_faces().next().is_some()
    }

    /// Midpoint rule `Σ f_c·dx·dy`.
    pub fn volume_integral(&self, f: &ScalarField) -> f64 {
        debug_assert!(f.matches(self));
        f.values.iter().sum::<f64>() * self.cell_area()
    }

    /// Midpoint rule for an integrand evaluated at cell centers.
    pub fn integrate_fn<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        (0..self.cell_count())
            .map(|c| {
                let [x, y] = self.cell_center(c);
                f(x, y)
            })
            .sum::<f64>()
            * self.cell_area()
    }

    /// `Σ f_face·|face|` over the selected boundary faces.
    pub fn boundary_integral<F: Fn(&BoundaryFace) -> f64>(
        &self,
        f: F,
        sel: FaceSelection,
    ) -> BoundaryIntegral {
        let mut value = 0.0;
        let mut empty = true;
        for face in &self.boundary {
            if let FaceSelection::Tagged(t) = sel {
                if face.tag != t {
                    continue;
                }
            }
            empty = false;
            value += f(face) * face.length;
        }
        BoundaryIntegral { value, empty }
    }

    /// Discrete divergence of a face flux field (fluxes oriented along +x/+y).
    pub fn divergence(&self, flux: &FaceField) -> ScalarField {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let fw = flux.x[j * (nx + 1) + i];
                let fe = flux.x[j * (nx + 1) + i + 1];
                let fs = flux.y[j * nx + i];
                let fn_ = flux.y[(j + 1) * nx + i];
                out[j * nx + i] = (fe - fw) / self.dx + (fn_ - fs) / self.dy;
            }
        }
        ScalarField::from_values(self, out)
    }

    /// Net outward flux `Σ F·n·|face|` through the boundary.
    pub fn boundary_outflow(&self, flux: &FaceField) -> f64 {
        self.boundary
            .iter()
            .map(|f| {
                let v = match f.side {
                    Side::West | Side::East => flux.x[f.face],
                    Side::South | Side::North => flux.y[f.face],
                };
                let sign = match f.side {
                    Side::West | Side::South => -1.0,
                    Side::East | Side::North => 1.0,
                };
                sign * v * f.length
            })
            .sum()
    }

    /// Face gradient vectors `(∂x u, ∂y u)` on every face.
    ///
    /// The face-normal component is the two-point difference across the face;
    /// the tangential component averages the neighboring tangential
    /// differences of the adjacent cells (one-sided near the boundary). On
    /// boundary faces the normal component comes from `outward_normal`, which
    /// receives the face and the adjacent cell value and returns `∇u·n`.
    pub fn face_gradients<F>(&self, u: &ScalarField, outward_normal: F) -> FaceVectors
    where
        F: Fn(&BoundaryFace, f64) -> f64,
    {
        let (nx, ny) = (self.nx, self.ny);
        let v = &u.values;
        let (dx, dy) = (self.dx, self.dy);
        let mut xg = vec![[0.0; 2]; self.x_face_count()];
        let mut yg = vec![[0.0; 2]; self.y_face_count()];

        let ty = |c: usize, j: usize, acc: &mut (f64, u32)| {
            if j + 1 < ny {
                acc.0 += (v[c + nx] - v[c]) / dy;
                acc.1 += 1;
            }
            if j > 0 {
                acc.0 += (v[c] - v[c - nx]) / dy;
                acc.1 += 1;
            }
        };
        let tx = |c: usize, i: usize, acc: &mut (f64, u32)| {
            if i + 1 < nx {
                acc.0 += (v[c + 1] - v[c]) / dx;
                acc.1 += 1;
            }
            if i > 0 {
                acc.0 += (v[c] - v[c - 1]) / dx;
                acc.1 += 1;
            }
        };

        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (j * nx + i - 1, j * nx + i);
                let mut acc = (0.0, 0);
                ty(l, j, &mut acc);
                ty(r, j, &mut acc);
                xg[j * (nx + 1) + i] = [(v[r] - v[l]) / dx, acc.0 / acc.1 as f64];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (b, t) = ((j - 1) * nx + i, j * nx + i);
                let mut acc = (0.0, 0);
                tx(b, i, &mut acc);
                tx(t, i, &mut acc);
                yg[j * nx + i] = [acc.0 / acc.1 as f64, (v[t] - v[b]) / dy];
            }
        }
        for f in &self.boundary {
            let dn = outward_normal(f, v[f.cell]);
            let (i, j) = (f.cell % nx, f.cell / nx);
            let mut acc = (0.0, 0);
            match f.side {
                Side::West | Side::East => {
                    ty(f.cell, j, &mut acc);
                    let gx = if f.side == Side::West { -dn } else { dn };
                    xg[f.face] = [gx, acc.0 / acc.1 as f64];
                }
                Side::South | Side::North => {
                    tx(f.cell, i, &mut acc);
                    let gy = if f.side == Side::South { -dn } else { dn };
                    yg[f.face] = [acc.0 / acc.1 as f64, gy];
                }
            }
        }
        FaceVectors { x: xg, y: yg }
    }

    /// `|∇u|` on every face; see [`StructuredGrid::face_gradients`].
    pub fn face_gradient_magnitude<F>(&self, u: &ScalarField, outward_normal: F) -> FaceField
    where
        F: Fn(&BoundaryFace, f64) -> f64,
    {
        self.face_gradients(u, outward_normal).magnitude()
    }

    /// `|∇u|` with homogeneous Neumann data on every boundary face.
    pub fn face_gradient_magnitude_neumann(&self, u: &ScalarField) -> FaceField {
        self.face_gradient_magnitude(u, |_, _| 0.0)
    }

    /// Cell gradients obtained by averaging the face-normal components of the
    /// two x-faces and the two y-faces of each cell.
    pub fn cell_gradients(&self, faces: &FaceVectors) -> Vec<[f64; 2]> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let gx = 0.5 * (faces.x[j * (nx + 1) + i][0] + faces.x[j * (nx + 1) + i + 1][0]);
                let gy = 0.5 * (faces.y[j * nx + i][1] + faces.y[(j + 1) * nx + i][1]);
                out.push([gx, gy]);
            }
        }
        out
    }
}

/// One scalar per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &StructuredGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &StructuredGrid, value: f64) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &StructuredGrid, f: F) -> Self {
        let values = (0..grid.cell_count())
            .map(|c| {
                let [x, y] = grid.cell_center(c);
                f(x, y)
            })
            .collect();
        Self {
            nx: grid.nx,
            ny: grid.ny,
            values,
        }
    }

    /// Panics if `values.len()` differs from the cell count.
    pub fn from_values(grid: &StructuredGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.cell_count(), "field size mismatch");
        Self {
            nx: grid.nx,
            ny: grid.ny,
            values,
        }
    }

    pub fn try_from_values(grid: &StructuredGrid, values: Vec<f64>) -> Result<Self, ValidationError> {
        if values.len() != grid.cell_count() {
            return Err(ValidationError::new(
                "scalar field",
                format!("expected {} values, got {}", grid.cell_count(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::new("scalar field", "values must be finite"));
        }
        Ok(Self::from_values(grid, values))
    }

    pub fn matches(&self, grid: &StructuredGrid) -> bool {
        self.nx == grid.nx && self.ny == grid.ny && self.values.len() == grid.cell_count()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// One scalar per face, split into x-normal and y-normal faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &StructuredGrid) -> Self {
        Self {
            x: vec![0.0; grid.x_face_count()],
            y: vec![0.0; grid.y_face_count()],
        }
    }
}

/// One vector per face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVectors {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
}

impl FaceVectors {
    pub fn magnitude(&self) -> FaceField {
        let m = |g: &[f64; 2]| g[0].hypot(g[1]);
        FaceField {
            x: self.x.iter().map(m).collect(),
            y: self.y.iter().map(m).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> StructuredGrid {
        StructuredGrid::new(&GridSpec::unit_square(n, n)).unwrap()
    }

    #[test]
    fn volume_integral_examples() {
        let g = unit(7);
        assert!((g.volume_integral(&ScalarField::constant(&g, 1.0)) - 1.0).abs() < 1e-14);
        let x = ScalarField::from_fn(&g, |x, _| x);
        assert!((g.volume_integral(&x) - 0.5).abs() < 1e-14);
        let g = unit(64);
        let x2 = ScalarField::from_fn(&g, |x, _| x * x);
        assert!((g.volume_integral(&x2) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn boundary_integral_examples() {
        let g = unit(64);
        let all = g.boundary_integral(|_| 1.0, FaceSelection::All);
        assert!((all.value - 4.0).abs() < 1e-13);
        let right = g.boundary_integral(|_| 1.0, FaceSelection::Tagged(BoundaryTag::Robin));
        assert!((right.value - 1.0).abs() < 1e-14);
        let y = g.boundary_integral(|f| f.center[1], FaceSelection::Tagged(BoundaryTag::Robin));
        assert!((y.value - 0.5).abs() < 1e-4);
        assert!(!y.empty);

        let closed = StructuredGrid::new(&GridSpec::closed_unit_square(4, 4)).unwrap();
        let none = closed.boundary_integral(|_| 1.0, FaceSelection::Tagged(BoundaryTag::Robin));
        assert_eq!(none.value, 0.0);
        assert!(none.empty);
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let g = StructuredGrid::new(&GridSpec::unit_square(9, 6)).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| 3.0 * x + 4.0 * y);
        let m = g.face_gradient_magnitude_neumann(&u);
        let (nx, ny) = (g.nx(), g.ny());
        for j in 0..ny {
            for i in 1..nx {
                assert!((m.x[j * (nx + 1) + i] - 5.0).abs() < 1e-12);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                assert!((m.y[j * nx + i] - 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_annihilates_constants() {
        let g = unit(5);
        let m = g.face_gradient_magnitude_neumann(&ScalarField::constant(&g, 2.5));
        assert!(m.x.iter().chain(&m.y).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_parabola_at_midline() {
        let g = StructuredGrid::new(&GridSpec::unit_square(32, 4)).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x * x);
        let m = g.face_gradient_magnitude_neumann(&u);
        // Face at x = 0.5 is i = 16.
        assert!((m.x[16] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_normal_data_enters_face_gradient() {
        let g = unit(4);
        let u = ScalarField::constant(&g, 1.0);
        let m = g.face_gradients(&u, |f, _| if f.side == Side::West { 2.0 } else { 0.0 });
        // Outward normal derivative 2 on the west edge means ∂x u = -2 there.
        assert_eq!(m.x[0], [-2.0, 0.0]);
        assert_eq!(m.x[4], [0.0, 0.0]);
    }

    #[test]
    fn divergence_theorem_holds() {
        let g = StructuredGrid::new(&GridSpec::unit_square(5, 3)).unwrap();
        let mut flux = FaceField::zeros(&g);
        for (k, v) in flux.x.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        for (k, v) in flux.y.iter_mut().enumerate() {
            *v = (k as f64 * 1.3).cos();
        }
        let div = g.divergence(&flux);
        let lhs = g.volume_integral(&div);
        let rhs = g.boundary_outflow(&flux);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(StructuredGrid::new(&GridSpec::unit_square(1, 4)).is_err());
        let mut s = GridSpec::unit_square(4, 4);
        s.edges = EdgeTags::all_neumann();
        assert!(StructuredGrid::new(&s).is_err());
        s.conservation_mode = true;
        assert!(StructuredGrid::new(&s).is_ok());
        let mut s = GridSpec::unit_square(4, 4);
        s.phi = -1.0;
        assert!(StructuredGrid::new(&s).is_err());
        let mut s = GridSpec::unit_square(4, 4);
        s.edges = EdgeTags {
            west: BoundaryTag::Robin,
            east: BoundaryTag::Robin,
            south: BoundaryTag::Robin,
            north: BoundaryTag::Robin,
        };
        assert!(StructuredGrid::new(&s).is_err());
    }

    #[test]
    fn boundary_faces_partition_the_perimeter() {
        let g = StructuredGrid::new(&GridSpec::unit_square(6, 3)).unwrap();
        assert_eq!(g.boundary_faces().len(), 2 * (6 + 3));
        assert_eq!(g.robin_faces().count(), 3);
        assert!(g.robin_faces().all(|f| f.side == Side::East && f.phi == 1.0));
    }
}
