//! Mask geometry: polygons, hierarchical cells, IDT and chip generators,
//! wafer placement, reticle windows and GDSII stream I/O.
//!
//! Coordinates are integer database units of 1 nm.

mod chip;
mod gds;
mod idt;
mod reticle;
mod wafer;

pub use chip::{gen_chip, ChipSpec};
pub use gds::{read_gdsii, write_gdsii, GdsError};
pub use idt::{gen_deembed_cells, gen_idt_cell, IdtLayoutOptions};
pub use reticle::{gen_reticle, RemaWindow, ReticleSpec};
pub use wafer::{gen_wafer_map, ChipPlacement, KeepOut, WaferGeometry};

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Database unit in metres.
pub const DB_UNIT_M: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("coordinate {value} nm does not fit in a 32-bit database unit")]
    CoordinateOverflow { value: i64 },
    #[error("invalid cell name '{0}'")]
    InvalidName(String),
    #[error("duplicate cell name '{0}'")]
    DuplicateCell(String),
    #[error("cell '{parent}' references unknown cell '{child}'")]
    UnknownCell { parent: String, child: String },
    #[error("placement cycle through cell '{0}'")]
    Cycle(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("chip packing failed: device '{device}' does not fit in the {width_mm} x {height_mm} mm chip")]
    Packing { device: String, width_mm: f64, height_mm: f64 },
    #[error("invalid reticle: {0}")]
    InvalidReticle(String),
    #[error("duplicate layer id {0} in layer map")]
    LayerClash(i16),
}

pub(crate) fn to_db(value_m: f64) -> Result<i32, LayoutError> {
    let v = (value_m / DB_UNIT_M).round();
    if !v.is_finite() || v.abs() > i32::MAX as f64 {
        return Err(LayoutError::CoordinateOverflow {
            value: if v.is_finite() { v as i64 } else { i64::MAX },
        });
    }
    Ok(v as i32)
}

pub(crate) fn check_i32(v: i64) -> Result<i32, LayoutError> {
    i32::try_from(v).map_err(|_| LayoutError::CoordinateOverflow { value: v })
}

/// Layer ids for each mask level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerMap {
    pub bottom_electrode: i16,
    pub idt_small: i16,
    pub idt_large: i16,
    pub pads: i16,
    pub outline: i16,
    pub marks: i16,
    pub chip_outline: i16,
}

impl Default for LayerMap {
    fn default() -> Self {
        Self {
            bottom_electrode: 1,
            idt_small: 2,
            idt_large: 3,
            pads: 4,
            outline: 5,
            marks: 6,
            chip_outline: 10,
        }
    }
}

impl LayerMap {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let ids = [
            self.bottom_electrode,
            self.idt_small,
            self.idt_large,
            self.pads,
            self.outline,
            self.marks,
            self.chip_outline,
        ];
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                return Err(LayoutError::LayerClash(id));
            }
        }
        Ok(())
    }

    pub fn idt_layer(&self, layer: crate::design::Layer) -> i16 {
        match layer {
            crate::design::Layer::Small => self.idt_small,
            crate::design::Layer::Large => self.idt_large,
            crate::design::Layer::Pads => self.pads,
        }
    }
}

/// Closed polygon stored without the repeated closing vertex,
/// counter-clockwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Polygon {
    pub layer: i16,
    pub datatype: i16,
    pub vertices: Vec<(i32, i32)>,
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: (i64, i64), q: (i64, i64), r: (i64, i64)) -> bool {
    q.0 >= p.0.min(r.0) && q.0 <= p.0.max(r.0) && q.1 >= p.1.min(r.1) && q.1 <= p.1.max(r.1)
}

fn segments_intersect(p1: (i64, i64), p2: (i64, i64), p3: (i64, i64), p4: (i64, i64)) -> bool {
    let d1 = cross(p3, p4, p1).signum();
    let d2 = cross(p3, p4, p2).signum();
    let d3 = cross(p1, p2, p3).signum();
    let d4 = cross(p1, p2, p4).signum();
    if d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0 {
        return true;
    }
    (d1 == 0 && on_segment(p3, p1, p4))
        || (d2 == 0 && on_segment(p3, p2, p4))
        || (d3 == 0 && on_segment(p1, p3, p2))
        || (d4 == 0 && on_segment(p1, p4, p2))
}

impl Polygon {
    /// Validates and stores the polygon. A trailing copy of the first vertex
    /// is dropped; clockwise input is rejected.
    pub fn new(layer: i16, vertices: Vec<(i32, i32)>) -> Result<Self, LayoutError> {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let p = Self {
            layer,
            datatype: 0,
            vertices,
        };
        p.validate()?;
        Ok(p)
    }

    /// Axis-aligned rectangle from two corners, in any order.
    pub fn rect(layer: i16, x0: i32, y0: i32, x1: i32, y1: i32) -> Result<Self, LayoutError> {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Self::new(layer, vec![(xa, ya), (xb, ya), (xb, yb), (xa, yb)])
    }

    /// Twice the signed area (positive for counter-clockwise).
    pub fn signed_area2(&self) -> i128 {
        let n = self.vertices.len();
        let mut s: i128 = 0;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            s += i128::from(x0) * i128::from(y1) - i128::from(x1) * i128::from(y0);
        }
        s
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let v = &self.vertices;
        let distinct: HashSet<_> = v.iter().collect();
        if distinct.len() < 3 || distinct.len() != v.len() {
            return Err(LayoutError::InvalidPolygon(format!(
                "need at least 3 distinct, non-repeated vertices, got {}",
                v.len()
            )));
        }
        if self.signed_area2() <= 0 {
            return Err(LayoutError::InvalidPolygon("vertices must be counter-clockwise with non-zero area".into()));
        }
        let n = v.len();
        let pt = |i: usize| (i64::from(v[i % n].0), i64::from(v[i % n].1));
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(pt(i), pt(i + 1), pt(j), pt(j + 1)) {
                    return Err(LayoutError::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.vertices.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> f64 {
        match self {
            Rotation::R0 => 0.0,
            Rotation::R90 => 90.0,
            Rotation::R180 => 180.0,
            Rotation::R270 => 270.0,
        }
    }

    pub fn from_degrees(deg: f64) -> Option<Self> {
        let d = deg.rem_euclid(360.0);
        [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270]
            .into_iter()
            .find(|r| (r.degrees() - d).abs() < 1e-9)
    }

    pub fn apply(self, (x, y): (i64, i64)) -> (i64, i64) {
        match self {
            Rotation::R0 => (x, y),
            Rotation::R90 => (-y, x),
            Rotation::R180 => (-x, -y),
            Rotation::R270 => (y, -x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub cell: String,
    pub origin: (i32, i32),
    pub rotation: Rotation,
}

impl Placement {
    pub fn transform(&self, p: (i64, i64)) -> (i64, i64) {
        let (x, y) = self.rotation.apply(p);
        (x + i64::from(self.origin.0), y + i64::from(self.origin.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl BBox {
    pub fn from_points<I: IntoIterator<Item = (i32, i32)>>(pts: I) -> Self {
        let mut b = BBox::empty();
        for (x, y) in pts {
            b.include((i64::from(x), i64::from(y)));
        }
        b
    }

    pub fn empty() -> Self {
        BBox {
            x0: i64::MAX,
            y0: i64::MAX,
            x1: i64::MIN,
            y1: i64::MIN,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 > self.x1
    }

    pub fn include(&mut self, (x, y): (i64, i64)) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
    }

    pub fn union(&mut self, o: &BBox) {
        if !o.is_empty() {
            self.include((o.x0, o.y0));
            self.include((o.x1, o.y1));
        }
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    /// Interiors overlap (touching edges do not count).
    pub fn overlaps(&self, o: &BBox) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

pub(crate) fn legal_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 32
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '?' || c == '$')
}

/// GDSII modification/access stamp: year, month, day, hour, minute, second.
pub type Timestamp = [i16; 6];

/// Fixed stamp used for generated output so files are reproducible.
pub const DEFAULT_TIMESTAMP: Timestamp = [2000, 1, 1, 0, 0, 0];

fn default_stamps() -> [Timestamp; 2] {
    [DEFAULT_TIMESTAMP, DEFAULT_TIMESTAMP]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub polygons: Vec<Polygon>,
    pub placements: Vec<Placement>,
    #[serde(default = "default_stamps")]
    pub timestamps: [Timestamp; 2],
}

impl Cell {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            polygons: Vec::new(),
            placements: Vec::new(),
            timestamps: default_stamps(),
        }
    }

    pub fn polygons_on(&self, layer: i16) -> impl Iterator<Item = &Polygon> {
        self.polygons.iter().filter(move |p| p.layer == layer)
    }

    /// Bounding box of this cell's own polygons.
    pub fn local_bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in &self.polygons {
            b.union(&p.bbox());
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Library {
    pub name: String,
    /// User unit expressed in database units (GDSII convention).
    pub user_unit: f64,
    /// Database unit in metres.
    pub db_unit_m: f64,
    #[serde(default = "default_stamps")]
    pub timestamps: [Timestamp; 2],
    pub cells: Vec<Cell>,
}

impl Library {
    /// 1 nm database unit, 1 µm user unit.
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            user_unit: 1e-3,
            db_unit_m: DB_UNIT_M,
            timestamps: default_stamps(),
            cells: Vec::new(),
        }
    }

    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    /// Adds a cell unless one with the same name is already present.
    pub fn add_unique(&mut self, cell: Cell) {
        if self.cell(&cell.name).is_none() {
            self.cells.push(cell);
        }
    }

    /// Checks names, references and that the placement graph is acyclic.
    pub fn validate(&self) -> Result<(), LayoutError> {
        if !legal_name(&self.name) {
            return Err(LayoutError::InvalidName(self.name.clone()));
        }
        let mut index = HashMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            if !legal_name(&c.name) {
                return Err(LayoutError::InvalidName(c.name.clone()));
            }
            if index.insert(c.name.as_str(), i).is_some() {
                return Err(LayoutError::DuplicateCell(c.name.clone()));
            }
        }
        for c in &self.cells {
            for p in &c.placements {
                if !index.contains_key(p.cell.as_str()) {
                    return Err(LayoutError::UnknownCell {
                        parent: c.name.clone(),
                        child: p.cell.clone(),
                    });
                }
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.cells.len()];
        fn visit(lib: &Library, idx: &HashMap<&str, usize>, i: usize, state: &mut [u8]) -> Result<(), LayoutError> {
            match state[i] {
                1 => return Err(LayoutError::Cycle(lib.cells[i].name.clone())),
                2 => return Ok(()),
                _ => {}
            }
            state[i] = 1;
            for p in &lib.cells[i].placements {
                visit(lib, idx, idx[p.cell.as_str()], state)?;
            }
            state[i] = 2;
            Ok(())
        }
        for i in 0..self.cells.len() {
            visit(self, &index, i, &mut state)?;
        }
        Ok(())
    }

    /// Cells not placed by any other cell.
    pub fn top_cells(&self) -> Vec<&Cell> {
        let used: HashSet<&str> = self
            .cells
            .iter()
            .flat_map(|c| c.placements.iter().map(|p| p.cell.as_str()))
            .collect();
        self.cells.iter().filter(|c| !used.contains(c.name.as_str())).collect()
    }

    /// Bounding box of a cell including placed children.
    pub fn bbox(&self, name: &str) -> BBox {
        let mut b = BBox::empty();
        if let Some(c) = self.cell(name) {
            b.union(&c.local_bbox());
            for p in &c.placements {
                let child = self.bbox(&p.cell);
                if child.is_empty() {
                    continue;
                }
                for corner in [(child.x0, child.y0), (child.x1, child.y0), (child.x1, child.y1), (child.x0, child.y1)] {
                    b.include(p.transform(corner));
                }
            }
        }
        b
    }

    /// All polygons of a cell with placements resolved, in wafer coordinates.
    pub fn flatten(&self, name: &str) -> Vec<(i16, Vec<(i64, i64)>)> {
        let mut out = Vec::new();
        if let Some(c) = self.cell(name) {
            for p in &c.polygons {
                out.push((p.layer, p.vertices.iter().map(|&(x, y)| (i64::from(x), i64::from(y))).collect()));
            }
            for pl in &c.placements {
                for (layer, verts) in self.flatten(&pl.cell) {
                    out.push((layer, verts.into_iter().map(|v| pl.transform(v)).collect()));
                }
            }
        }
        out
    }

    /// Flat CSV dump (cell, layer, datatype, index, x, y), one row per vertex.
    pub fn polygon_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell", "layer", "datatype", "polygon", "x_nm", "y_nm"])?;
        for c in &self.cells {
            for (i, p) in c.polygons.iter().enumerate() {
                for &(x, y) in &p.vertices {
                    w.write_record([
                        c.name.clone(),
                        p.layer.to_string(),
                        p.datatype.to_string(),
                        i.to_string(),
                        x.to_string(),
                        y.to_string(),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
