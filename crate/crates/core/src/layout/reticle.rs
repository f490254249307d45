use super::{to_db, BBox, Cell, LayerMap, Library, LayoutError, Placement, Polygon, Rotation};
use serde::{Deserialize, Serialize};

/// Rectangular ReMa exposure window at wafer scale (mm, origin at the
/// lower-left of the image field) selecting one mask level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemaWindow {
    pub name: String,
    pub layer: i16,
    pub x_mm: f64,
    pub y_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
}

impl RemaWindow {
    fn bbox(&self) -> Result<BBox, LayoutError> {
        Ok(BBox {
            x0: i64::from(to_db(self.x_mm * 1e-3)?),
            y0: i64::from(to_db(self.y_mm * 1e-3)?),
            x1: i64::from(to_db((self.x_mm + self.width_mm) * 1e-3)?),
            y1: i64::from(to_db((self.y_mm + self.height_mm) * 1e-3)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReticleSpec {
    pub image_field_mm: (f64, f64),
    pub demag: u32,
    pub windows: Vec<RemaWindow>,
}

pub const MAX_IMAGE_FIELD_MM: f64 = 22.0;
pub const DEMAG: u32 = 4;

impl ReticleSpec {
    /// Full 22 mm field with one 17 × 3 mm window per mask level, stacked
    /// with 1 mm clearance.
    pub fn standard(layers: &LayerMap) -> Self {
        let levels = [
            ("BOTTOM", layers.bottom_electrode),
            ("IDT_SMALL", layers.idt_small),
            ("IDT_LARGE", layers.idt_large),
            ("PADS", layers.pads),
            ("OUTLINE", layers.outline),
        ];
        let windows = levels
            .iter()
            .enumerate()
            .map(|(i, &(name, layer))| RemaWindow {
                name: name.into(),
                layer,
                x_mm: 2.5,
                y_mm: 1.0 + 4.0 * i as f64,
                width_mm: 17.0,
                height_mm: 3.0,
            })
            .collect();
        Self {
            image_field_mm: (MAX_IMAGE_FIELD_MM, MAX_IMAGE_FIELD_MM),
            demag: DEMAG,
            windows,
        }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |m: String| Err(LayoutError::InvalidReticle(m));
        let (fw, fh) = self.image_field_mm;
        if !(fw > 0.0 && fh > 0.0 && fw <= MAX_IMAGE_FIELD_MM + 1e-9 && fh <= MAX_IMAGE_FIELD_MM + 1e-9) {
            return bad(format!("image field {fw} x {fh} mm exceeds 22 x 22 mm"));
        }
        if self.demag != DEMAG {
            return bad(format!("demagnification must be {DEMAG}, got {}", self.demag));
        }
        let mut boxes = Vec::with_capacity(self.windows.len());
        for w in &self.windows {
            if !(w.width_mm > 0.0 && w.height_mm > 0.0) {
                return bad(format!("window {} has no area", w.name));
            }
            if w.x_mm < 0.0 || w.y_mm < 0.0 || w.x_mm + w.width_mm > fw + 1e-9 || w.y_mm + w.height_mm > fh + 1e-9 {
                return bad(format!("window {} leaves the image field", w.name));
            }
            let b = w.bbox()?;
            if let Some(o) = boxes.iter().position(|ob: &BBox| ob.overlaps(&b)) {
                return bad(format!("windows {} and {} overlap", self.windows[o].name, w.name));
            }
            boxes.push(b);
        }
        Ok(())
    }
}

/// Reticle cell at wafer scale: one frame per window on the marks layer,
/// a placeholder alignment cross in each window corner, and the chip cell
/// placed in every window. Each window is exposed with only its own level.
pub fn gen_reticle(spec: &ReticleSpec, chip: &Library, chip_cell: &str, layers: &LayerMap) -> Result<Library, LayoutError> {
    spec.validate()?;
    if chip.cell(chip_cell).is_none() {
        return Err(LayoutError::UnknownCell {
            parent: "RETICLE".into(),
            child: chip_cell.into(),
        });
    }
    let mut lib = chip.clone();
    let mut ret = Cell::new("RETICLE");
    let chip_box = chip.bbox(chip_cell);
    let arm = 50_000i64;
    let bar = 5_000i64;
    for w in &spec.windows {
        let b = w.bbox()?;
        // frame as four thin strips
        let t = 10_000i64;
        for (x0, y0, x1, y1) in [
            (b.x0, b.y0, b.x1, b.y0 + t),
            (b.x0, b.y1 - t, b.x1, b.y1),
            (b.x0, b.y0 + t, b.x0 + t, b.y1 - t),
            (b.x1 - t, b.y0 + t, b.x1, b.y1 - t),
        ] {
            ret.polygons.push(Polygon::rect(layers.marks, x0 as i32, y0 as i32, x1 as i32, y1 as i32)?);
        }
        let (cx, cy) = (b.x0 + 2 * arm, b.y0 + 2 * arm);
        ret.polygons.push(Polygon::new(layers.marks, cross_vertices(cx, cy, arm, bar))?);
        let ox = b.x0 + (b.width() - chip_box.width()) / 2 - chip_box.x0;
        let oy = b.y0 + (b.height() - chip_box.height()) / 2 - chip_box.y0;
        ret.placements.push(Placement {
            cell: chip_cell.into(),
            origin: (ox as i32, oy as i32),
            rotation: Rotation::R0,
        });
    }
    lib.cells.push(ret);
    lib.validate()?;
    Ok(lib)
}

/// Plus-shaped 12-vertex outline, counter-clockwise.
fn cross_vertices(cx: i64, cy: i64, arm: i64, half: i64) -> Vec<(i32, i32)> {
    let pts = [
        (half, -half),
        (arm, -half),
        (arm, half),
        (half, half),
        (half, arm),
        (-half, arm),
        (-half, half),
        (-arm, half),
        (-arm, -half),
        (-half, -half),
        (-half, -arm),
        (half, -arm),
    ];
    pts.iter().map(|&(x, y)| ((cx + x) as i32, (cy + y) as i32)).collect()
}
