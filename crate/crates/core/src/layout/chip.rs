use super::{gen_deembed_cells, gen_idt_cell, to_db, Cell, IdtLayoutOptions, LayerMap, Library, LayoutError, Placement, Polygon, Rotation};
use crate::design::ResonatorDesign;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipSpec {
    pub name: String,
    /// Chip size (m).
    pub width: f64,
    pub height: f64,
    /// Keep-clear border and spacing between placed cells (m).
    pub margin: f64,
    pub spacing: f64,
    pub devices: Vec<ResonatorDesign>,
}

impl ChipSpec {
    /// 17 mm × 3 mm with 200 µm border and 50 µm spacing.
    pub fn standard(devices: Vec<ResonatorDesign>) -> Self {
        Self {
            name: "CHIP".into(),
            width: 17e-3,
            height: 3e-3,
            margin: 200e-6,
            spacing: 50e-6,
            devices,
        }
    }
}

/// Row-packs each device followed by its open and short twins, ordered by
/// pitch then design id. The returned library holds every device cell plus
/// the chip cell (last).
pub fn gen_chip(spec: &ChipSpec, layers: &LayerMap, opts: &IdtLayoutOptions) -> Result<Library, LayoutError> {
    layers.validate()?;
    let w = i64::from(to_db(spec.width)?);
    let h = i64::from(to_db(spec.height)?);
    let margin = i64::from(to_db(spec.margin)?);
    let spacing = i64::from(to_db(spec.spacing)?);
    if w <= 2 * margin || h <= 2 * margin {
        return Err(LayoutError::InvalidDesign("chip smaller than its margins".into()));
    }
    let mut devices: Vec<&ResonatorDesign> = spec.devices.iter().collect();
    devices.sort_by(|a, b| a.idt.pitch.total_cmp(&b.idt.pitch).then_with(|| a.id.cmp(&b.id)));

    let mut lib = Library::new("LAMBKIT");
    let mut chip = Cell::new(spec.name.clone());
    chip.polygons.push(Polygon::rect(layers.chip_outline, 0, 0, w as i32, h as i32)?);

    let (mut x, mut y, mut row_h) = (margin, margin, 0i64);
    let pack_err = |d: &ResonatorDesign| LayoutError::Packing {
        device: d.id.clone(),
        width_mm: spec.width * 1e3,
        height_mm: spec.height * 1e3,
    };
    for d in devices {
        let dev = gen_idt_cell(d, layers, opts)?;
        let (open, short) = gen_deembed_cells(d, layers, opts)?;
        for cell in [dev, open, short] {
            let b = cell.local_bbox();
            if x + b.width() > w - margin {
                x = margin;
                y += row_h + spacing;
                row_h = 0;
            }
            if x + b.width() > w - margin || y + b.height() > h - margin {
                return Err(pack_err(d));
            }
            chip.placements.push(Placement {
                cell: cell.name.clone(),
                origin: ((x - b.x0) as i32, (y - b.y0) as i32),
                rotation: Rotation::R0,
            });
            x += b.width() + spacing;
            row_h = row_h.max(b.height());
            lib.add_unique(cell);
        }
    }
    lib.cells.push(chip);
    lib.validate()?;
    Ok(lib)
}
