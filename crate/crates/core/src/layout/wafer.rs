use serde::{Deserialize, Serialize};

/// Centred rectangular keep-out (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepOut {
    pub width_mm: f64,
    pub height_mm: f64,
}

/// Wafer outline and placement margins, all in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaferGeometry {
    pub diameter_mm: f64,
    pub edge_exclusion_mm: f64,
    /// Dicing street between neighbouring chips.
    pub street_mm: f64,
    pub keepout: Option<KeepOut>,
}

impl Default for WaferGeometry {
    /// 100 mm wafer with the frozen margins (5 mm edge exclusion, 0.2 mm
    /// street, 10 × 6 mm centre keep-out) that give 83 sites for a 17 × 3 mm chip.
    fn default() -> Self {
        Self {
            diameter_mm: 100.0,
            edge_exclusion_mm: 5.0,
            street_mm: 0.2,
            keepout: Some(KeepOut {
                width_mm: 10.0,
                height_mm: 6.0,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipPlacement {
    pub index: usize,
    pub row: i32,
    pub col: i32,
    /// Chip centre relative to the wafer centre (mm).
    pub x_mm: f64,
    pub y_mm: f64,
}

/// Grid placement of `chip_w × chip_h` mm chips. The grid has a chip corner
/// at the wafer centre; a site is kept when all four corners lie within the
/// usable radius and it does not overlap the keep-out. Order is row-major,
/// top row first, left to right.
pub fn gen_wafer_map(chip_w_mm: f64, chip_h_mm: f64, geom: &WaferGeometry) -> Vec<ChipPlacement> {
    let r = geom.diameter_mm / 2.0 - geom.edge_exclusion_mm;
    if !(chip_w_mm > 0.0 && chip_h_mm > 0.0 && r > 0.0) {
        return Vec::new();
    }
    let sx = chip_w_mm + geom.street_mm;
    let sy = chip_h_mm + geom.street_mm;
    let ni = (r / sx).ceil() as i32 + 1;
    let nj = (r / sy).ceil() as i32 + 1;
    let r2 = r * r;
    let mut out = Vec::new();
    for j in (-nj..=nj).rev() {
        for i in -ni..=ni {
            let x0 = f64::from(i) * sx;
            let y0 = f64::from(j) * sy;
            let (x1, y1) = (x0 + chip_w_mm, y0 + chip_h_mm);
            let inside = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
                .iter()
                .all(|&(x, y)| x * x + y * y <= r2 + 1e-9);
            if !inside {
                continue;
            }
            if let Some(k) = geom.keepout {
                let (kx, ky) = (k.width_mm / 2.0, k.height_mm / 2.0);
                if x0 < kx && x1 > -kx && y0 < ky && y1 > -ky {
                    continue;
                }
            }
            out.push(ChipPlacement {
                index: out.len(),
                row: j,
                col: i,
                x_mm: (x0 + x1) / 2.0,
                y_mm: (y0 + y1) / 2.0,
            });
        }
    }
    out
}
