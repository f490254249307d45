use super::{check_i32, to_db, Cell, LayerMap, LayoutError, Polygon};
use crate::design::ResonatorDesign;
use serde::{Deserialize, Serialize};

/// Dimensions the IDT generator needs beyond the design itself (metres).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdtLayoutOptions {
    pub busbar_width: f64,
    pub pad_size: f64,
    /// Tether width and length in wavelengths.
    pub tether_width_wl: f64,
    pub tether_length_wl: f64,
}

impl Default for IdtLayoutOptions {
    fn default() -> Self {
        Self {
            busbar_width: 5e-6,
            pad_size: 50e-6,
            tether_width_wl: 0.25,
            tether_length_wl: 0.5,
        }
    }
}

/// Resolved integer geometry shared by the device and its twins.
struct Frame {
    p: i64,
    w: i64,
    aperture: i64,
    gap: i64,
    busbar: i64,
    pad: i64,
    n: i64,
    x_left: i64,
    x_right: i64,
}

impl Frame {
    fn new(design: &ResonatorDesign, opts: &IdtLayoutOptions) -> Result<Self, LayoutError> {
        let idt = &design.idt;
        idt.validate().map_err(|e| LayoutError::InvalidDesign(e.to_string()))?;
        let p = i64::from(to_db(idt.pitch)?);
        let w = i64::from(to_db(idt.finger_width)?);
        if p <= 0 || w <= 0 || w >= p {
            return Err(LayoutError::InvalidDesign(format!(
                "pitch {p} nm and finger width {w} nm do not resolve on the 1 nm grid"
            )));
        }
        let n = i64::from(idt.n_fingers);
        let x_left = -w / 2;
        let x_right = (n - 1) * p + (w - w / 2);
        check_i32(x_right + p * i64::from(idt.dummy_count_per_side) + p)?;
        Ok(Self {
            p,
            w,
            aperture: i64::from(to_db(idt.aperture)?),
            gap: i64::from(to_db(idt.gap)?),
            busbar: i64::from(to_db(opts.busbar_width)?),
            pad: i64::from(to_db(opts.pad_size)?),
            n,
            x_left,
            x_right,
        })
    }

    fn finger_x(&self, i: i64) -> (i64, i64) {
        let c = i * self.p;
        (c - self.w / 2, c + (self.w - self.w / 2))
    }

    fn rect(layer: i16, x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Polygon, LayoutError> {
        Polygon::rect(layer, check_i32(x0)?, check_i32(y0)?, check_i32(x1)?, check_i32(y1)?)
    }

    fn busbars(&self, layer: i16) -> Result<[Polygon; 2], LayoutError> {
        let lo = -self.gap;
        let hi = self.aperture + self.gap;
        Ok([
            Self::rect(layer, self.x_left, lo - self.busbar, self.x_right, lo)?,
            Self::rect(layer, self.x_left, hi, self.x_right, hi + self.busbar)?,
        ])
    }

    /// Signal pad above the top busbar, ground pad below the bottom one.
    fn pads(&self, layer: i16) -> Result<[Polygon; 2], LayoutError> {
        let xc = (self.x_left + self.x_right) / 2;
        let (xa, xb) = (xc - self.pad / 2, xc - self.pad / 2 + self.pad);
        let top = self.aperture + self.gap + self.busbar;
        let bot = -self.gap - self.busbar;
        Ok([
            Self::rect(layer, xa, top, xb, top + self.pad)?,
            Self::rect(layer, xa, bot - self.pad, xb, bot)?,
        ])
    }
}

fn cell_name(prefix: &str, design: &ResonatorDesign) -> Result<String, LayoutError> {
    let name = format!("{prefix}_{}", design.id);
    if super::legal_name(&name) {
        Ok(name)
    } else {
        Err(LayoutError::InvalidName(name))
    }
}

/// One resonator: fingers, busbars and dummies on the IDT layer, pads,
/// a bottom electrode limited to the aperture and the plate outline with
/// its two tethers.
///
/// Even fingers hang from the bottom busbar, odd ones from the top; finger i
/// is centred at x = i·pitch and the overlap region spans y ∈ [0, aperture].
pub fn gen_idt_cell(design: &ResonatorDesign, layers: &LayerMap, opts: &IdtLayoutOptions) -> Result<Cell, LayoutError> {
    layers.validate()?;
    let f = Frame::new(design, opts)?;
    let idt_layer = layers.idt_layer(design.layer);
    let mut cell = Cell::new(cell_name("IDT", design)?);
    for i in 0..f.n {
        let (x0, x1) = f.finger_x(i);
        let (y0, y1) = if i % 2 == 0 { (-f.gap, f.aperture) } else { (0, f.aperture + f.gap) };
        cell.polygons.push(Frame::rect(idt_layer, x0, y0, x1, y1)?);
    }
    cell.polygons.extend(f.busbars(idt_layer)?);
    let dummies = i64::from(design.idt.dummy_count_per_side);
    for j in 1..=dummies {
        for i in [-j, f.n - 1 + j] {
            let (x0, x1) = f.finger_x(i);
            cell.polygons.push(Frame::rect(idt_layer, x0, 0, x1, f.aperture)?);
        }
    }
    cell.polygons.extend(f.pads(layers.pads)?);
    cell.polygons.push(Frame::rect(layers.bottom_electrode, f.x_left, 0, f.x_right, f.aperture)?);
    cell.polygons.push(outline(&f, design, layers.outline, opts)?);
    Ok(cell)
}

/// Plate outline with tethers centred on the left and right edges.
fn outline(f: &Frame, design: &ResonatorDesign, layer: i16, opts: &IdtLayoutOptions) -> Result<Polygon, LayoutError> {
    let margin = f.p / 2;
    let xl = f.x_left - margin;
    let xr = f.x_right + margin;
    let yb = -f.gap - f.busbar;
    let yt = f.aperture + f.gap + f.busbar;
    let yc = (yb + yt) / 2;
    let tw = (i64::from(to_db(opts.tether_width_wl * design.idt.wavelength)?)).max(1);
    let tl = (i64::from(to_db(opts.tether_length_wl * design.idt.wavelength)?)).max(1);
    let (ta, tb) = (yc - tw / 2, yc - tw / 2 + tw);
    let pts = [
        (xl, yb),
        (xr, yb),
        (xr, ta),
        (xr + tl, ta),
        (xr + tl, tb),
        (xr, tb),
        (xr, yt),
        (xl, yt),
        (xl, tb),
        (xl - tl, tb),
        (xl - tl, ta),
        (xl, ta),
    ];
    let verts = pts
        .iter()
        .map(|&(x, y)| Ok((check_i32(x)?, check_i32(y)?)))
        .collect::<Result<Vec<_>, LayoutError>>()?;
    Polygon::new(layer, verts)
}

/// Open and short de-embedding twins: pads and busbars without fingers, and
/// the same with a shorting strap across the aperture.
pub fn gen_deembed_cells(
    design: &ResonatorDesign,
    layers: &LayerMap,
    opts: &IdtLayoutOptions,
) -> Result<(Cell, Cell), LayoutError> {
    layers.validate()?;
    let f = Frame::new(design, opts)?;
    let idt_layer = layers.idt_layer(design.layer);
    let mut open = Cell::new(cell_name("OPEN", design)?);
    open.polygons.extend(f.busbars(idt_layer)?);
    open.polygons.extend(f.pads(layers.pads)?);
    let mut short = Cell::new(cell_name("SHORT", design)?);
    short.polygons.extend(f.busbars(idt_layer)?);
    let strap = f.busbar.max(f.w);
    let xc = (f.x_left + f.x_right) / 2;
    short
        .polygons
        .push(Frame::rect(idt_layer, xc - strap / 2, -f.gap, xc - strap / 2 + strap, f.aperture + f.gap)?);
    short.polygons.extend(f.pads(layers.pads)?);
    Ok((open, short))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{IdtSpec, Layer};
    use crate::dispersion::{LambMode, PlateSpec};

    pub(crate) fn design(pitch: f64, n: u32, aperture: f64, dummies: u32) -> ResonatorDesign {
        ResonatorDesign {
            id: ResonatorDesign::design_id(pitch, LambMode::S0),
            idt: IdtSpec::new(pitch, aperture, pitch, n, dummies).unwrap(),
            plate: PlateSpec::default_stack(),
            mode: LambMode::S0,
            target_impedance: 200.0,
            f_mid: 1e9,
            layer: Layer::Small,
            dose: 20.5,
            c0_estimate: 1e-15,
            achieved_impedance: 200.0,
        }
    }

    #[test]
    fn two_finger_geometry() {
        let layers = LayerMap::default();
        let cell = gen_idt_cell(&design(1e-6, 2, 20e-6, 0), &layers, &IdtLayoutOptions::default()).unwrap();
        let idt: Vec<_> = cell.polygons_on(layers.idt_small).collect();
        assert_eq!(idt.len(), 4);
        let fingers: Vec<_> = idt.iter().filter(|p| p.bbox().width() == 500).collect();
        assert_eq!(fingers.len(), 2);
        let centers: Vec<i64> = fingers.iter().map(|p| (p.bbox().x0 + p.bbox().x1) / 2).collect();
        assert_eq!(centers, vec![0, 1000]);
        for p in &cell.polygons {
            p.validate().unwrap();
        }
    }

    #[test]
    fn dummy_count_rule() {
        let layers = LayerMap::default();
        let cell = gen_idt_cell(&design(1e-6, 4, 20e-6, 3), &layers, &IdtLayoutOptions::default()).unwrap();
        assert_eq!(cell.polygons_on(layers.idt_small).count(), 4 + 2 + 6);
        assert_eq!(cell.polygons_on(layers.bottom_electrode).count(), 1);
        assert_eq!(cell.polygons_on(layers.outline).count(), 1);
        assert_eq!(cell.polygons_on(layers.pads).count(), 2);
    }

    #[test]
    fn rejects_odd_count_and_overflow() {
        let mut d = design(1e-6, 2, 20e-6, 0);
        d.idt.n_fingers = 1;
        assert!(gen_idt_cell(&d, &LayerMap::default(), &IdtLayoutOptions::default()).is_err());
        let mut big = design(1e-6, 2, 20e-6, 0);
        big.idt.aperture = 10.0;
        assert!(matches!(
            gen_idt_cell(&big, &LayerMap::default(), &IdtLayoutOptions::default()),
            Err(LayoutError::CoordinateOverflow { .. })
        ));
    }

    #[test]
    fn twins_have_no_fingers() {
        let layers = LayerMap::default();
        let (open, short) = gen_deembed_cells(&design(2e-6, 10, 40e-6, 3), &layers, &IdtLayoutOptions::default()).unwrap();
        assert_eq!(open.polygons_on(layers.idt_small).count(), 2);
        assert_eq!(short.polygons_on(layers.idt_small).count(), 3);
        assert_ne!(open.name, short.name);
    }
}
