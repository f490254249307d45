use super::{Chemistry, Flow, MaterialClass, ProcessError, ProcessStep, RateTable, StepKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Lateral regions tracked by the stack model: under an IDT finger, between
/// fingers, on the plate outside the IDT, and in the release trench.
/// Neighbours follow that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Finger,
    Gap,
    PlateEdge,
    Trench,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Finger, Column::Gap, Column::PlateEdge, Column::Trench];

    fn neighbours(self) -> &'static [Column] {
        match self {
            Column::Finger => &[Column::Gap],
            Column::Gap => &[Column::Finger, Column::PlateEdge],
            Column::PlateEdge => &[Column::Gap, Column::Trench],
            Column::Trench => &[Column::PlateEdge],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: String,
    pub thickness: f64,
    /// Present in some columns but not all.
    pub patterned: bool,
    #[serde(skip)]
    id: u32,
    /// Sidewall still under a conformal film.
    #[serde(skip)]
    side_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackState {
    /// Index of the step just applied; `None` for the bare substrate.
    pub step: Option<usize>,
    pub label: String,
    pub columns: BTreeMap<Column, Vec<Layer>>,
    /// Materials a chemistry can reach: column tops plus uncovered sidewalls.
    pub exposed_materials: BTreeSet<String>,
    pub suspended: bool,
    pub notes: Vec<String>,
}

impl StackState {
    pub fn thickness_of(&self, column: Column, material: &str) -> f64 {
        self.columns[&column]
            .iter()
            .filter(|l| l.material == material)
            .map(|l| l.thickness)
            .sum()
    }

    pub fn contains(&self, material: &str) -> bool {
        self.columns.values().flatten().any(|l| l.material == material)
    }

    pub fn is_exposed(&self, material: &str) -> bool {
        self.exposed_materials.contains(material)
    }

    pub fn has_class(&self, pred: impl Fn(MaterialClass) -> bool) -> bool {
        self.columns.values().flatten().any(|l| pred(MaterialClass::of(&l.material)))
    }
}

const EPS: f64 = 1e-15;

struct Sim<'a> {
    cols: BTreeMap<Column, Vec<Layer>>,
    next_id: u32,
    pending_open: Option<Vec<Column>>,
    suspended: bool,
    rates: &'a RateTable,
}

impl<'a> Sim<'a> {
    fn new(flow: &Flow, rates: &'a RateTable) -> Self {
        let sub = Layer {
            material: flow.substrate.clone(),
            thickness: flow.substrate_thickness,
            patterned: false,
            id: 0,
            side_covered: true,
        };
        Self {
            cols: Column::ALL.iter().map(|&c| (c, vec![sub.clone()])).collect(),
            next_id: 1,
            pending_open: None,
            suspended: false,
            rates,
        }
    }

    fn top(&self, c: Column) -> f64 {
        self.cols[&c].iter().map(|l| l.thickness).sum()
    }

    fn cover_all(&mut self) {
        self.cols.values_mut().flatten().for_each(|l| l.side_covered = true);
    }

    /// Uncovers sidewalls standing above the (lowered) surface of `c`.
    fn uncover_around(&mut self, c: Column) {
        let surface = self.top(c);
        for &n in c.neighbours() {
            let mut z = 0.0;
            for l in self.cols.get_mut(&n).expect("column").iter_mut() {
                z += l.thickness;
                if z > surface + EPS {
                    l.side_covered = false;
                }
            }
        }
    }

    fn exposed(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (&c, layers) in &self.cols {
            if let Some(t) = layers.last() {
                out.insert(t.material.clone());
            }
            let lowest_neighbour = c.neighbours().iter().map(|&n| self.top(n)).fold(f64::INFINITY, f64::min);
            let mut z = 0.0;
            for l in layers {
                z += l.thickness;
                if !l.side_covered && z > lowest_neighbour + EPS {
                    out.insert(l.material.clone());
                }
            }
        }
        out
    }

    fn snapshot(&self, step: Option<usize>, label: &str, notes: Vec<String>) -> StackState {
        let mut columns = self.cols.clone();
        let count = |id: u32| self.cols.values().filter(|ls| ls.iter().any(|l| l.id == id)).count();
        for l in columns.values_mut().flatten() {
            l.patterned = count(l.id) < Column::ALL.len();
        }
        StackState {
            step,
            label: label.into(),
            columns,
            exposed_materials: self.exposed(),
            suspended: self.suspended,
            notes,
        }
    }

    fn add_layer(&mut self, material: &str, thickness: f64) {
        let id = self.next_id;
        self.next_id += 1;
        for layers in self.cols.values_mut() {
            layers.push(Layer {
                material: material.into(),
                thickness,
                patterned: false,
                id,
                side_covered: true,
            });
        }
        self.cover_all();
    }

    /// Removes target layers from the top of `c`. `Budget::Time` needs rates,
    /// `Budget::Depth` removes at most that thickness, `Budget::Endpoint`
    /// clears every target layer. Returns the unused depth for `Depth`.
    fn remove(
        &mut self,
        c: Column,
        targets: &dyn Fn(&str) -> bool,
        budget: Budget,
        chemistry: Chemistry,
        temperature: Option<f64>,
    ) -> Result<f64, ProcessError> {
        let (mut time, mut depth) = match budget {
            Budget::Time(t) => (t, f64::INFINITY),
            Budget::Depth(d) => (f64::INFINITY, d),
            Budget::Endpoint => (f64::INFINITY, f64::INFINITY),
        };
        let timed = matches!(budget, Budget::Time(_));
        let rates = self.rates;
        let layers = self.cols.get_mut(&c).expect("column");
        while let Some(top) = layers.last_mut() {
            if !targets(&top.material) || time <= 0.0 || depth <= 0.0 {
                break;
            }
            let mut amount = top.thickness.min(depth);
            if timed {
                let r = rates.rate_si(&top.material, chemistry, temperature)?;
                let t_clear = amount / r;
                if t_clear >= time {
                    amount = r * time;
                    time = 0.0;
                } else {
                    time -= t_clear;
                }
            }
            depth -= amount;
            top.thickness -= amount;
            if top.thickness <= EPS {
                if layers.len() == 1 {
                    // the substrate stays, even if milled to nothing
                    layers[0].thickness = 0.0;
                    break;
                }
                layers.pop();
            }
        }
        Ok(if depth.is_finite() { depth } else { 0.0 })
    }
}

#[derive(Clone, Copy)]
enum Budget {
    Time(f64),
    Depth(f64),
    Endpoint,
}

fn budget(step: &ProcessStep) -> Budget {
    if let Some(d) = step.thickness {
        Budget::Depth(d)
    } else if let Some(t) = step.process_time() {
        Budget::Time(t)
    } else {
        Budget::Endpoint
    }
}

/// Applies every step in order and returns the state after each one.
pub fn simulate_stack(flow: &Flow, rates: &RateTable) -> Result<Vec<StackState>, ProcessError> {
    flow.validate()?;
    rates.validate()?;
    let mut sim = Sim::new(flow, rates);
    let mut states = Vec::with_capacity(flow.steps.len());
    for (i, step) in flow.steps.iter().enumerate() {
        let mut notes = Vec::new();
        let invalid = |m: &str| ProcessError::InvalidStep {
            index: i,
            label: step.label.clone(),
            message: m.into(),
        };
        match step.kind() {
            StepKind::Deposit | StepKind::SpinCoat => {
                let material = step.material.as_deref().expect("validated");
                sim.add_layer(material, step.thickness.expect("validated"));
            }
            StepKind::Expose => {
                if step.open.is_empty() {
                    notes.push("exposure opens no column".into());
                }
                sim.pending_open = Some(step.open.clone());
            }
            StepKind::Develop => {
                let open = sim.pending_open.take().unwrap_or_else(|| {
                    notes.push("develop without a preceding exposure".into());
                    Vec::new()
                });
                let resist = |m: &str| MaterialClass::of(m) == MaterialClass::Photoresist;
                let dev_barc = |m: &str| MaterialClass::of(m) == MaterialClass::Barc { developable: true };
                let chem = step.chemistry.expect("validated");
                for c in open {
                    sim.remove(c, &resist, Budget::Endpoint, chem, None)?;
                    sim.remove(c, &dev_barc, Budget::Endpoint, chem, None)?;
                    sim.uncover_around(c);
                }
            }
            StepKind::Rinse => {}
            StepKind::EtchIbe => {
                let chem = step.chemistry.unwrap_or(Chemistry::ArIon);
                let b = budget(step);
                if matches!(b, Budget::Endpoint) {
                    return Err(invalid("IBE needs a recipe, duration or depth"));
                }
                for c in Column::ALL {
                    let left = sim.remove(c, &|_| true, b, chem, step.temperature)?;
                    if left > EPS {
                        notes.push(format!("{c:?}: milled through the substrate, clamped"));
                    }
                    sim.uncover_around(c);
                }
            }
            StepKind::Release => {
                let pulses = step.pulses.unwrap_or(0);
                let si_open = sim.cols.values().any(|ls| ls.len() == 1);
                sim.suspended = si_open && pulses >= flow.release_pulses;
                if !si_open {
                    notes.push("release gas cannot reach the substrate".into());
                } else if pulses < flow.release_pulses {
                    notes.push(format!("{pulses} of {} pulses; not released", flow.release_pulses));
                }
            }
            StepKind::EtchDry | StepKind::EtchWet | StepKind::EtchVapor | StepKind::StripAsh | StepKind::StripWet => {
                let chem = step.chemistry.ok_or_else(|| invalid("missing chemistry"))?;
                let kind = step.kind();
                let listed = step.removes.clone();
                let targets = move |m: &str| {
                    if !listed.is_empty() {
                        return listed.iter().any(|t| t == m);
                    }
                    match kind {
                        StepKind::StripAsh => MaterialClass::of(m).is_organic(),
                        StepKind::StripWet => MaterialClass::of(m) == MaterialClass::Photoresist,
                        _ => false,
                    }
                };
                let b = budget(step);
                for c in Column::ALL {
                    let before = sim.top(c);
                    let left = sim.remove(c, &targets, b, chem, step.temperature)?;
                    if let Budget::Depth(d) = b {
                        if left > EPS && before - sim.top(c) < d {
                            notes.push(format!(
                                "{c:?}: {:.1} nm requested, {:.1} nm removable; clamped to 0",
                                d * 1e9,
                                (d - left) * 1e9
                            ));
                        }
                    }
                    if sim.top(c) < before {
                        sim.uncover_around(c);
                    }
                }
            }
        }
        states.push(sim.snapshot(Some(i), &step.label, notes));
    }
    Ok(states)
}

/// Bare-substrate state preceding the first step.
pub(crate) fn initial_state(flow: &Flow, rates: &RateTable) -> StackState {
    Sim::new(flow, rates).snapshot(None, "", Vec::new())
}
