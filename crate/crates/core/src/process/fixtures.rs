//! The reference resonator flow in its two adhesion variants, and the
//! documented single-step mutations with the rule each one must trip.

use super::{Chemistry, Column, Flow, IbeRecipe, ProcessStep, RuleCode, StepKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adhesion {
    /// AlN under Pt; the bottom IBE lands on it and the HF dip is allowed.
    AlN,
    /// Ti under Pt; the bottom IBE goes through it to the Si.
    Ti,
}

fn dep(label: &str, material: &str, nm: f64, temp: Option<f64>, tool: &str) -> ProcessStep {
    ProcessStep {
        material: Some(material.into()),
        thickness: Some(nm * 1e-9),
        temperature: temp,
        tool: Some(tool.into()),
        ..ProcessStep::new(label, StepKind::Deposit)
    }
}

fn coat(label: &str, material: &str, nm: f64) -> ProcessStep {
    ProcessStep {
        material: Some(material.into()),
        thickness: Some(nm * 1e-9),
        tool: Some("DUV cluster".into()),
        ..ProcessStep::new(label, StepKind::SpinCoat)
    }
}

fn expose(label: &str, open: &[Column]) -> ProcessStep {
    ProcessStep {
        open: open.to_vec(),
        tool: Some("DUV stepper".into()),
        ..ProcessStep::new(label, StepKind::Expose)
    }
}

fn develop(label: &str) -> ProcessStep {
    ProcessStep {
        chemistry: Some(Chemistry::Tma238wa),
        tool: Some("DUV cluster".into()),
        ..ProcessStep::new(label, StepKind::Develop)
    }
}

fn chem(label: &str, kind: StepKind, chemistry: Chemistry, removes: &[&str]) -> ProcessStep {
    ProcessStep {
        chemistry: Some(chemistry),
        removes: removes.iter().map(|s| s.to_string()).collect(),
        ..ProcessStep::new(label, kind)
    }
}

fn ash(label: &str, chemistry: Chemistry, temperature: f64, seconds: f64) -> ProcessStep {
    ProcessStep {
        temperature: Some(temperature),
        duration: Some(seconds),
        tool: Some("asher".into()),
        ..chem(label, StepKind::StripAsh, chemistry, &[])
    }
}

fn ibe(label: &str, seconds: f64) -> ProcessStep {
    ProcessStep {
        chemistry: Some(Chemistry::ArIon),
        duration: Some(seconds),
        tool: Some("IBE".into()),
        ..ProcessStep::new(label, StepKind::EtchIbe)
    }
}

/// Steps a to l of the reference flow.
pub fn golden_flow(adhesion: Adhesion) -> Flow {
    let (adh, adh_temp, bottom_ibe_s) = match adhesion {
        Adhesion::AlN => ("AlN", 300.0, 60.0),
        Adhesion::Ti => ("Ti", 350.0, 120.0),
    };
    let all_but_finger = [Column::Gap, Column::PlateEdge, Column::Trench];
    let mut steps = vec![
        dep("a1", adh, 10.0, Some(adh_temp), "sputter cluster"),
        dep("a2", "Pt", 25.0, Some(350.0), "sputter cluster"),
        coat("b1", "DS-K101", 60.0),
        coat("b2", "M108Y", 400.0),
        expose("b3", &[Column::Trench]),
        ProcessStep {
            note: Some("reflow bake 90 s at 170 °C".into()),
            ..develop("b4")
        },
        ibe("c", bottom_ibe_s),
        ash("d1", Chemistry::FormingGas, 120.0, 60.0),
        ProcessStep {
            note: Some("10 min bath".into()),
            ..chem("d2", StepKind::StripWet, Chemistry::Remover1165, &["M108Y"])
        },
        ProcessStep {
            duration: Some(180.0),
            ..chem("e1", StepKind::StripAsh, Chemistry::O2Plasma, &["DS-K101"])
        },
    ];
    if adhesion == Adhesion::AlN {
        steps.push(ProcessStep {
            duration: Some(30.0),
            note: Some("49% HF/H2O 1:50 residue clean".into()),
            ..chem("e2", StepKind::EtchWet, Chemistry::DiluteHf, &[])
        });
    }
    steps.extend([
        dep("e3", "AlScN", 400.0, Some(300.0), "sputter cluster"),
        dep("e4", "Al", 100.0, Some(100.0), "sputter cluster"),
        coat("f1", "DUV42-P", 60.0),
        coat("f2", "M108Y", 400.0),
        expose("f3", &all_but_finger),
        develop("f4"),
        chem("g1", StepKind::EtchDry, Chemistry::C4f8O2, &["DUV42-P"]),
        ProcessStep {
            note: Some("150 W bias, 50 W soft landing, end-point detected".into()),
            ..chem("g2", StepKind::EtchDry, Chemistry::Cl2Bcl3, &["Al"])
        },
        chem("g3", StepKind::Rinse, Chemistry::DiWater, &[]),
        ash("h", Chemistry::FormingGas, 250.0, 90.0),
        dep("i", "SiO2", 800.0, None, "sputter"),
        coat("j1", "M35G", 1100.0),
        expose("j2", &[Column::Trench]),
        develop("j3"),
        chem("j4", StepKind::EtchDry, Chemistry::C4f8H2He, &["SiO2"]),
        ProcessStep {
            recipe: Some(IbeRecipe {
                segments: vec![(10.0, 60.0), (45.0, 30.0), (70.0, 30.0)],
                repeats: 13,
                sidewall_angle_deg: Some(88.0),
                beam_voltage: Some("500 V".into()),
                beam_current: Some("800 mA/cm²".into()),
            }),
            duration: None,
            ..ibe("k1", 0.0)
        },
        ProcessStep {
            duration: Some(300.0),
            ..chem("k2", StepKind::StripAsh, Chemistry::O2Plasma, &["M35G"])
        },
        chem("k3", StepKind::EtchVapor, Chemistry::VaporHf, &["SiO2"]),
        ProcessStep {
            pulses: Some(50),
            duration: Some(50.0 * 45.0),
            note: Some("7.5 Torr".into()),
            ..chem("l", StepKind::Release, Chemistry::Xef2, &[])
        },
    ]);
    let name = match adhesion {
        Adhesion::AlN => "reference flow, AlN adhesion",
        Adhesion::Ti => "reference flow, Ti adhesion",
    };
    Flow {
        name: name.into(),
        substrate: "Si".into(),
        substrate_thickness: 525e-6,
        release_pulses: 50,
        steps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mutation {
    /// Ti variant: vapor-HF hard-mask strip done in dilute wet HF.
    WetHfMaskStrip,
    /// Developable DS-K101 in place of DUV42-P under the top resist.
    DevelopableTopBarc,
    /// DI rinse after the chlorine etch dropped.
    NoRinse,
    /// Forming-gas strip after the Al etch done in O₂ plasma.
    OxygenStripOverAl,
    /// First bottom-strip step done as a full O₂ ash.
    FullAshBeforeRemover,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::WetHfMaskStrip,
        Mutation::DevelopableTopBarc,
        Mutation::NoRinse,
        Mutation::OxygenStripOverAl,
        Mutation::FullAshBeforeRemover,
    ];

    pub fn expected(self) -> RuleCode {
        match self {
            Mutation::WetHfMaskStrip => RuleCode::HfAttacksTi,
            Mutation::DevelopableTopBarc => RuleCode::DeveloperAttacksAl,
            Mutation::NoRinse => RuleCode::PostClRinse,
            Mutation::OxygenStripOverAl => RuleCode::AlOxidation,
            Mutation::FullAshBeforeRemover => RuleCode::OverashBeforeWet,
        }
    }

    pub fn base(self) -> Adhesion {
        match self {
            Mutation::WetHfMaskStrip => Adhesion::Ti,
            _ => Adhesion::AlN,
        }
    }

    /// The mutated flow.
    pub fn apply(self) -> Flow {
        let mut flow = golden_flow(self.base());
        let at = |f: &Flow, l: &str| f.position(l).expect("fixture label");
        match self {
            Mutation::WetHfMaskStrip => {
                let i = at(&flow, "k3");
                flow.steps[i] = chem("k3", StepKind::EtchWet, Chemistry::DiluteHf, &["SiO2"]);
            }
            Mutation::DevelopableTopBarc => {
                let i = at(&flow, "f1");
                flow.steps[i].material = Some("DS-K101".into());
                let g1 = at(&flow, "g1");
                flow.steps[g1].removes = vec!["DS-K101".into()];
            }
            Mutation::NoRinse => {
                let i = at(&flow, "g3");
                flow.steps.remove(i);
            }
            Mutation::OxygenStripOverAl => {
                let i = at(&flow, "h");
                flow.steps[i].chemistry = Some(Chemistry::O2Plasma);
            }
            Mutation::FullAshBeforeRemover => {
                let i = at(&flow, "d1");
                flow.steps[i].chemistry = Some(Chemistry::O2Plasma);
            }
        }
        flow.name = format!("{} ({self:?})", flow.name);
        flow
    }
}

#[cfg(test)]
mod tests {
    use super::super::{check_compatibility, simulate_stack, RateTable, Severity};
    use super::*;

    #[test]
    fn golden_flows_have_no_errors() {
        let rates = RateTable::default();
        for a in [Adhesion::AlN, Adhesion::Ti] {
            let flow = golden_flow(a);
            let v = check_compatibility(&flow, &rates).unwrap();
            assert!(v.is_empty(), "{a:?}: {v:#?}");
            let states = simulate_stack(&flow, &rates).unwrap();
            let last = states.last().unwrap();
            assert!(last.suspended);
            assert!(!last.contains("SiO2") && !last.contains("M35G"));
            assert!(last.thickness_of(Column::Finger, "Al") > 99e-9);
            assert!(!last.columns[&Column::Trench].iter().any(|l| l.material == "AlScN"));
        }
    }

    #[test]
    fn each_mutation_trips_its_rule() {
        let rates = RateTable::default();
        for m in Mutation::ALL {
            let v = check_compatibility(&m.apply(), &rates).unwrap();
            assert_eq!(v.len(), 1, "{m:?}: {v:#?}");
            assert_eq!(v[0].code, m.expected(), "{m:?}");
        }
        let v = check_compatibility(&Mutation::WetHfMaskStrip.apply(), &rates).unwrap();
        assert_eq!(v[0].severity, Severity::Error);
        assert_eq!(v[0].label, "k3");
    }

    #[test]
    fn hf_dip_on_ti_is_flagged() {
        let mut flow = golden_flow(Adhesion::Ti);
        let e1 = flow.position("e1").unwrap();
        flow.steps.insert(
            e1 + 1,
            ProcessStep {
                duration: Some(30.0),
                ..chem("e2", StepKind::EtchWet, Chemistry::DiluteHf, &[])
            },
        );
        let v = check_compatibility(&flow, &RateTable::default()).unwrap();
        assert_eq!(v.iter().map(|v| v.code).collect::<Vec<_>>(), vec![RuleCode::HfAttacksTi]);
    }
}
