use super::stack::initial_state;
use super::{simulate_stack, ChemClass, Flow, MaterialClass, ProcessError, RateTable, StackState, StepKind};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleCode {
    DeveloperAttacksAl,
    HfAttacksTi,
    PostClRinse,
    AlOxidation,
    OverashBeforeWet,
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleCode::DeveloperAttacksAl => "DEVELOPER_ATTACKS_AL",
            RuleCode::HfAttacksTi => "HF_ATTACKS_TI",
            RuleCode::PostClRinse => "POST_CL_RINSE",
            RuleCode::AlOxidation => "AL_OXIDATION",
            RuleCode::OverashBeforeWet => "OVERASH_BEFORE_WET",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Which stack a contact rule looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Before,
    After,
    Either,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// A chemistry class reaching an exposed material.
    Contact {
        class: ChemClass,
        material: &'static str,
        phase: Phase,
    },
    /// A step of `class` must be followed directly by a step of `next`.
    FollowedBy { class: ChemClass, next: ChemClass },
    /// A step of `class` that clears all photoresist, then a wet strip with
    /// no new coating in between.
    FullAshBeforeWet { class: ChemClass },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub code: RuleCode,
    pub severity: Severity,
    pub kind: RuleKind,
    pub description: &'static str,
}

/// The rule registry, in evaluation order.
pub fn registry() -> Vec<Rule> {
    vec![
        Rule {
            code: RuleCode::DeveloperAttacksAl,
            severity: Severity::Error,
            kind: RuleKind::Contact {
                class: ChemClass::Developer,
                material: "Al",
                phase: Phase::After,
            },
            description: "TMAH developer reaches Al; use a non-developable BARC",
        },
        Rule {
            code: RuleCode::HfAttacksTi,
            severity: Severity::Error,
            kind: RuleKind::Contact {
                class: ChemClass::WetHf,
                material: "Ti",
                phase: Phase::Either,
            },
            description: "wet HF reaches Ti; use vapor HF or an AlN adhesion layer",
        },
        Rule {
            code: RuleCode::PostClRinse,
            severity: Severity::Error,
            kind: RuleKind::FollowedBy {
                class: ChemClass::Chlorine,
                next: ChemClass::Rinse,
            },
            description: "chlorine etch not followed by a DI rinse",
        },
        Rule {
            code: RuleCode::AlOxidation,
            severity: Severity::Warning,
            kind: RuleKind::Contact {
                class: ChemClass::OxygenAsh,
                material: "Al",
                phase: Phase::Either,
            },
            description: "O2 plasma over exposed Al; strip in forming gas instead",
        },
        Rule {
            code: RuleCode::OverashBeforeWet,
            severity: Severity::Warning,
            kind: RuleKind::FullAshBeforeWet {
                class: ChemClass::OxygenAsh,
            },
            description: "resist fully ashed in O2 before a wet strip leaves burnt residue",
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: RuleCode,
    /// Step the violation is attributed to; equals the step count for
    /// problems found at the end of the flow.
    pub step: usize,
    pub label: String,
    pub message: String,
    pub severity: Severity,
}

fn has_photoresist(s: &StackState) -> bool {
    s.has_class(|c| c == MaterialClass::Photoresist)
}

/// Runs the stack simulation and evaluates every rule at every step.
/// Violations are ordered by (step, code).
pub fn check_compatibility(flow: &Flow, rates: &RateTable) -> Result<Vec<Violation>, ProcessError> {
    let states = simulate_stack(flow, rates)?;
    let init = initial_state(flow, rates);
    let rules = registry();
    let mut out = Vec::new();
    let n = flow.steps.len();
    let mut full_ash: Vec<Option<usize>> = vec![None; rules.len()];
    for (i, step) in flow.steps.iter().enumerate() {
        let before = if i == 0 { &init } else { &states[i - 1] };
        let after = &states[i];
        let class = step.chemistry.map(|c| c.class());
        for (r_idx, rule) in rules.iter().enumerate() {
            let mut push = |at: usize, label: String, message: String| {
                out.push(Violation {
                    code: rule.code,
                    step: at,
                    label,
                    message,
                    severity: rule.severity,
                })
            };
            match rule.kind {
                RuleKind::Contact { class: c, material, phase } => {
                    if class != Some(c) {
                        continue;
                    }
                    let hit = match phase {
                        Phase::Before => before.is_exposed(material),
                        Phase::After => after.is_exposed(material),
                        Phase::Either => before.is_exposed(material) || after.is_exposed(material),
                    };
                    if hit {
                        push(i, step.label.clone(), format!("{material} exposed: {}", rule.description));
                    }
                }
                RuleKind::FollowedBy { class: c, next } => {
                    if class != Some(c) {
                        continue;
                    }
                    let follower = flow.steps.get(i + 1);
                    if follower.and_then(|s| s.chemistry).map(|c| c.class()) != Some(next) {
                        let label = follower.map_or_else(|| "end".to_string(), |s| s.label.clone());
                        push(i + 1, label, format!("after step {}: {}", step.label, rule.description));
                    }
                }
                RuleKind::FullAshBeforeWet { class: c } => match step.kind() {
                    StepKind::SpinCoat | StepKind::Deposit => full_ash[r_idx] = None,
                    StepKind::StripAsh if class == Some(c) && has_photoresist(before) && !has_photoresist(after) => {
                        full_ash[r_idx] = Some(i);
                    }
                    StepKind::StripWet => {
                        if let Some(j) = full_ash[r_idx] {
                            push(
                                i,
                                step.label.clone(),
                                format!("full ash at step {}: {}", flow.steps[j].label, rule.description),
                            );
                        }
                    }
                    _ => {}
                },
            }
        }
    }
    debug_assert!(out.iter().all(|v| v.step <= n));
    out.sort_by_key(|v| (v.step, v.code));
    Ok(out)
}

/// Violation list plus counts, as written by the flow checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow: String,
    pub errors: usize,
    pub warnings: usize,
    pub violations: Vec<Violation>,
}

impl FlowReport {
    pub fn new(flow: &Flow, violations: Vec<Violation>) -> Self {
        let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
        Self {
            flow: flow.name.clone(),
            errors,
            warnings: violations.len() - errors,
            violations,
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}: {} error(s), {} warning(s)\n", self.flow, self.errors, self.warnings);
        for v in &self.violations {
            let sev = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            s.push_str(&format!("  [{sev}] step {} ({}): {} {}\n", v.step, v.label, v.code, v.message));
        }
        s
    }
}
