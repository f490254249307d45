//! Acceptance criteria. Each check prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

mod common;

use lambkit::circuit::{all_metrics, fit_mbvd, resonance_metrics, FitOptions, MbvdModel, StaticNetwork};
use lambkit::design::{impedance_magnitude, layer_assignment, match_finger_count, recommend_dose, static_capacitance, CapacitanceModel, IdtSpec, Layer, MatchOptions};
use lambkit::dispersion::{frequency_at_pitch, mode_frequency, LambMode, PlateMaterial, PlateSpec};
use lambkit::layout::{gen_wafer_map, read_gdsii, write_gdsii, WaferGeometry};
use lambkit::process::{ashing_time, check_compatibility, etch_budget, golden_flow, Adhesion, Chemistry, Mutation, RateEntry, RateTable, Severity};
use lambkit::rf::{parse_touchstone, serialize_touchstone, DataFormat, FrequencyUnit, TouchstoneFile};
use lambkit::stats::{per_mode_deviation, relstd, simulate_wafer, thickness_relstd, VariationModel};
use lambkit::Execution;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn mbvd_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_f, mut worst_k, mut worst_q) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..100 {
        let (truth, trace) = common::random_mbvd(&mut rng, 0.005);
        let n = truth.branches().len();
        let out = fit_mbvd(&trace, n, &FitOptions::default()).map_err(|e| format!("case {case}: {e}"))?;
        for (t, m) in all_metrics(&truth).iter().zip(all_metrics(&out.model)) {
            let (ef, ek, eq) = (rel(m.f_r, t.f_r), rel(m.k_eff_sq, t.k_eff_sq), rel(m.q_r, t.q_r));
            worst_f = worst_f.max(ef);
            worst_k = worst_k.max(ek);
            worst_q = worst_q.max(eq);
            ensure(ef <= 5e-4 && ek <= 0.05 && eq <= 0.10, || {
                format!("case {case} ({n} branches): f_r err {ef:.2e}, k² err {ek:.3}, Q err {eq:.3}")
            })?;
        }
    }
    Ok(format!("worst f_r {worst_f:.1e}, k² {worst_k:.3}, Q {worst_q:.3}"))
}

fn metric_formulas() -> Check {
    let stat = StaticNetwork::new(92e-12, 0.0, 0.0);
    let m = MbvdModel::new(stat, vec![common::branch(1e9, 8e-12, 1.0)]).map_err(|e| e.to_string())?;
    let k = resonance_metrics(&m, 0).map_err(|e| e.to_string())?.k_eff_sq;
    // 8 / (8 + 92)
    ensure((k - 0.080).abs() <= 1e-15, || format!("k_eff_sq = {k}"))?;
    let m = MbvdModel::new(StaticNetwork::new(1e-12, 0.0, 4.0), vec![common::branch(1e9, 0.1e-12, 6.0)]).map_err(|e| e.to_string())?;
    let q = resonance_metrics(&m, 0).map_err(|e| e.to_string())?.q_r;
    let oracle = 1.0 / (2.0 * PI * 1e9 * 0.1e-12 * 10.0);
    ensure((q - 159.15).abs() <= 0.01 && (q - oracle).abs() < 1e-9, || format!("q_r = {q}"))?;
    Ok(format!("k_eff_sq {k}, q_r {q:.4}"))
}

fn dispersion_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let v_l = rng.random_range(5000.0..11000.0);
        let v_t = v_l * rng.random_range(0.35..0.62);
        let h = rng.random_range(100e-9..2e-6);
        let k = rng.random_range(0.2..5.0) / h;
        let mode = LambMode::ALL[rng.random_range(0..4)];
        let plate = PlateSpec::new(PlateMaterial::new("r", rng.random_range(2000.0..8000.0), v_l, v_t).unwrap(), h).unwrap();
        let got = mode_frequency(&plate, mode, k).map_err(|e| e.to_string())?;
        let roots = common::oracle_roots(v_l, v_t, h, k, matches!(mode, LambMode::S0 | LambMode::S1), mode.order() + 1);
        let want = roots.get(mode.order()).copied();
        match (got, want) {
            (Some(g), Some(w)) => {
                worst = worst.max(rel(g, w));
                ensure(rel(g, w) <= 1e-6, || format!("case {case} {mode} kh={:.3}: {g} vs oracle {w}", k * h))?;
            }
            (g, w) => return Err(format!("case {case} {mode}: solver {g:?}, oracle {w:?}")),
        }
    }
    let plate = PlateSpec::default_stack();
    let k = 0.02 / plate.h;
    let f = mode_frequency(&plate, LambMode::S0, k).map_err(|e| e.to_string())?.ok_or("no S0 root")?;
    let (v_l, v_t) = (plate.material.v_l, plate.material.v_t);
    let v_plate = 2.0 * v_t * (1.0 - v_t * v_t / (v_l * v_l)).sqrt();
    let v = 2.0 * PI * f / k;
    ensure(rel(v, v_plate) <= 1e-3, || format!("thin-plate S0 {v} vs {v_plate}"))?;
    let mut worst_scale = 0.0f64;
    for mode in LambMode::ALL {
        for s in [0.5, 3.0, 17.0] {
            let k = 2.0 * PI / 2e-6;
            let a = frequency_at_pitch(&plate, mode, PI / k).map_err(|e| e.to_string())?;
            let b = mode_frequency(&plate.with_thickness(plate.h * s), mode, k / s).map_err(|e| e.to_string())?.ok_or("no root")?;
            worst_scale = worst_scale.max(rel(s * b, a));
        }
    }
    ensure(worst_scale <= 1e-9, || format!("scaling error {worst_scale:.2e}"))?;
    Ok(format!("oracle worst {worst:.1e}, thin plate {:.2e}, scaling {worst_scale:.1e}", rel(v, v_plate)))
}

fn frequency_window() -> Check {
    let plate = PlateSpec::default_stack();
    let f9 = frequency_at_pitch(&plate, LambMode::S0, 4.5e-6).map_err(|e| e.to_string())?;
    let f1 = frequency_at_pitch(&plate, LambMode::S0, 0.5e-6).map_err(|e| e.to_string())?;
    ensure(rel(f9, 700e6) <= 0.15, || format!("λ = 9 µm: {:.1} MHz", f9 * 1e-6))?;
    ensure(rel(f1, 5e9) <= 0.20, || format!("λ = 1 µm: {:.3} GHz", f1 * 1e-9))?;
    Ok(format!("S0 {:.0} MHz at λ = 9 µm, {:.2} GHz at λ = 1 µm", f9 * 1e-6, f1 * 1e-9))
}

fn deviation_split() -> Check {
    let plate = PlateSpec::default_stack();
    let model = VariationModel {
        thickness_center: plate.h,
        thickness_edge_drop: 0.0,
        thickness_noise_sigma: 0.03 * plate.h,
        pitch_sigma: 5e-9,
        ..VariationModel::default()
    };
    let pitches = lambkit::design::DesignCatalog::builtin().pitches_m;
    let geom = WaferGeometry::default();
    let placements = gen_wafer_map(17.0, 3.0, &geom);
    ensure(placements.len() >= 83, || format!("{} placements", placements.len()))?;
    let sites = simulate_wafer(&model, &pitches, &[LambMode::S0, LambMode::S1], &plate, &placements, geom.diameter_mm / 2.0, Execution::default())
        .map_err(|e| e.to_string())?;
    let report = per_mode_deviation(&sites).map_err(|e| e.to_string())?;
    let t = thickness_relstd(&sites).map_err(|e| e.to_string())?;
    let p_max = pitches.iter().copied().fold(0.0, f64::max);
    let s1 = report.row(LambMode::S1, p_max).ok_or("no S1 row")?.relstd_pct;
    ensure(rel(s1, t) <= 0.20, || format!("S1 relstd {s1:.3}% vs thickness {t:.3}%"))?;
    let mut worst_s0 = 0.0f64;
    for &p in pitches.iter().filter(|p| **p >= 1e-6 * (1.0 - 1e-9)) {
        let r = report.row(LambMode::S0, p).ok_or("no S0 row")?.relstd_pct;
        worst_s0 = worst_s0.max(r);
        ensure(r < 1.0, || format!("S0 relstd {r:.3}% at pitch {:.0} nm", p * 1e9))?;
    }
    Ok(format!("thickness {t:.2}%, S1 {s1:.2}% at largest pitch, worst S0 {worst_s0:.2}% (pitch ≥ 1 µm)"))
}

fn round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..200 {
        let lib = common::random_library(&mut rng);
        let bytes = write_gdsii(&lib).map_err(|e| format!("case {case}: {e}"))?;
        let back = read_gdsii(&bytes).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == lib, || format!("library {case} differs after read∘write"))?;
        ensure(write_gdsii(&back).map_err(|e| e.to_string())? == bytes, || format!("library {case} bytes differ"))?;
    }
    let bytes = write_gdsii(&common::random_library(&mut rng)).map_err(|e| e.to_string())?;
    ensure(bytes[..6] == [0x00, 0x06, 0x00, 0x02, 0x02, 0x58], || format!("HEADER {:02x?}", &bytes[..6]))?;
    let mut n = 0;
    for format in DataFormat::ALL {
        for unit in FrequencyUnit::ALL {
            let points = (0..50)
                .map(|i| {
                    let f = 1e8 + 3.7e6 * i as f64;
                    (f, Complex64::from_polar(rng.random_range(0.01..1.0), rng.random_range(-3.1..3.1)))
                })
                .collect();
            let file = TouchstoneFile {
                frequency_unit: unit,
                format,
                z0: 50.0,
                points,
                comments: vec!["synthetic".into()],
            };
            let back = parse_touchstone(&serialize_touchstone(&file)).map_err(|e| e.to_string())?;
            ensure(back.approx_eq(&file, 1e-9), || format!("touchstone {format:?}/{unit:?} differs"))?;
            n += 1;
        }
    }
    Ok(format!("200 GDSII libraries, {n} Touchstone format/unit pairs, HEADER ok"))
}

fn process_rules() -> Check {
    let rates = RateTable::default();
    for a in [Adhesion::AlN, Adhesion::Ti] {
        let v = check_compatibility(&golden_flow(a), &rates).map_err(|e| e.to_string())?;
        let errors = v.iter().filter(|v| v.severity == Severity::Error).count();
        ensure(errors == 0, || format!("{a:?} golden flow: {v:?}"))?;
    }
    for m in Mutation::ALL {
        let v = check_compatibility(&m.apply(), &rates).map_err(|e| e.to_string())?;
        ensure(v.len() == 1 && v[0].code == m.expected(), || format!("{m:?}: {v:?}"))?;
    }
    let table = |target: f64, mask: f64| RateTable {
        entries: vec![
            RateEntry {
                material: "AlScN".into(),
                chemistry: Chemistry::ArIon,
                temperature: None,
                nm_per_min: target,
            },
            RateEntry {
                material: "SiO2".into(),
                chemistry: Chemistry::ArIon,
                temperature: None,
                nm_per_min: mask,
            },
        ],
    };
    let b = etch_budget("SiO2", 800e-9, "AlScN", 400e-9, 0.3, Chemistry::ArIon, &table(24.0, 20.0)).map_err(|e| e.to_string())?;
    let want = 400e-9 * 1.3 / 1.2;
    ensure(rel(b.consumed_mask, want) < 1e-12 && rel(b.remaining_mask, 800e-9 - want) < 1e-12 && b.pass, || format!("selectivity 1.2: {b:?}"))?;
    let b = etch_budget("SiO2", 800e-9, "AlScN", 400e-9, 0.3, Chemistry::ArIon, &table(8.0, 20.0)).map_err(|e| e.to_string())?;
    ensure(rel(b.consumed_mask, 1300e-9) < 1e-12 && !b.pass, || format!("selectivity 0.4: {b:?}"))?;
    let t = ashing_time(400e-9, 250.0, &rates).map_err(|e| e.to_string())?;
    ensure((t - 60.0).abs() < 1e-9, || format!("ashing {t} s"))?;
    let flow = golden_flow(Adhesion::AlN);
    let k1 = &flow.steps[flow.position("k1").ok_or("no k1")?];
    let beam = k1.recipe.as_ref().ok_or("no recipe")?.total_time();
    ensure((beam - 26.0 * 60.0).abs() < 1e-9, || format!("IBE beam time {beam} s"))?;
    Ok("golden flows clean, 5 mutations, budgets 433/1300 nm, ash 60 s, IBE 26 min".into())
}

fn design_rules() -> Check {
    ensure(recommend_dose(250e-9).unwrap() == 21.75, || "dose at 250 nm".into())?;
    for w in [500e-9, 750e-9, 1e-6, 1.5e-6, 2.25e-6] {
        ensure(recommend_dose(w).unwrap() == 20.50, || format!("dose at {w}"))?;
    }
    let plate = PlateSpec::default_stack();
    let cap = CapacitanceModel::default();
    let opts = MatchOptions::default();
    let pitches = lambkit::design::DesignCatalog::builtin().pitches_m;
    let mut worst = 0.0f64;
    for &p in &pitches {
        let d = match_finger_count(p, &plate, &cap, LambMode::S0, 200.0, &opts).map_err(|e| e.to_string())?;
        let n = d.idt.n_fingers;
        let z = |n: u32| {
            let idt = IdtSpec { n_fingers: n, ..d.idt.clone() };
            impedance_magnitude(d.f_mid, static_capacitance(&idt, &cap))
        };
        let quantum = (z(n) - z(n + 2)).abs().max((z(n.saturating_sub(2).max(2)) - z(n)).abs()) / 200.0;
        let err = (z(n) - 200.0).abs() / 200.0;
        worst = worst.max(err);
        ensure(err <= quantum, || format!("pitch {:.0} nm: |Z| {:.2} Ω, quantum {:.4}", p * 1e9, z(n), quantum))?;
        let want = if p <= 1e-6 * (1.0 + 1e-9) { Layer::Small } else { Layer::Large };
        ensure(d.layer == want, || format!("pitch {p}: layer {:?}", d.layer))?;
    }
    ensure(layer_assignment(1.2e-6).is_err(), || "1.2 µm assigned".into())?;
    let n = gen_wafer_map(17.0, 3.0, &WaferGeometry::default()).len();
    ensure(n == 83, || format!("{n} placements"))?;
    Ok(format!("doses exact, worst |Z| mismatch {:.2}%, layers ok, {n} placements", worst * 100.0))
}

fn statistics() -> Check {
    let r = relstd(&[0.99e9, 1.00e9, 1.01e9]).map_err(|e| e.to_string())?;
    // population std of ±0.01 about 1: √(2/3)·0.01
    let oracle = (2.0f64 / 3.0).sqrt() * 1.0;
    ensure((r - 0.8165).abs() <= 1e-4 && (r - oracle).abs() < 1e-9, || format!("relstd {r}"))?;
    let plate = PlateSpec::default_stack();
    let geom = WaferGeometry::default();
    let placements = gen_wafer_map(17.0, 3.0, &geom);
    let run = |exec| {
        let sites = simulate_wafer(&VariationModel::default(), &[1e-6, 4.5e-6], &LambMode::ALL, &plate, &placements, geom.diameter_mm / 2.0, exec).unwrap();
        serde_json::to_vec(&sites).unwrap()
    };
    let a = run(Execution::Parallel);
    ensure(a == run(Execution::Parallel), || "repeat run differs".into())?;
    ensure(a == run(Execution::Sequential), || "sequential run differs".into())?;
    Ok(format!("relstd {r:.6}%, {} byte site dump reproducible", a.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("mBVD round-trip", mbvd_round_trip),
        ("metric formulas", metric_formulas),
        ("dispersion oracle equivalence", dispersion_oracle),
        ("frequency window", frequency_window),
        ("deviation split", deviation_split),
        ("round-trips", round_trips),
        ("process rules", process_rules),
        ("design rules", design_rules),
        ("statistics", statistics),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail} ({:.2} s)", i + 1, t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} ({:.2} s)", i + 1, t.elapsed().as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
