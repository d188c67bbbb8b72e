//! Acceptance gates. Runs without the libtest harness so that one PASS/FAIL
//! line per criterion is always printed; exits non-zero if any gate fails.

use std::time::{Duration, Instant};

use rand::Rng as _;

use socketvib::dsp::{dft321, pca_reduce, PipelineConfig};
use socketvib::lstm::{evaluate, loss_and_gradient, reference_preset, train, Batch, ModelParams, NetworkSpec, TrainConfig};
use socketvib::metrics::{binomial_upper_tail, chance_level};
use socketvib::report::{perception_accuracy, TransmissionReport};
use socketvib::rng::rng_from;
use socketvib::signal::{split_dataset, AxisTraceSet, Finger, WINDOW_LEN};
use socketvib::sim::{build_hand_model, impact_network, Body, GroundLink, HandArchetype, ImpactorConfig, Integrator, Network};
use socketvib::workflow::{generate_dataset, transmission_summary};

type Outcome = Result<String, String>;

fn gate(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn random_axes(r: &mut socketvib::rng::Rng) -> [Vec<f64>; 3] {
    std::array::from_fn(|_| (0..WINDOW_LEN).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn trace(a: &[Vec<f64>; 3]) -> AxisTraceSet {
    AxisTraceSet::new(0, 1000.0, a[0].clone(), a[1].clone(), a[2].clone()).unwrap()
}

fn parseval() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng_from(1, &[1]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let axes = random_axes(&mut r);
        let time_energy: f64 = axes.iter().flatten().map(|v| v * v).sum();
        let reduced = dft321(&trace(&axes)).map_err(|e| e.to_string())?;
        let e: f64 = reduced.samples.iter().map(|v| v * v).sum();
        worst = worst.max((e - time_energy).abs() / time_energy);
    }
    let dt = t0.elapsed();
    gate(
        worst < 1e-9 && dt < Duration::from_secs(5),
        format!("max relative energy error {worst:.2e} over 1000 signals in {:.2} s", secs(dt)),
    )
}

fn gradient() -> Outcome {
    let t0 = Instant::now();
    let spec = NetworkSpec {
        input_features: 5,
        seq_len: 20,
        dense_units: 6,
        lstm_hidden: 8,
        dropout: 0.2,
        n_blocks: 2,
        n_classes: 5,
    };
    let mut r = rng_from(2, &[2]);
    let data: Vec<f64> = (0..2 * 20 * 5).map(|_| r.random_range(-1.0..1.0)).collect();
    let batch = Batch::from_sequences(2, 20, 5, &data, vec![1, 3]).map_err(|e| e.to_string())?;
    let mut p = ModelParams::random(&spec, 21, 0.5).map_err(|e| e.to_string())?;
    let drop_seed = 11;
    let (_, g, _) = loss_and_gradient(&p, &batch, drop_seed).map_err(|e| e.to_string())?;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..p.theta.len() {
        let orig = p.theta[i];
        p.theta[i] = orig + eps;
        let up = loss_and_gradient(&p, &batch, drop_seed).map_err(|e| e.to_string())?.0;
        p.theta[i] = orig - eps;
        let down = loss_and_gradient(&p, &batch, drop_seed).map_err(|e| e.to_string())?.0;
        p.theta[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        // Floor sits above the difference quotient's round-off (~1e-16 * loss / eps).
        let rel = (g.flat[i] - numeric).abs() / g.flat[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    let dt = t0.elapsed();
    gate(
        worst < 1e-4 && dt < Duration::from_secs(60),
        format!("max relative error {worst:.2e} over {} parameters in {:.2} s", p.theta.len(), secs(dt)),
    )
}

fn single_dof_error() -> f64 {
    let (k, m, x0, dt) = (400.0_f64, 1.0, 0.01, 5e-5);
    let w = (k / m).sqrt();
    let net = Network {
        bodies: vec![Body { name: "m".into(), mass: m, rest: [0.0; 3] }],
        ground_links: vec![GroundLink { body: 0, stiffness: [k; 3], damping: [0.0; 3] }],
        ..Network::default()
    };
    let mut it = Integrator::new(&net, dt, vec![[x0, 0.0, 0.0]], vec![[0.0; 3]]).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..=(0.3 / dt).round() as usize {
        it.step().unwrap();
        worst = worst.max((it.displacement(0)[0] - x0 * (w * n as f64 * dt).cos()).abs() / x0);
    }
    worst
}

fn drift(a: HandArchetype) -> f64 {
    let mut model = build_hand_model(a).without_damping();
    model.pad.damping = 0.0;
    let imp = ImpactorConfig { contact_damping: 0.0, ..ImpactorConfig::hammer().without_jitter() };
    let net = impact_network(&model, &imp, Finger::Index, [0.0, 0.0, 1.0], 1e-3);
    let n = net.bodies.len();
    let mut v0 = vec![[0.0; 3]; n];
    v0[n - 1] = [0.0, 0.0, imp.hammer_speed];
    let mut it = Integrator::new(&net, model.internal_step, vec![[0.0; 3]; n], v0).unwrap();
    let mut touched = false;
    while !(touched && !it.in_contact()) {
        touched |= it.in_contact();
        it.step().unwrap();
    }
    let e0 = it.mechanical_energy();
    let (mut lo, mut hi) = (e0, e0);
    while it.time() < 0.5 {
        it.step().unwrap();
        if !it.in_contact() {
            let e = it.mechanical_energy();
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    (hi - lo) / e0
}

fn simulator() -> Outcome {
    let amp = single_dof_error();
    let worst_drift = HandArchetype::ALL.iter().map(|&a| drift(a)).fold(0.0, f64::max);
    gate(
        amp < 1e-3 && worst_drift < 0.005,
        format!("single-DOF amplitude error {amp:.2e}; worst post-contact energy drift {:.4}%", worst_drift * 100.0),
    )
}

/// Σd² of the rank differences for distinct values; ρ = 1 - 6 Σd² / (n (n² - 1)).
fn rank_d2(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64 + 1.0;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum()
}

fn transmission() -> Outcome {
    let t0 = Instant::now();
    let cfg = PipelineConfig::default();
    let imp = ImpactorConfig::hammer();
    let summaries = HandArchetype::ALL
        .iter()
        .map(|&a| transmission_summary(&build_hand_model(a), &imp, &cfg, 25, 1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let report = TransmissionReport::new(summaries).map_err(|e| e.to_string())?;
    let dt = t0.elapsed();
    let e = |a: HandArchetype| report.summaries[a.index()].mean;
    let (ch, vp, il, sh) = (e(HandArchetype::Ch), e(HandArchetype::Vp), e(HandArchetype::Il), e(HandArchetype::Sh));
    let energies = [ch, vp, il, sh];
    let acc = HandArchetype::ALL.map(perception_accuracy);
    // With n = 4, Σd² = 2 is ρ = 1 - 12/60 = 0.8 exactly.
    let d2 = rank_d2(&energies, &acc);
    let rho = report.rho;
    let order = ch.min(vp) > il && il > sh;
    let rho_ok = rho.is_some_and(|r| (r - 0.8).abs() < 1e-12);
    gate(
        order && d2 == 2.0 && rho_ok && dt < Duration::from_secs(120),
        format!(
            "mean energies CH {ch:.1}, VP {vp:.1}, IL {il:.1}, SH {sh:.1}; rank sum of squares {d2}, rho {}; {:.1} s",
            show(rho),
            secs(dt)
        ),
    )
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

/// P(X ≥ k) for X ~ Binomial(n, p), summing the pmf term by term.
fn binomial_tail(k: u64, n: u64, p: f64) -> f64 {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut tail = if k == 0 { pmf } else { 0.0 };
    for i in 1..=n {
        pmf *= (n - i + 1) as f64 / i as f64 * p / (1.0 - p);
        if i >= k {
            tail += pmf;
        }
    }
    tail
}

struct HandResult {
    line: String,
    ok: bool,
    identity_ok: bool,
}

fn classify_hand(a: HandArchetype) -> Result<HandResult, String> {
    let t0 = Instant::now();
    let d = generate_dataset(&build_hand_model(a), &ImpactorConfig::hammer(), &PipelineConfig::default(), 100, 1)
        .map_err(|e| e.to_string())?;
    let (tr, va, te) = split_dataset(&d, [0.8, 0.1, 0.1], 2).map_err(|e| e.to_string())?;
    let sizes = (tr.len(), va.len(), te.len());
    let (spec, cfg) = reference_preset(a, 3);
    let (params, _) = train(&spec, &cfg, &tr, &va).map_err(|e| e.to_string())?;
    let r = evaluate(&params, &te).map_err(|e| e.to_string())?;
    let dt = t0.elapsed();
    let n = te.len() as u64;
    let hits = r.confusion.counts().iter().enumerate().map(|(i, row)| row[i]).sum::<u64>();
    let p = binomial_tail(hits, n, 0.2);
    let lib_p = binomial_upper_tail(hits, n, 0.2);
    let floor = if matches!(a, HandArchetype::Ch | HandArchetype::Vp) { 0.6 } else { 0.0 };
    let ok = sizes == (400, 50, 50)
        && p < 0.01
        && (p - lib_p).abs() <= 1e-12 * p.max(1e-300) + 1e-300
        && r.accuracy >= floor
        && dt < Duration::from_secs(600);
    let identity_ok = r.confusion.is_balanced() && r.accuracy == r.macro_recall.value;
    Ok(HandResult {
        line: format!(
            "{} test acc {:.0}% ({hits}/{n}), p = {p:.1e}, {:.0} s",
            a.code(),
            r.accuracy * 100.0,
            secs(dt)
        ),
        ok,
        identity_ok,
    })
}

fn rotation(rng: &mut socketvib::rng::Rng) -> [[f64; 3]; 3] {
    // Uniform unit quaternion.
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(axes: &[Vec<f64>; 3], m: &[[f64; 3]; 3]) -> [Vec<f64>; 3] {
    std::array::from_fn(|r| (0..WINDOW_LEN).map(|i| (0..3).map(|c| m[r][c] * axes[c][i]).sum()).collect())
}

fn rotations() -> Outcome {
    let mut r = rng_from(7, &[7]);
    // Anisotropic signal so the principal axis is well defined.
    let base = random_axes(&mut r);
    let axes = [base[0].iter().map(|v| 3.0 * v).collect(), base[1].clone(), base[2].iter().map(|v| 0.3 * v).collect()];
    let pca_e = |a: &[Vec<f64>; 3]| pca_reduce(&trace(a)).map(|t| t.samples.iter().map(|v| v * v).sum::<f64>());
    let dft = dft321(&trace(&axes)).map_err(|e| e.to_string())?;
    let e0 = pca_e(&axes).map_err(|e| e.to_string())?;
    let (mut worst, mut largest_change): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let rot = rotate(&axes, &rotation(&mut r));
        let e = pca_e(&rot).map_err(|e| e.to_string())?;
        worst = worst.max((e - e0).abs() / e0);
        let d = dft321(&trace(&rot)).map_err(|e| e.to_string())?;
        let l2 = d.samples.iter().zip(&dft.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        largest_change = largest_change.max(l2);
    }
    gate(
        worst < 1e-9 && largest_change > 1e-3,
        format!("PCA energy relative change {worst:.2e}; largest DFT321 L2 change {largest_change:.3}"),
    )
}

fn full_run(seed: u64) -> Result<String, String> {
    let a = HandArchetype::Sh;
    let d = generate_dataset(&build_hand_model(a), &ImpactorConfig::hammer(), &PipelineConfig::default(), 10, seed)
        .map_err(|e| e.to_string())?;
    let (tr, va, te) = split_dataset(&d, [0.6, 0.2, 0.2], seed).map_err(|e| e.to_string())?;
    let spec = NetworkSpec::new(12, 12);
    let cfg = TrainConfig { learning_rate: 0.003, epochs: 5, batch_size: 8, seed };
    let (params, hist) = train(&spec, &cfg, &tr, &va).map_err(|e| e.to_string())?;
    let report = evaluate(&params, &te).map_err(|e| e.to_string())?;
    Ok(format!("{}{}", hist.to_csv(), report.to_text()))
}

fn determinism() -> Outcome {
    let a = full_run(5)?;
    // Second run on another thread, so scheduling differs.
    let b = std::thread::spawn(|| full_run(5)).join().map_err(|_| "rerun panicked".to_string())??;
    gate(a.as_bytes() == b.as_bytes(), format!("two runs produced {} identical report bytes", a.len()))
}

fn main() {
    // Run only when tests are requested; `cargo test -- --list` and filters
    // that do not match "acceptance" skip the suite.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let (tag, detail) = match o {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n} [{tag}] {name}: {detail}");
    };

    report(1, "DFT321 Parseval", parseval());
    report(2, "gradient check", gradient());
    report(3, "simulator oracle", simulator());
    report(4, "transmission trend", transmission());

    let hands: Result<Vec<HandResult>, String> = HandArchetype::ALL.iter().map(|&a| classify_hand(a)).collect();
    let cl = chance_level(5).ok();
    let (c5, c6) = match hands {
        Ok(hs) => (
            gate(hs.iter().all(|h| h.ok), hs.iter().map(|h| h.line.as_str()).collect::<Vec<_>>().join("; ")),
            gate(
                hs.iter().all(|h| h.identity_ok) && cl == Some(20.0),
                format!("accuracy == macro recall on all four balanced test sets; chance_level(5) = {}", show(cl)),
            ),
        ),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    report(5, "classifier above chance", c5);
    report(6, "metric identities", c6);
    report(7, "rotation properties", rotations());
    report(8, "determinism", determinism());

    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
