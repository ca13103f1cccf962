//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phasor_snn::phasor::{LabelCode, PhasorNetwork};
use phasor_snn::spike::{fixed_step_oracle, simulate_layer, RfParams, Schedule, Spike, SpikeTrain};
use phasor_snn::phasor::PhasorLayer;
use phasor_snn::trainer::backprop_gradients;

// ---------------------------------------------------------------- gradients

/// Loss and smallest pre-activation magnitude, computed with scalar loops.
fn reference_loss(net: &PhasorNetwork, pixels: &Array2<f64>, labels: &[u8], code: &LabelCode) -> (f64, f64) {
    let layer = |l: &PhasorLayer, x: &[f64], min_s: &mut f64| -> Vec<f64> {
        (0..l.out_width())
            .map(|k| {
                let mut s = Complex64::new(l.bias[k], 0.0);
                for (j, &xj) in x.iter().enumerate() {
                    s += l.weights[[k, j]] * Complex64::from_polar(1.0, PI * xj);
                }
                *min_s = min_s.min(s.norm());
                s.arg() / PI
            })
            .collect()
    };
    let mut total = 0.0;
    let mut min_s = f64::INFINITY;
    for (i, row) in pixels.rows().into_iter().enumerate() {
        let p = net.project(row.as_slice().unwrap()).unwrap();
        let h = layer(&net.hidden, p.as_slice(), &mut min_s);
        let y = layer(&net.output, &h, &mut min_s);
        for (k, yk) in y.iter().enumerate() {
            let t = if k == labels[i] as usize { code.on } else { code.off };
            total += 1.0 - (PI * (yk - t)).cos();
        }
    }
    (total / (pixels.nrows() * net.n_classes()) as f64, min_s)
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub nets: usize,
    pub skipped: usize,
    pub parameters: usize,
    pub worst_relative: f64,
    pub worst_absolute_small: f64,
}

/// Analytic vs fourth-order central differences on random small networks
/// with unequal layer widths. Configurations with any |s| < 1e-6 are skipped.
pub fn gradient_check(n_nets: usize, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = LabelCode::default();
    let mut rep = GradReport::default();
    let h = 1e-3;
    while rep.nets < n_nets {
        let (n_pix, proj, hidden, classes) = (
            rng.random_range(2..6),
            rng.random_range(3..8),
            rng.random_range(2..6),
            rng.random_range(2..5),
        );
        let mut net = PhasorNetwork::new(n_pix, proj, hidden, classes, rng.random()).unwrap();
        for b in net.hidden.bias.iter_mut().chain(net.output.bias.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        let batch = rng.random_range(1..5);
        let pixels = Array2::from_shape_fn((batch, n_pix), |_| rng.random_range(0.0..1.0));
        let labels: Vec<u8> = (0..batch).map(|_| rng.random_range(0..classes as u8)).collect();
        if reference_loss(&net, &pixels, &labels, &code).1 < 1e-6 {
            rep.skipped += 1;
            continue;
        }
        let (_, grads) = backprop_gradients(&net, pixels.view(), &labels, &code).unwrap();
        let analytic: Vec<f64> = grads.iter().copied().collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        let n_params = analytic.len();
        for p in 0..n_params {
            let at = |delta: f64| {
                let mut m = net.clone();
                *param_mut(&mut m, p) += delta;
                reference_loss(&m, &pixels, &labels, &code).0
            };
            numeric.push((-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h));
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            if a.abs() < 1e-8 {
                rep.worst_absolute_small = rep.worst_absolute_small.max((a - n).abs());
            } else {
                rep.worst_relative = rep.worst_relative.max((a - n).abs() / a.abs().max(n.abs()));
            }
        }
        rep.parameters += n_params;
        rep.nets += 1;
    }
    rep
}

/// Parameter `p` in the order of `Gradients::iter`.
fn param_mut(net: &mut PhasorNetwork, mut p: usize) -> &mut f64 {
    let sizes = [
        net.hidden.weights.len(),
        net.hidden.bias.len(),
        net.output.weights.len(),
    ];
    if p < sizes[0] {
        return net.hidden.weights.iter_mut().nth(p).unwrap();
    }
    p -= sizes[0];
    if p < sizes[1] {
        return &mut net.hidden.bias[p];
    }
    p -= sizes[1];
    if p < sizes[2] {
        return net.output.weights.iter_mut().nth(p).unwrap();
    }
    &mut net.output.bias[p - sizes[2]]
}

// ------------------------------------------------------------------- oracle

/// A single-neuron scenario with grid-aligned injections.
pub struct Scenario {
    pub params: RfParams,
    pub layer: PhasorLayer,
    pub input: SpikeTrain,
    pub schedule: Schedule,
}

/// Crossing of the spike angle between injections, from direct superposition.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub time: f64,
    pub magnitude: f64,
}

pub fn closed_form_crossings(s: &Scenario) -> Vec<Crossing> {
    let p = &s.params;
    let g = p.generator();
    let mut inj: Vec<(f64, f64)> = s
        .input
        .events()
        .iter()
        .map(|e| (e.time, s.layer.weights[[0, e.channel]]))
        .chain(s.schedule.bias_times.iter().map(|&t| (t, s.layer.bias[0])))
        .collect();
    inj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_end = s.schedule.t_span.1;
    let target = p.omega().atan2(p.decay);
    let mut out = Vec::new();
    for k in 0..inj.len() {
        let tk = inj[k].0;
        let t_next = inj.get(k + 1).map(|x| x.0).unwrap_or(t_end).min(t_end);
        if t_next <= tk {
            continue;
        }
        let z: Complex64 = inj[..=k].iter().map(|&(tj, w)| w * (g * (tk - tj)).exp()).sum();
        if z.norm() == 0.0 {
            continue;
        }
        let mut dtheta = (target - z.arg()).rem_euclid(TAU);
        if dtheta == 0.0 {
            dtheta = TAU;
        }
        let mut t = tk + dtheta / p.omega();
        while t < t_next {
            out.push(Crossing {
                time: t,
                magnitude: z.norm() * (-p.decay * (t - tk)).exp(),
            });
            t += p.period;
        }
    }
    out
}

pub fn random_scenario(rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
    let params = RfParams {
        period: 1.0,
        decay: rng.random_range(0.2..2.0),
        threshold: 0.05,
    };
    let m = rng.random_range(1..5);
    let weights = Array2::from_shape_fn((1, m), |_| {
        let w: f64 = rng.random_range(0.1..1.5);
        if rng.random_bool(0.5) {
            w
        } else {
            -w
        }
    });
    let bias = ndarray::arr1(&[rng.random_range(-0.4..0.4)]);
    let layer = PhasorLayer::new(weights, bias, true).unwrap();
    let span = (0.0, 4.0);
    let steps_per_period = (params.period / dt).round() as usize;
    let events: Vec<Spike> = (0..rng.random_range(1..7))
        .map(|_| Spike {
            channel: rng.random_range(0..m),
            time: rng.random_range(0..3 * steps_per_period) as f64 * dt,
        })
        .collect();
    let input = SpikeTrain::new(m, span, events).unwrap();
    let schedule = Schedule {
        bias_times: (0..4).map(|c| c as f64 * params.period).collect(),
        t_span: span,
    };
    Scenario {
        params,
        layer,
        input,
        schedule,
    }
}

/// True when the scenario is well conditioned: no crossing close to an
/// injection or to the span end, and no crossing magnitude within 0.5% of θ.
pub fn well_conditioned(s: &Scenario, dt: f64) -> bool {
    let theta = s.params.threshold;
    let inj: Vec<f64> = s
        .input
        .events()
        .iter()
        .map(|e| e.time)
        .chain(s.schedule.bias_times.iter().copied())
        .chain([s.schedule.t_span.1])
        .collect();
    closed_form_crossings(s).iter().all(|c| {
        (c.magnitude - theta).abs() > 0.005 * theta
            && (c.magnitude < theta || inj.iter().all(|&t| (c.time - t).abs() > 3.0 * dt))
    })
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub scenarios: usize,
    pub rejected: usize,
    pub spikes: usize,
    pub count_mismatches: usize,
    pub closed_form_mismatches: usize,
    pub max_time_error: f64,
}

/// Event-driven vs fixed-step simulation on `n` accepted random scenarios.
pub fn oracle_equivalence(n: usize, seed: u64) -> OracleReport {
    let dt = 1.0 / 2000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = OracleReport::default();
    while rep.scenarios < n {
        let s = random_scenario(&mut rng, dt);
        if !well_conditioned(&s, dt) {
            rep.rejected += 1;
            continue;
        }
        rep.scenarios += 1;
        let event = simulate_layer(&s.input, &s.layer, &s.params, &s.schedule).unwrap();
        let grid = fixed_step_oracle(&s.input, &s.layer, &s.params, &s.schedule, dt).unwrap();
        let expected = closed_form_crossings(&s)
            .iter()
            .filter(|c| c.magnitude >= s.params.threshold)
            .count();
        if event.len() != expected {
            rep.closed_form_mismatches += 1;
        }
        if event.len() != grid.len() {
            rep.count_mismatches += 1;
            continue;
        }
        rep.spikes += event.len();
        for (a, b) in event.events().iter().zip(grid.events()) {
            rep.max_time_error = rep.max_time_error.max((a.time - b.time).abs());
        }
    }
    rep
}

// ----------------------------------------------------------------- formats

/// Checks SVG well-formedness and the chart structure; returns the number of polylines.
pub fn validate_svg(svg: &str) -> Result<usize, String> {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_str(svg);
    let mut depth = 0i32;
    let mut root_ok = false;
    let mut polylines = 0;
    let mut texts = Vec::new();
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) | Event::Empty(e) if depth == 0 && !root_ok => {
                if e.name().as_ref() != b"svg" {
                    return Err("root element is not <svg>".into());
                }
                let vb = e
                    .try_get_attribute("viewBox")
                    .map_err(|e| e.to_string())?
                    .ok_or("missing viewBox")?;
                if vb.value.as_ref() != b"0 0 800 600" {
                    return Err(format!("viewBox {:?}", String::from_utf8_lossy(&vb.value)));
                }
                root_ok = true;
                depth += 1;
            }
            Event::Start(e) => {
                depth += 1;
                if e.name().as_ref() == b"polyline" {
                    polylines += 1;
                }
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"polyline" {
                    polylines += 1;
                }
            }
            Event::End(_) => depth -= 1,
            Event::Text(t) => texts.push(t.decode().map_err(|e| e.to_string())?.trim().to_string()),
            Event::Eof => break,
            _ => {}
        }
    }
    if !root_ok || depth != 0 {
        return Err("unbalanced document".into());
    }
    for tick in ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0"] {
        if texts.iter().filter(|t| t.as_str() == tick).count() < 2 {
            return Err(format!("missing tick label {tick} on both axes"));
        }
    }
    Ok(polylines)
}

/// Checks a sweep CSV against its schema and the relative-accuracy law.
pub fn validate_sweep_csv(text: &str) -> Result<usize, String> {
    let mut lines = text.lines();
    if lines.next() != Some("method,parameter,fraction_removed,accuracy,relative_accuracy,n_images,seed") {
        return Err("bad header".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format!("line {}: {} fields", i + 2, f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: {s:?} is not a number", i + 2));
        let (param, frac, acc, rel) = (num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?);
        f[5].parse::<usize>().map_err(|_| format!("line {}: n_images", i + 2))?;
        f[6].parse::<u64>().map_err(|_| format!("line {}: seed", i + 2))?;
        if !(0.0..=1.0).contains(&frac) || !(0.0..=1.0).contains(&acc) || param < 0.0 {
            return Err(format!("line {}: value out of range", i + 2));
        }
        rows.push((acc, rel));
    }
    // every row implies the same baseline
    let baselines: Vec<f64> = rows.iter().filter(|r| r.1 > 0.0).map(|r| r.0 / r.1).collect();
    if let Some(&b) = baselines.first() {
        if baselines.iter().any(|x| (x - b).abs() > 1e-9) {
            return Err("relative_accuracy is not accuracy / one baseline".into());
        }
    }
    Ok(rows.len())
}

/// Writes a gzip'd IDX pair of synthetic 28×28 images whose class sets the
/// position of a bright bar, so a tiny network can learn it.
pub fn write_synthetic_split(dir: &std::path::Path, prefix: &str, n: usize, seed: u64) {
    use std::io::Write;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    for v in [2051u32, n as u32, 28, 28] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    let mut labels = Vec::new();
    for v in [2049u32, n as u32] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    for _ in 0..n {
        let class: u8 = rng.random_range(0..10);
        labels.push(class);
        for r in 0..28 {
            for c in 0..28 {
                let on = (r / 3) == class as usize || (c / 3) == class as usize;
                let noise: u8 = rng.random_range(0..40);
                images.push(if on { 215 + noise } else { noise });
            }
        }
    }
    for (name, bytes) in [(format!("{prefix}-images-idx3-ubyte.gz"), images), (format!("{prefix}-labels-idx1-ubyte.gz"), labels)] {
        let f = std::fs::File::create(dir.join(name)).unwrap();
        let mut gz = flate2::write::GzEncoder::new(f, flate2::Compression::fast());
        gz.write_all(&bytes).unwrap();
        gz.finish().unwrap();
    }
}

// ------------------------------------------------------------ coding, laws

/// Independent wrap into [-1, 1).
pub fn wrap(x: f64) -> f64 {
    (x + 1.0).rem_euclid(2.0) - 1.0
}

/// Worst circular error of encode → decode over a 64-phase grid, cycles
/// 0–5, several periods and offsets, with and without conjugation.
pub fn grid_round_trip_error() -> f64 {
    use phasor_snn::phasor::PhaseVector;
    use phasor_snn::spike::{decode_spikes, encode_spikes};
    let grid: Vec<f64> = (0..64).map(|i| -1.0 + i as f64 / 32.0).collect();
    let mut worst = 0.0f64;
    for period in [1.0, 0.37] {
        for offset in [0.0, 0.25 * period, 0.731] {
            for cycle in 0..=5 {
                for conj in [false, true] {
                    // with conjugation the encoder sees the negated phase
                    let sent: Vec<f64> = grid.iter().map(|&g| if conj { wrap(-g) } else { g }).collect();
                    let train = encode_spikes(&PhaseVector::new(sent).unwrap(), cycle, offset, period);
                    let start = cycle as f64 * period + offset;
                    let back = decode_spikes(&train, offset, (start, start + period), period, conj);
                    for (g, d) in grid.iter().zip(back.as_slice()) {
                        worst = worst.max(wrap(g - d).abs());
                    }
                }
            }
        }
    }
    worst
}

/// Whether every cycle (counted from the span start) holding a spike also
/// holds an inhibition peak.
pub fn every_occupied_cycle_has_a_peak(train: &SpikeTrain, period: f64, kernel_tau: f64, bin_dt: f64) -> bool {
    use phasor_snn::sparsify::{compute_lfp, detect_inhibition_peaks};
    let t0 = train.t_span().0;
    let peaks = detect_inhibition_peaks(&compute_lfp(train, kernel_tau, bin_dt), period);
    let cycle = |t: f64| ((t - t0) / period).floor() as i64;
    train.events().iter().all(|s| peaks.iter().any(|&p| cycle(p) == cycle(s.time)))
}
