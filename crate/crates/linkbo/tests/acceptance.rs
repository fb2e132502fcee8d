//! Acceptance suite. Each test writes one PASS/FAIL line to stderr, which
//! is shown even when test output is captured.

use std::io::Write;
use std::sync::OnceLock;

use linkbo::config::{BusKind, ExperimentConfig, ExperimentKind, Range, SweepParameter};
use linkbo::experiments::{
    has_cliff, knee, run_clock_skew_grid, run_latency_experiment, run_length_sweep, run_max_bitrate_search,
    run_param_sweep, series, SweepRow,
};
use linkbo::output;
use linkbo::stream::MessageClass;
use linkbo::table2::table2;
use linkbo_core::baselines::{onewire_row, OneWireTiming};
use linkbo_core::channel::{Attachment, LineLevel};
use linkbo_core::coding::{halves_trace, manchester_halves};
use linkbo_core::crc::{crc4_bits, crc4_check};
use linkbo_core::endpoint::{decode_trace, DeviceConfig, DeviceEvent, Outcome, RxEvent, TransmissionReport};
use linkbo_core::frame::{plan_frame, sync_halves, Message};
use linkbo_core::network::Network;
use linkbo_core::time::{ClockDomain, SimTime};
use linkbo_core::trace::DigitalTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {id} {name}: {verdict} ({detail})");
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

// 1

#[test]
fn c1_exact_rate_frame_timing() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Latency);
    cfg.repetitions = 5;
    cfg.devices.tx.exact_rate = true;
    cfg.devices.rx.exact_rate = true;
    cfg.channel.bus = BusKind::Ideal;
    let rows = run_latency_experiment(&cfg).unwrap();
    let lat = |kind, size| {
        rows.iter().find(|r| r.kind == kind && r.size_bytes == size).and_then(|r| r.latency_us).unwrap_or(f64::NAN)
    };
    let (hp, lp1, lp7) = (lat(MessageClass::Hp, 1), lat(MessageClass::Lp, 1), lat(MessageClass::Lp, 7));
    let all = rows.iter().all(|r| r.delivered == r.total);
    let pass = all && (hp - 50.4).abs() <= 0.5 && within(lp1, 60.6, 0.02) && within(lp7, 224.4, 0.02);
    report("1", "exact-rate frame timing", pass, &format!("hp {hp:.2} us, lp1 {lp1:.2} us, lp7 {lp7:.2} us"));
    assert!(pass);
}

// 2

#[test]
fn c2_protocol_comparison_table() {
    let rows = table2();
    let lb = rows.iter().find(|r| r.protocol == "LinkBo").unwrap();
    let ow = onewire_row(&OneWireTiming::default());
    let bit_rate_ok =
        [lb.bit_rate_kbps.0, lb.bit_rate_kbps.1].iter().all(|b| (294.8 * 0.98..=297.6 * 1.02).contains(b));
    let ebr_ok = within(lb.ebr_kbps.0, 158.72, 0.02) && within(lb.ebr_kbps.1, 252.5, 0.02);
    let lat_ok = within(lb.latency_us.0, 50.4, 0.02) && within(lb.latency_us.1, 223.8, 0.02);
    let ow_ok = (ow.bit_rate - 1e3 / 60.0).abs() < 1e-9 && (ow.bit_rate - 16.66).abs() < 0.01 && ow.latency == 4800.0;
    let pass = bit_rate_ok && ebr_ok && lat_ok && ow_ok;
    report(
        "2",
        "protocol comparison table",
        pass,
        &format!(
            "linkbo {:.1}-{:.1} kbps, ebr {:.2}-{:.2} kbps, latency {:.2}-{:.2} us; 1-wire {:.3} kbps, sync {} us",
            lb.bit_rate_kbps.0,
            lb.bit_rate_kbps.1,
            lb.ebr_kbps.0,
            lb.ebr_kbps.1,
            lb.latency_us.0,
            lb.latency_us.1,
            ow.bit_rate,
            ow.latency
        ),
    );
    assert!(pass);
}

// 3

fn codeword(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    let mut v: Vec<bool> = (0..n - 4).map(|_| rng.gen()).collect();
    let crc = crc4_bits(&v);
    v.extend_from_slice(&crc);
    v
}

#[test]
fn c3_crc_detection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut missed_short = 0usize;
    for n in 15..=66 {
        let cw = codeword(&mut rng, n);
        assert!(crc4_check(&cw));
        // every burst of width 1..=4: first and last bits flipped, inner bits free
        for width in 1..=4usize {
            let inner = width.saturating_sub(2);
            for mid in 0..(1u32 << inner) {
                for start in 0..=n - width {
                    let mut bad = cw.clone();
                    bad[start] ^= true;
                    if width > 1 {
                        bad[start + width - 1] ^= true;
                    }
                    for j in 0..inner {
                        bad[start + 1 + j] ^= mid >> j & 1 == 1;
                    }
                    missed_short += crc4_check(&bad) as usize;
                }
            }
        }
    }
    let trials = 100_000;
    let mut detected = 0usize;
    for _ in 0..trials {
        let n = rng.gen_range(15..=66);
        let width = rng.gen_range(5..=12);
        let mut bad = codeword(&mut rng, n);
        let start = rng.gen_range(0..=n - width);
        bad[start] ^= true;
        bad[start + width - 1] ^= true;
        for j in 1..width - 1 {
            bad[start + j] ^= rng.gen::<bool>();
        }
        detected += !crc4_check(&bad) as usize;
    }
    let rate = detected as f64 / trials as f64;
    let pass = missed_short == 0 && (rate - 0.9375).abs() <= 0.015;
    report(
        "3",
        "crc detection",
        pass,
        &format!("{missed_short} short bursts missed, long-burst detection {:.2}%", rate * 100.0),
    );
    assert!(pass);
}

// 4

#[test]
fn c4_clock_offset_grid() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::SkewGrid);
    cfg.repetitions = 10;
    let rows = run_clock_skew_grid(&cfg).unwrap();
    let grid: Vec<_> = rows.iter().filter(|r| r.in_grid).collect();
    let ok = grid.iter().filter(|r| r.passed()).count();
    let pass = grid.len() == 121 && ok == grid.len();
    report("4", "clock offset grid", pass, &format!("{ok}/{} cells delivered every message", grid.len()));
    assert!(pass);
}

// 5

fn reports(net: &Network, node: usize) -> Vec<TransmissionReport> {
    net.events(node)
        .iter()
        .filter_map(|e| match e {
            DeviceEvent::Tx(r) => Some(r.clone()),
            _ => None,
        })
        .collect()
}

fn rx_events(net: &Network, node: usize) -> (Vec<Message>, usize) {
    let mut got = Vec::new();
    let mut crc = 0;
    for e in net.events(node) {
        match e {
            DeviceEvent::Rx { event: RxEvent::Received { message, .. }, .. } => got.push(message.clone()),
            DeviceEvent::Rx { event: RxEvent::CrcRejected { .. }, .. } => crc += 1,
            _ => {}
        }
    }
    (got, crc)
}

fn at_phase(phase: u64) -> DeviceConfig {
    DeviceConfig { phase_offset: phase, ..DeviceConfig::default() }
}

const SLOT_PS: u64 = 3_333_330;

/// Three senders start together: one wins, the listener sees its frame
/// intact, and the losers get through afterwards.
fn contention_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut msgs: Vec<Message> = Vec::new();
    while msgs.len() < 3 {
        let n = rng.gen_range(1..=3);
        let m = Message::lp(&(0..n).map(|_| rng.gen()).collect::<Vec<u8>>()).unwrap();
        if !msgs.contains(&m) {
            msgs.push(m);
        }
    }
    let mut net = Network::ideal();
    let senders: Vec<usize> =
        (0..3).map(|_| net.add_device(at_phase(rng.gen_range(0..300_000)), Attachment::Far).unwrap()).collect();
    let listener = net.add_device(DeviceConfig::default(), Attachment::Near).unwrap();
    for (&s, m) in senders.iter().zip(&msgs) {
        net.submit_at(s, SimTime::ZERO, m.clone()).unwrap();
    }
    net.run_until(SimTime::from_us(2_000)).unwrap();
    let first: Vec<TransmissionReport> = senders.iter().filter_map(|&s| reports(&net, s).into_iter().next()).collect();
    let t0 = first.iter().map(|r| r.start).min().ok_or("no transmission")?;
    let winners: Vec<_> =
        first.iter().filter(|r| r.start - t0 < 1_000_000 && r.outcome == Outcome::Delivered).collect();
    if winners.len() != 1 {
        return Err(format!("{} winners", winners.len()));
    }
    let (got, crc) = rx_events(&net, listener);
    if crc != 0 || got.first() != Some(&winners[0].message) {
        return Err(format!("listener saw {got:?} with {crc} crc failures"));
    }
    if got.len() != 3 {
        return Err(format!("only {} of 3 frames delivered", got.len()));
    }
    Ok(())
}

/// An HP frame raised mid-LP preempts it within two slots; both end up
/// delivered.
fn preemption_case(rng: &mut ChaCha8Rng) -> Result<bool, String> {
    let mut net = Network::ideal();
    let a = net.add_device(DeviceConfig::default(), Attachment::Near).unwrap();
    let b = net.add_device(at_phase(rng.gen_range(0..300_000)), Attachment::Far).unwrap();
    let c = net.add_device(DeviceConfig::default(), Attachment::Far).unwrap();
    let lp = Message::lp(&(0..7).map(|_| rng.gen()).collect::<Vec<u8>>()).unwrap();
    let hp = Message::Hp(rng.gen());
    net.submit_at(a, SimTime::ZERO, lp.clone()).unwrap();
    net.submit_at(b, SimTime::from_us(rng.gen_range(20..200)), hp.clone()).unwrap();
    net.run_until(SimTime::from_us(1_200)).unwrap();
    let hp_r = reports(&net, b);
    let lp_r = reports(&net, a);
    if hp_r.len() != 1 || hp_r[0].outcome != Outcome::Delivered {
        return Err(format!("hp reports {hp_r:?}"));
    }
    if lp_r.last().map(|r| r.outcome) != Some(Outcome::Delivered) {
        return Err(format!("lp never delivered: {lp_r:?}"));
    }
    let preempted = lp_r.iter().any(|r| r.outcome == Outcome::Preempted);
    if preempted && hp_r[0].start - hp_r[0].submitted_at > 2 * SLOT_PS {
        return Err(format!("hp reached the bus after {} ps", hp_r[0].start - hp_r[0].submitted_at));
    }
    let (got, _) = rx_events(&net, c);
    if !got.contains(&hp) || !got.contains(&lp) {
        return Err(format!("bystander saw {got:?}"));
    }
    Ok(preempted)
}

#[test]
fn c5_arbitration_and_preemption() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut errors = Vec::new();
    for _ in 0..40 {
        if let Err(e) = contention_case(&mut rng) {
            errors.push(format!("contention: {e}"));
        }
    }
    let mut preemptions = 0;
    for _ in 0..40 {
        match preemption_case(&mut rng) {
            Ok(p) => preemptions += p as usize,
            Err(e) => errors.push(format!("preemption: {e}")),
        }
    }
    let pass = errors.is_empty() && preemptions > 0;
    report(
        "5",
        "arbitration and preemption",
        pass,
        &format!("40 contention and 40 preemption cases, {preemptions} preempted, {} errors", errors.len()),
    );
    assert!(pass, "{errors:#?}");
}

// 6

const CLOCK_PS: u64 = 1_000_000;
const SLOT: u64 = 10 * CLOCK_PS;

fn frame_trace(msg: &Message) -> DigitalTrace {
    let mut halves = vec![LineLevel::High; 4];
    halves.extend(plan_frame(msg).halves());
    halves.extend([LineLevel::High; 6]);
    halves_trace(halves, SLOT / 2).shifted(CLOCK_PS / 2)
}

/// Nominal sync, then data bits that each run 10% long.
fn drifting_trace(msg: &Message) -> DigitalTrace {
    let plan = plan_frame(msg);
    let mut trace = DigitalTrace::new();
    trace.push_change(SimTime(0), LineLevel::High);
    let mut t = SimTime(CLOCK_PS / 2 + 2 * SLOT);
    for level in sync_halves(plan.sync_class()) {
        trace.push_change(t, level);
        t = t + SLOT / 2;
    }
    let stretched = SLOT * 11 / 10;
    for bit in plan.coded_bits() {
        let [a, b] = manchester_halves(bit);
        trace.push_change(t, a);
        t = t + stretched / 2;
        trace.push_change(t, b);
        t = t + stretched / 2;
    }
    trace.push_change(t, LineLevel::High);
    trace.set_end(t + 4 * SLOT);
    trace
}

fn decoded(trace: &DigitalTrace, config: &DeviceConfig) -> Vec<Message> {
    let clock = ClockDomain::from_period_ps(CLOCK_PS, 0).unwrap();
    decode_trace(trace, &clock, config)
        .into_iter()
        .filter_map(|(_, e)| match e {
            RxEvent::Received { message, .. } => Some(message),
            _ => None,
        })
        .collect()
}

#[test]
fn c6_roundtrip_and_resync() {
    let config = DeviceConfig::default();
    let hp_ok = (0..=255u8).filter(|&b| decoded(&frame_trace(&Message::Hp(b)), &config) == [Message::Hp(b)]).count();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lp_ok = 0;
    for size in 1..=7 {
        for _ in 0..1000 {
            let msg = Message::lp(&(0..size).map(|_| rng.gen()).collect::<Vec<u8>>()).unwrap();
            lp_ok += (decoded(&frame_trace(&msg), &config) == [msg]) as usize;
        }
    }
    let msg = Message::lp(&[0x5A, 0xC3]).unwrap();
    let drift = drifting_trace(&msg);
    let with = decoded(&drift, &DeviceConfig { resync: true, ..Default::default() }) == [msg];
    let without = decoded(&drift, &DeviceConfig { resync: false, ..Default::default() }).is_empty();
    let pass = hp_ok == 256 && lp_ok == 7000 && with && without;
    report(
        "6",
        "roundtrip and resync",
        pass,
        &format!("hp {hp_ok}/256, lp {lp_ok}/7000, drift decoded with resync: {with}, rejected without: {without}"),
    );
    assert!(pass);
}

// 7

fn sensitivity_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.repetitions = 10;
    cfg.channel.bus = BusKind::Analog;
    cfg
}

fn param_sweep() -> &'static [SweepRow] {
    static ROWS: OnceLock<Vec<SweepRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut cfg = sensitivity_config(ExperimentKind::ParamSweep);
        cfg.sweep.ratio = Range { from: 1.0, to: 3.0, step: 0.02 };
        run_param_sweep(&cfg).unwrap()
    })
}

fn length_sweep() -> &'static [SweepRow] {
    static ROWS: OnceLock<Vec<SweepRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut cfg = sensitivity_config(ExperimentKind::LengthSweep);
        cfg.sweep.length_m = Range { from: 0.0, to: 25.0, step: 0.25 };
        run_length_sweep(&cfg).unwrap()
    })
}

fn xy(rows: &[SweepRow], axis: &str, class: MessageClass) -> (Vec<f64>, Vec<f64>) {
    let s = series(rows, axis, class);
    (s.iter().map(|r| r.value).collect(), s.iter().map(|r| r.throughput_kbps).collect())
}

#[test]
fn c7a_sweep_knees_and_cliffs() {
    let targets = [(SweepParameter::Capacitance, 1.65), (SweepParameter::LoadR, 2.75), (SweepParameter::PullupR, 1.57)];
    let rows = param_sweep();
    let mut pass = true;
    let mut detail = Vec::new();
    for (param, target) in targets {
        for class in [MessageClass::Hp, MessageClass::Lp] {
            let (x, y) = xy(rows, param.name(), class);
            let k = knee(&x, &y);
            let ok = k.is_some_and(|k| within(k, target, 0.10)) && has_cliff(&y);
            pass &= ok;
            detail.push(format!(
                "{} {} knee {}",
                param.name(),
                class.name(),
                k.map_or("-".into(), |k| format!("{k:.2}"))
            ));
        }
    }
    let lengths = length_sweep();
    for class in [MessageClass::Hp, MessageClass::Lp] {
        let (_, y) = xy(lengths, "length_m", class);
        pass &= has_cliff(&y);
    }
    report("7a", "sweep knees and cliff shape", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn c7b_hp_cliff_length_ratio() {
    let rows = length_sweep();
    let cliff = |class| {
        let (x, y) = xy(rows, "length_m", class);
        knee(&x, &y).unwrap_or(0.0)
    };
    let (hp, lp) = (cliff(MessageClass::Hp), cliff(MessageClass::Lp));
    let ratio = if lp > 0.0 { hp / lp } else { f64::NAN };
    let pass = ratio >= 2.5;
    report(
        "7b",
        "hp/lp cliff length ratio",
        pass,
        &format!("hp {hp:.2} m, lp {lp:.2} m, ratio {ratio:.2}, need >= 2.5"),
    );
    assert!(pass);
}

#[test]
fn c7c_hp_lp_max_rate_ratio() {
    let mut cfg = sensitivity_config(ExperimentKind::MaxBitrate);
    cfg.max_bitrate.lengths_m = vec![0.11];
    let rows = run_max_bitrate_search(&cfg).unwrap();
    let ratios = output::max_rate_ratios(&rows);
    let ratio = ratios.first().map_or(f64::NAN, |r| r.1);
    let pass = (2.0..=3.5).contains(&ratio);
    let rate = |c| rows.iter().find(|r| r.class == c).map_or(0.0, |r| r.max_kbps);
    report(
        "7c",
        "hp/lp max bit rate ratio",
        pass,
        &format!(
            "hp {:.1} kbps, lp {:.1} kbps at 0.11 m, ratio {ratio:.2}, need 2 to 3.5",
            rate(MessageClass::Hp),
            rate(MessageClass::Lp)
        ),
    );
    assert!(pass);
}

// 8

fn csv_bytes(cfg: &ExperimentConfig, threads: usize) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let results = pool.install(|| output::run(cfg)).unwrap();
    let files = output::write_results(dir.path(), cfg, &results).unwrap();
    let mut out: Vec<(String, Vec<u8>)> = files
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn c8_deterministic_csv() {
    let mut configs = Vec::new();
    let mut sweep = sensitivity_config(ExperimentKind::ParamSweep);
    sweep.repetitions = 4;
    sweep.sweep.parameters = vec![SweepParameter::Capacitance];
    sweep.sweep.ratio = Range { from: 1.5, to: 1.8, step: 0.1 };
    configs.push(sweep);
    let mut lat = sensitivity_config(ExperimentKind::Latency);
    lat.repetitions = 3;
    configs.push(lat);
    let mut skew = ExperimentConfig::new(ExperimentKind::SkewGrid);
    skew.repetitions = 2;
    skew.skew.offsets = Range { from: -0.02, to: 0.02, step: 0.02 };
    configs.push(skew);

    let mut identical = 0;
    for cfg in &configs {
        let a = csv_bytes(cfg, 1);
        let b = csv_bytes(cfg, 3);
        let c = csv_bytes(cfg, 1);
        identical += (!a.is_empty() && a == b && a == c) as usize;
    }
    let pass = identical == configs.len();
    report(
        "8",
        "deterministic csv",
        pass,
        &format!("{identical}/{} experiments byte-identical across reruns", configs.len()),
    );
    assert!(pass);
}
