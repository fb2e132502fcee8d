//! Wire traces as CSV: `time_ps,value` rows, plus `volts` for analog
//! captures. `value` is 1 for High and 0 for Low.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use linkbo_core::channel::{Attachment, LineLevel};
use linkbo_core::endpoint::DeviceConfig;
use linkbo_core::frame::Message;
use linkbo_core::trace::{AnalogTrace, DigitalTrace};
use linkbo_core::SimTime;

use crate::stream::BusSpec;

fn bit(level: LineLevel) -> u8 {
    level.is_high() as u8
}

/// Digital trace; a closing row at the trace end keeps its length.
pub fn write_digital<W: Write>(trace: &DigitalTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ps", "value"])?;
    for &(t, v) in trace.samples() {
        w.write_record([t.as_ps().to_string(), bit(v).to_string()])?;
    }
    if let Some(&(last, v)) = trace.samples().last() {
        if trace.end() > last {
            w.write_record([trace.end().as_ps().to_string(), bit(v).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Analog samples with their comparator level at `threshold` volts.
pub fn write_analog<W: Write>(trace: &AnalogTrace, threshold: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ps", "value", "volts"])?;
    for &(t, v) in trace.samples() {
        w.write_record([t.as_ps().to_string(), ((v > threshold) as u8).to_string(), format!("{v:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Read either layout back as a digital trace (the `value` column).
pub fn read_digital<R: Read>(input: R) -> Result<DigitalTrace> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col =
        |name: &str| headers.iter().position(|h| h.trim() == name).ok_or_else(|| anyhow!("missing column `{name}`"));
    let (ti, vi) = (col("time_ps")?, col("value")?);
    let mut trace = DigitalTrace::new();
    let mut last: Option<u64> = None;
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = n + 2;
        let t: u64 = rec.get(ti).unwrap_or("").trim().parse().with_context(|| format!("row {row}: bad time_ps"))?;
        let level = match rec.get(vi).unwrap_or("").trim() {
            "1" => LineLevel::High,
            "0" => LineLevel::Low,
            other => bail!("row {row}: value must be 0 or 1, got `{other}`"),
        };
        if last.is_some_and(|l| t <= l) {
            bail!("row {row}: times must be strictly increasing");
        }
        last = Some(t);
        trace.push_change(SimTime(t), level);
        trace.set_end(SimTime(t));
    }
    if trace.is_empty() {
        bail!("trace has no rows");
    }
    Ok(trace)
}

/// A two-device capture of one message: the bus trace (far-end level) and,
/// on an analog bus, the far-end voltage.
pub struct Capture {
    pub digital: DigitalTrace,
    pub voltages: Option<AnalogTrace>,
}

pub fn capture(bus: BusSpec, tx: DeviceConfig, rx: DeviceConfig, msg: &Message, duration: SimTime) -> Result<Capture> {
    let mut net = bus.network()?;
    net.record_voltages();
    let a = net.add_device(tx, Attachment::Near)?;
    net.add_device(rx, Attachment::Far)?;
    net.submit_at(a, SimTime::from_us(10), msg.clone())?;
    net.run_until(duration)?;
    let mut digital = net.trace().clone();
    if digital.end() < duration {
        digital.set_end(duration);
    }
    let voltages = net.voltages().filter(|v| !v.is_empty()).cloned();
    Ok(Capture { digital, voltages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digital_roundtrip_keeps_end() {
        let mut t = DigitalTrace::new();
        t.push_change(SimTime(0), LineLevel::High);
        t.push_change(SimTime(100), LineLevel::Low);
        t.push_change(SimTime(250), LineLevel::High);
        t.set_end(SimTime(900));
        let mut buf = Vec::new();
        write_digital(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_ps,value\n0,1\n100,0\n"));
        assert_eq!(read_digital(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(read_digital("time_ps,value\n0,2\n".as_bytes()).is_err());
        assert!(read_digital("time_ps,value\n5,1\n5,0\n".as_bytes()).is_err());
        assert!(read_digital("t,v\n0,1\n".as_bytes()).is_err());
        assert!(read_digital("time_ps,value\n".as_bytes()).is_err());
    }

    #[test]
    fn analog_rows_carry_levels() {
        let mut v = AnalogTrace::new();
        v.push(SimTime(0), 3.3);
        v.push(SimTime(10), 0.2);
        let mut buf = Vec::new();
        write_analog(&v, 1.5, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "time_ps,value,volts\n0,1,3.300000\n10,0,0.200000\n");
        assert_eq!(read_digital(&buf[..]).unwrap().level_at(SimTime(12)), LineLevel::Low);
    }
}
