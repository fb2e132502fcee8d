//! Protocol comparison table: LinkBo against 1-Wire and UNI/O.

use std::fmt::Write as _;

use linkbo_core::baselines::{
    linkbo_row, onewire_bitrate, onewire_row, printed, unio_row, ComparisonRow, OneWireTiming, UnioTiming,
    UNIO_FASTEST_BIT_PERIOD, UNIO_SLOWEST_BIT_PERIOD,
};
use linkbo_core::coding::SlotTiming;
use linkbo_core::frame::Message;

/// Computed (min, max) spans next to the published ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub protocol: &'static str,
    pub bit_rate_kbps: (f64, f64),
    pub ebr_kbps: (f64, f64),
    pub latency_us: (f64, f64),
    pub printed_bit_rate: (f64, f64),
    pub printed_ebr: (f64, f64),
    pub printed_latency: (f64, f64),
}

fn span<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn spans(rows: &[ComparisonRow]) -> ((f64, f64), (f64, f64), (f64, f64)) {
    (span(rows.iter().map(|r| r.bit_rate)), span(rows.iter().map(|r| r.ebr)), span(rows.iter().map(|r| r.latency)))
}

/// LinkBo rows for HP and every LP size at the exact 3.36 µs slot.
pub fn linkbo_rows() -> Vec<ComparisonRow> {
    let t = SlotTiming::exact_rate();
    let mut rows = vec![linkbo_row(&Message::Hp(0), &t)];
    for n in 1..=7 {
        rows.push(linkbo_row(&Message::lp(&vec![0; n]).expect("1..=7 bytes"), &t));
    }
    rows
}

/// The table's LinkBo spans run from an HP frame to a full 7-byte LP frame.
pub fn linkbo_endpoints() -> [ComparisonRow; 2] {
    let rows = linkbo_rows();
    [rows[0], rows[7]]
}

pub fn table2() -> Vec<Table2Row> {
    let (lb, le, ll) = spans(&linkbo_endpoints());

    let ow = OneWireTiming::default();
    let steady = onewire_row(&ow);
    let ow_rates = (onewire_bitrate(&ow, true), onewire_bitrate(&ow, false));

    let unio = [UNIO_FASTEST_BIT_PERIOD, UNIO_SLOWEST_BIT_PERIOD].map(|p| unio_row(&UnioTiming::with_bit_period(p)));
    let (ub, ue, ul) = spans(&unio);

    vec![
        Table2Row {
            protocol: "1-Wire",
            bit_rate_kbps: span([ow_rates.0, ow_rates.1]),
            ebr_kbps: (steady.ebr, steady.ebr),
            latency_us: (steady.latency, steady.latency),
            printed_bit_rate: printed::ONEWIRE_BITRATE,
            printed_ebr: printed::ONEWIRE_EBR,
            printed_latency: printed::ONEWIRE_LATENCY,
        },
        Table2Row {
            protocol: "UNI/O",
            bit_rate_kbps: ub,
            ebr_kbps: ue,
            latency_us: ul,
            printed_bit_rate: printed::UNIO_BITRATE,
            printed_ebr: printed::UNIO_EBR,
            printed_latency: printed::UNIO_LATENCY,
        },
        Table2Row {
            protocol: "LinkBo",
            bit_rate_kbps: lb,
            ebr_kbps: le,
            latency_us: ll,
            printed_bit_rate: printed::LINKBO_BITRATE,
            printed_ebr: printed::LINKBO_EBR,
            printed_latency: printed::LINKBO_LATENCY,
        },
    ]
}

fn fmt_span((lo, hi): (f64, f64)) -> String {
    if (hi - lo).abs() < 5e-3 {
        format!("{lo:.2}")
    } else {
        format!("{lo:.2} - {hi:.2}")
    }
}

/// Markdown rendering with computed and published columns.
pub fn table2_markdown(rows: &[Table2Row]) -> String {
    let mut s = String::new();
    s.push_str("| Protocol | Bit rate (kbps) | EBR (kbps) | Latency (µs) | Published bit rate | Published EBR | Published latency |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.protocol,
            fmt_span(r.bit_rate_kbps),
            fmt_span(r.ebr_kbps),
            fmt_span(r.latency_us),
            fmt_span(r.printed_bit_rate),
            fmt_span(r.printed_ebr),
            fmt_span(r.printed_latency),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linkbo_spans() {
        let rows = table2();
        let lb = rows.iter().find(|r| r.protocol == "LinkBo").unwrap();
        assert!((lb.latency_us.0 - 50.4).abs() < 1e-9);
        assert!((lb.latency_us.1 - 221.76).abs() < 1e-9);
        assert!((lb.ebr_kbps.0 - 158.73).abs() < 0.01);
        assert!((lb.ebr_kbps.1 - 252.53).abs() < 0.01);
    }

    #[test]
    fn markdown_has_a_line_per_protocol() {
        let md = table2_markdown(&table2());
        assert_eq!(md.lines().count(), 5);
        assert!(md.contains("| 1-Wire | 16.26 - 16.67 |"));
    }
}
