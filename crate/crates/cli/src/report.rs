//! Report types and their fixed-format JSON and CSV encodings.
//!
//! Field order follows struct declaration order and every float is written
//! as `d.dddddddddddddddde±x` (17 significant digits), so the same run
//! always produces the same bytes.

use std::io::{self, Write};

use fluxgate_core::analysis::{GateReport, SweepAxis, SweepRow};
use fluxgate_core::protocol::{ScheduleSegment, SegmentKind};
use fluxgate_core::{CMatrix, TWO_PI};
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::config::Settings;

/// JSON formatter that pins float output to 17 significant digits.
pub struct FixedDigits<F> {
    inner: F,
}

impl<F> FixedDigits<F> {
    pub fn new(inner: F) -> Self {
        Self { inner }
    }
}

pub fn format_f64(v: f64) -> Option<String> {
    v.is_finite().then(|| format!("{v:.16e}"))
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.inner.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        match format_f64(value) {
            Some(s) => w.write_all(s.as_bytes()),
            None => w.write_all(b"null"),
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

fn encode<T: Serialize, F: Formatter>(value: &T, formatter: F) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits::new(formatter));
    value
        .serialize(&mut ser)
        .expect("report types serialize infallibly");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = encode(value, PrettyFormatter::with_indent(b"  "));
    s.push('\n');
    s
}

pub fn to_json_compact<T: Serialize>(value: &T) -> String {
    encode(value, CompactFormatter)
}

/// `[[[re, im]; 4]; 4]`, row-major.
pub fn matrix_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.dim())
        .map(|r| (0..m.dim()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SegmentRow {
    pub index: usize,
    pub label: &'static str,
    pub kind: &'static str,
    pub qubit: u8,
    pub transition: Option<String>,
    pub omega_mhz: Option<f64>,
    pub phase_rad: Option<f64>,
    pub duration_ns: f64,
    pub couplings_active: bool,
}

impl SegmentRow {
    pub fn new(index: usize, seg: &ScheduleSegment) -> Self {
        let drive = seg.drives.first();
        Self {
            index,
            label: seg.label,
            kind: match seg.kind {
                SegmentKind::Pulse => "pulse",
                SegmentKind::Wait => "wait",
            },
            qubit: seg.target.number(),
            transition: drive.map(|d| format!("{}-{}", d.transition.lower, d.transition.upper)),
            omega_mhz: drive.map(|d| d.rabi / TWO_PI * 1e-6),
            phase_rad: drive.map(|d| d.phase),
            duration_ns: seg.duration * 1e9,
            couplings_active: seg.couplings_active,
        }
    }
}

pub fn schedule_table(segments: &[ScheduleSegment]) -> Vec<SegmentRow> {
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| SegmentRow::new(i, s))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub mode: &'static str,
    pub total_time_ns: f64,
    pub fidelity: f64,
    pub process_fidelity: f64,
    pub probe_fidelity: f64,
    pub leakage: f64,
    pub column_leakage: [f64; 4],
    pub max_deviation_from_cp: f64,
    pub gate_matrix: Vec<Vec<[f64; 2]>>,
    pub checkpoint_fidelities: [f64; 3],
    pub checkpoint_deviations: [f64; 3],
    pub schedule: Vec<SegmentRow>,
    pub config: Settings,
}

impl SimulateReport {
    pub fn new(report: &GateReport, settings: &Settings, seed: u64) -> Self {
        Self {
            command: "simulate",
            version: env!("CARGO_PKG_VERSION"),
            seed,
            mode: report.mode.as_str(),
            total_time_ns: report.total_time * 1e9,
            fidelity: report.fidelity(),
            process_fidelity: report.process_fidelity,
            probe_fidelity: report.probe_fidelity,
            leakage: report.avg_leakage,
            column_leakage: report.column_leakage,
            max_deviation_from_cp: report.max_deviation_from_target(),
            gate_matrix: matrix_pairs(&report.gate_matrix),
            checkpoint_fidelities: report.checkpoint_fidelities,
            checkpoint_deviations: report.checkpoint_deviations,
            schedule: schedule_table(&report.segments),
            config: settings.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub fidelity: f64,
    pub leakage: f64,
    pub total_time_ns: f64,
}

impl From<&SweepRow> for SweepPoint {
    fn from(r: &SweepRow) -> Self {
        Self {
            axis_value: r.axis_value,
            fidelity: r.fidelity,
            leakage: r.leakage,
            total_time_ns: r.total_time * 1e9,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub axis: &'static str,
    pub mode: &'static str,
    pub points: Vec<SweepPoint>,
    pub config: Settings,
}

impl SweepReport {
    pub fn new(axis: SweepAxis, rows: &[SweepRow], settings: &Settings, seed: u64) -> Self {
        Self {
            command: "sweep",
            version: env!("CARGO_PKG_VERSION"),
            seed,
            axis: axis.as_str(),
            mode: settings.mode.as_str(),
            points: rows.iter().map(SweepPoint::from).collect(),
            config: settings.clone(),
        }
    }
}

/// `axis_value,fidelity,leakage,total_time_ns` with one row per point.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis_value", "fidelity", "leakage", "total_time_ns"])
        .expect("in-memory write");
    for r in rows {
        let p = SweepPoint::from(r);
        let fields = [p.axis_value, p.fidelity, p.leakage, p.total_time_ns]
            .map(|v| format_f64(v).unwrap_or_else(|| "NaN".into()));
        w.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv writes UTF-8")
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub reference: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub tolerance_kind: &'static str,
    pub pass: bool,
}

impl Check {
    /// `|computed - expected| <= tol * |expected|`.
    pub fn relative(
        name: &'static str,
        reference: &str,
        computed: f64,
        expected: f64,
        tol: f64,
    ) -> Self {
        Self {
            name,
            reference: reference.into(),
            computed,
            expected,
            tolerance: tol,
            tolerance_kind: "relative",
            pass: (computed - expected).abs() <= tol * expected.abs(),
        }
    }

    /// `computed <= tol`, for deviations that should vanish.
    pub fn at_most(name: &'static str, reference: &str, computed: f64, tol: f64) -> Self {
        Self {
            name,
            reference: reference.into(),
            computed,
            expected: 0.0,
            tolerance: tol,
            tolerance_kind: "absolute",
            pass: computed <= tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub mode: &'static str,
    pub all_pass: bool,
    pub checks: Vec<Check>,
    pub total_time_ns: f64,
    pub photon_lifetime_ns: f64,
    pub gate_matrix: Vec<Vec<[f64; 2]>>,
    pub schedule: Vec<SegmentRow>,
    pub config: Settings,
}

/// Plain-text table: check, reference, computed, tolerance, verdict.
pub fn check_table(checks: &[Check]) -> String {
    let mut out = format!(
        "{:<18} {:<34} {:>20} {:>11}  {}\n",
        "check", "reference", "computed", "tolerance", "result"
    );
    for c in checks {
        let tol = match c.tolerance_kind {
            "relative" => format!("{:.1e} rel", c.tolerance),
            _ => format!("{:.0e}", c.tolerance),
        };
        out.push_str(&format!(
            "{:<18} {:<34} {:>20.12e} {:>11}  {}\n",
            c.name,
            c.reference,
            c.computed,
            tol,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}
