//! Text outputs: metrics JSON lines, latent CSV, alignment and report JSON.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Instant;

use contopic_core::eval::{AlignedPair, LatentRow};
use contopic_core::train::{MetricsRecord, TrainHooks};

/// One JSON object per line, LF-terminated.
pub fn metrics_jsonl(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_metrics_jsonl(text: &str) -> serde_json::Result<Vec<MetricsRecord>> {
    text.lines().filter(|l| !l.is_empty()).map(serde_json::from_str).collect()
}

/// Streams metrics to a writer as they are produced, optionally stamping
/// wall-clock time.
pub struct MetricsSink<W: Write> {
    writer: W,
    clock: Option<Instant>,
    error: Option<io::Error>,
}

impl<W: Write> MetricsSink<W> {
    pub fn new(writer: W, wall_clock: bool) -> Self {
        MetricsSink {
            writer,
            clock: wall_clock.then(Instant::now),
            error: None,
        }
    }

    /// Flushes and surfaces the first write error, if any.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> TrainHooks for MetricsSink<W> {
    fn on_record(&mut self, record: &MetricsRecord) {
        if self.error.is_some() {
            return;
        }
        let line = serde_json::to_string(record).expect("record serializes");
        if let Err(e) = writeln!(self.writer, "{line}") {
            self.error = Some(e);
        }
    }

    fn wall_ms(&mut self) -> u64 {
        self.clock.map_or(0, |c| c.elapsed().as_millis() as u64)
    }
}

/// `doc_id,label,theta_0..theta_{T-1}` with an empty field for a missing
/// label. Values use the shortest round-trip representation.
pub fn latents_csv(rows: &[LatentRow], topics: usize) -> String {
    let mut out = String::from("doc_id,label");
    for t in 0..topics {
        write!(out, ",theta_{t}").unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{},", r.doc_id).unwrap();
        if let Some(l) = r.label {
            write!(out, "{l}").unwrap();
        }
        for v in &r.theta {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// JSON list of `{a, b, js}` objects.
pub fn alignment_json(pairs: &[AlignedPair]) -> String {
    serde_json::to_string_pretty(pairs).expect("pairs serialize") + "\n"
}
