//! Machine-readable run reports. Same config + seed must reproduce the
//! JSON byte for byte, so floats are printed through a fixed 17
//! significant digit formatter and map keys stay in struct order.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Verdict {
    /// |value| must stay below the threshold.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value.abs() <= threshold && value.is_finite(), value, threshold }
    }

    /// value must lie within [lo, hi]; threshold reports the half width.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            pass: value.is_finite() && value >= lo && value <= hi,
            value,
            threshold: 0.5 * (hi - lo),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub stages: Vec<StageReport>,
    pub verdicts: Vec<Verdict>,
    pub overall: StageStatus,
}

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct StageReport {
    pub name: String,
    pub status: StageStatus,
    pub data: serde_json::Value,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: ToolInfo { name: "bgsp", version: env!("CARGO_PKG_VERSION") },
            command: command.to_string(),
            seed,
            config,
            stages: Vec::new(),
            verdicts: Vec::new(),
            overall: StageStatus::Pass,
        }
    }

    pub fn push_stage(&mut self, name: &str, data: serde_json::Value, verdicts: Vec<Verdict>) {
        let status = if verdicts.iter().all(|v| v.pass) { StageStatus::Pass } else { StageStatus::Fail };
        if status == StageStatus::Fail {
            self.overall = StageStatus::Fail;
        }
        self.stages.push(StageReport { name: name.to_string(), status, data });
        self.verdicts.extend(verdicts);
    }

    pub fn skip_stage(&mut self, name: &str, why: &str) {
        self.stages.push(StageReport {
            name: name.to_string(),
            status: StageStatus::Skipped,
            data: serde_json::json!({ "reason": why }),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.overall == StageStatus::Pass
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {}", out_dir.display(), e)))?;
        let path = out_dir.join("report.json");
        let bytes = to_json_17digits(self)?;
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| CliError::Internal(format!("cannot write {}: {}", path.display(), e)))?;
        Ok(())
    }
}

/// serde_json pretty formatter with every f64 rendered as {:.16e}.
struct SigDigitFormatter {
    indent: usize,
}

impl Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{:.16e}", value)
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.indent += 1;
        writer.write_all(b"[")
    }

    fn end_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.indent -= 1;
        writer.write_all(b"]")
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.indent += 1;
        writer.write_all(b"{")
    }

    fn end_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.indent -= 1;
        writer.write_all(b"\n")?;
        writer.write_all(&vec![b' '; 2 * self.indent])?;
        writer.write_all(b"}")
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if !first {
            writer.write_all(b",")?;
        }
        writer.write_all(b"\n")?;
        writer.write_all(&vec![b' '; 2 * self.indent])
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if !first {
            writer.write_all(b",")?;
        }
        Ok(())
    }
}

pub fn to_json_17digits<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter { indent: 0 });
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Internal(format!("report serialization failed: {}", e)))?;
    buf.push(b'\n');
    Ok(buf)
}
