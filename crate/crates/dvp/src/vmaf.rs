//! VMAF through an external tool.
//!
//! The tool is a command template with `{REF}`, `{DIS}`, `{W}`, `{H}` and
//! `{OUT}`; inputs are raw yuv420p files and `{OUT}` must receive libvmaf's
//! JSON log. The score is `pooled_metrics.vmaf.mean`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

use crate::codec::{render_template, run, CodecError};

pub const DEFAULT_TEMPLATE: &str = "vmaf -r {REF} -d {DIS} -w {W} -h {H} -p 420 -b 8 --json -o {OUT}";

#[derive(Debug, Error)]
pub enum VmafError {
    #[error("VMAF tool unavailable: {0}")]
    Unavailable(String),
    #[error("VMAF tool failed: {0}")]
    Tool(#[source] CodecError),
    #[error("cannot parse VMAF output: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome that callers can log without treating a missing tool as fatal.
#[derive(Debug, Clone, PartialEq)]
pub enum VmafStatus {
    Score(f64),
    Unavailable(String),
}

#[derive(Debug, Clone)]
pub struct VmafTool {
    pub template: String,
    pub timeout: Duration,
}

impl Default for VmafTool {
    fn default() -> Self {
        VmafTool {
            template: DEFAULT_TEMPLATE.to_string(),
            timeout: Duration::from_secs(3600),
        }
    }
}

impl VmafTool {
    pub fn score(&self, reference: &Path, distorted: &Path, width: usize, height: usize, out: &Path) -> Result<f64, VmafError> {
        let mut v = BTreeMap::new();
        v.insert("REF", reference.display().to_string());
        v.insert("DIS", distorted.display().to_string());
        v.insert("W", width.to_string());
        v.insert("H", height.to_string());
        v.insert("OUT", out.display().to_string());
        let argv = render_template(&self.template, &v).map_err(VmafError::Tool)?;
        match run(&argv, Vec::new(), self.timeout) {
            Ok(_) => {}
            Err(CodecError::Spawn { program, source }) if source.kind() == std::io::ErrorKind::NotFound => {
                return Err(VmafError::Unavailable(format!("`{program}` not found")))
            }
            Err(e) => return Err(VmafError::Tool(e)),
        }
        parse_vmaf_json(&fs::read_to_string(out)?)
    }

    /// Like [`score`](Self::score) but maps a missing tool to a status.
    pub fn status(&self, reference: &Path, distorted: &Path, width: usize, height: usize, out: &Path) -> Result<VmafStatus, VmafError> {
        match self.score(reference, distorted, width, height, out) {
            Ok(s) => Ok(VmafStatus::Score(s)),
            Err(VmafError::Unavailable(why)) => Ok(VmafStatus::Unavailable(why)),
            Err(e) => Err(e),
        }
    }
}

pub fn parse_vmaf_json(text: &str) -> Result<f64, VmafError> {
    let v: Value = serde_json::from_str(text).map_err(|e| VmafError::Parse(e.to_string()))?;
    let score = v
        .pointer("/pooled_metrics/vmaf/mean")
        .and_then(Value::as_f64)
        .ok_or_else(|| VmafError::Parse("missing pooled_metrics.vmaf.mean".into()))?;
    if !(0.0..=100.0).contains(&score) {
        return Err(VmafError::Parse(format!("score {score} outside [0, 100]")));
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pooled_mean() {
        let j = r#"{"version":"x","pooled_metrics":{"vmaf":{"min":80.0,"mean":93.25}}}"#;
        assert_eq!(parse_vmaf_json(j).unwrap(), 93.25);
        assert!(matches!(parse_vmaf_json("{not json"), Err(VmafError::Parse(_))));
        assert!(matches!(parse_vmaf_json(r#"{"pooled_metrics":{}}"#), Err(VmafError::Parse(_))));
    }

    #[test]
    fn missing_tool_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let tool = VmafTool {
            template: "dvp-no-such-vmaf-tool {REF} {DIS} {W} {H} {OUT}".into(),
            ..VmafTool::default()
        };
        let p = dir.path();
        let st = tool.status(&p.join("a"), &p.join("b"), 8, 8, &p.join("o.json")).unwrap();
        assert!(matches!(st, VmafStatus::Unavailable(_)));
    }

    #[test]
    fn stub_tool_output_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        let script = p.join("stub.sh");
        fs::write(&script, "printf '{\"pooled_metrics\":{\"vmaf\":{\"mean\":77.5}}}' > \"$1\"\n").unwrap();
        let tool = VmafTool {
            template: format!("sh {} {{OUT}} {{REF}} {{DIS}} {{W}} {{H}}", script.display()),
            ..VmafTool::default()
        };
        assert_eq!(tool.score(&p.join("a"), &p.join("a"), 8, 8, &p.join("o.json")).unwrap(), 77.5);
    }
}
