//! Checkpoint layout:
//!
//! ```text
//! LCPCKPT 1
//! meta <key> <value>          free-form metadata, value runs to end of line
//! config <key> = <value>      resolved run configuration
//! column <name>               hand-crafted column order
//! param <name> <d1> .. <dk>   one line per tensor, in payload order
//! end
//! <little-endian f64 payload>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use lcp_core::nn::{ParamSet, Tensor};

use crate::error::{LcpError, Result};

const MAGIC: &str = "LCPCKPT 1";

#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| LcpError::Data(format!("checkpoint has no `{key}` entry")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        let id = self.params.find(name).ok_or_else(|| LcpError::Data(format!("checkpoint has no tensor `{name}`")))?;
        Ok(self.params.value(id))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut head = format!("{MAGIC}\n");
        for (k, v) in &self.meta {
            check_token(k)?;
            check_line(v)?;
            head.push_str(&format!("meta {k} {v}\n"));
        }
        for (k, v) in &self.config {
            check_token(k)?;
            check_line(v)?;
            head.push_str(&format!("config {k} = {v}\n"));
        }
        for c in &self.columns {
            check_line(c)?;
            head.push_str(&format!("column {c}\n"));
        }
        for (_, p) in self.params.iter() {
            check_token(&p.name)?;
            head.push_str("param ");
            head.push_str(&p.name);
            for d in p.value.shape() {
                head.push_str(&format!(" {d}"));
            }
            head.push('\n');
        }
        head.push_str("end\n");
        let mut bytes = head.into_bytes();
        bytes.reserve(8 * self.params.num_scalars());
        for (_, p) in self.params.iter() {
            for v in p.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut ck = Checkpoint::default();
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        let mut pos = 0;
        let mut line_no = 0;
        let mut ended = false;
        while pos < bytes.len() {
            let nl = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| LcpError::parse(path, line_no + 1, "unterminated header"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| LcpError::parse(path, line_no + 1, "header is not UTF-8"))?;
            pos += nl + 1;
            line_no += 1;
            let bad = |msg: &str| LcpError::parse(path, line_no, msg.to_string());
            if line_no == 1 {
                if line != MAGIC {
                    return Err(bad("not a checkpoint (bad magic line)"));
                }
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let (tag, rest) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            match tag {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    ck.meta.insert(k.to_string(), v.to_string());
                }
                "config" => {
                    let (k, v) = rest.split_once(" = ").ok_or_else(|| bad("expected `config <key> = <value>`"))?;
                    ck.config.push((k.to_string(), v.to_string()));
                }
                "column" => ck.columns.push(rest.to_string()),
                "param" => {
                    let mut f = rest.split(' ');
                    let name = f.next().unwrap_or_default().to_string();
                    let shape = f.map(str::parse).collect::<std::result::Result<Vec<usize>, _>>().map_err(|_| bad("bad tensor shape"))?;
                    shapes.push((name, shape));
                }
                _ => return Err(bad("unknown header tag")),
            }
        }
        if !ended {
            return Err(LcpError::parse(path, line_no, "header has no `end` line"));
        }
        let payload = &bytes[pos..];
        let expected: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if payload.len() != 8 * expected {
            return Err(LcpError::Data(format!(
                "{}: payload holds {} bytes, header describes {} values",
                path.display(),
                payload.len(),
                expected
            )));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        for (name, shape) in shapes {
            let n = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            ck.params.add(name, Tensor::new(&shape, data)?)?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_bytes(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| LcpError::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

fn check_token(s: &str) -> Result<()> {
    match s.is_empty() || s.contains([' ', '\n', '\r']) {
        true => Err(LcpError::Usage(format!("checkpoint key {s:?} must be a non-empty word"))),
        false => Ok(()),
    }
}

fn check_line(s: &str) -> Result<()> {
    match s.contains(['\n', '\r']) {
        true => Err(LcpError::Usage(format!("checkpoint value {s:?} spans lines"))),
        false => Ok(()),
    }
}
