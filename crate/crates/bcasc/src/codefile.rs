//! JSON code files.
//!
//! ```json
//! {"format_version":1,"m":2,"n":3,"entries":[[re,im],...],"metadata":{...}}
//! ```
//!
//! Entries are column-major. Numbers are written in shortest round-trip form,
//! so reading a file back reproduces every entry bit for bit.

use std::fs;
use std::path::Path;

use bcasc_core::codes::SphericalCode;
use bcasc_core::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFile {
    pub format_version: u32,
    pub m: usize,
    pub n: usize,
    pub entries: Vec<[f64; 2]>,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

impl CodeFile {
    pub fn from_code(code: &SphericalCode, metadata: Map<String, Value>) -> Self {
        CodeFile {
            format_version: FORMAT_VERSION,
            m: code.m(),
            n: code.n(),
            entries: code.as_slice().iter().map(|z| [z.re, z.im]).collect(),
            metadata,
        }
    }

    /// Validates shape and unit norms.
    pub fn to_code(&self) -> Result<SphericalCode> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format_version {}", self.format_version)));
        }
        let data = self.entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        Ok(SphericalCode::from_column_major(self.m, self.n, data)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn write_code(path: &Path, code: &SphericalCode, metadata: Map<String, Value>) -> Result<()> {
    fs::write(path, CodeFile::from_code(code, metadata).to_json()?).map_err(|e| Error::io(path, e))
}

pub fn read_code(path: &Path) -> Result<(SphericalCode, Map<String, Value>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = CodeFile::from_json(&text)?;
    Ok((file.to_code()?, file.metadata))
}
