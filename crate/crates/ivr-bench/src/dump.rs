//! Plain-text field dumps: a small self-describing header followed by nodal
//! values in row-major order (x fastest, then y), one value per line.
//! Values are printed with shortest round-trip formatting, so a dump read
//! back reproduces the vector bit for bit.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

const MAGIC: &str = "ivr-field 1";

/// A nodal field on an (nx+1) x (ny+1) structured grid at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub variant: String,
    /// Node values, index j*(nx+1) + i.
    pub values: DVector<f64>,
}

impl FieldDump {
    pub fn new(nx: usize, ny: usize, t: f64, variant: &str, values: DVector<f64>) -> Result<Self> {
        let expect = (nx + 1) * (ny + 1);
        if values.len() != expect {
            bail!(
                "field on a {nx}x{ny} grid needs {expect} node values, got {}",
                values.len()
            );
        }
        Ok(Self {
            nx,
            ny,
            t,
            variant: variant.to_string(),
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        text.push_str(MAGIC);
        text.push('\n');
        text.push_str(&format!("nx {}\n", self.nx));
        text.push_str(&format!("ny {}\n", self.ny));
        text.push_str(&format!("t {}\n", self.t));
        text.push_str(&format!("variant {}\n", self.variant));
        text.push_str("values\n");
        for v in self.values.iter() {
            text.push_str(&format!("{v}\n"));
        }
        std::fs::write(path, text)
            .with_context(|| format!("cannot write field dump {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read field dump {}", path.display()))?;
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            bail!("{} is not a field dump (missing '{MAGIC}' header)", path.display());
        }
        let mut nx = None;
        let mut ny = None;
        let mut t = None;
        let mut variant = None;
        for line in lines.by_ref() {
            if line == "values" {
                break;
            }
            let (key, value) = line
                .split_once(' ')
                .with_context(|| format!("malformed header line '{line}'"))?;
            match key {
                "nx" => nx = Some(value.parse::<usize>().context("bad nx")?),
                "ny" => ny = Some(value.parse::<usize>().context("bad ny")?),
                "t" => t = Some(value.parse::<f64>().context("bad t")?),
                "variant" => variant = Some(value.to_string()),
                other => bail!("unknown header key '{other}' in {}", path.display()),
            }
        }
        let (nx, ny) = (
            nx.context("header is missing nx")?,
            ny.context("header is missing ny")?,
        );
        let values: Vec<f64> = lines
            .map(|l| l.trim().parse::<f64>().context("bad value line"))
            .collect::<Result<_>>()?;
        FieldDump::new(
            nx,
            ny,
            t.context("header is missing t")?,
            &variant.context("header is missing variant")?,
            DVector::from_vec(values),
        )
    }
}
