//! Plain-text instance files for the real-embedded problem.
//!
//! ```text
//! # comments start with '#', blank lines are ignored
//! qt 4 6
//! 0.1 -0.3 ...        (4 × 6 values, row-major, any line breaks)
//! yt 4 2
//! ...
//! theta0 6 2          (optional ground truth)
//! ...
//! ```
//!
//! Blocks may appear in any order; `qt` and `yt` are required.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::RealMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub qt: RealMatrix,
    pub yt: RealMatrix,
    pub theta0: Option<RealMatrix>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
            let content = line.split('#').next().unwrap_or("");
            content.split_whitespace().map(move |t| (i + 1, t))
        });
        let mut qt = None;
        let mut yt = None;
        let mut theta0 = None;
        let mut last_line = 0;
        while let Some((line, name)) = tokens.next() {
            last_line = line;
            let mut dim = |what: &str| -> Result<usize> {
                let (l, tok) = tokens.next().ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing {what} for block `{name}`"),
                })?;
                tok.parse::<usize>().map_err(|_| Error::Parse {
                    line: l,
                    msg: format!("invalid {what} `{tok}`"),
                })
            };
            let rows = dim("row count")?;
            let cols = dim("column count")?;
            let mut values = Vec::with_capacity(rows * cols);
            for k in 0..rows * cols {
                let (l, tok) = tokens.next().ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("block `{name}` ends after {k} of {} values", rows * cols),
                })?;
                let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: l,
                    msg: format!("invalid number `{tok}`"),
                })?;
                values.push(v);
            }
            let m = RealMatrix::from_shape_vec((rows, cols), values).expect("length checked");
            let slot = match name {
                "qt" => &mut qt,
                "yt" => &mut yt,
                "theta0" => &mut theta0,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown block `{other}`"),
                    })
                }
            };
            if slot.replace(m).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate block `{name}`"),
                });
            }
        }
        let missing = |name: &str| Error::Parse {
            line: last_line,
            msg: format!("missing block `{name}`"),
        };
        let qt = qt.ok_or_else(|| missing("qt"))?;
        let yt = yt.ok_or_else(|| missing("yt"))?;
        if qt.nrows() != yt.nrows() {
            return Err(Error::Dimension(format!("qt has {} rows, yt has {}", qt.nrows(), yt.nrows())));
        }
        if qt.ncols() % 2 != 0 {
            return Err(Error::Dimension(format!("qt has odd column count {}", qt.ncols())));
        }
        if let Some(t) = &theta0 {
            if t.dim() != (qt.ncols(), yt.ncols()) {
                return Err(Error::Dimension(format!(
                    "theta0 is {:?}, expected {:?}",
                    t.dim(),
                    (qt.ncols(), yt.ncols())
                )));
            }
        }
        Ok(Self { qt, yt, theta0 })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# real-embedded instance: qt (2L x 2N), yt (2L x M)\n");
        let mut block = |name: &str, m: &RealMatrix| {
            writeln!(out, "{name} {} {}", m.nrows(), m.ncols()).unwrap();
            for row in m.rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", cells.join(" ")).unwrap();
            }
        };
        block("qt", &self.qt);
        block("yt", &self.yt);
        if let Some(t) = &self.theta0 {
            block("theta0", t);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
