//! Versioned plain-text persistence of a fitted mixture.
//!
//! ```text
//! krig-mixture 1
//! dim 4
//! names beta_0 lambda sigma2 tau
//! components 1957
//! factors 1
//! iterations 5
//! iter <k> <n> <gamma> <d_l1> <r_star> <h_star> <j_star> <zero> <loc_fallbacks> <tuning_fallback>
//! comp <weight> <factor> <mean_1> … <mean_p>
//! factor <L row-major lower triangle>
//! end
//! ```
//!
//! Reals are written with 17 significant digits, so a reload is bit-exact.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use nalgebra::DMatrix;

use crate::engine::IterationDiagnostics;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::mixture::{NormalMixture, Points};

const MAGIC: &str = "krig-mixture";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SavedMixture {
    pub names: Vec<String>,
    pub mixture: NormalMixture,
    /// Iteration history; `wallclock` is not stored and reads back as zero.
    pub diagnostics: Vec<IterationDiagnostics>,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_mixture(names: &[String], mix: &NormalMixture, diagnostics: &[IterationDiagnostics]) -> String {
    let p = mix.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "dim {p}");
    let _ = writeln!(s, "names {}", names.join(" "));
    let _ = writeln!(s, "components {}", mix.len());
    let _ = writeln!(s, "factors {}", mix.factors().len());
    let _ = writeln!(s, "iterations {}", diagnostics.len());
    for d in diagnostics {
        let _ = writeln!(
            s,
            "iter {} {} {} {} {} {} {} {} {} {}",
            d.k,
            d.n,
            real(d.gamma),
            real(d.d_l1),
            real(d.r_star),
            real(d.h_star),
            real(d.j_star),
            d.zero_weight_count,
            d.localization_fallbacks,
            u8::from(d.tuning_fallback)
        );
    }
    for (i, mean) in mix.means().rows().enumerate() {
        let _ = write!(s, "comp {} {}", real(mix.weights()[i]), mix.factor_of()[i]);
        for x in mean {
            let _ = write!(s, " {}", real(*x));
        }
        s.push('\n');
    }
    for f in mix.factors() {
        s.push_str("factor");
        let l = f.l();
        for i in 0..p {
            for j in 0..=i {
                let _ = write!(s, " {}", real(l[(i, j)]));
            }
        }
        s.push('\n');
    }
    s.push_str("end\n");
    s
}

pub fn write_mixture(
    path: &Path,
    names: &[String],
    mix: &NormalMixture,
    diagnostics: &[IterationDiagnostics],
) -> Result<()> {
    std::fs::write(path, format_mixture(names, mix, diagnostics)).map_err(|e| Error::io(path, e))
}

pub fn read_mixture(path: &Path) -> Result<SavedMixture> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mixture(&text).map_err(|(line, message)| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    })
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    /// Next line, split into fields, whose first field must be `tag`.
    fn expect(&mut self, tag: &str) -> ParseResult<Vec<&'a str>> {
        let (i, text) = self
            .inner
            .next()
            .ok_or((self.line + 1, format!("file ends before '{tag}'")))?;
        self.line = i + 1;
        let mut fields = text.split_ascii_whitespace();
        match fields.next() {
            Some(t) if t == tag => Ok(fields.collect()),
            other => Err((self.line, format!("expected '{tag}', found '{}'", other.unwrap_or("")))),
        }
    }

    fn count(&mut self, tag: &str) -> ParseResult<usize> {
        let f = self.expect(tag)?;
        match f.as_slice() {
            [v] => self.parse(v),
            _ => Err((self.line, format!("'{tag}' takes one value"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, field: &str) -> ParseResult<T> {
        field
            .parse()
            .map_err(|_| (self.line, format!("cannot parse '{field}'")))
    }

    fn width(&self, f: &[&str], n: usize) -> ParseResult<()> {
        if f.len() == n {
            Ok(())
        } else {
            Err((self.line, format!("expected {n} fields, found {}", f.len())))
        }
    }
}

pub fn parse_mixture(text: &str) -> ParseResult<SavedMixture> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let head = lines.expect(MAGIC)?;
    if head != [VERSION.to_string().as_str()] {
        return Err((1, format!("unsupported mixture file version {head:?}")));
    }
    let p = lines.count("dim")?;
    let names: Vec<String> = lines.expect("names")?.into_iter().map(String::from).collect();
    lines.width(&names.iter().map(String::as_str).collect::<Vec<_>>(), p)?;
    let n = lines.count("components")?;
    let nf = lines.count("factors")?;
    let iters = lines.count("iterations")?;

    let mut diagnostics = Vec::with_capacity(iters);
    for _ in 0..iters {
        let f = lines.expect("iter")?;
        lines.width(&f, 10)?;
        diagnostics.push(IterationDiagnostics {
            k: lines.parse(f[0])?,
            n: lines.parse(f[1])?,
            gamma: lines.parse(f[2])?,
            d_l1: lines.parse(f[3])?,
            r_star: lines.parse(f[4])?,
            h_star: lines.parse(f[5])?,
            j_star: lines.parse(f[6])?,
            zero_weight_count: lines.parse(f[7])?,
            localization_fallbacks: lines.parse(f[8])?,
            tuning_fallback: lines.parse::<u8>(f[9])? != 0,
            wallclock: Duration::ZERO,
        });
    }

    let mut weights = Vec::with_capacity(n);
    let mut factor_of = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n * p);
    for _ in 0..n {
        let f = lines.expect("comp")?;
        lines.width(&f, p + 2)?;
        weights.push(lines.parse(f[0])?);
        factor_of.push(lines.parse(f[1])?);
        for v in &f[2..] {
            means.push(lines.parse::<f64>(v)?);
        }
    }
    let mut factors = Vec::with_capacity(nf);
    for _ in 0..nf {
        let f = lines.expect("factor")?;
        lines.width(&f, p * (p + 1) / 2)?;
        let mut l = DMatrix::zeros(p, p);
        let mut it = f.iter();
        for i in 0..p {
            for j in 0..=i {
                l[(i, j)] = lines.parse(it.next().expect("width checked"))?;
            }
        }
        factors.push(Cholesky::from_lower(l).map_err(|e| (lines.line, e.to_string()))?);
    }
    lines.expect("end")?;
    let at = lines.line;
    let means = Points::new(p, means).map_err(|e| (at, e.to_string()))?;
    let mixture = NormalMixture::from_parts(means, weights, factors, factor_of).map_err(|e| (at, e.to_string()))?;
    Ok(SavedMixture {
        names,
        mixture,
        diagnostics,
    })
}
