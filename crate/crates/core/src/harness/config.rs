//! Run configuration in INI form.
//!
//! ```ini
//! [grid]
//! nt = 128
//! nx = 64
//! [spectral]
//! L = 32
//! J = 32
//! [forcing]
//! kind = theorem1          ; theorem1 | theorem2 | theorem3 | multiplicity
//! k = 1
//! beta = 1
//! h = sin(x)               ; sum of terms, or file:<path to t,x,value CSV>
//! [solver]
//! R_ball = 1
//! [epsilon]
//! geometric = 1e-4, 1e-1, 7   ; or: list = 1e-2, 5e-3
//! [output]
//! directory = runs
//! [run]
//! seed = 0
//! ```
//!
//! Every key has a default (see [`DEFAULTS_HELP`]); unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;

use crate::error::{Error, Result};
use crate::fields::{Grid, GridField, Truncation, DEFAULT_HOLDER_CAP};

/// Defaults of every configuration key, as shown by `--help`.
pub const DEFAULTS_HELP: &str = "\
Configuration keys and defaults (INI sections):
  [grid]      nt = 128, nx = 64
  [spectral]  L = 32, J = 32
  [forcing]   kind = theorem1 (theorem1 | theorem2 | theorem3 | multiplicity)
              theorem1:     k = 1, beta = 1, h = sin(x)
              theorem2:     k = 1, beta = sin(x), h = sin(x), remainder_coef = 1, remainder_power = 3
              theorem3:     linear = 1, cubic = 1, weight = square (zero | square | odd_cubic),
                            weight_coef = 1, g = 0
              multiplicity: mode = 1, amplitude = 1
              field expressions: terms joined by + or -, each [coef*]basis with basis
              1 | sin(jx) | cos(lt)sin(jx) | sin(lt)sin(jx), or file:<csv path>
  [solver]    R_ball = 1, tol_range = 1e-12, max_iter_range = 200, tol_grad = 1e-9,
              max_iter_min = 500, n_restarts = 0, margin = 1e-6, max_doublings = 3,
              init = zero (zero | v0)
  [epsilon]   list = 1e-2 | geometric = start, stop, count; allow_zero = false
  [output]    directory = runs, formats = csv (csv, json), run_id = <config stem>
  [run]       seed = 0, workers = available parallelism
  [verify]    samples = 50, holder_cap = 8192
The environment variable RWS_OUT overrides [output] directory.";

/// One basis function of a field expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    One,
    /// `sin(j x)`.
    Sin { j: usize },
    /// `cos(l t) sin(j x)`.
    CosSin { l: usize, j: usize },
    /// `sin(l t) sin(j x)`.
    SinSin { l: usize, j: usize },
}

impl Basis {
    pub fn eval(self, t: f64, x: f64) -> f64 {
        match self {
            Basis::One => 1.0,
            Basis::Sin { j } => (j as f64 * x).sin(),
            Basis::CosSin { l, j } => (l as f64 * t).cos() * (j as f64 * x).sin(),
            Basis::SinSin { l, j } => (l as f64 * t).sin() * (j as f64 * x).sin(),
        }
    }
}

/// A field given by a short sum of basis functions or by a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Terms(Vec<(f64, Basis)>),
    File(PathBuf),
}

impl FieldExpr {
    pub fn zero() -> Self {
        FieldExpr::Terms(Vec::new())
    }

    /// Parse `sin(x) + 0.2*cos(t)sin(x)`, `1`, `file:h.csv`; relative paths resolve against `base`.
    pub fn parse(s: &str, base: &Path) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            let p = PathBuf::from(path.trim());
            return Ok(FieldExpr::File(if p.is_absolute() { p } else { base.join(p) }));
        }
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Config("empty field expression".into()));
        }
        let mut terms = Vec::new();
        for piece in split_terms(&compact) {
            terms.push(parse_term(piece).map_err(|e| Error::Config(format!("field expression {s:?}: {e}")))?);
        }
        Ok(FieldExpr::Terms(terms))
    }

    /// Pointwise value; `None` for file-backed fields.
    pub fn eval(&self, t: f64, x: f64) -> Option<f64> {
        match self {
            FieldExpr::Terms(terms) => Some(terms.iter().map(|(c, b)| c * b.eval(t, x)).sum()),
            FieldExpr::File(_) => None,
        }
    }

    /// Whether the expression is independent of `t`.
    pub fn is_stationary(&self) -> bool {
        match self {
            FieldExpr::Terms(terms) => terms.iter().all(|(_, b)| matches!(b, Basis::One | Basis::Sin { .. })),
            FieldExpr::File(_) => false,
        }
    }

    /// Samples on `grid`; a file must hold exactly this grid.
    pub fn sample(&self, grid: Grid) -> Result<GridField> {
        match self {
            FieldExpr::Terms(_) => Ok(GridField::from_fn(grid, |t, x| self.eval(t, x).unwrap_or(0.0))),
            FieldExpr::File(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open field file {}: {e}", path.display())))?;
                let g = GridField::read_csv(std::io::BufReader::new(file))?;
                if g.grid() != grid {
                    return Err(Error::Config(format!(
                        "field file {} holds a {}x{} grid, expected {}x{}",
                        path.display(),
                        g.grid().nt,
                        g.grid().nx,
                        grid.nt,
                        grid.nx
                    )));
                }
                Ok(g)
            }
        }
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::File(p) => write!(f, "file:{}", p.display()),
            FieldExpr::Terms(terms) if terms.is_empty() => f.write_str("0"),
            FieldExpr::Terms(terms) => {
                for (n, (c, b)) in terms.iter().enumerate() {
                    let basis = match *b {
                        Basis::One => "1".to_string(),
                        Basis::Sin { j } => format!("sin({j}x)"),
                        Basis::CosSin { l, j } => format!("cos({l}t)sin({j}x)"),
                        Basis::SinSin { l, j } => format!("sin({l}t)sin({j}x)"),
                    };
                    if n > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{c}*{basis}")?;
                }
                Ok(())
            }
        }
    }
}

/// Split at top-level `+`/`-` that are not exponent signs.
fn split_terms(s: &str) -> Vec<&str> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (k, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if depth == 0 && k > start => {
                let prev = bytes[k - 1];
                let exponent = (prev == b'e' || prev == b'E') && k >= 2 && bytes[k - 2].is_ascii_digit();
                if !exponent && prev != b'*' {
                    out.push(&s[start..k]);
                    start = k;
                }
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_term(piece: &str) -> std::result::Result<(f64, Basis), String> {
    let (sign, body) = match piece.as_bytes().first() {
        Some(b'+') => (1.0, &piece[1..]),
        Some(b'-') => (-1.0, &piece[1..]),
        _ => (1.0, piece),
    };
    let (coef, basis) = match body.rfind('*') {
        Some(k) => (parse_number(&body[..k])?, &body[k + 1..]),
        None if body.parse::<f64>().is_ok() => (parse_number(body)?, "1"),
        None => (1.0, body),
    };
    Ok((sign * coef, parse_basis(basis)?))
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = match s {
        "pi" => PI,
        _ => s.parse().map_err(|_| format!("bad number {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number {s:?}"))
    }
}

/// `name(<n>var)` at the start of `s`; returns the frequency and the rest.
fn trig<'a>(s: &'a str, name: &str, var: char) -> Option<(usize, &'a str)> {
    let inner = s.strip_prefix(name)?.strip_prefix('(')?;
    let close = inner.find(')')?;
    let arg = inner[..close].strip_suffix(var)?;
    let n = if arg.is_empty() { 1 } else { arg.parse().ok()? };
    Some((n, &inner[close + 1..]))
}

fn parse_basis(s: &str) -> std::result::Result<Basis, String> {
    if s == "1" {
        return Ok(Basis::One);
    }
    if let Some((j, "")) = trig(s, "sin", 'x') {
        return check_j(j).map(|j| Basis::Sin { j });
    }
    if let Some((l, rest)) = trig(s, "cos", 't') {
        if let Some((j, "")) = trig(rest, "sin", 'x') {
            return check_j(j).map(|j| Basis::CosSin { l, j });
        }
    }
    if let Some((l, rest)) = trig(s, "sin", 't') {
        if let Some((j, "")) = trig(rest, "sin", 'x') {
            return check_j(j).map(|j| Basis::SinSin { l, j });
        }
    }
    Err(format!("unknown basis function {s:?} (use 1, sin(jx), cos(lt)sin(jx) or sin(lt)sin(jx))"))
}

fn check_j(j: usize) -> std::result::Result<usize, String> {
    if j == 0 {
        Err("sin(0x) vanishes identically".into())
    } else {
        Ok(j)
    }
}

/// Weight `a(x, u)` of the third family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Zero,
    /// `u^2`: even in `u` and symmetric about `x = pi/2`.
    Square,
    /// `u^3 cos x`: odd in `u` and antisymmetric about `x = pi/2`.
    OddCubic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingConfig {
    /// `beta u^{2k} + h`.
    Theorem1 { k: u32, beta: f64, h: FieldExpr },
    /// `beta(x) u^{2k} + remainder_coef u^{remainder_power} + h`.
    Theorem2 { k: u32, beta: FieldExpr, remainder_coef: f64, remainder_power: u32, h: FieldExpr },
    /// `linear u + cubic u^3 + g(t, x) + weight_coef a(x, u)`.
    Theorem3 { linear: f64, cubic: f64, weight: WeightKind, weight_coef: f64, g: FieldExpr },
    /// `u^2 - v0^2` with `v0 = amplitude (cos(m(t + x)) - cos(m(t - x)))`.
    Multiplicity { mode: usize, amplitude: f64 },
}

impl ForcingConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ForcingConfig::Theorem1 { .. } => "theorem1",
            ForcingConfig::Theorem2 { .. } => "theorem2",
            ForcingConfig::Theorem3 { .. } => "theorem3",
            ForcingConfig::Multiplicity { .. } => "multiplicity",
        }
    }

    pub fn is_resonant(&self) -> bool {
        matches!(self, ForcingConfig::Theorem1 { .. } | ForcingConfig::Theorem2 { .. })
    }
}

/// Starting point of the minimisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Zero,
    /// The exact kernel solution `v0` of the multiplicity family.
    V0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub r_ball: f64,
    pub tol_range: f64,
    pub max_iter_range: usize,
    pub tol_grad: f64,
    pub max_iter_min: usize,
    pub n_restarts: usize,
    pub margin: f64,
    pub max_doublings: usize,
    pub init: InitKind,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            r_ball: 1.0,
            tol_range: 1e-12,
            max_iter_range: 200,
            tol_grad: 1e-9,
            max_iter_min: 500,
            n_restarts: 0,
            margin: 1e-6,
            max_doublings: 3,
            init: InitKind::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub directory: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub samples: usize,
    pub holder_cap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub trunc: Truncation,
    pub forcing: ForcingConfig,
    pub solver: SolverSettings,
    /// Sweep values; a single solve uses the first unless given explicitly.
    pub epsilon: Vec<f64>,
    pub allow_zero: bool,
    pub output: OutputSettings,
    pub seed: u64,
    pub workers: Option<usize>,
    pub verify: VerifySettings,
    /// Name used for run directories (the config file stem).
    pub name: String,
    /// Verbatim configuration text, copied into every run directory.
    pub source: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::parse("", Path::new("."), "default").expect("empty configuration is valid")
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

struct Reader {
    sections: Sections,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.sections.get_mut(section)?.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        match self.take(section, key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("[{section}] {key} = {v:?} is not a valid value"))),
        }
    }

    fn positive_f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.parse(section, key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("[{section}] {key} must be positive, got {v}")));
        }
        Ok(v)
    }

    fn positive_usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        let v: usize = self.parse(section, key, default)?;
        if v == 0 {
            return Err(Error::Config(format!("[{section}] {key} must be positive")));
        }
        Ok(v)
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(raw) = self.take(section, key) else { return Ok(None) };
        let values = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_number(s).map_err(|e| Error::Config(format!("[{section}] {key}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Some(values))
    }

    fn finish(self) -> Result<()> {
        for (section, keys) in &self.sections {
            if let Some(key) = keys.keys().next() {
                return Err(Error::Config(format!("unknown key [{section}] {key}")));
            }
        }
        Ok(())
    }
}

const SECTIONS: &[&str] = &["grid", "spectral", "forcing", "solver", "epsilon", "output", "run", "verify"];

impl RunConfig {
    /// Read a configuration file; relative field paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        Self::parse(&text, base, name)
    }

    pub fn parse(text: &str, base: &Path, name: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let mut sections = Sections::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key {key:?} outside any section")));
                }
                continue;
            };
            let section = section.trim().to_ascii_lowercase();
            if !SECTIONS.contains(&section.as_str()) {
                return Err(Error::Config(format!("unknown section [{section}]")));
            }
            let entry = sections.entry(section).or_default();
            for (k, v) in props.iter() {
                entry.insert(k.trim().to_string(), strip_comment(v).to_string());
            }
        }
        let mut r = Reader { sections };

        let grid = Grid::new(r.positive_usize("grid", "nt", 128)?, r.positive_usize("grid", "nx", 64)?);
        let trunc = Truncation::new(r.positive_usize("spectral", "L", 32)?, r.positive_usize("spectral", "J", 32)?);
        let forcing = parse_forcing(&mut r, base)?;

        let d = SolverSettings::default();
        let init = match r.take("solver", "init").as_deref().map(str::trim) {
            None | Some("zero") => InitKind::Zero,
            Some("v0") => InitKind::V0,
            Some(other) => return Err(Error::Config(format!("[solver] init = {other:?}; expected zero or v0"))),
        };
        if init == InitKind::V0 && !matches!(forcing, ForcingConfig::Multiplicity { .. }) {
            return Err(Error::Config("[solver] init = v0 needs kind = multiplicity".into()));
        }
        let solver = SolverSettings {
            r_ball: r.positive_f64("solver", "R_ball", d.r_ball)?,
            tol_range: r.positive_f64("solver", "tol_range", d.tol_range)?,
            max_iter_range: r.positive_usize("solver", "max_iter_range", d.max_iter_range)?,
            tol_grad: r.positive_f64("solver", "tol_grad", d.tol_grad)?,
            max_iter_min: r.positive_usize("solver", "max_iter_min", d.max_iter_min)?,
            n_restarts: r.parse("solver", "n_restarts", d.n_restarts)?,
            margin: r.parse("solver", "margin", d.margin)?,
            max_doublings: r.parse("solver", "max_doublings", d.max_doublings)?,
            init,
        };
        if !(solver.margin >= 0.0 && solver.margin < solver.r_ball) {
            return Err(Error::Config(format!("[solver] margin must lie in [0, R_ball), got {}", solver.margin)));
        }

        let allow_zero: bool = r.parse("epsilon", "allow_zero", false)?;
        let list = r.list("epsilon", "list")?;
        let geometric = r.list("epsilon", "geometric")?;
        let epsilon = match (list, geometric) {
            (Some(_), Some(_)) => return Err(Error::Config("[epsilon] give either list or geometric, not both".into())),
            (Some(v), None) => v,
            (None, Some(g)) => geometric_values(&g)?,
            (None, None) => vec![1e-2],
        };
        if epsilon.is_empty() {
            return Err(Error::Config("empty epsilon list".into()));
        }
        check_epsilons(&epsilon, allow_zero)?;

        let directory = PathBuf::from(r.take("output", "directory").unwrap_or_else(|| "runs".into()).trim());
        let formats = r.take("output", "formats").unwrap_or_else(|| "csv".into());
        let (mut csv, mut json) = (false, false);
        for f in formats.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match f {
                "csv" => csv = true,
                "json" => json = true,
                other => return Err(Error::Config(format!("[output] unknown format {other:?}"))),
            }
        }
        let run_id = r.take("output", "run_id").map(|s| s.trim().to_string());
        if let Some(id) = &run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(Error::Config(format!("[output] run_id {id:?} is not a plain directory name")));
            }
        }

        let seed = r.parse("run", "seed", 0u64)?;
        let workers = match r.take("run", "workers") {
            None => None,
            Some(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(Error::Config(format!("[run] workers = {v:?} must be a positive integer"))),
            },
        };
        let verify = VerifySettings {
            samples: r.positive_usize("verify", "samples", 50)?,
            holder_cap: r.positive_usize("verify", "holder_cap", DEFAULT_HOLDER_CAP)?,
        };
        r.finish()?;

        Ok(Self {
            grid,
            trunc,
            forcing,
            solver,
            epsilon,
            allow_zero,
            output: OutputSettings { directory, csv: csv || !json, json, run_id },
            seed,
            workers,
            verify,
            name: name.to_string(),
            source: text.to_string(),
        })
    }

    /// Rejects a zero `eps` unless the configuration asks for zero-control runs.
    pub fn check_eps(&self, eps: f64) -> Result<()> {
        check_epsilons(&[eps], self.allow_zero)
    }
}

fn strip_comment(v: &str) -> &str {
    let cut = v.find([';', '#']).unwrap_or(v.len());
    v[..cut].trim()
}

fn check_epsilons(values: &[f64], allow_zero: bool) -> Result<()> {
    for &e in values {
        if !e.is_finite() {
            return Err(Error::Config(format!("epsilon {e} is not finite")));
        }
        if e == 0.0 && !allow_zero {
            return Err(Error::Config("epsilon = 0 needs allow_zero = true in [epsilon]".into()));
        }
    }
    Ok(())
}

/// `count` values from `start` to `stop`, equally spaced in `log |eps|`.
fn geometric_values(g: &[f64]) -> Result<Vec<f64>> {
    let &[start, stop, count] = g else {
        return Err(Error::Config("[epsilon] geometric needs start, stop, count".into()));
    };
    if count < 1.0 || count.fract() != 0.0 {
        return Err(Error::Config(format!("[epsilon] geometric count must be a positive integer, got {count}")));
    }
    if start == 0.0 || stop == 0.0 || start.signum() != stop.signum() {
        return Err(Error::Config("[epsilon] geometric start and stop must be nonzero with equal signs".into()));
    }
    let n = count as usize;
    if n == 1 {
        return Ok(vec![start]);
    }
    let ratio = stop / start;
    Ok((0..n).map(|i| start * ratio.powf(i as f64 / (n - 1) as f64)).collect())
}

fn parse_forcing(r: &mut Reader, base: &Path) -> Result<ForcingConfig> {
    let kind = r.take("forcing", "kind").unwrap_or_else(|| "theorem1".into());
    let field = |r: &mut Reader, key: &str, default: &str| -> Result<FieldExpr> {
        FieldExpr::parse(&r.take("forcing", key).unwrap_or_else(|| default.into()), base)
    };
    let k = |r: &mut Reader| -> Result<u32> {
        let k: u32 = r.parse("forcing", "k", 1)?;
        if k == 0 {
            return Err(Error::Config("[forcing] k must be positive".into()));
        }
        Ok(k)
    };
    match kind.trim() {
        "theorem1" => Ok(ForcingConfig::Theorem1 {
            k: k(r)?,
            beta: r.parse("forcing", "beta", 1.0)?,
            h: field(r, "h", "sin(x)")?,
        }),
        "theorem2" => {
            let beta = field(r, "beta", "sin(x)")?;
            if !beta.is_stationary() {
                return Err(Error::Config("[forcing] beta must depend on x only".into()));
            }
            let k = k(r)?;
            let remainder_power: u32 = r.parse("forcing", "remainder_power", 3)?;
            if remainder_power <= 2 * k {
                return Err(Error::Config(format!("[forcing] remainder_power must exceed 2k = {}", 2 * k)));
            }
            Ok(ForcingConfig::Theorem2 {
                k,
                beta,
                remainder_coef: r.parse("forcing", "remainder_coef", 1.0)?,
                remainder_power,
                h: field(r, "h", "sin(x)")?,
            })
        }
        "theorem3" => {
            let weight = match r.take("forcing", "weight").as_deref().map(str::trim) {
                None | Some("square") => WeightKind::Square,
                Some("zero") => WeightKind::Zero,
                Some("odd_cubic") => WeightKind::OddCubic,
                Some(other) => return Err(Error::Config(format!("[forcing] unknown weight {other:?}"))),
            };
            let g = match r.take("forcing", "g") {
                None => FieldExpr::zero(),
                Some(s) if s.trim() == "0" => FieldExpr::zero(),
                Some(s) => FieldExpr::parse(&s, base)?,
            };
            Ok(ForcingConfig::Theorem3 {
                linear: r.positive_f64("forcing", "linear", 1.0)?,
                cubic: r.parse("forcing", "cubic", 1.0)?,
                weight,
                weight_coef: r.parse("forcing", "weight_coef", 1.0)?,
                g,
            })
        }
        "multiplicity" => Ok(ForcingConfig::Multiplicity {
            mode: r.positive_usize("forcing", "mode", 1)?,
            amplitude: r.parse("forcing", "amplitude", 1.0)?,
        }),
        other => Err(Error::Config(format!("unknown forcing kind {other:?}"))),
    }
}
