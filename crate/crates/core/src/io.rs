//! CSV import and export.
//!
//! Every file starts with a single metadata comment line of space-separated
//! `key=value` pairs, always led by `seed`, followed by a header row and the
//! data. Floats are written with 17 significant digits; undefined values are
//! written as empty fields.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::density::InvariantDensity;
use crate::error::{Error, Result};
use crate::estimate::EstimateResult;
use crate::experiment::{CurveRow, McSummary, NormalityReport};
use crate::kernel::KernelSpec;
use crate::model::{BarrierConfig, BarrierMode, SamplePath};

/// Ordered `key=value` pairs for the leading comment line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn with_seed(seed: u64) -> Self {
        Metadata {
            entries: vec![("seed".into(), seed.to_string())],
        }
    }

    pub fn push(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn line(&self) -> String {
        let body = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k}={}", v.replace(char::is_whitespace, "_")))
            .collect::<Vec<_>>()
            .join(" ");
        format!("# {body}\n")
    }

    fn parse(line: &str) -> Metadata {
        let entries = line
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|tok| tok.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        Metadata { entries }
    }
}

/// Full-precision float field.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn write_table<W: Write>(out: W, meta: &Metadata, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = out;
    out.write_all(meta.line().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata describing a simulated path.
pub fn path_metadata(path: &SamplePath) -> Metadata {
    let b = path.barrier;
    let mut meta = Metadata::with_seed(path.seed.unwrap_or(0))
        .push("stream", path.stream)
        .push("mode", b.mode())
        .push("lower", b.lower());
    if let Some(u) = b.upper() {
        meta = meta.push("upper", u);
    }
    if let Some(s) = path.sigma {
        meta = meta.push("sigma", s);
    }
    meta.push("delta", path.delta)
}

/// Writes `t,x,l_reg,r_reg`. `extra` entries are appended to the path
/// metadata.
pub fn write_path_csv<W: Write>(out: W, path: &SamplePath, extra: &[(&str, String)]) -> Result<()> {
    let meta = extra
        .iter()
        .fold(path_metadata(path), |m, (k, v)| m.push(k, v));
    let rows = (0..path.len()).map(|k| {
        vec![
            fmt_f64(path.times[k]),
            fmt_f64(path.x[k]),
            fmt_f64(path.l_reg[k]),
            fmt_f64(path.r_reg[k]),
        ]
    });
    write_table(out, &meta, &["t", "x", "l_reg", "r_reg"], rows)
}

fn parse_meta<T: std::str::FromStr>(meta: &Metadata, key: &str) -> Result<Option<T>> {
    meta.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Parse { line: 1, message: format!("bad metadata value {key}={v}") })
        })
        .transpose()
}

/// Reads a path CSV. The barrier comes from `barrier` when given, otherwise
/// from the `mode`, `lower` and `upper` metadata. The step is taken from the
/// `delta` metadata or, failing that, from the first time increment.
pub fn read_path_csv<R: Read>(mut input: R, barrier: Option<BarrierConfig>) -> Result<SamplePath> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(Metadata::parse)
        .fold(Metadata::default(), |mut acc, m| {
            acc.entries.extend(m.entries);
            acc
        });

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let cols = [column("t")?, column("x")?, column("l_reg")?, column("r_reg")?];

    let mut data: [Vec<f64>; 4] = Default::default();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        for (store, &c) in data.iter_mut().zip(&cols) {
            let field = record.get(c).unwrap_or("");
            let v = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("'{field}' is not a number"),
            })?;
            store.push(v);
        }
    }
    let [times, x, l_reg, r_reg] = data;
    if x.len() < 2 {
        return Err(Error::Parse {
            line: 0,
            message: "a path needs at least 2 rows".into(),
        });
    }

    let barrier = match barrier {
        Some(b) => b,
        None => {
            let mode = parse_meta::<BarrierMode>(&meta, "mode")?.unwrap_or(BarrierMode::TwoSided);
            let lower = parse_meta::<f64>(&meta, "lower")?.unwrap_or(0.0);
            let upper = parse_meta::<f64>(&meta, "upper")?.unwrap_or(3.0);
            BarrierConfig::for_mode(mode, lower, upper)?
        }
    };
    let delta = parse_meta::<f64>(&meta, "delta")?.unwrap_or(times[1] - times[0]);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parse {
            line: 0,
            message: format!("step size {delta} is not positive"),
        });
    }
    Ok(SamplePath {
        delta,
        sigma: parse_meta(&meta, "sigma")?,
        times,
        x,
        l_reg,
        r_reg,
        seed: parse_meta(&meta, "seed")?,
        stream: parse_meta(&meta, "stream")?.unwrap_or(0),
        barrier,
    })
}

/// Writes `x,pi,f,sigma_asym`; `sigma_asym` is empty where `F(x) = 0`.
pub fn write_density_csv<W: Write>(
    out: W,
    meta: &Metadata,
    density: &InvariantDensity,
    kernel: &KernelSpec,
    grid: &[f64],
) -> Result<()> {
    let rows = grid.iter().map(|&x| {
        vec![
            fmt_f64(x),
            fmt_f64(density.pi_eval(x)),
            fmt_f64(density.f_eval(kernel, x)),
            fmt_opt(density.sigma_eval(kernel, x).ok()),
        ]
    });
    write_table(out, meta, &["x", "pi", "f", "sigma_asym"], rows)
}

/// Writes `x,estimate,denominator,undefined,boundary`.
pub fn write_estimate_csv<W: Write>(out: W, meta: &Metadata, est: &EstimateResult) -> Result<()> {
    let rows = (0..est.grid.len()).map(|i| {
        vec![
            fmt_f64(est.grid[i]),
            fmt_opt(est.value(i)),
            fmt_f64(est.denominators[i]),
            fmt_bool(est.undefined_mask[i]).into(),
            fmt_bool(est.boundary_mask[i]).into(),
        ]
    });
    write_table(out, meta, &["x", "estimate", "denominator", "undefined", "boundary"], rows)
}

pub const RESULTS_HEADER: [&str; 12] = [
    "case",
    "mode",
    "n",
    "beta",
    "h",
    "delta",
    "rase_mean",
    "rase_std",
    "rase_median",
    "excluded_mean",
    "n_reps",
    "rase_se",
];

/// Writes one row per Monte Carlo cell. `rase_se` is the standard error of
/// `rase_mean`.
pub fn write_results_csv<W: Write>(out: W, meta: &Metadata, cells: &[McSummary]) -> Result<()> {
    let rows = cells.iter().map(|c| {
        vec![
            c.case_id.to_string(),
            c.mode.to_string(),
            c.n.to_string(),
            c.beta.to_string(),
            fmt_f64(c.h),
            fmt_f64(c.delta),
            fmt_f64(c.rase_mean),
            fmt_f64(c.rase_std),
            fmt_f64(c.rase_median),
            fmt_f64(c.excluded_points_mean),
            c.n_replications.to_string(),
            fmt_f64(c.rase_se()),
        ]
    });
    write_table(out, meta, &RESULTS_HEADER, rows)
}

pub fn write_normality_csv<W: Write>(out: W, meta: &Metadata, reports: &[NormalityReport]) -> Result<()> {
    let rows = reports.iter().map(|r| {
        vec![
            r.case_id.to_string(),
            r.x0.to_string(),
            r.n.to_string(),
            r.beta.to_string(),
            fmt_f64(r.mean_z),
            fmt_f64(r.var_z),
            fmt_f64(r.ks_stat),
            r.dropped.to_string(),
        ]
    });
    write_table(
        out,
        meta,
        &["case", "x0", "n", "beta", "mean_z", "var_z", "ks_stat", "dropped"],
        rows,
    )
}

pub fn write_curve_csv<W: Write>(out: W, meta: &Metadata, rows: &[CurveRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| vec![fmt_f64(r.x), fmt_opt(r.estimate), fmt_f64(r.truth)]);
    write_table(out, meta, &["x", "estimate", "truth"], rows)
}

/// Leading metadata of a CSV produced by this module.
pub fn read_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(|l| Metadata::parse(l).entries)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_drift;
    use crate::simulate::{simulate_path, SimConfig};

    fn sample_path(mode: BarrierMode) -> SamplePath {
        let barrier = BarrierConfig::for_mode(mode, 0.0, 3.0).unwrap();
        let cfg = SimConfig::new(builtin_drift(2).unwrap(), 0.2, barrier, 200, 0.01)
            .with_seed(7)
            .with_stream(3);
        simulate_path(&cfg).unwrap()
    }

    #[test]
    fn path_round_trip_is_exact() {
        for mode in BarrierMode::ALL {
            let p = sample_path(mode);
            let mut buf = Vec::new();
            write_path_csv(&mut buf, &p, &[("case", "2".into())]).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("# seed=7 stream=3 mode="));
            assert_eq!(text.lines().nth(1), Some("t,x,l_reg,r_reg"));
            assert_eq!(text.lines().count(), 203);
            let back = read_path_csv(buf.as_slice(), None).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn reader_infers_step_and_defaults() {
        let text = "t,x,l_reg,r_reg\n0,1.0,0,0\n0.5,1.2,0,0\n1.0,1.1,0,0\n";
        let p = read_path_csv(text.as_bytes(), None).unwrap();
        assert_eq!(p.delta, 0.5);
        assert_eq!(p.barrier, BarrierConfig::two_sided(0.0, 3.0).unwrap());
        assert_eq!(p.seed, None);
    }

    #[test]
    fn reader_reports_bad_input() {
        let bad = "t,x,l_reg,r_reg\n0,1.0,0,0\n0.5,abc,0,0\n";
        match read_path_csv(bad.as_bytes(), None) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing = "t,x,l_reg\n0,1,0\n1,1,0\n";
        assert!(matches!(read_path_csv(missing.as_bytes(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn metadata_line() {
        let m = Metadata::with_seed(42).push("case", 1).push("note", "two words");
        assert_eq!(m.line(), "# seed=42 case=1 note=two_words\n");
        let parsed = read_metadata(&m.line());
        assert_eq!(parsed.get("seed").map(String::as_str), Some("42"));
    }
}
