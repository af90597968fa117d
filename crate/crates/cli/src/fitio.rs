//! Posterior fit files: a columnar draws CSV plus a JSON sidecar.
//!
//! Draws CSV, one row per retained draw:
//!   spike-and-slab: `sigma2,beta_1..beta_p,gamma_1..gamma_p`
//!   horseshoe:      `sigma2,beta_1..beta_p`
//! The sidecar carries draw counts, the seed, the posterior mean, and (for
//! the selection prior) inclusion probabilities.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use decouple_core::linalg::Mat;
use decouple_core::spikeslab::BitMat;
use decouple_core::{HsDraws, SsDraws};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSidecar {
    pub schema_version: u32,
    pub prior: String,
    pub draws: usize,
    pub burnin: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pip: Option<Vec<f64>>,
    pub post_mean: Vec<f64>,
}

impl FitSidecar {
    pub fn from_ss(d: &SsDraws) -> Self {
        FitSidecar {
            schema_version: SCHEMA_VERSION,
            prior: "ss".into(),
            draws: d.draws,
            burnin: d.burnin,
            seed: d.seed,
            pip: Some(d.pip.clone()),
            post_mean: d.post_mean.clone(),
        }
    }

    pub fn from_hs(d: &HsDraws) -> Self {
        FitSidecar {
            schema_version: SCHEMA_VERSION,
            prior: "hs".into(),
            draws: d.draws,
            burnin: d.burnin,
            seed: d.seed,
            pip: None,
            post_mean: d.post_mean.clone(),
        }
    }
}

/// Coefficient draws loaded back from disk, enough for weight construction
/// and prediction-error benchmarking under either prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDraws {
    pub sidecar: FitSidecar,
    /// p x S, column s = draw s.
    pub beta: Mat,
    pub sigma2: Vec<f64>,
}

impl decouple_core::weights::CoefDraws for LoadedDraws {
    fn p(&self) -> usize {
        self.beta.nrows()
    }
    fn num_draws(&self) -> usize {
        self.beta.ncols()
    }
    fn draw(&self, s: usize) -> &[f64] {
        self.beta.col(s)
    }
    fn post_mean(&self) -> &[f64] {
        &self.sidecar.post_mean
    }
}

pub fn write_sidecar(sidecar: &FitSidecar, path: &Path) -> CliResult<()> {
    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, json.as_bytes())
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> CliResult<FitSidecar> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    let sc: FitSidecar = serde_json::from_str(&raw)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            sc.schema_version
        )));
    }
    Ok(sc)
}

pub fn write_ss_draws(d: &SsDraws, path: &Path) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let p = d.p();
    write!(w, "sigma2")?;
    for j in 1..=p {
        write!(w, ",beta_{j}")?;
    }
    for j in 1..=p {
        write!(w, ",gamma_{j}")?;
    }
    writeln!(w)?;
    for s in 0..d.draws {
        write!(w, "{}", d.sigma2[s])?;
        let col = d.beta.col(s);
        for &b in col {
            write!(w, ",{b}")?;
        }
        for j in 0..p {
            write!(w, ",{}", u8::from(d.gamma.get(s, j)))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hs_draws(d: &HsDraws, path: &Path) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let p = d.p();
    write!(w, "sigma2")?;
    for j in 1..=p {
        write!(w, ",beta_{j}")?;
    }
    writeln!(w)?;
    for s in 0..d.draws {
        write!(w, "{}", d.sigma2[s])?;
        for &b in d.beta.col(s) {
            write!(w, ",{b}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a draws CSV written by either prior; gamma columns, when present,
/// are validated against the beta zero pattern.
pub fn read_draws(path: &Path, sidecar: FitSidecar) -> CliResult<LoadedDraws> {
    let file = File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(CliError::Io(format!("{}: empty file", path.display()))),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.first() != Some(&"sigma2") {
        return Err(CliError::Io(format!(
            "{}: first column must be sigma2",
            path.display()
        )));
    }
    let has_gamma = cols.iter().any(|c| c.starts_with("gamma_"));
    let p = if has_gamma {
        (cols.len() - 1) / 2
    } else {
        cols.len() - 1
    };
    if p != sidecar.post_mean.len() {
        return Err(CliError::Validation(format!(
            "{}: draws have p = {p} but sidecar has p = {}",
            path.display(),
            sidecar.post_mean.len()
        )));
    }
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row_no = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(CliError::Io(format!(
                "{}: ragged row {row_no}",
                path.display()
            )));
        }
        let parse = |raw: &str, what: &str| -> CliResult<f64> {
            raw.trim().parse::<f64>().map_err(|_| {
                CliError::Io(format!(
                    "{}: parse error at row {row_no}, column {what}",
                    path.display()
                ))
            })
        };
        let sigma2 = parse(cells[0], "sigma2")?;
        let mut beta = Vec::with_capacity(p);
        for j in 0..p {
            beta.push(parse(cells[1 + j], &format!("beta_{}", j + 1))?);
        }
        if has_gamma {
            for j in 0..p {
                let g = parse(cells[1 + p + j], &format!("gamma_{}", j + 1))?;
                let included = g != 0.0;
                if !included && beta[j] != 0.0 {
                    return Err(CliError::Validation(format!(
                        "{}: row {row_no}: beta_{} nonzero outside the model",
                        path.display(),
                        j + 1
                    )));
                }
            }
        }
        rows.push((sigma2, beta));
    }
    if rows.is_empty() {
        return Err(CliError::Io(format!("{}: no draws", path.display())));
    }
    let s = rows.len();
    let mut beta = Mat::zeros(p, s);
    let mut sigma2 = Vec::with_capacity(s);
    for (si, (sg, row)) in rows.iter().enumerate() {
        sigma2.push(*sg);
        beta.col_mut(si).copy_from_slice(row);
    }
    Ok(LoadedDraws {
        sidecar,
        beta,
        sigma2,
    })
}

/// Reconstruct an `SsDraws`-shaped bundle from loaded CSV draws (gamma from
/// the beta zero pattern) so selection-prior-only code paths can run off
/// files.
pub fn loaded_to_ss(loaded: &LoadedDraws) -> CliResult<SsDraws> {
    let pip = match &loaded.sidecar.pip {
        Some(p) => p.clone(),
        None => {
            return Err(CliError::Validation(
                "fit has no inclusion probabilities (shrinkage prior)".into(),
            ))
        }
    };
    let p = loaded.beta.nrows();
    let s = loaded.beta.ncols();
    let mut gamma = BitMat::zeros(s, p);
    for si in 0..s {
        for (j, &b) in loaded.beta.col(si).iter().enumerate() {
            if b != 0.0 {
                gamma.set(si, j);
            }
        }
    }
    Ok(SsDraws {
        beta: loaded.beta.clone(),
        gamma,
        sigma2: loaded.sigma2.clone(),
        pip,
        post_mean: loaded.sidecar.post_mean.clone(),
        draws: s,
        burnin: loaded.sidecar.burnin,
        seed: loaded.sidecar.seed,
    })
}
