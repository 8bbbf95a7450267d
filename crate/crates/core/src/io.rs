//! CSV emission and read-back.
//!
//! Three schemas, all with a mandatory header and every float written as
//! `{:.16e}` (17 significant digits, enough to round-trip any `f64`):
//!
//! | file        | columns                                                   | row order      |
//! |-------------|-----------------------------------------------------------|----------------|
//! | diagonal    | `t,cell,re_psi_omega,im_psi_omega,re_psi_e,im_psi_e`       | by `(t, cell)` |
//! | intensity   | `t,cell,I_omega1,I_omega2,I_e1,I_e2`                       | by `(t, cell)` |
//! | grid        | `l,lprime,re_psi_omega,im_psi_omega,re_psi_e,im_psi_e`     | by `(l, lprime)` |
//!
//! Snapshots are written in the order given, which for a trajectory is
//! increasing `t`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, TwoPhotonState, C64};
use crate::observables::intensities;

pub const DIAGONAL_HEADER: [&str; 6] = ["t", "cell", "re_psi_omega", "im_psi_omega", "re_psi_e", "im_psi_e"];
pub const INTENSITY_HEADER: [&str; 6] = ["t", "cell", "I_omega1", "I_omega2", "I_e1", "I_e2"];
pub const GRID_HEADER: [&str; 6] = ["l", "lprime", "re_psi_omega", "im_psi_omega", "re_psi_e", "im_psi_e"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Csv {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<I>(path: &Path, header: [&str; 6], rows: I) -> Result<()>
where
    I: IntoIterator<Item = [String; 6]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Diagonal amplitudes `psi(l, l, t)` of both species for every snapshot.
pub fn write_diagonal_series(path: impl AsRef<Path>, snapshots: &[TwoPhotonState]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|s| {
        (0..s.lattice().cells()).map(move |l| {
            let (o, e) = (s.psi_omega()[[l, l]], s.psi_e()[[l, l]]);
            [fmt(s.t()), l.to_string(), fmt(o.re), fmt(o.im), fmt(e.re), fmt(e.im)]
        })
    });
    write_rows(path.as_ref(), DIAGONAL_HEADER, rows)
}

/// Per-cell single-photon intensities for every snapshot.
pub fn write_intensity_series(path: impl AsRef<Path>, snapshots: &[TwoPhotonState]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|s| {
        let p = intensities(s);
        let t = s.t();
        (0..s.lattice().cells())
            .map(|l| [fmt(t), l.to_string(), fmt(p.omega1[l]), fmt(p.omega2[l]), fmt(p.e1[l]), fmt(p.e2[l])])
            .collect::<Vec<_>>()
    });
    write_rows(path.as_ref(), INTENSITY_HEADER, rows)
}

/// Full `M x M` amplitude grid of one state.
pub fn write_grid(path: impl AsRef<Path>, state: &TwoPhotonState) -> Result<()> {
    let m = state.lattice().cells();
    let rows = (0..m).flat_map(|l| {
        (0..m).map(move |lp| {
            let (o, e) = (state.psi_omega()[[l, lp]], state.psi_e()[[l, lp]]);
            [l.to_string(), lp.to_string(), fmt(o.re), fmt(o.im), fmt(e.re), fmt(e.im)]
        })
    });
    write_rows(path.as_ref(), GRID_HEADER, rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, field: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        reason: format!("row {row}: cannot parse `{field}`"),
    })
}

/// Reads a grid file back into a state on `lattice` at time `t`. Every cell
/// pair must appear exactly once; the header must match [`GRID_HEADER`].
pub fn read_grid(path: impl AsRef<Path>, lattice: Lattice, t: f64) -> Result<TwoPhotonState> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(GRID_HEADER.iter().copied()) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            reason: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let m = lattice.cells();
    let mut omega = Array2::zeros((m, m));
    let mut e = Array2::zeros((m, m));
    let mut seen = Array2::from_elem((m, m), false);
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|err| csv_error(path, err))?;
        let l: usize = parse_field(path, row + 1, &record[0])?;
        let lp: usize = parse_field(path, row + 1, &record[1])?;
        if l >= m || lp >= m || seen[[l, lp]] {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                reason: format!("row {}: cell pair ({l}, {lp}) out of range or repeated", row + 1),
            });
        }
        seen[[l, lp]] = true;
        let f = |i: usize| parse_field::<f64>(path, row + 1, &record[i]);
        omega[[l, lp]] = C64::new(f(2)?, f(3)?);
        e[[l, lp]] = C64::new(f(4)?, f(5)?);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            reason: format!("grid is missing cell pairs for M = {m}"),
        });
    }
    TwoPhotonState::from_grids(lattice, omega, e, t)
}

/// File names a plotting script refers to; `None` skips that panel.
#[derive(Debug, Clone, Default)]
pub struct PlotFiles<'a> {
    pub diagonal: Option<&'a str>,
    pub intensity: Option<&'a str>,
    pub grid: Option<&'a str>,
}

/// Writes a gnuplot script that renders the given CSVs to PNGs next to it.
pub fn write_gnuplot_script(path: impl AsRef<Path>, title: &str, files: &PlotFiles<'_>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    s.push_str("# gnuplot script; run from this directory with `gnuplot <script>`\n");
    s.push_str("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
    if let Some(d) = files.diagonal {
        s.push_str(&format!(
            "set output '{title}_diagonal.png'\nset title '{title}: |psi(l,l,t)|'\nset xlabel 'cell'\nset ylabel 't'\n\
             set view map\nsplot '{d}' using 2:1:(sqrt($3**2+$4**2)) with points pt 5 ps 0.6 palette title 'omega', \\\n\
             \x20     '{d}' using 2:1:(sqrt($5**2+$6**2)) with points pt 4 ps 0.6 palette title 'e'\nunset view\n"
        ));
    }
    if let Some(i) = files.intensity {
        s.push_str(&format!(
            "set output '{title}_intensity.png'\nset title '{title}: total intensity per pair'\nset xlabel 't'\nset ylabel 'photons'\n\
             plot '{i}' using 1:3 smooth unique with lines title 'omega1', \\\n\
             \x20    '{i}' using 1:5 smooth unique with lines title 'e1'\n"
        ));
    }
    if let Some(g) = files.grid {
        s.push_str(&format!(
            "set output '{title}_grid.png'\nset title '{title}: Re psi_omega(l, lprime)'\nset xlabel 'l'\nset ylabel 'lprime'\n\
             set view map\nsplot '{g}' using 1:2:3 with image title ''\nunset view\n"
        ));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
