//! Python bindings: grid sampling, velocity recovery, free runs, snapshots and
//! the `bqch` command line. Fields cross the boundary as nested lists indexed
//! `[i][j]` over the (x₁, x₂) grid.

use std::path::Path;

use boussinesq_channel::cli::cli_main;
use boussinesq_channel::elliptic::divcurl_residual;
use boussinesq_channel::io;
use boussinesq_channel::solver::{NoControl, NoForcing, Solver, SolverConfig, State, TimeStep};
use boussinesq_channel::spectral::{Grid, Parity, ScalarField};
use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<f64>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_field(rows: &Rows, parity: Parity) -> PyResult<ScalarField> {
    let nx1 = rows.len();
    let nx2 = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nx2) {
        return Err(PyValueError::new_err("rows must have equal length"));
    }
    let grid = Grid::new(nx1, nx2).map_err(value_err)?;
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let arr = Array2::from_shape_vec((nx1, nx2), flat).map_err(value_err)?;
    ScalarField::from_values(&grid, parity, arr).map_err(value_err)
}

fn to_rows(f: &ScalarField) -> Rows {
    f.values().rows().into_iter().map(|r| r.to_vec()).collect()
}

fn state(w: &Rows, theta: &Rows, mean_coeff: f64, t: f64) -> PyResult<State> {
    let w = to_field(w, Parity::Odd)?;
    let theta = to_field(theta, Parity::Even)?;
    State::new(w, theta, mean_coeff, t).map_err(value_err)
}

/// Grid coordinates `(x1, x2)`: midpoints in (−1, 1) and uniform points in [0, 2π).
#[pyfunction]
fn grid_points(nx1: usize, nx2: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let g = Grid::new(nx1, nx2).map_err(value_err)?;
    Ok(((0..nx1).map(|i| g.x1(i)).collect(), (0..nx2).map(|j| g.x2(j)).collect()))
}

/// Velocity `(u1, u2)` of a vorticity with uniform-flow coefficient `mean_coeff`.
#[pyfunction]
#[pyo3(signature = (w, mean_coeff = 0.0))]
fn velocity(w: Rows, mean_coeff: f64) -> PyResult<(Rows, Rows)> {
    let wf = to_field(&w, Parity::Odd)?;
    let zero = ScalarField::zeros(wf.grid(), Parity::Even);
    let u = State::new(wf, zero, mean_coeff, 0.0)
        .and_then(|s| s.velocity())
        .map_err(value_err)?;
    Ok((to_rows(&u.u1), to_rows(&u.u2)))
}

/// Largest of the divergence, curl, wall and mean residuals of the recovered velocity.
#[pyfunction]
#[pyo3(signature = (w, mean_coeff = 0.0))]
fn velocity_residual(w: Rows, mean_coeff: f64) -> PyResult<f64> {
    let wf = to_field(&w, Parity::Odd)?;
    let zero = ScalarField::zeros(wf.grid(), Parity::Even);
    let s = State::new(wf.clone(), zero, mean_coeff, 0.0).map_err(value_err)?;
    let u = s.velocity().map_err(value_err)?;
    Ok(divcurl_residual(&u, &wf).map_err(value_err)?.max())
}

/// Uncontrolled run to `t_end` with a fixed step; returns `(w, theta, mean_coeff)`.
#[pyfunction]
#[pyo3(signature = (w, theta, t_end, mean_coeff = 0.0, nu = 0.05, tau = 0.05, dt = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    w: Rows,
    theta: Rows,
    t_end: f64,
    mean_coeff: f64,
    nu: f64,
    tau: f64,
    dt: f64,
) -> PyResult<(Rows, Rows, f64)> {
    let s0 = state(&w, &theta, mean_coeff, 0.0)?;
    let cfg = SolverConfig {
        nu,
        tau,
        buoyancy: true,
        time_step: TimeStep::Fixed(dt),
        source_nodes: 2,
    };
    let end = py
        .detach(|| Solver::new(cfg).and_then(|mut s| s.run(&s0, t_end, &NoForcing, &NoControl)))
        .map_err(value_err)?;
    Ok((to_rows(&end.w), to_rows(&end.theta), end.mean_coeff))
}

/// Read a snapshot; returns `(t, mean_coeff, w, theta)`.
#[pyfunction]
fn read_snapshot(path: &str) -> PyResult<(f64, f64, Rows, Rows)> {
    let s = io::read_snapshot(Path::new(path)).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok((s.t, s.mean_coeff, to_rows(&s.w), to_rows(&s.theta)))
}

#[pyfunction]
#[pyo3(signature = (path, w, theta, mean_coeff = 0.0, t = 0.0))]
fn write_snapshot(path: &str, w: Rows, theta: Rows, mean_coeff: f64, t: f64) -> PyResult<()> {
    let s = state(&w, &theta, mean_coeff, t)?;
    io::write_snapshot(Path::new(path), &s).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Run the command line with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("bqch".to_string()).chain(args).collect();
    py.detach(|| cli_main(argv))
}

#[pymodule]
fn bqch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(grid_points, m)?)?;
    m.add_function(wrap_pyfunction!(velocity, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(read_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(write_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_through_fields() {
        let rows: Rows = (0..8).map(|i| (0..10).map(|j| (i * 10 + j) as f64).collect()).collect();
        let f = to_field(&rows, Parity::Even).unwrap();
        assert_eq!(to_rows(&f), rows);
    }

    #[test]
    fn ragged_or_small_input_is_rejected() {
        let mut rows: Rows = vec![vec![0.0; 8]; 8];
        rows[3].pop();
        assert!(to_field(&rows, Parity::Odd).is_err());
        assert!(to_field(&vec![vec![0.0; 4]; 4], Parity::Odd).is_err());
    }
}
