//! CSV output for trajectories and sweeps. Numbers carry 17 significant
//! digits so they parse back to the same `f64`.

use std::io::{self, Write};

use crate::analysis::SweepResult;
use crate::dde::Trajectory;

/// Writes `t,x_1,y_1,…,x_n,y_n` and every `stride`-th grid node.
/// The final node is always included.
pub fn write_csv<W: Write>(traj: &Trajectory, stride: usize, mut out: W) -> io::Result<()> {
    if stride == 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "stride must be at least 1",
        ));
    }
    let n = traj.n();
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",x_{i},y_{i}"));
    }
    writeln!(out, "{header}")?;
    let last = traj.len().saturating_sub(1);
    for k in (0..traj.len()).filter(|&k| k % stride == 0 || k == last) {
        write!(out, "{:.16e}", traj.times()[k])?;
        for i in 0..n {
            write!(out, ",{:.16e},{:.16e}", traj.x(k, i), traj.y(k, i))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// One row per grid value and neuron: `kappa,neuron,amplitude,mean,min,max,oscillating`.
/// Failed grid points emit NaN statistics.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, n: usize, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "{},neuron,amplitude,mean,min,max,oscillating",
        result.parameter
    )?;
    for p in &result.points {
        for i in 0..n {
            let get = |v: &[f64]| v.get(i).copied().unwrap_or(f64::NAN);
            writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.kappa,
                i + 1,
                get(&p.amplitude),
                get(&p.mean),
                get(&p.min),
                get(&p.max),
                p.oscillating.get(i).copied().unwrap_or(false)
            )?;
        }
    }
    out.flush()
}
