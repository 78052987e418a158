//! CSV output. Every file starts with a `#` provenance line and every number
//! is written with 17 significant digits.

use std::fmt::Write as _;

use epde_core::stability::PointClass;
use epde_core::{RegionField, ThetaGrid, Trajectory};

use crate::config::Settings;
use crate::experiment::{ConvergenceTable, MConvergenceTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# epde <command> version=<v> config=<sha256>`
pub fn provenance(command: &str, settings: &Settings) -> String {
    format!("# epde {command} version={VERSION} config={}\n", settings.digest())
}

pub fn trajectory_csv(head: &str, traj: &Trajectory) -> String {
    let mut out = String::with_capacity(head.len() + 48 * traj.len());
    out.push_str(head);
    out.push_str("t,phi\n");
    for (t, phi) in traj.times.iter().zip(&traj.phi) {
        let _ = writeln!(out, "{},{}", num(*t), num(*phi));
    }
    out
}

/// Long format `t,theta_index,value`; empty body if states were not kept.
pub fn states_csv(head: &str, traj: &Trajectory) -> String {
    let mut out = String::from(head);
    out.push_str("t,theta_index,value\n");
    for (t, state) in traj.times.iter().zip(traj.states.iter().flatten()) {
        for (j, v) in state.iter().enumerate() {
            let _ = writeln!(out, "{},{j},{}", num(*t), num(*v));
        }
    }
    out
}

pub fn convergence_csv(head: &str, table: &ConvergenceTable) -> String {
    let mut out = String::from(head);
    out.push_str("dt,n,error,observed_order\n");
    for row in &table.rows {
        let order = row.observed_order.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{order}", num(row.dt), row.n, num(row.error));
    }
    let _ = writeln!(out, "# reference={} fitted_slope={}", table.reference, num(table.slope));
    out
}

pub fn mconvergence_csv(head: &str, table: &MConvergenceTable) -> String {
    let mut out = String::from(head);
    out.push_str("m,error\n");
    for &(m, e) in &table.rows {
        let _ = writeln!(out, "{m},{}", num(e));
    }
    let _ = writeln!(out, "# reference={} ratio={}", table.reference, num(table.ratio));
    out
}

/// Row-major with `Re σ` varying fastest.
pub fn region_csv(head: &str, field: &RegionField) -> String {
    let spec = field.spec();
    let mut out = String::with_capacity(head.len() + 80 * spec.len());
    out.push_str(head);
    out.push_str("re_sigma,im_sigma,rho,flag\n");
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let rho = field.rho(ix, iy);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                num(spec.x(ix)),
                num(spec.y(iy)),
                num(rho),
                PointClass::of(rho).as_str()
            );
        }
    }
    let _ = writeln!(
        out,
        "# stable={} unstable={} boundary={} undefined={} points={}",
        field.stable_count(),
        field.count(PointClass::Unstable),
        field.count(PointClass::Boundary),
        field.undefined_count(),
        spec.len()
    );
    out
}

pub fn grid_csv(head: &str, grid: &ThetaGrid) -> String {
    let mut out = String::from(head);
    out.push_str("j,theta,weight\n");
    for (j, (t, w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
        let _ = writeln!(out, "{j},{},{}", num(*t), num(*w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn provenance_names_command_and_version() {
        let line = provenance("solve", &Settings::parse("case=I").unwrap());
        assert!(line.starts_with("# epde solve version="));
        assert!(line.ends_with('\n'));
    }
}
