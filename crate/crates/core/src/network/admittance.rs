use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Branch, NetworkModel};

/// A three-phase fault on a branch at `fraction` of its length from the
/// from-bus, represented by a shunt `admittance` at the split point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFault {
    pub branch: usize,
    pub fraction: f64,
    pub admittance: Complex64,
}

/// Topology changes applied on top of the immutable base model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologyOverrides {
    /// Branch indices forced out of service.
    pub out_of_service: BTreeSet<usize>,
    /// Extra shunt admittances (bus index, per-unit).
    pub shunts: Vec<(usize, Complex64)>,
    /// Faulted branches, stamped as their split-and-reduced equivalent.
    pub faults: Vec<BranchFault>,
}

/// Two-port admittance parameters `[[yff, yft], [ytf, ytt]]` of a branch
/// with an ideal off-nominal transformer on the from side.
pub fn branch_admittance(br: &Branch) -> [[Complex64; 2]; 2] {
    pi_section(Complex64::new(br.r, br.x), br.b_shunt, br.tap)
}

fn pi_section(z: Complex64, b_total: f64, tap: f64) -> [[Complex64; 2]; 2] {
    let ys = z.inv();
    let ytt = ys + Complex64::new(0.0, b_total / 2.0);
    let yff = ytt / (tap * tap);
    let yft = -ys / tap;
    [[yff, yft], [yft, ytt]]
}

/// Equivalent two-port of a branch split at `fraction` with a shunt at the
/// split node, after eliminating that node.
fn faulted_branch_admittance(br: &Branch, fault: &BranchFault) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(br.r, br.x);
    let f = fault.fraction;
    let a = pi_section(z * f, br.b_shunt * f, br.tap);
    let b = pi_section(z * (1.0 - f), br.b_shunt * (1.0 - f), 1.0);
    // Nodes: from (0), split (1), to (2).
    let mut y = [[Complex64::new(0.0, 0.0); 3]; 3];
    y[0][0] = a[0][0];
    y[0][1] = a[0][1];
    y[1][0] = a[1][0];
    y[1][1] = a[1][1] + b[0][0] + fault.admittance;
    y[1][2] = b[0][1];
    y[2][1] = b[1][0];
    y[2][2] = b[1][1];
    let pivot = y[1][1];
    let keep = [0usize, 2];
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, &i) in keep.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            out[r][c] = y[i][j] - y[i][1] * y[1][j] / pivot;
        }
    }
    out
}

/// Builds the bus admittance matrix in per-unit, ordered as `model.buses`.
///
/// Parallel branches are summed. Bus shunts come from the model; extra
/// shunts and faulted branches come from `overrides`.
pub fn build_admittance(model: &NetworkModel, overrides: &TopologyOverrides) -> DMatrix<Complex64> {
    let n = model.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut stamp = |i: usize, j: usize, p: [[Complex64; 2]; 2]| {
        y[(i, i)] += p[0][0];
        y[(i, j)] += p[0][1];
        y[(j, i)] += p[1][0];
        y[(j, j)] += p[1][1];
    };
    for (k, br) in model.branches.iter().enumerate() {
        if !br.in_service || overrides.out_of_service.contains(&k) {
            continue;
        }
        let i = model.bus_index(br.from_bus).expect("validated");
        let j = model.bus_index(br.to_bus).expect("validated");
        match overrides.faults.iter().find(|f| f.branch == k) {
            Some(fault) => stamp(i, j, faulted_branch_admittance(br, fault)),
            None => stamp(i, j, branch_admittance(br)),
        }
    }
    for (i, bus) in model.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.shunt_g, bus.shunt_b) / model.base_mva;
    }
    for &(i, s) in &overrides.shunts {
        y[(i, i)] += s;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::network::bundled;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_branch_two_bus() {
        let mut m = two_bus(0.5, 0.0);
        m.loads.clear();
        let y = build_admittance(&m, &TopologyOverrides::default());
        let expect = [[c(0.0, -2.0), c(0.0, 2.0)], [c(0.0, 2.0), c(0.0, -2.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((y[(i, j)] - expect[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn removing_only_branch_still_builds() {
        let m = two_bus(0.5, 0.0);
        let ov = TopologyOverrides {
            out_of_service: BTreeSet::from([0]),
            ..Default::default()
        };
        let y = build_admittance(&m, &ov);
        assert!(y.iter().all(|v| v.norm() == 0.0));
        assert!(!m.is_connected_without(&ov.out_of_service));
    }

    #[test]
    fn ieee118_branch_part_row_sums_vanish() {
        let mut m = bundled("ieee118.json").unwrap();
        for b in &mut m.buses {
            b.shunt_g = 0.0;
            b.shunt_b = 0.0;
        }
        for br in &mut m.branches {
            br.b_shunt = 0.0;
        }
        let y = build_admittance(&m, &TopologyOverrides::default());
        let mut checked = 0;
        for i in 0..m.n_buses() {
            let id = m.buses[i].id;
            let touches_tap = m
                .branches
                .iter()
                .any(|br| br.tap != 1.0 && (br.from_bus == id || br.to_bus == id));
            if touches_tap {
                continue;
            }
            let s: Complex64 = y.row(i).iter().sum();
            assert!(s.norm() < 1e-10, "bus {id}: row sum {s}");
            checked += 1;
        }
        assert!(checked > 90);
    }

    #[test]
    fn symmetric_when_taps_are_unity() {
        let m = ring4();
        let y = build_admittance(&m, &TopologyOverrides::default());
        assert!((&y - y.transpose()).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn split_fault_with_zero_admittance_equals_intact_branch() {
        let m = ring4();
        let ov = TopologyOverrides {
            faults: vec![BranchFault {
                branch: 1,
                fraction: 0.1,
                admittance: c(0.0, 0.0),
            }],
            ..Default::default()
        };
        let a = build_admittance(&m, &TopologyOverrides::default());
        let b = build_admittance(&m, &ov);
        assert!((&a - &b).iter().all(|v| v.norm() < 1e-9));
    }
}
