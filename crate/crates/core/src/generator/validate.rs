//! Grid-based check of the sufficient conditions for an `E`-valued solution,
//! with `E = {z in box : p(z) <= 0 for every boundary polynomial p}`:
//!
//! 1. `a(z)` is positive semidefinite on `E`;
//! 2. `a ∇p = 0` on `{p = 0}`;
//! 3. the drift points strictly inward on `{p = 0}`, i.e. `𝐆p < 0` there.

use nalgebra::SymmetricEigen;

use super::diffusion::DiffusionSpec;
use super::matrix::apply_generator;
use crate::poly::{CompiledPoly, Polynomial};

const TANGENCY_TOL: f64 = 1e-9;
const INWARD_MARGIN: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;
const MAX_WITNESSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    PositiveSemidefinite,
    Tangency,
    InwardDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    /// Index of the boundary polynomial involved, if any.
    pub boundary: Option<usize>,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Witnesses, at most a handful per condition.
    pub violations: Vec<Violation>,
    /// Total number of violating points found, including those not kept.
    pub violation_count: usize,
    pub interior_points: usize,
    pub boundary_points: usize,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    pub fn violated(&self, c: Condition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }

    fn record(&mut self, v: Violation) {
        self.violation_count += 1;
        let kept = self.violations.iter().filter(|w| w.condition == v.condition).count();
        if kept < MAX_WITNESSES {
            self.violations.push(v);
        }
    }
}

fn axis_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

// Cartesian product of per-axis grids, calling `f` on every point.
fn for_each_point(axes: &[Vec<f64>], f: &mut dyn FnMut(&[f64])) {
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut z: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&z);
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                z[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            z[k] = axes[k][0];
            k += 1;
        }
    }
}

pub fn validate_state_space(spec: &DiffusionSpec) -> ValidationReport {
    validate_state_space_with(spec, 20_000)
}

/// As [`validate_state_space`] with roughly `budget` grid points over the box.
pub fn validate_state_space_with(spec: &DiffusionSpec, budget: usize) -> ValidationReport {
    let d = spec.dim();
    let bx = spec.state_box();
    let per_dim = ((budget as f64).powf(1.0 / d as f64).floor() as usize).clamp(5, 4001);
    let axes: Vec<Vec<f64>> = (0..d).map(|i| axis_grid(bx.lo[i], bx.hi[i], per_dim)).collect();
    let boundary: Vec<CompiledPoly> = spec.boundary().iter().map(CompiledPoly::new).collect();
    let in_e = |z: &[f64], skip: Option<usize>| {
        boundary.iter().enumerate().all(|(k, p)| Some(k) == skip || p.eval(z) <= 1e-10)
    };
    let mut report = ValidationReport::default();

    let m = spec.dim_x();
    for_each_point(&axes, &mut |z| {
        if !in_e(z, None) {
            return;
        }
        report.interior_points += 1;
        let a = spec.a_at(z);
        let ax = a.view((0, 0), (m, m)).into_owned();
        let min_eig = if m == 1 { ax[(0, 0)] } else { SymmetricEigen::new(ax).eigenvalues.min() };
        if min_eig < -PSD_TOL {
            report.record(Violation {
                condition: Condition::PositiveSemidefinite,
                boundary: None,
                point: z.to_vec(),
                value: min_eig,
            });
        }
    });

    if spec.boundary().is_empty() {
        report.notes.push("no boundary polynomials: only positive semidefiniteness was checked".into());
        return report;
    }

    for (k, p) in spec.boundary().iter().enumerate() {
        let grad: Vec<Polynomial> = p.gradient();
        let gen_p = CompiledPoly::new(&apply_generator(spec, p));
        let pc = &boundary[k];
        let check = |z: &[f64], report: &mut ValidationReport| {
            if !in_e(z, Some(k)) {
                return;
            }
            report.boundary_points += 1;
            let a = spec.a_at(z);
            let g: Vec<f64> = grad.iter().map(|gi| gi.value_at(z)).collect();
            let tangency = (0..d)
                .map(|i| (0..d).map(|j| a[(i, j)] * g[j]).sum::<f64>().abs())
                .fold(0.0, f64::max);
            if tangency > TANGENCY_TOL {
                report.record(Violation {
                    condition: Condition::Tangency,
                    boundary: Some(k),
                    point: z.to_vec(),
                    value: tangency,
                });
            }
            let gp = gen_p.eval(z);
            if -gp <= INWARD_MARGIN {
                report.record(Violation { condition: Condition::InwardDrift, boundary: Some(k), point: z.to_vec(), value: gp });
            }
        };
        // Zero set of p located along grid lines parallel to each axis.
        for axis in 0..d {
            let mut others = axes.clone();
            others[axis] = vec![bx.lo[axis]];
            let line = &axes[axis];
            for_each_point(&others, &mut |base| {
                let mut z = base.to_vec();
                let mut prev: Option<(f64, f64)> = None;
                for &t in line {
                    z[axis] = t;
                    let v = pc.eval(&z);
                    if v == 0.0 {
                        check(&z, &mut report);
                    } else if let Some((tp, vp)) = prev {
                        if vp != 0.0 && vp.signum() != v.signum() {
                            let root = bisect(|s| {
                                let mut w = z.clone();
                                w[axis] = s;
                                pc.eval(&w)
                            }, tp, t, vp);
                            let mut w = z.clone();
                            w[axis] = root;
                            check(&w, &mut report);
                        }
                    }
                    prev = Some((t, v));
                }
            });
        }
    }
    if report.boundary_points == 0 {
        report.notes.push("no boundary points found on the sampling grid".into());
    }
    report
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::diffusion::StateBox;

    fn jacobi(psi: f64, bbar: f64, sig2: f64) -> DiffusionSpec {
        let drift = vec![Polynomial::parse(&format!("{:?} + {:?} * x1", psi * bbar, -psi), 1).unwrap()];
        let a = vec![vec![Polynomial::parse(&format!("{sig2:?} + {:?} * x1^2", -sig2), 1).unwrap()]];
        DiffusionSpec::new(
            1,
            0,
            drift,
            a,
            StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
            vec![Polynomial::parse("x1^2 - 1", 1).unwrap()],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn calibrated_jacobi_passes() {
        let r = validate_state_space(&jacobi(14.98581, -0.79506, 1.56998));
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.boundary_points >= 2);
    }

    #[test]
    fn mean_reversion_outside_box_fails_inward_condition() {
        let r = validate_state_space(&jacobi(1.0, 2.0, 1.0));
        assert!(r.violated(Condition::InwardDrift));
        assert!(!r.violated(Condition::Tangency));
        let w = r.violations.iter().find(|v| v.condition == Condition::InwardDrift).unwrap();
        assert!((w.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_inward_flow_passes() {
        let spec = DiffusionSpec::new(
            1,
            0,
            vec![Polynomial::parse("0.5 - x1", 1).unwrap()],
            vec![vec![Polynomial::zero(1)]],
            StateBox::new(vec![0.0], vec![1.0]).unwrap(),
            vec![Polynomial::parse("x1^2 - x1", 1).unwrap()],
            vec![0.5],
        )
        .unwrap();
        assert!(validate_state_space(&spec).passed());
    }

    #[test]
    fn non_tangent_noise_is_reported() {
        // constant diffusion does not vanish on the boundary of [-1, 1]
        let spec = DiffusionSpec::new(
            1,
            0,
            vec![Polynomial::parse("-x1", 1).unwrap()],
            vec![vec![Polynomial::constant(1, 0.1)]],
            StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
            vec![Polynomial::parse("x1^2 - 1", 1).unwrap()],
            vec![0.0],
        )
        .unwrap();
        assert!(validate_state_space(&spec).violated(Condition::Tangency));
    }

    #[test]
    fn negative_diffusion_is_reported() {
        let spec = DiffusionSpec::new(
            1,
            0,
            vec![Polynomial::zero(1)],
            vec![vec![Polynomial::parse("x1", 1).unwrap()]],
            StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
            vec![],
            vec![0.0],
        )
        .unwrap();
        let r = validate_state_space(&spec);
        assert!(r.violated(Condition::PositiveSemidefinite));
        assert!(!r.notes.is_empty());
    }
}
