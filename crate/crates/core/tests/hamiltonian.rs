//! Closed-form Hamiltonians against brute-force vertex enumeration of the
//! relative dynamics. The dynamics are affine in every input, so the
//! min-max over boxes is attained at vertices.

use fastrack_core::dynamics::{
    relative_derivative, Disturbance, ModelParams, PlannerControl, RelativeState, SubsystemId, TrackerControl,
};
use fastrack_core::solver::GameModel;
use proptest::prelude::*;

fn rate_dot(id: SubsystemId, x: &[f64], q: &[f64], u: TrackerControl, b: PlannerControl, d: Disturbance) -> f64 {
    let p = ModelParams::default();
    let mut r = RelativeState::default();
    match id {
        SubsystemId::X4 => (r.xr, r.vx, r.theta_x, r.omega_x) = (x[0], x[1], x[2], x[3]),
        SubsystemId::Y4 => (r.yr, r.vy, r.theta_y, r.omega_y) = (x[0], x[1], x[2], x[3]),
        SubsystemId::Z2 => (r.zr, r.vz) = (x[0], x[1]),
    }
    let f = relative_derivative(&r, &u, &b, &d, &p).unwrap();
    let rates: Vec<f64> = match id {
        SubsystemId::X4 => vec![f.xr, f.vx, f.theta_x, f.omega_x],
        SubsystemId::Y4 => vec![f.yr, f.vy, f.theta_y, f.omega_y],
        SubsystemId::Z2 => vec![f.zr, f.vz],
    };
    rates.iter().zip(q).map(|(a, b)| a * b).sum()
}

fn brute(id: SubsystemId, x: &[f64], q: &[f64]) -> f64 {
    let p = ModelParams::default();
    let mut best = f64::INFINITY;
    for a in [-p.a_max, p.a_max] {
        for az in [0.0, p.az_max] {
            let u = TrackerControl { ax: a, ay: a, az };
            let mut worst = f64::NEG_INFINITY;
            for b in [-p.b_max, p.b_max] {
                for d in [-p.d_max, p.d_max] {
                    let up = PlannerControl { bx: b, by: b, bz: b };
                    let w = Disturbance { dx: d, dy: d, dz: d };
                    worst = worst.max(rate_dot(id, x, q, u, up, w));
                }
            }
            best = best.min(worst);
        }
    }
    best
}

fn check(id: SubsystemId, x: &[f64], q: &[f64]) {
    let model = GameModel::Quad {
        id,
        params: ModelParams::default(),
    };
    let h = model.hamiltonian(x, q);
    let b = brute(id, x, q);
    assert!((h - b).abs() <= 1e-9 * (1.0 + b.abs()), "{id:?} x={x:?} q={q:?}: {h} vs {b}");
}

#[test]
fn hover_state_examples() {
    check(SubsystemId::X4, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0]);
    check(SubsystemId::X4, &[0.3, -1.0, 0.1, 0.5], &[0.2, -0.7, 1.3, -0.4]);
    check(SubsystemId::Z2, &[0.0, 0.0], &[0.0, 1.0]);
    check(SubsystemId::Z2, &[0.5, -1.0], &[-1.0, -2.0]);
}

proptest! {
    #[test]
    fn four_state_matches_enumeration(
        x in prop::array::uniform4(-2.0f64..2.0),
        th in -0.35f64..0.35,
        q in prop::array::uniform4(-3.0f64..3.0),
        y in any::<bool>(),
    ) {
        let id = if y { SubsystemId::Y4 } else { SubsystemId::X4 };
        check(id, &[x[0], x[1], th, x[3]], &q);
    }

    #[test]
    fn vertical_matches_enumeration(
        x in prop::array::uniform2(-2.0f64..2.0),
        q in prop::array::uniform2(-3.0f64..3.0),
    ) {
        check(SubsystemId::Z2, &x, &q);
    }
}
