use std::sync::Arc;

use jetflow::bundle::{ConfigurationSpace, JetPoint};
use jetflow::constraint::{
    admissibility_report, Codistribution, CompositeConstraintSpec, ConstraintOneForm, LinearConstraintSpec,
};
use jetflow::dynamics::{LagrangianSystem, NewtonianSystem};
use jetflow::expr::{ast_ops, Ast};
use jetflow::projection::{composite_decomposition, constrain, CompositeSplitting, ConstrainedDynamics, KktOracle};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn point(rng: &mut SplitMix64, m: usize) -> JetPoint {
    JetPoint::new(
        rng.random_range(0.0..1.0),
        (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

fn lagrangian_system(m: usize, text: &str) -> NewtonianSystem {
    let space = ConfigurationSpace::new(m).unwrap();
    let lag = Arc::new(LagrangianSystem::parse(space, text).unwrap());
    NewtonianSystem::from_lagrangian(&lag, &[]).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn composite_forms_annihilate_prolonged_connection() {
    // v2 = t q1 + v1 cos(q2); along any curve obeying it,
    // a2 = q1 + t v1 + a1 cos(q2) - v1 sin(q2) v2.
    let space = ConfigurationSpace::new(2).unwrap();
    let spec = CompositeConstraintSpec {
        base: vec![0],
        fiber: vec![1],
        b: space.parse_all(&["t*q1"]).unwrap(),
        br: vec![space.parse_all(&["cos(q2)"]).unwrap()],
    };
    let cod = Codistribution::from_composite(&space, spec).unwrap();
    let mut rng = SplitMix64::seed_from_u64(7);
    for _ in 0..100 {
        let (t, q1, q2, v1, a1): (f64, f64, f64, f64, f64) = (
            rng.random_range(0.0..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-5.0..5.0),
        );
        let v2 = t * q1 + v1 * q2.cos();
        let a2 = q1 + t * v1 + a1 * q2.cos() - v1 * q2.sin() * v2;
        let x = JetPoint::new(t, vec![q1, q2], vec![v1, v2]);
        assert!(cod.function_residuals(&x).unwrap().unwrap()[0] < 1e-15);
        let s = cod.eval(&x).unwrap().contract(&x.v, &[a1, a2]);
        assert!(s[0].abs() < 1e-13, "{s}");
    }
}

#[test]
fn composite_splitting_moves_only_fiber_accelerations() {
    let sys = lagrangian_system(3, "0.5*(v1^2 + 2*v2^2 + v3^2) - q1*q3");
    let space = sys.space.clone();
    let spec = CompositeConstraintSpec {
        base: vec![0, 2],
        fiber: vec![1],
        b: space.parse_all(&["sin(t)"]).unwrap(),
        br: vec![space.parse_all(&["q2", "1"]).unwrap()],
    };
    let cod = Arc::new(Codistribution::from_composite(&space, spec.clone()).unwrap());
    let cd = ConstrainedDynamics::with_decomposer(sys.clone(), Arc::clone(&cod), Arc::new(CompositeSplitting)).unwrap();
    let mut rng = SplitMix64::seed_from_u64(11);
    for _ in 0..50 {
        let x = point(&mut rng, 3);
        let d = cd.decompose(&x).unwrap();
        assert_eq!((d.reaction[0], d.reaction[2]), (0.0, 0.0));
        assert!(cd.compatibility_residual(&x, &d).unwrap() < 1e-12);
        let (xt, r) = composite_decomposition(&space, sys.xi.as_ref(), &spec, &x).unwrap();
        assert!(max_diff(&xt, &d.xi_tilde) < 1e-15 && max_diff(&r, &d.reaction) < 1e-15);
    }
}

#[test]
fn linear_and_submanifold_forms_agree() {
    let sys = lagrangian_system(3, "0.5*((1 + q2^2)*v1^2 + v2^2 + 0.5*v3^2) + 0.1*v1*v3 - cos(q1)");
    let space = sys.space.clone();
    let f0 = ["t*q1", "0"];
    let fi = [vec!["1", "q3", "0"], vec!["0", "sin(q1)", "2"]];
    let spec = LinearConstraintSpec::parse(&space, &f0, &fi).unwrap();
    let sub = space.parse_all(&["t*q1 + v1 + q3*v2", "sin(q1)*v2 + 2*v3"]).unwrap();
    let mut rng = SplitMix64::seed_from_u64(3);
    let probes: Vec<JetPoint> = (0..8).map(|_| point(&mut rng, 3)).collect();
    let lin = constrain(
        sys.clone(),
        Arc::new(Codistribution::from_linear(&space, spec, &probes).unwrap()),
    )
    .unwrap();
    let man = constrain(
        sys,
        Arc::new(Codistribution::from_submanifold(&space, sub, &probes).unwrap()),
    )
    .unwrap();
    for _ in 0..100 {
        let x = point(&mut rng, 3);
        let a = lin.decompose(&x).unwrap();
        let b = man.decompose(&x).unwrap();
        assert!(max_diff(&a.xi_tilde, &b.xi_tilde) <= 1e-12);
        assert!(max_diff(&a.force, &b.force) <= 1e-12);
        let (fa, fb) = (
            lin.cod.function_residuals(&x).unwrap(),
            man.cod.function_residuals(&x).unwrap(),
        );
        assert!(max_diff(&fa.unwrap(), &fb.unwrap()) <= 1e-14);
    }
}

/// `Σ_b A_ab s^b` as expression forms.
fn recombine(forms: &[ConstraintOneForm], a: &[[f64; 2]; 2]) -> Vec<ConstraintOneForm> {
    let mix = |pick: &dyn Fn(&ConstraintOneForm) -> Ast, row: &[f64; 2]| {
        ast_ops::add(
            ast_ops::mul(Ast::Const(row[0]), pick(&forms[0])),
            ast_ops::mul(Ast::Const(row[1]), pick(&forms[1])),
        )
    };
    let m = forms[0].si.len();
    a.iter()
        .map(|row| ConstraintOneForm {
            s0: mix(&|f| f.s0.clone(), row),
            si: (0..m).map(|i| mix(&|f| f.si[i].clone(), row)).collect(),
            sdoti: (0..m).map(|i| mix(&|f| f.sdoti[i].clone(), row)).collect(),
        })
        .collect()
}

#[test]
fn recombined_forms_give_the_same_split_and_rank() {
    let sys = lagrangian_system(3, "0.5*(v1^2 + v2^2 + v3^2) + q1*v2 - q3^2");
    let space = sys.space.clone();
    let f = space.parse_all(&["v1^2 + v2^2 - 1 + q3", "v3 - q1*v1"]).unwrap();
    let base = Codistribution::from_submanifold(&space, f, &[]).unwrap();
    let mixed = Codistribution::from_forms(&space, recombine(base.forms(), &[[2.0, -1.0], [0.5, 3.0]])).unwrap();
    let a = constrain(sys.clone(), Arc::new(base)).unwrap();
    let b = constrain(sys, Arc::new(mixed)).unwrap();
    let mut rng = SplitMix64::seed_from_u64(5);
    for _ in 0..100 {
        let x = point(&mut rng, 3);
        assert_eq!(
            admissibility_report(&a.cod, &x).unwrap().rank,
            admissibility_report(&b.cod, &x).unwrap().rank
        );
        let (da, db) = (a.decompose(&x).unwrap(), b.decompose(&x).unwrap());
        assert!(
            max_diff(&da.xi_tilde, &db.xi_tilde) <= 1e-10,
            "{:?} {:?}",
            da.xi_tilde,
            db.xi_tilde
        );
        assert!(max_diff(&da.force, &db.force) <= 1e-10);
    }
}

#[test]
fn singular_recombination_loses_rank() {
    let space = ConfigurationSpace::new(2).unwrap();
    let f = space.parse_all(&["v1", "v2 + q1"]).unwrap();
    let base = Codistribution::from_submanifold(&space, f, &[]).unwrap();
    let mixed = Codistribution::from_forms(&space, recombine(base.forms(), &[[1.0, 2.0], [2.0, 4.0]])).unwrap();
    let x = JetPoint::new(0.0, vec![0.1, 0.2], vec![0.3, 0.4]);
    let r = admissibility_report(&mixed, &x).unwrap();
    assert_eq!((r.rank, r.expected), (1, 2));
}

#[test]
fn metric_and_kkt_agree_across_random_systems() {
    let mut rng = SplitMix64::seed_from_u64(2024);
    for case in 0..30 {
        let (c1, c2, c3, d): (f64, f64, f64, f64) = (
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-0.3..0.3),
        );
        let l =
            format!("0.5*({c1}*v1^2 + {c2}*(1 + {c3}*q1^2)*v2^2 + v3^2) + {d}*v1*v2 + 0.1*v1^4 - q2*q3 + sin(q1)*v3");
        let sys = lagrangian_system(3, &l);
        let space = sys.space.clone();
        let cod = Codistribution::from_submanifold(
            &space,
            space.parse_all(&["v1^2 + v2^2 + v3^2 - 1", "v3 - q2*v1 + t"]).unwrap(),
            &[],
        )
        .unwrap();
        let metric = constrain(sys.clone(), Arc::new(cod)).unwrap();
        let kkt = ConstrainedDynamics::with_decomposer(sys, Arc::clone(&metric.cod), Arc::new(KktOracle)).unwrap();
        for _ in 0..10 {
            let x = point(&mut rng, 3);
            if !admissibility_report(&metric.cod, &x).unwrap().passed() {
                continue;
            }
            let a = metric.decompose(&x).unwrap();
            let b = kkt.decompose(&x).unwrap();
            assert!(max_diff(&a.xi_tilde, &b.xi_tilde) <= 1e-9, "case {case}");
            assert!(max_diff(&a.multipliers, &b.multipliers) <= 1e-8, "case {case}");
            assert!(metric.compatibility_residual(&x, &a).unwrap() <= 1e-10);
            assert!(metric.orthogonality_residual(&x, &a).unwrap() <= 1e-10);
        }
    }
}
