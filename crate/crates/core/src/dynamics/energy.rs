use super::LagrangianSystem;
use crate::bundle::{frame_total_derivative, Jet2Point, JetPoint, ReferenceFrame};
use crate::error::Result;

/// Energy with respect to a frame, `T_Γ = π_i (v^i - Γ^i) - L`.
pub fn energy_function(lag: &LagrangianSystem, frame: &ReferenceFrame, x: &JetPoint) -> Result<f64> {
    let pi = lag.momenta(x)?;
    let gamma = frame.eval(x)?;
    let l = lag.value(x)?;
    Ok(pi
        .iter()
        .zip(x.v.iter().zip(&gamma))
        .map(|(p, (v, g))| p * (v - g))
        .sum::<f64>()
        - l)
}

/// Residual of the energy balance `d_t T_Γ + L_Γ̄ L - (v^i - Γ^i) F_i` at
/// each sample, with `d_t T_Γ` taken analytically along the sample's
/// acceleration and `L_Γ̄ L = (∂_t + Γ^i ∂_i + d_tΓ^i ∂^t_i) L`.
///
/// `force` returns the covector acting on the system at a jet point (an
/// external force, a constraint reaction, or their sum); `None` means no force.
pub fn energy_balance_residual(
    lag: &LagrangianSystem,
    frame: &ReferenceFrame,
    force: Option<&dyn Fn(&JetPoint) -> Result<Vec<f64>>>,
    samples: &[Jet2Point],
) -> Result<Vec<f64>> {
    let m = lag.dim();
    samples
        .iter()
        .map(|w| {
            let x = &w.x;
            let p = lag.partials(x)?;
            let mass = p.mass();
            let gamma = frame.eval(x)?;
            let dgamma = frame_total_derivative(frame, x)?;
            let rel: Vec<f64> = (0..m).map(|i| x.v[i] - gamma[i]).collect();

            // d_t π_i and d_t L along (v, a)
            let dt_pi: Vec<f64> = (0..m)
                .map(|i| {
                    p.dt_momentum(i)
                        + (0..m).map(|j| x.v[j] * p.dq_momentum(i, j)).sum::<f64>()
                        + (0..m).map(|j| w.a[j] * mass[(j, i)]).sum::<f64>()
                })
                .collect();
            let dt_l = p.dt() + (0..m).map(|i| x.v[i] * p.dq(i) + w.a[i] * p.momentum(i)).sum::<f64>();
            let dt_energy = (0..m)
                .map(|i| dt_pi[i] * rel[i] + p.momentum(i) * (w.a[i] - dgamma[i]))
                .sum::<f64>()
                - dt_l;

            let lie = p.dt()
                + (0..m)
                    .map(|i| gamma[i] * p.dq(i) + dgamma[i] * p.momentum(i))
                    .sum::<f64>();

            let power = match force {
                Some(f) => {
                    let f = f(x)?;
                    (0..m).map(|i| rel[i] * f[i]).sum::<f64>()
                }
                None => 0.0,
            };
            Ok(dt_energy + lie - power)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bundle::ConfigurationSpace;
    use crate::dynamics::{lagrange_dynamic_equation, DynamicEquation};

    fn lag(m: usize, text: &str) -> LagrangianSystem {
        LagrangianSystem::parse(ConfigurationSpace::new(m).unwrap(), text).unwrap()
    }

    #[test]
    fn energy_examples() {
        let free = lag(1, "0.5*v1^2");
        let rest = ReferenceFrame::rest(&free.space);
        let x = JetPoint::new(0.0, vec![0.0], vec![2.0]);
        assert_eq!(energy_function(&free, &rest, &x).unwrap(), 2.0);

        let osc = lag(1, "0.5*v1^2 - 0.5*q1^2");
        let x = JetPoint::new(0.0, vec![1.0], vec![1.0]);
        assert_eq!(energy_function(&osc, &rest, &x).unwrap(), 1.0);

        // v = Γ gives T = -L(t, q, Γ)
        let l = lag(1, "0.5*v1^2*(1 + q1^2) - t*q1");
        let frame = ReferenceFrame::parse(&l.space, &["t + q1"]).unwrap();
        let x = JetPoint::new(0.5, vec![1.5], vec![2.0]);
        let e = energy_function(&l, &frame, &x).unwrap();
        assert!((e + l.value(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn balance_vanishes_on_shell() {
        let osc = Arc::new(lag(1, "0.5*v1^2 - 0.5*q1^2"));
        let rest = ReferenceFrame::rest(&osc.space);
        let xi = lagrange_dynamic_equation(&osc);
        let samples: Vec<Jet2Point> = (0..20)
            .map(|k| {
                let t = 0.1 * k as f64;
                let x = JetPoint::new(t, vec![t.cos()], vec![-t.sin()]);
                let a = xi.eval(&x).unwrap();
                Jet2Point { x, a }
            })
            .collect();
        let r = energy_balance_residual(&osc, &rest, None, &samples).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-10));

        let free = lag(1, "0.5*v1^2");
        let w = Jet2Point {
            x: JetPoint::new(0.0, vec![1.0], vec![3.0]),
            a: vec![0.0],
        };
        assert_eq!(energy_balance_residual(&free, &rest, None, &[w]).unwrap(), vec![0.0]);
    }

    #[test]
    fn balance_with_moving_frame_and_force() {
        // time-dependent Lagrangian, moving frame and velocity-dependent force
        let l = Arc::new(lag(1, "0.5*(1 + q1^2)*v1^2 - t*q1"));
        let frame = ReferenceFrame::parse(&l.space, &["sin(t)*q1"]).unwrap();
        let s = l.space.clone();
        let force_expr = s.parse("-0.3*v1 + q1").unwrap();
        let force = move |x: &JetPoint| -> Result<Vec<f64>> { Ok(vec![crate::expr::eval(&force_expr, &x.values())?]) };
        let xi = lagrange_dynamic_equation(&l);
        let x = JetPoint::new(0.7, vec![0.4], vec![-1.2]);
        // on shell with force: a = ξ_L + m^{-1} F
        let m = 1.0 + 0.4f64.powi(2);
        let a = xi.eval(&x).unwrap()[0] + force(&x).unwrap()[0] / m;
        let r = energy_balance_residual(
            &l,
            &frame,
            Some(&force),
            &[Jet2Point {
                x: x.clone(),
                a: vec![a],
            }],
        )
        .unwrap();
        assert!(r[0].abs() <= 1e-12, "{r:?}");
        // off shell the residual equals -(E + F) q̇_Γ
        let off = energy_balance_residual(&l, &frame, Some(&force), &[Jet2Point { x, a: vec![a + 1.0] }]).unwrap();
        assert!(off[0].abs() > 1e-3);
    }
}
