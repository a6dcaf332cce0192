//! Fixed-step explicit integration and Newton equilibrium refinement.

use super::model::derivatives;
use super::{ContinuousInput, Disturbance, IntegerInput, PlantError, PlantParams, PlantState, NX};
use nalgebra::{DMatrix, DVector};

/// One classical 4th-order Runge-Kutta step of a generic vector field.
pub fn rk4_step<F>(mut f: F, x: &[f64], h: f64, out: &mut [f64])
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Advances the plant by `dt` seconds under frozen inputs, using RK4 substeps
/// no longer than `params.truth_dt`.
pub fn step(
    x: &PlantState,
    u: &ContinuousInput,
    z: &IntegerInput,
    w: &Disturbance,
    dt: f64,
    p: &PlantParams,
) -> Result<PlantState, PlantError> {
    if !(dt > 0.0) || dt > p.max_step + 1e-9 {
        return Err(PlantError::Params(format!(
            "step length {dt} outside (0, {}]",
            p.max_step
        )));
    }
    let n_sub = (dt / p.truth_dt).ceil().max(1.0) as usize;
    let h = dt / n_sub as f64;

    let mut cur = *x;
    let mut next = [0.0; NX];
    for _ in 0..n_sub {
        let mut failure = None;
        rk4_step(
            |xs, out| {
                let state = PlantState(std::array::from_fn(|i| xs[i]));
                match derivatives(&state, u, z, w, p) {
                    Ok(dx) => out.copy_from_slice(&dx),
                    Err(e) => {
                        failure.get_or_insert(e);
                        out.fill(0.0);
                    }
                }
            },
            &cur.0,
            h,
            &mut next,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        cur = PlantState(next);
        cur.validate(p)?;
    }
    Ok(cur)
}

/// Refines an equilibrium of the vector field at fixed `(u, z, w)` by damped
/// Newton iteration with a finite-difference Jacobian.
pub fn equilibrium(
    guess: &PlantState,
    u: &ContinuousInput,
    z: &IntegerInput,
    w: &Disturbance,
    p: &PlantParams,
    tol: f64,
) -> Result<PlantState, PlantError> {
    let eval = |x: &PlantState| derivatives(x, u, z, w, p);
    let mut x = *guess;
    let mut fx = eval(&x)?;
    let norm = |v: &[f64; NX]| v.iter().fold(0.0f64, |m, &a| m.max(a.abs()));

    for _ in 0..60 {
        if norm(&fx) <= tol {
            return Ok(x);
        }
        // Central-difference Jacobian.
        let mut jac = DMatrix::<f64>::zeros(NX, NX);
        for j in 0..NX {
            let h = 1e-6 * x.0[j].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp.0[j] += h;
            xm.0[j] -= h;
            let fp = eval(&xp)?;
            let fm = eval(&xm)?;
            for i in 0..NX {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(NX, fx.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or(PlantError::EquilibriumNotFound { residual: norm(&fx) })?;

        // Backtracking damping on the residual norm.
        let mut alpha = 1.0;
        let base = norm(&fx);
        loop {
            let mut xn = x;
            for i in 0..NX {
                xn.0[i] += alpha * delta[i];
            }
            match eval(&xn) {
                Ok(fn_) if norm(&fn_) < base || alpha < 1e-4 => {
                    x = xn;
                    fx = fn_;
                    break;
                }
                _ => alpha *= 0.5,
            }
            if alpha < 1e-8 {
                return Err(PlantError::EquilibriumNotFound { residual: base });
            }
        }
    }
    let res = norm(&fx);
    if res <= tol {
        Ok(x)
    } else {
        Err(PlantError::EquilibriumNotFound { residual: res })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_matches_exponential_decay() {
        // dx/dτ = -x, one step of 0.1 from 1.0: lands on e^-0.1 ≈ 0.904837.
        let mut out = [0.0];
        rk4_step(|x, d| d[0] = -x[0], &[1.0], 0.1, &mut out);
        assert!((out[0] - (-0.1f64).exp()).abs() < 1e-7, "{}", out[0]);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // Global error on dx/dτ = -x over [0, 1] should shrink ~16x per halving.
        let run = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut x = [1.0];
            let mut out = [0.0];
            for _ in 0..n {
                rk4_step(|x, d| d[0] = -x[0], &x, h, &mut out);
                x = out;
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio = {ratio}");
    }

    #[test]
    fn reference_equilibrium_is_fixed_point_of_step() {
        let p = PlantParams::default();
        let u = ContinuousInput(p.nominal_u);
        let z = IntegerInput::ALL_ON;
        let w = Disturbance(p.nominal_w);
        let xe = equilibrium(&PlantState(p.nominal_state()), &u, &z, &w, &p, 1e-10).unwrap();
        let x1 = step(&xe, &u, &z, &w, 5.0, &p).unwrap();
        let drift = xe
            .0
            .iter()
            .zip(x1.0.iter())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(drift <= 1e-9, "drift = {drift}");
    }

    #[test]
    fn perturbation_decays_toward_equilibrium() {
        let p = PlantParams::default();
        let u = ContinuousInput(p.nominal_u);
        let z = IntegerInput::ALL_ON;
        let w = Disturbance(p.nominal_w);
        let xe = equilibrium(&PlantState(p.nominal_state()), &u, &z, &w, &p, 1e-10).unwrap();
        let mut x = xe;
        x.0[0] += 20.0; // fuel-cell current kick
        x.0[14] += 0.5; // chilled water kick
        let dist0: f64 = (x.0[0] - xe.0[0]).abs() + (x.0[14] - xe.0[14]).abs();
        for _ in 0..60 {
            x = step(&x, &u, &z, &w, 5.0, &p).unwrap();
        }
        let dist1: f64 = (x.0[0] - xe.0[0]).abs() + (x.0[14] - xe.0[14]).abs();
        assert!(dist1 < 0.05 * dist0, "dist0 = {dist0}, dist1 = {dist1}");
    }

    #[test]
    fn envelope_violation_reports_divergence() {
        let p = PlantParams::default();
        let u = ContinuousInput(p.nominal_u);
        let z = IntegerInput::ALL_ON;
        let w = Disturbance(p.nominal_w);
        let mut x = PlantState(p.nominal_state());
        x.0[16] = 1.5; // SOC outside [0, 1]
        let err = x.validate(&p).unwrap_err();
        assert!(matches!(err, PlantError::IntegrationDiverged { index: 16, .. }));
        let _ = (u, z, w);
    }
}
