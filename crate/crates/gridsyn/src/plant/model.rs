//! Unit models, the water network, the 23-state vector field, and outputs.

use super::params::{C_W, G_E};
use super::{ContinuousInput, Disturbance, IntegerInput, Output, PlantError, PlantParams, PlantState, NX};

/// Algebraic quantities of the chilled-water loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkFlows {
    /// Final supply water temperature to the building, °C.
    pub t_sl: f64,
    /// Return water temperature on the chillers side, °C.
    pub t_rec: f64,
    /// Supply water temperature leaving the chillers, °C.
    pub t_slc: f64,
    /// Water temperature in the pipe to the cold tank, °C.
    pub t_cp: f64,
    /// Water temperature in the pipe to the hot tank, °C.
    pub t_hp: f64,
    /// Supply water mass flow to the building, kg/s.
    pub g_sl: f64,
    /// Signed storage flow, kg/s (positive discharging).
    pub g_st: f64,
    /// Total circulated flow through the pump, kg/s.
    pub g_all: f64,
    /// Pump electrical power, kW.
    pub p_pmp: f64,
    /// Cooling power delivered to the building, kW.
    pub q_sl: f64,
}

/// Per-unit electrical and cooling powers, kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPowers {
    pub p_pv: f64,
    pub p_fc: f64,
    pub p_mt: f64,
    pub p_ba: f64,
    pub p_cp: f64,
    pub p_pmp: f64,
    pub q_ab: f64,
    pub q_ec: f64,
    pub q_st: f64,
    pub q_sl: f64,
    pub t_ab: f64,
    pub t_ec: f64,
}

/// Photovoltaic power under given ambient conditions, kW.
///
/// Maximum-power-point operation is folded into a temperature-dependent
/// efficiency; output is clamped at zero for extreme cell temperatures.
pub fn pv_power(w: &Disturbance, p: &PlantParams) -> f64 {
    let eta = (p.pv_eta_ref * (1.0 - p.pv_gamma_t * (w.t_a() - p.pv_t_ref))).max(0.0);
    eta * w.s_ra().max(0.0) * p.pv_area_eff / 1000.0
}

/// Supply chilled-water temperature of the microturbine's absorption chiller.
fn t_ab(x: &PlantState, p: &PlantParams) -> f64 {
    p.ab_t_nom + x.0[6] + x.0[7] + x.0[8]
}

/// Chilled-water temperature leaving the electric chiller. The mean evaporator
/// water temperature is the average of inlet (t_rec) and outlet.
fn t_ec(x: &PlantState, t_rec: f64) -> f64 {
    2.0 * x.0[14] - t_rec
}

/// Mixing and balance of the supply/return water network plus pump power.
///
/// Errors with [`PlantError::DegenerateFlow`] when no chiller stream flows but
/// water is still being pushed around the loop.
pub fn water_network(
    u: &ContinuousInput,
    z: &IntegerInput,
    x: &PlantState,
    p: &PlantParams,
) -> Result<NetworkFlows, PlantError> {
    let g_ab = u.0[2];
    let g_ec = u.0[4];
    let g_stu = u.0[5];
    let z_st = z.get(3);

    let g_chill = g_ab + g_ec;
    let g_st = (2.0 * z_st - 1.0) * g_stu;
    let g_sl = g_chill + g_st;
    let g_all = g_ab + g_ec + g_stu;

    if g_chill <= 1e-12 {
        if g_stu > 1e-12 || g_sl < -1e-12 {
            return Err(PlantError::DegenerateFlow { chiller_flow: g_chill });
        }
        // Whole loop at rest: temperatures equalize with the return water.
        let t_re = x.0[21];
        return Ok(NetworkFlows {
            t_sl: t_re,
            t_rec: t_re,
            t_slc: t_re,
            t_cp: t_re,
            t_hp: t_re,
            g_sl: 0.0,
            g_st: 0.0,
            g_all: 0.0,
            p_pmp: 0.0,
            q_sl: 0.0,
        });
    }

    let t_re = x.0[21];
    let t_stc = p.cs_t_cold_nom - p.cs_k_cold * (x.0[18] - p.cs_sot_ref);
    let t_sth = p.cs_t_hot_nom + p.cs_k_hot * (p.cs_sot_ref - x.0[18]);

    // Discharge: hot pipe carries return water to the hot tank, cold pipe
    // draws from the cold tank. Charge: hot pipe draws from the hot tank,
    // cold pipe receives chiller supply water.
    let t_hp = z_st * t_re + (1.0 - z_st) * t_sth;
    let t_rec = (g_sl * t_re - g_st * t_hp) / g_chill;

    let t_ab_v = t_ab(x, p);
    let t_ec_v = t_ec(x, t_rec);
    let t_slc = (g_ab * t_ab_v + g_ec * t_ec_v) / g_chill;
    let t_cp = z_st * t_stc + (1.0 - z_st) * t_slc;

    let t_sl = (g_ab * t_ab_v + g_ec * t_ec_v + g_st * t_cp) / g_sl;
    let q_sl = g_sl * C_W * (t_re - t_sl);

    let head = p.pmp_h0 + p.pmp_h2 * g_all * g_all;
    let eta = (p.pmp_eta_max - p.pmp_eta_curv * (g_all - p.pmp_g_peak).powi(2)).max(0.2);
    let p_pmp = g_all * G_E * head / (1000.0 * eta);

    let flows = NetworkFlows {
        t_sl,
        t_rec,
        t_slc,
        t_cp,
        t_hp,
        g_sl,
        g_st,
        g_all,
        p_pmp,
        q_sl,
    };
    if [t_sl, t_rec, t_slc, t_cp, t_hp].iter().any(|v| !v.is_finite()) {
        return Err(PlantError::DegenerateFlow { chiller_flow: g_chill });
    }
    Ok(flows)
}

/// Battery terminal voltage, V.
fn battery_voltage(x: &PlantState, p: &PlantParams) -> f64 {
    let e_m = p.ba_e_m0 + p.ba_k_soc * (x.0[16] - p.ba_soc_ref);
    let i_cell = x.0[17] / p.ba_n_parallel;
    p.ba_n_series * (e_m - x.0[15] - p.ba_r0 * i_cell)
}

/// Fuel-cell stack voltage, V (linear surrogate of open-circuit potential and
/// activation/concentration/resistance losses around the nominal point).
fn fc_voltage(x: &PlantState, p: &PlantParams) -> f64 {
    p.fc_v_nom - p.fc_r_v * (x.0[0] - p.fc_i_nom) + p.fc_v_po2 * (x.0[2] - p.fc_po2_nom)
        - p.fc_v_ph2o * (x.0[3] - p.fc_ph2o_nom)
        + p.fc_v_ph2 * (x.0[4] - p.fc_ph2_nom)
}

/// All per-unit powers at the given point.
pub fn unit_powers(
    x: &PlantState,
    u: &ContinuousInput,
    z: &IntegerInput,
    w: &Disturbance,
    p: &PlantParams,
) -> Result<UnitPowers, PlantError> {
    let net = water_network(u, z, x, p)?;
    let p_pv = pv_power(w, p);
    let p_fc = z.get(0) * fc_voltage(x, p) * x.0[0] / 1000.0;
    let p_mt = z.get(1) * (p.mt_p_nom + x.0[5]);
    let p_ba = battery_voltage(x, p) * x.0[17] / 1000.0;
    let p_cp = z.get(2) * p.ec_k_cp * u.0[3] * (x.0[9] - x.0[12]);
    let t_ab_v = t_ab(x, p);
    let t_ec_v = t_ec(x, net.t_rec);
    let q_ab = u.0[2] * C_W * (net.t_rec - t_ab_v);
    let q_ec = u.0[4] * C_W * (net.t_rec - t_ec_v);
    let q_st = net.g_st * C_W * (net.t_hp - net.t_cp);
    Ok(UnitPowers {
        p_pv,
        p_fc,
        p_mt,
        p_ba,
        p_cp,
        p_pmp: net.p_pmp,
        q_ab,
        q_ec,
        q_st,
        q_sl: net.q_sl,
        t_ab: t_ab_v,
        t_ec: t_ec_v,
    })
}

/// The 23-state vector field dx/dτ.
pub fn derivatives(
    x: &PlantState,
    u: &ContinuousInput,
    z: &IntegerInput,
    w: &Disturbance,
    p: &PlantParams,
) -> Result<[f64; NX], PlantError> {
    let net = water_network(u, z, x, p)?;
    let s = &x.0;
    let mut dx = [0.0; NX];

    // Fuel cell: reformer feeds hydrogen, pressures follow current draw, the
    // stack current relaxes to what the reactant pressures sustain.
    let i_stack = z.get(0)
        * p.fc_i_nom
        * (1.0
            + p.fc_g_po2 / p.fc_i_nom * (s[2] - p.fc_po2_nom)
            + p.fc_g_ph2 / p.fc_i_nom * (s[4] - p.fc_ph2_nom));
    dx[0] = (i_stack - s[0]) / p.tau[0];
    dx[1] = (p.fc_k_reform * u.0[0] - s[1]) / p.tau[1];
    dx[2] = (p.fc_po2_nom - p.fc_s_po2 * (s[0] - p.fc_i_nom) - s[2]) / p.tau[2];
    dx[3] = (p.fc_ph2o_nom + p.fc_s_ph2o * (s[0] - p.fc_i_nom) - s[3]) / p.tau[3];
    dx[4] = (p.fc_ph2_nom + p.fc_s_ph2_g * (s[1] - p.fc_gh2_nom)
        - p.fc_s_ph2_i * (s[0] - p.fc_i_nom)
        - s[4])
        / p.tau[4];

    // Microturbine power increment and the absorption chiller's three
    // chilled-water temperature increments.
    dx[5] = (p.mt_k_fuel * u.0[1] - p.mt_p_nom - s[5]) / p.tau[5];
    dx[6] = (-p.ab_k_exhaust * s[5] - s[6]) / p.tau[6];
    dx[7] = (p.ab_k_flow * (u.0[2] - p.ab_g_nom) - s[7]) / p.tau[7];
    dx[8] = (p.ab_k_return * (net.t_rec - p.ab_t_rec_nom) - s[8]) / p.tau[8];

    // Electric chiller: condenser side (t_c, t_cs, t_cwm) and evaporator side
    // (t_e, t_es, t_ewm). Shells exchange with both the refrigerant and the
    // water streams; compressor speed sets the refrigerant temperature lift.
    dx[9] = (s[10] + p.ec_k_cond_push * u.0[3] - s[9]) / p.tau[9];
    dx[10] = (p.ec_ua_rc * (s[9] - s[10]) - p.ec_ua_wc * (s[10] - s[11])) / p.ec_c_cs;
    dx[11] = (p.ec_ua_wc * (s[10] - s[11]) - p.ec_ua_tower * (s[11] - w.t_a())) / p.ec_c_cw;
    dx[12] = (s[13] - p.ec_k_evap_pull * u.0[3] - s[12]) / p.tau[12];
    dx[13] = (p.ec_ua_re * (s[12] - s[13]) + p.ec_ua_we * (s[14] - s[13])) / p.ec_c_es;
    dx[14] = (2.0 * u.0[4] * C_W * (net.t_rec - s[14]) - p.ec_ua_we * (s[14] - s[13])) / p.ec_c_ew;

    // Battery: converter drives the through current toward the power
    // reference with polarization and SOC-maintenance droop.
    let i_cmd = p.ba_k_pref * u.0[6] - p.ba_g_vcap * s[15] + p.ba_g_soc * (s[16] - p.ba_soc_ref);
    dx[15] = (p.ba_r1 * s[17] / p.ba_n_parallel - s[15]) / p.tau[15];
    dx[16] = -s[17] / (3600.0 * p.ba_ah_total) - (s[16] - p.ba_soc_ref) / p.tau[16];
    dx[17] = (i_cmd - s[17]) / p.tau[17];

    // Cold storage: stored-cold state plus water inventory of the two tanks.
    let q_st = net.g_st * C_W * (net.t_hp - net.t_cp);
    dx[18] = -q_st / p.cs_cap_kj - (s[18] - p.cs_sot_ref) / p.tau[18];
    dx[19] = -C_W * net.g_st - (s[19] - p.cs_tank_cap_nom) / p.tau[19];
    dx[20] = C_W * net.g_st - (s[20] - p.cs_tank_cap_nom) / p.tau[20];

    // Fan coil: supply water picks up the building load.
    let t_wm = 0.5 * (net.t_sl + s[21]);
    dx[21] = (net.g_sl * C_W * (net.t_sl - s[21]) + p.fcu_u * (s[22] - t_wm)) / p.fcu_c;

    // Building thermal balance.
    dx[22] = (p.br_u * (w.t_a() - s[22]) - net.q_sl + w.q_o()) / p.br_c;

    if dx.iter().any(|v| !v.is_finite()) {
        return Err(PlantError::DegenerateFlow {
            chiller_flow: u.0[2] + u.0[4],
        });
    }
    Ok(dx)
}

/// Controlled outputs `y = [P_sl, t_br]`.
pub fn outputs(
    x: &PlantState,
    u: &ContinuousInput,
    z: &IntegerInput,
    w: &Disturbance,
    p: &PlantParams,
) -> Result<Output, PlantError> {
    let pw = unit_powers(x, u, z, w, p)?;
    let p_sl = pw.p_pv + pw.p_fc + pw.p_mt + pw.p_ba - pw.p_cp - pw.p_pmp - w.p_d();
    Ok(Output([p_sl, x.0[22]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal() -> (PlantParams, PlantState, ContinuousInput, IntegerInput, Disturbance) {
        let p = PlantParams::default();
        let x = PlantState(p.nominal_state());
        let u = ContinuousInput(p.nominal_u);
        let z = IntegerInput::ALL_ON;
        let w = Disturbance(p.nominal_w);
        (p, x, u, z, w)
    }

    #[test]
    fn pv_matches_nominal_calibration() {
        let (p, _, _, _, w) = nominal();
        let v = pv_power(&w, &p);
        assert!((v - 44.0).abs() / 44.0 < 0.01, "P_pv = {v}");
    }

    #[test]
    fn pv_zero_irradiance_gives_zero() {
        let p = PlantParams::default();
        for t_a in [-10.0, 0.0, 25.0, 45.0] {
            let v = pv_power(&Disturbance([t_a, 0.0, 0.0, 0.0]), &p);
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn pv_half_irradiance_matches_surrogate_formula() {
        let (p, _, _, _, w) = nominal();
        let half = Disturbance([w.t_a(), w.s_ra() / 2.0, 0.0, 0.0]);
        let v = pv_power(&half, &p);
        // Direct evaluation of the efficiency-times-irradiance surrogate.
        let expected = 0.18 * (1.0 - 0.004 * (30.0 - 25.0)) * 400.0 * p.pv_area_eff / 1000.0;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 22.0).abs() < 1e-9);
    }

    #[test]
    fn pv_monotone_in_irradiance() {
        let p = PlantParams::default();
        let mut last = -1.0;
        for s_ra in [0.0, 100.0, 300.0, 550.0, 800.0, 1000.0] {
            let v = pv_power(&Disturbance([30.0, s_ra, 0.0, 0.0]), &p);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn supply_temperature_is_flow_weighted_mix() {
        let (p, mut x, mut u, z, _) = nominal();
        // All chilled streams at 7 °C mix to 7 °C.
        let net = water_network(&u, &z, &x, &p).unwrap();
        assert!((net.t_sl - 7.0).abs() < 1e-9, "t_sl = {}", net.t_sl);

        // Equal flows at 6 and 8 °C average to 7. Force t_ab = 6 via the
        // increment states and t_ec = 8 via t_ewm with zero storage flow.
        x.0[6] = -1.0;
        u.0[2] = 2.0;
        u.0[4] = 2.0;
        u.0[5] = 0.0;
        let t_rec = x.0[21]; // g_st = 0 so the return mixes to t_re
        x.0[14] = (8.0 + t_rec) / 2.0;
        let net = water_network(&u, &z, &x, &p).unwrap();
        assert!((net.t_sl - 7.0).abs() < 1e-9);
    }

    #[test]
    fn flow_identities_hold() {
        let (p, x, mut u, z, _) = nominal();
        u.0[5] = 0.4;
        let net = water_network(&u, &z, &x, &p).unwrap();
        assert!((net.g_sl - (u.0[2] + u.0[4] + net.g_st)).abs() < 1e-12);
        assert!((net.g_all - (u.0[2] + u.0[4] + u.0[5])).abs() < 1e-12);
        // Mixing conservation: G_sl t_sl = G_ab t_ab + G_ec t_ec + G_st t_cp.
        let t_ab_v = p.ab_t_nom + x.0[6] + x.0[7] + x.0[8];
        let t_ec_v = 2.0 * x.0[14] - net.t_rec;
        let lhs = net.g_sl * net.t_sl;
        let rhs = u.0[2] * t_ab_v + u.0[4] * t_ec_v + net.g_st * net.t_cp;
        assert!((lhs - rhs).abs() / lhs.abs() < 1e-12);
    }

    #[test]
    fn pump_power_matches_nominal_calibration() {
        let (p, x, u, z, _) = nominal();
        let net = water_network(&u, &z, &x, &p).unwrap();
        assert!(
            (net.p_pmp - 13.9).abs() / 13.9 < 0.01,
            "P_pmp = {}",
            net.p_pmp
        );
    }

    #[test]
    fn degenerate_flow_is_reported() {
        let (p, x, z, w) = {
            let (p, x, _, z, w) = nominal();
            (p, x, z, w)
        };
        let u = ContinuousInput([0.0018, 0.0053, 0.0, 30.0, 0.0, 0.5, 0.0]);
        let err = water_network(&u, &z, &x, &p).unwrap_err();
        assert!(matches!(err, PlantError::DegenerateFlow { .. }));
        let _ = w;
    }

    #[test]
    fn idle_loop_is_total() {
        let (p, x, _, z, _) = nominal();
        let u = ContinuousInput([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let net = water_network(&u, &z, &x, &p).unwrap();
        assert_eq!(net.q_sl, 0.0);
        assert_eq!(net.p_pmp, 0.0);
    }

    #[test]
    fn building_row_cancels_when_balanced() {
        let (p, mut x, u, z, mut w) = nominal();
        x.0[22] = 26.0;
        let net = water_network(&u, &z, &x, &p).unwrap();
        w.0[0] = x.0[22]; // t_a = t_br
        w.0[3] = net.q_sl; // Q_o = Q_sl
        let dx = derivatives(&x, &u, &z, &w, &p).unwrap();
        assert_eq!(dx[22], 0.0);
    }

    #[test]
    fn nominal_point_is_near_equilibrium() {
        let (p, x, u, z, w) = nominal();
        let dx = derivatives(&x, &u, &z, &w, &p).unwrap();
        for (i, d) in dx.iter().enumerate() {
            assert!(d.abs() < 1e-9, "dx[{i}] = {d}");
        }
    }

    #[test]
    fn fuel_increase_raises_mt_power_state() {
        let (p, x, mut u, z, w) = nominal();
        u.0[1] *= 1.01;
        let dx = derivatives(&x, &u, &z, &w, &p).unwrap();
        assert!(dx[5] > 0.0);
    }

    #[test]
    fn output_balance_from_nominal_components() {
        let (p, x, u, z, mut w) = nominal();
        w.0[2] = 0.0; // P_d = 0
        let y = outputs(&x, &u, &z, &w, &p).unwrap();
        // 44 + 40 + 80 + 0 - 12.6 - 13.9
        assert!((y.p_sl() - 137.5).abs() < 0.15, "y1 = {}", y.p_sl());
        let pw = unit_powers(&x, &u, &z, &w, &p).unwrap();
        let residual = y.p_sl() + pw.p_cp + pw.p_pmp + w.p_d()
            - (pw.p_pv + pw.p_fc + pw.p_mt + pw.p_ba);
        assert!(residual.abs() < 1e-12);
    }

    #[test]
    fn z_fc_zero_removes_fc_power() {
        let (p, x, u, _, w) = nominal();
        let y_on = outputs(&x, &u, &IntegerInput([1, 1, 1, 1]), &w, &p).unwrap();
        let y_off = outputs(&x, &u, &IntegerInput([0, 1, 1, 1]), &w, &p).unwrap();
        let pw = unit_powers(&x, &u, &IntegerInput([0, 1, 1, 1]), &w, &p).unwrap();
        assert_eq!(pw.p_fc, 0.0);
        assert!((y_on.p_sl() - y_off.p_sl() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn output_t_br_is_state_identity() {
        let (p, mut x, u, z, w) = nominal();
        x.0[22] = 23.456789;
        let y = outputs(&x, &u, &z, &w, &p).unwrap();
        assert_eq!(y.t_br(), x.0[22]);
    }

    #[test]
    fn nominal_unit_powers_match_calibration_table() {
        let (p, x, u, z, w) = nominal();
        let pw = unit_powers(&x, &u, &z, &w, &p).unwrap();
        let checks = [
            (pw.p_pv, 44.0),
            (pw.p_fc, 40.0),
            (pw.p_mt, 80.0),
            (pw.p_cp, 12.6),
            (pw.p_pmp, 13.9),
            (pw.q_ab, 75.0),
            (pw.q_ec, 50.0),
            (pw.q_sl, 125.0),
        ];
        for (got, want) in checks {
            assert!(
                (got - want).abs() / want.abs() < 0.01,
                "got {got}, want {want}"
            );
        }
        assert!(pw.p_ba.abs() < 1e-9);
        assert!(pw.q_st.abs() < 1e-12);
        assert!((pw.t_ab - 7.0).abs() < 1e-9);
        assert!((pw.t_ec - 7.0).abs() < 1e-9);
    }
}
