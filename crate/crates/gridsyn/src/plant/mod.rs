//! Nonlinear dynamic model of the grid-connected IES.
//!
//! State vector (23 entries, fixed order):
//!
//! | idx | symbol  | unit   | meaning                                              |
//! |-----|---------|--------|------------------------------------------------------|
//! | 0   | I_f     | A      | inside current, fuel cell                            |
//! | 1   | G_H2    | mol/s  | hydrogen molar flow, fuel cell                       |
//! | 2   | p_O2    | atm    | oxygen partial pressure, fuel cell                   |
//! | 3   | p_H2O   | atm    | vapor partial pressure, fuel cell                    |
//! | 4   | p_H2    | atm    | hydrogen partial pressure, fuel cell                 |
//! | 5   | P_mtf   | kW     | power increment from fuel flow, microturbine         |
//! | 6   | t_abf   | °C     | chilled-water temp increment from exhaust, AB        |
//! | 7   | t_abw   | °C     | chilled-water temp increment from return flow, AB    |
//! | 8   | t_abt   | °C     | chilled-water temp increment from return temp, AB    |
//! | 9   | t_c     | °C     | condensing temperature, electric chiller             |
//! | 10  | t_cs    | °C     | condenser shell temperature, electric chiller        |
//! | 11  | t_cwm   | °C     | mean cooling-water temperature, electric chiller     |
//! | 12  | t_e     | °C     | evaporating temperature, electric chiller            |
//! | 13  | t_es    | °C     | evaporator shell temperature, electric chiller       |
//! | 14  | t_ewm   | °C     | mean chilled-water temperature, electric chiller     |
//! | 15  | v_cap   | V      | polarization voltage, battery                        |
//! | 16  | C_soc   | —      | state of charge, battery (0..1)                      |
//! | 17  | I_ba    | A      | through current, battery                             |
//! | 18  | C_sot   | —      | state of stored cold water (0..1)                    |
//! | 19  | C_stc   | kJ/°C  | heat capacity of water in cold tank                  |
//! | 20  | C_sth   | kJ/°C  | heat capacity of water in hot tank                   |
//! | 21  | t_re    | °C     | return water temperature, fan coil unit              |
//! | 22  | t_br    | °C     | building temperature                                 |
//!
//! Continuous inputs `u = [G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar]`,
//! integer inputs `z = [z_fc, z_ma, z_ec, z_st]`, disturbances
//! `w = [t_a, S_ra, P_d, Q_o]`, outputs `y = [P_sl, t_br]`.
//!
//! Sign conventions: `P_ba > 0` discharging, `Q_st > 0` discharging. When
//! `z_st = 1` the cold storage is discharged.

mod integrate;
mod model;
pub mod params;

pub use integrate::{equilibrium, rk4_step, step};
pub use model::{derivatives, outputs, pv_power, unit_powers, water_network, NetworkFlows, UnitPowers};
pub use params::PlantParams;

use thiserror::Error;

/// Number of states.
pub const NX: usize = 23;
/// Number of continuous inputs.
pub const NU: usize = 7;
/// Number of integer inputs.
pub const NZ: usize = 4;
/// Number of disturbances.
pub const ND: usize = 4;
/// Number of outputs.
pub const NY: usize = 2;

#[derive(Debug, Error)]
pub enum PlantError {
    /// Chilled-water output requested while no chiller stream flows; the
    /// return-side mixing temperature would be undefined.
    #[error("degenerate water network: G_ab + G_ec = {chiller_flow} while flow is requested")]
    DegenerateFlow { chiller_flow: f64 },
    /// A state left its physical envelope during integration.
    #[error("integration diverged: state x{} = {value} outside [{min}, {max}]", index + 1)]
    IntegrationDiverged {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    /// Newton refinement of an equilibrium failed to reach tolerance.
    #[error("equilibrium refinement stalled at residual {residual}")]
    EquilibriumNotFound { residual: f64 },
    /// A malformed parameter file or parameter value.
    #[error("parameter error: {0}")]
    Params(String),
}

/// State vector of the IES, ordered as documented on the module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState(pub [f64; NX]);

/// Continuous input vector `[G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousInput(pub [f64; NU]);

/// Integer input vector `[z_fc, z_ma, z_ec, z_st]`, each 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegerInput(pub [u8; NZ]);

/// Disturbance vector `[t_a, S_ra, P_d, Q_o]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance(pub [f64; ND]);

/// Output vector `[P_sl, t_br]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Output(pub [f64; NY]);

impl PlantState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Symbol labels in state order, used for CSV headers and graph nodes.
    pub const LABELS: [&'static str; NX] = [
        "I_f", "G_H2", "p_O2", "p_H2O", "p_H2", "P_mtf", "t_abf", "t_abw", "t_abt", "t_c", "t_cs",
        "t_cwm", "t_e", "t_es", "t_ewm", "v_cap", "C_soc", "I_ba", "C_sot", "C_stc", "C_sth",
        "t_re", "t_br",
    ];

    /// Checks the capacity-state and envelope invariants.
    pub fn validate(&self, p: &PlantParams) -> Result<(), PlantError> {
        for (i, (&v, &(lo, hi))) in self.0.iter().zip(p.state_envelope.iter()).enumerate() {
            if !v.is_finite() || v < lo || v > hi {
                return Err(PlantError::IntegrationDiverged {
                    index: i,
                    value: v,
                    min: lo,
                    max: hi,
                });
            }
        }
        Ok(())
    }
}

impl ContinuousInput {
    pub const LABELS: [&'static str; NU] = ["G_ff", "G_fm", "G_ab", "N_ec", "G_ec", "G_stu", "P_bar"];

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// True when every component is inside the (z-gated) box and every flow
    /// component is nonnegative.
    pub fn within_bounds(&self, p: &PlantParams, z: &IntegerInput) -> bool {
        let (lo, hi) = p.input_bounds_gated(z);
        self.0
            .iter()
            .zip(lo.iter().zip(hi.iter()))
            .all(|(&u, (&l, &h))| u >= l - 1e-9 && u <= h + 1e-9)
    }
}

impl IntegerInput {
    pub const LABELS: [&'static str; NZ] = ["z_fc", "z_ma", "z_ec", "z_st"];

    pub const ALL_ON: IntegerInput = IntegerInput([1, 1, 1, 1]);

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.0.iter().all(|&z| z <= 1) {
            Ok(())
        } else {
            Err(PlantError::Params("integer inputs must be 0 or 1".into()))
        }
    }
}

impl Disturbance {
    pub const LABELS: [&'static str; ND] = ["t_a", "S_ra", "P_d", "Q_o"];

    pub fn t_a(&self) -> f64 {
        self.0[0]
    }
    pub fn s_ra(&self) -> f64 {
        self.0[1]
    }
    pub fn p_d(&self) -> f64 {
        self.0[2]
    }
    pub fn q_o(&self) -> f64 {
        self.0[3]
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.s_ra() < 0.0 || self.p_d() < 0.0 {
            return Err(PlantError::Params(
                "S_ra and P_d must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

impl Output {
    pub const LABELS: [&'static str; NY] = ["P_sl", "t_br"];

    pub fn p_sl(&self) -> f64 {
        self.0[0]
    }
    pub fn t_br(&self) -> f64 {
        self.0[1]
    }
}
