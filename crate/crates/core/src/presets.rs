//! The five two-dimensional experiments on the unit square.
//!
//! Every preset starts with `int u0 = 3`.

use crate::error::{Error, Result};
use crate::scalar::ModelParams;
use crate::timestepper::{InitialData, SchemeConfig};

pub const PRESET_NAMES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4a", "fig4b", "fig5"];

/// Default resolution for presets.
pub const PRESET_CELLS: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub params: ModelParams,
    pub u0: InitialData,
    pub v0: InitialData,
    pub scheme: SchemeConfig,
    pub cells: usize,
    /// Caveats echoed into the manifest.
    pub notes: Vec<String>,
}

fn params(d2: f64, chi: f64, c: f64) -> ModelParams {
    ModelParams::new(1.0, d2, chi, 1.0, 1.0, c, 3.0).expect("preset parameters are valid")
}

fn scheme(t_end: f64, snapshot_times: &[f64]) -> SchemeConfig {
    SchemeConfig {
        dt_max: 20.0,
        cfl_safety: 0.5,
        steady_tol: 1e-7,
        t_end,
        snapshot_times: snapshot_times.to_vec(),
    }
}

fn fig1_data() -> (InitialData, InitialData) {
    let u0 = InitialData::constant(3.0).with_term(-1.0, 1.0, 0.0, 1.0, 0.0);
    let v0 = InitialData::constant(3.0)
        .with_term(1.0, 1.0, 0.25, 1.0, 0.25)
        .with_term(1.0, 1.0, 0.5, 1.0, 0.5);
    (u0, v0)
}

fn fig4_u0() -> InitialData {
    InitialData::constant(3.0)
        .with_term(-1.0, 1.0, 0.0, 1.0, 0.0)
        .with_term(-1.0, 1.0, 1.0, 1.0, 1.0)
}

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "fig1" => {
            let (u0, v0) = fig1_data();
            Preset {
                name: "fig1",
                description: "c = 0.1: interior spike migrating to the corner (0,0)",
                params: params(0.01, 3.0, 0.1),
                u0,
                v0,
                scheme: scheme(40000.0, &[0.0, 10.0, 100.0, 1000.0, 5000.0, 10000.0, 15000.0, 20000.0, 21000.0, 22000.0, 30000.0, 40000.0]),
                cells: PRESET_CELLS,
                notes: Vec::new(),
            }
        }
        "fig2" => {
            let (u0, v0) = fig1_data();
            Preset {
                name: "fig2",
                description: "c = 5: single corner spike on a platform",
                params: params(0.01, 3.0, 5.0),
                u0,
                v0,
                scheme: scheme(5000.0, &[0.0, 10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 5000.0]),
                cells: PRESET_CELLS,
                notes: vec![
                    "known discrepancy: published platform height 0.02 versus theoretical t* = beta M / (alpha |Omega|) = 3".into(),
                ],
            }
        }
        "fig3" => Preset {
            name: "fig3",
            description: "c = 10: convergence to the constant state (3, 3)",
            params: params(0.01, 3.0, 10.0),
            u0: InitialData::constant(3.0).with_term(1.0, 2.0, 0.0, 2.0, 0.0),
            v0: InitialData::constant(3.0).with_term(-1.0, 2.0, 0.0, 2.0, 0.0),
            scheme: scheme(1000.0, &[0.0, 1.0, 5.0, 10.0, 50.0, 100.0]),
            cells: PRESET_CELLS,
            notes: Vec::new(),
        },
        "fig4a" => Preset {
            name: "fig4a",
            description: "chi = 5: interior spike where v0 peaks, at (1/2, 1/2)",
            params: params(0.01, 5.0, 1.0),
            u0: fig4_u0(),
            v0: InitialData::constant(3.0).with_term(1.0, 1.0, 0.5, 1.0, 0.5),
            scheme: scheme(5000.0, &[0.0, 10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 5000.0]),
            cells: PRESET_CELLS,
            notes: vec!["chi = 5 applies to both initial-data sets".into()],
        },
        "fig4b" => Preset {
            name: "fig4b",
            description: "chi = 5: double boundary spike at (0,0) and (1,1)",
            params: params(0.01, 5.0, 1.0),
            u0: fig4_u0(),
            v0: InitialData::constant(3.0)
                .with_term(1.0, 1.0, 0.0, 1.0, 0.0)
                .with_term(1.0, 1.0, 1.0, 1.0, 1.0),
            scheme: scheme(5000.0, &[0.0, 10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 5000.0]),
            cells: PRESET_CELLS,
            notes: vec!["chi = 5 applies to both initial-data sets".into()],
        },
        "fig5" => Preset {
            name: "fig5",
            description: "d2 = 0.001: metastable multi-spikes collapsing to a centre spike",
            params: params(0.001, 3.0, 1.0),
            u0: InitialData::constant(3.0).with_term(0.1, 1.0, 0.0, 1.0, 0.0),
            v0: InitialData::constant(3.0).with_term(1.0, 2.0, 0.0, 2.0, 0.0),
            scheme: scheme(30000.0, &[0.0, 10.0, 100.0, 300.0, 500.0, 1000.0, 2000.0, 3000.0, 5000.0, 8000.0, 10000.0, 20000.0, 30000.0]),
            cells: PRESET_CELLS,
            notes: Vec::new(),
        },
        other => {
            return Err(Error::Validation(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}
