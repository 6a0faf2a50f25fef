//! Browser bindings. Every entry point takes plain numbers or JSON text and
//! returns JSON text; the `*_json` functions hold the logic so they can be
//! tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wyner_core::data::{compose_dataset_joint, draw_samples, DatasetSpec, Split};
use wyner_core::eval::{best_label_accuracy, cluster_predict, plane_point, wyner_line, MatchMode, PlaneCoords};
use wyner_core::info::{mutual_information, to_bits};
use wyner_core::model::Encoder;
use wyner_core::record::{RunOutput, SolverKind};
use wyner_core::representation::{solve_admm, solve_baseline, AdmmConfig, BaselineConfig};
use wyner_core::variational::{solve_variational, VariationalConfig};
use wyner_core::Result;

/// Iteration cap for a single browser solve.
pub const MAX_DEMO_ITERS: usize = 20_000;

fn spec(delta: f64, block: usize) -> DatasetSpec {
    DatasetSpec { delta, block, ..DatasetSpec::default() }
}

#[derive(Debug, Serialize)]
struct DatasetView {
    x_card: usize,
    views_mi: f64,
    /// Row-major `P(x1, x2)`.
    joint: Vec<f64>,
}

pub fn dataset_json(delta: f64, block: usize) -> Result<String> {
    let spec = spec(delta, block);
    spec.validate()?;
    let joint = compose_dataset_joint(&spec)?;
    let view = DatasetView {
        x_card: spec.x_card,
        views_mi: to_bits(mutual_information(&joint, &[0], &[1])?),
        joint: joint.mass().to_vec(),
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Debug, Serialize)]
struct SolveView {
    solver: String,
    converged: bool,
    iterations: usize,
    objective: f64,
    plane: PlaneCoords,
    wyner_line: f64,
    /// Most likely latent for each `(x1, x2)`, row-major.
    latent_map: Vec<usize>,
    objectives: Vec<(usize, f64)>,
    encoder: String,
}

fn dispatch(kind: SolverKind, multiplier: f64, z_card: usize, max_iters: usize, seed: u64, delta: f64, block: usize) -> Result<RunOutput> {
    let joint = compose_dataset_joint(&spec(delta, block))?;
    let max_iters = max_iters.min(MAX_DEMO_ITERS);
    Ok(match kind {
        SolverKind::Admm => {
            solve_admm(&joint, &AdmmConfig { gamma: multiplier, z_card, max_iters, seed, ..AdmmConfig::default() })?
        }
        SolverKind::Baseline => solve_baseline(
            &joint,
            &BaselineConfig { gamma: multiplier, z_card, max_iters, seed, ..BaselineConfig::default() },
        )?,
        SolverKind::Variational => solve_variational(
            &joint,
            &VariationalConfig { beta: multiplier, z_card, outer_max_iters: max_iters, seed, ..VariationalConfig::default() },
        )?
        .into_output(),
    })
}

pub fn solve_json(solver: &str, multiplier: f64, z_card: usize, max_iters: usize, seed: u64, delta: f64, block: usize) -> Result<String> {
    let kind: SolverKind = solver.parse()?;
    let out = dispatch(kind, multiplier, z_card, max_iters, seed, delta, block)?;
    let joint = compose_dataset_joint(&spec(delta, block))?;
    let plane = plane_point(&out.encoder, &joint)?;
    let cond = out.encoder.to_cond();
    let latent_map = (0..cond.given_card())
        .map(|g| {
            let row = cond.row(g);
            (0..row.len()).fold(0, |best, z| if row[z] > row[best] { z } else { best })
        })
        .collect();
    let r = &out.record;
    let view = SolveView {
        solver: kind.to_string(),
        converged: r.converged,
        iterations: r.iterations,
        objective: r.metrics.objective,
        plane,
        wyner_line: wyner_line(plane.sum_view_mi, plane.views_mi),
        latent_map,
        objectives: r.trajectory.iter().map(|p| (p.iteration, p.objective)).collect(),
        encoder: out.encoder.to_json(),
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

/// Clusters fresh test samples with a solved encoder and scores the best
/// latent-to-label matching.
pub fn cluster_json(encoder: &str, delta: f64, block: usize, n_test: usize, seed: u64) -> Result<String> {
    let encoder = Encoder::from_json(encoder)?;
    let spec = DatasetSpec { n_test, seed, ..spec(delta, block) };
    spec.validate()?;
    let test = draw_samples(&spec, Split::Test)?;
    let hypotheses = cluster_predict(&encoder, &test, seed)?;
    let report = best_label_accuracy(&hypotheses, &test.labels, encoder.z_card(), test.y_card, MatchMode::Assignment)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Exact circulant joint and its `I(X1;X2)` in bits.
#[wasm_bindgen]
pub fn dataset(delta: f64, block: usize) -> std::result::Result<String, JsError> {
    js(dataset_json(delta, block))
}

/// One solve on the exact joint; `multiplier` is gamma for `admm` and
/// `baseline`, beta for `variational`.
#[wasm_bindgen]
pub fn solve(
    solver: &str,
    multiplier: f64,
    z_card: usize,
    max_iters: usize,
    seed: u64,
    delta: f64,
    block: usize,
) -> std::result::Result<String, JsError> {
    js(solve_json(solver, multiplier, z_card, max_iters, seed, delta, block))
}

#[wasm_bindgen]
pub fn cluster(encoder: &str, delta: f64, block: usize, n_test: usize, seed: u64) -> std::result::Result<String, JsError> {
    js(cluster_json(encoder, delta, block, n_test, seed))
}
